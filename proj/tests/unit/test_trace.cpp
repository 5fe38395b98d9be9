#include <cmath>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "golden.hpp"
#include "shopsim/error.hpp"
#include "shopsim/trace.hpp"

using namespace shopsim;
using testutil::TempDir;

namespace {

Trajectory make_run(const std::string& id, RunStatus status = RunStatus::completed) {
  Trajectory t;
  t.run_id = id;
  t.spec = testutil::golden_spec();
  t.spec.run_id = id;
  t.prompt_version = "test";
  t.status = status;
  StageRecord s;
  s.stage = StageName::strategy;
  s.calls.push_back({"1", "golden", "text for " + id, 100, 20});
  t.stages.push_back(s);
  if (status == RunStatus::failed) {
    t.failed_stage = StageName::pitch;
    t.error = "boom";
  }
  return t;
}

// A run whose calls all go to `backend`, split across two stages, with the
// given decision.
Trajectory priced_run(const std::string& id, const std::string& backend, bool purchase, std::int64_t in,
                      std::int64_t out) {
  Trajectory t = make_run(id);
  t.stages.clear();
  StageRecord a;
  a.stage = StageName::strategy;
  a.calls.push_back({"1", backend, "x", in / 2, out / 3});
  StageRecord d;
  d.stage = StageName::purchase_decision;
  d.calls.push_back({"1", backend, "y", in - in / 2, out - out / 3});
  d.parsed = PurchaseDecision{purchase, purchase ? 1 : 0, "", Sentiment::neutral, ""};
  t.stages.push_back(a);
  t.stages.push_back(d);
  return t;
}

struct CostRow {
  const char* model;
  double pin, pout;
  std::int64_t np_in, np_out;
  double np_cost;
  std::int64_t p_in, p_out;
  double p_cost;
};

// Mean tokens per run and reported per-run cost for each backend.
const std::vector<CostRow> kCostRows = {
    {"Qwen3-80B", 0.090, 1.10, 17515, 2092, 0.0039, 27098, 2773, 0.0055},
    {"Qwen3-235B", 0.071, 0.10, 20836, 2509, 0.0017, 32609, 3376, 0.0027},
    {"GPT-oss-120B", 0.039, 0.19, 38462, 3580, 0.0022, 62930, 5346, 0.0035},
    {"DeepSeek-V3.2", 0.260, 0.38, 28331, 2456, 0.0083, 43989, 3338, 0.0127},
    {"Gemini-3-Flash", 0.5, 3.0, 27720, 2787, 0.0222, 39623, 3581, 0.0306},
    {"Gemini-3.1-Pro", 2.0, 12.0, 23766, 2590, 0.0786, 36151, 3484, 0.1141},
    {"GPT-5.4-mini", 0.75, 4.5, 25752, 2467, 0.0304, 42636, 3011, 0.0455},
    {"GPT-5.4", 2.5, 15.0, 36207, 3367, 0.1410, 54567, 4383, 0.2022},
};

}  // namespace

TEST_CASE("store round trip and supersede rules") {
  TempDir dir;
  const auto path = dir / "nested/traces.jsonl";
  {
    TraceStore store(path);
    store.append(make_run("a", RunStatus::failed));
    store.append(make_run("a"));  // failed then completed is fine
    store.append(make_run("b"));
    CHECK_THROWS_AS(store.append(make_run("b")), DuplicateRunError);
    CHECK_THROWS_AS(store.append(make_run("a", RunStatus::failed)), DuplicateRunError);
    CHECK(store.completed_ids() == std::set<std::string>{"a", "b"});
  }
  auto loaded = load_traces(path);
  CHECK(loaded.records == 3);
  REQUIRE(loaded.trajectories.size() == 2);
  CHECK(loaded.trajectories[0].run_id == "a");
  CHECK(loaded.trajectories[0].status == RunStatus::completed);
  CHECK(trajectory_to_json(loaded.trajectories[1]) == trajectory_to_json(make_run("b")));

  // a reopened store carries the completed set forward
  TraceStore again(path);
  CHECK_THROWS_AS(again.append(make_run("a")), DuplicateRunError);
  again.append(make_run("c"));
  CHECK(load_traces(path).trajectories.size() == 3);

  CHECK(load_traces(dir / "absent.jsonl").trajectories.empty());
}

TEST_CASE("concurrent appends keep lines intact") {
  TempDir dir;
  const auto path = dir / "t.jsonl";
  constexpr int kThreads = 8, kPer = 25;
  {
    TraceStore store(path);
    std::vector<std::jthread> threads;
    for (int w = 0; w < kThreads; ++w) {
      threads.emplace_back([&store, w] {
        for (int i = 0; i < kPer; ++i) store.append(make_run("w" + std::to_string(w) + "-" + std::to_string(i)));
      });
    }
  }
  std::ifstream in(path);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    ++lines;
    CHECK_FALSE(nlohmann::json::parse(line, nullptr, false).is_discarded());
  }
  CHECK(lines == kThreads * kPer);
  CHECK(load_traces(path).trajectories.size() == kThreads * kPer);
}

TEST_CASE("torn tail and malformed lines") {
  TempDir dir;
  const auto path = dir / "t.jsonl";
  {
    TraceStore store(path);
    store.append(make_run("a"));
    store.append(make_run("b"));
  }
  const std::string good = testutil::read_file(path);
  testutil::write_file(path, good + R"({"run_id": "c", "spec": {)");
  auto loaded = load_traces(path);
  CHECK(loaded.torn_tail == 1);
  CHECK(loaded.trajectories.size() == 2);
  {
    TraceStore store(path);  // truncates the partial line
    store.append(make_run("c"));
  }
  loaded = load_traces(path);
  CHECK(loaded.torn_tail == 0);
  CHECK(loaded.trajectories.size() == 3);

  testutil::write_file(path, "{not json}\n" + good);
  try {
    load_traces(path);
    FAIL("expected TraceError");
  } catch (const TraceError& e) {
    CHECK(std::string(e.what()).find(":1:") != std::string::npos);
  }
  testutil::write_file(path, good + "{\"run_id\": 5}\n");
  CHECK_THROWS_AS(load_traces(path), TraceError);
}

TEST_CASE("manifest sidecar") {
  TempDir dir;
  TraceStore store(dir / "t.jsonl");
  CHECK_FALSE(store.read_manifest());
  store.write_manifest({"abc", 42, "2026-01-01T00:00:00.000Z", "v1"});
  auto m = store.read_manifest();
  REQUIRE(m);
  CHECK(m->config_hash == "abc");
  CHECK(m->seed == 42);
  CHECK(store.manifest_path().filename() == "t.jsonl.manifest.json");
}

TEST_CASE("pending runs after partial completion") {
  TempDir dir;
  std::vector<RunSpec> matrix;
  for (int i = 0; i < 3000; ++i) {
    RunSpec s;
    s.run_id = "run-" + std::to_string(i);
    matrix.push_back(s);
  }
  TraceStore store(dir / "t.jsonl");
  for (int i = 0; i < 3000; ++i) {
    if (i == 1234) {
      store.append(make_run(matrix[i].run_id, RunStatus::failed));
      continue;
    }
    store.append(make_run(matrix[i].run_id));
  }
  auto pending = pending_runs(store, matrix);
  REQUIRE(pending.size() == 1);
  CHECK(pending[0].run_id == "run-1234");

  TraceStore reopened(dir / "t.jsonl");
  CHECK(pending_runs(reopened, matrix).size() == 1);
}

TEST_CASE("price table") {
  auto t = PriceTable::from_json(nlohmann::json::parse(R"({"m": {"input": 0.5, "output": 3.0}})"));
  CHECK(t.contains("m"));
  CHECK(t.at("m").output_per_million == 3.0);
  try {
    t.at("missing");
    FAIL("expected PricingError");
  } catch (const PricingError& e) {
    CHECK(std::string(e.what()).find("missing") != std::string::npos);
  }
  CHECK_THROWS_AS(t.set("neg", {-1, 0}), PricingError);
  CHECK_THROWS_AS(PriceTable::from_json(nlohmann::json::parse(R"({"m": {"input": "x"}})")), PricingError);
  CHECK_THROWS_AS(PriceTable::from_json(nlohmann::json::array()), PricingError);
  CHECK(token_cost(0, 0, {5, 5}) == 0.0);
  CHECK(token_cost(1'000'000, 1'000'000, {0.5, 3.0}) == doctest::Approx(3.5));
}

TEST_CASE("cost report reproduces per-run means") {
  PriceTable prices;
  std::vector<Trajectory> runs;
  int n = 0;
  for (const auto& r : kCostRows) {
    prices.set(r.model, {r.pin, r.pout});
    // two runs per class straddling the mean
    for (int sign : {-1, 1}) {
      runs.push_back(priced_run("np" + std::to_string(n++), r.model, false, r.np_in + sign * 100, r.np_out + sign * 7));
      runs.push_back(priced_run("p" + std::to_string(n++), r.model, true, r.p_in + sign * 100, r.p_out + sign * 7));
    }
  }
  const auto report = cost_report(runs, prices);
  CHECK(report.lines.size() == 16);
  double sum = 0.0;
  for (const auto& r : kCostRows) {
    INFO(r.model);
    const auto* np = report.find(r.model, PurchaseClass::non_purchase);
    const auto* p = report.find(r.model, PurchaseClass::purchase);
    REQUIRE(np);
    REQUIRE(p);
    CHECK(np->runs == 2);
    CHECK(np->mean_input() == doctest::Approx(double(r.np_in)));
    CHECK(np->mean_output() == doctest::Approx(double(r.np_out)));
    CHECK(std::abs(np->mean_cost() - r.np_cost) <= 0.0001);
    CHECK(std::abs(p->mean_cost() - r.p_cost) <= 0.0001);
    sum += np->cost + p->cost;
  }
  CHECK(report.total_cost == doctest::Approx(sum));

  // additive over disjoint run sets
  std::vector<Trajectory> first(runs.begin(), runs.begin() + 10), second(runs.begin() + 10, runs.end());
  CHECK(cost_report(first, prices).total_cost + cost_report(second, prices).total_cost ==
        doctest::Approx(report.total_cost));

  runs.push_back(priced_run("x", "unknown-backend", false, 10, 10));
  CHECK_THROWS_AS(cost_report(runs, prices), PricingError);

  auto zero = priced_run("z", kCostRows[0].model, true, 0, 0);
  CHECK(cost_report({zero}, prices).total_cost == 0.0);
}

TEST_CASE("cost attribution across backends and failed runs") {
  PriceTable prices;
  prices.set("s", {1.0, 0.0});
  prices.set("b", {0.0, 1.0});
  Trajectory t = priced_run("r", "s", true, 1'000'000, 0);
  t.stages[1].calls[0].backend_id = "b";
  t.stages[1].calls[0].output_tokens = 2'000'000;
  const auto report = cost_report({t}, prices);
  REQUIRE(report.find("s", PurchaseClass::purchase));
  REQUIRE(report.find("b", PurchaseClass::purchase));
  CHECK(report.find("s", PurchaseClass::purchase)->cost == doctest::Approx(0.5));
  CHECK(report.find("b", PurchaseClass::purchase)->cost == doctest::Approx(2.0));

  Trajectory failed = make_run("f", RunStatus::failed);
  prices.set("golden", {1.0, 1.0});
  const auto r2 = cost_report({failed}, prices);
  REQUIRE(r2.find("golden", PurchaseClass::non_purchase));
}

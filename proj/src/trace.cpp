#include "shopsim/trace.hpp"

#include <algorithm>
#include <tuple>

#include <nlohmann/json.hpp>

#include "shopsim/error.hpp"

namespace shopsim {

using nlohmann::json;
namespace fs = std::filesystem;

void to_json(json& j, const StoreManifest& m) {
  j = json{{"config_hash", m.config_hash},
           {"seed", m.seed},
           {"created_at", m.created_at},
           {"prompt_version", m.prompt_version}};
}

void from_json(const json& j, StoreManifest& m) {
  m.config_hash = j.at("config_hash").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.created_at = j.value("created_at", std::string());
  m.prompt_version = j.value("prompt_version", std::string());
}

LoadedTraces load_traces(const fs::path& path) {
  LoadedTraces out;
  std::ifstream in(path, std::ios::binary);
  if (!in) return out;
  const std::string content{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};

  std::map<std::string, std::size_t> index;
  std::size_t pos = 0, line_no = 0;
  while (pos < content.size()) {
    ++line_no;
    const auto nl = content.find('\n', pos);
    const bool terminated = nl != std::string::npos;
    const std::string_view line(content.data() + pos, (terminated ? nl : content.size()) - pos);
    pos = terminated ? nl + 1 : content.size();
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

    json doc = json::parse(line, nullptr, false);
    if (doc.is_discarded()) {
      if (!terminated) {
        out.torn_tail = 1;
        break;
      }
      throw TraceError(path.string() + ":" + std::to_string(line_no) + ": malformed JSON record");
    }
    Trajectory t;
    try {
      t = trajectory_from_json(doc);
    } catch (const TraceError& e) {
      throw TraceError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    ++out.records;
    auto [it, fresh] = index.try_emplace(t.run_id, out.trajectories.size());
    if (fresh) {
      out.trajectories.push_back(std::move(t));
    } else {
      out.trajectories[it->second] = std::move(t);
    }
  }
  return out;
}

TraceStore::TraceStore(fs::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
  if (fs::exists(path_)) {
    auto loaded = load_traces(path_);
    for (const auto& t : loaded.trajectories) {
      if (t.status == RunStatus::completed) completed_.insert(t.run_id);
    }
    if (loaded.torn_tail) {
      // cut the partial line so the next append starts on a fresh line
      std::ifstream in(path_, std::ios::binary);
      const std::string content{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
      const auto nl = content.rfind('\n');
      fs::resize_file(path_, nl == std::string::npos ? 0 : nl + 1);
    }
  }
  out_.open(path_, std::ios::binary | std::ios::app);
  if (!out_) throw TraceError("cannot open trace store " + path_.string());
}

fs::path TraceStore::manifest_path() const {
  auto p = path_;
  p += ".manifest.json";
  return p;
}

void TraceStore::append(const Trajectory& t) {
  const std::string line = trajectory_to_json(t).dump() + "\n";
  std::lock_guard lock(mu_);
  if (completed_.count(t.run_id)) throw DuplicateRunError("run " + t.run_id + " already completed in " + path_.string());
  out_.write(line.data(), static_cast<std::streamsize>(line.size()));
  out_.flush();
  if (!out_) throw TraceError("write to " + path_.string() + " failed");
  if (t.status == RunStatus::completed) completed_.insert(t.run_id);
}

std::set<std::string> TraceStore::completed_ids() const {
  std::lock_guard lock(mu_);
  return completed_;
}

LoadedTraces TraceStore::load() const {
  std::lock_guard lock(mu_);
  return load_traces(path_);
}

void TraceStore::write_manifest(const StoreManifest& m) const {
  const auto p = manifest_path();
  auto tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw TraceError("cannot write " + tmp.string());
    out << json(m).dump(2) << "\n";
  }
  fs::rename(tmp, p);
}

std::optional<StoreManifest> TraceStore::read_manifest() const {
  std::ifstream in(manifest_path(), std::ios::binary);
  if (!in) return std::nullopt;
  try {
    return json::parse(in).get<StoreManifest>();
  } catch (const json::exception& e) {
    throw TraceError("malformed manifest " + manifest_path().string() + ": " + e.what());
  }
}

std::vector<RunSpec> pending_runs(const TraceStore& store, const std::vector<RunSpec>& matrix) {
  const auto done = store.completed_ids();
  std::vector<RunSpec> out;
  for (const auto& s : matrix) {
    if (!done.count(s.run_id)) out.push_back(s);
  }
  return out;
}

// ---- cost ----

PriceTable PriceTable::from_json(const json& j) {
  if (!j.is_object()) throw PricingError("price table must be a JSON object keyed by backend id");
  PriceTable t;
  for (const auto& [id, v] : j.items()) {
    try {
      t.set(id, TokenPrice{v.at("input").get<double>(), v.at("output").get<double>()});
    } catch (const json::exception&) {
      throw PricingError("price entry for " + id + " needs numeric input and output");
    }
  }
  return t;
}

PriceTable PriceTable::from_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PricingError("cannot open price table " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw PricingError("price table " + path.string() + " is not valid JSON");
  return from_json(j);
}

void PriceTable::set(std::string backend_id, TokenPrice price) {
  if (price.input_per_million < 0 || price.output_per_million < 0) {
    throw PricingError("negative price for backend " + backend_id);
  }
  prices_.insert_or_assign(std::move(backend_id), price);
}

const TokenPrice& PriceTable::at(std::string_view backend_id) const {
  auto it = prices_.find(backend_id);
  if (it == prices_.end()) throw PricingError("no price for backend '" + std::string(backend_id) + "'");
  return it->second;
}

double token_cost(std::int64_t input_tokens, std::int64_t output_tokens, const TokenPrice& price) {
  return (double(input_tokens) * price.input_per_million + double(output_tokens) * price.output_per_million) / 1e6;
}

std::string_view purchase_class_name(PurchaseClass c) {
  return c == PurchaseClass::purchase ? "purchase" : "non_purchase";
}

const CostLine* CostReport::find(std::string_view backend_id, PurchaseClass c) const {
  for (const auto& l : lines) {
    if (l.backend_id == backend_id && l.purchase_class == c) return &l;
  }
  return nullptr;
}

CostReport cost_report(const std::vector<Trajectory>& trajectories, const PriceTable& prices) {
  std::map<std::pair<std::string, PurchaseClass>, CostLine> acc;
  for (const auto& t : trajectories) {
    const auto d = t.decision();
    const PurchaseClass cls = d && d->will_purchase ? PurchaseClass::purchase : PurchaseClass::non_purchase;
    std::set<std::string> seen;
    for (const auto& st : t.stages) {
      for (const auto& c : st.calls) {
        auto& line = acc[{c.backend_id, cls}];
        line.backend_id = c.backend_id;
        line.purchase_class = cls;
        line.input_tokens += c.input_tokens;
        line.output_tokens += c.output_tokens;
        seen.insert(c.backend_id);
      }
    }
    for (const auto& id : seen) ++acc[{id, cls}].runs;
  }
  CostReport report;
  for (auto& [key, line] : acc) {
    line.cost = token_cost(line.input_tokens, line.output_tokens, prices.at(line.backend_id));
    report.total_cost += line.cost;
    report.lines.push_back(line);
  }
  return report;
}

}  // namespace shopsim

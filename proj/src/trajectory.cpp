#include "shopsim/trajectory.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>

#include "shopsim/error.hpp"

namespace shopsim {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 11> kStageNames{
    "strategy",           "pitch",         "script_review",      "topic_selection",
    "pre_dialogue",       "pre_inquiry_review", "purchase_decision", "post_dialogue",
    "outcome_extraction", "post_inquiry_review", "product_review"};

json identity_json(const AgentIdentity& a) { return json{{"name", a.name}, {"gender", gender_name(a.gender)}}; }

AgentIdentity identity_from(const json& j, const AgentIdentity& fallback) {
  AgentIdentity a = fallback;
  a.name = j.value("name", a.name);
  if (j.contains("gender")) {
    auto g = parse_gender(j["gender"].get<std::string>());
    if (!g) throw ConfigError("invalid agent gender: " + j["gender"].dump());
    a.gender = *g;
  }
  return a;
}

}  // namespace

std::string_view stage_name(StageName s) { return kStageNames[static_cast<std::size_t>(s)]; }

std::optional<StageName> parse_stage_name(std::string_view s) {
  for (std::size_t i = 0; i < kStageNames.size(); ++i) {
    if (kStageNames[i] == s) return static_cast<StageName>(i);
  }
  return std::nullopt;
}

void RunSpec::validate() const {
  if (run_id.empty()) throw ConfigError("run spec has an empty run_id");
  if (std::find(kGuidanceLevels.begin(), kGuidanceLevels.end(), guidance_level) == kGuidanceLevels.end()) {
    throw ConfigError("guidance_level " + std::to_string(guidance_level) + " is not one of 0/25/50/75/100");
  }
  if (seller_backend.empty() || buyer_backend.empty()) throw ConfigError("run " + run_id + ": backend id missing");
  if (seller_mode.persona && seller_mode.persona->role != Role::seller) {
    throw ConfigError("run " + run_id + ": seller persona has role buyer");
  }
  if (buyer_mode.persona && buyer_mode.persona->role != Role::buyer) {
    throw ConfigError("run " + run_id + ": buyer persona has role seller");
  }
  if (product.price.cents() <= 0) throw ConfigError("run " + run_id + ": product price must be positive");
  if (product.discount_rate < 0 || product.discount_rate > 0.9) {
    throw ConfigError("run " + run_id + ": discount rate out of range");
  }
}

Gender RunSpec::seller_gender() const { return seller_mode.persona ? seller_mode.persona->gender : seller.gender; }
Gender RunSpec::buyer_gender() const { return buyer_mode.persona ? buyer_mode.persona->gender : buyer.gender; }

void to_json(json& j, const RunSpec& s) {
  j = json{{"run_id", s.run_id},
           {"product", s.product},
           {"price_condition", s.price_condition.percent()},
           {"seller_mode", s.seller_mode},
           {"buyer_mode", s.buyer_mode},
           {"seller_backend", s.seller_backend},
           {"buyer_backend", s.buyer_backend},
           {"outcome_backend", s.outcome_backend},
           {"post_issue", issue_id(s.post_issue)},
           {"guidance_level", s.guidance_level},
           {"seed", s.seed},
           {"repeat", s.repeat},
           {"seller", identity_json(s.seller)},
           {"buyer", identity_json(s.buyer)},
           {"params", s.params}};
}

void from_json(const json& j, RunSpec& s) {
  s.run_id = j.at("run_id").get<std::string>();
  s.product = j.at("product").get<Product>();
  s.price_condition = PriceCondition::from_percent(j.at("price_condition").get<int>());
  s.seller_mode = j.at("seller_mode").get<PersonaMode>();
  s.buyer_mode = j.at("buyer_mode").get<PersonaMode>();
  s.seller_backend = j.at("seller_backend").get<std::string>();
  s.buyer_backend = j.at("buyer_backend").get<std::string>();
  s.outcome_backend = j.value("outcome_backend", std::string());
  auto issue = parse_issue(j.at("post_issue").get<std::string>());
  if (!issue) throw ConfigError("invalid post_issue: " + j.at("post_issue").dump());
  s.post_issue = *issue;
  s.guidance_level = j.at("guidance_level").get<int>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.repeat = j.value("repeat", 0);
  const RunSpec defaults;
  s.seller = j.contains("seller") ? identity_from(j["seller"], defaults.seller) : defaults.seller;
  s.buyer = j.contains("buyer") ? identity_from(j["buyer"], defaults.buyer) : defaults.buyer;
  s.params = j.contains("params") ? j["params"].get<CompletionParams>() : CompletionParams{};
}

std::size_t DialogueTranscript::buyer_messages() const {
  return static_cast<std::size_t>(
      std::count_if(messages.begin(), messages.end(), [](const auto& m) { return m.speaker == Speaker::buyer; }));
}

std::string DialogueTranscript::history() const {
  std::string out;
  for (const auto& m : messages) {
    if (!out.empty()) out += "\n";
    out += m.speaker == Speaker::buyer ? "Buyer: " : "Seller: ";
    out += m.text;
  }
  return out;
}

void to_json(json& j, const DialogueTranscript& t) {
  json msgs = json::array();
  for (const auto& m : t.messages) {
    json e{{"speaker", m.speaker == Speaker::buyer ? "buyer" : "seller"}, {"text", m.text}};
    if (m.done_marker) e["done_marker"] = true;
    msgs.push_back(std::move(e));
  }
  j = json{{"phase", t.phase},
           {"messages", std::move(msgs)},
           {"termination", t.termination == Termination::done_marker ? "done_marker" : "turn_cap"}};
}

void from_json(const json& j, DialogueTranscript& t) {
  t.phase = j.at("phase").get<std::string>();
  t.messages.clear();
  for (const auto& e : j.at("messages")) {
    DialogueMessage m;
    m.speaker = e.at("speaker").get<std::string>() == "buyer" ? Speaker::buyer : Speaker::seller;
    m.text = e.at("text").get<std::string>();
    m.done_marker = e.value("done_marker", false);
    t.messages.push_back(std::move(m));
  }
  t.termination = j.at("termination").get<std::string>() == "done_marker" ? Termination::done_marker
                                                                           : Termination::turn_cap;
}

std::int64_t StageRecord::input_tokens() const {
  std::int64_t n = 0;
  for (const auto& c : calls) n += c.input_tokens;
  return n;
}

std::int64_t StageRecord::output_tokens() const {
  std::int64_t n = 0;
  for (const auto& c : calls) n += c.output_tokens;
  return n;
}

const std::string& StageRecord::output() const {
  static const std::string empty;
  return calls.empty() ? empty : calls.back().text;
}

const StageRecord* Trajectory::find(StageName s) const {
  for (const auto& st : stages) {
    if (st.stage == s) return &st;
  }
  return nullptr;
}

std::optional<PurchaseDecision> Trajectory::decision() const {
  const auto* st = find(StageName::purchase_decision);
  if (!st || st->parsed.is_null()) return std::nullopt;
  return st->parsed.get<PurchaseDecision>();
}

std::optional<TopicSelection> Trajectory::topics() const {
  const auto* st = find(StageName::topic_selection);
  if (!st || st->parsed.is_null()) return std::nullopt;
  return st->parsed.get<TopicSelection>();
}

std::optional<DialogueTranscript> Trajectory::dialogue(StageName s) const {
  const auto* st = find(s);
  if (!st || st->parsed.is_null()) return std::nullopt;
  return st->parsed.get<DialogueTranscript>();
}

std::optional<PostOutcome> Trajectory::outcome() const {
  const auto* st = find(StageName::outcome_extraction);
  if (!st || st->parsed.is_null()) return std::nullopt;
  return st->parsed.get<PostOutcome>();
}

StageName review_stage(ReviewKind kind) {
  switch (kind) {
    case ReviewKind::script: return StageName::script_review;
    case ReviewKind::pre_inquiry: return StageName::pre_inquiry_review;
    case ReviewKind::post_inquiry: return StageName::post_inquiry_review;
    case ReviewKind::product: return StageName::product_review;
  }
  return StageName::script_review;
}

std::optional<Review> Trajectory::review(ReviewKind kind) const {
  const auto* st = find(review_stage(kind));
  if (!st || st->parsed.is_null()) return std::nullopt;
  return st->parsed.get<Review>();
}

std::size_t Trajectory::review_count() const {
  std::size_t n = 0;
  for (auto k : {ReviewKind::script, ReviewKind::pre_inquiry, ReviewKind::post_inquiry, ReviewKind::product}) {
    if (find(review_stage(k))) ++n;
  }
  return n;
}

namespace {

json call_json(const CallRecord& c) {
  json j{{"turn", c.turn},
         {"backend_id", c.backend_id},
         {"text", c.text},
         {"input_tokens", c.input_tokens},
         {"output_tokens", c.output_tokens},
         {"attempt_count", c.attempt_count}};
  if (!c.prompt.empty()) j["prompt"] = c.prompt;
  return j;
}

CallRecord call_from(const json& j) {
  CallRecord c;
  c.turn = j.at("turn").get<std::string>();
  c.backend_id = j.at("backend_id").get<std::string>();
  c.text = j.at("text").get<std::string>();
  c.input_tokens = j.at("input_tokens").get<std::int64_t>();
  c.output_tokens = j.at("output_tokens").get<std::int64_t>();
  c.attempt_count = j.at("attempt_count").get<int>();
  if (j.contains("prompt")) c.prompt = j["prompt"].get<std::vector<ChatMessage>>();
  return c;
}

}  // namespace

json trajectory_to_json(const Trajectory& t, bool include_timestamps) {
  json stages = json::array();
  for (const auto& s : t.stages) {
    json calls = json::array();
    for (const auto& c : s.calls) calls.push_back(call_json(c));
    json st{{"stage", stage_name(s.stage)},
            {"calls", std::move(calls)},
            {"parsed", s.parsed},
            {"warnings", s.warnings},
            {"input_tokens", s.input_tokens()},
            {"output_tokens", s.output_tokens()}};
    if (include_timestamps) {
      st["started_at"] = s.started_at;
      st["finished_at"] = s.finished_at;
    }
    stages.push_back(std::move(st));
  }
  json j{{"run_id", t.run_id},
         {"spec", t.spec},
         {"prompt_version", t.prompt_version},
         {"stages", std::move(stages)},
         {"status", t.status == RunStatus::completed ? "completed" : "failed"},
         {"failed_stage", t.failed_stage ? json(stage_name(*t.failed_stage)) : json(nullptr)},
         {"error", t.error},
         {"warnings", t.warnings}};
  return j;
}

Trajectory trajectory_from_json(const json& j) {
  Trajectory t;
  try {
    t.run_id = j.at("run_id").get<std::string>();
    t.spec = j.at("spec").get<RunSpec>();
    t.prompt_version = j.value("prompt_version", std::string());
    for (const auto& s : j.at("stages")) {
      StageRecord st;
      auto name = parse_stage_name(s.at("stage").get<std::string>());
      if (!name) throw TraceError("unknown stage " + s.at("stage").dump());
      st.stage = *name;
      for (const auto& c : s.at("calls")) st.calls.push_back(call_from(c));
      st.parsed = s.value("parsed", json(nullptr));
      st.warnings = s.value("warnings", std::vector<std::string>{});
      st.started_at = s.value("started_at", std::string());
      st.finished_at = s.value("finished_at", std::string());
      t.stages.push_back(std::move(st));
    }
    const auto status = j.at("status").get<std::string>();
    if (status != "completed" && status != "failed") throw TraceError("unknown run status " + status);
    t.status = status == "completed" ? RunStatus::completed : RunStatus::failed;
    if (j.contains("failed_stage") && !j["failed_stage"].is_null()) {
      t.failed_stage = parse_stage_name(j["failed_stage"].get<std::string>());
    }
    t.error = j.value("error", std::string());
    t.warnings = j.value("warnings", std::vector<std::string>{});
  } catch (const json::exception& e) {
    throw TraceError(std::string("malformed trajectory record: ") + e.what());
  } catch (const ConfigError& e) {
    throw TraceError(std::string("malformed trajectory spec: ") + e.what());
  }
  return t;
}

void to_json(json& j, const Trajectory& t) { j = trajectory_to_json(t, true); }
void from_json(const json& j, Trajectory& t) { t = trajectory_from_json(j); }

RunSummary summarize(const Trajectory& t) {
  RunSummary s;
  s.completed = t.status == RunStatus::completed;
  const auto& p = t.spec.product;
  s.unit_price = effective_price(p.price, p.discount_rate, t.spec.price_condition);
  if (auto d = t.decision()) {
    s.purchased = d->will_purchase;
    s.quantity = d->quantity;
  }
  s.outcome = t.outcome() ? std::optional<Outcome>(t.outcome()->outcome) : std::nullopt;
  for (auto k : {ReviewKind::script, ReviewKind::pre_inquiry, ReviewKind::post_inquiry, ReviewKind::product}) {
    if (auto r = t.review(k)) s.ratings[static_cast<std::size_t>(k)] = r->rating;
  }
  if (s.completed && s.purchased && s.outcome != Outcome::refunded) s.revenue = s.unit_price * s.quantity;
  return s;
}

std::string utc_now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[96];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

}  // namespace shopsim

#include "shopsim/extract.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>

#include "shopsim/error.hpp"

namespace shopsim {

using nlohmann::json;

namespace {

std::string lower_trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  std::string out(s.substr(b, e - b));
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool contains(std::string_view hay, std::string_view needle) { return hay.find(needle) != std::string_view::npos; }

std::optional<json> first_object_in(std::string_view text, std::string_view key) {
  for (std::size_t start = text.find('{'); start != std::string_view::npos; start = text.find('{', start + 1)) {
    int depth = 0;
    bool in_string = false, escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
      const char c = text[i];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}') {
        if (--depth == 0) {
          auto parsed = json::parse(text.substr(start, i - start + 1), nullptr, false);
          if (!parsed.is_discarded() && parsed.is_object() && (key.empty() || parsed.contains(key))) return parsed;
          break;
        }
      }
    }
  }
  return std::nullopt;
}

// Bodies of ``` fenced blocks, in order. An unterminated fence runs to the end.
std::vector<std::string_view> fenced_blocks(std::string_view text) {
  std::vector<std::string_view> blocks;
  std::size_t pos = 0;
  while ((pos = text.find("```", pos)) != std::string_view::npos) {
    std::size_t body = text.find('\n', pos + 3);
    if (body == std::string_view::npos) break;
    ++body;
    const std::size_t close = text.find("```", body);
    if (close == std::string_view::npos) {
      blocks.push_back(text.substr(body));
      break;
    }
    blocks.push_back(text.substr(body, close - body));
    pos = close + 3;
  }
  return blocks;
}

std::string string_field(const json& obj, std::initializer_list<const char*> keys) {
  for (const char* k : keys) {
    auto it = obj.find(k);
    if (it == obj.end() || it->is_null()) continue;
    if (it->is_string()) return it->get<std::string>();
    return it->dump();
  }
  return {};
}

}  // namespace

std::optional<json> extract_json_object(std::string_view text, std::string_view required_key) {
  for (auto block : fenced_blocks(text)) {
    if (auto j = first_object_in(block, required_key)) return j;
  }
  return first_object_in(text, required_key);
}

std::optional<bool> json_bool(const json& v) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_number()) return v.get<double>() != 0.0;
  if (v.is_string()) {
    const auto s = lower_trim(v.get<std::string>());
    if (s == "true" || s == "yes" || s == "y" || s == "1") return true;
    if (s == "false" || s == "no" || s == "n" || s == "0") return false;
  }
  return std::nullopt;
}

std::optional<double> json_number(const json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    std::string s = lower_trim(v.get<std::string>());
    if (!s.empty() && s.front() == '$') s.erase(0, 1);
    if (s.empty()) return std::nullopt;
    char* end = nullptr;
    const double d = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || !std::isfinite(d)) return std::nullopt;
    return d;
  }
  return std::nullopt;
}

// ---- topics ----

std::optional<std::string> canonical_topic(std::string_view raw) {
  const auto s = lower_trim(raw);
  if (contains(s, "compar")) return std::string(kTopicComparison);
  if (contains(s, "ship") || contains(s, "deliver")) return std::string(kTopicShipping);
  if (contains(s, "price") || contains(s, "discount") || contains(s, "promotion") || contains(s, "deal")) {
    return std::string(kTopicPrice);
  }
  if (contains(s, "spec") || contains(s, "feature") || contains(s, "material") || contains(s, "detail")) {
    return std::string(kTopicSpecs);
  }
  return std::nullopt;
}

TopicSelection fallback_topics() {
  TopicSelection t;
  t.topics = {std::string(kTopicSpecs)};
  t.fallback = true;
  return t;
}

std::optional<TopicSelection> parse_topics(std::string_view text) {
  auto obj = extract_json_object(text);
  if (!obj) return std::nullopt;
  auto it = obj->find("selected_topics");
  if (it == obj->end()) it = obj->find("topics");
  if (it == obj->end()) return std::nullopt;
  std::vector<std::string> raw;
  if (it->is_string()) {
    raw.push_back(it->get<std::string>());
  } else if (it->is_array()) {
    for (const auto& e : *it) {
      if (e.is_string()) raw.push_back(e.get<std::string>());
    }
  } else {
    return std::nullopt;
  }

  TopicSelection out;
  out.reason = string_field(*obj, {"reason"});
  for (const auto& r : raw) {
    auto c = canonical_topic(r);
    if (!c) {
      out.dropped.push_back(r);
      continue;
    }
    if (std::find(out.topics.begin(), out.topics.end(), *c) == out.topics.end()) out.topics.push_back(*c);
  }
  if (out.topics.size() > 2) {
    out.topics.resize(2);
    out.truncated = true;
  }
  if (out.topics.empty()) {
    auto fb = fallback_topics();
    fb.reason = out.reason;
    fb.dropped = out.dropped;
    return fb;
  }
  return out;
}

// ---- purchase decision ----

std::string_view sentiment_name(Sentiment s) {
  switch (s) {
    case Sentiment::positive: return "Positive";
    case Sentiment::neutral: return "Neutral";
    case Sentiment::negative: return "Negative";
  }
  return "Neutral";
}

std::optional<PurchaseDecision> parse_purchase_decision(std::string_view text, std::vector<std::string>& warnings) {
  auto obj = extract_json_object(text, "will_purchase");
  if (!obj) return std::nullopt;
  auto wp = obj->find("will_purchase");
  if (wp == obj->end()) return std::nullopt;
  auto will = json_bool(*wp);
  if (!will) return std::nullopt;

  PurchaseDecision d;
  d.will_purchase = *will;
  std::optional<double> q;
  if (auto qi = obj->find("quantity"); qi != obj->end()) q = json_number(*qi);
  const int quantity = q ? static_cast<int>(std::lround(std::max(0.0, *q))) : 0;
  if (!d.will_purchase) {
    if (quantity != 0) warnings.push_back("quantity " + std::to_string(quantity) + " normalized to 0 (not purchasing)");
    d.quantity = 0;
  } else if (quantity < 1) {
    warnings.push_back("quantity below 1 normalized to 1 (purchasing)");
    d.quantity = 1;
  } else {
    d.quantity = quantity;
  }
  d.quantity_reason = string_field(*obj, {"quantity_reason"});
  d.reason = string_field(*obj, {"reason"});
  const auto s = lower_trim(string_field(*obj, {"sentiment"}));
  if (s == "positive") {
    d.sentiment = Sentiment::positive;
  } else if (s == "negative") {
    d.sentiment = Sentiment::negative;
  } else {
    if (s != "neutral") warnings.push_back("sentiment '" + s + "' replaced by Neutral");
    d.sentiment = Sentiment::neutral;
  }
  return d;
}

// ---- outcome ----

std::string_view outcome_name(Outcome o) {
  switch (o) {
    case Outcome::delivered: return "delivered";
    case Outcome::refunded: return "refunded";
    case Outcome::exchanged: return "exchanged";
  }
  return "delivered";
}

std::optional<Outcome> parse_outcome_name(std::string_view s) {
  const auto l = lower_trim(s);
  if (l == "delivered") return Outcome::delivered;
  if (l == "refunded") return Outcome::refunded;
  if (l == "exchanged") return Outcome::exchanged;
  return std::nullopt;
}

std::optional<PostOutcome> parse_post_outcome(std::string_view text, std::vector<std::string>& warnings) {
  auto obj = extract_json_object(text, "outcome");
  if (!obj) return std::nullopt;
  const auto label = string_field(*obj, {"outcome"});
  auto o = parse_outcome_name(label);
  if (!o) {
    warnings.push_back("outcome label '" + label + "' is not delivered/refunded/exchanged");
    return std::nullopt;
  }
  return PostOutcome{*o, string_field(*obj, {"resolution_type"}), string_field(*obj, {"reason"}), false};
}

// ---- reviews ----

std::string_view review_kind_name(ReviewKind k) {
  switch (k) {
    case ReviewKind::script: return "script";
    case ReviewKind::pre_inquiry: return "pre_inquiry";
    case ReviewKind::post_inquiry: return "post_inquiry";
    case ReviewKind::product: return "product";
  }
  return "script";
}

std::optional<Review> parse_review(ReviewKind kind, std::string_view text, std::vector<std::string>& warnings) {
  auto obj = extract_json_object(text, "rating");
  if (!obj) return std::nullopt;
  auto ri = obj->find("rating");
  if (ri == obj->end()) return std::nullopt;
  auto rating = json_number(*ri);
  if (!rating) return std::nullopt;
  Review r;
  r.kind = kind;
  const long rounded = std::lround(*rating);
  r.rating = static_cast<int>(std::clamp(rounded, 1L, 5L));
  if (r.rating != rounded || *rating != static_cast<double>(rounded)) {
    warnings.push_back("rating " + ri->dump() + " clamped to " + std::to_string(r.rating));
  }
  r.text = string_field(*obj, {"review_text", "review", "text"});
  if (kind == ReviewKind::product) {
    auto wi = obj->find("would_recommend");
    if (wi == obj->end()) return std::nullopt;
    auto w = json_bool(*wi);
    if (!w) return std::nullopt;
    r.would_recommend = *w;
  }
  return r;
}

// ---- serialization ----

void to_json(json& j, const TopicSelection& t) {
  j = json{{"topics", t.topics}, {"reason", t.reason}, {"dropped", t.dropped},
           {"truncated", t.truncated}, {"fallback", t.fallback}};
}

void from_json(const json& j, TopicSelection& t) {
  t.topics = j.at("topics").get<std::vector<std::string>>();
  t.reason = j.value("reason", std::string());
  t.dropped = j.value("dropped", std::vector<std::string>{});
  t.truncated = j.value("truncated", false);
  t.fallback = j.value("fallback", false);
}

void to_json(json& j, const PurchaseDecision& d) {
  j = json{{"will_purchase", d.will_purchase}, {"quantity", d.quantity}, {"quantity_reason", d.quantity_reason},
           {"sentiment", sentiment_name(d.sentiment)}, {"reason", d.reason}};
}

void from_json(const json& j, PurchaseDecision& d) {
  d.will_purchase = j.at("will_purchase").get<bool>();
  d.quantity = j.at("quantity").get<int>();
  d.quantity_reason = j.value("quantity_reason", std::string());
  d.reason = j.value("reason", std::string());
  const auto s = j.value("sentiment", std::string("Neutral"));
  d.sentiment = s == "Positive" ? Sentiment::positive : s == "Negative" ? Sentiment::negative : Sentiment::neutral;
}

void to_json(json& j, const PostOutcome& o) {
  j = json{{"outcome", outcome_name(o.outcome)}, {"resolution_type", o.resolution_type}, {"reason", o.reason},
           {"fallback_applied", o.fallback_applied}};
}

void from_json(const json& j, PostOutcome& o) {
  auto out = parse_outcome_name(j.at("outcome").get<std::string>());
  if (!out) throw TraceError("invalid outcome in record: " + j.at("outcome").dump());
  o.outcome = *out;
  o.resolution_type = j.value("resolution_type", std::string());
  o.reason = j.value("reason", std::string());
  o.fallback_applied = j.value("fallback_applied", false);
}

void to_json(json& j, const Review& r) {
  j = json{{"kind", review_kind_name(r.kind)}, {"rating", r.rating}, {"text", r.text}};
  if (r.would_recommend) j["would_recommend"] = *r.would_recommend;
}

void from_json(const json& j, Review& r) {
  const auto k = j.at("kind").get<std::string>();
  if (k == "script") {
    r.kind = ReviewKind::script;
  } else if (k == "pre_inquiry") {
    r.kind = ReviewKind::pre_inquiry;
  } else if (k == "post_inquiry") {
    r.kind = ReviewKind::post_inquiry;
  } else if (k == "product") {
    r.kind = ReviewKind::product;
  } else {
    throw TraceError("invalid review kind: " + k);
  }
  r.rating = j.at("rating").get<int>();
  r.text = j.value("text", std::string());
  r.would_recommend.reset();
  if (j.contains("would_recommend")) r.would_recommend = j["would_recommend"].get<bool>();
}

}  // namespace shopsim

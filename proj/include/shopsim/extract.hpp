#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace shopsim {

// First fenced block that holds an object wins; otherwise the first balanced
// `{...}` span in the text that parses as a JSON object. With a required
// key, objects lacking it are skipped.
std::optional<nlohmann::json> extract_json_object(std::string_view text, std::string_view required_key = {});

inline constexpr std::string_view kJsonRetryReminder =
    "Your previous reply could not be parsed. Output ONLY valid JSON in exactly the requested format, "
    "with no code fences and nothing else.";

// ---- topics ----

inline constexpr std::string_view kTopicSpecs = "product specifications";
inline constexpr std::string_view kTopicShipping = "shipping";
inline constexpr std::string_view kTopicPrice = "price/discount";
inline constexpr std::string_view kTopicComparison = "comparison";

// Maps free-form topic wording to a canonical topic, or nullopt.
std::optional<std::string> canonical_topic(std::string_view raw);

struct TopicSelection {
  std::vector<std::string> topics;
  std::string reason;
  std::vector<std::string> dropped;
  bool truncated = false;
  bool fallback = false;
};

// nullopt when no usable JSON with a selected_topics list is present. A
// list where every entry is unknown yields the fallback topic.
std::optional<TopicSelection> parse_topics(std::string_view text);
TopicSelection fallback_topics();

// ---- purchase decision ----

enum class Sentiment { positive, neutral, negative };
std::string_view sentiment_name(Sentiment s);  // "Positive"

struct PurchaseDecision {
  bool will_purchase = false;
  int quantity = 0;
  std::string quantity_reason;
  Sentiment sentiment = Sentiment::neutral;
  std::string reason;

  bool operator==(const PurchaseDecision&) const = default;
};

std::optional<PurchaseDecision> parse_purchase_decision(std::string_view text,
                                                        std::vector<std::string>& warnings);

// ---- post-purchase outcome ----

enum class Outcome { delivered, refunded, exchanged };
std::string_view outcome_name(Outcome o);
std::optional<Outcome> parse_outcome_name(std::string_view s);

struct PostOutcome {
  Outcome outcome = Outcome::delivered;
  std::string resolution_type;
  std::string reason;
  bool fallback_applied = false;

  bool operator==(const PostOutcome&) const = default;
};

// nullopt when the JSON is missing or the label is outside the enum.
std::optional<PostOutcome> parse_post_outcome(std::string_view text, std::vector<std::string>& warnings);

// ---- reviews ----

enum class ReviewKind { script, pre_inquiry, post_inquiry, product };
std::string_view review_kind_name(ReviewKind k);

struct Review {
  ReviewKind kind = ReviewKind::script;
  int rating = 0;
  std::string text;
  std::optional<bool> would_recommend;

  bool operator==(const Review&) const = default;
};

// Rating is clamped into [1, 5] with a warning. Product reviews also need
// would_recommend.
std::optional<Review> parse_review(ReviewKind kind, std::string_view text, std::vector<std::string>& warnings);

// Lenient scalar readers shared by the parsers.
std::optional<bool> json_bool(const nlohmann::json& v);
std::optional<double> json_number(const nlohmann::json& v);

void to_json(nlohmann::json& j, const TopicSelection& t);
void from_json(const nlohmann::json& j, TopicSelection& t);
void to_json(nlohmann::json& j, const PurchaseDecision& d);
void from_json(const nlohmann::json& j, PurchaseDecision& d);
void to_json(nlohmann::json& j, const PostOutcome& o);
void from_json(const nlohmann::json& j, PostOutcome& o);
void to_json(nlohmann::json& j, const Review& r);
void from_json(const nlohmann::json& j, Review& r);

}  // namespace shopsim

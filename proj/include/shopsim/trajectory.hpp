#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "shopsim/agents.hpp"
#include "shopsim/catalog.hpp"
#include "shopsim/extract.hpp"
#include "shopsim/persona.hpp"

namespace shopsim {

enum class StageName {
  strategy,
  pitch,
  script_review,
  topic_selection,
  pre_dialogue,
  pre_inquiry_review,
  purchase_decision,
  post_dialogue,
  outcome_extraction,
  post_inquiry_review,
  product_review,
};

inline constexpr std::array kStageOrder{
    StageName::strategy,           StageName::pitch,          StageName::script_review,
    StageName::topic_selection,    StageName::pre_dialogue,   StageName::pre_inquiry_review,
    StageName::purchase_decision,  StageName::post_dialogue,  StageName::outcome_extraction,
    StageName::post_inquiry_review, StageName::product_review};

std::string_view stage_name(StageName s);
std::optional<StageName> parse_stage_name(std::string_view s);

// Name and gender an agent introduces itself with. Explicit personas
// override the gender.
struct AgentIdentity {
  std::string name;
  Gender gender = Gender::male;

  bool operator==(const AgentIdentity&) const = default;
};

inline constexpr std::array kGuidanceLevels{0, 25, 50, 75, 100};

struct RunSpec {
  std::string run_id;
  Product product;
  PriceCondition price_condition;
  PersonaMode seller_mode;
  PersonaMode buyer_mode;
  std::string seller_backend;
  std::string buyer_backend;
  std::string outcome_backend;  // empty: seller_backend
  IssueType post_issue = IssueType::shipping_delay;
  int guidance_level = 100;
  std::uint64_t seed = 0;
  int repeat = 0;
  AgentIdentity seller{"Sam Q.", Gender::male};
  AgentIdentity buyer{"Jordan K.", Gender::female};
  CompletionParams params;

  // Throws ConfigError when a field is off its grid.
  void validate() const;
  Gender seller_gender() const;
  Gender buyer_gender() const;
  const std::string& extractor_backend() const {
    return outcome_backend.empty() ? seller_backend : outcome_backend;
  }
  bool operator==(const RunSpec&) const = default;
};

void to_json(nlohmann::json& j, const RunSpec& s);
void from_json(const nlohmann::json& j, RunSpec& s);

enum class Speaker { buyer, seller };

struct DialogueMessage {
  Speaker speaker = Speaker::buyer;
  std::string text;
  bool done_marker = false;  // the marker was present and stripped

  bool operator==(const DialogueMessage&) const = default;
};

enum class Termination { done_marker, turn_cap };

struct DialogueTranscript {
  std::string phase;  // "pre" or "post"
  std::vector<DialogueMessage> messages;
  Termination termination = Termination::turn_cap;

  std::size_t buyer_messages() const;
  // "Buyer: ...\nSeller: ..."
  std::string history() const;
  bool operator==(const DialogueTranscript&) const = default;
};

void to_json(nlohmann::json& j, const DialogueTranscript& t);
void from_json(const nlohmann::json& j, DialogueTranscript& t);

struct CallRecord {
  std::string turn;
  std::string backend_id;
  std::string text;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
  int attempt_count = 1;
  std::vector<ChatMessage> prompt;  // filled only when prompts are recorded

  bool operator==(const CallRecord&) const = default;
};

struct StageRecord {
  StageName stage = StageName::strategy;
  std::vector<CallRecord> calls;
  nlohmann::json parsed;  // null for free-text stages without structure
  std::vector<std::string> warnings;
  std::string started_at;
  std::string finished_at;

  std::int64_t input_tokens() const;
  std::int64_t output_tokens() const;
  // Text of the last call, which is what later stages consume.
  const std::string& output() const;
  bool operator==(const StageRecord&) const = default;
};

enum class RunStatus { completed, failed };

struct Trajectory {
  std::string run_id;
  RunSpec spec;
  std::string prompt_version;
  std::vector<StageRecord> stages;
  RunStatus status = RunStatus::completed;
  std::optional<StageName> failed_stage;
  std::string error;
  std::vector<std::string> warnings;

  const StageRecord* find(StageName s) const;
  std::optional<PurchaseDecision> decision() const;
  std::optional<TopicSelection> topics() const;
  std::optional<DialogueTranscript> dialogue(StageName s) const;
  std::optional<PostOutcome> outcome() const;
  std::optional<Review> review(ReviewKind kind) const;
  std::size_t review_count() const;
  bool operator==(const Trajectory&) const = default;
};

// Timestamps are dropped when include_timestamps is false, which gives a
// byte-stable document for comparisons.
nlohmann::json trajectory_to_json(const Trajectory& t, bool include_timestamps = true);
Trajectory trajectory_from_json(const nlohmann::json& j);
void to_json(nlohmann::json& j, const Trajectory& t);
void from_json(const nlohmann::json& j, Trajectory& t);

StageName review_stage(ReviewKind kind);

struct RunSummary {
  bool completed = false;
  bool purchased = false;
  int quantity = 0;
  Money unit_price;  // effective price under the run's condition
  std::optional<Outcome> outcome;
  std::array<std::optional<int>, 4> ratings;  // indexed by ReviewKind
  Money revenue;  // quantity x unit price unless refunded; shipping excluded
};

RunSummary summarize(const Trajectory& t);

// Current UTC time, ISO-8601 with milliseconds.
std::string utc_now_iso8601();

}  // namespace shopsim

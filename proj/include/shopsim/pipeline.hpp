#pragma once

#include <cstdint>
#include <map>
#include <stop_token>
#include <string>
#include <string_view>
#include <vector>

#include "shopsim/agents.hpp"
#include "shopsim/template.hpp"
#include "shopsim/trajectory.hpp"

namespace shopsim {

using BackendMap = std::map<std::string, BackendPtr, std::less<>>;

// Throws ConfigError naming the id when it is not registered.
const BackendPtr& resolve_backend(const BackendMap& backends, std::string_view id);

// ---- prompt context ----

enum class GuidanceDimension { target_expansion, value_proposition, contextual_urgency, objection_handling };
std::string_view guidance_dimension_name(GuidanceDimension d);

// k = level / 25 dimensions drawn without replacement from a stream seeded
// by the run seed, returned in canonical order.
std::vector<GuidanceDimension> select_guidance(int level, std::uint64_t seed);

// Flags and numbering for the pitch template's element sections.
void apply_guidance(TemplateContext& ctx, const std::vector<GuidanceDimension>& dims);

// "ORD-<product id>-<low 32 bits of the run seed in hex>"
std::string order_id(const RunSpec& spec);
std::string order_info(const RunSpec& spec, int quantity);
std::string price_condition_text(const Product& product, PriceCondition condition);
// "10" for whole percentages, "12.5" otherwise.
std::string discount_percent_text(double rate);

// Product, pricing and agent identity values shared by every stage.
TemplateContext base_context(const RunSpec& spec);

// ---- dialogue ----

inline constexpr std::string_view kDoneMarker = "[DONE]";

// Strips a trailing marker (trailing whitespace allowed). Returns true when
// one was present.
bool strip_done_marker(std::string& text);

// ---- run ----

struct PipelineOptions {
  bool record_prompts = false;
  std::stop_token stop;
  int max_buyer_turns = 5;
};

// Executes the full stage sequence. Stage failures become a failed
// trajectory that keeps everything produced so far; a cancelled stop token
// fails the run with error "cancelled" at the next stage boundary.
// Unresolvable backends throw ConfigError before any stage runs.
Trajectory run_simulation(const RunSpec& spec, const BackendMap& backends, const PipelineOptions& options = {});

}  // namespace shopsim

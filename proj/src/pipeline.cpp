#include "shopsim/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>

#include "shopsim/error.hpp"
#include "shopsim/prompts.hpp"
#include "shopsim/seed.hpp"

namespace shopsim {

using nlohmann::json;

const BackendPtr& resolve_backend(const BackendMap& backends, std::string_view id) {
  auto it = backends.find(id);
  if (it == backends.end() || !it->second) throw ConfigError("unknown backend id '" + std::string(id) + "'");
  return it->second;
}

std::string_view guidance_dimension_name(GuidanceDimension d) {
  switch (d) {
    case GuidanceDimension::target_expansion: return "target_expansion";
    case GuidanceDimension::value_proposition: return "value_proposition";
    case GuidanceDimension::contextual_urgency: return "contextual_urgency";
    case GuidanceDimension::objection_handling: return "objection_handling";
  }
  return "?";
}

std::vector<GuidanceDimension> select_guidance(int level, std::uint64_t seed) {
  if (level < 0 || level > 100 || level % 25 != 0) {
    throw ConfigError("guidance level " + std::to_string(level) + " is off the 25-point grid");
  }
  std::vector<GuidanceDimension> all{GuidanceDimension::target_expansion, GuidanceDimension::value_proposition,
                                     GuidanceDimension::contextual_urgency, GuidanceDimension::objection_handling};
  std::mt19937_64 rng(derive_seed(seed, "guidance"));
  seeded_shuffle(all.begin(), all.end(), rng);
  all.resize(static_cast<std::size_t>(level / 25));
  std::sort(all.begin(), all.end());
  return all;
}

void apply_guidance(TemplateContext& ctx, const std::vector<GuidanceDimension>& dims) {
  auto has = [&](GuidanceDimension d) { return std::find(dims.begin(), dims.end(), d) != dims.end(); };
  const bool urgency = has(GuidanceDimension::contextual_urgency);
  const bool expansion = has(GuidanceDimension::target_expansion);
  const bool value = has(GuidanceDimension::value_proposition);
  const bool objections = has(GuidanceDimension::objection_handling);
  const int core = int(expansion) + int(value) + int(objections);

  int n = 0;
  std::string hook, range, closing;
  if (urgency) hook = std::to_string(++n);
  if (core > 0) {
    range = core == 1 ? std::to_string(n + 1) : std::to_string(n + 1) + "–" + std::to_string(n + core);
    n += core;
  }
  if (urgency) closing = std::to_string(++n);

  static constexpr std::array<std::string_view, 4> kCount{"", "", "two", "three"};
  const std::string blend = core == 1 ? "This element should blend seamlessly into your pitch naturally."
                                      : "These " + std::string(kCount[static_cast<std::size_t>(std::max(core, 0))]) +
                                            " elements should blend seamlessly into your pitch naturally.";

  ctx.flag("guided", !dims.empty())
      .flag("opening_hook", urgency)
      .flag("closing_cta", urgency)
      .flag("core_points", core > 0)
      .flag("target_expansion", expansion)
      .flag("value_validation", value)
      .flag("qa_integration", objections)
      .set("hook_number", hook)
      .set("core_range", range)
      .set("closing_number", closing)
      .set("core_blend_sentence", core > 0 ? blend : "")
      .set("required_element_count_text", n == 1 ? "this element" : "these " + std::to_string(n) + " elements");
}

std::string order_id(const RunSpec& spec) {
  char suffix[16];
  std::snprintf(suffix, sizeof suffix, "%08X", static_cast<unsigned>(spec.seed & 0xFFFFFFFFu));
  return "ORD-" + spec.product.id + "-" + suffix;
}

std::string order_info(const RunSpec& spec, int quantity) {
  const auto& p = spec.product;
  const Money unit = effective_price(p.price, p.discount_rate, spec.price_condition);
  const Money ship = shipping_fee(condition_list_price(p.price, spec.price_condition));
  return "Order ID: " + order_id(spec) + " | Quantity: " + std::to_string(quantity) +
         " | Unit price: " + unit.display() + " | Shipping: " + ship.display() +
         " | Total: " + (unit * quantity + ship).display() + " | expected_delivery_date: within " +
         std::string(kDeliveryTimeText) + " of the order";
}

std::string discount_percent_text(double rate) {
  const double pct = rate * 100.0;
  const double whole = std::round(pct);
  if (std::abs(pct - whole) < 1e-9) return std::to_string(static_cast<long long>(whole));
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", pct);
  return buf;
}

std::string price_condition_text(const Product& product, PriceCondition condition) {
  const Money base = product.price;
  const Money list = condition_list_price(base, condition);
  const Money pay = effective_price(base, product.discount_rate, condition);
  const std::string off = discount_percent_text(product.discount_rate) + "% off";
  const int pct = condition.percent();
  if (pct == 0) {
    return "Regular price. You pay " + pay.display() + " (" + off + " the " + list.display() + " list price).";
  }
  const std::string mag = std::to_string(std::abs(pct));
  if (pct < 0) {
    return "Special price cut: the list price is " + mag + "% lower than usual (" + list.display() + " instead of " +
           base.display() + "). You pay " + pay.display() + " (" + off + ").";
  }
  return "Price increase: the list price is " + mag + "% higher than usual (" + list.display() + " instead of " +
         base.display() + "). You pay " + pay.display() + " (" + off + ").";
}

namespace {

constexpr std::string_view kDefaultAirTime = "Tonight, 8:00 PM";

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += sep;
    out += p;
  }
  return out;
}

}  // namespace

TemplateContext base_context(const RunSpec& spec) {
  const auto& p = spec.product;
  const Money list = condition_list_price(p.price, spec.price_condition);
  TemplateContext ctx;
  ctx.set("seller_name", spec.seller.name)
      .set("seller_gender_full", std::string(gender_name(spec.seller_gender())))
      .set("seller_persona_block", render_persona_block(spec.seller_mode, Role::seller))
      .set("buyer_name", spec.buyer.name)
      .set("buyer_gender_full", std::string(gender_name(spec.buyer_gender())))
      .set("buyer_persona_block", render_persona_block(spec.buyer_mode, Role::buyer))
      .set("title", p.title)
      .set("main_category", std::string(category_name(p.category)))
      .set("price", list.str())
      .set("discount_rate_pct", discount_percent_text(p.discount_rate))
      .set("discount_price", effective_price(p.price, p.discount_rate, spec.price_condition).str())
      .set("store", p.store)
      .set("broadcast_datetime", p.air_datetime.empty() ? std::string(kDefaultAirTime) : p.air_datetime)
      .set("features", join(p.features, "; "))
      .set("price_condition_text", price_condition_text(p, spec.price_condition))
      .set("shipping_cost_display", shipping_fee(list).display())
      .set("shipping_time_text", std::string(kDeliveryTimeText))
      .set("return_refund_policy_text", return_policy(p.category).text);
  return ctx;
}

bool strip_done_marker(std::string& text) {
  auto end = text.find_last_not_of(" \t\r\n");
  if (end == std::string::npos) return false;
  std::string_view body(text.data(), end + 1);
  if (body.size() < kDoneMarker.size() || body.substr(body.size() - kDoneMarker.size()) != kDoneMarker) return false;
  text.resize(body.size() - kDoneMarker.size());
  auto keep = text.find_last_not_of(" \t\r\n");
  text.resize(keep == std::string::npos ? 0 : keep + 1);
  return true;
}

namespace {

class Runner {
 public:
  Runner(const RunSpec& spec, const BackendMap& backends, const PipelineOptions& options)
      : spec_(spec),
        options_(options),
        seller_(resolve_backend(backends, spec.seller_backend)),
        buyer_(resolve_backend(backends, spec.buyer_backend)),
        extractor_(resolve_backend(backends, spec.extractor_backend())),
        ctx_(base_context(spec)) {
    traj_.run_id = spec.run_id;
    traj_.spec = spec;
    traj_.prompt_version = std::string(prompt_version());
  }

  Trajectory run() {
    try {
      strategy();
      pitch();
      review_stage_(ReviewKind::script, StageName::script_review, "review_script");
      topics();
      dialogue("pre");
      review_stage_(ReviewKind::pre_inquiry, StageName::pre_inquiry_review, "review_pre_inquiry");
      const bool purchased = decide();
      if (purchased) {
        dialogue("post");
        outcome();
        review_stage_(ReviewKind::post_inquiry, StageName::post_inquiry_review, "review_post_inquiry");
        review_stage_(ReviewKind::product, StageName::product_review, "review_product");
      }
      traj_.status = RunStatus::completed;
    } catch (const std::exception& e) {
      traj_.status = RunStatus::failed;
      traj_.failed_stage = current_;
      traj_.error = dynamic_cast<const CancelledError*>(&e) ? "cancelled" : e.what();
      if (!traj_.stages.empty() && traj_.stages.back().finished_at.empty()) {
        traj_.stages.back().finished_at = utc_now_iso8601();
      }
    }
    for (const auto& st : traj_.stages) {
      for (const auto& w : st.warnings) traj_.warnings.push_back(std::string(stage_name(st.stage)) + ": " + w);
    }
    return std::move(traj_);
  }

 private:
  StageRecord& begin(StageName s) {
    current_ = s;
    if (options_.stop.stop_requested()) throw CancelledError("cancelled");
    StageRecord st;
    st.stage = s;
    st.started_at = utc_now_iso8601();
    traj_.stages.push_back(std::move(st));
    return traj_.stages.back();
  }

  void finish() { traj_.stages.back().finished_at = utc_now_iso8601(); }

  StageRecord& stage() { return traj_.stages.back(); }

  std::vector<ChatMessage> messages(std::string_view prompt) const {
    const auto& t = prompt_template(prompt);
    return {{MessageRole::system, render_template(t.system, ctx_)},
            {MessageRole::user, render_template(t.user, ctx_)}};
  }

  const std::string& call(const BackendPtr& backend, const std::string& turn, const std::vector<ChatMessage>& msgs) {
    CompletionRequest req;
    req.messages = msgs;
    req.params = spec_.params;
    req.tag = RequestTag{spec_.run_id, std::string(stage_name(current_)), turn};
    auto res = backend->complete(req);
    CallRecord c;
    c.turn = turn;
    c.backend_id = res.backend_id.empty() ? backend->id() : res.backend_id;
    c.text = std::move(res.text);
    c.input_tokens = res.input_tokens;
    c.output_tokens = res.output_tokens;
    c.attempt_count = res.attempt_count;
    if (options_.record_prompts) c.prompt = msgs;
    stage().calls.push_back(std::move(c));
    return stage().calls.back().text;
  }

  // One call plus one reminder retry. Returns nullopt when both fail to parse.
  template <class T>
  std::optional<T> structured(const BackendPtr& backend, std::string_view prompt,
                              const std::function<std::optional<T>(const std::string&)>& parse) {
    auto msgs = messages(prompt);
    std::string first = call(backend, "1", msgs);
    if (auto v = parse(first)) return v;
    stage().warnings.push_back("unparseable output, retrying with JSON reminder");
    msgs.push_back({MessageRole::assistant, first});
    msgs.push_back({MessageRole::user, std::string(kJsonRetryReminder)});
    return parse(call(backend, "2", msgs));
  }

  void strategy() {
    begin(StageName::strategy);
    const auto& text = call(seller_, "1", messages("strategy"));
    ctx_.set("seller_strategy", text);
    finish();
  }

  void pitch() {
    begin(StageName::pitch);
    const auto dims = select_guidance(spec_.guidance_level, spec_.seed);
    apply_guidance(ctx_, dims);
    json names = json::array();
    for (auto d : dims) names.push_back(guidance_dimension_name(d));
    stage().parsed = json{{"guidance_level", spec_.guidance_level}, {"dimensions", names}};
    const auto& text = call(seller_, "1", messages("pitch"));
    ctx_.set("broadcast_script", text);
    finish();
  }

  void review_stage_(ReviewKind kind, StageName name, std::string_view prompt) {
    begin(name);
    std::vector<std::string> parse_warnings;
    auto review = structured<Review>(buyer_, prompt, [&](const std::string& text) {
      parse_warnings.clear();
      return parse_review(kind, text, parse_warnings);
    });
    auto& st = stage();
    st.warnings.insert(st.warnings.end(), parse_warnings.begin(), parse_warnings.end());
    std::string summary;
    if (review) {
      st.parsed = *review;
      summary = "Rating: " + std::to_string(review->rating) + "/5. " + review->text;
    } else {
      st.warnings.push_back("review missing: output unparseable after retry");
      summary = st.output();
    }
    switch (kind) {
      case ReviewKind::script: ctx_.set("broadcast_review", summary); break;
      case ReviewKind::pre_inquiry: ctx_.set("pre_cs_review", summary); break;
      case ReviewKind::post_inquiry: ctx_.set("post_cs_review", summary); break;
      case ReviewKind::product: break;
    }
    finish();
  }

  void topics() {
    begin(StageName::topic_selection);
    auto sel = structured<TopicSelection>(buyer_, "topic_selection",
                                          [](const std::string& text) { return parse_topics(text); });
    auto& st = stage();
    if (!sel) {
      sel = fallback_topics();
      st.warnings.push_back("topic selection unparseable after retry, using fallback topic");
    } else {
      if (sel->truncated) st.warnings.push_back("more than two topics, kept the first two");
      if (sel->fallback) st.warnings.push_back("no known topic selected, using fallback topic");
      for (const auto& d : sel->dropped) st.warnings.push_back("dropped unknown topic '" + d + "'");
    }
    st.parsed = *sel;
    topics_ = sel->topics;
    ctx_.set("inquiry_topics", join(topics_, ", "));
    finish();
  }

  void dialogue(const std::string& phase) {
    const bool pre = phase == "pre";
    begin(pre ? StageName::pre_dialogue : StageName::post_dialogue);
    if (!pre) {
      ctx_.set("inquiry_topics", std::string(issue_label(spec_.post_issue)) + ": " +
                                     std::string(issue_description(spec_.post_issue)));
    }
    DialogueTranscript t;
    t.phase = phase;
    t.termination = Termination::turn_cap;
    stage().parsed = t;
    const std::string initial = pre ? "pre_buyer_initial" : "post_buyer_initial";
    const std::string followup = pre ? "pre_buyer_followup" : "post_buyer_followup";
    const std::string seller = pre ? "pre_seller" : "post_seller";
    for (int n = 1; n <= options_.max_buyer_turns; ++n) {
      ctx_.set("conversation_history", t.history());
      std::string text = call(buyer_, "buyer:" + std::to_string(n), messages(n == 1 ? initial : followup));
      DialogueMessage bm{Speaker::buyer, std::move(text), false};
      bm.done_marker = strip_done_marker(bm.text);
      const bool done = bm.done_marker;
      t.messages.push_back(std::move(bm));
      stage().parsed = t;

      ctx_.set("conversation_history", t.history());
      std::string reply = call(seller_, "seller:" + std::to_string(n), messages(seller));
      t.messages.push_back({Speaker::seller, std::move(reply), false});
      stage().parsed = t;
      if (done) {
        t.termination = Termination::done_marker;
        break;
      }
    }
    stage().parsed = t;
    const std::string history = t.history();
    if (pre) {
      ctx_.set("pre_purchase_inquiry", history);
      std::string first = t.messages.empty() ? std::string() : t.messages.front().text;
      ctx_.set("pre_purchase_inquiry_summary", "Topics discussed: " + join(topics_, ", ") + ". First question: " + first);
    } else {
      ctx_.set("post_purchase_inquiry", history);
      post_history_ = history;
    }
    finish();
  }

  bool decide() {
    begin(StageName::purchase_decision);
    std::vector<std::string> parse_warnings;
    auto d = structured<PurchaseDecision>(buyer_, "purchase_decision", [&](const std::string& text) {
      parse_warnings.clear();
      return parse_purchase_decision(text, parse_warnings);
    });
    auto& st = stage();
    st.warnings.insert(st.warnings.end(), parse_warnings.begin(), parse_warnings.end());
    if (!d) throw ExtractionError("purchase decision unparseable after retry");
    st.parsed = *d;
    ctx_.set("order_info", order_info(spec_, d->quantity));
    ctx_.set("purchase_decision_summary",
             std::string(d->will_purchase ? "Purchased " : "Did not purchase ") + std::to_string(d->quantity) +
                 (d->quantity == 1 ? " unit" : " units") + ". Quantity reason: " + d->quantity_reason +
                 " Reason: " + d->reason);
    finish();
    return d->will_purchase;
  }

  void outcome() {
    begin(StageName::outcome_extraction);
    ctx_.set("inquiry_category", std::string(issue_label(spec_.post_issue)));
    ctx_.set("conversation_history", post_history_);
    std::vector<std::string> parse_warnings;
    auto o = structured<PostOutcome>(extractor_, "outcome", [&](const std::string& text) {
      parse_warnings.clear();
      return parse_post_outcome(text, parse_warnings);
    });
    auto& st = stage();
    st.warnings.insert(st.warnings.end(), parse_warnings.begin(), parse_warnings.end());
    if (!o) {
      o = PostOutcome{Outcome::delivered, "no valid outcome extracted", "extractor output invalid after retry", true};
      st.warnings.push_back("outcome defaulted to delivered");
    }
    st.parsed = *o;
    ctx_.set("resolution", std::string(outcome_name(o->outcome)) + ": " + o->resolution_type);
    ctx_.set("order_outcome", std::string(outcome_name(o->outcome)));
    finish();
  }

  const RunSpec& spec_;
  const PipelineOptions& options_;
  BackendPtr seller_, buyer_, extractor_;
  TemplateContext ctx_;
  Trajectory traj_;
  StageName current_ = StageName::strategy;
  std::vector<std::string> topics_;
  std::string post_history_;
};

}  // namespace

Trajectory run_simulation(const RunSpec& spec, const BackendMap& backends, const PipelineOptions& options) {
  spec.validate();
  Runner runner(spec, backends, options);
  return runner.run();
}

}  // namespace shopsim

#include <chrono>
#include <set>
#include <stop_token>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "golden.hpp"
#include "shopsim/error.hpp"
#include "shopsim/pipeline.hpp"
#include "shopsim/prompts.hpp"

using namespace shopsim;
using nlohmann::json;

namespace {

BackendMap scripted(std::vector<ScriptEntry> entries, std::shared_ptr<ScriptedBackend>* keep = nullptr) {
  auto b = std::make_shared<ScriptedBackend>("golden", std::move(entries));
  if (keep) *keep = b;
  return BackendMap{{"golden", b}};
}

PipelineOptions recording() {
  PipelineOptions o;
  o.record_prompts = true;
  return o;
}

// Concatenated prompt of one call.
std::string prompt_of(const CallRecord& c) {
  std::string out;
  for (const auto& m : c.prompt) out += m.content + "\n";
  return out;
}

bool contains(const std::string& hay, const std::string& needle) { return hay.find(needle) != std::string::npos; }

void check_transcript(const DialogueTranscript& t, int cap) {
  REQUIRE_FALSE(t.messages.empty());
  CHECK(t.messages.front().speaker == Speaker::buyer);
  for (std::size_t i = 1; i < t.messages.size(); ++i) CHECK(t.messages[i].speaker != t.messages[i - 1].speaker);
  CHECK(t.buyer_messages() <= static_cast<std::size_t>(cap));
  for (const auto& m : t.messages) CHECK_FALSE(contains(m.text, "[DONE]"));
}

}  // namespace

TEST_CASE("golden product and pricing helpers") {
  const auto spec = testutil::golden_spec();
  CHECK(spec.product.category == Category::food);
  CHECK(order_id(spec) == "ORD-B0033QRME0-12FF9A44");
  CHECK(order_info(spec, 1) ==
        "Order ID: ORD-B0033QRME0-12FF9A44 | Quantity: 1 | Unit price: $28.80 | Shipping: $1.60 | Total: $30.40 | "
        "expected_delivery_date: within 1–7 days of the order");
  CHECK(price_condition_text(spec.product, PriceCondition{}) ==
        "Regular price. You pay $28.80 (10% off the $32.00 list price).");
  CHECK(price_condition_text(spec.product, PriceCondition::from_percent(-10)) ==
        "Special price cut: the list price is 10% lower than usual ($28.80 instead of $32.00). You pay $25.92 "
        "(10% off).");
  CHECK(contains(price_condition_text(spec.product, PriceCondition::from_percent(5)), "5% higher than usual ($33.60"));
  CHECK(discount_percent_text(0.10) == "10");
  CHECK(discount_percent_text(0.125) == "12.5");

  auto ctx = base_context(spec);
  CHECK(ctx.values.at("price") == "32.00");
  CHECK(ctx.values.at("discount_price") == "28.80");
  CHECK(ctx.values.at("shipping_cost_display") == "$1.60");
  CHECK(ctx.values.at("seller_gender_full") == "male");
  CHECK(ctx.values.at("buyer_persona_block") == std::string(kInherentInstruction));
}

TEST_CASE("done marker stripping") {
  std::string a = "All good, thanks! [DONE]  \n";
  CHECK(strip_done_marker(a));
  CHECK(a == "All good, thanks!");
  std::string b = "[DONE]";
  CHECK(strip_done_marker(b));
  CHECK(b.empty());
  std::string c = "What about [DONE] warranty?";
  CHECK_FALSE(strip_done_marker(c));
  CHECK(c == "What about [DONE] warranty?");
  std::string d = "ok [done]";
  CHECK_FALSE(strip_done_marker(d));
}

TEST_CASE("guidance selection") {
  CHECK(select_guidance(0, 5).empty());
  CHECK(select_guidance(100, 5).size() == 4);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto a = select_guidance(50, seed);
    CHECK(a.size() == 2);
    CHECK(a == select_guidance(50, seed));
    CHECK(std::is_sorted(a.begin(), a.end()));
    CHECK(std::set<GuidanceDimension>(a.begin(), a.end()).size() == 2);
  }
  std::set<std::vector<GuidanceDimension>> seen;
  for (std::uint64_t seed = 0; seed < 200; ++seed) seen.insert(select_guidance(50, seed));
  CHECK(seen.size() == 6);  // every 2-subset of 4 shows up
  CHECK_THROWS_AS(select_guidance(30, 1), ConfigError);
}

TEST_CASE("pitch prompt scaffold by guidance") {
  auto spec = testutil::golden_spec();
  auto render = [&](const std::vector<GuidanceDimension>& dims) {
    auto ctx = base_context(spec);
    ctx.set("seller_strategy", "STRATEGY");
    apply_guidance(ctx, dims);
    return render_template(prompt_template("pitch").user, ctx);
  };
  const auto full = render(select_guidance(100, 0));
  CHECK(full.rfind("Create a compelling home shopping broadcast script (1–2 minutes) following your pre-defined "
                   "strategy.\n\nYour Personality: ",
                   0) == 0);
  CHECK(contains(full, "Your script MUST include these 5 elements, but"));
  CHECK(contains(full, "\n1. Opening Hook\n"));
  CHECK(contains(full, "\n2–4. Core Selling Points (weave these together naturally, ANY order)\nThese three elements "
                       "should blend seamlessly into your pitch naturally.\n\n- Target Expansion:\n"));
  CHECK(contains(full, "  - Turn hesitations into selling points\n\n5. Closing Call-to-Action\n"));
  CHECK(contains(full, "Your Strategy: STRATEGY"));

  const auto none = render({});
  CHECK(none.rfind("Create a compelling home shopping broadcast script (1–2 minutes).\n", 0) == 0);
  for (auto s : {"Required Script Elements", "Opening Hook", "Core Selling", "Closing Call", "STRATEGY",
                 "Target Expansion", "Q&A Integration"}) {
    CHECK_FALSE(contains(none, s));
  }

  const auto two = render({GuidanceDimension::value_proposition, GuidanceDimension::objection_handling});
  CHECK(contains(two, "these 2 elements"));
  CHECK(contains(two, "\n1–2. Core Selling Points"));
  CHECK(contains(two, "These two elements should"));
  CHECK_FALSE(contains(two, "Opening Hook"));
  CHECK_FALSE(contains(two, "Target Expansion:"));

  const auto urgency = render({GuidanceDimension::contextual_urgency});
  CHECK(contains(urgency, "these 2 elements"));
  CHECK(contains(urgency, "1. Opening Hook"));
  CHECK(contains(urgency, "2. Closing Call-to-Action"));
  CHECK_FALSE(contains(urgency, "Core Selling"));

  const auto one = render({GuidanceDimension::target_expansion});
  CHECK(contains(one, "MUST include this element,"));
  CHECK(contains(one, "\n1. Core Selling Points"));
  CHECK(contains(one, "This element should blend"));

  auto ctx = base_context(spec);
  apply_guidance(ctx, {});
  CHECK_FALSE(contains(render_template(prompt_template("pitch").system, ctx), "CRITICAL: You have already"));
}

TEST_CASE("golden trajectory replay") {
  std::shared_ptr<ScriptedBackend> backend;
  auto backends = scripted(testutil::golden_entries(), &backend);
  const auto spec = testutil::golden_spec();
  const auto start = std::chrono::steady_clock::now();
  const auto t = run_simulation(spec, backends, recording());
  const auto elapsed = std::chrono::steady_clock::now() - start;
  CHECK(elapsed < std::chrono::seconds(1));

  INFO(t.error);
  REQUIRE(t.status == RunStatus::completed);
  REQUIRE(t.stages.size() == 11);
  for (std::size_t i = 0; i < t.stages.size(); ++i) CHECK(t.stages[i].stage == kStageOrder[i]);
  CHECK(backend->remaining() == 0);

  auto topics = t.topics();
  REQUIRE(topics);
  CHECK(topics->topics == std::vector<std::string>{"product specifications", "shipping"});

  auto pre = t.dialogue(StageName::pre_dialogue);
  REQUIRE(pre);
  CHECK(pre->buyer_messages() == 4);
  CHECK(pre->messages.size() == 8);
  CHECK(pre->termination == Termination::done_marker);
  CHECK(pre->messages[6].done_marker);
  check_transcript(*pre, 5);
  CHECK(contains(pre->messages[1].text, "Shipping is $1.60"));
  CHECK(contains(pre->messages[1].text, "Sam Q."));

  auto d = t.decision();
  REQUIRE(d);
  CHECK(d->will_purchase);
  CHECK(d->quantity == 1);
  CHECK(contains(d->reason, "blooming tea idea"));

  auto post = t.dialogue(StageName::post_dialogue);
  REQUIRE(post);
  CHECK(post->buyer_messages() == 3);
  CHECK(post->messages.back().speaker == Speaker::seller);
  check_transcript(*post, 5);

  auto o = t.outcome();
  REQUIRE(o);
  CHECK(o->outcome == Outcome::exchanged);
  CHECK_FALSE(o->fallback_applied);

  CHECK(t.review_count() == 4);
  CHECK(t.review(ReviewKind::script)->rating == 4);
  CHECK(t.review(ReviewKind::pre_inquiry)->rating == 5);
  CHECK(t.review(ReviewKind::post_inquiry)->rating == 5);
  CHECK(t.review(ReviewKind::product)->rating == 3);
  CHECK(t.review(ReviewKind::product)->would_recommend == false);
  CHECK(contains(t.review(ReviewKind::product)->text, "broken"));

  auto s = summarize(t);
  CHECK(s.purchased);
  CHECK(s.revenue.str() == "28.80");

  // order number reaches the post-purchase buyer prompt
  const auto* post_stage = t.find(StageName::post_dialogue);
  CHECK(contains(prompt_of(post_stage->calls.front()), "ORD-B0033QRME0-12FF9A44"));
  // every call was tagged and tokens accumulate
  std::int64_t in = 0;
  for (const auto& st : t.stages) in += st.input_tokens();
  CHECK(in > 0);
  CHECK(t.find(StageName::strategy)->output().rfind("1. Target Expansion Strategy\nCore Target Audience", 0) == 0);

  // serialization round trip
  auto back = trajectory_from_json(json::parse(trajectory_to_json(t).dump()));
  CHECK(back == t);
}

TEST_CASE("prompts embed the stored outputs of their context stages") {
  const auto t = run_simulation(testutil::golden_spec(), scripted(testutil::golden_entries()), recording());
  REQUIRE(t.status == RunStatus::completed);
  auto out = [&](StageName s) { return t.find(s)->output(); };
  auto all_prompts = [&](StageName s) {
    std::vector<std::string> v;
    for (const auto& c : t.find(s)->calls) v.push_back(prompt_of(c));
    return v;
  };
  const std::string strategy = out(StageName::strategy);
  const std::string pitch = out(StageName::pitch);
  const std::string pre = t.dialogue(StageName::pre_dialogue)->history();
  const std::string post = t.dialogue(StageName::post_dialogue)->history();

  for (const auto& p : all_prompts(StageName::pitch)) CHECK(contains(p, strategy));
  for (auto s : {StageName::script_review, StageName::topic_selection, StageName::pre_dialogue,
                 StageName::purchase_decision, StageName::post_dialogue, StageName::product_review}) {
    for (const auto& p : all_prompts(s)) CHECK(contains(p, pitch));
  }
  for (auto s : {StageName::pre_inquiry_review, StageName::purchase_decision, StageName::product_review}) {
    for (const auto& p : all_prompts(s)) CHECK(contains(p, pre));
  }
  const std::string decision_prompt = all_prompts(StageName::purchase_decision).front();
  CHECK(contains(decision_prompt, t.review(ReviewKind::script)->text));
  CHECK(contains(decision_prompt, t.review(ReviewKind::pre_inquiry)->text));
  for (auto s : {StageName::outcome_extraction, StageName::post_inquiry_review, StageName::product_review}) {
    for (const auto& p : all_prompts(s)) CHECK(contains(p, post));
  }
  CHECK(contains(all_prompts(StageName::product_review).front(), t.review(ReviewKind::post_inquiry)->text));
  CHECK(contains(all_prompts(StageName::product_review).front(), "Final order outcome: exchanged"));
  CHECK(contains(all_prompts(StageName::post_inquiry_review).front(), "exchanged: replacement sent"));

  // each dialogue prompt carries the transcript up to that point
  const auto* st = t.find(StageName::pre_dialogue);
  const auto transcript = *t.dialogue(StageName::pre_dialogue);
  for (std::size_t i = 1; i < st->calls.size(); ++i) {
    const auto& prev = transcript.messages[i - 1].text;
    CHECK(contains(prompt_of(st->calls[i]), prev));
  }
  CHECK(contains(prompt_of(st->calls[1]), "Shipping cost: $1.60"));
  CHECK(contains(prompt_of(st->calls[1]), "Return window: 7 days from delivery"));
}

TEST_CASE("inherent mode and explicit personas reach the prompt") {
  auto spec = testutil::golden_spec();
  auto t = run_simulation(spec, scripted(testutil::golden_entries()), recording());
  const auto strategy_prompt = prompt_of(t.find(StageName::strategy)->calls.front());
  CHECK(contains(strategy_prompt, std::string(kInherentInstruction)));
  for (auto key : {"Charme Gift Set with Blooming Teas", "$32.00", "10%", "$28.80", "Silver Needle white tea"}) {
    CHECK(contains(strategy_prompt, key));
  }
  CHECK(template_placeholders(strategy_prompt).empty());

  spec.buyer_mode = PersonaMode::explicit_persona(Persona{Role::buyer, Gender::male, {0, 1, 0}});
  t = run_simulation(spec, scripted(testutil::golden_entries()), recording());
  const auto decision_prompt = prompt_of(t.find(StageName::purchase_decision)->calls.front());
  CHECK(contains(decision_prompt, "Price Consciousness: price-indifferent"));
  CHECK(contains(decision_prompt, "Name: Jordan K., Gender: male"));
  CHECK_FALSE(contains(decision_prompt, std::string(kInherentInstruction)));
}

TEST_CASE("non-purchase ends after the decision") {
  auto entries = testutil::golden_entries();
  testutil::replace_entry(entries, "purchase_decision", "1",
                          R"({"will_purchase": false, "quantity": 3, "quantity_reason": "", "sentiment": "Negative",
                              "reason": "too pricey"})");
  const auto t = run_simulation(testutil::golden_spec(), scripted(entries));
  REQUIRE(t.status == RunStatus::completed);
  CHECK(t.stages.size() == 7);
  CHECK(t.review_count() == 2);
  CHECK_FALSE(t.find(StageName::post_dialogue));
  CHECK_FALSE(t.outcome());
  CHECK(t.decision()->quantity == 0);
  CHECK_FALSE(t.warnings.empty());
  CHECK(summarize(t).revenue.cents() == 0);
}

TEST_CASE("dialogue termination") {
  auto base = testutil::golden_entries();
  testutil::drop_stage(base, "pre_dialogue");

  SUBCASE("marker in first follow-up") {
    auto e = base;
    e.push_back({"*", "pre_dialogue", "buyer:1", "Is it glass?", 5, 5});
    e.push_back({"*", "pre_dialogue", "seller:1", "Yes.", 5, 5});
    e.push_back({"*", "pre_dialogue", "buyer:2", "Great, thanks.\t[DONE]\n", 5, 5});
    e.push_back({"*", "pre_dialogue", "seller:2", "Enjoy!", 5, 5});
    const auto t = run_simulation(testutil::golden_spec(), scripted(e));
    REQUIRE(t.status == RunStatus::completed);
    auto d = *t.dialogue(StageName::pre_dialogue);
    CHECK(d.buyer_messages() == 2);
    CHECK(d.messages.size() == 4);
    CHECK(d.termination == Termination::done_marker);
    CHECK(d.messages[2].text == "Great, thanks.");
    CHECK(d.messages[2].done_marker);
    check_transcript(d, 5);
  }
  SUBCASE("cap at five buyer messages") {
    auto e = base;
    for (int n = 1; n <= 5; ++n) {
      e.push_back({"*", "pre_dialogue", "buyer:" + std::to_string(n), "Question " + std::to_string(n), 5, 5});
      e.push_back({"*", "pre_dialogue", "seller:" + std::to_string(n), "Answer " + std::to_string(n), 5, 5});
    }
    e.push_back({"*", "pre_dialogue", "buyer:6", "never asked", 5, 5});
    std::shared_ptr<ScriptedBackend> keep;
    const auto t = run_simulation(testutil::golden_spec(), scripted(e, &keep));
    REQUIRE(t.status == RunStatus::completed);
    auto d = *t.dialogue(StageName::pre_dialogue);
    CHECK(d.buyer_messages() == 5);
    CHECK(d.messages.size() == 10);
    CHECK(d.termination == Termination::turn_cap);
    CHECK(keep->remaining() == 1);
    check_transcript(d, 5);
  }
  SUBCASE("backend failure mid-dialogue keeps the partial transcript") {
    auto e = base;
    e.push_back({"*", "pre_dialogue", "buyer:1", "Is it glass?", 5, 5});
    e.push_back({"*", "pre_dialogue", "seller:1", "Yes.", 5, 5});
    e.push_back({"*", "pre_dialogue", "buyer:2", "And the lid?", 5, 5});
    const auto t = run_simulation(testutil::golden_spec(), scripted(e));
    CHECK(t.status == RunStatus::failed);
    CHECK(t.failed_stage == StageName::pre_dialogue);
    CHECK(contains(t.error, "seller:2"));
    auto d = t.dialogue(StageName::pre_dialogue);
    REQUIRE(d);
    CHECK(d->messages.size() == 3);
    CHECK(t.stages.size() == 5);
  }
}

TEST_CASE("structured output retries and fallbacks") {
  SUBCASE("decision unparseable twice fails the run") {
    auto e = testutil::golden_entries();
    testutil::replace_entry(e, "purchase_decision", "1", "I think I will buy it!");
    e.push_back({"*", "purchase_decision", "2", "Yes, buying.", 1, 1});
    const auto t = run_simulation(testutil::golden_spec(), scripted(e), recording());
    CHECK(t.status == RunStatus::failed);
    CHECK(t.failed_stage == StageName::purchase_decision);
    CHECK(t.stages.size() == 7);
    const auto& calls = t.find(StageName::purchase_decision)->calls;
    REQUIRE(calls.size() == 2);
    CHECK(calls[1].prompt.back().content == std::string(kJsonRetryReminder));
    CHECK(calls[1].prompt[2].role == MessageRole::assistant);
  }
  SUBCASE("decision recovered on retry") {
    auto e = testutil::golden_entries();
    std::string original;
    for (const auto& x : e) {
      if (x.stage == "purchase_decision") original = x.text;
    }
    testutil::replace_entry(e, "purchase_decision", "1", "{not json");
    e.push_back({"*", "purchase_decision", "2", original, 1, 1});
    const auto t = run_simulation(testutil::golden_spec(), scripted(e));
    CHECK(t.status == RunStatus::completed);
    CHECK(t.decision()->quantity == 1);
  }
  SUBCASE("invalid outcome twice falls back to delivered") {
    auto e = testutil::golden_entries();
    testutil::replace_entry(e, "outcome_extraction", "1", R"({"outcome": "returned", "resolution_type": "x"})");
    e.push_back({"*", "outcome_extraction", "2", R"({"outcome": "returned"})", 1, 1});
    const auto t = run_simulation(testutil::golden_spec(), scripted(e));
    REQUIRE(t.status == RunStatus::completed);
    CHECK(t.outcome()->outcome == Outcome::delivered);
    CHECK(t.outcome()->fallback_applied);
    CHECK(t.review_count() == 4);
  }
  SUBCASE("topics unparseable twice fall back") {
    auto e = testutil::golden_entries();
    testutil::replace_entry(e, "topic_selection", "1", "shipping please");
    e.push_back({"*", "topic_selection", "2", "still no json", 1, 1});
    const auto t = run_simulation(testutil::golden_spec(), scripted(e));
    REQUIRE(t.status == RunStatus::completed);
    CHECK(t.topics()->fallback);
    CHECK(t.topics()->topics == std::vector<std::string>{"product specifications"});
  }
  SUBCASE("out-of-range rating is clamped and a lost review is non-fatal") {
    auto e = testutil::golden_entries();
    testutil::replace_entry(e, "script_review", "1", R"({"rating": 7, "review_text": "wow"})");
    testutil::replace_entry(e, "post_inquiry_review", "1", "five stars");
    e.push_back({"*", "post_inquiry_review", "2", "really, five", 1, 1});
    const auto t = run_simulation(testutil::golden_spec(), scripted(e));
    REQUIRE(t.status == RunStatus::completed);
    CHECK(t.review(ReviewKind::script)->rating == 5);
    CHECK_FALSE(t.find(StageName::script_review)->warnings.empty());
    CHECK_FALSE(t.review(ReviewKind::post_inquiry));
    CHECK(t.review_count() == 4);
    CHECK(summarize(t).ratings[2] == std::nullopt);
  }
}

TEST_CASE("refund dialogue is extracted as refunded") {
  auto e = testutil::golden_entries();
  testutil::drop_stage(e, "post_dialogue");
  const std::string ask = "My tea set arrived shattered. I want my money back, not a replacement.";
  const std::string approve = "I'm sorry. I have approved a full refund; return the set with the prepaid label.";
  e.push_back({"*", "post_dialogue", "buyer:1", ask, 5, 5});
  e.push_back({"*", "post_dialogue", "seller:1", approve, 5, 5});
  e.push_back({"*", "post_dialogue", "buyer:2", "Thank you. [DONE]", 5, 5});
  e.push_back({"*", "post_dialogue", "seller:2", "You're welcome.", 5, 5});
  testutil::replace_entry(e, "outcome_extraction", "1",
                          R"({"outcome": "refunded", "resolution_type": "refund approved", "reason": "seller approved"})");
  const auto t = run_simulation(testutil::golden_spec(), scripted(e), recording());
  REQUIRE(t.status == RunStatus::completed);
  const auto prompt = prompt_of(t.find(StageName::outcome_extraction)->calls.front());
  CHECK(contains(prompt, "Buyer: " + ask + "\nSeller: " + approve));
  CHECK(contains(prompt, "Buyer's Issue Category: Damaged on Arrival"));
  CHECK(contains(prompt, "ORD-B0033QRME0-12FF9A44"));
  CHECK(t.outcome()->outcome == Outcome::refunded);
  CHECK(summarize(t).revenue.cents() == 0);
}

TEST_CASE("configuration errors and cancellation") {
  auto spec = testutil::golden_spec();
  spec.buyer_backend = "missing";
  CHECK_THROWS_AS(run_simulation(spec, scripted(testutil::golden_entries())), ConfigError);
  spec = testutil::golden_spec();
  spec.guidance_level = 40;
  CHECK_THROWS_AS(run_simulation(spec, scripted(testutil::golden_entries())), ConfigError);

  std::stop_source stop;
  stop.request_stop();
  PipelineOptions opts;
  opts.stop = stop.get_token();
  const auto t = run_simulation(testutil::golden_spec(), scripted(testutil::golden_entries()), opts);
  CHECK(t.status == RunStatus::failed);
  CHECK(t.error == "cancelled");
  CHECK(t.stages.empty());
}

TEST_CASE("synthetic backend runs are deterministic and respect invariants") {
  auto synth = std::make_shared<SyntheticBackend>("synth", 7);
  BackendMap backends{{"synth", synth}};
  int purchased = 0;
  for (int i = 0; i < 40; ++i) {
    auto spec = testutil::golden_spec("synth");
    spec.run_id = "synth-" + std::to_string(i);
    spec.seed = static_cast<std::uint64_t>(i);
    spec.guidance_level = kGuidanceLevels[static_cast<std::size_t>(i % 5)];
    spec.post_issue = static_cast<IssueType>(i % 5);
    const auto a = run_simulation(spec, backends);
    const auto b = run_simulation(spec, backends);
    INFO(a.error);
    REQUIRE(a.status == RunStatus::completed);
    CHECK(trajectory_to_json(a, false).dump() == trajectory_to_json(b, false).dump());
    const auto d = *a.decision();
    CHECK((d.will_purchase ? d.quantity >= 1 : d.quantity == 0));
    CHECK(a.review_count() == (d.will_purchase ? 4u : 2u));
    CHECK(a.stages.size() == (d.will_purchase ? 11u : 7u));
    CHECK(bool(a.find(StageName::post_dialogue)) == d.will_purchase);
    check_transcript(*a.dialogue(StageName::pre_dialogue), 5);
    if (d.will_purchase) {
      ++purchased;
      check_transcript(*a.dialogue(StageName::post_dialogue), 5);
    }
  }
  CHECK(purchased > 0);
  CHECK(purchased < 40);
}

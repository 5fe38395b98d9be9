// Offline agent that fakes every pipeline stage from the prompt text alone.
#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <string>

#include <nlohmann/json.hpp>

#include "shopsim/agents.hpp"
#include "shopsim/seed.hpp"

namespace shopsim {

using nlohmann::json;

namespace {

bool contains(std::string_view hay, std::string_view needle) { return hay.find(needle) != std::string_view::npos; }

// Text that follows `key` up to the end of its line.
std::string field(std::string_view text, std::string_view key) {
  auto pos = text.find(key);
  if (pos == std::string_view::npos) return {};
  pos += key.size();
  auto end = text.find('\n', pos);
  return std::string(text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos));
}

double unit(std::uint64_t h) { return static_cast<double>(h >> 11) * 0x1.0p-53; }

std::int64_t tokens(std::string_view s) { return static_cast<std::int64_t>((s.size() + 3) / 4); }

// Signed price change mentioned in the decision prompt, as a fraction.
double price_delta(std::string_view prompt) {
  for (auto [word, sign] : {std::pair{"% lower than usual", -1.0}, std::pair{"% higher than usual", 1.0}}) {
    auto pos = prompt.find(word);
    if (pos == std::string_view::npos) continue;
    auto start = pos;
    while (start > 0 && std::isdigit(static_cast<unsigned char>(prompt[start - 1]))) --start;
    return sign * std::atof(std::string(prompt.substr(start, pos - start)).c_str()) / 100.0;
  }
  return 0.0;
}

class Responder {
 public:
  Responder(const CompletionRequest& req, std::uint64_t seed) : req_(req) {
    for (const auto& m : req.messages) {
      if (m.role != MessageRole::assistant) all_ += m.content + "\n";
    }
    user_ = req.messages.empty() ? std::string() : req.messages.back().content;
    hash_ = derive_seed(seed, req.tag.run_id + "\x1f" + req.tag.stage + "\x1f" + req.tag.turn);
    run_hash_ = derive_seed(seed, req.tag.run_id);
    title_ = field(all_, "Product Name: ");
    if (title_.empty()) title_ = field(all_, "Product: ");
    if (auto bar = title_.find(" ("); bar != std::string::npos) title_.resize(bar);
    if (auto bar = title_.find(" |"); bar != std::string::npos) title_.resize(bar);
    if (title_.empty()) title_ = "this product";
  }

  std::string answer() const {
    const auto& s = req_.tag.stage;
    if (s == "strategy") return strategy();
    if (s == "pitch") return pitch();
    if (s == "topic_selection") return topic_selection();
    if (s == "pre_dialogue" || s == "post_dialogue") return dialogue(s == "pre_dialogue");
    if (s == "purchase_decision") return decision();
    if (s == "outcome_extraction") return outcome();
    if (s == "script_review" || s == "pre_inquiry_review" || s == "post_inquiry_review" || s == "product_review") {
      return review(s);
    }
    if (contains(user_, "category")) return "Home";
    return "OK";
  }

 private:
  bool has(std::string_view needle) const { return contains(all_, needle); }

  std::string strategy() const {
    return "1. Target Expansion Strategy\nCore Target Audience: everyday shoppers who want " + title_ +
           ".\nSecondary / Potential Targets: gift buyers.\n2. Tailored Value Proposition\nKey Buying Factors: "
           "quality and value.\n3. Creating Contextual Urgency\nReason to Buy Now: limited broadcast offer.\n"
           "4. Objection Handling\nObjection 1: Is it durable? Answer: yes, built for daily use.";
  }

  std::string pitch() const {
    const auto price = field(all_, "Discounted Price: $");
    std::string out = "Welcome back, everyone! Today we have the " + title_ + ".";
    if (contains(user_, "Opening Hook")) out += " You know that moment when you need something that just works?";
    if (contains(user_, "Target Expansion:")) out += " It is great for you and for anyone on your gift list.";
    if (contains(user_, "Value Validation:")) out += " Compare it to buying the parts separately and it pays off.";
    if (contains(user_, "Q&A Integration:")) out += " Worried about durability? It is made for daily use.";
    out += " Today it is just $" + price + ".";
    if (contains(user_, "Closing Call-to-Action")) out += " This offer ends with the show, so order now!";
    return out;
  }

  std::string topic_selection() const {
    static constexpr std::array<const char*, 4> kTopics{"product specifications", "shipping time and cost",
                                                        "price / discounts", "comparison with other products"};
    json topics = json::array();
    const auto first = hash_ % 4;
    topics.push_back(kTopics[first]);
    if ((hash_ >> 8) % 2 == 0) topics.push_back(kTopics[(first + 1 + (hash_ >> 16) % 3) % 4]);
    return json{{"selected_topics", topics}, {"reason", "These matter most for this purchase."}}.dump();
  }

  std::string dialogue(bool pre) const {
    const auto& turn = req_.tag.turn;
    const bool buyer = turn.rfind("buyer:", 0) == 0;
    const int n = std::atoi(turn.substr(turn.find(':') + 1).c_str());
    if (!buyer) {
      if (pre) return "Thanks for asking! The " + title_ + " is exactly as described, and shipping takes 1–7 days.";
      switch (run_hash_ % 3) {
        case 0: return "I'm sorry about that. We will send you a replacement right away.";
        case 1: return "I'm sorry about that. We have approved a full refund once the item is returned.";
        default: return "I'm sorry about that. Here is some guidance that should resolve the issue.";
      }
    }
    const int stop_after = 1 + static_cast<int>((run_hash_ >> (pre ? 4 : 12)) % 4);
    std::string msg = pre ? "Could you tell me more about the " + title_ + "?"
                          : "Hi, I have a problem with my order of the " + title_ + ".";
    if (n > 1) msg = pre ? "Thanks. One more detail, is it worth the price?" : "Thanks, that works for me.";
    if (n >= stop_after) msg += " [DONE]";
    return msg;
  }

  std::string decision() const {
    const double delta = price_delta(all_);
    double base = 0.6;
    double elasticity = 2.0;
    if (has("Price Consciousness: price-sensitive")) elasticity = 4.0;
    if (has("Price Consciousness: price-indifferent")) {
      elasticity = 0.5;
      base += 0.1;
    }
    if (has("Pickiness: picky")) base -= 0.1;
    if (has("Category: Fashion") && has("Gender: male")) base -= 0.05;
    const double p = std::clamp(base * std::pow(1.0 + delta, -elasticity), 0.0, 1.0);
    const bool buy = unit(run_hash_ ^ 0x9E3779B97F4A7C15ull) < p;
    const int qty = buy ? 1 + static_cast<int>((run_hash_ >> 20) % 8 == 0) : 0;
    return json{{"will_purchase", buy},
                {"quantity", qty},
                {"quantity_reason", buy ? "One is enough for now." : ""},
                {"sentiment", buy ? "Positive" : "Neutral"},
                {"reason", buy ? "It looks worth it at this price." : "Not convinced it is worth it."}}
        .dump();
  }

  std::string outcome() const {
    const auto issue = field(all_, "Buyer's Issue Category: ");
    std::string label = "delivered";
    if (contains(all_, "replacement right away")) label = "exchanged";
    if (contains(all_, "approved a full refund")) label = "refunded";
    if (issue == "Shipping Delay") label = "delivered";
    return json{{"outcome", label}, {"resolution_type", label == "delivered" ? "issue resolved with guidance" : label},
                {"reason", "Based on what the seller agreed to."}}
        .dump();
  }

  std::string review(const std::string& stage) const {
    int rating = 3 + static_cast<int>(hash_ % 3);
    if (stage == "product_review") {
      if (has("Final order outcome: refunded")) rating = 2;
      if (has("Final order outcome: exchanged")) rating = 3;
      return json{{"rating", rating}, {"review_text", "Decent overall."}, {"would_recommend", rating >= 4}}.dump();
    }
    return json{{"rating", rating}, {"review_text", "It was fine."}}.dump();
  }

  const CompletionRequest& req_;
  std::string all_;
  std::string user_;
  std::string title_;
  std::uint64_t hash_ = 0;
  std::uint64_t run_hash_ = 0;
};

}  // namespace

SyntheticBackend::SyntheticBackend(std::string id, std::uint64_t seed) : id_(std::move(id)), seed_(seed) {}

CompletionResult SyntheticBackend::complete(const CompletionRequest& request) {
  Responder r(request, derive_seed(seed_, id_));
  CompletionResult out;
  out.text = r.answer();
  for (const auto& m : request.messages) out.input_tokens += tokens(m.content);
  out.output_tokens = tokens(out.text);
  out.backend_id = id_;
  return out;
}

}  // namespace shopsim

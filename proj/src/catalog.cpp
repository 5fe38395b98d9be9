#include "shopsim/catalog.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>

#include <nlohmann/json.hpp>

#include "shopsim/error.hpp"
#include "shopsim/seed.hpp"

namespace shopsim {

using nlohmann::json;

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// "Grocery_and_Gourmet_Food" / "grocery & gourmet food" → "grocery & gourmet food"
std::string normalize_category_key(std::string_view raw) {
  std::string s = lower(raw);
  std::replace(s.begin(), s.end(), '_', ' ');
  std::replace(s.begin(), s.end(), ',', ' ');
  std::string collapsed;
  bool space = true;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!space) collapsed.push_back(' ');
      space = true;
    } else {
      collapsed.push_back(c);
      space = false;
    }
  }
  if (!collapsed.empty() && collapsed.back() == ' ') collapsed.pop_back();
  std::string out;
  std::size_t pos = 0;
  while (pos < collapsed.size()) {
    if (collapsed.compare(pos, 5, " and ") == 0) {
      out += " & ";
      pos += 5;
    } else {
      out.push_back(collapsed[pos++]);
    }
  }
  return out;
}

const std::map<std::string, Category>& category_table() {
  static const std::map<std::string, Category> table = {
      {"grocery & gourmet food", Category::food},
      {"gourmet food", Category::food},
      {"food", Category::food},
      {"tea gift set", Category::food},
      {"tea", Category::food},
      {"coffee", Category::food},
      {"snacks", Category::food},
      {"beverages", Category::food},
      {"candy & chocolate", Category::food},
      {"amazon fashion", Category::fashion},
      {"clothing shoes & jewelry", Category::fashion},
      {"fashion", Category::fashion},
      {"clothing", Category::fashion},
      {"shoes", Category::fashion},
      {"jewelry", Category::fashion},
      {"handbags", Category::fashion},
      {"watches", Category::fashion},
      {"luggage", Category::fashion},
      {"home & kitchen", Category::home},
      {"kitchen & dining", Category::home},
      {"home", Category::home},
      {"furniture", Category::home},
      {"home decor", Category::home},
      {"bedding", Category::home},
      {"patio lawn & garden", Category::home},
      {"tools & home improvement", Category::home},
      {"electronics", Category::electronics},
      {"all electronics", Category::electronics},
      {"cell phones & accessories", Category::electronics},
      {"computers", Category::electronics},
      {"camera & photo", Category::electronics},
      {"home audio & theater", Category::electronics},
      {"video games", Category::electronics},
      {"headphones", Category::electronics},
  };
  return table;
}

std::optional<double> number_field(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    std::string s = j.get<std::string>();
    s.erase(std::remove_if(s.begin(), s.end(), [](char c) { return c == '$' || c == ','; }),
            s.end());
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end != s.c_str()) return v;
  }
  return std::nullopt;
}

std::string first_string(const json& obj, std::initializer_list<const char*> keys) {
  for (const char* k : keys) {
    auto it = obj.find(k);
    if (it != obj.end() && it->is_string() && !it->get<std::string>().empty()) {
      return it->get<std::string>();
    }
  }
  return {};
}

ReturnPolicy make_policy(Category c) {
  ReturnPolicy p;
  switch (c) {
    case Category::food:
      p.return_window_days = 7;
      p.return_condition = "Unopened";
      break;
    case Category::fashion:
      p.return_window_days = 30;
      p.return_condition = "Unworn and unwashed";
      p.size_fit_buyer_pays = true;
      break;
    case Category::home:
    case Category::electronics:
      p.return_window_days = 30;
      p.return_condition = "Unused and resellable";
      break;
  }
  p.buyer_pays_cases = {IssueType::change_of_mind};
  p.seller_pays_cases = {IssueType::wrong_item, IssueType::damaged, IssueType::not_as_described,
                         IssueType::shipping_delay};

  std::string text = "- Return window: " + std::to_string(p.return_window_days) +
                     " days from delivery\n";
  text += "- Return condition: " + p.return_condition +
          "; original packaging and accessories required\n";
  text += "- Return shipping paid by the buyer: Change of Mind";
  if (p.size_fit_buyer_pays) text += ", Size/Fit Issues";
  text += "\n- Return shipping covered by the seller: ";
  for (std::size_t i = 0; i < p.seller_pays_cases.size(); ++i) {
    if (i) text += ", ";
    text += issue_label(p.seller_pays_cases[i]);
  }
  p.text = text;
  return p;
}

}  // namespace

std::string_view category_name(Category c) {
  switch (c) {
    case Category::food: return "Food";
    case Category::fashion: return "Fashion";
    case Category::home: return "Home";
    case Category::electronics: return "Electronics";
  }
  return "?";
}

std::optional<Category> parse_category_name(std::string_view name) {
  const std::string l = lower(name);
  for (Category c : kAllCategories) {
    if (lower(category_name(c)) == l) return c;
  }
  return std::nullopt;
}

std::string_view issue_id(IssueType t) {
  switch (t) {
    case IssueType::shipping_delay: return "shipping_delay";
    case IssueType::wrong_item: return "wrong_item";
    case IssueType::change_of_mind: return "change_of_mind";
    case IssueType::damaged: return "damaged";
    case IssueType::not_as_described: return "not_as_described";
  }
  return "?";
}

std::string_view issue_label(IssueType t) {
  switch (t) {
    case IssueType::shipping_delay: return "Shipping Delay";
    case IssueType::wrong_item: return "Wrong Item Received";
    case IssueType::change_of_mind: return "Change of Mind";
    case IssueType::damaged: return "Damaged on Arrival";
    case IssueType::not_as_described: return "Not as Described";
  }
  return "?";
}

std::string_view issue_description(IssueType t) {
  switch (t) {
    case IssueType::shipping_delay: return "Order not delivered within the expected timeframe";
    case IssueType::wrong_item: return "Incorrect product delivered";
    case IssueType::change_of_mind: return "Buyer wishes to return after purchase";
    case IssueType::damaged: return "Product received in damaged condition";
    case IssueType::not_as_described: return "Product does not match the sales pitch or listing";
  }
  return "?";
}

std::optional<IssueType> parse_issue(std::string_view text) {
  const std::string l = lower(text);
  for (IssueType t : kAllIssues) {
    if (l == issue_id(t) || l == lower(issue_label(t))) return t;
  }
  if (l == "damaged" || l == "damaged_on_arrival") return IssueType::damaged;
  return std::nullopt;
}

void to_json(json& j, const Product& p) {
  j = json{{"id", p.id},
           {"title", p.title},
           {"raw_category", p.raw_category},
           {"category", category_name(p.category)},
           {"price", p.price.dollars()},
           {"discount_rate", p.discount_rate},
           {"store", p.store},
           {"features", p.features},
           {"air_datetime", p.air_datetime}};
  if (p.post_issue) j["post_issue"] = issue_id(*p.post_issue);
  if (!p.orientation.empty()) j["orientation"] = p.orientation;
}

void from_json(const json& j, Product& p) {
  p.id = j.at("id").get<std::string>();
  p.title = j.at("title").get<std::string>();
  p.raw_category = j.value("raw_category", std::string{});
  auto c = parse_category_name(j.at("category").get<std::string>());
  if (!c) throw CatalogError("unknown category in product record: " + p.id);
  p.category = *c;
  p.price = Money::from_dollars(j.at("price").get<double>());
  p.discount_rate = j.value("discount_rate", 0.0);
  p.store = j.value("store", std::string{});
  p.features = j.value("features", std::vector<std::string>{});
  p.air_datetime = j.value("air_datetime", std::string{});
  p.post_issue.reset();
  if (auto it = j.find("post_issue"); it != j.end() && it->is_string()) {
    p.post_issue = parse_issue(it->get<std::string>());
  }
  p.orientation = j.value("orientation", std::string{});
}

PriceCondition PriceCondition::from_delta(double delta) {
  return from_percent(static_cast<int>(std::lround(delta * 100.0)));
}

PriceCondition PriceCondition::from_percent(int percent) {
  if (std::find(kGridPercent.begin(), kGridPercent.end(), percent) == kGridPercent.end()) {
    throw ConfigError("price condition " + std::to_string(percent) +
                      "% is not on the grid {-10, -5, 0, +5, +10}");
  }
  return PriceCondition(percent);
}

std::array<PriceCondition, 5> PriceCondition::grid() {
  std::array<PriceCondition, 5> g;
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = PriceCondition(kGridPercent[i]);
  return g;
}

std::string PriceCondition::label() const {
  if (percent_ > 0) return "+" + std::to_string(percent_) + "%";
  return std::to_string(percent_) + "%";
}

std::optional<Product> parse_product_line(std::string_view line, const LoadOptions& options,
                                          std::string* reason) {
  auto fail = [&](std::string why) -> std::optional<Product> {
    if (reason) *reason = std::move(why);
    return std::nullopt;
  };
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error&) {
    return fail("malformed JSON");
  }
  if (!obj.is_object()) return fail("record is not an object");

  Product p;
  p.title = first_string(obj, {"title"});
  if (p.title.empty()) return fail("missing title");

  auto price_it = obj.find("price");
  if (price_it == obj.end()) return fail("missing price");
  auto price = number_field(*price_it);
  if (!price || !(*price > 0.0)) return fail("price missing or not positive");
  p.price = Money::from_dollars(*price);
  if (p.price.cents() <= 0) return fail("price rounds to zero");

  p.raw_category = first_string(obj, {"raw_category", "category", "main_category"});
  if (p.raw_category.empty()) {
    if (auto it = obj.find("categories"); it != obj.end() && it->is_array() && !it->empty() &&
                                          (*it)[0].is_string()) {
      p.raw_category = (*it)[0].get<std::string>();
    }
  }
  if (p.raw_category.empty()) return fail("missing category");
  try {
    p.category = assign_high_level_category(p.raw_category, options.fallback);
  } catch (const UnknownCategoryError& e) {
    return fail(e.what());
  }

  if (auto it = obj.find("features"); it != obj.end() && it->is_array()) {
    for (const auto& f : *it) {
      if (f.is_string() && !f.get<std::string>().empty()) p.features.push_back(f.get<std::string>());
    }
  }
  if (p.features.empty()) return fail("empty feature list");

  p.discount_rate = options.default_discount_rate;
  for (const char* key : {"discount_rate", "discount"}) {
    if (auto it = obj.find(key); it != obj.end()) {
      auto v = number_field(*it);
      if (!v) return fail("unreadable discount");
      p.discount_rate = *v;
      break;
    }
  }
  if (!(p.discount_rate >= 0.0 && p.discount_rate <= 0.9)) {
    return fail("discount rate outside [0, 0.9]");
  }

  p.id = first_string(obj, {"id", "parent_asin", "asin"});
  if (p.id.empty()) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "P%016llx",
                  static_cast<unsigned long long>(fnv1a64(p.title)));
    p.id = buf;
  }
  p.store = first_string(obj, {"store", "brand"});
  p.air_datetime = first_string(obj, {"air_datetime", "broadcast_datetime"});
  if (p.air_datetime.empty()) p.air_datetime = options.default_air_datetime;
  if (auto s = first_string(obj, {"post_issue", "post_purchase_issue"}); !s.empty()) {
    p.post_issue = parse_issue(s);
    if (!p.post_issue) return fail("unknown post-purchase issue: " + s);
  }
  p.orientation = lower(first_string(obj, {"orientation", "target_gender"}));
  return p;
}

LoadReport load_catalog(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw CatalogError("catalog file not found: " + path.string());
  LoadReport report;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::string reason;
    if (auto p = parse_product_line(line, options, &reason)) {
      report.products.push_back(std::move(*p));
    } else {
      ++report.skipped;
      report.skip_reasons.push_back("line " + std::to_string(lineno) + ": " + reason);
    }
  }
  if (report.products.empty()) {
    throw CatalogError("empty catalog: no valid products in " + path.string() + " (" +
                       std::to_string(report.skipped) + " lines skipped)");
  }
  return report;
}

Category assign_high_level_category(std::string_view raw_category, const CategoryFallback& fallback) {
  const auto& table = category_table();
  if (auto it = table.find(normalize_category_key(raw_category)); it != table.end()) {
    return it->second;
  }
  if (fallback) {
    if (auto c = fallback(raw_category)) return *c;
  }
  throw UnknownCategoryError("unmapped category: \"" + std::string(raw_category) + "\"");
}

std::size_t category_table_size() { return category_table().size(); }

std::vector<Product> sample_balanced(const std::vector<Product>& catalog, std::size_t n_per_category,
                                     std::uint64_t seed) {
  std::vector<Product> out;
  out.reserve(n_per_category * kAllCategories.size());
  for (Category c : kAllCategories) {
    std::vector<const Product*> pool;
    for (const auto& p : catalog) {
      if (p.category == c) pool.push_back(&p);
    }
    if (pool.size() < n_per_category) {
      throw ShortageError("category " + std::string(category_name(c)) + " has " +
                          std::to_string(pool.size()) + " products, " +
                          std::to_string(n_per_category) + " requested");
    }
    // Input order must not matter: sort before the seeded shuffle.
    std::stable_sort(pool.begin(), pool.end(), [](const Product* a, const Product* b) {
      return std::tie(a->id, a->title) < std::tie(b->id, b->title);
    });
    std::mt19937_64 rng(derive_seed(seed, "sampling/" + std::string(category_name(c))));
    seeded_shuffle(pool.begin(), pool.end(), rng);
    for (std::size_t i = 0; i < n_per_category; ++i) out.push_back(*pool[i]);
  }
  return out;
}

Money discounted_price(Money price, double discount_rate) {
  return Money::from_cents(round_half_up_cents(static_cast<long double>(price.cents()) *
                                               (1.0L - static_cast<long double>(discount_rate))));
}

Money condition_list_price(Money price, PriceCondition condition) {
  return Money::from_cents(round_half_up_cents(static_cast<long double>(price.cents()) *
                                               (100.0L + condition.percent()) / 100.0L));
}

Money effective_price(Money price, double discount_rate, PriceCondition condition) {
  return discounted_price(condition_list_price(price, condition), discount_rate);
}

Money shipping_fee(Money price) {
  const auto fee = round_half_up_cents(static_cast<long double>(price.cents()) * 5.0L / 100.0L);
  return Money::from_cents(std::min<std::int64_t>(fee, 800));
}

const ReturnPolicy& return_policy(Category category) {
  static const std::array<ReturnPolicy, 4> policies{
      make_policy(Category::food), make_policy(Category::fashion), make_policy(Category::home),
      make_policy(Category::electronics)};
  return policies[static_cast<std::size_t>(category)];
}

}  // namespace shopsim

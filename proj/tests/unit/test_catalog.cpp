#include <algorithm>
#include <map>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "shopsim/catalog.hpp"
#include "shopsim/error.hpp"
#include "test_util.hpp"

using namespace shopsim;
using nlohmann::json;

namespace {

// Exact rational oracle: round(cents * num / den) half-up, integers only.
std::int64_t rational_round(std::int64_t cents, std::int64_t num, std::int64_t den) {
  const std::int64_t scaled = cents * num;
  return (2 * scaled + den) / (2 * den);
}

std::string product_line(const std::string& id, const std::string& cat, double price) {
  return json{{"id", id}, {"title", "Item " + id}, {"price", price}, {"category", cat},
              {"features", {"feature one"}}}
      .dump();
}

std::vector<Product> synthetic_catalog(int per_category) {
  std::vector<Product> out;
  for (Category c : kAllCategories) {
    for (int i = 0; i < per_category; ++i) {
      Product p;
      p.id = std::string(category_name(c)) + "-" + std::to_string(i);
      p.title = p.id;
      p.category = c;
      p.price = Money::from_cents(1000 + i);
      p.features = {"f"};
      out.push_back(p);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("money formatting and rounding") {
  CHECK(Money::from_cents(2880).str() == "28.80");
  CHECK(Money::from_cents(5).display() == "$0.05");
  CHECK(Money::from_cents(-150).str() == "-1.50");
  CHECK(Money::from_dollars(32.0).cents() == 3200);
  CHECK(Money::from_dollars(0.125).cents() == 13);
  CHECK(round_half_up_cents(100.5L) == 101);
  CHECK(round_half_up_cents(100.4999L) == 100);
}

TEST_CASE("golden product prices") {
  const Money p = Money::from_cents(3200);
  CHECK(discounted_price(p, 0.10).str() == "28.80");
  CHECK(shipping_fee(p).str() == "1.60");
  CHECK(effective_price(p, 0.10, PriceCondition::from_percent(0)) == discounted_price(p, 0.10));
}

TEST_CASE("discount arithmetic matches an integer oracle") {
  CHECK(discounted_price(Money::from_cents(1000), 0.333).cents() == rational_round(1000, 667, 1000));
  CHECK(discounted_price(Money::from_cents(1000), 0.333).str() == "6.67");
  // 33.60 list price, then 10% off
  const auto list = rational_round(3200, 105, 100);
  CHECK(effective_price(Money::from_cents(3200), 0.10, PriceCondition::from_percent(5)).cents() ==
        rational_round(list, 9, 10));
  CHECK(effective_price(Money::from_cents(3200), 0.10, PriceCondition::from_percent(5)).str() ==
        "30.24");
  CHECK(effective_price(Money::from_cents(10000), 0.0, PriceCondition::from_percent(-10)).str() ==
        "90.00");
  CHECK(discounted_price(Money::from_cents(1234), 0.0).cents() == 1234);
}

TEST_CASE("shipping cap") {
  CHECK(shipping_fee(Money::from_cents(20000)).str() == "8.00");
  CHECK(shipping_fee(Money::from_cents(16000)).str() == "8.00");
  CHECK(shipping_fee(Money::from_cents(15999)).cents() == 800);  // 7.9995 rounds up
  CHECK(shipping_fee(Money::from_cents(15980)).cents() == 799);
  CHECK(shipping_fee(Money::from_cents(0)).cents() == 0);
}

TEST_CASE("property: shipping bounded and delta zero is identity") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 5000; ++i) {
    const auto cents = static_cast<std::int64_t>(rng() % 1000000) + 1;
    const Money p = Money::from_cents(cents);
    const Money s = shipping_fee(p);
    CHECK(s.cents() <= 800);
    CHECK(static_cast<double>(s.cents()) <= 0.05 * cents + 0.5);
    CHECK(s.cents() == std::min<std::int64_t>(rational_round(cents, 5, 100), 800));
    const double rate = static_cast<double>(rng() % 900) / 1000.0;
    CHECK(effective_price(p, rate, PriceCondition{}) == discounted_price(p, rate));
  }
}

TEST_CASE("price condition grid") {
  CHECK(PriceCondition::grid().size() == 5);
  CHECK(PriceCondition::from_delta(-0.10).percent() == -10);
  CHECK(PriceCondition::from_delta(0.05).label() == "+5%");
  CHECK(PriceCondition::from_delta(0.0).label() == "0%");
  CHECK_THROWS_AS(PriceCondition::from_delta(0.07), ConfigError);
  CHECK_THROWS_AS(PriceCondition::from_percent(20), ConfigError);
}

TEST_CASE("category table") {
  CHECK(category_table_size() == 34);
  CHECK(assign_high_level_category("Grocery & Gourmet Food") == Category::food);
  CHECK(assign_high_level_category("Tea gift set") == Category::food);
  CHECK(assign_high_level_category("AMAZON FASHION") == Category::fashion);
  CHECK(assign_high_level_category("Home and Kitchen") == Category::home);
  CHECK(assign_high_level_category("Cell_Phones_and_Accessories") == Category::electronics);
  CHECK_THROWS_AS(assign_high_level_category("Automotive"), UnknownCategoryError);
  CHECK_THROWS_AS(assign_high_level_category(""), UnknownCategoryError);
  int calls = 0;
  auto fallback = [&](std::string_view raw) -> std::optional<Category> {
    ++calls;
    if (raw == "Automotive") return Category::electronics;
    return std::nullopt;
  };
  CHECK(assign_high_level_category("Automotive", fallback) == Category::electronics);
  CHECK_THROWS_AS(assign_high_level_category("Pet Supplies", fallback), UnknownCategoryError);
  CHECK(calls == 2);
}

TEST_CASE("return policies") {
  const auto& food = return_policy(Category::food);
  CHECK(food.return_window_days == 7);
  CHECK(food.return_condition == "Unopened");
  const auto& fashion = return_policy(Category::fashion);
  CHECK(fashion.return_window_days == 30);
  CHECK(fashion.size_fit_buyer_pays);
  CHECK(fashion.text.find("Size/Fit Issues") != std::string::npos);
  const auto& home = return_policy(Category::home);
  const auto& elec = return_policy(Category::electronics);
  CHECK(home.return_window_days == elec.return_window_days);
  CHECK(home.return_condition == "Unused and resellable");
  CHECK(home.return_condition == elec.return_condition);
  CHECK(food.text.find("7 days") != std::string::npos);
  for (Category c : kAllCategories) {
    const auto& p = return_policy(c);
    std::set<IssueType> all(p.buyer_pays_cases.begin(), p.buyer_pays_cases.end());
    for (auto t : p.seller_pays_cases) {
      CHECK(all.count(t) == 0);
      all.insert(t);
    }
    CHECK(all.size() == kAllIssues.size());
  }
}

TEST_CASE("issue labels parse both ways") {
  for (auto t : kAllIssues) {
    CHECK(parse_issue(issue_id(t)) == t);
    CHECK(parse_issue(issue_label(t)) == t);
  }
  CHECK(parse_issue("damaged on arrival") == IssueType::damaged);
  CHECK_FALSE(parse_issue("lost").has_value());
}

TEST_CASE("parse golden product line") {
  const std::string line = json{
      {"parent_asin", "B0033QRME0"},
      {"title", "Charme Gift Set with Blooming Teas, Herbal Teas, Teapot and Tea Cup"},
      {"price", 32.00},
      {"category", "Tea gift set"},
      {"store", "Teaposy"},
      {"discount_rate", 0.10},
      {"features", {"Three blooming teas", "16 oz glass teapot"}},
      {"post_issue", "Damaged on Arrival"}}.dump();
  std::string reason;
  auto p = parse_product_line(line, {}, &reason);
  REQUIRE(p.has_value());
  CHECK(p->id == "B0033QRME0");
  CHECK(p->price.str() == "32.00");
  CHECK(p->category == Category::food);
  CHECK(p->store == "Teaposy");
  CHECK(p->post_issue == IssueType::damaged);
  CHECK(p->features.size() == 2);

  json j = *p;
  CHECK(j.get<Product>() == *p);
}

TEST_CASE("parse rejects bad records") {
  std::string reason;
  CHECK_FALSE(parse_product_line(R"({"title":"x","category":"Food","features":["a"]})", {}, &reason));
  CHECK(reason.find("price") != std::string::npos);
  CHECK_FALSE(parse_product_line(R"({"title":"x","price":5,"category":"Food","features":[]})", {}, &reason));
  CHECK_FALSE(parse_product_line(R"({"title":"x","price":-5,"category":"Food","features":["a"]})", {}, &reason));
  CHECK_FALSE(parse_product_line(
      R"({"title":"x","price":5,"category":"Food","features":["a"],"discount_rate":0.95})", {}, &reason));
  CHECK_FALSE(parse_product_line("not json", {}, &reason));
  auto ok = parse_product_line(R"({"title":"x","price":"$12.50","main_category":"Electronics","features":["a"]})",
                               {}, &reason);
  REQUIRE(ok);
  CHECK(ok->price.cents() == 1250);
  CHECK(ok->discount_rate == doctest::Approx(0.10));
  CHECK(ok->id.size() == 17);
}

TEST_CASE("load_catalog counts skips") {
  testutil::TempDir dir;
  const auto path = dir / "catalog.jsonl";
  testutil::write_file(path, product_line("a", "Food", 3) + "\n" +
                                 R"({"title":"no price","category":"Food","features":["a"]})" +
                                 "\n\n" + product_line("b", "Automotive", 3) + "\n" +
                                 product_line("c", "Electronics", 9.99) + "\n");
  auto report = load_catalog(path);
  CHECK(report.products.size() == 2);
  CHECK(report.skipped == 2);
  CHECK(report.skip_reasons.size() == 2);

  CHECK_THROWS_AS(load_catalog(dir / "missing.jsonl"), CatalogError);
  const auto empty = dir / "empty.jsonl";
  testutil::write_file(empty, "garbage\n{}\n");
  CHECK_THROWS_AS(load_catalog(empty), CatalogError);
}

TEST_CASE("sample_balanced") {
  const auto catalog = synthetic_catalog(40);
  const auto s = sample_balanced(catalog, 30, 42);
  CHECK(s.size() == 120);
  std::map<Category, int> counts;
  for (const auto& p : s) counts[p.category]++;
  for (Category c : kAllCategories) CHECK(counts[c] == 30);
  CHECK(sample_balanced(catalog, 30, 42) == s);
  CHECK(sample_balanced(catalog, 30, 43) != s);

  // input order does not matter
  auto shuffled = catalog;
  std::reverse(shuffled.begin(), shuffled.end());
  CHECK(sample_balanced(shuffled, 30, 42) == s);

  auto small = synthetic_catalog(2);
  try {
    sample_balanced(small, 5, 1);
    FAIL("expected shortage");
  } catch (const ShortageError& e) {
    CHECK(std::string(e.what()).find("Food") != std::string::npos);
  }
}

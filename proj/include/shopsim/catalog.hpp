#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "shopsim/money.hpp"

namespace shopsim {

enum class Category { food, fashion, home, electronics };
inline constexpr std::array kAllCategories{Category::food, Category::fashion, Category::home,
                                           Category::electronics};

std::string_view category_name(Category c);  // "Food", "Fashion", ...
std::optional<Category> parse_category_name(std::string_view name);

enum class IssueType { shipping_delay, wrong_item, change_of_mind, damaged, not_as_described };
inline constexpr std::array kAllIssues{IssueType::shipping_delay, IssueType::wrong_item,
                                       IssueType::change_of_mind, IssueType::damaged,
                                       IssueType::not_as_described};

std::string_view issue_id(IssueType t);     // "damaged"
std::string_view issue_label(IssueType t);  // "Damaged on Arrival"
std::string_view issue_description(IssueType t);
// Accepts ids ("wrong_item") or labels ("Wrong Item Received"), case-insensitive.
std::optional<IssueType> parse_issue(std::string_view text);

struct Product {
  std::string id;
  std::string title;
  std::string raw_category;
  Category category = Category::food;
  Money price;
  double discount_rate = 0.0;
  std::string store;
  std::vector<std::string> features;
  std::string air_datetime;
  // Optional data-supplied attributes.
  std::optional<IssueType> post_issue;
  std::string orientation;  // e.g. "men", "women", "unisex"; empty when unknown

  bool operator==(const Product&) const = default;
};

void to_json(nlohmann::json& j, const Product& p);
void from_json(const nlohmann::json& j, Product& p);

// Signed fractional change relative to the list price, restricted to the
// five-point grid.
class PriceCondition {
 public:
  static constexpr std::array<int, 5> kGridPercent{-10, -5, 0, 5, 10};

  constexpr PriceCondition() = default;
  // Throws ConfigError when the value is not on the grid.
  static PriceCondition from_delta(double delta);
  static PriceCondition from_percent(int percent);
  static std::array<PriceCondition, 5> grid();

  int percent() const { return percent_; }
  double delta() const { return percent_ / 100.0; }
  // "-10%", "0%", "+5%"
  std::string label() const;

  constexpr auto operator<=>(const PriceCondition&) const = default;

 private:
  constexpr explicit PriceCondition(int percent) : percent_(percent) {}
  int percent_ = 0;
};

struct ReturnPolicy {
  int return_window_days = 0;
  std::string return_condition;
  std::vector<IssueType> buyer_pays_cases;
  std::vector<IssueType> seller_pays_cases;
  bool size_fit_buyer_pays = false;  // Fashion only
  // Policy text substituted into seller prompts.
  std::string text;
};

struct LoadReport {
  std::vector<Product> products;
  std::size_t skipped = 0;
  std::vector<std::string> skip_reasons;
};

// Fallback used for raw categories that miss the lookup table.
using CategoryFallback = std::function<std::optional<Category>(std::string_view raw_category)>;

struct LoadOptions {
  double default_discount_rate = 0.10;
  std::string default_air_datetime;
  CategoryFallback fallback;  // empty: unmapped categories skip the line
};

// Line-delimited JSON, one product per line. Throws CatalogError when the
// file is missing or holds no valid product.
LoadReport load_catalog(const std::filesystem::path& path, const LoadOptions& options = {});
// Parse one line; nullopt with a reason when the record is unusable.
std::optional<Product> parse_product_line(std::string_view line, const LoadOptions& options,
                                          std::string* reason = nullptr);

// Bundled lookup (34 entries). Throws UnknownCategoryError for a miss when
// no fallback is given or the fallback declines.
Category assign_high_level_category(std::string_view raw_category,
                                    const CategoryFallback& fallback = {});
std::size_t category_table_size();

// Exactly n per category; deterministic in (catalog, n, seed).
std::vector<Product> sample_balanced(const std::vector<Product>& catalog, std::size_t n_per_category,
                                     std::uint64_t seed);

Money discounted_price(Money price, double discount_rate);
// discounted_price(price x (1 + delta)), rounding at each step.
Money effective_price(Money price, double discount_rate, PriceCondition condition);
// List price under a condition, before discount.
Money condition_list_price(Money price, PriceCondition condition);
// min(5% of price, $8.00)
Money shipping_fee(Money price);
inline constexpr std::string_view kDeliveryTimeText = "1–7 days";

const ReturnPolicy& return_policy(Category category);

}  // namespace shopsim

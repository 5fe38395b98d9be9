#include "shopsim/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

#include <nlohmann/json.hpp>

#include "shopsim/error.hpp"

namespace shopsim {

using nlohmann::json;

// ---- grouping ----

namespace {

constexpr std::string_view kPlainDimensions[] = {
    "seller_backend", "buyer_backend", "product",      "category",       "orientation",    "price_condition",
    "guidance_level", "post_issue",    "repeat",       "seller_gender",  "buyer_gender",   "seller_persona",
    "buyer_persona"};

std::string persona_str(const PersonaMode& m) { return m.is_inherent() ? "inherent" : m.persona->str(); }

std::optional<double> mean_of(double sum, std::int64_t n) {
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

bool purchased(const Trajectory& t) {
  auto d = t.decision();
  return d && d->will_purchase;
}

}  // namespace

bool is_known_dimension(std::string_view d) {
  for (auto k : kPlainDimensions) {
    if (k == d) return true;
  }
  return parse_trait(d).has_value();
}

std::string dimension_value(const Trajectory& t, std::string_view d) {
  const auto& s = t.spec;
  if (d == "seller_backend") return s.seller_backend;
  if (d == "buyer_backend") return s.buyer_backend;
  if (d == "product") return s.product.id;
  if (d == "category") return std::string(category_name(s.product.category));
  if (d == "orientation") return s.product.orientation.empty() ? "unspecified" : s.product.orientation;
  if (d == "price_condition") return s.price_condition.label();
  if (d == "guidance_level") return std::to_string(s.guidance_level);
  if (d == "post_issue") return std::string(issue_id(s.post_issue));
  if (d == "repeat") return std::to_string(s.repeat);
  if (d == "seller_gender") return std::string(gender_name(s.seller_gender()));
  if (d == "buyer_gender") return std::string(gender_name(s.buyer_gender()));
  if (d == "seller_persona") return persona_str(s.seller_mode);
  if (d == "buyer_persona") return persona_str(s.buyer_mode);
  if (auto trait = parse_trait(d)) {
    const auto& mode = role_of(*trait) == Role::seller ? s.seller_mode : s.buyer_mode;
    if (mode.is_inherent()) return "inherent";
    return std::string(trait_value_name(*trait, mode.persona->trait(*trait)));
  }
  throw DimensionError("unknown dimension \"" + std::string(d) + "\"");
}

std::string group_label(const GroupKey& key) {
  std::string out;
  for (const auto& [k, v] : key) {
    if (!out.empty()) out += ",";
    out += k + "=" + v;
  }
  return out;
}

std::vector<MetricsRow> group_metrics(const std::vector<Trajectory>& trajectories,
                                      const std::vector<std::string>& dimensions) {
  for (const auto& d : dimensions) {
    if (!is_known_dimension(d)) throw DimensionError("unknown dimension \"" + d + "\"");
  }
  struct Acc {
    MetricsRow row;
    double quantity_sum = 0, rating_sum = 0;
    std::int64_t rated = 0;
  };
  std::map<GroupKey, Acc> groups;
  for (const auto& t : trajectories) {
    if (t.status != RunStatus::completed) continue;
    GroupKey key;
    for (const auto& d : dimensions) key.emplace_back(d, dimension_value(t, d));
    auto& acc = groups[key];
    acc.row.key = key;
    const auto s = summarize(t);
    ++acc.row.n_runs;
    if (s.purchased) {
      ++acc.row.purchases;
      acc.quantity_sum += s.quantity;
      if (s.outcome == Outcome::refunded) ++acc.row.refunds;
    }
    if (const auto& r = s.ratings[static_cast<std::size_t>(ReviewKind::product)]) {
      acc.rating_sum += *r;
      ++acc.rated;
    }
    acc.row.total_revenue += s.revenue;
  }
  std::vector<MetricsRow> out;
  for (auto& [key, acc] : groups) {
    auto& r = acc.row;
    r.conversion = double(r.purchases) / double(r.n_runs);
    if (r.purchases > 0) r.refund_rate = double(r.refunds) / double(r.purchases);
    r.avg_quantity = mean_of(acc.quantity_sum, r.purchases);
    r.avg_rating = mean_of(acc.rating_sum, acc.rated);
    out.push_back(std::move(r));
  }
  return out;
}

// ---- tests ----

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

namespace {

// Continued fraction for the incomplete beta, modified Lentz.
double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 1e-15, kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (a <= 0 || b <= 0) throw AnalysisError("incomplete beta needs positive shape parameters");
  if (x <= 0) return 0.0;
  if (x >= 1) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_upper_tail(double t, double df) {
  if (df <= 0) throw AnalysisError("degrees of freedom must be positive");
  const double tail = 0.5 * incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
  return t >= 0 ? tail : 1.0 - tail;
}

ProportionTest two_proportion_test(std::int64_t sa, std::int64_t na, std::int64_t sb, std::int64_t nb) {
  if (na < 1 || nb < 1) throw AnalysisError("two-proportion test needs n >= 1 in both groups");
  if (sa < 0 || sa > na || sb < 0 || sb > nb) throw AnalysisError("successes must lie in [0, n]");
  ProportionTest r;
  r.p_a = double(sa) / double(na);
  r.p_b = double(sb) / double(nb);
  r.delta = r.p_a - r.p_b;
  const double pool = double(sa + sb) / double(na + nb);
  const double var = pool * (1.0 - pool) * (1.0 / double(na) + 1.0 / double(nb));
  if (var <= 0.0) {
    r.degenerate = true;
    return r;
  }
  r.z = r.delta / std::sqrt(var);
  r.p_two_sided = std::erfc(std::abs(r.z) / std::sqrt(2.0));
  return r;
}

TTest paired_t_test_one_tailed(const std::vector<double>& deltas) {
  TTest r;
  r.n = deltas.size();
  if (r.n == 0) {
    r.degenerate = true;
    return r;
  }
  double sum = 0;
  for (double d : deltas) sum += d;
  r.mean = sum / double(r.n);
  if (r.n < 2) {
    r.degenerate = true;
    return r;
  }
  double ss = 0;
  for (double d : deltas) ss += (d - r.mean) * (d - r.mean);
  r.sd = std::sqrt(ss / double(r.n - 1));
  if (r.sd == 0.0) {
    r.degenerate = true;
    return r;
  }
  r.t = r.mean / (r.sd / std::sqrt(double(r.n)));
  r.p = student_t_upper_tail(r.t, double(r.n - 1));
  return r;
}

// ---- demand and elasticity ----

DemandCurve demand_curve(const CountsByCondition& counts) {
  DemandCurve c;
  for (int pct : PriceCondition::kGridPercent) {
    auto it = counts.find(pct);
    const auto cond = PriceCondition::from_percent(pct);
    if (it == counts.end() || it->second.runs == 0) {
      c.warnings.push_back("no runs at " + cond.label() + ", omitted");
      continue;
    }
    c.points.push_back({cond, it->second.runs, it->second.purchases,
                        double(it->second.purchases) / double(it->second.runs)});
  }
  for (const auto& [pct, _] : counts) PriceCondition::from_percent(pct);  // rejects off-grid keys
  for (std::size_t i = 1; i < c.points.size(); ++i) {
    if (c.points[i].rate > c.points[i - 1].rate + 1e-12) c.monotone = false;
  }
  return c;
}

namespace {

void count_into(CountsByCondition& counts, const Trajectory& t) {
  auto& c = counts[t.spec.price_condition.percent()];
  ++c.runs;
  if (purchased(t)) ++c.purchases;
}

}  // namespace

DemandCurve price_demand_curve(const std::vector<Trajectory>& trajectories) {
  CountsByCondition counts;
  for (const auto& t : trajectories) {
    if (t.status == RunStatus::completed) count_into(counts, t);
  }
  return demand_curve(counts);
}

ElasticityEstimate estimate_elasticity_rates(const std::map<int, double>& rate_by_percent) {
  ElasticityEstimate e;
  std::vector<std::pair<double, double>> pts;
  for (const auto& [pct, rate] : rate_by_percent) {
    if (rate < 0 || rate > 1) throw AnalysisError("purchase rate outside [0, 1]");
    if (rate > 0) pts.emplace_back(std::log1p(pct / 100.0), std::log(rate));
  }
  e.n_conditions = static_cast<int>(pts.size());
  if (pts.size() < 2) return e;
  double mx = 0, my = 0;
  for (const auto& [x, y] : pts) {
    mx += x;
    my += y;
  }
  mx /= double(pts.size());
  my /= double(pts.size());
  double sxx = 0, sxy = 0;
  for (const auto& [x, y] : pts) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
  }
  e.e_d = sxy / sxx;
  e.intercept = my - *e.e_d * mx;
  e.valid = true;
  return e;
}

ElasticityEstimate estimate_elasticity(const std::map<int, std::int64_t>& purchases, std::int64_t group_size) {
  if (group_size < 1) throw AnalysisError("group size must be >= 1");
  CountsByCondition counts;
  for (const auto& [pct, c] : purchases) {
    if (c < 0 || c > group_size) throw AnalysisError("purchase count outside [0, group size]");
    counts[pct] = {c, group_size};
  }
  return estimate_elasticity(counts);
}

ElasticityEstimate estimate_elasticity(const CountsByCondition& counts) {
  std::map<int, double> rates;
  for (const auto& [pct, c] : counts) {
    if (c.runs > 0) rates[pct] = double(c.purchases) / double(c.runs);
  }
  return estimate_elasticity_rates(rates);
}

ElasticityGap elasticity_gap(const std::vector<PairedProfiles>& profiles) {
  ElasticityGap g;
  std::vector<double> deltas;
  double sum_s = 0, sum_i = 0;
  for (const auto& p : profiles) {
    auto es = estimate_elasticity(p.sensitive);
    auto ei = estimate_elasticity(p.indifferent);
    if (!es.valid || !ei.valid) {
      ++g.skipped;
      continue;
    }
    ProductGap pg{p.product_id, *es.e_d, *ei.e_d, std::abs(*es.e_d) - std::abs(*ei.e_d)};
    sum_s += std::abs(pg.e_sensitive);
    sum_i += std::abs(pg.e_indifferent);
    deltas.push_back(pg.delta);
    g.products.push_back(std::move(pg));
  }
  if (g.products.empty()) throw InsufficientDataError("no product has valid elasticity estimates in both groups");
  const double n = double(g.products.size());
  g.mean_abs_sensitive = sum_s / n;
  g.mean_abs_indifferent = sum_i / n;
  g.test = paired_t_test_one_tailed(deltas);
  g.mean_delta = g.test.mean;
  return g;
}

ElasticityGap elasticity_gap(const std::vector<Trajectory>& trajectories, Trait trait) {
  if (role_of(trait) != Role::buyer) throw AnalysisError("elasticity groups need a buyer trait");
  std::map<std::string, PairedProfiles> by_product;
  for (const auto& t : trajectories) {
    if (t.status != RunStatus::completed || t.spec.buyer_mode.is_inherent()) continue;
    auto& p = by_product[t.spec.product.id];
    p.product_id = t.spec.product.id;
    count_into(t.spec.buyer_mode.persona->trait(trait) == 0 ? p.sensitive : p.indifferent, t);
  }
  std::vector<PairedProfiles> profiles;
  for (auto& [_, p] : by_product) profiles.push_back(std::move(p));
  return elasticity_gap(profiles);
}

// ---- gender ----

std::vector<GenderGapRow> gender_gap(const std::vector<Trajectory>& trajectories, std::string_view dimension) {
  if (!is_known_dimension(dimension)) throw DimensionError("unknown dimension \"" + std::string(dimension) + "\"");
  std::map<std::string, GenderGapRow> rows;
  for (const auto& t : trajectories) {
    if (t.status != RunStatus::completed) continue;
    const auto key = dimension_value(t, dimension);
    auto& row = rows[key];
    row.group = key;
    auto& c = t.spec.buyer_gender() == Gender::male ? row.male : row.female;
    ++c.runs;
    if (purchased(t)) ++c.purchases;
  }
  std::vector<GenderGapRow> out;
  for (auto& [_, row] : rows) {
    if (row.male.runs > 0 && row.female.runs > 0) {
      row.test = two_proportion_test(row.male.purchases, row.male.runs, row.female.purchases, row.female.runs);
    } else {
      row.test.degenerate = true;
    }
    out.push_back(std::move(row));
  }
  return out;
}

// ---- heatmap ----

double HeatmapMatrix::normalized_sum() const {
  double s = 0;
  for (const auto& row : normalized) {
    for (const auto& c : row) {
      if (c) s += *c;
    }
  }
  return s;
}

void normalize_heatmap(HeatmapMatrix& m, HeatmapNormalization mode) {
  m.normalization = mode;
  const std::size_t rows = m.raw.size();
  const std::size_t cols = rows ? m.raw[0].size() : 0;
  for (const auto& r : m.raw) {
    if (r.size() != cols) throw AnalysisError("heatmap rows differ in length");
  }
  // Kahan-compensated mean over the picked cells
  auto mean_over = [&](auto&& pick) {
    double sum = 0, comp = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < cols; ++j) {
        if (!m.raw[i][j] || !pick(i, j)) continue;
        const double y = *m.raw[i][j] - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        ++n;
      }
    }
    return n ? sum / double(n) : 0.0;
  };
  m.grand_mean = mean_over([](std::size_t, std::size_t) { return true; });
  std::vector<double> row_mean(rows), col_mean(cols);
  for (std::size_t i = 0; i < rows; ++i) row_mean[i] = mean_over([i](std::size_t r, std::size_t) { return r == i; });
  for (std::size_t j = 0; j < cols; ++j) col_mean[j] = mean_over([j](std::size_t, std::size_t c) { return c == j; });

  m.normalized.assign(rows, std::vector<std::optional<double>>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      if (!m.raw[i][j]) continue;
      const double base = mode == HeatmapNormalization::grand_mean ? m.grand_mean
                          : mode == HeatmapNormalization::row_mean ? row_mean[i]
                                                                   : col_mean[j];
      m.normalized[i][j] = *m.raw[i][j] - base;
    }
  }
}

HeatmapMatrix revenue_heatmap(const std::vector<Trajectory>& trajectories, HeatmapNormalization mode) {
  std::set<std::string> sellers, buyers;
  std::map<std::pair<std::string, std::string>, Money> cells;
  for (const auto& t : trajectories) {
    if (t.status != RunStatus::completed) continue;
    sellers.insert(t.spec.seller_backend);
    buyers.insert(t.spec.buyer_backend);
    cells[{t.spec.seller_backend, t.spec.buyer_backend}] += summarize(t).revenue;
  }
  HeatmapMatrix m;
  m.sellers.assign(sellers.begin(), sellers.end());
  m.buyers.assign(buyers.begin(), buyers.end());
  m.raw.assign(m.sellers.size(), std::vector<std::optional<double>>(m.buyers.size()));
  for (std::size_t i = 0; i < m.sellers.size(); ++i) {
    for (std::size_t j = 0; j < m.buyers.size(); ++j) {
      auto it = cells.find({m.sellers[i], m.buyers[j]});
      if (it != cells.end()) m.raw[i][j] = it->second.dollars();
    }
  }
  normalize_heatmap(m, mode);
  return m;
}

namespace {

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// White at zero, red above, blue below.
std::string cell_color(double v, double scale) {
  const double f = scale > 0 ? std::min(1.0, std::abs(v) / scale) : 0.0;
  const int fade = static_cast<int>(std::lround(255.0 * (1.0 - f)));
  char buf[16];
  if (v >= 0) std::snprintf(buf, sizeof buf, "#ff%02x%02x", fade, fade);
  else std::snprintf(buf, sizeof buf, "#%02x%02xff", fade, fade);
  return buf;
}

}  // namespace

std::string heatmap_svg(const HeatmapMatrix& m) {
  constexpr int kCellW = 96, kCellH = 40, kLeft = 150, kTop = 110;
  const int width = kLeft + kCellW * static_cast<int>(m.buyers.size()) + 20;
  const int height = kTop + kCellH * static_cast<int>(m.sellers.size()) + 20;
  double scale = 0;
  for (const auto& row : m.normalized) {
    for (const auto& c : row) {
      if (c) scale = std::max(scale, std::abs(*c));
    }
  }
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) + "\" height=\"" +
                  std::to_string(height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<text x=\"" + std::to_string(kLeft) + "\" y=\"20\" font-size=\"14\">Normalized revenue (rows: seller, columns: buyer)</text>\n";
  for (std::size_t j = 0; j < m.buyers.size(); ++j) {
    const int x = kLeft + kCellW * static_cast<int>(j) + kCellW / 2;
    s += "<text x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(kTop - 8) + "\" transform=\"rotate(-40 " +
         std::to_string(x) + " " + std::to_string(kTop - 8) + ")\">" + xml_escape(m.buyers[j]) + "</text>\n";
  }
  for (std::size_t i = 0; i < m.sellers.size(); ++i) {
    const int y = kTop + kCellH * static_cast<int>(i);
    s += "<text x=\"" + std::to_string(kLeft - 8) + "\" y=\"" + std::to_string(y + kCellH / 2 + 4) +
         "\" text-anchor=\"end\">" + xml_escape(m.sellers[i]) + "</text>\n";
    for (std::size_t j = 0; j < m.buyers.size(); ++j) {
      const int x = kLeft + kCellW * static_cast<int>(j);
      const auto& c = m.normalized[i][j];
      s += "<rect x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) + "\" width=\"" + std::to_string(kCellW) +
           "\" height=\"" + std::to_string(kCellH) + "\" fill=\"" + (c ? cell_color(*c, scale) : "#dddddd") +
           "\" stroke=\"#888888\"/>\n";
      s += "<text x=\"" + std::to_string(x + kCellW / 2) + "\" y=\"" + std::to_string(y + kCellH / 2 + 4) +
           "\" text-anchor=\"middle\">" + (c ? format_fixed(*c, 2) : "n/a") + "</text>\n";
    }
  }
  s += "</svg>\n";
  return s;
}

// ---- guidance ablation ----

AblationTable strategy_ablation(const std::vector<Trajectory>& trajectories) {
  AblationTable t;
  std::set<int> levels;
  std::set<std::string> backends;
  for (const auto& tr : trajectories) {
    if (tr.status != RunStatus::completed) continue;
    levels.insert(tr.spec.guidance_level);
    backends.insert(tr.spec.seller_backend);
    t.revenue[{tr.spec.seller_backend, tr.spec.guidance_level}] += summarize(tr).revenue;
  }
  t.levels.assign(levels.begin(), levels.end());
  t.backends.assign(backends.begin(), backends.end());
  for (int level : t.levels) {
    double sum = 0;
    int n = 0;
    for (const auto& b : t.backends) {
      auto it = t.revenue.find({b, level});
      if (it == t.revenue.end()) continue;
      sum += it->second.dollars();
      ++n;
    }
    t.average.push_back(n ? sum / n : 0.0);
  }
  return t;
}

// ---- output ----

std::string format_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  std::string s = buf;
  if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);
  return s;
}

namespace {

std::string csv_field(const std::string& f) {
  if (f.find_first_of(",\"\n\r") == std::string::npos) return f;
  std::string out = "\"";
  for (char c : f) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string opt_fixed(const std::optional<double>& v, int digits) { return v ? format_fixed(*v, digits) : ""; }

}  // namespace

std::string CsvTable::str() const {
  std::string out;
  auto line = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out += ',';
      out += csv_field(fields[i]);
    }
    out += '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  return out;
}

CsvTable metrics_csv(const std::vector<MetricsRow>& rows, const std::vector<std::string>& dimensions) {
  CsvTable t;
  t.header = dimensions;
  for (const char* h : {"n_runs", "purchases", "conversion", "refund_rate", "avg_quantity", "avg_rating", "total_revenue"}) {
    t.header.emplace_back(h);
  }
  for (const auto& r : rows) {
    std::vector<std::string> f;
    for (const auto& [_, v] : r.key) f.push_back(v);
    f.push_back(std::to_string(r.n_runs));
    f.push_back(std::to_string(r.purchases));
    f.push_back(format_fixed(r.conversion, 6));
    f.push_back(opt_fixed(r.refund_rate, 6));
    f.push_back(opt_fixed(r.avg_quantity, 4));
    f.push_back(opt_fixed(r.avg_rating, 4));
    f.push_back(r.total_revenue.str());
    t.rows.push_back(std::move(f));
  }
  return t;
}

CsvTable demand_csv(const DemandCurve& c) {
  CsvTable t;
  t.header = {"price_condition", "runs", "purchases", "purchase_rate"};
  for (const auto& p : c.points) {
    t.rows.push_back({p.condition.label(), std::to_string(p.runs), std::to_string(p.purchases), format_fixed(p.rate, 6)});
  }
  return t;
}

CsvTable elasticity_csv(const ElasticityGap& g) {
  CsvTable t;
  t.header = {"product", "e_sensitive", "e_indifferent", "delta"};
  for (const auto& p : g.products) {
    t.rows.push_back({p.product_id, format_fixed(p.e_sensitive, 6), format_fixed(p.e_indifferent, 6), format_fixed(p.delta, 6)});
  }
  t.rows.push_back({"mean_abs", format_fixed(g.mean_abs_sensitive, 6), format_fixed(g.mean_abs_indifferent, 6),
                    format_fixed(g.mean_delta, 6)});
  return t;
}

CsvTable gender_csv(const std::vector<GenderGapRow>& rows) {
  CsvTable t;
  t.header = {"group", "male_runs", "male_purchases", "male_rate", "female_runs", "female_purchases", "female_rate",
              "delta", "z", "p_two_sided"};
  for (const auto& r : rows) {
    auto rate = [](const ConditionCounts& c) {
      return c.runs ? format_fixed(double(c.purchases) / double(c.runs), 6) : std::string();
    };
    t.rows.push_back({r.group, std::to_string(r.male.runs), std::to_string(r.male.purchases), rate(r.male),
                      std::to_string(r.female.runs), std::to_string(r.female.purchases), rate(r.female),
                      format_fixed(r.test.delta, 6), r.test.degenerate ? "" : format_fixed(r.test.z, 6),
                      format_fixed(r.test.p_two_sided, 6)});
  }
  return t;
}

CsvTable heatmap_csv(const HeatmapMatrix& m) {
  CsvTable t;
  t.header = {"seller", "buyer", "revenue", "normalized"};
  for (std::size_t i = 0; i < m.sellers.size(); ++i) {
    for (std::size_t j = 0; j < m.buyers.size(); ++j) {
      t.rows.push_back({m.sellers[i], m.buyers[j], opt_fixed(m.raw[i][j], 2), opt_fixed(m.normalized[i][j], 6)});
    }
  }
  return t;
}

CsvTable ablation_csv(const AblationTable& a) {
  CsvTable t;
  t.header = {"seller_backend"};
  for (int l : a.levels) t.header.push_back("guidance_" + std::to_string(l));
  for (const auto& b : a.backends) {
    std::vector<std::string> row{b};
    for (int l : a.levels) {
      auto it = a.revenue.find({b, l});
      row.push_back(it == a.revenue.end() ? "" : it->second.str());
    }
    t.rows.push_back(std::move(row));
  }
  std::vector<std::string> avg{"average"};
  for (double v : a.average) avg.push_back(format_fixed(v, 2));
  t.rows.push_back(std::move(avg));
  return t;
}

namespace {

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json key_json(const GroupKey& key) {
  json j = json::object();
  for (const auto& [k, v] : key) j[k] = v;
  return j;
}

}  // namespace

void to_json(json& j, const MetricsRow& r) {
  j = json{{"key", key_json(r.key)},
           {"n_runs", r.n_runs},
           {"purchases", r.purchases},
           {"refunds", r.refunds},
           {"conversion", r.conversion},
           {"refund_rate", opt_json(r.refund_rate)},
           {"avg_quantity", opt_json(r.avg_quantity)},
           {"avg_rating", opt_json(r.avg_rating)},
           {"total_revenue", r.total_revenue.str()}};
}

void to_json(json& j, const ProportionTest& r) {
  j = json{{"p_a", r.p_a}, {"p_b", r.p_b}, {"delta", r.delta}, {"z", r.z}, {"p_two_sided", r.p_two_sided},
           {"degenerate", r.degenerate}};
}

void to_json(json& j, const TTest& r) {
  j = json{{"n", r.n}, {"mean", r.mean}, {"sd", r.sd}, {"t", r.t}, {"p", r.p}, {"degenerate", r.degenerate}};
}

void to_json(json& j, const DemandCurve& c) {
  json pts = json::array();
  for (const auto& p : c.points) {
    pts.push_back({{"price_condition", p.condition.label()}, {"runs", p.runs}, {"purchases", p.purchases}, {"rate", p.rate}});
  }
  j = json{{"points", pts}, {"monotone", c.monotone}, {"warnings", c.warnings}};
}

void to_json(json& j, const ElasticityEstimate& e) {
  j = json{{"product_id", e.product_id}, {"group", e.group}, {"e_d", opt_json(e.e_d)},
           {"intercept", opt_json(e.intercept)}, {"n_conditions", e.n_conditions}, {"valid", e.valid}};
}

void to_json(json& j, const ElasticityGap& g) {
  json products = json::array();
  for (const auto& p : g.products) {
    products.push_back({{"product_id", p.product_id}, {"e_sensitive", p.e_sensitive},
                        {"e_indifferent", p.e_indifferent}, {"delta", p.delta}});
  }
  j = json{{"products", products},
           {"skipped", g.skipped},
           {"mean_abs_sensitive", g.mean_abs_sensitive},
           {"mean_abs_indifferent", g.mean_abs_indifferent},
           {"mean_delta", g.mean_delta},
           {"test", g.test}};
}

void to_json(json& j, const GenderGapRow& r) {
  j = json{{"group", r.group},
           {"male", {{"runs", r.male.runs}, {"purchases", r.male.purchases}}},
           {"female", {{"runs", r.female.runs}, {"purchases", r.female.purchases}}},
           {"test", r.test}};
}

void to_json(json& j, const HeatmapMatrix& m) {
  auto grid = [](const std::vector<std::vector<std::optional<double>>>& g) {
    json out = json::array();
    for (const auto& row : g) {
      json r = json::array();
      for (const auto& c : row) r.push_back(opt_json(c));
      out.push_back(r);
    }
    return out;
  };
  static constexpr const char* kModes[] = {"grand_mean", "row_mean", "column_mean"};
  j = json{{"sellers", m.sellers},
           {"buyers", m.buyers},
           {"raw", grid(m.raw)},
           {"normalized", grid(m.normalized)},
           {"grand_mean", m.grand_mean},
           {"normalization", kModes[static_cast<int>(m.normalization)]}};
}

void to_json(json& j, const AblationTable& t) {
  json cells = json::array();
  for (const auto& [key, money] : t.revenue) {
    cells.push_back({{"seller_backend", key.first}, {"guidance_level", key.second}, {"revenue", money.str()}});
  }
  j = json{{"levels", t.levels}, {"backends", t.backends}, {"cells", cells}, {"average", t.average}};
}

}  // namespace shopsim

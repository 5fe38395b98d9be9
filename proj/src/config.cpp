#include "shopsim/config.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <tuple>

#include "shopsim/error.hpp"
#include "shopsim/seed.hpp"

namespace shopsim {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

template <class T>
T as(const json& v, const std::string& path) {
  try {
    return v.get<T>();
  } catch (const json::exception& e) {
    bad(path, std::string("wrong type (") + e.what() + ")");
  }
}

const json* member(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() || it->is_null() ? nullptr : &*it;
}

fs::path resolve(const fs::path& base, const json& v, const std::string& path) {
  fs::path p = as<std::string>(v, path);
  return p.is_relative() && !base.empty() ? base / p : p;
}

BackendKind parse_kind(const std::string& s, const std::string& path) {
  if (s == "http") return BackendKind::http;
  if (s == "scripted") return BackendKind::scripted;
  if (s == "synthetic") return BackendKind::synthetic;
  bad(path, "unknown backend kind \"" + s + "\" (http, scripted, synthetic)");
}

BackendSpec parse_backend(const json& j, const std::string& path, const fs::path& base, const RetryPolicy& retry) {
  if (!j.is_object()) bad(path, "expected an object");
  BackendSpec b;
  const json* id = member(j, "id");
  if (!id) bad(path + ".id", "missing");
  b.id = as<std::string>(*id, path + ".id");
  if (b.id.empty()) bad(path + ".id", "empty");
  if (const json* k = member(j, "kind")) b.kind = parse_kind(as<std::string>(*k, path + ".kind"), path + ".kind");
  b.http.id = b.id;
  b.http.retry = retry;
  if (const json* v = member(j, "endpoint")) b.http.endpoint = as<std::string>(*v, path + ".endpoint");
  if (const json* v = member(j, "model")) b.http.model = as<std::string>(*v, path + ".model");
  if (const json* v = member(j, "api_key_env")) b.http.api_key_env = as<std::string>(*v, path + ".api_key_env");
  if (const json* v = member(j, "retry")) b.http.retry = as<RetryPolicy>(*v, path + ".retry");
  if (const json* v = member(j, "params")) b.http.defaults = as<CompletionParams>(*v, path + ".params");
  if (const json* v = member(j, "script")) b.script = resolve(base, *v, path + ".script");
  if (const json* v = member(j, "seed")) b.synthetic_seed = as<std::uint64_t>(*v, path + ".seed");
  if (const json* v = member(j, "price")) {
    TokenPrice p{as<double>(v->value("input", json(0.0)), path + ".price.input"),
                 as<double>(v->value("output", json(0.0)), path + ".price.output")};
    if (p.input_per_million < 0 || p.output_per_million < 0) bad(path + ".price", "negative price");
    b.price = p;
  }
  if (b.kind == BackendKind::http) {
    if (b.http.endpoint.empty()) bad(path + ".endpoint", "required for http backends");
    if (b.http.model.empty()) bad(path + ".model", "required for http backends");
  }
  if (b.kind == BackendKind::scripted && b.script.empty()) bad(path + ".script", "required for scripted backends");
  return b;
}

PersonaChoice parse_persona_choice(const json& j, Role role, const std::string& path) {
  PersonaChoice c;
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inherent") c.kind = PersonaChoice::Kind::inherent;
    else if (s == "all") c.kind = PersonaChoice::Kind::all;
    else if (s == "random") c.kind = PersonaChoice::Kind::random;
    else bad(path, "expected inherent, all, random or a list of personas");
    return c;
  }
  if (!j.is_array()) bad(path, "expected inherent, all, random or a list of personas");
  c.kind = PersonaChoice::Kind::list;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto p_path = path + "[" + std::to_string(i) + "]";
    json item = j[i];
    if (item.is_object() && !item.contains("role")) item["role"] = std::string(role_name(role));
    Persona p;
    try {
      p = item.get<Persona>();
    } catch (const Error& e) {
      bad(p_path, e.what());
    } catch (const json::exception& e) {
      bad(p_path, e.what());
    }
    if (p.role != role) bad(p_path + ".role", "expected " + std::string(role_name(role)));
    c.list.push_back(p);
  }
  return c;
}

template <class T>
std::vector<T> int_list(const json& j, const std::string& path) {
  if (!j.is_array()) bad(path, "expected an array");
  std::vector<T> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as<T>(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

ProductSelection parse_products(const json& j, const std::string& path) {
  ProductSelection s;
  if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) s.ids.push_back(as<std::string>(j[i], path + "[" + std::to_string(i) + "]"));
    return s;
  }
  if (!j.is_object()) bad(path, "expected an id list or a selection object");
  if (const json* v = member(j, "ids")) {
    for (std::size_t i = 0; i < v->size(); ++i) {
      s.ids.push_back(as<std::string>((*v)[i], path + ".ids[" + std::to_string(i) + "]"));
    }
  }
  if (const json* v = member(j, "per_category")) {
    const auto n = as<std::int64_t>(*v, path + ".per_category");
    if (n < 1) bad(path + ".per_category", "must be >= 1");
    s.per_category = static_cast<std::size_t>(n);
  }
  if (const json* v = member(j, "categories")) {
    for (std::size_t i = 0; i < v->size(); ++i) {
      const auto p = path + ".categories[" + std::to_string(i) + "]";
      const auto name = as<std::string>((*v)[i], p);
      auto c = parse_category_name(name);
      if (!c) bad(p, "unknown category \"" + name + "\"");
      s.categories.push_back(*c);
    }
  }
  if (const json* v = member(j, "orientations")) {
    for (std::size_t i = 0; i < v->size(); ++i) {
      s.orientations.push_back(as<std::string>((*v)[i], path + ".orientations[" + std::to_string(i) + "]"));
    }
  }
  return s;
}

MatrixSpec parse_matrix(const json& j, const std::string& path) {
  if (!j.is_object()) bad(path, "expected an object");
  MatrixSpec m;
  if (const json* v = member(j, "products")) m.products = parse_products(*v, path + ".products");
  if (const json* v = member(j, "backends")) {
    for (std::size_t i = 0; i < v->size(); ++i) {
      m.backends.push_back(as<std::string>((*v)[i], path + ".backends[" + std::to_string(i) + "]"));
    }
  }
  if (const json* v = member(j, "pairing")) {
    const auto s = as<std::string>(*v, path + ".pairing");
    if (s == "self") m.pairing = Pairing::self;
    else if (s == "cross") m.pairing = Pairing::cross;
    else if (s == "explicit") m.pairing = Pairing::explicit_pairs;
    else bad(path + ".pairing", "expected self, cross or explicit");
  }
  if (const json* v = member(j, "pairs")) {
    for (std::size_t i = 0; i < v->size(); ++i) {
      const auto p = path + ".pairs[" + std::to_string(i) + "]";
      const auto& pair = (*v)[i];
      if (!pair.is_array() || pair.size() != 2) bad(p, "expected [seller, buyer]");
      m.pairs.emplace_back(as<std::string>(pair[0], p + "[0]"), as<std::string>(pair[1], p + "[1]"));
    }
  }
  if (const json* v = member(j, "seller_personas")) m.seller = parse_persona_choice(*v, Role::seller, path + ".seller_personas");
  if (const json* v = member(j, "buyer_personas")) m.buyer = parse_persona_choice(*v, Role::buyer, path + ".buyer_personas");
  if (const json* v = member(j, "price_conditions")) {
    m.price_conditions = int_list<int>(*v, path + ".price_conditions");
    for (std::size_t i = 0; i < m.price_conditions.size(); ++i) {
      const auto& g = PriceCondition::kGridPercent;
      if (std::find(g.begin(), g.end(), m.price_conditions[i]) == g.end()) {
        bad(path + ".price_conditions[" + std::to_string(i) + "]", "not on the grid -10, -5, 0, 5, 10");
      }
    }
  }
  if (const json* v = member(j, "guidance_levels")) {
    m.guidance_levels = int_list<int>(*v, path + ".guidance_levels");
    for (std::size_t i = 0; i < m.guidance_levels.size(); ++i) {
      if (std::find(kGuidanceLevels.begin(), kGuidanceLevels.end(), m.guidance_levels[i]) == kGuidanceLevels.end()) {
        bad(path + ".guidance_levels[" + std::to_string(i) + "]", "expected 0, 25, 50, 75 or 100");
      }
    }
  }
  if (const json* v = member(j, "repeats")) {
    m.repeats = as<int>(*v, path + ".repeats");
    if (m.repeats < 1) bad(path + ".repeats", "must be >= 1");
  }
  if (const json* v = member(j, "outcome_backend")) m.outcome_backend = as<std::string>(*v, path + ".outcome_backend");
  if (const json* v = member(j, "params")) m.params = as<CompletionParams>(*v, path + ".params");
  return m;
}

std::string persona_tag(const PersonaChoice& c, std::size_t index) {
  switch (c.kind) {
    case PersonaChoice::Kind::inherent: return "i";
    case PersonaChoice::Kind::random: return "r";
    default: return std::to_string(index);
  }
}

// Modes for one role; random yields one placeholder filled per run.
std::vector<PersonaMode> persona_modes(const PersonaChoice& c, Role role) {
  switch (c.kind) {
    case PersonaChoice::Kind::inherent:
    case PersonaChoice::Kind::random: return {PersonaMode::inherent()};
    case PersonaChoice::Kind::all: {
      std::vector<PersonaMode> out;
      for (const auto& p : enumerate_personas(role)) out.push_back(PersonaMode::explicit_persona(p));
      return out;
    }
    case PersonaChoice::Kind::list: {
      std::vector<PersonaMode> out;
      for (const auto& p : c.list) out.push_back(PersonaMode::explicit_persona(p));
      return out;
    }
  }
  return {};
}

PersonaMode draw_persona(Role role, std::uint64_t seed, const std::string& run_id) {
  const auto all = enumerate_personas(role);
  std::mt19937_64 rng(derive_seed(seed, std::string(role_name(role)) + "_persona/" + run_id));
  return PersonaMode::explicit_persona(all[draw_index(rng, all.size())]);
}

std::string signed_percent(int p) {
  return (p > 0 ? "+" : "") + std::to_string(p);
}

}  // namespace

const BackendSpec& EngineConfig::backend(std::string_view id) const {
  for (const auto& b : backends) {
    if (b.id == id) return b;
  }
  throw ConfigError("unknown backend id \"" + std::string(id) + "\"");
}

std::string EngineConfig::hash() const { return sha256_hex(source.dump()); }

EngineConfig parse_config(const json& doc, const fs::path& base_dir) {
  if (!doc.is_object()) bad("<root>", "expected an object");
  EngineConfig c;
  c.source = doc;
  if (const json* v = member(doc, "catalog")) c.catalog = resolve(base_dir, *v, "catalog");
  if (const json* v = member(doc, "traces")) c.traces = resolve(base_dir, *v, "traces");
  if (const json* v = member(doc, "cache_dir")) c.cache_dir = resolve(base_dir, *v, "cache_dir");
  if (const json* v = member(doc, "out")) c.out_dir = resolve(base_dir, *v, "out");
  if (const json* v = member(doc, "seed")) c.seed = as<std::uint64_t>(*v, "seed");
  if (const json* v = member(doc, "parallel")) {
    c.parallel = as<int>(*v, "parallel");
    if (c.parallel < 1) bad("parallel", "must be >= 1");
  }
  if (const json* v = member(doc, "retry")) c.retry = as<RetryPolicy>(*v, "retry");

  std::set<std::string> ids;
  if (const json* v = member(doc, "backends")) {
    if (!v->is_array()) bad("backends", "expected an array");
    for (std::size_t i = 0; i < v->size(); ++i) {
      const auto path = "backends[" + std::to_string(i) + "]";
      auto b = parse_backend((*v)[i], path, base_dir, c.retry);
      if (!ids.insert(b.id).second) bad(path + ".id", "duplicate backend id \"" + b.id + "\"");
      c.backends.push_back(std::move(b));
    }
  }
  if (const json* v = member(doc, "matrix")) c.matrix = parse_matrix(*v, "matrix");

  auto check_ref = [&](const std::string& id, const std::string& path) {
    if (!ids.count(id)) bad(path, "backend \"" + id + "\" is not in the registry");
  };
  for (std::size_t i = 0; i < c.matrix.backends.size(); ++i) {
    check_ref(c.matrix.backends[i], "matrix.backends[" + std::to_string(i) + "]");
  }
  for (std::size_t i = 0; i < c.matrix.pairs.size(); ++i) {
    const auto p = "matrix.pairs[" + std::to_string(i) + "]";
    check_ref(c.matrix.pairs[i].first, p + "[0]");
    check_ref(c.matrix.pairs[i].second, p + "[1]");
  }
  if (!c.matrix.outcome_backend.empty()) check_ref(c.matrix.outcome_backend, "matrix.outcome_backend");
  return c;
}

EngineConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded()) throw ConfigError(path.string() + ": not valid JSON");
  return parse_config(doc, path.parent_path());
}

std::vector<Product> select_products(const ProductSelection& sel, const std::vector<Product>& catalog,
                                     std::uint64_t seed) {
  if (!sel.ids.empty()) {
    std::vector<Product> out;
    for (const auto& id : sel.ids) {
      auto it = std::find_if(catalog.begin(), catalog.end(), [&](const Product& p) { return p.id == id; });
      if (it == catalog.end()) throw ConfigError("matrix.products: id \"" + id + "\" not in catalog");
      out.push_back(*it);
    }
    return out;
  }
  std::vector<Category> cats = sel.categories;
  if (cats.empty()) cats.assign(kAllCategories.begin(), kAllCategories.end());
  std::vector<Product> out;
  for (Category c : cats) {
    std::vector<const Product*> pool;
    for (const auto& p : catalog) {
      if (p.category == c) pool.push_back(&p);
    }
    std::stable_sort(pool.begin(), pool.end(), [](const Product* a, const Product* b) {
      return std::tie(a->id, a->title) < std::tie(b->id, b->title);
    });
    if (!sel.per_category) {
      for (const auto* p : pool) out.push_back(*p);
      continue;
    }
    const std::size_t n = *sel.per_category;
    std::vector<std::string> groups = sel.orientations;
    if (groups.empty()) groups.push_back({});
    for (const auto& g : groups) {
      std::vector<const Product*> sub;
      for (const auto* p : pool) {
        if (sel.orientations.empty() || p->orientation == g) sub.push_back(p);
      }
      const std::string label = std::string(category_name(c)) + (g.empty() ? "" : "/" + g);
      if (sub.size() < n) {
        throw ShortageError(label + " has " + std::to_string(sub.size()) + " products, " + std::to_string(n) +
                            " requested");
      }
      std::mt19937_64 rng(derive_seed(seed, "sampling/" + label));
      seeded_shuffle(sub.begin(), sub.end(), rng);
      for (std::size_t i = 0; i < n; ++i) out.push_back(*sub[i]);
    }
  }
  return out;
}

std::vector<RunSpec> build_run_matrix(const MatrixSpec& m, const std::vector<Product>& products, std::uint64_t seed) {
  std::vector<std::pair<std::string, std::string>> pairs;
  switch (m.pairing) {
    case Pairing::self:
      for (const auto& b : m.backends) pairs.emplace_back(b, b);
      break;
    case Pairing::cross:
      for (const auto& s : m.backends) {
        for (const auto& b : m.backends) pairs.emplace_back(s, b);
      }
      break;
    case Pairing::explicit_pairs: pairs = m.pairs; break;
  }
  const auto sellers = persona_modes(m.seller, Role::seller);
  const auto buyers = persona_modes(m.buyer, Role::buyer);

  auto need = [](bool nonempty, const char* dim) {
    if (!nonempty) throw ConfigError(std::string("empty matrix: no ") + dim);
  };
  need(!products.empty(), "products");
  need(!pairs.empty(), "backend pairs");
  need(!sellers.empty(), "seller personas");
  need(!buyers.empty(), "buyer personas");
  need(!m.price_conditions.empty(), "price conditions");
  need(!m.guidance_levels.empty(), "guidance levels");
  need(m.repeats >= 1, "repeats");

  std::vector<RunSpec> out;
  out.reserve(products.size() * pairs.size() * sellers.size() * buyers.size() * m.price_conditions.size() *
              m.guidance_levels.size() * static_cast<std::size_t>(m.repeats));
  std::set<std::string> seen;
  for (const auto& [sb, bb] : pairs) {
    for (const auto& product : products) {
      for (std::size_t si = 0; si < sellers.size(); ++si) {
        for (std::size_t bi = 0; bi < buyers.size(); ++bi) {
          for (int pct : m.price_conditions) {
            for (int level : m.guidance_levels) {
              for (int r = 0; r < m.repeats; ++r) {
                RunSpec s;
                s.run_id = sb + "~" + bb + "/" + product.id + "/s" + persona_tag(m.seller, si) + "-b" +
                           persona_tag(m.buyer, bi) + "/p" + signed_percent(pct) + "/g" + std::to_string(level) +
                           "/r" + std::to_string(r);
                if (!seen.insert(s.run_id).second) throw ConfigError("duplicate run id " + s.run_id);
                s.product = product;
                s.price_condition = PriceCondition::from_percent(pct);
                s.seller_mode = m.seller.kind == PersonaChoice::Kind::random
                                    ? draw_persona(Role::seller, seed, s.run_id)
                                    : sellers[si];
                s.buyer_mode = m.buyer.kind == PersonaChoice::Kind::random ? draw_persona(Role::buyer, seed, s.run_id)
                                                                           : buyers[bi];
                s.seller_backend = sb;
                s.buyer_backend = bb;
                s.outcome_backend = m.outcome_backend;
                if (product.post_issue) {
                  s.post_issue = *product.post_issue;
                } else {
                  std::mt19937_64 rng(derive_seed(seed, "issue/" + s.run_id));
                  s.post_issue = kAllIssues[draw_index(rng, kAllIssues.size())];
                }
                s.guidance_level = level;
                s.seed = derive_seed(seed, "run/" + s.run_id);
                s.repeat = r;
                s.params = m.params;
                out.push_back(std::move(s));
              }
            }
          }
        }
      }
    }
  }
  return out;
}

BackendMap make_backends(const EngineConfig& cfg) {
  BackendMap out;
  for (const auto& b : cfg.backends) {
    BackendPtr ptr;
    switch (b.kind) {
      case BackendKind::http: ptr = std::make_shared<HttpBackend>(b.http); break;
      case BackendKind::scripted: ptr = ScriptedBackend::from_file(b.script, b.id); break;
      case BackendKind::synthetic: ptr = std::make_shared<SyntheticBackend>(b.id, b.synthetic_seed); break;
    }
    // scripts are never cached
    if (!cfg.cache_dir.empty() && b.kind != BackendKind::scripted) {
      ptr = std::make_shared<CachedBackend>(ptr, cfg.cache_dir);
    }
    out.emplace(b.id, std::move(ptr));
  }
  return out;
}

PriceTable price_table(const EngineConfig& cfg) {
  PriceTable t;
  for (const auto& b : cfg.backends) {
    if (b.price) t.set(b.id, *b.price);
  }
  return t;
}

}  // namespace shopsim

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "shopsim/agents.hpp"
#include "shopsim/catalog.hpp"
#include "shopsim/persona.hpp"
#include "shopsim/pipeline.hpp"
#include "shopsim/trace.hpp"

namespace shopsim {

enum class BackendKind { http, scripted, synthetic };

struct BackendSpec {
  std::string id;
  BackendKind kind = BackendKind::http;
  HttpBackendConfig http;  // endpoint, model, api_key_env, defaults
  std::filesystem::path script;  // scripted only
  std::uint64_t synthetic_seed = 0;
  std::optional<TokenPrice> price;
};

struct ProductSelection {
  std::vector<std::string> ids;            // explicit ids; wins over sampling
  std::optional<std::size_t> per_category; // balanced sample size
  std::vector<Category> categories;        // empty: all four
  // With per_category, draw that many per orientation in each category.
  std::vector<std::string> orientations;
};

enum class Pairing { self, cross, explicit_pairs };

// How one role's persona is chosen per run.
struct PersonaChoice {
  enum class Kind { inherent, all, random, list };
  Kind kind = Kind::inherent;
  std::vector<Persona> list;  // Kind::list only
};

struct MatrixSpec {
  ProductSelection products;
  std::vector<std::string> backends;
  Pairing pairing = Pairing::self;
  std::vector<std::pair<std::string, std::string>> pairs;  // (seller, buyer) for explicit_pairs
  PersonaChoice seller;
  PersonaChoice buyer;
  std::vector<int> price_conditions{0};
  std::vector<int> guidance_levels{100};
  int repeats = 1;
  std::string outcome_backend;
  CompletionParams params;
};

struct EngineConfig {
  std::filesystem::path catalog;
  std::filesystem::path traces;
  std::filesystem::path cache_dir;  // empty: no cache
  std::filesystem::path out_dir;
  std::uint64_t seed = 0;
  int parallel = 1;
  RetryPolicy retry;
  std::vector<BackendSpec> backends;
  MatrixSpec matrix;
  nlohmann::json source;  // the document as read, for hashing

  const BackendSpec& backend(std::string_view id) const;
  // SHA-256 of the canonical JSON source.
  std::string hash() const;
};

// Relative paths resolve against base_dir. Errors name the offending field
// path, e.g. "matrix.price_conditions[2]".
EngineConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
EngineConfig load_config(const std::filesystem::path& path);

std::vector<Product> select_products(const ProductSelection& sel, const std::vector<Product>& catalog,
                                     std::uint64_t seed);

// Cartesian product of products x backend pairs x personas x price
// conditions x guidance levels x repeats. Random personas and unassigned
// post-purchase issues draw from per-run streams of `seed`. Throws
// ConfigError naming the first empty dimension.
std::vector<RunSpec> build_run_matrix(const MatrixSpec& m, const std::vector<Product>& products, std::uint64_t seed);

// Backend instances for every registry entry, cached when cache_dir is set.
BackendMap make_backends(const EngineConfig& cfg);
PriceTable price_table(const EngineConfig& cfg);

}  // namespace shopsim

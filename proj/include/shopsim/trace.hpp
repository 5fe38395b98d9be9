#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "shopsim/trajectory.hpp"

namespace shopsim {

// Sidecar written next to a store as `<store>.manifest.json`.
struct StoreManifest {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string created_at;
  std::string prompt_version;
};

void to_json(nlohmann::json& j, const StoreManifest& m);
void from_json(const nlohmann::json& j, StoreManifest& m);

struct LoadedTraces {
  std::vector<Trajectory> trajectories;  // latest record per run_id, file order
  std::size_t records = 0;                // lines read, superseded ones included
  std::size_t torn_tail = 0;              // 1 when an unterminated last line was dropped
};

// Append-only JSONL store, one trajectory per line. A failed record may be
// superseded by a later record for the same run; a completed one may not.
// append() is safe to call from many threads.
class TraceStore {
 public:
  explicit TraceStore(std::filesystem::path path);

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path manifest_path() const;

  // Throws DuplicateRunError when the run already completed in this store.
  void append(const Trajectory& t);

  std::set<std::string> completed_ids() const;
  LoadedTraces load() const;

  void write_manifest(const StoreManifest& m) const;
  std::optional<StoreManifest> read_manifest() const;

 private:
  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::ofstream out_;
  std::set<std::string> completed_;
};

// Reads a JSONL trace file. A malformed interior line throws TraceError with
// its line number; an unterminated malformed last line is dropped.
LoadedTraces load_traces(const std::filesystem::path& path);

// Specs whose run_id has no completed record, in matrix order.
std::vector<RunSpec> pending_runs(const TraceStore& store, const std::vector<RunSpec>& matrix);

// ---- cost ----

struct TokenPrice {
  double input_per_million = 0.0;
  double output_per_million = 0.0;
};

class PriceTable {
 public:
  PriceTable() = default;
  // {"backend_id": {"input": 0.09, "output": 1.10}, ...}
  static PriceTable from_json(const nlohmann::json& j);
  static PriceTable from_file(const std::filesystem::path& path);

  void set(std::string backend_id, TokenPrice price);
  // Throws PricingError naming the backend.
  const TokenPrice& at(std::string_view backend_id) const;
  bool contains(std::string_view backend_id) const { return prices_.find(backend_id) != prices_.end(); }

 private:
  std::map<std::string, TokenPrice, std::less<>> prices_;
};

double token_cost(std::int64_t input_tokens, std::int64_t output_tokens, const TokenPrice& price);

enum class PurchaseClass { non_purchase, purchase };
std::string_view purchase_class_name(PurchaseClass c);

struct CostLine {
  std::string backend_id;
  PurchaseClass purchase_class = PurchaseClass::non_purchase;
  std::int64_t runs = 0;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
  double cost = 0.0;

  double mean_input() const { return runs ? double(input_tokens) / double(runs) : 0.0; }
  double mean_output() const { return runs ? double(output_tokens) / double(runs) : 0.0; }
  double mean_cost() const { return runs ? cost / double(runs) : 0.0; }
};

struct CostReport {
  std::vector<CostLine> lines;  // sorted by backend, then class
  double total_cost = 0.0;

  const CostLine* find(std::string_view backend_id, PurchaseClass c) const;
};

// Tokens are attributed per call to the backend that served it; a run's
// class is whether its decision was a purchase. Failed runs with no
// decision count as non-purchase.
CostReport cost_report(const std::vector<Trajectory>& trajectories, const PriceTable& prices);

}  // namespace shopsim

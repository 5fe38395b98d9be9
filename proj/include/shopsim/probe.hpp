#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "shopsim/agents.hpp"
#include "shopsim/persona.hpp"
#include "shopsim/trajectory.hpp"

namespace shopsim {

enum class ProbeStage { sales_script, inquiry, purchase_decision, reviews };
inline constexpr std::array kProbeStageOrder{ProbeStage::sales_script, ProbeStage::inquiry,
                                             ProbeStage::purchase_decision, ProbeStage::reviews};

std::string_view probe_stage_name(ProbeStage s);
// Throws ProbeError for an unknown name.
ProbeStage parse_probe_stage(std::string_view s);

struct StageText {
  std::string text;
  bool empty = true;
  bool partial = false;  // inquiry without a post-purchase dialogue
};

// sales_script: the pitch. inquiry: pre then post dialogue. purchase_decision:
// reason then quantity reason. reviews: every review text present.
StageText extract_stage_text(const Trajectory& t, ProbeStage stage);

// ---- embeddings ----

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& texts,
                                                 std::string_view instruction) = 0;
  virtual std::size_t dimension() const = 0;
  virtual std::string id() const = 0;
};

// Signed feature hashing of lowercase word unigrams and bigrams, L2
// normalized. The instruction is ignored.
class HashingEmbedding final : public EmbeddingProvider {
 public:
  explicit HashingEmbedding(std::size_t dimension = 1024);
  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts, std::string_view instruction) override;
  std::size_t dimension() const override { return dim_; }
  std::string id() const override { return "hashing-" + std::to_string(dim_); }

  std::vector<double> embed_one(std::string_view text) const;

 private:
  std::size_t dim_;
};

struct HttpEmbeddingConfig {
  std::string id;
  std::string endpoint;  // OpenAI-compatible base URL; POSTs <endpoint>/embeddings
  std::string model;
  std::string api_key_env;
  std::size_t dimension = 0;
  RetryPolicy retry;
};

// Texts are sent as "Instruct: <instruction>\nQuery: <text>".
class HttpEmbedding final : public EmbeddingProvider {
 public:
  explicit HttpEmbedding(HttpEmbeddingConfig config, HttpPoster poster = default_http_poster(),
                         Sleeper sleeper = real_sleeper());
  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts, std::string_view instruction) override;
  std::size_t dimension() const override { return config_.dimension; }
  std::string id() const override { return config_.id; }

 private:
  HttpEmbeddingConfig config_;
  HttpPoster poster_;
  Sleeper sleeper_;
};

// Definitions of both of the trait's values, used as the embedding instruction.
std::string trait_instruction(Trait t);

// ---- split ----

struct ProductSplit {
  std::vector<std::string> train;
  std::vector<std::string> test;

  bool in_train(std::string_view product_id) const;
  bool in_test(std::string_view product_id) const;
};

// Duplicates are collapsed. round(fraction * n) products go to train,
// clamped so neither side is empty.
ProductSplit split_product_disjoint(std::vector<std::string> product_ids, double train_fraction, std::uint64_t seed);

// ---- classifier ----

struct TrainOptions {
  double lambda = 1e-4;
  int epochs = 60;
  std::uint64_t seed = 0;
};

struct TraitClassifier {
  Trait trait = Trait::price_consciousness;
  ProbeStage stage = ProbeStage::purchase_decision;
  std::vector<double> weights;
  double bias = 0.0;
  // metadata
  std::uint64_t seed = 0;
  double lambda = 0.0;
  int epochs = 0;
  std::string embedding_id;
  std::vector<std::string> train_products;
  std::vector<std::string> test_products;
  std::optional<double> validation_accuracy;

  double decision(const std::vector<double>& x) const;
  // Trait value: 1 when decision > 0, else 0.
  int predict(const std::vector<double>& x) const;
};

void to_json(nlohmann::json& j, const TraitClassifier& c);
void from_json(const nlohmann::json& j, TraitClassifier& c);
void save_classifiers(const std::filesystem::path& path, const std::vector<TraitClassifier>& cs);
std::vector<TraitClassifier> load_classifiers(const std::filesystem::path& path);

// Pegasos subgradient descent on the regularized hinge loss with a bias
// feature, visiting examples in a seeded order each epoch. Labels are 0/1.
// Throws DegenerateLabelError when only one label is present and
// ProbeError for fewer than two examples of a label or ragged input.
TraitClassifier train_linear_classifier(const std::vector<std::vector<double>>& x, const std::vector<int>& labels,
                                        const TrainOptions& options = {});

double accuracy(const TraitClassifier& c, const std::vector<std::vector<double>>& x, const std::vector<int>& labels);

// ---- search and inference ----

struct StageScore {
  ProbeStage stage;
  std::optional<double> accuracy;  // nullopt when the stage was unusable
  std::size_t train_examples = 0;
  std::size_t test_examples = 0;
};

struct SearchResult {
  ProbeStage best = ProbeStage::sales_script;
  std::vector<StageScore> scores;  // stage order
  TraitClassifier classifier;      // trained on the best stage's train side
  ProductSplit split;
  std::size_t partial_examples = 0;  // inquiry texts lacking a post dialogue
};

// Labels come from explicit personas on the trait's role; inherent runs are
// skipped. Ties go to the earlier stage. Throws ProbeError when no stage
// can be trained and evaluated.
SearchResult stagewise_search(const std::vector<Trajectory>& trajectories, Trait trait, EmbeddingProvider& provider,
                              std::uint64_t seed, const TrainOptions& options = {}, double train_fraction = 0.75);

struct TraitEstimate {
  Trait trait = Trait::price_consciousness;
  std::string dominant;
  double probability = 0.0;  // in [0.5, 1]
  bool tie = false;          // exact split; the first-listed value wins
  std::size_t n = 0;
};

// Majority label over predicted trait values. Throws ProbeError when empty.
TraitEstimate estimate_trait(Trait trait, const std::vector<int>& predictions);

struct PersonaEstimate {
  Role role = Role::seller;
  std::vector<TraitEstimate> traits;  // traits_of(role) order
};

// Needs one classifier per trait of `role`. Throws ProbeError on zero
// usable trajectories.
PersonaEstimate estimate_persona(const std::vector<Trajectory>& trajectories, Role role,
                                 const std::vector<TraitClassifier>& classifiers, EmbeddingProvider& provider);

void to_json(nlohmann::json& j, const SearchResult& r);
void to_json(nlohmann::json& j, const PersonaEstimate& e);

}  // namespace shopsim

#include "shopsim/probe.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "shopsim/error.hpp"
#include "shopsim/seed.hpp"

namespace shopsim {

using nlohmann::json;

std::string_view probe_stage_name(ProbeStage s) {
  switch (s) {
    case ProbeStage::sales_script: return "sales_script";
    case ProbeStage::inquiry: return "inquiry";
    case ProbeStage::purchase_decision: return "purchase_decision";
    case ProbeStage::reviews: return "reviews";
  }
  return "?";
}

ProbeStage parse_probe_stage(std::string_view s) {
  for (auto st : kProbeStageOrder) {
    if (probe_stage_name(st) == s) return st;
  }
  throw ProbeError("unknown probe stage \"" + std::string(s) + "\"");
}

namespace {

void append_line(std::string& out, std::string_view text) {
  if (text.empty()) return;
  if (!out.empty()) out += '\n';
  out += text;
}

}  // namespace

StageText extract_stage_text(const Trajectory& t, ProbeStage stage) {
  StageText st;
  switch (stage) {
    case ProbeStage::sales_script:
      if (const auto* s = t.find(StageName::pitch); s && !s->calls.empty()) st.text = s->output();
      break;
    case ProbeStage::inquiry: {
      auto pre = t.dialogue(StageName::pre_dialogue);
      auto post = t.dialogue(StageName::post_dialogue);
      if (pre) append_line(st.text, pre->history());
      if (post) append_line(st.text, post->history());
      st.partial = pre && !post;
      break;
    }
    case ProbeStage::purchase_decision:
      if (auto d = t.decision()) {
        append_line(st.text, d->reason);
        append_line(st.text, d->quantity_reason);
      }
      break;
    case ProbeStage::reviews:
      for (auto k : {ReviewKind::script, ReviewKind::pre_inquiry, ReviewKind::post_inquiry, ReviewKind::product}) {
        if (auto r = t.review(k)) append_line(st.text, r->text);
      }
      break;
  }
  st.empty = st.text.empty();
  return st;
}

// ---- embeddings ----

HashingEmbedding::HashingEmbedding(std::size_t dimension) : dim_(dimension) {
  if (dim_ == 0) throw ProbeError("embedding dimension must be positive");
}

std::vector<double> HashingEmbedding::embed_one(std::string_view text) const {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c >= 0x80) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));

  std::vector<double> v(dim_, 0.0);
  auto add = [&](const std::string& feature) {
    const auto h = fnv1a64(feature);
    v[h % dim_] += (h >> 63) ? -1.0 : 1.0;
  };
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    add(tokens[i]);
    if (i + 1 < tokens.size()) add(tokens[i] + ' ' + tokens[i + 1]);
  }
  double norm = 0;
  for (double x : v) norm += x * x;
  if (norm > 0) {
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
  }
  return v;
}

std::vector<std::vector<double>> HashingEmbedding::embed(const std::vector<std::string>& texts, std::string_view) {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_one(t));
  return out;
}

HttpEmbedding::HttpEmbedding(HttpEmbeddingConfig config, HttpPoster poster, Sleeper sleeper)
    : config_(std::move(config)), poster_(std::move(poster)), sleeper_(std::move(sleeper)) {}

std::vector<std::vector<double>> HttpEmbedding::embed(const std::vector<std::string>& texts,
                                                      std::string_view instruction) {
  std::vector<std::pair<std::string, std::string>> headers;
  if (!config_.api_key_env.empty()) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw ConfigError("embedding " + config_.id + ": environment variable " + config_.api_key_env + " is not set");
    }
    headers.emplace_back("Authorization", std::string("Bearer ") + key);
  }
  json input = json::array();
  for (const auto& t : texts) {
    input.push_back(instruction.empty() ? t : "Instruct: " + std::string(instruction) + "\nQuery: " + t);
  }
  const json body{{"model", config_.model}, {"input", input}};
  auto reply = post_with_retry(poster_, config_.endpoint + "/embeddings", body.dump(), headers, config_.retry,
                               sleeper_, fnv1a64(config_.id));
  std::vector<std::vector<double>> out(texts.size());
  try {
    const auto doc = json::parse(reply.body);
    for (const auto& item : doc.at("data")) {
      const auto idx = item.value("index", std::size_t{0});
      if (idx >= out.size()) throw ProbeError("embedding index out of range");
      out[idx] = item.at("embedding").get<std::vector<double>>();
    }
  } catch (const json::exception& e) {
    throw TransportError("embedding " + config_.id + ": malformed response (" + e.what() + ")");
  }
  for (auto& v : out) {
    if (v.empty()) throw TransportError("embedding " + config_.id + ": missing vectors in response");
    if (config_.dimension == 0) config_.dimension = v.size();
    if (v.size() != config_.dimension) throw ProbeError("embedding " + config_.id + ": dimension mismatch");
  }
  return out;
}

std::string trait_instruction(Trait t) {
  return std::string(trait_value_definition(t, 0)) + " " + std::string(trait_value_definition(t, 1));
}

// ---- split ----

bool ProductSplit::in_train(std::string_view id) const {
  return std::binary_search(train.begin(), train.end(), id);
}
bool ProductSplit::in_test(std::string_view id) const { return std::binary_search(test.begin(), test.end(), id); }

ProductSplit split_product_disjoint(std::vector<std::string> ids, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ProbeError("train fraction must lie strictly between 0 and 1");
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (ids.size() < 2) throw ProbeError("a product split needs at least two products");
  std::mt19937_64 rng(derive_seed(seed, "split"));
  seeded_shuffle(ids.begin(), ids.end(), rng);
  auto n_train = static_cast<std::size_t>(std::llround(fraction * double(ids.size())));
  n_train = std::clamp<std::size_t>(n_train, 1, ids.size() - 1);
  ProductSplit s;
  s.train.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_train), ids.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

// ---- classifier ----

double TraitClassifier::decision(const std::vector<double>& x) const {
  if (x.size() != weights.size()) throw ProbeError("input dimension does not match the classifier");
  double s = bias;
  for (std::size_t i = 0; i < x.size(); ++i) s += weights[i] * x[i];
  return s;
}

int TraitClassifier::predict(const std::vector<double>& x) const { return decision(x) > 0 ? 1 : 0; }

TraitClassifier train_linear_classifier(const std::vector<std::vector<double>>& x, const std::vector<int>& labels,
                                        const TrainOptions& opt) {
  if (x.size() != labels.size()) throw ProbeError("vectors and labels differ in count");
  if (x.empty()) throw ProbeError("no training examples");
  const std::size_t dim = x[0].size();
  std::size_t counts[2] = {0, 0};
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i].size() != dim) throw ProbeError("training vectors differ in dimension");
    if (labels[i] != 0 && labels[i] != 1) throw ProbeError("labels must be 0 or 1");
    ++counts[labels[i]];
  }
  if (counts[0] == 0 || counts[1] == 0) throw DegenerateLabelError("training labels are all identical");
  if (counts[0] < 2 || counts[1] < 2) throw ProbeError("need at least two examples of each label");
  if (opt.lambda <= 0 || opt.epochs < 1) throw ProbeError("lambda must be positive and epochs >= 1");

  // w[dim] is the bias weight on a constant feature
  std::vector<double> w(dim + 1, 0.0);
  std::vector<std::size_t> order(x.size());
  std::int64_t step = 0;
  for (int e = 0; e < opt.epochs; ++e) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(derive_seed(opt.seed, "epoch/" + std::to_string(e)));
    seeded_shuffle(order.begin(), order.end(), rng);
    for (std::size_t idx : order) {
      ++step;
      const double eta = 1.0 / (opt.lambda * double(step));
      const double y = labels[idx] == 1 ? 1.0 : -1.0;
      double margin = w[dim];
      for (std::size_t k = 0; k < dim; ++k) margin += w[k] * x[idx][k];
      margin *= y;
      const double shrink = 1.0 - eta * opt.lambda;
      for (double& wk : w) wk *= shrink;
      if (margin < 1.0) {
        for (std::size_t k = 0; k < dim; ++k) w[k] += eta * y * x[idx][k];
        w[dim] += eta * y;
      }
    }
  }
  TraitClassifier c;
  c.bias = w[dim];
  w.pop_back();
  c.weights = std::move(w);
  c.seed = opt.seed;
  c.lambda = opt.lambda;
  c.epochs = opt.epochs;
  return c;
}

double accuracy(const TraitClassifier& c, const std::vector<std::vector<double>>& x, const std::vector<int>& labels) {
  if (x.empty()) return 0.0;
  std::size_t ok = 0;
  for (std::size_t i = 0; i < x.size(); ++i) ok += c.predict(x[i]) == labels[i];
  return double(ok) / double(x.size());
}

void to_json(json& j, const TraitClassifier& c) {
  j = json{{"trait", trait_id(c.trait)},
           {"stage", probe_stage_name(c.stage)},
           {"weights", c.weights},
           {"bias", c.bias},
           {"metadata",
            {{"seed", c.seed},
             {"lambda", c.lambda},
             {"epochs", c.epochs},
             {"embedding", c.embedding_id},
             {"train_products", c.train_products},
             {"test_products", c.test_products},
             {"validation_accuracy", c.validation_accuracy ? json(*c.validation_accuracy) : json(nullptr)}}}};
}

void from_json(const json& j, TraitClassifier& c) {
  const auto tname = j.at("trait").get<std::string>();
  auto t = parse_trait(tname);
  if (!t) throw ProbeError("unknown trait \"" + tname + "\"");
  c.trait = *t;
  c.stage = parse_probe_stage(j.at("stage").get<std::string>());
  c.weights = j.at("weights").get<std::vector<double>>();
  c.bias = j.at("bias").get<double>();
  const auto& m = j.at("metadata");
  c.seed = m.value("seed", std::uint64_t{0});
  c.lambda = m.value("lambda", 0.0);
  c.epochs = m.value("epochs", 0);
  c.embedding_id = m.value("embedding", std::string());
  c.train_products = m.value("train_products", std::vector<std::string>{});
  c.test_products = m.value("test_products", std::vector<std::string>{});
  if (m.contains("validation_accuracy") && m["validation_accuracy"].is_number()) {
    c.validation_accuracy = m["validation_accuracy"].get<double>();
  }
}

void save_classifiers(const std::filesystem::path& path, const std::vector<TraitClassifier>& cs) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ProbeError("cannot write " + path.string());
  out << json{{"classifiers", cs}}.dump(1) << "\n";
}

std::vector<TraitClassifier> load_classifiers(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ProbeError("cannot open " + path.string());
  try {
    const auto doc = json::parse(in);
    if (doc.contains("classifiers")) return doc.at("classifiers").get<std::vector<TraitClassifier>>();
    return {doc.get<TraitClassifier>()};
  } catch (const json::exception& e) {
    throw ProbeError("malformed classifier file " + path.string() + ": " + e.what());
  }
}

// ---- search and inference ----

namespace {

std::optional<int> label_of(const Trajectory& t, Trait trait) {
  const auto& mode = role_of(trait) == Role::seller ? t.spec.seller_mode : t.spec.buyer_mode;
  if (mode.is_inherent() || mode.persona->role != role_of(trait)) return std::nullopt;
  return mode.persona->trait(trait);
}

}  // namespace

SearchResult stagewise_search(const std::vector<Trajectory>& trajectories, Trait trait, EmbeddingProvider& provider,
                              std::uint64_t seed, const TrainOptions& options, double train_fraction) {
  std::vector<const Trajectory*> labeled;
  std::vector<std::string> products;
  for (const auto& t : trajectories) {
    if (!label_of(t, trait)) continue;
    labeled.push_back(&t);
    products.push_back(t.spec.product.id);
  }
  if (labeled.empty()) throw ProbeError("no trajectories carry an explicit label for " + std::string(trait_id(trait)));

  SearchResult result;
  result.split = split_product_disjoint(products, train_fraction, seed);
  const std::string instruction = trait_instruction(trait);
  TrainOptions opt = options;
  opt.seed = derive_seed(seed, "train/" + std::string(trait_id(trait)));

  std::optional<double> best_acc;
  for (auto stage : kProbeStageOrder) {
    StageScore score{stage, std::nullopt, 0, 0};
    std::vector<std::string> train_text, test_text;
    std::vector<int> train_y, test_y;
    for (const auto* t : labeled) {
      const auto st = extract_stage_text(*t, stage);
      if (st.empty) continue;
      if (stage == ProbeStage::inquiry && st.partial) ++result.partial_examples;
      const int y = *label_of(*t, trait);
      if (result.split.in_train(t->spec.product.id)) {
        train_text.push_back(st.text);
        train_y.push_back(y);
      } else {
        test_text.push_back(st.text);
        test_y.push_back(y);
      }
    }
    score.train_examples = train_text.size();
    score.test_examples = test_text.size();
    const auto n1 = std::count(train_y.begin(), train_y.end(), 1);
    const auto n0 = static_cast<std::ptrdiff_t>(train_y.size()) - n1;
    if (n0 >= 2 && n1 >= 2 && !test_text.empty()) {
      auto c = train_linear_classifier(provider.embed(train_text, instruction), train_y, opt);
      c.trait = trait;
      c.stage = stage;
      c.embedding_id = provider.id();
      c.train_products = result.split.train;
      c.test_products = result.split.test;
      const double acc = accuracy(c, provider.embed(test_text, instruction), test_y);
      c.validation_accuracy = acc;
      score.accuracy = acc;
      if (!best_acc || acc > *best_acc) {
        best_acc = acc;
        result.best = stage;
        result.classifier = std::move(c);
      }
    }
    result.scores.push_back(score);
  }
  if (!best_acc) throw ProbeError("no stage has enough labeled text on both sides of the split");
  return result;
}

TraitEstimate estimate_trait(Trait trait, const std::vector<int>& predictions) {
  if (predictions.empty()) throw ProbeError("no predictions to estimate from");
  const auto ones = static_cast<std::size_t>(std::count(predictions.begin(), predictions.end(), 1));
  const std::size_t zeros = predictions.size() - ones;
  TraitEstimate e;
  e.trait = trait;
  e.n = predictions.size();
  e.tie = ones == zeros;
  const int dominant = ones > zeros ? 1 : 0;
  e.dominant = std::string(trait_value_name(trait, dominant));
  e.probability = double(std::max(ones, zeros)) / double(e.n);
  return e;
}

PersonaEstimate estimate_persona(const std::vector<Trajectory>& trajectories, Role role,
                                 const std::vector<TraitClassifier>& classifiers, EmbeddingProvider& provider) {
  if (trajectories.empty()) throw ProbeError("no trajectories to estimate a persona from");
  PersonaEstimate out;
  out.role = role;
  for (Trait trait : traits_of(role)) {
    auto it = std::find_if(classifiers.begin(), classifiers.end(), [&](const auto& c) { return c.trait == trait; });
    if (it == classifiers.end()) throw ProbeError("missing classifier for " + std::string(trait_id(trait)));
    std::vector<std::string> texts;
    for (const auto& t : trajectories) {
      auto st = extract_stage_text(t, it->stage);
      if (!st.empty) texts.push_back(std::move(st.text));
    }
    if (texts.empty()) {
      throw ProbeError("no trajectory has " + std::string(probe_stage_name(it->stage)) + " text for " +
                       std::string(trait_id(trait)));
    }
    std::vector<int> preds;
    for (const auto& v : provider.embed(texts, trait_instruction(trait))) preds.push_back(it->predict(v));
    out.traits.push_back(estimate_trait(trait, preds));
  }
  return out;
}

void to_json(json& j, const SearchResult& r) {
  json scores = json::array();
  for (const auto& s : r.scores) {
    scores.push_back({{"stage", probe_stage_name(s.stage)},
                      {"accuracy", s.accuracy ? json(*s.accuracy) : json(nullptr)},
                      {"train_examples", s.train_examples},
                      {"test_examples", s.test_examples}});
  }
  j = json{{"trait", trait_id(r.classifier.trait)},
           {"best_stage", probe_stage_name(r.best)},
           {"scores", scores},
           {"train_products", r.split.train.size()},
           {"test_products", r.split.test.size()},
           {"partial_inquiry_examples", r.partial_examples}};
}

void to_json(json& j, const PersonaEstimate& e) {
  json traits = json::array();
  for (const auto& t : e.traits) {
    traits.push_back({{"trait", trait_id(t.trait)},
                      {"dominant", t.dominant},
                      {"probability", t.probability},
                      {"tie", t.tie},
                      {"n", t.n}});
  }
  j = json{{"role", role_name(e.role)}, {"traits", traits}};
}

}  // namespace shopsim

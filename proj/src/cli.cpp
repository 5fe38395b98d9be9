#include "shopsim/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "shopsim/analysis.hpp"
#include "shopsim/catalog.hpp"
#include "shopsim/config.hpp"
#include "shopsim/error.hpp"
#include "shopsim/probe.hpp"
#include "shopsim/prompts.hpp"
#include "shopsim/scheduler.hpp"
#include "shopsim/trace.hpp"

namespace shopsim {

using nlohmann::json;
namespace fs = std::filesystem;

std::string with_thousands(std::size_t n) {
  std::string digits = std::to_string(n);
  std::string out;
  const std::size_t lead = digits.size() % 3;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i != 0 && (i - lead) % 3 == 0) out += ',';
    out += digits[i];
  }
  return out;
}

namespace {

struct DataError : Error {
  using Error::Error;
};

struct Globals {
  std::string config;
  std::string traces;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> parallel;
};

// Config with command-line overrides applied; nullopt without --config.
std::optional<EngineConfig> load_effective(const Globals& g) {
  if (g.config.empty()) return std::nullopt;
  auto cfg = load_config(g.config);
  if (!g.traces.empty()) cfg.traces = g.traces;
  if (!g.out.empty()) cfg.out_dir = g.out;
  if (g.seed) cfg.seed = *g.seed;
  if (g.parallel) cfg.parallel = *g.parallel;
  if (cfg.parallel < 1) throw ConfigError("parallel: must be >= 1");
  return cfg;
}

fs::path traces_path(const Globals& g, const std::optional<EngineConfig>& cfg) {
  if (!g.traces.empty()) return g.traces;
  if (cfg && !cfg->traces.empty()) return cfg->traces;
  throw ConfigError("traces: no trace store given (use --traces or a config)");
}

fs::path out_dir(const Globals& g, const std::optional<EngineConfig>& cfg) {
  if (!g.out.empty()) return g.out;
  if (cfg && !cfg->out_dir.empty()) return cfg->out_dir;
  return "out";
}

std::vector<Trajectory> load_nonempty(const fs::path& path) {
  if (!fs::exists(path)) throw DataError("trace store " + path.string() + " does not exist");
  auto loaded = load_traces(path);
  if (loaded.trajectories.empty()) throw DataError("trace store " + path.string() + " holds no trajectories");
  return std::move(loaded.trajectories);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

CsvTable cost_csv(const CostReport& r) {
  CsvTable t;
  t.header = {"backend", "class", "runs", "mean_input_tokens", "mean_output_tokens", "mean_cost", "total_cost"};
  for (const auto& l : r.lines) {
    t.rows.push_back({l.backend_id, std::string(purchase_class_name(l.purchase_class)), std::to_string(l.runs),
                      format_fixed(l.mean_input(), 1), format_fixed(l.mean_output(), 1),
                      format_fixed(l.mean_cost(), 4), format_fixed(l.cost, 4)});
  }
  t.rows.push_back({"total", "", "", "", "", "", format_fixed(r.total_cost, 4)});
  return t;
}

json cost_json(const CostReport& r) {
  json lines = json::array();
  for (const auto& l : r.lines) {
    lines.push_back({{"backend", l.backend_id},
                     {"class", purchase_class_name(l.purchase_class)},
                     {"runs", l.runs},
                     {"input_tokens", l.input_tokens},
                     {"output_tokens", l.output_tokens},
                     {"mean_cost", l.mean_cost()},
                     {"cost", l.cost}});
  }
  return {{"lines", lines}, {"total_cost", r.total_cost}};
}

PriceTable resolve_prices(const std::string& prices_file, const std::optional<EngineConfig>& cfg) {
  if (!prices_file.empty()) return PriceTable::from_file(prices_file);
  if (cfg) return price_table(*cfg);
  throw ConfigError("prices: no price table given (use --prices or a config with backend prices)");
}

std::optional<HeatmapNormalization> parse_normalization(const std::string& s) {
  if (s == "grand") return HeatmapNormalization::grand_mean;
  if (s == "row") return HeatmapNormalization::row_mean;
  if (s == "column") return HeatmapNormalization::column_mean;
  return std::nullopt;
}

struct AnalyzeFlags {
  std::string kind;
  std::string group_by;
  std::string prices;
  std::string normalize = "grand";
  std::string trait = "price_consciousness";
};

struct Report {
  CsvTable csv;
  json doc;
  std::string svg;
};

Report build_report(const std::string& kind, const std::vector<Trajectory>& trajs, const AnalyzeFlags& f,
                    const std::optional<EngineConfig>& cfg) {
  Report r;
  if (kind == "metrics") {
    auto dims = split_list(f.group_by.empty() ? "seller_backend,buyer_backend" : f.group_by);
    for (const auto& d : dims) {
      if (!is_known_dimension(d)) throw DimensionError("unknown dimension \"" + d + "\"");
    }
    const auto rows = group_metrics(trajs, dims);
    r.csv = metrics_csv(rows, dims);
    r.doc = {{"group_by", dims}, {"rows", rows}};
  } else if (kind == "gender") {
    const std::string dim = f.group_by.empty() ? "orientation" : f.group_by;
    const auto rows = gender_gap(trajs, dim);
    r.csv = gender_csv(rows);
    r.doc = {{"group_by", dim}, {"rows", rows}};
  } else if (kind == "demand") {
    const auto c = price_demand_curve(trajs);
    r.csv = demand_csv(c);
    r.doc = c;
  } else if (kind == "elasticity") {
    auto t = parse_trait(f.trait);
    if (!t || role_of(*t) != Role::buyer) throw ConfigError("trait: \"" + f.trait + "\" is not a buyer trait");
    const auto g = elasticity_gap(trajs, *t);
    r.csv = elasticity_csv(g);
    r.doc = g;
  } else if (kind == "heatmap") {
    auto mode = parse_normalization(f.normalize);
    if (!mode) throw ConfigError("normalize: expected grand, row or column");
    const auto m = revenue_heatmap(trajs, *mode);
    r.csv = heatmap_csv(m);
    r.doc = m;
    r.svg = heatmap_svg(m);
  } else if (kind == "ablation") {
    const auto t = strategy_ablation(trajs);
    r.csv = ablation_csv(t);
    r.doc = t;
  } else if (kind == "cost") {
    const auto c = cost_report(trajs, resolve_prices(f.prices, cfg));
    r.csv = cost_csv(c);
    r.doc = cost_json(c);
  } else {
    throw ConfigError("unknown analysis \"" + kind + "\"");
  }
  return r;
}

void write_report(const fs::path& dir, const std::string& kind, const Report& r) {
  write_text(dir / (kind + ".csv"), r.csv.str());
  write_text(dir / (kind + ".json"), r.doc.dump(2) + "\n");
  if (!r.svg.empty()) write_text(dir / (kind + ".svg"), r.svg);
}

const std::vector<std::string> kAnalyses{"metrics", "gender", "demand", "elasticity", "heatmap", "ablation", "cost"};

// ---- commands ----

int cmd_ingest(const std::string& input, const std::string& output, double discount,
               std::optional<std::size_t> per_category, std::uint64_t seed, std::ostream& out) {
  LoadOptions opt;
  opt.default_discount_rate = discount;
  auto report = load_catalog(input, opt);
  auto products = per_category ? sample_balanced(report.products, *per_category, seed) : report.products;
  std::string text;
  for (const auto& p : products) text += json(p).dump() + "\n";
  write_text(output, text);
  out << "ingested " << with_thousands(products.size()) << " products, skipped " << report.skipped << " lines\n";
  std::map<std::string, std::size_t> per;
  for (const auto& p : products) ++per[std::string(category_name(p.category))];
  for (const auto& [c, n] : per) out << "  " << c << ": " << n << "\n";
  for (std::size_t i = 0; i < report.skip_reasons.size() && i < 10; ++i) out << "  " << report.skip_reasons[i] << "\n";
  return kExitOk;
}

struct SimulateFlags {
  bool resume = false;
  bool dry_run = false;
  std::optional<std::size_t> limit;
  bool record_prompts = false;
};

int cmd_simulate(const Globals& g, const SimulateFlags& f, std::ostream& out, std::ostream& err) {
  auto cfg = load_effective(g);
  if (!cfg) throw ConfigError("config: simulate needs --config");
  const auto catalog = load_catalog(cfg->catalog).products;
  const auto products = select_products(cfg->matrix.products, catalog, cfg->seed);
  const auto matrix = build_run_matrix(cfg->matrix, products, cfg->seed);
  if (f.dry_run) {
    out << with_thousands(matrix.size()) << " runs\n";
    return kExitOk;
  }
  if (cfg->traces.empty()) throw ConfigError("traces: no trace store path");

  TraceStore store(cfg->traces);
  const auto prior = store.read_manifest();
  if (prior && prior->config_hash != cfg->hash()) {
    err << "warning: trace store was written under a different config (" << prior->config_hash.substr(0, 12)
        << ")\n";
  }
  auto pending = pending_runs(store, matrix);
  const std::size_t already = matrix.size() - pending.size();
  if (already > 0 && !f.resume) {
    throw ConfigError("traces: store already holds " + with_thousands(already) +
                      " completed runs of this matrix; pass --resume to continue it");
  }
  if (f.limit && pending.size() > *f.limit) pending.resize(*f.limit);
  if (!prior) store.write_manifest({cfg->hash(), cfg->seed, utc_now_iso8601(), std::string(prompt_version())});

  out << "matrix: " << with_thousands(matrix.size()) << " runs, " << with_thousands(already)
      << " already complete, " << with_thousands(pending.size()) << " to execute\n";

  const auto backends = make_backends(*cfg);
  InterruptGuard guard;
  BatchOptions opt;
  opt.parallel = cfg->parallel;
  opt.record_prompts = f.record_prompts;
  const auto summary = run_batch(pending, backends, store, opt, guard.token());

  out << "completed " << with_thousands(summary.completed) << ", failed " << with_thousands(summary.failed)
      << ", skipped " << with_thousands(summary.skipped) << "\n";
  try {
    const auto cost = cost_report(summary.trajectories, price_table(*cfg));
    out << "total cost: $" << format_fixed(cost.total_cost, 4) << "\n";
  } catch (const PricingError& e) {
    out << "total cost: n/a (" << e.what() << ")\n";
  }
  for (const auto& t : summary.trajectories) {
    if (t.status == RunStatus::failed) err << "failed: " << t.run_id << ": " << t.error << "\n";
  }
  if (guard.token().stop_requested()) return kExitInterrupted;
  return summary.failed > 0 ? kExitRunsFailed : kExitOk;
}

int cmd_analyze(const Globals& g, const AnalyzeFlags& f, std::ostream& out) {
  const auto cfg = load_effective(g);
  const auto trajs = load_nonempty(traces_path(g, cfg));
  const auto r = build_report(f.kind, trajs, f, cfg);
  write_report(out_dir(g, cfg), f.kind, r);
  out << r.csv.str();
  return kExitOk;
}

int cmd_report(const Globals& g, const AnalyzeFlags& f, std::ostream& out, std::ostream& err) {
  const auto cfg = load_effective(g);
  const auto trajs = load_nonempty(traces_path(g, cfg));
  const auto dir = out_dir(g, cfg);
  json doc{{"runs", trajs.size()}, {"analyses", json::object()}};
  std::size_t completed = 0;
  for (const auto& t : trajs) completed += t.status == RunStatus::completed;
  doc["completed"] = completed;
  doc["revenue_note"] = "revenue is quantity x unit price, shipping excluded, refunded orders excluded";
  bool errored = false;
  for (const auto& kind : kAnalyses) {
    AnalyzeFlags k = f;
    k.kind = kind;
    if (kind != "metrics" && kind != "gender") k.group_by.clear();
    try {
      auto r = build_report(kind, trajs, k, cfg);
      write_report(dir, kind, r);
      doc["analyses"][kind] = std::move(r.doc);
      out << kind << ": " << r.csv.rows.size() << " rows\n";
    } catch (const InsufficientDataError& e) {
      doc["analyses"][kind] = {{"skipped", e.what()}};
      out << kind << ": skipped (" << e.what() << ")\n";
    } catch (const ConfigError& e) {
      doc["analyses"][kind] = {{"skipped", e.what()}};
      out << kind << ": skipped (" << e.what() << ")\n";
    } catch (const Error& e) {
      errored = true;
      doc["analyses"][kind] = {{"error", e.what()}};
      err << kind << ": " << e.what() << "\n";
    }
  }
  write_text(dir / "report.json", doc.dump(2) + "\n");
  return errored ? kExitRunsFailed : kExitOk;
}

std::unique_ptr<EmbeddingProvider> make_embedding(const std::optional<EngineConfig>& cfg, std::size_t dim) {
  if (cfg && cfg->source.contains("embedding")) {
    const auto& e = cfg->source["embedding"];
    if (e.value("kind", std::string("hashing")) == "http") {
      HttpEmbeddingConfig hc;
      hc.id = e.value("id", std::string("embedding"));
      hc.endpoint = e.at("endpoint").get<std::string>();
      hc.model = e.at("model").get<std::string>();
      hc.api_key_env = e.value("api_key_env", std::string());
      hc.dimension = e.value("dimension", std::size_t{0});
      hc.retry = cfg->retry;
      return std::make_unique<HttpEmbedding>(hc);
    }
    dim = e.value("dimension", dim);
  }
  return std::make_unique<HashingEmbedding>(dim);
}

struct ProbeFlags {
  std::string traits;
  std::string model;
  std::string group_by;
  std::size_t dim = 1024;
  double train_fraction = 0.75;
};

int cmd_probe_train(const Globals& g, const ProbeFlags& f, std::ostream& out) {
  const auto cfg = load_effective(g);
  const auto trajs = load_nonempty(traces_path(g, cfg));
  const std::uint64_t seed = g.seed ? *g.seed : cfg ? cfg->seed : 0;
  auto provider = make_embedding(cfg, f.dim);
  std::vector<TraitClassifier> models;
  json searches = json::array();
  for (const auto& name : split_list(f.traits)) {
    auto t = parse_trait(name);
    if (!t) throw ConfigError("trait: unknown trait \"" + name + "\"");
    auto r = stagewise_search(trajs, *t, *provider, seed, {}, f.train_fraction);
    out << name << ": best stage " << probe_stage_name(r.best) << "\n";
    for (const auto& s : r.scores) {
      out << "  " << probe_stage_name(s.stage) << " "
          << (s.accuracy ? format_fixed(*s.accuracy * 100.0, 1) + "%" : std::string("n/a")) << " (train "
          << s.train_examples << ", test " << s.test_examples << ")\n";
    }
    if (r.partial_examples > 0) out << "  inquiry texts without a post dialogue: " << r.partial_examples << "\n";
    searches.push_back(r);
    models.push_back(std::move(r.classifier));
  }
  if (models.empty()) throw ConfigError("trait: no trait given");
  const fs::path model = f.model.empty() ? out_dir(g, cfg) / "probe_model.json" : fs::path(f.model);
  save_classifiers(model, models);
  write_text(model.parent_path() / "probe_search.json", searches.dump(2) + "\n");
  out << "model written to " << model.string() << "\n";
  return kExitOk;
}

int cmd_probe_infer(const Globals& g, const ProbeFlags& f, std::ostream& out) {
  const auto cfg = load_effective(g);
  const auto trajs = load_nonempty(traces_path(g, cfg));
  if (f.model.empty()) throw ConfigError("model: probe infer needs --model");
  const auto models = load_classifiers(f.model);
  auto provider = make_embedding(cfg, models.empty() ? f.dim : models.front().weights.size());

  std::map<std::string, std::vector<Trajectory>> cohorts;
  if (!f.group_by.empty() && !is_known_dimension(f.group_by)) {
    throw DimensionError("unknown dimension \"" + f.group_by + "\"");
  }
  for (const auto& t : trajs) {
    if (t.status != RunStatus::completed) continue;
    cohorts[f.group_by.empty() ? "all" : dimension_value(t, f.group_by)].push_back(t);
  }
  if (cohorts.empty()) throw DataError("no completed trajectories to classify");

  CsvTable csv;
  csv.header = {"group", "trait", "dominant", "probability", "tie", "n"};
  json doc = json::array();
  for (const auto& [group, cohort] : cohorts) {
    json traits = json::array();
    for (const auto& m : models) {
      std::vector<std::string> texts;
      for (const auto& t : cohort) {
        auto st = extract_stage_text(t, m.stage);
        if (!st.empty) texts.push_back(std::move(st.text));
      }
      if (texts.empty()) continue;
      std::vector<int> preds;
      for (const auto& v : provider->embed(texts, trait_instruction(m.trait))) preds.push_back(m.predict(v));
      const auto e = estimate_trait(m.trait, preds);
      csv.rows.push_back({group, std::string(trait_id(e.trait)), e.dominant, format_fixed(e.probability, 4),
                          e.tie ? "true" : "false", std::to_string(e.n)});
      traits.push_back({{"trait", trait_id(e.trait)},
                        {"dominant", e.dominant},
                        {"probability", e.probability},
                        {"tie", e.tie},
                        {"n", e.n}});
    }
    doc.push_back({{"group", group}, {"traits", traits}});
  }
  const auto dir = out_dir(g, cfg);
  write_text(dir / "probe_infer.csv", csv.str());
  write_text(dir / "probe_infer.json", doc.dump(2) + "\n");
  out << csv.str();
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"shopsim: multi-agent shopping simulation"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "Experiment config (JSON)");
  app.add_option("--traces", g.traces, "Trace store (JSONL)");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--seed", g.seed, "Top-level seed");
  app.add_option("--parallel", g.parallel, "Concurrent runs")->check(CLI::PositiveNumber);

  std::string input, output;
  double discount = 0.10;
  std::optional<std::size_t> per_category;
  auto* ingest = app.add_subcommand("ingest", "Normalize a product file into a catalog");
  ingest->add_option("--input", input, "Raw line-delimited JSON products")->required();
  ingest->add_option("--output", output, "Catalog path to write")->required();
  ingest->add_option("--discount-rate", discount, "Discount rate for records without one")
      ->check(CLI::Range(0.0, 0.9));
  ingest->add_option("--per-category", per_category, "Keep a balanced sample of this many per category");

  SimulateFlags sf;
  auto* simulate = app.add_subcommand("simulate", "Execute the run matrix");
  simulate->add_flag("--resume", sf.resume, "Skip runs already completed in the store");
  simulate->add_flag("--dry-run", sf.dry_run, "Print the matrix size only");
  simulate->add_option("--limit", sf.limit, "Execute at most this many runs");
  simulate->add_flag("--record-prompts", sf.record_prompts, "Keep full prompts in the trajectories");

  AnalyzeFlags af;
  auto* analyze = app.add_subcommand("analyze", "Compute one analysis from the trace store");
  analyze->add_option("kind", af.kind, "Analysis")->required()->check(CLI::IsMember(kAnalyses));
  analyze->add_option("--group-by", af.group_by, "Comma-separated dimensions");
  analyze->add_option("--prices", af.prices, "Price table (JSON) for cost");
  analyze->add_option("--normalize", af.normalize, "Heatmap normalization")
      ->check(CLI::IsMember({"grand", "row", "column"}));
  analyze->add_option("--trait", af.trait, "Buyer trait splitting the elasticity groups");

  AnalyzeFlags rf;
  auto* report = app.add_subcommand("report", "Write every analysis and a combined JSON report");
  report->add_option("--prices", rf.prices, "Price table (JSON) for cost");
  report->add_option("--normalize", rf.normalize, "Heatmap normalization")
      ->check(CLI::IsMember({"grand", "row", "column"}));
  report->add_option("--group-by", rf.group_by, "Dimensions for metrics");

  ProbeFlags pf;
  auto* probe = app.add_subcommand("probe", "Persona trait classifiers");
  probe->require_subcommand(1);
  auto* train = probe->add_subcommand("train", "Search stages and train trait classifiers");
  train->add_option("--trait", pf.traits, "Comma-separated trait ids")->required();
  train->add_option("--model", pf.model, "Where to write the classifiers");
  train->add_option("--dim", pf.dim, "Hashing embedding dimension");
  train->add_option("--train-fraction", pf.train_fraction, "Share of products used for training")
      ->check(CLI::Range(0.0, 1.0));
  auto* infer = probe->add_subcommand("infer", "Estimate traits with saved classifiers");
  infer->add_option("--model", pf.model, "Classifier file")->required();
  infer->add_option("--group-by", pf.group_by, "Dimension splitting the cohort");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*ingest) return cmd_ingest(input, output, discount, per_category, g.seed.value_or(0), out);
    if (*simulate) return cmd_simulate(g, sf, out, err);
    if (*analyze) return cmd_analyze(g, af, out);
    if (*report) return cmd_report(g, rf, out, err);
    if (*train) return cmd_probe_train(g, pf, out);
    if (*infer) return cmd_probe_infer(g, pf, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DimensionError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const CatalogError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const TraceError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const InsufficientDataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitRunsFailed;
  }
  return kExitUsage;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace shopsim

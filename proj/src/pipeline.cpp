#include "modal_attrib/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "modal_attrib/affect.hpp"
#include "modal_attrib/annotations.hpp"
#include "modal_attrib/attribution.hpp"
#include "modal_attrib/errors.hpp"
#include "modal_attrib/gbdt.hpp"
#include "modal_attrib/interactions.hpp"
#include "modal_attrib/io.hpp"
#include "modal_attrib/parallel.hpp"
#include "modal_attrib/shap.hpp"
#include "modal_attrib/svg.hpp"
#include "modal_attrib/synthetic.hpp"
#include "modal_attrib/table.hpp"

namespace modal_attrib::pipeline {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

OptionSpec opt(std::string key, OptionType type, json def, std::string help) {
  return OptionSpec{std::move(key), type, std::move(def), false, false, std::move(help)};
}

OptionSpec required_input(std::string key, std::string help) {
  return OptionSpec{std::move(key), OptionType::path, nullptr, true, true, std::move(help)};
}

OptionSpec optional_input(std::string key, std::string help) {
  return OptionSpec{std::move(key), OptionType::path, nullptr, false, true, std::move(help)};
}

void add_common(CommandSpec& spec, bool seeded) {
  spec.options.insert(spec.options.begin(),
                      OptionSpec{"out", OptionType::path, nullptr, true, false, "output directory"});
  if (seeded) spec.options.push_back(opt("seed", OptionType::integer, 1, "random seed"));
  spec.options.push_back(
      opt("threads", OptionType::integer, 0, "worker threads (0: MODAL_ATTRIB_THREADS or all cores)"));
  spec.options.push_back(
      opt("strict", OptionType::flag, false, "require upstream artifacts to match their manifests"));
}

std::vector<CommandSpec> build_specs() {
  std::vector<CommandSpec> specs;

  CommandSpec ingest{"ingest", "validate and normalize a raw feature CSV", {}, {}};
  ingest.options = {
      required_input("input", "raw feature CSV with a row_id column"),
      required_input("schema", "schema JSON"),
      opt("missing_policy", OptionType::string, "drop_row", "drop_row | fill_zero"),
      opt("clamp", OptionType::flag, false, "clamp out-of-range values instead of failing"),
  };
  ingest.outputs = {"table.csv", "schema.json", "ingest_report.json"};
  add_common(ingest, false);
  specs.push_back(std::move(ingest));

  CommandSpec train{"train", "fit a gradient-boosted regression model", {}, {}};
  train.options = {
      required_input("input", "feature CSV"),
      required_input("schema", "schema JSON"),
      opt("preset", OptionType::string, "within", "within | cross"),
      opt("iterations", OptionType::integer, nullptr, "boosting rounds (default from preset)"),
      opt("learning_rate", OptionType::number, nullptr, "shrinkage (default from preset)"),
      opt("max_depth", OptionType::integer, nullptr, "tree depth (default from preset)"),
      opt("min_samples_leaf", OptionType::integer, nullptr, "minimum rows per leaf (default from preset)"),
      opt("eval_every", OptionType::integer, nullptr, "early-stopping evaluation interval, 0 disables"),
      opt("patience", OptionType::integer, nullptr, "evaluations without improvement before stopping"),
      opt("train_fraction", OptionType::number, 0.8, "share of rows used for training"),
      opt("missing_policy", OptionType::string, "drop_row", "drop_row | fill_zero"),
      opt("clamp", OptionType::flag, false, "clamp out-of-range values instead of failing"),
  };
  train.outputs = {"model.json", "train_report.json", "metrics.json", "split.json"};
  add_common(train, true);
  specs.push_back(std::move(train));

  CommandSpec explain{"explain", "interventional SHAP values for a trained model", {}, {}};
  explain.options = {
      required_input("model", "model JSON"),
      required_input("input", "feature CSV"),
      required_input("schema", "schema JSON"),
      optional_input("split", "split.json written by train"),
      opt("rows", OptionType::string, "auto", "all | train | test | auto (test when a split is given)"),
      opt("max_rows", OptionType::integer, 0, "explain at most this many rows (0: all)"),
      opt("background", OptionType::integer, 1024, "background sample size"),
      opt("missing_policy", OptionType::string, "drop_row", "drop_row | fill_zero"),
      opt("clamp", OptionType::flag, false, "clamp out-of-range values instead of failing"),
  };
  explain.outputs = {"shap.csv", "shap_header.json"};
  add_common(explain, true);
  specs.push_back(std::move(explain));

  CommandSpec aggregate{"aggregate", "feature-weighted SHAP summaries and rankings", {}, {}};
  aggregate.options = {
      required_input("shap", "shap.csv written by explain"),
      optional_input("shap_header", "shap_header.json (default: next to shap.csv)"),
      required_input("input", "feature CSV"),
      required_input("schema", "schema JSON"),
      opt("centering", OptionType::string, "half", "half | mean | median"),
      opt("normalization", OptionType::string, "mean", "mean | sum"),
      opt("bootstrap", OptionType::integer, 1000, "bootstrap resamples for the interval, 0 disables"),
      opt("ci_level", OptionType::number, 0.95, "interval level"),
      opt("top_k_pos", OptionType::integer, 10, "positive features per ranking group"),
      opt("top_k_neg", OptionType::integer, 10, "negative features per ranking group"),
      opt("group_by_modality", OptionType::flag, true, "rank within each modality"),
      opt("beeswarm_features", OptionType::string, "", "comma list (default: 10 largest mean |phi|)"),
      opt("missing_policy", OptionType::string, "drop_row", "drop_row | fill_zero"),
      opt("clamp", OptionType::flag, false, "clamp out-of-range values instead of failing"),
  };
  aggregate.outputs = {"beta_summary.csv", "beta_summary_meta.json", "ranking.json", "beeswarm.jsonl"};
  add_common(aggregate, true);
  specs.push_back(std::move(aggregate));

  CommandSpec interact{"interact", "SHAP interaction values and quadrant analysis", {}, {}};
  interact.options = {
      required_input("model", "model JSON"),
      required_input("input", "feature CSV"),
      required_input("schema", "schema JSON"),
      optional_input("split", "split.json written by train"),
      opt("rows", OptionType::string, "auto", "all | train | test | auto (test when a split is given)"),
      opt("max_rows", OptionType::integer, 0, "explain at most this many rows (0: all)"),
      opt("background", OptionType::integer, 100, "background sample size"),
      opt("pairs", OptionType::string, "", "comma list of x:y pairs (default: top_k strongest)"),
      opt("top_k", OptionType::integer, 3, "pairs analysed when --pairs is empty"),
      opt("threshold_mode", OptionType::string, "auto", "auto | median | fixed50"),
      opt("regressor", OptionType::string, "x_value", "x_value | centered_product"),
      opt("write_tensor", OptionType::flag, true, "write the full interactions.csv"),
      opt("missing_policy", OptionType::string, "drop_row", "drop_row | fill_zero"),
      opt("clamp", OptionType::flag, false, "clamp out-of-range values instead of failing"),
  };
  interact.outputs = {"interactions.csv", "pairs.csv", "quadrants.csv", "patterns.json", "scatter.jsonl"};
  add_common(interact, true);
  specs.push_back(std::move(interact));

  CommandSpec affect{"affect", "emotion-weighted sentiment comparison", {}, {}};
  affect.options = {
      required_input("input", "affect CSV (row_id, 7 emotions, caption/transcript sentiment)"),
      opt("frames", OptionType::flag, false, "input holds frames; average to one row per row_id first"),
      opt("ci_method", OptionType::string, "normal", "normal | bootstrap"),
      opt("ci_level", OptionType::number, 0.95, "interval level"),
      opt("bootstrap", OptionType::integer, 1000, "bootstrap resamples"),
  };
  affect.outputs = {"affect_comparison.csv", "affect_aggregates.csv"};
  add_common(affect, true);
  specs.push_back(std::move(affect));

  CommandSpec validate{"validate", "percent agreement of machine labels with human labels", {}, {}};
  validate.options = {
      required_input("machine", "machine annotations JSONL"),
      required_input("human", "human binary labels CSV"),
      opt("threshold", OptionType::number, 50.0, "machine probability at or above this is positive"),
  };
  validate.outputs = {"agreement.json"};
  add_common(validate, false);
  specs.push_back(std::move(validate));

  CommandSpec simulate{"simulate", "synthetic table with planted interactions", {}, {}};
  simulate.options = {
      required_input("spec", "planted spec JSON"),
      opt("seed", OptionType::integer, nullptr, "override the spec seed"),
      opt("n_rows", OptionType::integer, nullptr, "override the spec row count"),
  };
  simulate.outputs = {"table.csv", "schema.json", "ground_truth.json"};
  add_common(simulate, false);
  specs.push_back(std::move(simulate));

  CommandSpec annotate{"annotate", "mock zero-shot text annotations (deterministic keyword rules)", {}, {}};
  annotate.options = {
      required_input("input", "CSV with row_id and a text column"),
      opt("text_column", OptionType::string, "text", "column holding the text"),
  };
  annotate.outputs = {"annotations.jsonl"};
  add_common(annotate, true);
  specs.push_back(std::move(annotate));

  CommandSpec flatten{"flatten", "annotation JSONL to probabilistic feature columns", {}, {}};
  flatten.options = {
      required_input("annotations", "annotation JSONL"),
      opt("kind", OptionType::string, "text", "text | visual"),
      opt("prefix", OptionType::string, "caption", "column name prefix"),
      opt("aggregation", OptionType::string, "mean", "frame aggregation for visual: mean | max"),
  };
  flatten.outputs = {"columns.csv", "columns_schema.json", "sidecar.jsonl"};
  add_common(flatten, false);
  specs.push_back(std::move(flatten));

  CommandSpec report{"report", "summary JSON and SVG charts from exported plot data", {}, {}};
  report.options = {
      optional_input("beta", "beta_summary.csv"),
      optional_input("beeswarm", "beeswarm.jsonl"),
      optional_input("quadrants", "quadrants.csv"),
      optional_input("patterns", "patterns.json"),
      optional_input("scatter", "scatter.jsonl"),
      optional_input("train_report", "train_report.json"),
      optional_input("metrics", "metrics.json"),
      optional_input("agreement", "agreement.json"),
      optional_input("affect", "affect_comparison.csv"),
      opt("title", OptionType::string, "modal_attrib report", "chart title prefix"),
  };
  report.outputs = {"report.json", "forest.svg", "beeswarm.svg", "quadrant.svg"};
  add_common(report, false);
  specs.push_back(std::move(report));

  return specs;
}

// ---------------------------------------------------------------------------
// run context

class Context {
 public:
  Context(const CommandSpec& spec, json cfg) : spec_(spec), cfg_(std::move(cfg)) {
    out_ = fs::path(cfg_.at("out").get<std::string>());
    fs::create_directories(out_);
  }

  const json& cfg() const { return cfg_; }
  json& cfg() { return cfg_; }
  const fs::path& out() const { return out_; }

  bool has(const std::string& key) const { return cfg_.contains(key) && !cfg_[key].is_null(); }
  std::string str(const std::string& key) const { return cfg_.at(key).get<std::string>(); }
  fs::path path(const std::string& key) const { return fs::path(str(key)); }
  long long integer(const std::string& key) const { return cfg_.at(key).get<long long>(); }
  double number(const std::string& key) const { return cfg_.at(key).get<double>(); }
  bool flag(const std::string& key) const { return cfg_.at(key).get<bool>(); }
  std::uint64_t seed() const { return static_cast<std::uint64_t>(integer("seed")); }
  std::size_t threads() const {
    const auto t = integer("threads");
    return t > 0 ? static_cast<std::size_t>(t) : default_threads();
  }

  void write(const std::string& name, std::string_view content) {
    io::write_file(out_ / name, content);
    outputs_[name] = {{"path", name}, {"sha256", io::sha256_hex(content)}};
  }

  template <typename F>
  auto timed(const std::string& phase, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      timings_[phase] = seconds_since(t0);
    } else {
      auto r = f();
      timings_[phase] = seconds_since(t0);
      return r;
    }
  }

  json inputs;
  json outputs() const { return outputs_; }
  json timings() const { return timings_; }

 private:
  static double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

  const CommandSpec& spec_;
  json cfg_;
  fs::path out_;
  json outputs_ = json::object();
  json timings_ = json::object();
};

IngestOptions ingest_options(const Context& ctx) {
  IngestOptions o;
  o.missing_policy = parse_missing_policy(ctx.str("missing_policy"));
  o.clamp = ctx.flag("clamp");
  return o;
}

FeatureTable load_table(Context& ctx) {
  return ctx.timed("ingest", [&] {
    return ingest(ctx.path("input"), ctx.path("schema"), ingest_options(ctx)).table;
  });
}

std::vector<std::string> split_list(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::string split_to_json(const SplitIndex& s, std::size_t n_rows, double fraction) {
  json doc = {{"n_rows", n_rows},
              {"train_fraction", fraction},
              {"seed", s.seed},
              {"train_rows", s.train_rows},
              {"test_rows", s.test_rows}};
  return doc.dump() + "\n";
}

SplitIndex read_split(const fs::path& path, std::size_t n_rows) {
  json doc;
  try {
    doc = json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    throw ParseError("split file " + path.string() + ": " + e.what());
  }
  if (doc.value("n_rows", std::size_t{0}) != n_rows) {
    throw JoinError("split file " + path.string() + " was made for " +
                    std::to_string(doc.value("n_rows", std::size_t{0})) + " rows, table has " +
                    std::to_string(n_rows));
  }
  SplitIndex s;
  s.train_rows = doc.at("train_rows").get<std::vector<std::size_t>>();
  s.test_rows = doc.at("test_rows").get<std::vector<std::size_t>>();
  s.seed = doc.value("seed", std::uint64_t{0});
  return s;
}

struct RowChoice {
  std::vector<std::size_t> explain;
  std::vector<std::size_t> background_pool;
};

RowChoice choose_rows(const Context& ctx, const FeatureTable& table) {
  std::optional<SplitIndex> split;
  if (ctx.has("split")) split = read_split(ctx.path("split"), table.n_rows());
  std::vector<std::size_t> all(table.n_rows());
  std::iota(all.begin(), all.end(), std::size_t{0});

  RowChoice c;
  std::string mode = ctx.str("rows");
  if (mode == "auto") mode = split ? "test" : "all";
  if (mode == "all") {
    c.explain = all;
  } else if (mode == "train" || mode == "test") {
    if (!split) throw ConfigError("--rows " + mode + " needs --split");
    c.explain = mode == "train" ? split->train_rows : split->test_rows;
  } else {
    throw ConfigError("unknown --rows value '" + mode + "' (expected all|train|test|auto)");
  }
  const auto max_rows = ctx.integer("max_rows");
  if (max_rows < 0) throw ConfigError("--max-rows must be >= 0");
  if (max_rows > 0 && c.explain.size() > static_cast<std::size_t>(max_rows)) {
    c.explain.resize(static_cast<std::size_t>(max_rows));
  }
  c.background_pool = split ? split->train_rows : all;
  return c;
}

Matrix rows_of(const FeatureTable& table, const std::vector<std::size_t>& rows,
               std::vector<std::string>& ids) {
  ids.clear();
  for (auto r : rows) ids.push_back(table.row_ids()[r]);
  return table.values().select_rows(rows);
}

BoostedModel load_model(const Context& ctx) {
  return model_from_json(io::read_file(ctx.path("model")));
}

// ---------------------------------------------------------------------------
// commands

void cmd_ingest(Context& ctx) {
  const auto result = ctx.timed("ingest", [&] {
    return ingest(ctx.path("input"), ctx.path("schema"), ingest_options(ctx));
  });
  ctx.write("table.csv", table_to_csv(result.table));
  ctx.write("schema.json", schema_to_json(result.table.schema(), &result.table.scaling()));
  const auto& r = result.report;
  json rep = {{"rows_read", r.rows_read},         {"rows_kept", r.rows_kept},
              {"dropped", r.dropped},             {"filled_cells", r.filled_cells},
              {"clamped_cells", r.clamped_cells}, {"n_features", result.table.n_cols()},
              {"schema_fingerprint", result.table.schema().fingerprint()}};
  ctx.write("ingest_report.json", rep.dump(2) + "\n");
}

void cmd_train(Context& ctx) {
  // materialize the preset so the manifest records every effective value
  BoostConfig config = BoostConfig::preset(ctx.str("preset"));
  auto& cfg = ctx.cfg();
  auto fill_int = [&](const char* key, int& field) {
    if (cfg[key].is_null()) {
      cfg[key] = field;
    } else {
      field = cfg[key].get<int>();
    }
  };
  fill_int("iterations", config.iterations);
  if (cfg["learning_rate"].is_null()) {
    cfg["learning_rate"] = config.learning_rate;
  } else {
    config.learning_rate = cfg["learning_rate"].get<double>();
  }
  fill_int("max_depth", config.max_depth);
  fill_int("min_samples_leaf", config.min_samples_leaf);
  if (cfg["eval_every"].is_null()) {
    cfg["eval_every"] = config.early_stop_eval_every.value_or(0);
  } else if (cfg["eval_every"].get<int>() > 0) {
    config.early_stop_eval_every = cfg["eval_every"].get<int>();
  } else {
    config.early_stop_eval_every.reset();
  }
  if (cfg["patience"].is_null()) {
    cfg["patience"] = config.early_stop_patience_evals.value_or(1);
  }
  if (config.early_stop_eval_every) {
    config.early_stop_patience_evals = cfg["patience"].get<int>();
  } else {
    config.early_stop_patience_evals.reset();
  }
  config.seed = ctx.seed();
  config.validate();

  const FeatureTable table = load_table(ctx);
  const double fraction = ctx.number("train_fraction");
  const SplitIndex s = split(table, fraction, ctx.seed());
  const auto result = ctx.timed("train", [&] { return train(table, s, config); });

  ctx.write("model.json", model_to_json(result.model));
  ctx.write("train_report.json", train_report_to_json(result.report));
  const auto tr = evaluate(result.model, table, s.train_rows);
  const auto te = evaluate(result.model, table, s.test_rows);
  json metrics = {{"train", {{"rmse", tr.rmse}, {"r2", tr.r2}, {"n", s.train_rows.size()}}},
                  {"test", {{"rmse", te.rmse}, {"r2", te.r2}, {"n", s.test_rows.size()}}},
                  {"trees", result.model.trees.size()},
                  {"stop_reason", result.report.stop_reason},
                  {"target_transform", std::string(to_string(table.schema().target.transform))}};
  ctx.write("metrics.json", metrics.dump(2) + "\n");
  ctx.write("split.json", split_to_json(s, table.n_rows(), fraction));
}

void cmd_explain(Context& ctx) {
  const auto model = load_model(ctx);
  const FeatureTable table = load_table(ctx);
  if (model.schema_fingerprint != table.schema().fingerprint()) {
    throw SchemaError("model was trained on a different column set than " + ctx.str("schema"));
  }
  const auto rows = choose_rows(ctx, table);
  const auto bg_size = ctx.integer("background");
  if (bg_size < 1) throw ConfigError("--background must be >= 1");
  const auto bg = sample_background(table, rows.background_pool, static_cast<std::size_t>(bg_size), ctx.seed());
  std::vector<std::string> ids;
  const Matrix x = rows_of(table, rows.explain, ids);
  ShapOptions opts;
  opts.threads = ctx.threads();
  const auto result = ctx.timed("shap", [&] { return shap_values(model, x, bg, ids, opts); });
  ctx.write("shap.csv", shap_to_csv(result));
  ctx.write("shap_header.json", shap_header_json(result, bg.rows.rows(), ctx.seed()));
}

std::string ranking_to_json(const std::vector<RankedGroup>& groups) {
  auto list = [](const std::vector<FeatureBeta>& v) {
    json arr = json::array();
    for (const auto& b : v) {
      arr.push_back({{"feature", b.feature}, {"beta_shap", b.beta_shap}, {"mean_abs_phi", b.mean_abs_phi}});
    }
    return arr;
  };
  json arr = json::array();
  for (const auto& g : groups) {
    arr.push_back({{"modality", g.modality ? json(std::string(to_string(*g.modality))) : json(nullptr)},
                   {"positive", list(g.positive)},
                   {"negative", list(g.negative)}});
  }
  return json{{"groups", arr}}.dump(2) + "\n";
}

void cmd_aggregate(Context& ctx) {
  const auto shap = read_shap(ctx.path("shap"), ctx.path("shap_header"));
  const FeatureTable table = load_table(ctx);

  BetaOptions opts;
  opts.centering = parse_centering(ctx.str("centering"));
  opts.normalization = parse_normalization(ctx.str("normalization"));
  const auto resamples = ctx.integer("bootstrap");
  if (resamples < 0) throw ConfigError("--bootstrap must be >= 0");
  opts.bootstrap_resamples = static_cast<std::size_t>(resamples);
  opts.ci_level = ctx.number("ci_level");
  opts.seed = ctx.seed();
  const auto summary = ctx.timed("beta", [&] { return beta_shap(shap, table, opts); });
  ctx.write("beta_summary.csv", beta_summary_to_csv(summary));
  ctx.write("beta_summary_meta.json", beta_summary_meta_json(summary));

  const auto k_pos = ctx.integer("top_k_pos"), k_neg = ctx.integer("top_k_neg");
  if (k_pos < 0 || k_neg < 0) throw ConfigError("top-k values must be >= 0");
  ctx.write("ranking.json",
            ranking_to_json(importance_ranking(summary, static_cast<std::size_t>(k_pos),
                                               static_cast<std::size_t>(k_neg),
                                               ctx.flag("group_by_modality"))));

  auto features = split_list(ctx.str("beeswarm_features"), ',');
  if (features.empty()) {
    auto by_mag = summary.features;
    std::stable_sort(by_mag.begin(), by_mag.end(), [](const auto& a, const auto& b) {
      if (a.mean_abs_phi != b.mean_abs_phi) return a.mean_abs_phi > b.mean_abs_phi;
      return a.feature < b.feature;
    });
    for (std::size_t i = 0; i < by_mag.size() && i < 10; ++i) features.push_back(by_mag[i].feature);
  }
  ctx.write("beeswarm.jsonl", beeswarm_to_jsonl(beeswarm_export(shap, table, features, opts)));
}

void cmd_interact(Context& ctx) {
  const auto model = load_model(ctx);
  const FeatureTable table = load_table(ctx);
  if (model.schema_fingerprint != table.schema().fingerprint()) {
    throw SchemaError("model was trained on a different column set than " + ctx.str("schema"));
  }
  QuadrantOptions qopts;
  qopts.threshold_mode = parse_threshold_mode(ctx.str("threshold_mode"));
  qopts.regressor_mode = parse_regressor_mode(ctx.str("regressor"));

  const auto rows = choose_rows(ctx, table);
  const auto bg_size = ctx.integer("background");
  if (bg_size < 1) throw ConfigError("--background must be >= 1");
  const auto bg = sample_background(table, rows.background_pool, static_cast<std::size_t>(bg_size), ctx.seed());
  std::vector<std::string> ids;
  const Matrix x = rows_of(table, rows.explain, ids);
  ShapOptions opts;
  opts.threads = ctx.threads();
  const auto tensor = ctx.timed("interactions", [&] { return shap_interactions(model, x, bg, ids, opts); });
  ctx.write("interactions.csv", ctx.flag("write_tensor") ? interactions_to_csv(tensor)
                                                         : std::string("row_id,feature_i,feature_j,phi_ij\n"));

  const auto top_k = ctx.integer("top_k");
  if (top_k < 1) throw ConfigError("--top-k must be >= 1");
  const auto ranked = top_interacting_pairs(tensor, std::max<std::size_t>(static_cast<std::size_t>(top_k), 1));
  std::string pairs_csv = io::csv_line({"rank", "feature_i", "feature_j", "mean_abs_phi"});
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    pairs_csv += io::csv_line({std::to_string(i + 1), ranked[i].feature_i, ranked[i].feature_j,
                               io::format_double(ranked[i].mean_abs)});
  }
  ctx.write("pairs.csv", pairs_csv);

  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& item : split_list(ctx.str("pairs"), ',')) {
    const auto parts = split_list(item, ':');
    if (parts.size() != 2) throw ConfigError("pair '" + item + "' must look like x:y");
    pairs.emplace_back(parts[0], parts[1]);
  }
  if (pairs.empty()) {
    for (const auto& p : ranked) pairs.emplace_back(p.feature_i, p.feature_j);
  }

  std::vector<QuadrantReport> reports;
  std::string scatter;
  ctx.timed("quadrants", [&] {
    for (const auto& [fx, fy] : pairs) {
      reports.push_back(quadrant_regression(tensor, table, fx, fy, qopts));
      scatter += scatter_to_jsonl(fx, fy, interaction_scatter(tensor, table, fx, fy));
    }
  });
  ctx.write("quadrants.csv", quadrant_reports_to_csv(reports));
  ctx.write("patterns.json", pattern_summary_json(reports));
  ctx.write("scatter.jsonl", scatter);
}

void cmd_affect(Context& ctx) {
  auto records = read_affect_csv(ctx.path("input"));
  if (ctx.flag("frames")) records = video_level(records);
  AffectOptions opts;
  opts.ci_method = parse_ci_method(ctx.str("ci_method"));
  opts.ci_level = ctx.number("ci_level");
  const auto resamples = ctx.integer("bootstrap");
  if (resamples < 1) throw ConfigError("--bootstrap must be >= 1");
  opts.bootstrap_resamples = static_cast<std::size_t>(resamples);
  opts.seed = ctx.seed();
  ctx.write("affect_comparison.csv", affect_comparison_to_csv(affect_comparison(records, opts)));
  ctx.write("affect_aggregates.csv", affect_aggregates_to_csv(affect_aggregate(records)));
}

void cmd_validate(Context& ctx) {
  const auto machine = parse_machine_labels(io::read_file(ctx.path("machine")));
  const auto human = parse_human_labels(io::read_file(ctx.path("human")));
  ctx.write("agreement.json", agreement_to_json(agreement(machine, human, ctx.number("threshold"))));
}

void cmd_simulate(Context& ctx) {
  auto spec = planted_spec_from_json(io::read_file(ctx.path("spec")));
  auto& cfg = ctx.cfg();
  if (cfg["seed"].is_null()) {
    cfg["seed"] = spec.seed;
  } else {
    spec.seed = cfg["seed"].get<std::uint64_t>();
  }
  if (cfg["n_rows"].is_null()) {
    cfg["n_rows"] = spec.n_rows;
  } else {
    spec.n_rows = cfg["n_rows"].get<std::size_t>();
  }
  const auto data = ctx.timed("generate", [&] { return generate(spec); });
  ctx.write("table.csv", table_to_csv(data.table));
  ctx.write("schema.json", schema_to_json(data.table.schema(), &data.table.scaling()));
  ctx.write("ground_truth.json", ground_truth_json(data.spec));
}

void cmd_annotate(Context& ctx) {
  const auto doc = io::read_csv(ctx.path("input"));
  const auto id_col = doc.find("row_id");
  if (!id_col) throw SchemaError("annotate input needs a row_id column");
  const auto text_col = doc.find(ctx.str("text_column"));
  if (!text_col) throw SchemaError("annotate input has no column '" + ctx.str("text_column") + "'");
  const MockAnnotator annotator(ctx.seed());
  std::string out;
  std::set<std::string> seen;
  for (const auto& row : doc.rows) {
    if (!seen.insert(row[*id_col]).second) throw DuplicateIdError("duplicate row_id " + row[*id_col]);
    auto a = annotator.annotate(row[*text_col]);
    a.row_id = row[*id_col];
    out += to_json(a) + "\n";
  }
  ctx.write("annotations.jsonl", out);
}

void cmd_flatten(Context& ctx) {
  const auto kind = ctx.str("kind");
  AnnotationColumns cols;
  if (kind == "text") {
    cols = flatten(read_text_annotations(ctx.path("annotations")), ctx.str("prefix"));
  } else if (kind == "visual") {
    cols = flatten(read_visual_annotations(ctx.path("annotations")), ctx.str("prefix"),
                   parse_frame_aggregation(ctx.str("aggregation")));
  } else {
    throw ConfigError("unknown --kind '" + kind + "' (expected text|visual)");
  }
  ctx.write("columns.csv", cols.to_csv());
  ctx.write("columns_schema.json", cols.schema_fragment_json());
  std::string side;
  for (const auto& line : cols.sidecar) side += line + "\n";
  ctx.write("sidecar.jsonl", side);
}

json read_json_file(const fs::path& p) {
  try {
    return json::parse(io::read_file(p));
  } catch (const json::exception& e) {
    throw ParseError(p.string() + ": " + e.what());
  }
}

void cmd_report(Context& ctx) {
  const std::string title = ctx.str("title");
  json summary = {{"title", title}};
  std::string forest_svg, beeswarm_svg, quadrant_svg;

  if (ctx.has("beta")) {
    const auto betas = beta_summary_from_csv(io::read_file(ctx.path("beta")));
    json arr = json::array();
    for (const auto& b : betas) {
      arr.push_back({{"feature", b.feature},
                     {"modality", std::string(to_string(b.modality))},
                     {"beta_shap", b.beta_shap},
                     {"ci_lo", b.ci_lo},
                     {"ci_hi", b.ci_hi},
                     {"mean_abs_phi", b.mean_abs_phi}});
    }
    summary["beta_shap"] = arr;
    auto sorted = betas;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const auto& a, const auto& b) { return a.beta_shap > b.beta_shap; });
    forest_svg = svg::forest(sorted, title + ": feature-weighted SHAP");
  }
  if (ctx.has("beeswarm")) {
    const auto records = beeswarm_from_jsonl(io::read_file(ctx.path("beeswarm")));
    beeswarm_svg = svg::beeswarm(records, title + ": SHAP values");
    summary["beeswarm_points"] = records.size();
  }
  if (ctx.has("patterns")) summary["interactions"] = read_json_file(ctx.path("patterns"))["pairs"];
  if (ctx.has("quadrants")) {
    const auto reports = quadrant_reports_from_csv(io::read_file(ctx.path("quadrants")));
    if (!summary.contains("interactions")) {
      summary["interactions"] = json::parse(pattern_summary_json(reports))["pairs"];
    }
    if (!reports.empty() && ctx.has("scatter")) {
      const auto& first = reports.front();
      std::vector<ScatterPoint> pts;
      for (const auto& line : io::read_lines(ctx.path("scatter"))) {
        const auto j = json::parse(line);
        if (j.at("feature_x") != first.feature_x || j.at("feature_y") != first.feature_y) continue;
        pts.push_back({j.at("row_id").get<std::string>(), j.at("x").get<double>(),
                       j.at("phi_xy").get<double>(), j.at("y").get<double>()});
      }
      quadrant_svg = svg::quadrant(pts, first);
    }
  }
  if (ctx.has("train_report")) {
    const auto j = read_json_file(ctx.path("train_report"));
    summary["training"] = {{"config", j.at("config")},
                           {"rounds_trained", j.at("rounds_trained")},
                           {"best_round", j.at("best_round")},
                           {"stop_reason", j.at("stop_reason")}};
  }
  if (ctx.has("metrics")) summary["metrics"] = read_json_file(ctx.path("metrics"));
  if (ctx.has("agreement")) summary["agreement"] = read_json_file(ctx.path("agreement"));
  if (ctx.has("affect")) {
    const auto doc = io::read_csv(ctx.path("affect"));
    json arr = json::array();
    for (const auto& row : doc.rows) {
      json cell = json::object();
      for (std::size_t c = 0; c < doc.header.size(); ++c) {
        auto v = io::parse_double(row[c]);
        cell[doc.header[c]] = v ? json(*v) : json(row[c]);
      }
      arr.push_back(cell);
    }
    summary["affect"] = arr;
  }

  auto placeholder = [&](std::string_view what) {
    return svg::forest({}, title + ": no " + std::string(what) + " input");
  };
  ctx.write("report.json", summary.dump(2) + "\n");
  ctx.write("forest.svg", forest_svg.empty() ? placeholder("beta") : forest_svg);
  ctx.write("beeswarm.svg", beeswarm_svg.empty() ? placeholder("beeswarm") : beeswarm_svg);
  ctx.write("quadrant.svg", quadrant_svg.empty() ? placeholder("quadrant") : quadrant_svg);
}

using CommandFn = void (*)(Context&);

CommandFn dispatch(std::string_view name) {
  static const std::map<std::string, CommandFn, std::less<>> table = {
      {"ingest", cmd_ingest},       {"train", cmd_train},       {"explain", cmd_explain},
      {"aggregate", cmd_aggregate}, {"interact", cmd_interact}, {"affect", cmd_affect},
      {"validate", cmd_validate},   {"simulate", cmd_simulate}, {"annotate", cmd_annotate},
      {"flatten", cmd_flatten},     {"report", cmd_report}};
  return table.at(std::string(name));
}

std::string flag_name(const std::string& key) {
  std::string f = "--" + key;
  std::replace(f.begin(), f.end(), '_', '-');
  return f;
}

// Under --strict every input that sits next to a manifest listing it as an
// output must still hash to the recorded value.
void check_upstream(const json& inputs) {
  for (const auto& [key, entry] : inputs.items()) {
    const fs::path p(entry.at("path").get<std::string>());
    const auto manifest_path = p.parent_path() / kManifestName;
    if (!fs::exists(manifest_path) || p.filename() == kManifestName) continue;
    const auto m = read_json_file(manifest_path);
    const auto outs = m.value("outputs", json::object());
    const auto name = p.filename().string();
    if (!outs.contains(name)) continue;
    const auto recorded = outs[name].at("sha256").get<std::string>();
    if (recorded != entry.at("sha256").get<std::string>()) {
      throw StaleArtifactError(p.string() + " no longer matches " + manifest_path.string() +
                               " (recorded " + recorded.substr(0, 12) + ", found " +
                               entry.at("sha256").get<std::string>().substr(0, 12) + ")");
    }
  }
}

}  // namespace

const std::vector<CommandSpec>& commands() {
  static const std::vector<CommandSpec> specs = build_specs();
  return specs;
}

const CommandSpec& command(std::string_view name) {
  for (const auto& c : commands()) {
    if (c.name == name) return c;
  }
  throw ConfigError("unknown command '" + std::string(name) + "'");
}

json resolve_config(std::string_view name, const json& given) {
  const auto& spec = command(name);
  if (!given.is_object() && !given.is_null()) throw ConfigError("config must be a JSON object");
  json cfg = json::object();
  std::set<std::string> known;
  for (const auto& o : spec.options) {
    known.insert(o.key);
    json v = given.is_object() && given.contains(o.key) ? given[o.key] : o.default_value;
    if (v.is_null()) {
      if (o.required) throw ConfigError(std::string(name) + ": missing required option " + flag_name(o.key));
      cfg[o.key] = nullptr;
      continue;
    }
    switch (o.type) {
      case OptionType::path:
        if (!v.is_string()) throw ConfigError(flag_name(o.key) + " must be a path string");
        v = fs::absolute(fs::path(v.get<std::string>())).lexically_normal().string();
        break;
      case OptionType::string:
        if (!v.is_string()) throw ConfigError(flag_name(o.key) + " must be a string");
        break;
      case OptionType::integer:
        if (!v.is_number_integer()) throw ConfigError(flag_name(o.key) + " must be an integer");
        break;
      case OptionType::number:
        if (!v.is_number()) throw ConfigError(flag_name(o.key) + " must be a number");
        v = v.get<double>();
        break;
      case OptionType::flag:
        if (!v.is_boolean()) throw ConfigError(flag_name(o.key) + " must be true or false");
        break;
    }
    cfg[o.key] = v;
  }
  if (given.is_object()) {
    for (const auto& [k, v] : given.items()) {
      if (!known.count(k)) throw ConfigError(std::string(name) + ": unknown option " + flag_name(k));
    }
  }
  return cfg;
}

RunResult run(std::string_view name, const json& config) {
  const auto& spec = command(name);
  const auto t0 = std::chrono::steady_clock::now();
  json cfg = resolve_config(name, config);
  if (spec.name == "aggregate" && cfg["shap_header"].is_null()) {
    cfg["shap_header"] = (fs::path(cfg["shap"].get<std::string>()).parent_path() / "shap_header.json").string();
  }
  Context ctx(spec, std::move(cfg));

  ctx.inputs = json::object();
  for (const auto& o : spec.options) {
    if (!o.input || !ctx.has(o.key)) continue;
    const fs::path p = ctx.path(o.key);
    if (!fs::exists(p)) {
      if (o.key == "schema") throw SchemaError("schema file not found: " + p.string());
      throw IoError(flag_name(o.key) + " file not found: " + p.string());
    }
    ctx.inputs[o.key] = {{"path", p.string()}, {"sha256", io::sha256_file(p)}};
  }
  if (ctx.flag("strict")) check_upstream(ctx.inputs);

  dispatch(name)(ctx);

  json manifest = {
      {"format", kManifestFormat},
      {"tool", {{"name", "modal_attrib"}, {"version", kVersion}}},
      {"command", spec.name},
      {"config", ctx.cfg()},
      {"seed", ctx.cfg().contains("seed") ? ctx.cfg()["seed"] : json(nullptr)},
      {"inputs", ctx.inputs},
      {"outputs", ctx.outputs()},
      {"threads_used", ctx.threads()},
      {"timings", ctx.timings()},
  };
  manifest["timings"]["total_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  io::write_file(ctx.out() / kManifestName, manifest.dump(2) + "\n");
  return {manifest, ctx.out()};
}

RunResult rerun(const fs::path& manifest_path, const std::optional<fs::path>& out_dir, bool check) {
  const json recorded = read_json_file(manifest_path);
  if (recorded.value("format", "") != kManifestFormat) {
    throw ParseError(manifest_path.string() + " is not a modal_attrib manifest");
  }
  for (const auto& [key, entry] : recorded.at("inputs").items()) {
    const fs::path p(entry.at("path").get<std::string>());
    if (!fs::exists(p)) throw StaleArtifactError("input " + p.string() + " no longer exists");
    if (io::sha256_file(p) != entry.at("sha256").get<std::string>()) {
      throw StaleArtifactError("input " + p.string() + " changed since the manifest was written");
    }
  }
  json config = recorded.at("config");
  if (out_dir) config["out"] = out_dir->string();
  const auto name = recorded.at("command").get<std::string>();
  auto result = run(name, config);
  if (check) {
    const auto& before = recorded.at("outputs");
    const auto& after = result.manifest.at("outputs");
    std::vector<std::string> changed;
    for (const auto& [file, entry] : before.items()) {
      if (!after.contains(file) || after[file].at("sha256") != entry.at("sha256")) changed.push_back(file);
    }
    if (!changed.empty()) {
      std::string list;
      for (const auto& f : changed) list += (list.empty() ? "" : ", ") + f;
      throw StaleArtifactError("rerun produced different outputs: " + list);
    }
  }
  return result;
}

}  // namespace modal_attrib::pipeline

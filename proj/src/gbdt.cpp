#include "modal_attrib/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "modal_attrib/errors.hpp"

namespace modal_attrib {

using nlohmann::json;

void BoostConfig::validate() const {
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be > 0");
  }
  if (max_depth < 1) throw ConfigError("max_depth must be >= 1");
  if (min_samples_leaf < 1) throw ConfigError("min_samples_leaf must be >= 1");
  if (early_stop_eval_every.has_value() != early_stop_patience_evals.has_value()) {
    throw ConfigError("early stopping needs both eval_every and patience_evals");
  }
  if (early_stop_eval_every && *early_stop_eval_every < 1) {
    throw ConfigError("early_stop_eval_every must be >= 1");
  }
  if (early_stop_patience_evals && *early_stop_patience_evals < 1) {
    throw ConfigError("early_stop_patience_evals must be >= 1");
  }
}

BoostConfig BoostConfig::within() {
  BoostConfig c;
  c.iterations = 1000;
  c.learning_rate = 0.1;
  c.max_depth = 6;
  return c;
}

BoostConfig BoostConfig::cross() {
  BoostConfig c;
  c.iterations = 10000;
  c.learning_rate = 0.3;
  c.max_depth = 6;
  c.early_stop_eval_every = 1000;
  c.early_stop_patience_evals = 1;
  return c;
}

BoostConfig BoostConfig::preset(std::string_view name) {
  if (name == "within") return within();
  if (name == "cross") return cross();
  throw ConfigError("unknown preset '" + std::string(name) + "' (expected within or cross)");
}

int Tree::depth() const {
  // Nodes are stored parent-before-child, so one forward pass suffices.
  std::vector<int> d(nodes.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, d[i]);
    if (!nodes[i].is_leaf()) {
      d[nodes[i].left] = d[i] + 1;
      d[nodes[i].right] = d[i] + 1;
    }
  }
  return deepest;
}

namespace {

double rmse_of(std::span<const double> pred, std::span<const double> y,
               std::span<const std::size_t> rows) {
  if (rows.empty()) return 0.0;
  double sse = 0.0;
  for (auto r : rows) {
    const double e = y[r] - pred[r];
    sse += e * e;
  }
  return std::sqrt(sse / static_cast<double>(rows.size()));
}

struct NodeStats {
  std::size_t count = 0;
  double sum = 0.0;
  double sumsq = 0.0;
};

struct SplitCandidate {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

// Grows one exact-greedy variance-reduction tree on `residual` over the
// training rows. Returns a single leaf when no admissible split exists.
class TreeGrower {
 public:
  TreeGrower(const std::vector<std::vector<double>>& columns,
             const std::vector<std::vector<std::uint32_t>>& sorted, const BoostConfig& config)
      : columns_(columns), sorted_(sorted), config_(config) {}

  Tree grow(const std::vector<double>& residual) {
    const std::size_t n = residual.size();
    const std::size_t p = columns_.size();
    Tree tree;
    tree.nodes.emplace_back();
    node_of_.assign(n, 0);

    NodeStats root;
    for (double r : residual) {
      ++root.count;
      root.sum += r;
      root.sumsq += r * r;
    }
    std::vector<NodeStats> stats{root};
    std::vector<int> frontier{0};
    const auto min_leaf = static_cast<std::size_t>(config_.min_samples_leaf);

    for (int depth = 0; depth < config_.max_depth && !frontier.empty(); ++depth) {
      // slot_of maps node id -> position in this level's frontier.
      std::vector<int> slot_of(tree.nodes.size(), -1);
      std::vector<int> active;
      for (int node : frontier) {
        if (stats[node].count >= 2 * min_leaf) {
          slot_of[node] = static_cast<int>(active.size());
          active.push_back(node);
        }
      }
      if (active.empty()) break;

      const std::size_t k = active.size();
      std::vector<SplitCandidate> best(k);
      std::vector<std::size_t> cnt(k);
      std::vector<double> sum(k);
      std::vector<double> last(k);

      for (std::size_t f = 0; f < p; ++f) {
        std::fill(cnt.begin(), cnt.end(), 0);
        std::fill(sum.begin(), sum.end(), 0.0);
        const auto& col = columns_[f];
        for (std::uint32_t i : sorted_[f]) {
          const int slot = slot_of[node_of_[i]];
          if (slot < 0) continue;
          const double v = col[i];
          const std::size_t c = cnt[slot];
          if (c > 0 && v > last[slot]) {
            const NodeStats& s = stats[active[slot]];
            const std::size_t right = s.count - c;
            if (c >= min_leaf && right >= min_leaf) {
              const double sl = sum[slot];
              const double sr = s.sum - sl;
              const double gain = sl * sl / static_cast<double>(c) +
                                  sr * sr / static_cast<double>(right) -
                                  s.sum * s.sum / static_cast<double>(s.count);
              if (gain > best[slot].gain) {
                double mid = last[slot] + (v - last[slot]) / 2.0;
                if (!(mid < v)) mid = last[slot];
                best[slot] = SplitCandidate{gain, static_cast<int>(f), mid};
              }
            }
          }
          cnt[slot] = c + 1;
          sum[slot] += residual[i];
          last[slot] = v;
        }
      }

      std::vector<int> next;
      std::vector<int> split_slot(tree.nodes.size(), -1);
      for (std::size_t s = 0; s < k; ++s) {
        const int node = active[s];
        const NodeStats& st = stats[node];
        // Splits whose gain is at rounding level carry no information.
        if (best[s].feature < 0 || !(best[s].gain > 1e-12 * st.sumsq)) continue;
        const int left = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        stats.resize(tree.nodes.size());
        auto& parent = tree.nodes[node];
        parent.feature = best[s].feature;
        parent.threshold = best[s].threshold;
        parent.left = left;
        parent.right = left + 1;
        next.push_back(left);
        next.push_back(left + 1);
        split_slot[node] = static_cast<int>(s);
      }
      if (next.empty()) break;

      for (int node : next) stats[node] = NodeStats{};
      for (std::size_t i = 0; i < n; ++i) {
        const int node = node_of_[i];
        if (node >= static_cast<int>(split_slot.size()) || split_slot[node] < 0) continue;
        const auto& parent = tree.nodes[node];
        const int child = columns_[parent.feature][i] <= parent.threshold ? parent.left : parent.right;
        node_of_[i] = child;
        auto& cs = stats[child];
        ++cs.count;
        cs.sum += residual[i];
        cs.sumsq += residual[i] * residual[i];
      }
      frontier = std::move(next);
    }

    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      if (tree.nodes[i].is_leaf()) {
        const auto& st = stats[i];
        tree.nodes[i].value = st.count ? st.sum / static_cast<double>(st.count) : 0.0;
      }
    }
    return tree;
  }

  // Leaf index reached by each training row in the last grown tree.
  const std::vector<int>& node_of() const noexcept { return node_of_; }

 private:
  const std::vector<std::vector<double>>& columns_;
  const std::vector<std::vector<std::uint32_t>>& sorted_;
  const BoostConfig& config_;
  std::vector<int> node_of_;
};

}  // namespace

TrainResult train(const Matrix& x, std::span<const double> y,
                  std::span<const std::size_t> train_rows, std::span<const std::size_t> test_rows,
                  const BoostConfig& config, std::vector<std::string> feature_names) {
  config.validate();
  if (train_rows.empty()) throw ConfigError("training partition is empty");
  if (x.cols() == 0) throw ConfigError("training needs at least one feature");
  if (feature_names.size() != x.cols()) throw SchemaError("feature name count mismatch");
  if (y.size() != x.rows()) throw SchemaError("target length does not match rows");
  if (config.early_stopping() && test_rows.empty()) {
    throw ConfigError("early stopping needs a non-empty test partition");
  }

  const std::size_t n = train_rows.size();
  const std::size_t p = x.cols();

  std::vector<std::vector<double>> columns(p, std::vector<double>(n));
  std::vector<double> y_train(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = x.row(train_rows[i]);
    for (std::size_t f = 0; f < p; ++f) columns[f][i] = row[f];
    y_train[i] = y[train_rows[i]];
  }
  std::vector<std::vector<std::uint32_t>> sorted(p, std::vector<std::uint32_t>(n));
  for (std::size_t f = 0; f < p; ++f) {
    auto& order = sorted[f];
    std::iota(order.begin(), order.end(), 0u);
    const auto& col = columns[f];
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return col[a] < col[b]; });
  }

  BoostedModel model;
  model.base_score = std::accumulate(y_train.begin(), y_train.end(), 0.0) / static_cast<double>(n);
  model.learning_rate = config.learning_rate;
  model.schema_fingerprint = fingerprint_names(feature_names);
  model.feature_names = std::move(feature_names);

  TrainReport report;
  report.config = config;
  report.n_train = n;
  report.n_test = test_rows.size();

  std::vector<double> pred_train(n, model.base_score);
  std::vector<double> pred_test(test_rows.size(), model.base_score);
  std::vector<double> y_test(test_rows.size());
  for (std::size_t i = 0; i < test_rows.size(); ++i) y_test[i] = y[test_rows[i]];

  std::vector<std::size_t> all_train(n), all_test(test_rows.size());
  std::iota(all_train.begin(), all_train.end(), std::size_t{0});
  std::iota(all_test.begin(), all_test.end(), std::size_t{0});

  report.train_rmse.push_back(rmse_of(pred_train, y_train, all_train));
  report.test_rmse.push_back(rmse_of(pred_test, y_test, all_test));

  TreeGrower grower(columns, sorted, config);
  std::vector<double> residual(n);
  double best_test = std::numeric_limits<double>::infinity();
  int best_round = 0;
  int evals_without_improvement = 0;
  report.stop_reason = "iterations";

  auto record_eval = [&](int round) {
    const double test = report.test_rmse.back();
    report.evaluations.push_back(EvalPoint{round, report.train_rmse.back(), test});
    if (test < best_test) {
      best_test = test;
      best_round = round;
      evals_without_improvement = 0;
    } else {
      ++evals_without_improvement;
    }
  };

  for (int round = 1; round <= config.iterations; ++round) {
    for (std::size_t i = 0; i < n; ++i) residual[i] = y_train[i] - pred_train[i];
    Tree tree = grower.grow(residual);
    if (tree.nodes.size() == 1) {
      // Leaf means keep the residual sum at zero, so a split-free tree is a
      // no-op now and forever after.
      report.stop_reason = "no_split";
      break;
    }
    const auto& leaf_of = grower.node_of();
    for (std::size_t i = 0; i < n; ++i) {
      pred_train[i] += config.learning_rate * tree.nodes[leaf_of[i]].value;
    }
    for (std::size_t i = 0; i < test_rows.size(); ++i) {
      pred_test[i] += config.learning_rate * tree.evaluate(x.row(test_rows[i]));
    }
    model.trees.push_back(std::move(tree));
    report.rounds_trained = round;
    report.train_rmse.push_back(rmse_of(pred_train, y_train, all_train));
    report.test_rmse.push_back(rmse_of(pred_test, y_test, all_test));

    if (config.early_stopping() && round % *config.early_stop_eval_every == 0) {
      record_eval(round);
      if (evals_without_improvement >= *config.early_stop_patience_evals) {
        report.stop_reason = "early_stopping";
        break;
      }
    }
  }

  if (config.early_stopping()) {
    if (report.rounds_trained > 0 &&
        (report.evaluations.empty() || report.evaluations.back().round != report.rounds_trained)) {
      record_eval(report.rounds_trained);
    }
    model.trees.resize(static_cast<std::size_t>(best_round));
    report.best_round = best_round;
  } else {
    report.best_round = report.rounds_trained;
  }
  return TrainResult{std::move(model), std::move(report)};
}

TrainResult train(const FeatureTable& table, const SplitIndex& split, const BoostConfig& config) {
  return train(table.values(), table.target(), split.train_rows, split.test_rows, config,
               table.schema().names());
}

std::vector<double> predict(const BoostedModel& model, const Matrix& rows) {
  if (rows.cols() != model.n_features()) {
    throw SchemaError("rows have " + std::to_string(rows.cols()) + " columns, model expects " +
                      std::to_string(model.n_features()));
  }
  std::vector<double> out(rows.rows());
  for (std::size_t r = 0; r < rows.rows(); ++r) out[r] = model.predict_row(rows.row(r));
  return out;
}

Metrics score(std::span<const double> predicted, std::span<const double> actual) {
  if (predicted.size() != actual.size() || actual.empty()) {
    throw ConfigError("score needs equal-length non-empty vectors");
  }
  const double n = static_cast<double>(actual.size());
  const double mean = std::accumulate(actual.begin(), actual.end(), 0.0) / n;
  double sse = 0.0;
  double sst = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    sse += (actual[i] - predicted[i]) * (actual[i] - predicted[i]);
    sst += (actual[i] - mean) * (actual[i] - mean);
  }
  Metrics m;
  m.rmse = std::sqrt(sse / n);
  m.r2 = sst > 0.0 ? 1.0 - sse / sst : (sse == 0.0 ? 1.0 : 0.0);
  return m;
}

Metrics evaluate(const BoostedModel& model, const FeatureTable& table,
                 std::span<const std::size_t> rows) {
  if (rows.empty()) throw ConfigError("evaluate needs at least one row");
  if (table.n_cols() != model.n_features()) {
    throw SchemaError("table has " + std::to_string(table.n_cols()) + " columns, model expects " +
                      std::to_string(model.n_features()));
  }
  std::vector<double> pred(rows.size()), actual(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    pred[i] = model.predict_row(table.values().row(rows[i]));
    actual[i] = table.target()[rows[i]];
  }
  return score(pred, actual);
}

// ---------------------------------------------------------------------------
// JSON

namespace {

json config_json(const BoostConfig& c) {
  json j = {{"iterations", c.iterations},
            {"learning_rate", c.learning_rate},
            {"max_depth", c.max_depth},
            {"min_samples_leaf", c.min_samples_leaf},
            {"seed", c.seed}};
  j["early_stop_eval_every"] = c.early_stop_eval_every ? json(*c.early_stop_eval_every) : json(nullptr);
  j["early_stop_patience_evals"] =
      c.early_stop_patience_evals ? json(*c.early_stop_patience_evals) : json(nullptr);
  return j;
}

}  // namespace

std::string config_to_json(const BoostConfig& config) { return config_json(config).dump(); }

std::string model_to_json(const BoostedModel& model) {
  json trees = json::array();
  for (const auto& t : model.trees) {
    json nodes = json::array();
    for (const auto& n : t.nodes) {
      if (n.is_leaf()) {
        nodes.push_back({{"leaf", n.value}});
      } else {
        nodes.push_back(
            {{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right}});
      }
    }
    trees.push_back({{"nodes", std::move(nodes)}});
  }
  json doc = {{"format", "modal_attrib.gbdt/1"},
              {"base_score", model.base_score},
              {"learning_rate", model.learning_rate},
              {"schema_fingerprint", model.schema_fingerprint},
              {"features", model.feature_names},
              {"trees", std::move(trees)}};
  return doc.dump() + "\n";
}

BoostedModel model_from_json(std::string_view text) {
  BoostedModel model;
  try {
    const json doc = json::parse(text);
    model.base_score = doc.at("base_score").get<double>();
    model.learning_rate = doc.at("learning_rate").get<double>();
    model.feature_names = doc.at("features").get<std::vector<std::string>>();
    model.schema_fingerprint = doc.at("schema_fingerprint").get<std::string>();
    for (const auto& t : doc.at("trees")) {
      Tree tree;
      for (const auto& n : t.at("nodes")) {
        TreeNode node;
        if (n.contains("leaf")) {
          node.value = n.at("leaf").get<double>();
        } else {
          node.feature = n.at("feature").get<int>();
          node.threshold = n.at("threshold").get<double>();
          node.left = n.at("left").get<int>();
          node.right = n.at("right").get<int>();
        }
        tree.nodes.push_back(node);
      }
      model.trees.push_back(std::move(tree));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed model JSON: ") + e.what());
  }
  if (model.schema_fingerprint != fingerprint_names(model.feature_names)) {
    throw SchemaError("model schema fingerprint does not match its feature list");
  }
  const int p = static_cast<int>(model.feature_names.size());
  for (const auto& t : model.trees) {
    const int size = static_cast<int>(t.nodes.size());
    if (size == 0) throw ParseError("model contains an empty tree");
    for (int i = 0; i < size; ++i) {
      const auto& n = t.nodes[i];
      if (n.is_leaf()) continue;
      if (n.feature >= p || n.left <= i || n.right <= i || n.left >= size || n.right >= size) {
        throw ParseError("model tree node " + std::to_string(i) + " is malformed");
      }
    }
  }
  return model;
}

std::string train_report_to_json(const TrainReport& report) {
  json evals = json::array();
  for (const auto& e : report.evaluations) {
    evals.push_back({{"round", e.round}, {"train_rmse", e.train_rmse}, {"test_rmse", e.test_rmse}});
  }
  json doc = {{"config", config_json(report.config)},
              {"rounds_trained", report.rounds_trained},
              {"best_round", report.best_round},
              {"stop_reason", report.stop_reason},
              {"n_train", report.n_train},
              {"n_test", report.n_test},
              {"evaluations", std::move(evals)},
              {"train_rmse", report.train_rmse},
              {"test_rmse", report.test_rmse}};
  return doc.dump(2) + "\n";
}

}  // namespace modal_attrib

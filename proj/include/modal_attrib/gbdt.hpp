#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "modal_attrib/matrix.hpp"
#include "modal_attrib/table.hpp"

namespace modal_attrib {

struct BoostConfig {
  int iterations = 1000;
  double learning_rate = 0.1;
  int max_depth = 6;
  int min_samples_leaf = 20;
  std::optional<int> early_stop_eval_every;
  std::optional<int> early_stop_patience_evals;
  std::uint64_t seed = 0;

  // ConfigError on any violated bound.
  void validate() const;
  bool early_stopping() const noexcept { return early_stop_eval_every.has_value(); }

  // 1000 rounds, lr 0.1, depth 6, no early stopping.
  static BoostConfig within();
  // Up to 10000 rounds, lr 0.3, depth 6, test RMSE checked every 1000 rounds
  // with patience 1.
  static BoostConfig cross();
  static BoostConfig preset(std::string_view name);

  bool operator==(const BoostConfig&) const = default;
};

// Flat binary regression tree node. Internal nodes send x[feature] <=
// threshold to `left`; leaves carry `value` in target units.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;

  bool is_leaf() const noexcept { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double evaluate(std::span<const double> x) const {
    int i = 0;
    while (!nodes[i].is_leaf()) {
      const auto& n = nodes[i];
      i = x[n.feature] <= n.threshold ? n.left : n.right;
    }
    return nodes[i].value;
  }
  int depth() const;
  bool operator==(const Tree&) const = default;
};

// predict(x) = base_score + learning_rate * sum_t tree_t(x).
struct BoostedModel {
  double base_score = 0.0;
  double learning_rate = 1.0;
  std::vector<std::string> feature_names;
  std::string schema_fingerprint;
  std::vector<Tree> trees;

  std::size_t n_features() const noexcept { return feature_names.size(); }

  double predict_row(std::span<const double> x) const {
    double sum = 0.0;
    for (const auto& t : trees) sum += t.evaluate(x);
    return base_score + learning_rate * sum;
  }

  bool operator==(const BoostedModel&) const = default;
};

struct EvalPoint {
  int round = 0;
  double train_rmse = 0.0;
  double test_rmse = 0.0;
};

struct TrainReport {
  BoostConfig config;
  int rounds_trained = 0;  // trees grown before stopping
  int best_round = 0;      // trees kept in the returned model
  // RMSE after each round; index 0 is the base-score-only model.
  std::vector<double> train_rmse;
  std::vector<double> test_rmse;
  std::vector<EvalPoint> evaluations;
  std::string stop_reason;  // "iterations", "early_stopping" or "no_split"
  std::size_t n_train = 0;
  std::size_t n_test = 0;
};

struct TrainResult {
  BoostedModel model;
  TrainReport report;
};

TrainResult train(const Matrix& x, std::span<const double> y,
                  std::span<const std::size_t> train_rows, std::span<const std::size_t> test_rows,
                  const BoostConfig& config, std::vector<std::string> feature_names);
TrainResult train(const FeatureTable& table, const SplitIndex& split, const BoostConfig& config);

// SchemaError when the column count differs from the model's.
std::vector<double> predict(const BoostedModel& model, const Matrix& rows);

struct Metrics {
  double rmse = 0.0;
  double r2 = 0.0;
};

// r2 is 1 - SSE/SST; a constant target gives r2 = 1 for a perfect fit and 0
// otherwise.
Metrics evaluate(const BoostedModel& model, const FeatureTable& table,
                 std::span<const std::size_t> rows);
Metrics score(std::span<const double> predicted, std::span<const double> actual);

std::string model_to_json(const BoostedModel& model);
BoostedModel model_from_json(std::string_view text);
std::string config_to_json(const BoostConfig& config);
std::string train_report_to_json(const TrainReport& report);

}  // namespace modal_attrib

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "modal_attrib/gbdt.hpp"
#include "modal_attrib/matrix.hpp"
#include "modal_attrib/table.hpp"

namespace modal_attrib {

// Reference rows over which absent features are marginalized.
struct Background {
  Matrix rows;
  std::uint64_t seed = 0;
};

// Samples up to `size` training rows without replacement (all of them, in
// order, when size >= train_rows.size()).
Background sample_background(const FeatureTable& table, std::span<const std::size_t> train_rows,
                             std::size_t size, std::uint64_t seed);

struct ShapResult {
  double base_value = 0.0;
  Matrix phi;  // n x p, target units
  std::vector<std::string> row_ids;
  std::vector<std::string> feature_names;
};

// n x p x p interaction values; diagonal entries are main effects.
struct InteractionTensor {
  double base_value = 0.0;
  std::size_t n = 0;
  std::size_t p = 0;
  std::vector<double> values;
  std::vector<std::string> row_ids;
  std::vector<std::string> feature_names;

  double at(std::size_t row, std::size_t i, std::size_t j) const {
    return values[(row * p + i) * p + j];
  }
  std::span<const double> row(std::size_t r) const { return {values.data() + r * p * p, p * p}; }
  // Row sums: the per-feature SHAP values implied by the tensor.
  Matrix main_attributions() const;
};

struct ShapOptions {
  std::size_t threads = 0;  // 0 = default_threads()
  std::size_t max_interaction_features = 200;
  // Called after each finished row block with (rows_done, rows_total).
  std::function<void(std::size_t, std::size_t)> progress;
};

// Exact interventional Shapley values: v(S) averages the model over
// background rows with features outside S taken from the background row.
ShapResult shap_values(const BoostedModel& model, const Matrix& rows, const Background& background,
                       std::vector<std::string> row_ids = {}, const ShapOptions& options = {});

// Exact interventional SHAP interaction values (half the Shapley interaction
// index off the diagonal, phi_i - sum_{j != i} phi_ij on it).
InteractionTensor shap_interactions(const BoostedModel& model, const Matrix& rows,
                                    const Background& background,
                                    std::vector<std::string> row_ids = {},
                                    const ShapOptions& options = {});

// Mean model output over the background rows.
double background_mean(const BoostedModel& model, const Background& background);

// Oracles: literal subset enumeration of the same value function. ConfigError
// when p > 20.
std::vector<double> brute_force_shap(const BoostedModel& model, std::span<const double> row,
                                     const Background& background);
Matrix brute_force_interactions(const BoostedModel& model, std::span<const double> row,
                                const Background& background);

// Long-format exports.
std::string shap_to_csv(const ShapResult& result);
std::string shap_header_json(const ShapResult& result, std::size_t background_size,
                             std::uint64_t seed);
std::string interactions_to_csv(const InteractionTensor& tensor);

ShapResult read_shap(const std::filesystem::path& csv_path, const std::filesystem::path& header_path);
InteractionTensor read_interactions(const std::filesystem::path& csv_path, double base_value = 0.0);

}  // namespace modal_attrib

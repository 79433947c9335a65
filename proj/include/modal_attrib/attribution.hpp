#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "modal_attrib/shap.hpp"
#include "modal_attrib/table.hpp"

namespace modal_attrib {

// half: x/100 - 0.5. mean: z-score of x/100 over the explained rows.
// median: x/100 minus its median.
enum class Centering { half, mean, median };
enum class Normalization { mean, sum };

std::string_view to_string(Centering c);
std::string_view to_string(Normalization n);
Centering parse_centering(std::string_view s);
Normalization parse_normalization(std::string_view s);

struct FeatureBeta {
  std::string feature;
  Modality modality = Modality::meta;
  double beta_shap = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double mean_abs_phi = 0.0;
  std::size_t n = 0;

  bool operator==(const FeatureBeta&) const = default;
};

struct BetaOptions {
  Centering centering = Centering::half;
  Normalization normalization = Normalization::mean;
  std::size_t bootstrap_resamples = 1000;  // 0 disables the interval
  double ci_level = 0.95;
  std::uint64_t seed = 0;
};

struct BetaSummary {
  std::vector<FeatureBeta> features;  // schema order
  BetaOptions options;
};

// Feature-weighted directional SHAP coefficient per feature:
// beta_i = sum_k w(x_ki) * phi_ki, divided by n under normalization=mean.
// SHAP rows are joined to table rows by row_id (JoinError on a missing id).
BetaSummary beta_shap(const ShapResult& shap, const FeatureTable& table,
                      const BetaOptions& options = {});

// Centered weights for one column of 0-100 values.
std::vector<double> centered_weights(std::span<const double> values, Centering centering);

struct RankedGroup {
  std::optional<Modality> modality;  // nullopt when not grouped
  std::vector<FeatureBeta> positive;  // beta > 0, strongest first
  std::vector<FeatureBeta> negative;  // beta < 0, most negative first
  std::vector<FeatureBeta> ordered;   // every feature, beta descending
};

// Ties on beta break by larger mean |phi|, then by name.
std::vector<RankedGroup> importance_ranking(const BetaSummary& summary, std::size_t top_k_pos,
                                           std::size_t top_k_neg, bool group_by_modality);

struct BeeswarmRecord {
  std::string feature;
  std::string row_id;
  double phi = 0.0;
  double feature_value = 0.0;
  Modality modality = Modality::meta;
};

// Long-format plot data, features ordered by the full importance ordering and
// rows in SHAP row order. SchemaError on an unknown feature.
std::vector<BeeswarmRecord> beeswarm_export(const ShapResult& shap, const FeatureTable& table,
                                            const std::vector<std::string>& features,
                                            const BetaOptions& options = {});
std::string beeswarm_to_jsonl(const std::vector<BeeswarmRecord>& records);
std::vector<BeeswarmRecord> beeswarm_from_jsonl(std::string_view text);

// Re-aggregates beta per feature from beeswarm records (no interval).
std::vector<FeatureBeta> beta_from_beeswarm(const std::vector<BeeswarmRecord>& records,
                                            Centering centering, Normalization normalization);

std::string beta_summary_to_csv(const BetaSummary& summary);
std::string beta_summary_meta_json(const BetaSummary& summary);
std::vector<FeatureBeta> beta_summary_from_csv(std::string_view text);

}  // namespace modal_attrib

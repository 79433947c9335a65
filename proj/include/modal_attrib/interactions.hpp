#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "modal_attrib/shap.hpp"
#include "modal_attrib/table.hpp"

namespace modal_attrib {

// auto: 50 for probabilistic columns, the median otherwise.
enum class ThresholdMode { automatic, median, fixed50 };
// x_value: phi_xy ~ 1 + x/100; slope on x.
// centered_product: phi_xy ~ 1 + u + v + u*v with u = (x - x0)/100 and
// v = (y - y0)/100; slope is the u*v coefficient, a per-quadrant estimate of
// the mixed partial derivative.
enum class RegressorMode { x_value, centered_product };
enum class Pattern { x_threshold, y_threshold, symmetric_sign_change, none };
enum class QuadrantStatus { ok, insufficient, degenerate };

std::string_view to_string(ThresholdMode m);
std::string_view to_string(RegressorMode m);
std::string_view to_string(Pattern p);
std::string_view to_string(QuadrantStatus s);
ThresholdMode parse_threshold_mode(std::string_view s);
RegressorMode parse_regressor_mode(std::string_view s);
Pattern parse_pattern(std::string_view s);

// Quadrants are indexed 2 * (x > x0) + (y > y0):
// 0 = (-,-), 1 = (-,+), 2 = (+,-), 3 = (+,+). A value equal to its
// threshold falls on the "-" side.
constexpr std::array<std::string_view, 4> kQuadrantLabels{"(-,-)", "(-,+)", "(+,-)", "(+,+)"};

struct QuadrantFit {
  double beta = 0.0;  // NaN unless status == ok
  double intercept = 0.0;
  double r = 0.0;
  std::size_t n = 0;
  QuadrantStatus status = QuadrantStatus::insufficient;
};

struct QuadrantReport {
  std::string feature_x;
  std::string feature_y;
  double x0 = 0.0;
  double y0 = 0.0;
  std::array<QuadrantFit, 4> quadrants;
  Pattern pattern = Pattern::none;
  double tolerance = 0.0;
  RegressorMode regressor_mode = RegressorMode::x_value;
  ThresholdMode threshold_mode = ThresholdMode::automatic;

  // Betas in quadrant order, undefined slopes read as 0.
  std::array<double, 4> betas() const;
};

struct QuadrantOptions {
  ThresholdMode threshold_mode = ThresholdMode::automatic;
  RegressorMode regressor_mode = RegressorMode::x_value;
  double tolerance_fraction = 0.25;
  double tolerance_floor = 0.05;
  std::optional<double> tolerance;  // overrides fraction/floor when set
};

QuadrantReport quadrant_regression(const InteractionTensor& tensor, const FeatureTable& table,
                                   std::string_view feature_x, std::string_view feature_y,
                                   const QuadrantOptions& options = {});

// Pattern from the four quadrant slopes (quadrant order). ConfigError when
// tol <= 0.
Pattern classify_pattern(const std::array<double, 4>& betas, double tol);
double default_tolerance(const std::array<double, 4>& betas, double fraction = 0.25,
                         double floor = 0.05);

struct PairScore {
  std::string feature_i;
  std::string feature_j;
  double mean_abs = 0.0;
};

// Off-diagonal pairs by mean |phi_ij|, descending; ties by name pair. ConfigError when k < 1.
std::vector<PairScore> top_interacting_pairs(const InteractionTensor& tensor, std::size_t k);

struct ScatterPoint {
  std::string row_id;
  double x = 0.0;
  double phi_xy = 0.0;
  double y = 0.0;
};

std::vector<ScatterPoint> interaction_scatter(const InteractionTensor& tensor, const FeatureTable& table,
                                              std::string_view feature_x, std::string_view feature_y);

std::string quadrant_reports_to_csv(const std::vector<QuadrantReport>& reports);
std::string pattern_summary_json(const std::vector<QuadrantReport>& reports);
std::string scatter_to_jsonl(std::string_view feature_x, std::string_view feature_y,
                             const std::vector<ScatterPoint>& points);
std::vector<QuadrantReport> quadrant_reports_from_csv(std::string_view text);

}  // namespace modal_attrib

#include "modal_attrib/interactions.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <unordered_map>

#include <json.hpp>

#include "modal_attrib/errors.hpp"
#include "modal_attrib/io.hpp"

namespace modal_attrib {

std::string_view to_string(ThresholdMode m) {
  switch (m) {
    case ThresholdMode::automatic: return "auto";
    case ThresholdMode::median: return "median";
    case ThresholdMode::fixed50: return "fixed50";
  }
  return "auto";
}

std::string_view to_string(RegressorMode m) {
  return m == RegressorMode::x_value ? "x_value" : "centered_product";
}

std::string_view to_string(Pattern p) {
  switch (p) {
    case Pattern::x_threshold: return "x_threshold";
    case Pattern::y_threshold: return "y_threshold";
    case Pattern::symmetric_sign_change: return "symmetric_sign_change";
    case Pattern::none: return "none";
  }
  return "none";
}

std::string_view to_string(QuadrantStatus s) {
  switch (s) {
    case QuadrantStatus::ok: return "ok";
    case QuadrantStatus::insufficient: return "insufficient";
    case QuadrantStatus::degenerate: return "degenerate";
  }
  return "ok";
}

ThresholdMode parse_threshold_mode(std::string_view s) {
  if (s == "auto") return ThresholdMode::automatic;
  if (s == "median") return ThresholdMode::median;
  if (s == "fixed50") return ThresholdMode::fixed50;
  throw ConfigError("unknown threshold mode '" + std::string(s) + "'");
}

RegressorMode parse_regressor_mode(std::string_view s) {
  if (s == "x_value") return RegressorMode::x_value;
  if (s == "centered_product") return RegressorMode::centered_product;
  throw ConfigError("unknown regressor mode '" + std::string(s) + "'");
}

Pattern parse_pattern(std::string_view s) {
  if (s == "x_threshold") return Pattern::x_threshold;
  if (s == "y_threshold") return Pattern::y_threshold;
  if (s == "symmetric_sign_change" || s == "symmetric") return Pattern::symmetric_sign_change;
  if (s == "none") return Pattern::none;
  throw ConfigError("unknown pattern '" + std::string(s) + "'");
}

std::array<double, 4> QuadrantReport::betas() const {
  std::array<double, 4> out{};
  for (std::size_t q = 0; q < 4; ++q) {
    out[q] = quadrants[q].status == QuadrantStatus::ok ? quadrants[q].beta : 0.0;
  }
  return out;
}

double default_tolerance(const std::array<double, 4>& betas, double fraction, double floor) {
  double largest = 0.0;
  for (double b : betas) largest = std::max(largest, std::abs(b));
  return std::max(fraction * largest, floor);
}

Pattern classify_pattern(const std::array<double, 4>& betas, double tol) {
  if (!(tol > 0.0)) throw ConfigError("pattern tolerance must be > 0");
  const double mm = betas[0], mp = betas[1], pm = betas[2], pp = betas[3];
  auto small = [tol](double b) { return std::abs(b) < tol; };

  // Signs track the sign of (x - x0)(y - y0), up to one global flip.
  if (!small(mm) && !small(mp) && !small(pm) && !small(pp)) {
    const bool tracks = mm > 0 && pp > 0 && mp < 0 && pm < 0;
    const bool flipped = mm < 0 && pp < 0 && mp > 0 && pm > 0;
    if (tracks || flipped) return Pattern::symmetric_sign_change;
  }
  if (small(mm) && small(mp) && (!small(pm) || !small(pp)) && std::abs(pp - pm) > tol) {
    return Pattern::x_threshold;
  }
  if (small(pm) && small(pp) && (!small(mm) || !small(mp)) && std::abs(mp - mm) > tol) {
    return Pattern::y_threshold;
  }
  return Pattern::none;
}

namespace {

struct Joined {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> phi;
  std::vector<std::string> ids;
};

Joined join_pair(const InteractionTensor& tensor, const FeatureTable& table, std::string_view fx,
                 std::string_view fy, std::size_t* col_x = nullptr, std::size_t* col_y = nullptr) {
  auto tensor_index = [&](std::string_view f) {
    const auto it = std::find(tensor.feature_names.begin(), tensor.feature_names.end(), f);
    if (it == tensor.feature_names.end()) {
      throw SchemaError("feature '" + std::string(f) + "' is not in the interaction tensor");
    }
    return static_cast<std::size_t>(it - tensor.feature_names.begin());
  };
  const std::size_t ti = tensor_index(fx);
  const std::size_t tj = tensor_index(fy);
  if (ti == tj) throw ConfigError("quadrant analysis needs two distinct features");
  const std::size_t cx = table.schema().require_index(fx);
  const std::size_t cy = table.schema().require_index(fy);
  if (col_x) *col_x = cx;
  if (col_y) *col_y = cy;

  std::unordered_map<std::string, std::size_t> table_row;
  for (std::size_t r = 0; r < table.n_rows(); ++r) table_row.emplace(table.row_ids()[r], r);
  Joined j;
  for (std::size_t r = 0; r < tensor.n; ++r) {
    const auto it = table_row.find(tensor.row_ids[r]);
    if (it == table_row.end()) throw JoinError("tensor row '" + tensor.row_ids[r] + "' is not in the table");
    j.x.push_back(table.values()(it->second, cx));
    j.y.push_back(table.values()(it->second, cy));
    j.phi.push_back(tensor.at(r, ti, tj));
    j.ids.push_back(tensor.row_ids[r]);
  }
  return j;
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : v[mid - 1] + (v[mid] - v[mid - 1]) / 2.0;
}

double threshold_for(ThresholdMode mode, const ColumnSpec& spec, const std::vector<double>& values) {
  switch (mode) {
    case ThresholdMode::fixed50: return 50.0;
    case ThresholdMode::median: return median_of(values);
    case ThresholdMode::automatic:
      return spec.kind == ColumnKind::probabilistic ? 50.0 : median_of(values);
  }
  return 50.0;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

QuadrantFit fit_quadrant(const std::vector<double>& u, const std::vector<double>& v,
                         const std::vector<double>& phi, RegressorMode mode) {
  QuadrantFit fit;
  fit.n = phi.size();
  fit.beta = std::numeric_limits<double>::quiet_NaN();
  const std::size_t k = mode == RegressorMode::x_value ? 2 : 4;
  if (fit.n < std::max<std::size_t>(2, k)) {
    fit.status = QuadrantStatus::insufficient;
    return fit;
  }
  Eigen::MatrixXd design(fit.n, k);
  Eigen::VectorXd target(fit.n);
  std::vector<double> regressor(fit.n);
  for (std::size_t i = 0; i < fit.n; ++i) {
    design(i, 0) = 1.0;
    if (mode == RegressorMode::x_value) {
      design(i, 1) = u[i];
      regressor[i] = u[i];
    } else {
      design(i, 1) = u[i];
      design(i, 2) = v[i];
      design(i, 3) = u[i] * v[i];
      regressor[i] = u[i] * v[i];
    }
    target(i) = phi[i];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  if (qr.rank() < static_cast<Eigen::Index>(k)) {
    fit.status = QuadrantStatus::degenerate;
    return fit;
  }
  const Eigen::VectorXd coef = qr.solve(target);
  fit.status = QuadrantStatus::ok;
  fit.intercept = coef(0);
  fit.beta = coef(static_cast<Eigen::Index>(k) - 1);
  fit.r = pearson(regressor, phi);
  return fit;
}

}  // namespace

QuadrantReport quadrant_regression(const InteractionTensor& tensor, const FeatureTable& table,
                                   std::string_view feature_x, std::string_view feature_y,
                                   const QuadrantOptions& options) {
  std::size_t cx = 0, cy = 0;
  const Joined j = join_pair(tensor, table, feature_x, feature_y, &cx, &cy);

  QuadrantReport report;
  report.feature_x = std::string(feature_x);
  report.feature_y = std::string(feature_y);
  report.regressor_mode = options.regressor_mode;
  report.threshold_mode = options.threshold_mode;
  report.x0 = threshold_for(options.threshold_mode, table.schema().columns[cx], j.x);
  report.y0 = threshold_for(options.threshold_mode, table.schema().columns[cy], j.y);

  std::array<std::vector<double>, 4> u, v, phi;
  for (std::size_t i = 0; i < j.phi.size(); ++i) {
    const std::size_t q = 2 * (j.x[i] > report.x0 ? 1 : 0) + (j.y[i] > report.y0 ? 1 : 0);
    if (options.regressor_mode == RegressorMode::x_value) {
      u[q].push_back(j.x[i] / 100.0);
    } else {
      u[q].push_back((j.x[i] - report.x0) / 100.0);
    }
    v[q].push_back((j.y[i] - report.y0) / 100.0);
    phi[q].push_back(j.phi[i]);
  }
  for (std::size_t q = 0; q < 4; ++q) {
    report.quadrants[q] = fit_quadrant(u[q], v[q], phi[q], options.regressor_mode);
  }
  const auto betas = report.betas();
  report.tolerance = options.tolerance.value_or(
      default_tolerance(betas, options.tolerance_fraction, options.tolerance_floor));
  report.pattern = classify_pattern(betas, report.tolerance);
  return report;
}

std::vector<PairScore> top_interacting_pairs(const InteractionTensor& tensor, std::size_t k) {
  if (k < 1) throw ConfigError("top_interacting_pairs needs k >= 1");
  std::vector<PairScore> scores;
  for (std::size_t i = 0; i < tensor.p; ++i) {
    for (std::size_t j = i + 1; j < tensor.p; ++j) {
      double sum = 0.0;
      for (std::size_t r = 0; r < tensor.n; ++r) sum += std::abs(tensor.at(r, i, j));
      scores.push_back(PairScore{tensor.feature_names[i], tensor.feature_names[j],
                                 tensor.n ? sum / static_cast<double>(tensor.n) : 0.0});
    }
  }
  std::sort(scores.begin(), scores.end(), [](const PairScore& a, const PairScore& b) {
    if (a.mean_abs != b.mean_abs) return a.mean_abs > b.mean_abs;
    if (a.feature_i != b.feature_i) return a.feature_i < b.feature_i;
    return a.feature_j < b.feature_j;
  });
  if (scores.size() > k) scores.resize(k);
  return scores;
}

std::vector<ScatterPoint> interaction_scatter(const InteractionTensor& tensor, const FeatureTable& table,
                                              std::string_view feature_x, std::string_view feature_y) {
  const Joined j = join_pair(tensor, table, feature_x, feature_y);
  std::vector<ScatterPoint> out;
  out.reserve(j.phi.size());
  for (std::size_t i = 0; i < j.phi.size(); ++i) out.push_back(ScatterPoint{j.ids[i], j.x[i], j.phi[i], j.y[i]});
  return out;
}

std::string quadrant_reports_to_csv(const std::vector<QuadrantReport>& reports) {
  std::string out = "feature_x,feature_y,quadrant,x0,y0,beta,intercept,r,n,status,regressor_mode,threshold_mode\n";
  for (const auto& rep : reports) {
    for (std::size_t q = 0; q < 4; ++q) {
      const auto& fit = rep.quadrants[q];
      const bool ok = fit.status == QuadrantStatus::ok;
      out += io::csv_line({rep.feature_x, rep.feature_y, std::string(kQuadrantLabels[q]),
                           io::format_double(rep.x0), io::format_double(rep.y0),
                           ok ? io::format_double(fit.beta) : "", ok ? io::format_double(fit.intercept) : "",
                           ok ? io::format_double(fit.r) : "", std::to_string(fit.n),
                           std::string(to_string(fit.status)), std::string(to_string(rep.regressor_mode)),
                           std::string(to_string(rep.threshold_mode))});
    }
  }
  return out;
}

std::string pattern_summary_json(const std::vector<QuadrantReport>& reports) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& rep : reports) {
    nlohmann::json betas = nlohmann::json::object();
    for (std::size_t q = 0; q < 4; ++q) {
      const auto& fit = rep.quadrants[q];
      betas[std::string(kQuadrantLabels[q])] =
          fit.status == QuadrantStatus::ok ? nlohmann::json(fit.beta) : nlohmann::json(nullptr);
    }
    arr.push_back({{"feature_x", rep.feature_x},
                   {"feature_y", rep.feature_y},
                   {"x0", rep.x0},
                   {"y0", rep.y0},
                   {"pattern", std::string(to_string(rep.pattern))},
                   {"tolerance", rep.tolerance},
                   {"betas", std::move(betas)},
                   {"regressor_mode", std::string(to_string(rep.regressor_mode))},
                   {"threshold_mode", std::string(to_string(rep.threshold_mode))}});
  }
  return nlohmann::json{{"pairs", std::move(arr)}}.dump(2) + "\n";
}

std::string scatter_to_jsonl(std::string_view feature_x, std::string_view feature_y,
                             const std::vector<ScatterPoint>& points) {
  std::string out;
  for (const auto& pt : points) {
    nlohmann::json j = {{"feature_x", feature_x}, {"feature_y", feature_y}, {"row_id", pt.row_id},
                        {"x", pt.x},               {"phi_xy", pt.phi_xy},   {"y", pt.y}};
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

std::vector<QuadrantReport> quadrant_reports_from_csv(std::string_view text) {
  const auto doc = io::parse_csv(text);
  auto col = [&](const char* name) {
    auto c = doc.find(name);
    if (!c) throw SchemaError(std::string("quadrant CSV lacks column '") + name + "'");
    return *c;
  };
  const auto c_fx = col("feature_x"), c_fy = col("feature_y"), c_q = col("quadrant"), c_x0 = col("x0"),
             c_y0 = col("y0"), c_beta = col("beta"), c_int = col("intercept"), c_r = col("r"),
             c_n = col("n"), c_status = col("status"), c_mode = col("regressor_mode"),
             c_tmode = col("threshold_mode");
  std::vector<QuadrantReport> out;
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  for (const auto& row : doc.rows) {
    auto key = std::make_pair(row[c_fx], row[c_fy]);
    auto [it, inserted] = index.try_emplace(key, out.size());
    if (inserted) {
      QuadrantReport rep;
      rep.feature_x = row[c_fx];
      rep.feature_y = row[c_fy];
      rep.x0 = io::parse_double(row[c_x0]).value_or(0.0);
      rep.y0 = io::parse_double(row[c_y0]).value_or(0.0);
      rep.regressor_mode = parse_regressor_mode(row[c_mode]);
      rep.threshold_mode = parse_threshold_mode(row[c_tmode]);
      out.push_back(std::move(rep));
    }
    auto& rep = out[it->second];
    const auto q_it = std::find(kQuadrantLabels.begin(), kQuadrantLabels.end(), row[c_q]);
    if (q_it == kQuadrantLabels.end()) throw ParseError("unknown quadrant label '" + row[c_q] + "'");
    auto& fit = rep.quadrants[static_cast<std::size_t>(q_it - kQuadrantLabels.begin())];
    const std::string& status = row[c_status];
    fit.status = status == "ok" ? QuadrantStatus::ok
                 : status == "degenerate" ? QuadrantStatus::degenerate
                                          : QuadrantStatus::insufficient;
    fit.beta = io::parse_double(row[c_beta]).value_or(std::numeric_limits<double>::quiet_NaN());
    fit.intercept = io::parse_double(row[c_int]).value_or(0.0);
    fit.r = io::parse_double(row[c_r]).value_or(0.0);
    fit.n = static_cast<std::size_t>(io::parse_double(row[c_n]).value_or(0.0));
  }
  for (auto& rep : out) {
    rep.tolerance = default_tolerance(rep.betas());
    rep.pattern = classify_pattern(rep.betas(), rep.tolerance);
  }
  return out;
}

}  // namespace modal_attrib

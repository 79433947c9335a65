#include "modal_attrib/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "modal_attrib/errors.hpp"
#include "modal_attrib/io.hpp"

namespace modal_attrib {

std::string_view to_string(Centering c) {
  switch (c) {
    case Centering::half: return "half";
    case Centering::mean: return "mean";
    case Centering::median: return "median";
  }
  return "half";
}

std::string_view to_string(Normalization n) { return n == Normalization::mean ? "mean" : "sum"; }

Centering parse_centering(std::string_view s) {
  if (s == "half") return Centering::half;
  if (s == "mean") return Centering::mean;
  if (s == "median") return Centering::median;
  throw ConfigError("unknown centering '" + std::string(s) + "'");
}

Normalization parse_normalization(std::string_view s) {
  if (s == "mean") return Normalization::mean;
  if (s == "sum") return Normalization::sum;
  throw ConfigError("unknown normalization '" + std::string(s) + "'");
}

namespace {

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return lo + (hi - lo) / 2.0;
}

// Linear-interpolated quantile of sorted data.
double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double weighted_beta(std::span<const double> weights, std::span<const double> phi,
                     Normalization normalization) {
  double sum = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) sum += weights[k] * phi[k];
  if (normalization == Normalization::mean && !weights.empty()) {
    sum /= static_cast<double>(weights.size());
  }
  return sum;
}

}  // namespace

std::vector<double> centered_weights(std::span<const double> values, Centering centering) {
  std::vector<double> w(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) w[k] = values[k] / 100.0;
  switch (centering) {
    case Centering::half:
      for (auto& v : w) v -= 0.5;
      break;
    case Centering::median: {
      const double med = median_of(w);
      for (auto& v : w) v -= med;
      break;
    }
    case Centering::mean: {
      if (w.empty()) break;
      const double mean = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
      double ss = 0.0;
      for (double v : w) ss += (v - mean) * (v - mean);
      const double sd = std::sqrt(ss / static_cast<double>(w.size()));
      for (auto& v : w) v = sd > 0.0 ? (v - mean) / sd : 0.0;
      break;
    }
  }
  return w;
}

BetaSummary beta_shap(const ShapResult& shap, const FeatureTable& table, const BetaOptions& options) {
  if (!(options.ci_level > 0.0 && options.ci_level < 1.0)) throw ConfigError("ci_level must lie in (0, 1)");
  const std::size_t n = shap.phi.rows();
  const std::size_t p = shap.phi.cols();

  std::unordered_map<std::string, std::size_t> table_row;
  for (std::size_t r = 0; r < table.n_rows(); ++r) table_row.emplace(table.row_ids()[r], r);
  std::vector<std::size_t> rows(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto it = table_row.find(shap.row_ids[k]);
    if (it == table_row.end()) throw JoinError("SHAP row '" + shap.row_ids[k] + "' is not in the table");
    rows[k] = it->second;
  }

  BetaSummary summary;
  summary.options = options;
  std::vector<std::vector<double>> weights(p);
  std::vector<std::vector<double>> phis(p);
  for (std::size_t i = 0; i < p; ++i) {
    const std::size_t col = table.schema().index_of(shap.feature_names[i]).value_or(table.n_cols());
    if (col == table.n_cols()) {
      throw JoinError("SHAP feature '" + shap.feature_names[i] + "' is not a table column");
    }
    std::vector<double> x(n);
    phis[i].resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      x[k] = table.values()(rows[k], col);
      phis[i][k] = shap.phi(k, i);
    }
    weights[i] = centered_weights(x, options.centering);

    FeatureBeta fb;
    fb.feature = shap.feature_names[i];
    fb.modality = table.schema().columns[col].modality;
    fb.n = n;
    fb.beta_shap = weighted_beta(weights[i], phis[i], options.normalization);
    double abs_sum = 0.0;
    for (double v : phis[i]) abs_sum += std::abs(v);
    fb.mean_abs_phi = n ? abs_sum / static_cast<double>(n) : 0.0;
    fb.ci_lo = fb.ci_hi = fb.beta_shap;
    summary.features.push_back(std::move(fb));
  }

  if (options.bootstrap_resamples > 0 && n > 1) {
    std::mt19937_64 rng(options.seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::vector<double>> reps(p, std::vector<double>(options.bootstrap_resamples));
    std::vector<std::size_t> idx(n);
    for (std::size_t b = 0; b < options.bootstrap_resamples; ++b) {
      for (auto& v : idx) v = pick(rng);
      for (std::size_t i = 0; i < p; ++i) {
        double sum = 0.0;
        for (auto k : idx) sum += weights[i][k] * phis[i][k];
        if (options.normalization == Normalization::mean) sum /= static_cast<double>(n);
        reps[i][b] = sum;
      }
    }
    const double alpha = (1.0 - options.ci_level) / 2.0;
    for (std::size_t i = 0; i < p; ++i) {
      std::sort(reps[i].begin(), reps[i].end());
      summary.features[i].ci_lo = quantile_sorted(reps[i], alpha);
      summary.features[i].ci_hi = quantile_sorted(reps[i], 1.0 - alpha);
    }
  }
  return summary;
}

namespace {

bool ranks_before(const FeatureBeta& a, const FeatureBeta& b) {
  if (a.beta_shap != b.beta_shap) return a.beta_shap > b.beta_shap;
  if (a.mean_abs_phi != b.mean_abs_phi) return a.mean_abs_phi > b.mean_abs_phi;
  return a.feature < b.feature;
}

RankedGroup rank_group(std::vector<FeatureBeta> members, std::size_t top_k_pos, std::size_t top_k_neg) {
  RankedGroup g;
  std::sort(members.begin(), members.end(), ranks_before);
  for (const auto& m : members) {
    if (m.beta_shap > 0.0 && g.positive.size() < top_k_pos) g.positive.push_back(m);
  }
  for (auto it = members.rbegin(); it != members.rend(); ++it) {
    if (it->beta_shap < 0.0 && g.negative.size() < top_k_neg) g.negative.push_back(*it);
  }
  g.ordered = std::move(members);
  return g;
}

}  // namespace

std::vector<RankedGroup> importance_ranking(const BetaSummary& summary, std::size_t top_k_pos,
                                           std::size_t top_k_neg, bool group_by_modality) {
  std::vector<RankedGroup> out;
  if (!group_by_modality) {
    out.push_back(rank_group(summary.features, top_k_pos, top_k_neg));
    return out;
  }
  for (Modality m : {Modality::text, Modality::visual, Modality::audio, Modality::meta}) {
    std::vector<FeatureBeta> members;
    for (const auto& f : summary.features) {
      if (f.modality == m) members.push_back(f);
    }
    if (members.empty()) continue;
    RankedGroup g = rank_group(std::move(members), top_k_pos, top_k_neg);
    g.modality = m;
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<BeeswarmRecord> beeswarm_export(const ShapResult& shap, const FeatureTable& table,
                                            const std::vector<std::string>& features,
                                            const BetaOptions& options) {
  for (const auto& f : features) {
    const auto it = std::find(shap.feature_names.begin(), shap.feature_names.end(), f);
    if (it == shap.feature_names.end() || !table.schema().index_of(f)) {
      throw SchemaError("unknown feature '" + f + "' for beeswarm export");
    }
  }
  BetaOptions no_ci = options;
  no_ci.bootstrap_resamples = 0;
  const BetaSummary summary = beta_shap(shap, table, no_ci);
  const auto ordered = importance_ranking(summary, 0, 0, false).front().ordered;

  std::unordered_map<std::string, std::size_t> table_row;
  for (std::size_t r = 0; r < table.n_rows(); ++r) table_row.emplace(table.row_ids()[r], r);

  std::vector<BeeswarmRecord> records;
  for (const auto& fb : ordered) {
    if (std::find(features.begin(), features.end(), fb.feature) == features.end()) continue;
    const auto shap_col = static_cast<std::size_t>(
        std::find(shap.feature_names.begin(), shap.feature_names.end(), fb.feature) -
        shap.feature_names.begin());
    const std::size_t col = *table.schema().index_of(fb.feature);
    for (std::size_t k = 0; k < shap.phi.rows(); ++k) {
      records.push_back(BeeswarmRecord{fb.feature, shap.row_ids[k], shap.phi(k, shap_col),
                                       table.values()(table_row.at(shap.row_ids[k]), col),
                                       fb.modality});
    }
  }
  return records;
}

std::string beeswarm_to_jsonl(const std::vector<BeeswarmRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::json j = {{"feature", r.feature},
                        {"row_id", r.row_id},
                        {"phi", r.phi},
                        {"feature_value", r.feature_value},
                        {"modality", std::string(to_string(r.modality))}};
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

std::vector<BeeswarmRecord> beeswarm_from_jsonl(std::string_view text) {
  std::vector<BeeswarmRecord> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back(BeeswarmRecord{j.at("feature").get<std::string>(), j.at("row_id").get<std::string>(),
                                   j.at("phi").get<double>(), j.at("feature_value").get<double>(),
                                   parse_modality(j.at("modality").get<std::string>())});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("malformed beeswarm record: ") + e.what());
    }
  }
  return out;
}

std::vector<FeatureBeta> beta_from_beeswarm(const std::vector<BeeswarmRecord>& records,
                                            Centering centering, Normalization normalization) {
  std::vector<std::string> order;
  std::unordered_map<std::string, std::vector<const BeeswarmRecord*>> by_feature;
  for (const auto& r : records) {
    auto [it, inserted] = by_feature.try_emplace(r.feature);
    if (inserted) order.push_back(r.feature);
    it->second.push_back(&r);
  }
  std::vector<FeatureBeta> out;
  for (const auto& f : order) {
    const auto& recs = by_feature[f];
    std::vector<double> x, phi;
    double abs_sum = 0.0;
    for (const auto* r : recs) {
      x.push_back(r->feature_value);
      phi.push_back(r->phi);
      abs_sum += std::abs(r->phi);
    }
    FeatureBeta fb;
    fb.feature = f;
    fb.modality = recs.front()->modality;
    fb.n = recs.size();
    fb.beta_shap = weighted_beta(centered_weights(x, centering), phi, normalization);
    fb.ci_lo = fb.ci_hi = fb.beta_shap;
    fb.mean_abs_phi = abs_sum / static_cast<double>(recs.size());
    out.push_back(std::move(fb));
  }
  return out;
}

std::string beta_summary_to_csv(const BetaSummary& summary) {
  std::string out = "feature,modality,beta_shap,ci_lo,ci_hi,mean_abs_phi,n\n";
  for (const auto& f : summary.features) {
    out += io::csv_line({f.feature, std::string(to_string(f.modality)), io::format_double(f.beta_shap),
                         io::format_double(f.ci_lo), io::format_double(f.ci_hi),
                         io::format_double(f.mean_abs_phi), std::to_string(f.n)});
  }
  return out;
}

std::string beta_summary_meta_json(const BetaSummary& summary) {
  const auto& o = summary.options;
  nlohmann::json doc = {
      {"centering", std::string(to_string(o.centering))},
      {"normalization", std::string(to_string(o.normalization))},
      {"ci_method", o.bootstrap_resamples > 0 ? "bootstrap_percentile" : "none"},
      {"bootstrap_resamples", o.bootstrap_resamples},
      {"ci_level", o.ci_level},
      {"seed", o.seed},
      {"feature_scale", "x/100 then centered"}};
  return doc.dump(2) + "\n";
}

std::vector<FeatureBeta> beta_summary_from_csv(std::string_view text) {
  const auto doc = io::parse_csv(text);
  const char* names[] = {"feature", "modality", "beta_shap", "ci_lo", "ci_hi", "mean_abs_phi", "n"};
  std::size_t idx[7];
  for (int i = 0; i < 7; ++i) {
    auto c = doc.find(names[i]);
    if (!c) throw SchemaError(std::string("beta summary CSV lacks column '") + names[i] + "'");
    idx[i] = *c;
  }
  auto num = [](const std::string& s) {
    auto v = io::parse_double(s);
    if (!v) throw ParseError("unparseable number '" + s + "' in beta summary");
    return *v;
  };
  std::vector<FeatureBeta> out;
  for (const auto& row : doc.rows) {
    FeatureBeta f;
    f.feature = row[idx[0]];
    f.modality = parse_modality(row[idx[1]]);
    f.beta_shap = num(row[idx[2]]);
    f.ci_lo = num(row[idx[3]]);
    f.ci_hi = num(row[idx[4]]);
    f.mean_abs_phi = num(row[idx[5]]);
    f.n = static_cast<std::size_t>(num(row[idx[6]]));
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace modal_attrib

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "modal_attrib/attribution.hpp"
#include "modal_attrib/errors.hpp"
#include "modal_attrib/gbdt.hpp"
#include "modal_attrib/shap.hpp"
#include "test_support.hpp"

using namespace modal_attrib;

namespace {

struct Fixture {
  FeatureTable table;
  ShapResult shap;
};

// Table with the given columns (probabilistic, modality cycling text/visual/audio)
// and a SHAP result with the given phi, rows aligned.
Fixture make(const Matrix& x, const Matrix& phi, std::vector<std::string> names = {}) {
  const std::size_t n = x.rows(), p = x.cols();
  if (names.empty()) {
    for (std::size_t j = 0; j < p; ++j) names.push_back("f" + std::to_string(j));
  }
  Schema schema;
  schema.target = {"y", TargetTransform::none};
  const Modality mods[] = {Modality::text, Modality::visual, Modality::audio};
  for (std::size_t j = 0; j < p; ++j) {
    schema.columns.push_back({names[j], mods[j % 3], ColumnKind::probabilistic, Range{0, 100}});
  }
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("r" + std::to_string(i));
  Fixture f;
  f.table = FeatureTable(schema, x, std::vector<double>(n, 0.0), ids);
  f.shap.phi = phi;
  f.shap.row_ids = ids;
  f.shap.feature_names = names;
  return f;
}

BetaOptions no_ci() {
  BetaOptions o;
  o.bootstrap_resamples = 0;
  return o;
}

}  // namespace

TEST(Beta, ConstantAtFiftyIsZero) {
  std::mt19937_64 rng(1);
  Matrix x(40, 1, 50.0);
  const auto phi = test_support::random_rows(rng, 40, 1);
  const auto f = make(x, phi);
  EXPECT_EQ(beta_shap(f.shap, f.table, no_ci()).features[0].beta_shap, 0.0);
}

TEST(Beta, ClosedFormExamples) {
  Matrix x(10, 2);
  for (std::size_t i = 0; i < 10; ++i) {
    x(i, 0) = i % 2 ? 100.0 : 0.0;
    x(i, 1) = 100.0;
  }
  const auto f = make(x, Matrix(10, 2, 1.0));
  const auto s = beta_shap(f.shap, f.table, no_ci());
  EXPECT_DOUBLE_EQ(s.features[0].beta_shap, 0.0);
  EXPECT_DOUBLE_EQ(s.features[1].beta_shap, 0.5);
  EXPECT_DOUBLE_EQ(s.features[1].mean_abs_phi, 1.0);
  EXPECT_EQ(s.features[1].n, 10u);
  EXPECT_EQ(s.features[1].modality, Modality::visual);

  auto sum = no_ci();
  sum.normalization = Normalization::sum;
  EXPECT_DOUBLE_EQ(beta_shap(f.shap, f.table, sum).features[1].beta_shap, 5.0);
}

TEST(Beta, HandComputedMixedRows) {
  // x = {20, 90, 60}, phi = {-1, 2, 0.5}: weights -0.3, 0.4, 0.1
  Matrix x(3, 1, std::vector<double>{20, 90, 60});
  Matrix phi(3, 1, std::vector<double>{-1, 2, 0.5});
  const auto f = make(x, phi);
  const double expected = (0.3 + 0.8 + 0.05) / 3.0;
  EXPECT_NEAR(beta_shap(f.shap, f.table, no_ci()).features[0].beta_shap, expected, 1e-15);
  EXPECT_NEAR(beta_shap(f.shap, f.table, no_ci()).features[0].mean_abs_phi, 3.5 / 3.0, 1e-15);
}

TEST(Beta, CenteringVariants) {
  const std::vector<double> v = {0, 20, 40, 100};
  const auto half = centered_weights(v, Centering::half);
  EXPECT_DOUBLE_EQ(half[0], -0.5);
  EXPECT_DOUBLE_EQ(half[3], 0.5);
  const auto med = centered_weights(v, Centering::median);
  EXPECT_NEAR(med[1], -0.1, 1e-15);  // median of {0, .2, .4, 1} is .3
  const auto z = centered_weights(v, Centering::mean);
  EXPECT_NEAR(std::accumulate(z.begin(), z.end(), 0.0), 0.0, 1e-12);
  EXPECT_EQ(parse_centering("median"), Centering::median);
  EXPECT_EQ(to_string(Normalization::sum), "sum");
  EXPECT_THROW(parse_centering("zscore"), ConfigError);
}

TEST(Beta, PropertiesOnRandomInputs) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t n = 30 + seed, p = 4;
    const auto x = test_support::random_rows(rng, n, p);
    auto phi = test_support::random_rows(rng, n, p);
    for (auto& v : phi.data()) v = (v - 50.0) / 10.0;
    const auto f = make(x, phi);
    const auto s = beta_shap(f.shap, f.table, no_ci());

    // bound: |beta| <= max|phi| * max|weight|
    for (std::size_t j = 0; j < p; ++j) {
      double max_phi = 0.0, max_w = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        max_phi = std::max(max_phi, std::abs(phi(i, j)));
        max_w = std::max(max_w, std::abs(x(i, j) / 100.0 - 0.5));
      }
      EXPECT_LE(std::abs(s.features[j].beta_shap), max_phi * max_w + 1e-12);
      EXPECT_GE(s.features[j].mean_abs_phi, 0.0);
    }

    // linearity in phi
    auto scaled = f;
    for (auto& v : scaled.shap.phi.data()) v *= -2.5;
    const auto s2 = beta_shap(scaled.shap, scaled.table, no_ci());
    for (std::size_t j = 0; j < p; ++j) EXPECT_NEAR(s2.features[j].beta_shap, -2.5 * s.features[j].beta_shap, 1e-12);

    // row permutation of the SHAP side: joined by id, so beta is unchanged
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    auto permuted = f;
    permuted.shap.phi = phi.select_rows(perm);
    for (std::size_t i = 0; i < n; ++i) permuted.shap.row_ids[i] = f.shap.row_ids[perm[i]];
    const auto s3 = beta_shap(permuted.shap, permuted.table, no_ci());
    for (std::size_t j = 0; j < p; ++j) EXPECT_NEAR(s3.features[j].beta_shap, s.features[j].beta_shap, 1e-12);
  }
}

TEST(Beta, BootstrapIntervalBracketsEstimate) {
  std::mt19937_64 rng(3);
  const auto x = test_support::random_rows(rng, 200, 2);
  Matrix phi(200, 2);
  std::normal_distribution<double> noise(0.0, 0.2);
  for (std::size_t i = 0; i < 200; ++i) {
    phi(i, 0) = (x(i, 0) - 50.0) / 50.0 + noise(rng);
    phi(i, 1) = noise(rng);
  }
  const auto f = make(x, phi);
  BetaOptions opts;
  opts.seed = 9;
  const auto s = beta_shap(f.shap, f.table, opts);
  for (const auto& b : s.features) {
    EXPECT_LE(b.ci_lo, b.beta_shap);
    EXPECT_GE(b.ci_hi, b.beta_shap);
  }
  EXPECT_GT(s.features[0].ci_lo, 0.0);
  // seeded: identical on re-run
  const auto again = beta_shap(f.shap, f.table, opts);
  EXPECT_EQ(again.features[0].ci_lo, s.features[0].ci_lo);
  EXPECT_EQ(again.features[1].ci_hi, s.features[1].ci_hi);
}

TEST(Beta, JoinErrorOnMissingRow) {
  const auto f = make(Matrix(3, 1, 10.0), Matrix(3, 1, 1.0));
  auto bad = f.shap;
  bad.row_ids[1] = "nope";
  EXPECT_THROW(beta_shap(bad, f.table, no_ci()), JoinError);
}

TEST(Beta, PlantedDirectionRecovered) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> noise(0.0, 0.3);
  const std::size_t n = 2000;
  const auto x = test_support::random_rows(rng, n, 3);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = 1.5 * (x(i, 0) > 50) - 1.0 * (x(i, 1) > 30) + noise(rng);
  const auto fx = make(x, Matrix(n, 3));
  const FeatureTable table(fx.table.schema(), x, y, fx.table.row_ids());
  const auto sp = split(table, 0.8, 1);
  BoostConfig cfg;
  cfg.iterations = 100;
  cfg.max_depth = 3;
  const auto model = train(table, sp, cfg).model;
  const auto background = sample_background(table, sp.train_rows, 64, 1);
  const auto test = table.select_rows(sp.test_rows);
  const auto shap = shap_values(model, test.values(), background, test.row_ids());
  const auto s = beta_shap(shap, test, no_ci());
  EXPECT_GT(s.features[0].beta_shap, 0.1);
  EXPECT_LT(s.features[1].beta_shap, -0.05);
  EXPECT_LT(std::abs(s.features[2].beta_shap), std::abs(s.features[1].beta_shap));
}

TEST(Ranking, PositiveAndNegativeLists) {
  BetaSummary s;
  s.features = {{"a", Modality::text, 0.5}, {"b", Modality::text, -1.3}, {"c", Modality::text, 0.3}};
  const auto groups = importance_ranking(s, 5, 5, false);
  ASSERT_EQ(groups.size(), 1u);
  ASSERT_EQ(groups[0].positive.size(), 2u);
  EXPECT_EQ(groups[0].positive[0].beta_shap, 0.5);
  EXPECT_EQ(groups[0].positive[1].beta_shap, 0.3);
  ASSERT_EQ(groups[0].negative.size(), 1u);
  EXPECT_EQ(groups[0].negative[0].beta_shap, -1.3);
  EXPECT_EQ(importance_ranking(s, 1, 0, false)[0].positive.size(), 1u);
  EXPECT_TRUE(importance_ranking(s, 1, 0, false)[0].negative.empty());
}

TEST(Ranking, TiesAreAlphabeticalAfterMeanAbs) {
  BetaSummary s;
  s.features = {{"zeta", Modality::text, 0.2, 0, 0, 1.0},
                {"alpha", Modality::text, 0.2, 0, 0, 1.0},
                {"mid", Modality::text, 0.2, 0, 0, 2.0}};
  const auto g = importance_ranking(s, 10, 10, false)[0];
  ASSERT_EQ(g.ordered.size(), 3u);
  EXPECT_EQ(g.ordered[0].feature, "mid");
  EXPECT_EQ(g.ordered[1].feature, "alpha");
  EXPECT_EQ(g.ordered[2].feature, "zeta");
}

TEST(Ranking, GroupedByModality) {
  BetaSummary s;
  s.features = {{"t1", Modality::text, 0.5}, {"v1", Modality::visual, -0.4}, {"t2", Modality::text, -0.1},
                {"v2", Modality::visual, 0.9}};
  const auto groups = importance_ranking(s, 5, 5, true);
  ASSERT_EQ(groups.size(), 2u);
  for (const auto& g : groups) {
    ASSERT_TRUE(g.modality.has_value());
    EXPECT_EQ(g.ordered.size(), 2u);
    for (const auto& b : g.ordered) EXPECT_EQ(b.modality, *g.modality);
  }
  EXPECT_EQ(importance_ranking(s, 5, 5, true)[0].ordered, groups[0].ordered);
}

TEST(Beeswarm, CardinalityOrderAndRoundTrip) {
  std::mt19937_64 rng(4);
  const auto x = test_support::random_rows(rng, 10, 3);
  auto phi = test_support::random_rows(rng, 10, 3);
  for (std::size_t i = 0; i < 10; ++i) {
    phi(i, 0) = (x(i, 0) - 50) / 10.0;  // strong positive beta
    phi(i, 2) = 0.0;                     // dummy
  }
  const auto f = make(x, phi);
  const auto rec = beeswarm_export(f.shap, f.table, {"f2", "f0"}, no_ci());
  ASSERT_EQ(rec.size(), 20u);
  EXPECT_EQ(rec.front().feature, "f0");
  for (const auto& r : rec) {
    if (r.feature == "f2") EXPECT_EQ(r.phi, 0.0);
  }
  const auto back = beeswarm_from_jsonl(beeswarm_to_jsonl(rec));
  ASSERT_EQ(back.size(), rec.size());
  const auto betas = beta_from_beeswarm(back, Centering::half, Normalization::mean);
  const auto direct = beta_shap(f.shap, f.table, no_ci());
  for (const auto& b : betas) {
    const auto idx = b.feature == "f0" ? 0 : 2;
    EXPECT_EQ(b.beta_shap, direct.features[idx].beta_shap) << b.feature;
  }
  EXPECT_THROW(beeswarm_export(f.shap, f.table, {"nope"}, no_ci()), SchemaError);
}

TEST(Export, BetaSummaryCsv) {
  const auto f = make(Matrix(4, 2, 80.0), Matrix(4, 2, 0.25));
  const auto s = beta_shap(f.shap, f.table, no_ci());
  const auto csv = beta_summary_to_csv(s);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "feature,modality,beta_shap,ci_lo,ci_hi,mean_abs_phi,n");
  const auto back = beta_summary_from_csv(csv);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].beta_shap, s.features[0].beta_shap);
  EXPECT_EQ(back[1].modality, Modality::visual);
  const auto meta = beta_summary_meta_json(s);
  EXPECT_NE(meta.find("\"centering\""), std::string::npos);
  EXPECT_NE(meta.find("\"half\""), std::string::npos);
  EXPECT_NE(meta.find("\"normalization\""), std::string::npos);
}

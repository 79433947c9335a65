#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "modal_attrib/errors.hpp"
#include "modal_attrib/gbdt.hpp"
#include "modal_attrib/table.hpp"
#include "test_support.hpp"

using namespace modal_attrib;

namespace {

std::vector<std::size_t> iota_rows(std::size_t from, std::size_t to) {
  std::vector<std::size_t> r(to - from);
  std::iota(r.begin(), r.end(), from);
  return r;
}

BoostConfig small(int iterations, double lr, int depth, int leaf = 20) {
  BoostConfig c;
  c.iterations = iterations;
  c.learning_rate = lr;
  c.max_depth = depth;
  c.min_samples_leaf = leaf;
  return c;
}

std::vector<std::string> names(std::size_t p) {
  std::vector<std::string> out;
  for (std::size_t j = 0; j < p; ++j) out.push_back("f" + std::to_string(j));
  return out;
}

// Training rows reaching each leaf of a tree.
std::vector<int> leaf_counts(const Tree& t, const Matrix& x, std::span<const std::size_t> rows) {
  std::vector<int> counts(t.nodes.size(), 0);
  for (auto r : rows) {
    int i = 0;
    while (!t.nodes[i].is_leaf()) {
      i = x(r, t.nodes[i].feature) <= t.nodes[i].threshold ? t.nodes[i].left : t.nodes[i].right;
    }
    ++counts[i];
  }
  return counts;
}

}  // namespace

TEST(Presets, WithinAndCross) {
  const auto w = BoostConfig::within();
  EXPECT_EQ(w.iterations, 1000);
  EXPECT_DOUBLE_EQ(w.learning_rate, 0.1);
  EXPECT_EQ(w.max_depth, 6);
  EXPECT_FALSE(w.early_stopping());
  const auto c = BoostConfig::cross();
  EXPECT_EQ(c.iterations, 10000);
  EXPECT_EQ(c.max_depth, 6);
  EXPECT_EQ(c.early_stop_eval_every, 1000);
  EXPECT_EQ(c.early_stop_patience_evals, 1);
  EXPECT_EQ(BoostConfig::preset("cross"), c);
  EXPECT_THROW(BoostConfig::preset("catboost"), ConfigError);
}

TEST(Config, ValidationBounds) {
  EXPECT_THROW(small(0, 0.1, 3).validate(), ConfigError);
  EXPECT_THROW(small(10, 0.0, 3).validate(), ConfigError);
  EXPECT_THROW(small(10, 0.1, 0).validate(), ConfigError);
  EXPECT_THROW(small(10, 0.1, 3, 0).validate(), ConfigError);
  auto half = small(10, 0.1, 3);
  half.early_stop_eval_every = 5;
  EXPECT_THROW(half.validate(), ConfigError);
  half.early_stop_patience_evals = 1;
  EXPECT_NO_THROW(half.validate());
}

TEST(Train, ConstantTargetGivesBaseOnly) {
  std::mt19937_64 rng(1);
  const auto x = test_support::random_rows(rng, 100, 3);
  const std::vector<double> y(100, 3.0);
  const auto r = train(x, y, iota_rows(0, 80), iota_rows(80, 100), small(50, 0.1, 3), names(3));
  EXPECT_DOUBLE_EQ(r.model.base_score, 3.0);
  EXPECT_TRUE(r.model.trees.empty());
  EXPECT_EQ(r.report.stop_reason, "no_split");
  for (double v : predict(r.model, x)) EXPECT_DOUBLE_EQ(v, 3.0);
}

TEST(Train, EmptyTrainSetIsConfigError) {
  std::mt19937_64 rng(1);
  const auto x = test_support::random_rows(rng, 10, 2);
  const std::vector<double> y(10, 1.0);
  EXPECT_THROW(train(x, y, {}, iota_rows(0, 10), small(5, 0.1, 2), names(2)), ConfigError);
}

TEST(Train, StepFunctionWithStumps) {
  std::mt19937_64 rng(5);
  const auto x = test_support::random_rows(rng, 2000, 1);
  std::vector<double> y(2000);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x(i, 0) > 50 ? 1.0 : 0.0;
  const auto r = train(x, y, iota_rows(0, 1600), iota_rows(1600, 2000), small(50, 0.1, 1), names(1));
  EXPECT_EQ(r.model.trees.size(), 50u);
  EXPECT_LT(r.report.test_rmse.back(), 0.05);
  for (const auto& t : r.model.trees) EXPECT_EQ(t.depth(), 1);
}

TEST(Train, LinearSignalFitsWell) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> noise(0.0, 0.1);
  const auto x = test_support::random_rows(rng, 3000, 3);
  std::vector<double> y(3000);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = 0.03 * x(i, 0) - 0.02 * x(i, 1) + noise(rng);
  const auto r = train(x, y, iota_rows(0, 2400), iota_rows(2400, 3000), small(500, 0.1, 3), names(3));
  const auto test_rows = iota_rows(2400, 3000);
  std::vector<double> pred, actual;
  for (auto i : test_rows) {
    pred.push_back(r.model.predict_row(x.row(i)));
    actual.push_back(y[i]);
  }
  EXPECT_GT(score(pred, actual).r2, 0.9);
}

TEST(Train, ReportEchoesConfig) {
  std::mt19937_64 rng(2);
  const auto x = test_support::random_rows(rng, 200, 2);
  std::vector<double> y(200);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x(i, 0) / 10.0;
  auto cfg = BoostConfig::within();
  cfg.iterations = 20;  // keep the test fast; the other fields are the preset's
  const auto r = train(x, y, iota_rows(0, 160), iota_rows(160, 200), cfg, names(2));
  EXPECT_EQ(r.report.config, cfg);
  EXPECT_EQ(r.report.n_train, 160u);
  EXPECT_EQ(r.report.n_test, 40u);
  const auto json = train_report_to_json(r.report);
  EXPECT_NE(json.find("\"learning_rate\""), std::string::npos);
}

TEST(Train, PropertiesOnRandomData) {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t n = 300, p = 4;
    auto x = test_support::random_rows(rng, n, p);
    // coarse grid values exercise ties in the split search
    for (std::size_t i = 0; i < n; ++i) x(i, 3) = std::floor(x(i, 3) / 25.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = std::sin(x(i, 0) / 15.0) + x(i, 3) * (x(i, 1) > 40) + noise(rng);
    const auto cfg = small(60, 0.3, 1 + static_cast<int>(seed % 4), 5 + static_cast<int>(seed));
    const auto tr = iota_rows(0, 240);
    const auto r = train(x, y, tr, iota_rows(240, n), cfg, names(p));

    for (std::size_t k = 1; k < r.report.train_rmse.size(); ++k) {
      EXPECT_LE(r.report.train_rmse[k], r.report.train_rmse[k - 1] + 1e-12) << "round " << k;
    }
    for (const auto& t : r.model.trees) {
      EXPECT_LE(t.depth(), cfg.max_depth);
      const auto counts = leaf_counts(t, x, tr);
      for (std::size_t i = 0; i < t.nodes.size(); ++i) {
        const auto& node = t.nodes[i];
        if (node.is_leaf()) {
          EXPECT_TRUE(std::isfinite(node.value));
          EXPECT_GE(counts[i], cfg.min_samples_leaf);
          continue;
        }
        // threshold sits strictly between two observed training values
        std::set<double> seen;
        for (auto row : tr) seen.insert(x(row, node.feature));
        auto above = seen.upper_bound(node.threshold);
        ASSERT_NE(above, seen.end());
        ASSERT_NE(above, seen.begin());
        EXPECT_LT(*std::prev(above), node.threshold);
      }
    }
  }
}

TEST(Train, DeterministicSerialization) {
  std::mt19937_64 rng(3);
  const auto x = test_support::random_rows(rng, 400, 5);
  std::vector<double> y(400);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x(i, 1) * x(i, 2) / 1000.0;
  const auto cfg = small(40, 0.2, 4, 10);
  const auto a = train(x, y, iota_rows(0, 300), iota_rows(300, 400), cfg, names(5));
  const auto b = train(x, y, iota_rows(0, 300), iota_rows(300, 400), cfg, names(5));
  EXPECT_EQ(model_to_json(a.model), model_to_json(b.model));
  EXPECT_EQ(model_from_json(model_to_json(a.model)), a.model);
}

TEST(Train, FromFeatureTable) {
  std::mt19937_64 rng(4);
  Schema schema;
  schema.target = {"y", TargetTransform::none};
  schema.columns = {{"a", Modality::text, ColumnKind::probabilistic, Range{0, 100}},
                    {"b", Modality::visual, ColumnKind::probabilistic, Range{0, 100}}};
  auto x = test_support::random_rows(rng, 500, 2);
  std::vector<double> y(500);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < 500; ++i) {
    y[i] = x(i, 0) > 30 ? 2.0 : 0.0;
    ids.push_back("r" + std::to_string(i));
  }
  const FeatureTable table(schema, x, y, ids);
  const auto sp = split(table, 0.8, 11);
  const auto r = train(table, sp, small(30, 0.3, 2));
  EXPECT_EQ(r.model.feature_names, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(r.model.schema_fingerprint, schema.fingerprint());
  const auto m = evaluate(r.model, table, sp.test_rows);
  EXPECT_LT(m.rmse, 0.05);
  EXPECT_LE(m.r2, 1.0);
}

TEST(EarlyStopping, TruncatesAtBestEvaluation) {
  // Pure noise target: test RMSE gets worse as the model memorizes.
  std::mt19937_64 rng(6);
  std::normal_distribution<double> noise(0.0, 1.0);
  const auto x = test_support::random_rows(rng, 600, 4);
  std::vector<double> y(600);
  for (auto& v : y) v = noise(rng);
  auto cfg = small(400, 0.3, 6, 2);
  cfg.early_stop_eval_every = 10;
  cfg.early_stop_patience_evals = 1;
  const auto r = train(x, y, iota_rows(0, 480), iota_rows(480, 600), cfg, names(4));
  EXPECT_EQ(r.report.stop_reason, "early_stopping");
  EXPECT_LT(r.report.rounds_trained, 400);
  EXPECT_EQ(r.report.rounds_trained % 10, 0);
  EXPECT_EQ(r.report.best_round % 10, 0);
  EXPECT_EQ(r.report.rounds_trained, r.report.best_round + 10);
  EXPECT_EQ(static_cast<int>(r.model.trees.size()), r.report.best_round);
  double best = 1e300;
  for (const auto& e : r.report.evaluations) best = std::min(best, e.test_rmse);
  EXPECT_DOUBLE_EQ(r.report.test_rmse[r.report.best_round], best);
}

TEST(Predict, ZeroTreesAndStump) {
  BoostedModel m;
  m.base_score = 1.25;
  m.feature_names = {"x1", "x2"};
  Matrix rows(3, 2, 7.0);
  for (double v : predict(m, rows)) EXPECT_DOUBLE_EQ(v, 1.25);

  m.base_score = 0.0;
  m.learning_rate = 0.5;
  Tree stump;
  stump.nodes = {{0, 50.0, 1, 2, 0.0}, {-1, 0, -1, -1, -1.0}, {-1, 0, -1, -1, 1.0}};
  m.trees = {stump};
  Matrix one(1, 2, std::vector<double>{70.0, 0.0});
  EXPECT_DOUBLE_EQ(predict(m, one)[0], 0.5);
  EXPECT_THROW(predict(m, Matrix(1, 3)), SchemaError);
}

TEST(Predict, LargeBatch) {
  BoostedModel m;
  m.base_score = 2.0;
  m.feature_names = {"x"};
  EXPECT_EQ(predict(m, Matrix(32593, 1)).size(), 32593u);
}

TEST(Predict, RowPermutationPermutesOutputs) {
  std::mt19937_64 rng(12);
  const auto model = test_support::random_ensemble(rng, 5, 20, 4);
  const auto x = test_support::random_rows(rng, 50, 5);
  std::vector<std::size_t> perm = iota_rows(0, 50);
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto a = predict(model, x);
  const auto b = predict(model, x.select_rows(perm));
  for (std::size_t i = 0; i < perm.size(); ++i) EXPECT_EQ(b[i], a[perm[i]]);
}

TEST(Score, Definitions) {
  const std::vector<double> y = {1, 2, 3, 4};
  auto s = score(y, y);
  EXPECT_DOUBLE_EQ(s.rmse, 0.0);
  EXPECT_DOUBLE_EQ(s.r2, 1.0);
  s = score(std::vector<double>(4, 2.5), y);
  EXPECT_NEAR(s.r2, 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(s.rmse, std::sqrt(1.25));
  EXPECT_DOUBLE_EQ(score(std::vector<double>{1, 1}, std::vector<double>{1, 1}).r2, 1.0);
  EXPECT_DOUBLE_EQ(score(std::vector<double>{2, 2}, std::vector<double>{1, 1}).r2, 0.0);
}

#pragma once

#include <atomic>
#include <bit>
#include <cmath>
#include <span>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "modal_attrib/gbdt.hpp"
#include "modal_attrib/matrix.hpp"

namespace test_support {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("modal_attrib_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(MODAL_ATTRIB_FIXTURES) / name;
}

// Random ensemble over p features with values on 0..100. Thresholds are
// drawn on a coarse grid so background rows land on both sides.
inline modal_attrib::BoostedModel random_ensemble(std::mt19937_64& rng, std::size_t p, int n_trees,
                                                  int max_depth) {
  using namespace modal_attrib;
  std::uniform_int_distribution<std::size_t> feat(0, p - 1);
  std::uniform_int_distribution<int> grid(1, 19);
  std::normal_distribution<double> leaf(0.0, 1.0);
  std::bernoulli_distribution stop(0.2);
  BoostedModel m;
  m.base_score = leaf(rng);
  m.learning_rate = 0.5;
  for (std::size_t j = 0; j < p; ++j) m.feature_names.push_back("f" + std::to_string(j));
  for (int t = 0; t < n_trees; ++t) {
    Tree tree;
    std::vector<std::pair<int, int>> stack = {{0, 0}};
    tree.nodes.emplace_back();
    while (!stack.empty()) {
      auto [idx, depth] = stack.back();
      stack.pop_back();
      if (depth >= max_depth || (depth > 0 && stop(rng))) {
        tree.nodes[idx].value = leaf(rng);
        continue;
      }
      const int l = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      tree.nodes[idx].feature = static_cast<int>(feat(rng));
      tree.nodes[idx].threshold = 5.0 * grid(rng);
      tree.nodes[idx].left = l;
      tree.nodes[idx].right = l + 1;
      stack.push_back({l, depth + 1});
      stack.push_back({l + 1, depth + 1});
    }
    m.trees.push_back(std::move(tree));
  }
  return m;
}

inline modal_attrib::Matrix random_rows(std::mt19937_64& rng, std::size_t n, std::size_t p) {
  std::uniform_real_distribution<double> u(0.0, 100.0);
  modal_attrib::Matrix x(n, p);
  for (auto& v : x.data()) v = u(rng);
  return x;
}

// Independent subset-enumeration oracle for interventional Shapley values.
class ShapleyOracle {
 public:
  ShapleyOracle(const modal_attrib::BoostedModel& model, std::span<const double> row,
                const modal_attrib::Matrix& background)
      : p_(row.size()), v_(std::size_t{1} << row.size(), 0.0) {
    std::vector<double> z(p_);
    for (std::size_t mask = 0; mask < v_.size(); ++mask) {
      double acc = 0.0;
      for (std::size_t b = 0; b < background.rows(); ++b) {
        for (std::size_t j = 0; j < p_; ++j) z[j] = (mask >> j) & 1 ? row[j] : background(b, j);
        acc += model.predict_row(z);
      }
      v_[mask] = acc / static_cast<double>(background.rows());
    }
  }

  double value(std::size_t mask) const { return v_[mask]; }

  std::vector<double> shap() const {
    std::vector<double> phi(p_, 0.0);
    for (std::size_t i = 0; i < p_; ++i) {
      for (std::size_t s = 0; s < v_.size(); ++s) {
        if ((s >> i) & 1) continue;
        const int k = std::popcount(s);
        phi[i] += weight(k, p_) * (v_[s | (std::size_t{1} << i)] - v_[s]);
      }
    }
    return phi;
  }

  // p x p: half the Shapley interaction index off the diagonal, remainder of
  // phi_i on it.
  std::vector<double> interactions() const {
    std::vector<double> out(p_ * p_, 0.0);
    for (std::size_t i = 0; i < p_; ++i) {
      for (std::size_t j = i + 1; j < p_; ++j) {
        double acc = 0.0;
        const std::size_t bi = std::size_t{1} << i, bj = std::size_t{1} << j;
        for (std::size_t s = 0; s < v_.size(); ++s) {
          if (s & (bi | bj)) continue;
          const int k = std::popcount(s);
          acc += weight(k, p_ - 1) * (v_[s | bi | bj] - v_[s | bi] - v_[s | bj] + v_[s]);
        }
        out[i * p_ + j] = out[j * p_ + i] = acc / 2.0;
      }
    }
    const auto phi = shap();
    for (std::size_t i = 0; i < p_; ++i) {
      double off = 0.0;
      for (std::size_t j = 0; j < p_; ++j) {
        if (j != i) off += out[i * p_ + j];
      }
      out[i * p_ + i] = phi[i] - off;
    }
    return out;
  }

 private:
  // |S|! (n - |S| - 1)! / n!
  static double weight(int k, std::size_t n) {
    return std::exp(std::lgamma(k + 1.0) + std::lgamma(static_cast<double>(n) - k) -
                    std::lgamma(static_cast<double>(n) + 1.0));
  }

  std::size_t p_;
  std::vector<double> v_;
};

}  // namespace test_support

#include "modal_attrib/shap.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <mutex>
#include <map>
#include <numeric>
#include <random>

#include <json.hpp>

#include "modal_attrib/errors.hpp"
#include "modal_attrib/io.hpp"
#include "modal_attrib/parallel.hpp"

namespace modal_attrib {

namespace {

constexpr std::size_t kMaxFactorial = 171;

const std::array<double, kMaxFactorial>& factorials() {
  static const auto table = [] {
    std::array<double, kMaxFactorial> f{};
    f[0] = 1.0;
    for (std::size_t i = 1; i < kMaxFactorial; ++i) f[i] = f[i - 1] * static_cast<double>(i);
    return f;
  }();
  return table;
}

// For one (explained row x, background row b) pair the per-tree game is
// v(S) = tree(x on S, b elsewhere). Walking the tree, a node whose split sends
// x and b the same way is irrelevant; otherwise the leaf reached depends on
// whether the split feature is taken from x (set A) or from b (set B). Each
// leaf is therefore reached exactly by the coalitions with A inside S and B
// outside, a game whose Shapley values and interaction indices are closed
// form in |A| and |B|.
//
// Background rows only enter through their split directions, so all of them
// are walked at once as a bitset; each leaf state is weighted by how many
// rows reach it.

using Word = std::uint64_t;

// Per tree and node, the background rows sent left, as bitsets of `words`
// 64-bit words.
class BackgroundMasks {
 public:
  BackgroundMasks(const BoostedModel& model, const Matrix& background)
      : words_((background.rows() + 63) / 64), offsets_(model.trees.size() + 1, 0) {
    for (std::size_t t = 0; t < model.trees.size(); ++t) {
      offsets_[t + 1] = offsets_[t] + model.trees[t].nodes.size() * words_;
    }
    bits_.assign(offsets_.back(), 0);
    for (std::size_t t = 0; t < model.trees.size(); ++t) {
      const auto& nodes = model.trees[t].nodes;
      for (std::size_t n = 0; n < nodes.size(); ++n) {
        if (nodes[n].is_leaf()) continue;
        Word* out = bits_.data() + offsets_[t] + n * words_;
        const auto f = static_cast<std::size_t>(nodes[n].feature);
        for (std::size_t k = 0; k < background.rows(); ++k) {
          if (background(k, f) <= nodes[n].threshold) out[k / 64] |= Word{1} << (k % 64);
        }
      }
    }
    all_.assign(words_, ~Word{0});
    if (background.rows() % 64) all_.back() = (Word{1} << (background.rows() % 64)) - 1;
  }

  std::size_t words() const { return words_; }
  const Word* left(std::size_t tree, std::size_t node) const {
    return bits_.data() + offsets_[tree] + node * words_;
  }
  const Word* all() const { return all_.data(); }

 private:
  std::size_t words_;
  std::vector<std::size_t> offsets_;
  std::vector<Word> bits_;
  std::vector<Word> all_;
};

class PathWalker {
 public:
  PathWalker(std::size_t p, const BackgroundMasks& masks, int max_depth)
      : masks_(masks), words_(masks.words()), origin_(p, 0) {
    taken_x_.reserve(64);
    taken_b_.reserve(64);
    scratch_.resize(static_cast<std::size_t>(max_depth + 2) * 2 * words_);
  }

  // Adds raw (unscaled, summed over background rows) contributions of tree
  // `t` into phi, and into the p x p block `pairs` when it is non-null.
  void accumulate(std::size_t t, const Tree& tree, std::span<const double> x, double* phi, double* pairs,
                  std::size_t p) {
    tree_ = &tree;
    tree_index_ = t;
    x_ = x;
    phi_ = phi;
    pairs_ = pairs;
    p_ = p;
    walk(0, masks_.all(), 0);
  }

 private:
  std::size_t count(const Word* set) const {
    std::size_t c = 0;
    for (std::size_t w = 0; w < words_; ++w) c += static_cast<std::size_t>(std::popcount(set[w]));
    return c;
  }

  // Splits `set` into rows agreeing with x (sent to x's child) and the rest.
  // Returns {any agree, any disagree}.
  std::pair<bool, bool> partition(const Word* set, const Word* left, bool x_left, Word* agree,
                                  Word* disagree) const {
    Word any_a = 0, any_d = 0;
    for (std::size_t w = 0; w < words_; ++w) {
      const Word same = x_left ? left[w] : ~left[w];
      agree[w] = set[w] & same;
      disagree[w] = set[w] & ~same;
      any_a |= agree[w];
      any_d |= disagree[w];
    }
    return {any_a != 0, any_d != 0};
  }

  void walk(int node, const Word* set, std::size_t level) {
    const auto& nodes = tree_->nodes;
    while (true) {
      const TreeNode& n = nodes[node];
      if (n.is_leaf()) {
        at_leaf(n.value, set);
        return;
      }
      const bool x_left = x_[n.feature] <= n.threshold;
      const int xc = x_left ? n.left : n.right;
      const int other = x_left ? n.right : n.left;
      const auto f = static_cast<std::size_t>(n.feature);
      if (origin_[f] == kFromX) {
        node = xc;
        continue;
      }
      Word* agree = scratch_.data() + level * 2 * words_;
      Word* disagree = agree + words_;
      const auto [has_a, has_d] =
          partition(set, masks_.left(tree_index_, static_cast<std::size_t>(node)), x_left, agree, disagree);
      if (!has_d) {
        node = xc;
        continue;
      }
      if (origin_[f] == kFromB) {
        if (has_a) walk(xc, agree, level + 1);
        walk(other, disagree, level + 1);
        return;
      }
      if (has_a) walk(xc, agree, level + 1);
      origin_[f] = kFromX;
      taken_x_.push_back(f);
      walk(xc, disagree, level + 1);
      taken_x_.pop_back();
      origin_[f] = kFromB;
      taken_b_.push_back(f);
      walk(other, disagree, level + 1);
      taken_b_.pop_back();
      origin_[f] = kUnseen;
      return;
    }
  }

  void at_leaf(double leaf_value, const Word* set) {
    const std::size_t a = taken_x_.size();
    const std::size_t c = taken_b_.size();
    const std::size_t d = a + c;
    if (d == 0 || leaf_value == 0.0) return;
    const double value = leaf_value * static_cast<double>(count(set));
    const auto& fact = factorials();
    if (a > 0) {
      const double w = value * fact[a - 1] * fact[c] / fact[d];
      for (auto f : taken_x_) phi_[f] += w;
    }
    if (c > 0) {
      const double w = value * fact[a] * fact[c - 1] / fact[d];
      for (auto f : taken_b_) phi_[f] -= w;
    }
    if (!pairs_ || d < 2) return;
    // Half of the Shapley interaction index of the unanimity-style game.
    const double scale = 0.5 * value / fact[d - 1];
    if (a >= 2) {
      const double w = scale * fact[a - 2] * fact[c];
      add_pairs(taken_x_, taken_x_, w, true);
    }
    if (c >= 2) {
      const double w = scale * fact[a] * fact[c - 2];
      add_pairs(taken_b_, taken_b_, w, true);
    }
    if (a >= 1 && c >= 1) {
      const double w = -scale * fact[a - 1] * fact[c - 1];
      add_pairs(taken_x_, taken_b_, w, false);
    }
  }

  void add_pairs(const std::vector<std::size_t>& left, const std::vector<std::size_t>& right,
                 double w, bool same_set) {
    for (std::size_t u = 0; u < left.size(); ++u) {
      const std::size_t start = same_set ? u + 1 : 0;
      for (std::size_t v = start; v < right.size(); ++v) {
        const std::size_t i = left[u];
        const std::size_t j = right[v];
        pairs_[i * p_ + j] += w;
        pairs_[j * p_ + i] += w;
      }
    }
  }

  static constexpr std::uint8_t kUnseen = 0;
  static constexpr std::uint8_t kFromX = 1;
  static constexpr std::uint8_t kFromB = 2;

  const BackgroundMasks& masks_;
  std::size_t words_;
  const Tree* tree_ = nullptr;
  std::size_t tree_index_ = 0;
  std::span<const double> x_;
  double* phi_ = nullptr;
  double* pairs_ = nullptr;
  std::size_t p_ = 0;
  std::vector<std::uint8_t> origin_;
  std::vector<std::size_t> taken_x_;
  std::vector<std::size_t> taken_b_;
  std::vector<Word> scratch_;
};

void check_inputs(const BoostedModel& model, const Matrix& rows, const Background& background,
                  const std::vector<std::string>& row_ids) {
  if (rows.cols() != model.n_features()) {
    throw SchemaError("rows have " + std::to_string(rows.cols()) + " columns, model expects " +
                      std::to_string(model.n_features()));
  }
  if (background.rows.rows() == 0) throw ConfigError("background must contain at least one row");
  if (background.rows.cols() != model.n_features()) {
    throw SchemaError("background has " + std::to_string(background.rows.cols()) +
                      " columns, model expects " + std::to_string(model.n_features()));
  }
  if (!row_ids.empty() && row_ids.size() != rows.rows()) {
    throw SchemaError("row_ids length does not match rows");
  }
}

std::vector<std::string> default_ids(std::vector<std::string> ids, std::size_t n) {
  if (!ids.empty()) return ids;
  ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) ids.push_back(std::to_string(i));
  return ids;
}

// Runs the walker for every (row, background row, tree) triple, row-parallel.
void explain_rows(const BoostedModel& model, const Matrix& rows, const Background& background,
                  Matrix& phi, std::vector<double>* pairs, const ShapOptions& options) {
  const std::size_t n = rows.rows();
  const std::size_t p = model.n_features();
  const std::size_t m = background.rows.rows();
  const double scale = model.learning_rate / static_cast<double>(m);
  const std::size_t threads = options.threads ? options.threads : default_threads();
  constexpr std::size_t kBlock = 64;
  const std::size_t blocks = (n + kBlock - 1) / kBlock;
  std::size_t done = 0;
  std::mutex progress_mutex;

  const BackgroundMasks masks(model, background.rows);
  int max_depth = 0;
  for (const auto& tree : model.trees) max_depth = std::max(max_depth, tree.depth());

  parallel_for(blocks, threads, [&](std::size_t first_block, std::size_t last_block) {
    PathWalker walker(p, masks, max_depth);
    for (std::size_t blk = first_block; blk < last_block; ++blk) {
      const std::size_t begin = blk * kBlock;
      const std::size_t end = std::min(n, begin + kBlock);
      for (std::size_t r = begin; r < end; ++r) {
        const auto x = rows.row(r);
        double* phi_row = phi.row(r).data();
        double* pair_block = pairs ? pairs->data() + r * p * p : nullptr;
        for (std::size_t t = 0; t < model.trees.size(); ++t) {
          walker.accumulate(t, model.trees[t], x, phi_row, pair_block, p);
        }
        for (std::size_t i = 0; i < p; ++i) phi_row[i] *= scale;
        if (pair_block) {
          for (std::size_t i = 0; i < p * p; ++i) pair_block[i] *= scale;
          for (std::size_t i = 0; i < p; ++i) {
            double off = 0.0;
            for (std::size_t j = 0; j < p; ++j) {
              if (j != i) off += pair_block[i * p + j];
            }
            pair_block[i * p + i] = phi_row[i] - off;
          }
        }
      }
      if (options.progress) {
        std::lock_guard lock(progress_mutex);
        done += end - begin;
        options.progress(done, n);
      }
    }
  });
}

}  // namespace

Background sample_background(const FeatureTable& table, std::span<const std::size_t> train_rows,
                             std::size_t size, std::uint64_t seed) {
  if (train_rows.empty() || size == 0) throw ConfigError("background needs at least one row");
  std::vector<std::size_t> chosen;
  if (size >= train_rows.size()) {
    chosen.assign(train_rows.begin(), train_rows.end());
  } else {
    std::mt19937_64 rng(seed);
    std::sample(train_rows.begin(), train_rows.end(), std::back_inserter(chosen), size, rng);
  }
  return Background{table.values().select_rows(chosen), seed};
}

Matrix InteractionTensor::main_attributions() const {
  Matrix out(n, p);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < p; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < p; ++j) s += at(r, i, j);
      out(r, i) = s;
    }
  }
  return out;
}

double background_mean(const BoostedModel& model, const Background& background) {
  const std::size_t m = background.rows.rows();
  if (m == 0) throw ConfigError("background must contain at least one row");
  double sum = 0.0;
  for (std::size_t k = 0; k < m; ++k) sum += model.predict_row(background.rows.row(k));
  return sum / static_cast<double>(m);
}

ShapResult shap_values(const BoostedModel& model, const Matrix& rows, const Background& background,
                       std::vector<std::string> row_ids, const ShapOptions& options) {
  check_inputs(model, rows, background, row_ids);
  ShapResult result;
  result.base_value = background_mean(model, background);
  result.phi = Matrix(rows.rows(), model.n_features());
  result.row_ids = default_ids(std::move(row_ids), rows.rows());
  result.feature_names = model.feature_names;
  explain_rows(model, rows, background, result.phi, nullptr, options);
  return result;
}

InteractionTensor shap_interactions(const BoostedModel& model, const Matrix& rows,
                                    const Background& background, std::vector<std::string> row_ids,
                                    const ShapOptions& options) {
  check_inputs(model, rows, background, row_ids);
  const std::size_t p = model.n_features();
  if (p > options.max_interaction_features) {
    throw ConfigError("interaction tensor over " + std::to_string(p) + " features exceeds the guard of " +
                      std::to_string(options.max_interaction_features));
  }
  InteractionTensor tensor;
  tensor.base_value = background_mean(model, background);
  tensor.n = rows.rows();
  tensor.p = p;
  tensor.values.assign(tensor.n * p * p, 0.0);
  tensor.row_ids = default_ids(std::move(row_ids), rows.rows());
  tensor.feature_names = model.feature_names;
  Matrix phi(rows.rows(), p);
  explain_rows(model, rows, background, phi, &tensor.values, options);
  return tensor;
}

// ---------------------------------------------------------------------------
// Oracles

namespace {

constexpr std::size_t kMaxOracleFeatures = 20;

// v(S) for every coalition S, encoded as a bitmask over features.
std::vector<double> coalition_values(const BoostedModel& model, std::span<const double> row,
                                     const Background& background) {
  const std::size_t p = model.n_features();
  if (p > kMaxOracleFeatures) {
    throw ConfigError("brute-force enumeration over " + std::to_string(p) +
                      " features exceeds the limit of " + std::to_string(kMaxOracleFeatures));
  }
  if (row.size() != p || background.rows.cols() != p) throw SchemaError("oracle input width mismatch");
  const std::size_t m = background.rows.rows();
  if (m == 0) throw ConfigError("background must contain at least one row");
  const std::size_t subsets = std::size_t{1} << p;
  std::vector<double> v(subsets, 0.0);
  std::vector<double> z(p);
  for (std::size_t s = 0; s < subsets; ++s) {
    double total = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const auto b = background.rows.row(k);
      for (std::size_t i = 0; i < p; ++i) z[i] = (s >> i) & 1u ? row[i] : b[i];
      total += model.predict_row(z);
    }
    v[s] = total / static_cast<double>(m);
  }
  return v;
}

}  // namespace

std::vector<double> brute_force_shap(const BoostedModel& model, std::span<const double> row,
                                     const Background& background) {
  const std::size_t p = model.n_features();
  const auto v = coalition_values(model, row, background);
  const auto& fact = factorials();
  std::vector<double> phi(p, 0.0);
  for (std::size_t i = 0; i < p; ++i) {
    const std::size_t bit = std::size_t{1} << i;
    for (std::size_t s = 0; s < v.size(); ++s) {
      if (s & bit) continue;
      const auto size = static_cast<std::size_t>(std::popcount(s));
      const double w = fact[size] * fact[p - size - 1] / fact[p];
      phi[i] += w * (v[s | bit] - v[s]);
    }
  }
  return phi;
}

Matrix brute_force_interactions(const BoostedModel& model, std::span<const double> row,
                                const Background& background) {
  const std::size_t p = model.n_features();
  const auto v = coalition_values(model, row, background);
  const auto& fact = factorials();
  Matrix out(p, p);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i + 1; j < p; ++j) {
      const std::size_t bi = std::size_t{1} << i;
      const std::size_t bj = std::size_t{1} << j;
      double sum = 0.0;
      for (std::size_t s = 0; s < v.size(); ++s) {
        if (s & (bi | bj)) continue;
        const auto size = static_cast<std::size_t>(std::popcount(s));
        const double w = fact[size] * fact[p - size - 2] / fact[p - 1];
        sum += w * (v[s | bi | bj] - v[s | bi] - v[s | bj] + v[s]);
      }
      out(i, j) = out(j, i) = 0.5 * sum;
    }
  }
  const auto phi = brute_force_shap(model, row, background);
  for (std::size_t i = 0; i < p; ++i) {
    double off = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      if (j != i) off += out(i, j);
    }
    out(i, i) = phi[i] - off;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Export / import

std::string shap_to_csv(const ShapResult& result) {
  std::string out = "row_id,feature,phi\n";
  for (std::size_t r = 0; r < result.phi.rows(); ++r) {
    for (std::size_t i = 0; i < result.phi.cols(); ++i) {
      out += io::csv_line({result.row_ids[r], result.feature_names[i], io::format_double(result.phi(r, i))});
    }
  }
  return out;
}

std::string shap_header_json(const ShapResult& result, std::size_t background_size,
                             std::uint64_t seed) {
  nlohmann::json doc = {{"base_value", result.base_value},
                        {"features", result.feature_names},
                        {"n_rows", result.phi.rows()},
                        {"background_size", background_size},
                        {"seed", seed},
                        {"value_function", "interventional"}};
  return doc.dump(2) + "\n";
}

std::string interactions_to_csv(const InteractionTensor& tensor) {
  std::string out = "row_id,feature_i,feature_j,phi_ij\n";
  for (std::size_t r = 0; r < tensor.n; ++r) {
    for (std::size_t i = 0; i < tensor.p; ++i) {
      for (std::size_t j = i; j < tensor.p; ++j) {
        out += io::csv_line({tensor.row_ids[r], tensor.feature_names[i], tensor.feature_names[j],
                             io::format_double(tensor.at(r, i, j))});
      }
    }
  }
  return out;
}

namespace {

double require_number(const std::string& cell, std::size_t line) {
  auto v = io::parse_double(cell);
  if (!v) throw ParseError("unparseable number '" + cell + "' on line " + std::to_string(line + 2));
  return *v;
}

}  // namespace

ShapResult read_shap(const std::filesystem::path& csv_path, const std::filesystem::path& header_path) {
  ShapResult result;
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(io::read_file(header_path));
    result.base_value = header.at("base_value").get<double>();
    result.feature_names = header.at("features").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed SHAP header: ") + e.what());
  }
  const auto doc = io::read_csv(csv_path);
  const auto c_id = doc.find("row_id");
  const auto c_feat = doc.find("feature");
  const auto c_phi = doc.find("phi");
  if (!c_id || !c_feat || !c_phi) throw SchemaError("SHAP CSV needs row_id, feature, phi columns");
  const std::size_t p = result.feature_names.size();
  std::map<std::string, std::size_t> feature_index;
  for (std::size_t i = 0; i < p; ++i) feature_index[result.feature_names[i]] = i;
  if (p == 0 || doc.rows.size() % p != 0) throw SchemaError("SHAP CSV is not a full row x feature grid");
  const std::size_t n = doc.rows.size() / p;
  result.phi = Matrix(n, p);
  result.row_ids.resize(n);
  for (std::size_t k = 0; k < doc.rows.size(); ++k) {
    const auto& row = doc.rows[k];
    const std::size_t r = k / p;
    const auto it = feature_index.find(row[*c_feat]);
    if (it == feature_index.end()) throw SchemaError("unknown feature '" + row[*c_feat] + "' in SHAP CSV");
    if (k % p == 0) {
      result.row_ids[r] = row[*c_id];
    } else if (row[*c_id] != result.row_ids[r]) {
      throw SchemaError("SHAP CSV rows are not grouped by row_id");
    }
    result.phi(r, it->second) = require_number(row[*c_phi], k);
  }
  return result;
}

InteractionTensor read_interactions(const std::filesystem::path& csv_path, double base_value) {
  const auto doc = io::read_csv(csv_path);
  const auto c_id = doc.find("row_id");
  const auto c_i = doc.find("feature_i");
  const auto c_j = doc.find("feature_j");
  const auto c_v = doc.find("phi_ij");
  if (!c_id || !c_i || !c_j || !c_v) {
    throw SchemaError("interaction CSV needs row_id, feature_i, feature_j, phi_ij columns");
  }
  InteractionTensor t;
  t.base_value = base_value;
  std::map<std::string, std::size_t> feature_index;
  // Features appear in order along the first row's diagonal-first upper triangle.
  for (const auto& row : doc.rows) {
    if (!t.row_ids.empty() && row[*c_id] != doc.rows.front()[*c_id]) break;
    if (t.row_ids.empty()) t.row_ids.push_back(row[*c_id]);
    if (row[*c_i] == row[*c_j]) {
      feature_index.emplace(row[*c_i], t.feature_names.size());
      t.feature_names.push_back(row[*c_i]);
    }
  }
  t.p = t.feature_names.size();
  const std::size_t per_row = t.p * (t.p + 1) / 2;
  if (t.p == 0 || doc.rows.size() % per_row != 0) throw SchemaError("interaction CSV is not a full upper triangle");
  t.n = doc.rows.size() / per_row;
  t.values.assign(t.n * t.p * t.p, 0.0);
  t.row_ids.resize(t.n);
  for (std::size_t k = 0; k < doc.rows.size(); ++k) {
    const auto& row = doc.rows[k];
    const std::size_t r = k / per_row;
    if (k % per_row == 0) t.row_ids[r] = row[*c_id];
    const auto fi = feature_index.find(row[*c_i]);
    const auto fj = feature_index.find(row[*c_j]);
    if (fi == feature_index.end() || fj == feature_index.end()) {
      throw SchemaError("unknown feature in interaction CSV line " + std::to_string(k + 2));
    }
    const double v = require_number(row[*c_v], k);
    t.values[(r * t.p + fi->second) * t.p + fj->second] = v;
    t.values[(r * t.p + fj->second) * t.p + fi->second] = v;
  }
  return t;
}

}  // namespace modal_attrib

#include "modewise/baselines.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>

#include "modewise/error.hpp"
#include "modewise/train.hpp"

namespace modewise {
namespace {

constexpr std::size_t kMaxClasses = 256;

std::uint8_t majority(const std::vector<std::size_t>& counts) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < counts.size(); ++c) {
    if (counts[c] > counts[best]) best = c;
  }
  return static_cast<std::uint8_t>(best);
}

FeatureMatrix take_rows(const FeatureMatrix& x, const std::vector<std::size_t>& rows) {
  FeatureMatrix out;
  out.rows = rows.size();
  out.cols = x.cols;
  out.values.reserve(rows.size() * x.cols);
  for (std::size_t r : rows) {
    const auto row = x.row(r);
    out.values.insert(out.values.end(), row.begin(), row.end());
  }
  return out;
}

std::vector<std::uint8_t> take_labels(std::span<const std::uint8_t> labels,
                                      const std::vector<std::size_t>& rows) {
  std::vector<std::uint8_t> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(labels[r]);
  return out;
}

TuneResult best_of(std::span<const std::size_t> candidates, const std::vector<double>& sums,
                   std::size_t folds) {
  TuneResult result;
  std::size_t best = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double mean = sums[i] / static_cast<double>(folds);
    result.scores.emplace_back(candidates[i], mean);
    const double best_mean = result.scores[best].second;
    if (mean > best_mean || (mean == best_mean && candidates[i] < candidates[best])) best = i;
  }
  result.best = candidates[best];
  return result;
}

}  // namespace

void Standardizer::fit(const FeatureMatrix& x) {
  mean_.assign(x.cols, 0.0);
  scale_.assign(x.cols, 1.0);
  if (x.rows == 0) return;
  for (std::size_t r = 0; r < x.rows; ++r) {
    for (std::size_t c = 0; c < x.cols; ++c) mean_[c] += x.values[r * x.cols + c];
  }
  for (auto& m : mean_) m /= static_cast<double>(x.rows);
  std::vector<double> var(x.cols, 0.0);
  for (std::size_t r = 0; r < x.rows; ++r) {
    for (std::size_t c = 0; c < x.cols; ++c) {
      const double d = x.values[r * x.cols + c] - mean_[c];
      var[c] += d * d;
    }
  }
  for (std::size_t c = 0; c < x.cols; ++c) {
    const double sd = std::sqrt(var[c] / static_cast<double>(x.rows));
    scale_[c] = sd > 0.0 ? sd : 1.0;
  }
}

FeatureMatrix Standardizer::transform(const FeatureMatrix& x) const {
  if (x.cols != mean_.size()) throw DataError("standardizer fitted on a different width");
  FeatureMatrix out = x;
  for (std::size_t r = 0; r < x.rows; ++r) {
    for (std::size_t c = 0; c < x.cols; ++c) {
      auto& v = out.values[r * x.cols + c];
      v = (v - mean_[c]) / scale_[c];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

// Training rows ordered by (distance, index), truncated to the first k.
std::vector<std::pair<double, std::size_t>> nearest(const FeatureMatrix& train,
                                                    std::span<const double> query,
                                                    std::size_t k) {
  std::vector<std::pair<double, std::size_t>> dist(train.rows);
  for (std::size_t r = 0; r < train.rows; ++r) {
    const auto row = train.row(r);
    double d = 0.0;
    for (std::size_t c = 0; c < train.cols; ++c) {
      const double diff = row[c] - query[c];
      d += diff * diff;
    }
    dist[r] = {d, r};
  }
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
  dist.resize(k);
  return dist;
}

std::uint8_t vote(const std::vector<std::pair<double, std::size_t>>& neighbours, std::size_t k,
                  std::span<const std::uint8_t> labels) {
  std::array<std::size_t, kMaxClasses> counts{};
  for (std::size_t i = 0; i < k; ++i) ++counts[labels[neighbours[i].second]];
  std::size_t best = 0;
  for (std::size_t c = 1; c < counts.size(); ++c) {
    if (counts[c] > counts[best]) best = c;
  }
  return static_cast<std::uint8_t>(best);
}

}  // namespace

std::uint8_t knn_classify(const FeatureMatrix& train, std::span<const std::uint8_t> labels,
                          std::size_t k, std::span<const double> query) {
  if (k == 0 || k > train.rows) {
    throw UsageError("k must be in [1, " + std::to_string(train.rows) + "]");
  }
  if (query.size() != train.cols) throw DataError("query width differs from training features");
  return vote(nearest(train, query, k), k, labels);
}

std::vector<std::uint8_t> knn_predict(const FeatureMatrix& train,
                                      std::span<const std::uint8_t> labels, std::size_t k,
                                      const FeatureMatrix& queries) {
  std::vector<std::uint8_t> out;
  out.reserve(queries.rows);
  for (std::size_t q = 0; q < queries.rows; ++q) {
    out.push_back(knn_classify(train, labels, k, queries.row(q)));
  }
  return out;
}

// ---------------------------------------------------------------------------

void DecisionTree::fit(const FeatureMatrix& x, std::span<const std::uint8_t> labels,
                       std::size_t max_depth, std::size_t num_classes) {
  if (x.rows == 0) throw DataError("cannot fit a tree on no samples");
  if (labels.size() != x.rows) throw DataError("one label per row required");
  if (num_classes == 0 || num_classes > kMaxClasses) throw UsageError("bad class count");
  max_depth_ = max_depth;
  num_classes_ = num_classes;
  nodes_.clear();
  std::vector<std::size_t> idx(x.rows);
  std::iota(idx.begin(), idx.end(), 0);
  grow(x, labels, idx, 0, idx.size(), 0);
}

std::size_t DecisionTree::grow(const FeatureMatrix& x, std::span<const std::uint8_t> labels,
                               std::vector<std::size_t>& idx, std::size_t begin, std::size_t end,
                               std::size_t depth) {
  const std::size_t node_id = nodes_.size();
  nodes_.emplace_back();
  const std::size_t n = end - begin;
  std::vector<std::size_t> counts(num_classes_, 0);
  for (std::size_t i = begin; i < end; ++i) ++counts[labels[idx[i]]];
  nodes_[node_id].label = majority(counts);
  const bool pure = counts[nodes_[node_id].label] == n;
  if (pure || depth >= max_depth_) return node_id;

  // Minimizing weighted Gini is maximizing sum(l^2)/nl + sum(r^2)/nr. Kept as the
  // exact fraction num/den so equal-impurity ties resolve by order, not rounding.
  unsigned __int128 best_num = 0, best_den = 1;
  bool found = false;
  std::size_t best_feature = 0;
  double best_threshold = 0.0;
  std::vector<std::size_t> order(idx.begin() + static_cast<std::ptrdiff_t>(begin),
                                 idx.begin() + static_cast<std::ptrdiff_t>(end));
  std::vector<std::size_t> left(num_classes_), right(num_classes_);
  auto sum_sq = [](const std::vector<std::size_t>& c) {
    unsigned __int128 s = 0;
    for (auto v : c) s += static_cast<unsigned __int128>(v) * v;
    return s;
  };
  for (std::size_t f = 0; f < x.cols; ++f) {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return x.values[a * x.cols + f] < x.values[b * x.cols + f];
    });
    std::fill(left.begin(), left.end(), 0);
    right = counts;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const std::uint8_t y = labels[order[i]];
      ++left[y];
      --right[y];
      const double v = x.values[order[i] * x.cols + f];
      const double next = x.values[order[i + 1] * x.cols + f];
      if (!(v < next)) continue;
      const std::size_t nl = i + 1, nr = n - nl;
      const unsigned __int128 num = sum_sq(left) * nr + sum_sq(right) * nl;
      const unsigned __int128 den = static_cast<unsigned __int128>(nl) * nr;
      if (!found || num * best_den > best_num * den) {
        found = true;
        best_num = num;
        best_den = den;
        best_feature = f;
        double mid = 0.5 * (v + next);
        if (!(mid < next)) mid = v;
        best_threshold = mid;
      }
    }
  }
  if (!found) return node_id;

  auto mid_it = std::stable_partition(
      idx.begin() + static_cast<std::ptrdiff_t>(begin), idx.begin() + static_cast<std::ptrdiff_t>(end),
      [&](std::size_t r) { return x.values[r * x.cols + best_feature] <= best_threshold; });
  const auto mid = static_cast<std::size_t>(mid_it - idx.begin());
  const std::size_t left_id = grow(x, labels, idx, begin, mid, depth + 1);
  const std::size_t right_id = grow(x, labels, idx, mid, end, depth + 1);
  Node& node = nodes_[node_id];
  node.leaf = false;
  node.feature = best_feature;
  node.threshold = best_threshold;
  node.left = left_id;
  node.right = right_id;
  return node_id;
}

std::uint8_t DecisionTree::predict(std::span<const double> row, std::size_t depth_limit) const {
  if (nodes_.empty()) throw UsageError("decision tree is not fitted");
  std::size_t id = 0;
  for (std::size_t depth = 0; !nodes_[id].leaf && depth < depth_limit; ++depth) {
    id = row[nodes_[id].feature] <= nodes_[id].threshold ? nodes_[id].left : nodes_[id].right;
  }
  return nodes_[id].label;
}

std::vector<std::uint8_t> DecisionTree::predict(const FeatureMatrix& x,
                                                std::size_t depth_limit) const {
  std::vector<std::uint8_t> out;
  out.reserve(x.rows);
  for (std::size_t r = 0; r < x.rows; ++r) out.push_back(predict(x.row(r), depth_limit));
  return out;
}

std::size_t DecisionTree::depth() const {
  if (nodes_.empty()) return 0;
  std::size_t deepest = 0;
  std::vector<std::pair<std::size_t, std::size_t>> stack = {{0, 0}};
  while (!stack.empty()) {
    const auto [id, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    if (!nodes_[id].leaf) {
      stack.emplace_back(nodes_[id].left, d + 1);
      stack.emplace_back(nodes_[id].right, d + 1);
    }
  }
  return deepest;
}

// ---------------------------------------------------------------------------

TuneResult tune_knn(const FeatureMatrix& x, std::span<const std::uint8_t> labels,
                    std::span<const std::size_t> candidates, std::size_t folds,
                    std::uint64_t seed) {
  if (candidates.empty()) throw UsageError("no k candidates");
  const std::size_t k_max = *std::max_element(candidates.begin(), candidates.end());
  const auto fold_idx = kfold_indices(x.rows, folds, seed);
  std::vector<double> sums(candidates.size(), 0.0);
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> fit_rows;
    for (std::size_t g = 0; g < folds; ++g) {
      if (g != f) fit_rows.insert(fit_rows.end(), fold_idx[g].begin(), fold_idx[g].end());
    }
    std::sort(fit_rows.begin(), fit_rows.end());
    if (k_max > fit_rows.size()) throw UsageError("k exceeds the training fold size");
    Standardizer scaler;
    const auto fit_x = take_rows(x, fit_rows);
    scaler.fit(fit_x);
    const auto train = scaler.transform(fit_x);
    const auto train_y = take_labels(labels, fit_rows);
    const auto held = scaler.transform(take_rows(x, fold_idx[f]));
    const auto held_y = take_labels(labels, fold_idx[f]);
    std::vector<std::size_t> correct(candidates.size(), 0);
    for (std::size_t q = 0; q < held.rows; ++q) {
      const auto nn = nearest(train, held.row(q), k_max);
      for (std::size_t c = 0; c < candidates.size(); ++c) {
        correct[c] += vote(nn, candidates[c], train_y) == held_y[q];
      }
    }
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      sums[c] += static_cast<double>(correct[c]) / static_cast<double>(held.rows);
    }
  }
  return best_of(candidates, sums, folds);
}

TuneResult tune_tree(const FeatureMatrix& x, std::span<const std::uint8_t> labels,
                     std::span<const std::size_t> candidates, std::size_t folds,
                     std::uint64_t seed) {
  if (candidates.empty()) throw UsageError("no depth candidates");
  const std::size_t d_max = *std::max_element(candidates.begin(), candidates.end());
  const auto fold_idx = kfold_indices(x.rows, folds, seed);
  std::vector<double> sums(candidates.size(), 0.0);
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> fit_rows;
    for (std::size_t g = 0; g < folds; ++g) {
      if (g != f) fit_rows.insert(fit_rows.end(), fold_idx[g].begin(), fold_idx[g].end());
    }
    std::sort(fit_rows.begin(), fit_rows.end());
    DecisionTree tree;
    const auto fit_y = take_labels(labels, fit_rows);
    tree.fit(take_rows(x, fit_rows), fit_y, d_max);
    const auto held = take_rows(x, fold_idx[f]);
    const auto held_y = take_labels(labels, fold_idx[f]);
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      const auto pred = tree.predict(held, candidates[c]);
      std::size_t correct = 0;
      for (std::size_t q = 0; q < pred.size(); ++q) correct += pred[q] == held_y[q];
      sums[c] += static_cast<double>(correct) / static_cast<double>(held.rows);
    }
  }
  return best_of(candidates, sums, folds);
}

}  // namespace modewise

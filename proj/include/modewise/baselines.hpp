#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <vector>

namespace modewise {

/// Row-major feature matrix.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(values).subspan(r * cols, cols);
  }
};

/// z-score scaling with statistics from the data passed to fit(). Constant
/// columns are centred but not scaled.
class Standardizer {
 public:
  void fit(const FeatureMatrix& x);
  FeatureMatrix transform(const FeatureMatrix& x) const;

  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& scale() const { return scale_; }

 private:
  std::vector<double> mean_;
  std::vector<double> scale_;
};

/// Euclidean k-nearest-neighbour vote; distance ties keep the lower training
/// index, vote ties go to the smallest label. Throws UsageError if k > n or k == 0.
std::uint8_t knn_classify(const FeatureMatrix& train, std::span<const std::uint8_t> labels,
                          std::size_t k, std::span<const double> query);
std::vector<std::uint8_t> knn_predict(const FeatureMatrix& train,
                                      std::span<const std::uint8_t> labels, std::size_t k,
                                      const FeatureMatrix& queries);

/// Binary CART with Gini impurity and axis-aligned splits at midpoints between
/// consecutive distinct values. Among equal-impurity splits the first feature,
/// then the lowest threshold, wins. Leaves predict the majority label (smallest on ties).
class DecisionTree {
 public:
  void fit(const FeatureMatrix& x, std::span<const std::uint8_t> labels, std::size_t max_depth,
           std::size_t num_classes = 5);
  /// `depth_limit` stops descent early, giving the tree that fit() with that
  /// max_depth would have grown (splits never depend on the depth cap).
  std::uint8_t predict(std::span<const double> row, std::size_t depth_limit = SIZE_MAX) const;
  std::vector<std::uint8_t> predict(const FeatureMatrix& x,
                                    std::size_t depth_limit = SIZE_MAX) const;

  struct Node {
    bool leaf = true;
    std::uint8_t label = 0;
    std::size_t feature = 0;
    double threshold = 0.0;  // go left when value <= threshold
    std::size_t left = 0;
    std::size_t right = 0;
  };
  const std::vector<Node>& nodes() const { return nodes_; }
  std::size_t depth() const;

 private:
  std::size_t grow(const FeatureMatrix& x, std::span<const std::uint8_t> labels,
                   std::vector<std::size_t>& idx, std::size_t begin, std::size_t end,
                   std::size_t depth);

  std::size_t max_depth_ = 0;
  std::size_t num_classes_ = 5;
  std::vector<Node> nodes_;
};

struct TuneResult {
  std::size_t best = 0;
  std::vector<std::pair<std::size_t, double>> scores;  // (hyperparameter, mean CV accuracy)
};

/// k-fold CV over the given candidate values; ties go to the smaller value.
/// Standardization is fitted per fold on the training part.
TuneResult tune_knn(const FeatureMatrix& x, std::span<const std::uint8_t> labels,
                    std::span<const std::size_t> candidates, std::size_t folds,
                    std::uint64_t seed);
TuneResult tune_tree(const FeatureMatrix& x, std::span<const std::uint8_t> labels,
                     std::span<const std::size_t> candidates, std::size_t folds,
                     std::uint64_t seed);

}  // namespace modewise

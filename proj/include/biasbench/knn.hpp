#pragma once

#include <span>
#include <vector>

#include "biasbench/corpus.hpp"
#include "biasbench/matrix.hpp"

namespace biasbench::knn {

/// Lazy k-nearest-neighbour classifier over Euclidean distance.
///
/// Neighbour order is (distance, training row) ascending, so equal distances
/// favour the lower row. Vote ties go to the tied class whose member is
/// nearest.
class KnnModel {
public:
  KnnModel(Matrix points, std::vector<BiasClass> labels, std::size_t k);

  std::size_t k() const noexcept { return k_; }
  std::size_t size() const noexcept { return points_.rows(); }
  std::size_t dim() const noexcept { return points_.cols(); }
  const Matrix& points() const noexcept { return points_; }
  const std::vector<BiasClass>& labels() const noexcept { return labels_; }

  /// Training rows of the `count` nearest neighbours of `query`, nearest first.
  std::vector<std::size_t> nearest(std::span<const double> query, std::size_t count) const;

  /// Majority label among the first `k` entries of an ordered neighbour list.
  BiasClass vote(std::span<const std::size_t> ordered_neighbors, std::size_t k) const;

private:
  Matrix points_;
  std::vector<BiasClass> labels_;
  std::size_t k_;
};

/// Throws DataError if k is zero or exceeds the training size, the set is
/// empty, rows and labels differ in count, or a value is non-finite.
KnnModel fit(const Matrix& train_vectors, std::span<const BiasClass> train_labels, std::size_t k);

BiasClass predict(const KnnModel& model, std::span<const double> query);

std::vector<BiasClass> predict_batch(const KnnModel& model, const Matrix& queries);

/// Fraction of positions where the labels agree.
double accuracy(std::span<const BiasClass> predicted, std::span<const BiasClass> truth);

/// Leave-one-out 1-NN agreement: the fraction of rows whose nearest other row
/// carries the same label. Used to score class separation in projections.
double neighbor_purity(const Matrix& points, std::span<const BiasClass> labels);

}  // namespace biasbench::knn

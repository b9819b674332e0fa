#include "biasbench/knn.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include "biasbench/embedding_store.hpp"
#include "biasbench/errors.hpp"

namespace biasbench::knn {

KnnModel::KnnModel(Matrix points, std::vector<BiasClass> labels, std::size_t k)
    : points_(std::move(points)), labels_(std::move(labels)), k_(k) {
  if (points_.rows() == 0) throw DataError("knn: empty training set");
  if (labels_.size() != points_.rows()) throw DataError("knn: points and labels differ in count");
  if (k_ == 0) throw DataError("knn: k must be at least 1");
  if (k_ > points_.rows())
    throw DataError("knn: k=" + std::to_string(k_) + " exceeds training size " + std::to_string(points_.rows()));
  for (double v : points_.values())
    if (!std::isfinite(v)) throw DataError("knn: non-finite training value");
}

std::vector<std::size_t> KnnModel::nearest(std::span<const double> query, std::size_t count) const {
  if (query.size() != dim())
    throw DataError("knn: query has " + std::to_string(query.size()) + " values, model expects " +
                    std::to_string(dim()));
  count = std::min(count, size());
  std::vector<std::pair<double, std::size_t>> dist(size());
  for (std::size_t i = 0; i < size(); ++i) dist[i] = {euclidean(points_.row(i), query), i};
  const auto mid = dist.begin() + static_cast<std::ptrdiff_t>(count);
  std::partial_sort(dist.begin(), mid, dist.end());
  std::vector<std::size_t> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = dist[i].second;
  return out;
}

BiasClass KnnModel::vote(std::span<const std::size_t> ordered_neighbors, std::size_t k) const {
  if (k == 0 || k > ordered_neighbors.size()) throw std::invalid_argument("knn: vote over too few neighbours");
  std::array<std::size_t, kNumClasses> counts{};
  for (std::size_t i = 0; i < k; ++i) ++counts[class_index(labels_[ordered_neighbors[i]])];
  const auto top = *std::max_element(counts.begin(), counts.end());
  for (std::size_t i = 0; i < k; ++i) {
    const auto label = labels_[ordered_neighbors[i]];
    if (counts[class_index(label)] == top) return label;
  }
  return labels_[ordered_neighbors[0]];  // unreachable
}

KnnModel fit(const Matrix& train_vectors, std::span<const BiasClass> train_labels, std::size_t k) {
  return KnnModel(train_vectors, std::vector<BiasClass>(train_labels.begin(), train_labels.end()), k);
}

BiasClass predict(const KnnModel& model, std::span<const double> query) {
  for (double v : query)
    if (!std::isfinite(v)) throw DataError("knn: non-finite query value");
  const auto neighbors = model.nearest(query, model.k());
  return model.vote(neighbors, model.k());
}

std::vector<BiasClass> predict_batch(const KnnModel& model, const Matrix& queries) {
  std::vector<BiasClass> out;
  out.reserve(queries.rows());
  for (std::size_t i = 0; i < queries.rows(); ++i) out.push_back(predict(model, queries.row(i)));
  return out;
}

double accuracy(std::span<const BiasClass> predicted, std::span<const BiasClass> truth) {
  if (predicted.size() != truth.size()) throw DataError("accuracy: length mismatch");
  if (predicted.empty()) throw DataError("accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

double neighbor_purity(const Matrix& points, std::span<const BiasClass> labels) {
  if (points.rows() < 2) throw DataError("neighbor_purity: need at least two points");
  if (labels.size() != points.rows()) throw DataError("neighbor_purity: points and labels differ in count");
  std::size_t agree = 0;
  for (std::size_t i = 0; i < points.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_j = i;
    for (std::size_t j = 0; j < points.rows(); ++j) {
      if (j == i) continue;
      const double d = euclidean(points.row(i), points.row(j));
      if (d < best) {
        best = d;
        best_j = j;
      }
    }
    agree += labels[best_j] == labels[i];
  }
  return static_cast<double>(agree) / static_cast<double>(points.rows());
}

}  // namespace biasbench::knn

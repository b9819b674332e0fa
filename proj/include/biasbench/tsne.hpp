#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "biasbench/embedding_store.hpp"
#include "biasbench/matrix.hpp"

namespace biasbench::tsne {

/// Optimizer settings. The defaults form the reference configuration used
/// for every published projection.
struct TsneConfig {
  std::size_t out_dim = 2;
  double perplexity = 30.0;
  std::size_t n_iter = 1000;
  double learning_rate = 200.0;
  double early_exaggeration = 12.0;
  std::size_t exaggeration_iters = 250;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  std::size_t momentum_switch_iter = 250;
  /// Standard deviation of the Gaussian initialization.
  double init_scale = 1e-4;
  std::uint64_t seed = 0;
  double perplexity_tol = 1e-5;
  std::size_t perplexity_max_steps = 50;

  /// Throws ConfigError if any field is out of range for an n-point input.
  void validate(std::size_t n_points) const;
};

/// Floor applied to joint and low-dimensional affinities.
inline constexpr double kAffinityFloor = 1e-12;

struct ConditionalRow {
  std::vector<double> probabilities;
  double sigma = 0.0;
  /// Base-2 entropy of `probabilities`.
  double entropy_bits = 0.0;
  std::size_t steps = 0;
  bool converged = false;
};

/// Gaussian conditional distribution over one point's neighbours whose
/// entropy matches log2(perplexity). `sq_dists` excludes the point itself.
/// Bisects on the precision 1/(2 sigma^2); on hitting `max_steps` the best
/// sigma seen is returned with converged = false.
/// Throws NumericError if every distance is zero.
ConditionalRow conditional_affinities(std::span<const double> sq_dists, double perplexity, double tol,
                                      std::size_t max_steps);

/// Pairwise squared Euclidean distances.
Matrix squared_distances(const Matrix& points);

struct JointAffinities {
  Matrix p;
  std::vector<double> sigmas;
  /// Rows whose perplexity search stopped at max_steps.
  std::vector<std::size_t> unconverged_rows;
  /// Sum of P before the floor was applied.
  double unfloored_sum = 0.0;
};

/// Symmetrized input affinities p_ij = (p_j|i + p_i|j) / 2N, zero diagonal,
/// off-diagonal entries floored at kAffinityFloor.
JointAffinities joint_affinities(const Matrix& points, const TsneConfig& config);

struct LowDimAffinities {
  Matrix q;
  /// Unnormalized Student-t weights (1 + |y_i - y_j|^2)^-1, zero diagonal.
  Matrix w;
  double unfloored_sum = 0.0;
};

LowDimAffinities low_dim_affinities(const Matrix& coords);

/// Sum over i != j of p_ij log(p_ij / q_ij).
double kl_divergence(const Matrix& p, const Matrix& q);

/// Row i = 4 sum_j (p_ij - q_ij) w_ij (y_i - y_j).
Matrix tsne_gradient(const Matrix& p, const Matrix& q, const Matrix& w, const Matrix& coords);

struct Projection2D {
  Matrix coords;
  std::vector<double> kl_trace;
  std::vector<double> sigmas;
  std::vector<std::size_t> unconverged_rows;
};

/// Exact-gradient t-SNE. kl_trace[t] is the un-exaggerated KL divergence at
/// the start of iteration t.
Projection2D run_tsne(const Matrix& points, const TsneConfig& config);
Projection2D run_tsne(const EmbeddingSet& set, const TsneConfig& config);

}  // namespace biasbench::tsne

#include "biasbench/tsne.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "biasbench/errors.hpp"
#include "biasbench/io.hpp"
#include "biasbench/random.hpp"

namespace biasbench::tsne {

namespace {

void require_square(const Matrix& m, std::size_t n, const char* what) {
  if (m.rows() != n || m.cols() != n)
    throw std::invalid_argument(std::string("tsne: ") + what + " must be " + std::to_string(n) + "x" +
                                std::to_string(n));
}

void compute_low_dim(const Matrix& y, LowDimAffinities& out) {
  const std::size_t n = y.rows();
  const std::size_t dim = y.cols();
  if (out.w.rows() != n || out.w.cols() != n) {
    out.w = Matrix(n, n);
    out.q = Matrix(n, n);
  }
  for (std::size_t i = 0; i < n; ++i) {
    out.w(i, i) = 0.0;
    const auto yi = y.row(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto yj = y.row(j);
      double d2 = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        const double diff = yi[k] - yj[k];
        d2 += diff * diff;
      }
      const double w = 1.0 / (1.0 + d2);
      out.w(i, j) = w;
      out.w(j, i) = w;
    }
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) total += out.w(i, j);

  double qsum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) {
        out.q(i, j) = 0.0;
        continue;
      }
      const double q = out.w(i, j) / total;
      qsum += q;
      out.q(i, j) = std::max(q, kAffinityFloor);
    }
  }
  out.unfloored_sum = qsum;
}

void accumulate_gradient(const Matrix& p, double p_scale, const Matrix& q, const Matrix& w, const Matrix& y,
                         Matrix& grad) {
  const std::size_t n = y.rows();
  const std::size_t dim = y.cols();
  for (std::size_t i = 0; i < n; ++i) {
    auto gi = grad.row(i);
    std::fill(gi.begin(), gi.end(), 0.0);
    const auto yi = y.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double mult = (p_scale * p(i, j) - q(i, j)) * w(i, j);
      const auto yj = y.row(j);
      for (std::size_t k = 0; k < dim; ++k) gi[k] += mult * (yi[k] - yj[k]);
    }
    for (std::size_t k = 0; k < dim; ++k) gi[k] *= 4.0;
  }
}

}  // namespace

void TsneConfig::validate(std::size_t n_points) const {
  if (out_dim == 0) throw ConfigError("tsne: out_dim must be positive");
  if (!(perplexity > 1.0)) throw ConfigError("tsne: perplexity must exceed 1");
  if (!(perplexity < static_cast<double>(n_points) - 1.0))
    throw ConfigError("tsne: perplexity " + format_general(perplexity, 6) + " must be below N-1 = " +
                      std::to_string(n_points > 0 ? n_points - 1 : 0));
  if (n_iter == 0) throw ConfigError("tsne: n_iter must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("tsne: learning_rate must be positive");
  if (!(early_exaggeration >= 1.0)) throw ConfigError("tsne: early_exaggeration must be >= 1");
  if (!(init_scale > 0.0)) throw ConfigError("tsne: init_scale must be positive");
  if (!(perplexity_tol > 0.0)) throw ConfigError("tsne: perplexity_tol must be positive");
  if (perplexity_max_steps == 0) throw ConfigError("tsne: perplexity_max_steps must be positive");
  if (!(initial_momentum >= 0.0 && initial_momentum < 1.0 && final_momentum >= 0.0 && final_momentum < 1.0))
    throw ConfigError("tsne: momentum must lie in [0,1)");
}

ConditionalRow conditional_affinities(std::span<const double> sq_dists, double perplexity, double tol,
                                      std::size_t max_steps) {
  if (sq_dists.empty()) throw std::invalid_argument("conditional_affinities: empty distance row");
  double dmin = std::numeric_limits<double>::infinity();
  double dmax = 0.0;
  double dsum = 0.0;
  for (double d : sq_dists) {
    if (!(d >= 0.0) || !std::isfinite(d)) throw std::invalid_argument("conditional_affinities: bad distance");
    dmin = std::min(dmin, d);
    dmax = std::max(dmax, d);
    dsum += d;
  }
  if (dmax == 0.0) throw NumericError("all distances are zero (duplicate point)");

  const double target = std::log2(perplexity);
  const std::size_t n = sq_dists.size();
  std::vector<double> probs(n);

  // Entropy in bits of the distribution at precision beta; probs left normalized.
  auto evaluate = [&](double beta) {
    double z = 0.0;
    double weighted = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double shifted = sq_dists[j] - dmin;
      const double v = std::exp(-beta * shifted);
      probs[j] = v;
      z += v;
      weighted += v * shifted;
    }
    for (auto& v : probs) v /= z;
    return (std::log(z) + beta * weighted / z) / std::numbers::ln2;
  };

  double beta = static_cast<double>(n) / dsum;
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  double best_beta = beta;
  double best_gap = std::numeric_limits<double>::infinity();
  double best_entropy = 0.0;
  ConditionalRow row;
  for (std::size_t step = 1; step <= max_steps; ++step) {
    const double h = evaluate(beta);
    const double gap = std::abs(h - target);
    row.steps = step;
    if (gap < best_gap) {
      best_gap = gap;
      best_beta = beta;
      best_entropy = h;
    }
    if (gap <= tol) {
      row.converged = true;
      break;
    }
    if (h > target) {
      lo = beta;
      beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
    } else {
      hi = beta;
      beta = lo == 0.0 ? beta * 0.5 : 0.5 * (beta + lo);
    }
  }
  if (best_beta != beta || !row.converged) best_entropy = evaluate(best_beta);
  row.probabilities = std::move(probs);
  row.sigma = std::sqrt(1.0 / (2.0 * best_beta));
  row.entropy_bits = best_entropy;
  return row;
}

Matrix squared_distances(const Matrix& points) {
  const std::size_t n = points.rows();
  const std::size_t dim = points.cols();
  Matrix d(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto xi = points.row(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto xj = points.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        const double diff = xi[k] - xj[k];
        s += diff * diff;
      }
      d(i, j) = s;
      d(j, i) = s;
    }
  }
  return d;
}

JointAffinities joint_affinities(const Matrix& points, const TsneConfig& config) {
  const std::size_t n = points.rows();
  if (n < 3) throw ConfigError("tsne: need at least 3 points");
  config.validate(n);
  for (double v : points.values())
    if (!std::isfinite(v)) throw DataError("tsne: non-finite input value");

  const Matrix dist = squared_distances(points);
  Matrix cond(n, n);
  JointAffinities out;
  out.sigmas.resize(n);
  std::vector<double> row(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0, k = 0; j < n; ++j)
      if (j != i) row[k++] = dist(i, j);
    ConditionalRow cr;
    try {
      cr = conditional_affinities(row, config.perplexity, config.perplexity_tol, config.perplexity_max_steps);
    } catch (const NumericError& e) {
      throw NumericError("tsne: point " + std::to_string(i) + ": " + e.what());
    }
    for (std::size_t j = 0, k = 0; j < n; ++j)
      if (j != i) cond(i, j) = cr.probabilities[k++];
    out.sigmas[i] = cr.sigma;
    if (!cr.converged) out.unconverged_rows.push_back(i);
  }

  out.p = Matrix(n, n);
  const double denom = 2.0 * static_cast<double>(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double v = (cond(i, j) + cond(j, i)) / denom;
      sum += v;
      out.p(i, j) = std::max(v, kAffinityFloor);
    }
  out.unfloored_sum = sum;
  return out;
}

LowDimAffinities low_dim_affinities(const Matrix& coords) {
  for (double v : coords.values())
    if (!std::isfinite(v)) throw NumericError("tsne: non-finite coordinate");
  LowDimAffinities out;
  compute_low_dim(coords, out);
  return out;
}

double kl_divergence(const Matrix& p, const Matrix& q) {
  if (!p.same_shape(q) || p.rows() != p.cols()) throw std::invalid_argument("kl_divergence: shape mismatch");
  const std::size_t n = p.rows();
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double pij = p(i, j);
      if (pij > 0.0) sum += pij * std::log(pij / q(i, j));
    }
  return std::max(sum, 0.0);
}

Matrix tsne_gradient(const Matrix& p, const Matrix& q, const Matrix& w, const Matrix& coords) {
  const std::size_t n = coords.rows();
  require_square(p, n, "P");
  require_square(q, n, "Q");
  require_square(w, n, "W");
  Matrix grad(n, coords.cols());
  accumulate_gradient(p, 1.0, q, w, coords, grad);
  return grad;
}

Projection2D run_tsne(const Matrix& points, const TsneConfig& config) {
  const std::size_t n = points.rows();
  if (n == 0) throw DataError("tsne: empty input");
  config.validate(n);
  JointAffinities affinities = joint_affinities(points, config);
  const Matrix& p = affinities.p;

  Rng rng(config.seed);
  const std::size_t dim = config.out_dim;
  Matrix y(n, dim);
  for (auto& v : y.values()) v = config.init_scale * rng.normal();

  Matrix update(n, dim, 0.0);
  Matrix gains(n, dim, 1.0);
  Matrix grad(n, dim);
  LowDimAffinities low;
  constexpr double kMinGain = 0.01;

  Projection2D result;
  result.kl_trace.reserve(config.n_iter);
  for (std::size_t iter = 0; iter < config.n_iter; ++iter) {
    if (iter > 0 && iter == config.exaggeration_iters) {
      // The exaggerated phase's velocity and gains are discarded.
      std::fill(update.values().begin(), update.values().end(), 0.0);
      std::fill(gains.values().begin(), gains.values().end(), 1.0);
    }
    compute_low_dim(y, low);
    result.kl_trace.push_back(kl_divergence(p, low.q));

    const double exaggeration = iter < config.exaggeration_iters ? config.early_exaggeration : 1.0;
    const double momentum = iter < config.momentum_switch_iter ? config.initial_momentum : config.final_momentum;
    accumulate_gradient(p, exaggeration, low.q, low.w, y, grad);

    auto g = grad.values();
    auto u = update.values();
    auto gn = gains.values();
    auto yv = y.values();
    for (std::size_t e = 0; e < yv.size(); ++e) {
      // Delta-bar-delta step-size adaptation.
      gn[e] = (g[e] * u[e] < 0.0) ? gn[e] + 0.2 : gn[e] * 0.8;
      gn[e] = std::max(gn[e], kMinGain);
      u[e] = momentum * u[e] - config.learning_rate * gn[e] * g[e];
      yv[e] += u[e];
    }
    for (std::size_t k = 0; k < dim; ++k) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += y(i, k);
      mean /= static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) y(i, k) -= mean;
    }
    for (double v : yv)
      if (!std::isfinite(v)) throw NumericError("tsne: non-finite coordinate at iteration " + std::to_string(iter));
  }
  result.coords = std::move(y);
  result.sigmas = std::move(affinities.sigmas);
  result.unconverged_rows = std::move(affinities.unconverged_rows);
  return result;
}

Projection2D run_tsne(const EmbeddingSet& set, const TsneConfig& config) {
  return run_tsne(set.matrix(), config);
}

}  // namespace biasbench::tsne

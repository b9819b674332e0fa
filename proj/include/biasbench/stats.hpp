#pragma once

#include <optional>
#include <span>
#include <vector>

namespace biasbench::stats {

struct TestResult {
  double t_stat = 0.0;
  /// Welch-Satterthwaite degrees of freedom.
  double df = 0.0;
  double p_two_sided = 1.0;
};

/// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction.
/// Throws std::domain_error unless 0 <= x <= 1, a > 0, b > 0.
double regularized_incomplete_beta(double x, double a, double b);

/// Student-t cumulative distribution function.
double student_t_cdf(double t, double df);

/// Two-sided Welch unequal-variance t-test.
/// Throws std::invalid_argument if either sample has fewer than two values or
/// both samples have zero variance.
TestResult welch_t_test(std::span<const double> a, std::span<const double> b);

/// min(1, p * m) for each p. `m` defaults to the list length and may not be
/// smaller than it. Throws std::domain_error for p outside [0, 1].
std::vector<double> bonferroni(std::span<const double> p_values, std::optional<std::size_t> m = std::nullopt);

double mean(std::span<const double> xs);
/// Sample variance (n - 1 denominator).
double sample_variance(std::span<const double> xs);

}  // namespace biasbench::stats

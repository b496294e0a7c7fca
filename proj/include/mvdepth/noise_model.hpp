#pragma once

#include <cmath>
#include <optional>
#include <span>

#include <Eigen/Core>

namespace mvdepth {

/// Row-noise precision P of the density exp(-n^T P n / sigma_n^2).
struct PrecisionEstimate {
  Eigen::MatrixXd P;
  double noise_variance = 1.0;
  bool degenerate = false;  // residuals carried no spread; P is pure loading
};

inline constexpr double kDefaultPrecisionLoading = 1e-3;

/// Sample covariance of the residual rows (mean removed), loaded with
/// loading * trace / N on the diagonal (at least 1e-9), then inverted.
PrecisionEstimate estimate_precision(std::span<const Eigen::VectorXd> residuals,
                                     double noise_variance,
                                     double loading = kDefaultPrecisionLoading);

/// exp(-n^T P n / sigma_n^2), unnormalized.
double noise_density(const Eigen::VectorXd& n, const PrecisionEstimate& est);
double log_noise_density(const Eigen::VectorXd& n, const PrecisionEstimate& est);

/// First-order expansion of the noise density around n0 = y - x0:
///   Pr(n) ~ a^T n + b.
/// The coefficients are kept as exp(log_scale) * (a_unit, b_unit) so that
/// long rows, whose density at n0 underflows a double, keep a usable
/// direction. a() and b() return the plain coefficients.
struct AffineLikelihood {
  Eigen::VectorXd a_unit;
  double b_unit = 1.0;
  double log_scale = 0.0;
  double quant_step = 1.0;
  Eigen::VectorXd n0;

  Eigen::VectorXd a() const { return std::exp(log_scale) * a_unit; }
  double b() const { return std::exp(log_scale) * b_unit; }

  /// a^T n + b divided by exp(log_scale).
  double unit_value(const Eigen::VectorXd& n) const { return a_unit.dot(n) + b_unit; }

  /// Wraps explicit coefficients (e.g. a = 0, b = 1 for a flat likelihood).
  static AffineLikelihood from_coefficients(const Eigen::VectorXd& a, double b,
                                            double quant_step = 1.0);
};

/// a = -(2 / sigma_n^2) Pr(n0) P n0,  b = Pr(n0) - a^T n0.
AffineLikelihood affine_approx(const Eigen::VectorXd& y, const Eigen::VectorXd& x0,
                               const PrecisionEstimate& est, double quant_step);

/// Integral of a^T n + b over the quantization cell of y given x:
/// Q^N (a^T (y - x) + b). Empty when the affine integrand is not positive
/// at the cell center.
std::optional<double> cell_likelihood(const AffineLikelihood& al, const Eigen::VectorXd& y,
                                      const Eigen::VectorXd& x);

/// ln of cell_likelihood, computed without forming Q^N or exp(log_scale).
std::optional<double> log_cell_likelihood(const AffineLikelihood& al, const Eigen::VectorXd& y,
                                          const Eigen::VectorXd& x);

}  // namespace mvdepth

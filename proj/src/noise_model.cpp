#include "mvdepth/noise_model.hpp"

#include <stdexcept>

#include <Eigen/Cholesky>

namespace mvdepth {

PrecisionEstimate estimate_precision(std::span<const Eigen::VectorXd> residuals,
                                     double noise_variance, double loading) {
  if (residuals.empty()) throw std::invalid_argument("estimate_precision: no residual rows");
  if (!(noise_variance > 0.0))
    throw std::invalid_argument("estimate_precision: noise variance must be > 0");
  if (!(loading > 0.0)) throw std::invalid_argument("estimate_precision: loading must be > 0");
  const Eigen::Index n = residuals.front().size();
  for (const auto& r : residuals)
    if (r.size() != n) throw std::invalid_argument("estimate_precision: ragged residual rows");

  const double count = static_cast<double>(residuals.size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
  for (const auto& r : residuals) mean += r;
  mean /= count;

  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n, n);
  for (const auto& r : residuals) {
    const Eigen::VectorXd c = r - mean;
    cov.selfadjointView<Eigen::Lower>().rankUpdate(c);
  }
  cov = cov.selfadjointView<Eigen::Lower>();
  cov /= count;

  const double trace = cov.trace();
  const double eps = std::max(loading * trace / static_cast<double>(n), 1e-9);
  cov.diagonal().array() += eps;

  PrecisionEstimate est;
  est.noise_variance = noise_variance;
  est.degenerate = !(trace > 0.0);
  est.P = cov.llt().solve(Eigen::MatrixXd::Identity(n, n));
  est.P = 0.5 * (est.P + est.P.transpose()).eval();
  return est;
}

double log_noise_density(const Eigen::VectorXd& n, const PrecisionEstimate& est) {
  return -n.dot(est.P * n) / est.noise_variance;
}

double noise_density(const Eigen::VectorXd& n, const PrecisionEstimate& est) {
  return std::exp(log_noise_density(n, est));
}

AffineLikelihood AffineLikelihood::from_coefficients(const Eigen::VectorXd& a, double b,
                                                     double quant_step) {
  AffineLikelihood al;
  double s = std::abs(b);
  if (s == 0.0) s = a.cwiseAbs().maxCoeff();
  if (s == 0.0) s = 1.0;
  al.a_unit = a / s;
  al.b_unit = b / s;
  al.log_scale = std::log(s);
  al.quant_step = quant_step;
  al.n0 = Eigen::VectorXd::Zero(a.size());
  return al;
}

AffineLikelihood affine_approx(const Eigen::VectorXd& y, const Eigen::VectorXd& x0,
                               const PrecisionEstimate& est, double quant_step) {
  if (y.size() != x0.size() || y.size() != est.P.rows())
    throw std::invalid_argument("affine_approx: length mismatch");
  AffineLikelihood al;
  al.quant_step = quant_step;
  al.n0 = y - x0;
  const Eigen::VectorXd pn = est.P * al.n0;
  const double quad = al.n0.dot(pn) / est.noise_variance;
  al.log_scale = -quad;
  al.a_unit = (-2.0 / est.noise_variance) * pn;
  al.b_unit = 1.0 + 2.0 * quad;  // 1 - a_unit^T n0
  return al;
}

std::optional<double> log_cell_likelihood(const AffineLikelihood& al, const Eigen::VectorXd& y,
                                          const Eigen::VectorXd& x) {
  const double arg = al.unit_value(y - x);
  if (!(arg > 0.0)) return std::nullopt;
  return static_cast<double>(y.size()) * std::log(al.quant_step) + al.log_scale + std::log(arg);
}

std::optional<double> cell_likelihood(const AffineLikelihood& al, const Eigen::VectorXd& y,
                                      const Eigen::VectorXd& x) {
  const double arg = al.unit_value(y - x);
  if (!(arg > 0.0)) return std::nullopt;
  return std::pow(al.quant_step, static_cast<double>(y.size())) * std::exp(al.log_scale) * arg;
}

}  // namespace mvdepth

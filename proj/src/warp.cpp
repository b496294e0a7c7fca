#include "mvdepth/warp.hpp"

#include <cmath>
#include <stdexcept>

namespace mvdepth {

namespace {

struct BandEntry {
  int i;
  int j;
  double kernel;  // exp(-(s_j - i)^2 / sigma_s^2), before C_i
  double offset;  // s_j - i
};

void check_row(const Eigen::VectorXd& x) {
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (!(x[j] > 0.0) || !std::isfinite(x[j]))
      throw std::domain_error("warp: depths must be positive and finite");
  }
}

// Visits every (i, j) pair inside the truncation band, ordered by column.
std::vector<BandEntry> band_entries(const Eigen::VectorXd& x, const CameraRig& rig,
                                    const WarpConfig& cfg) {
  check_row(x);
  const int n = static_cast<int>(x.size());
  const double radius = cfg.truncation * cfg.sigma_s;
  const double inv_var = 1.0 / (cfg.sigma_s * cfg.sigma_s);
  std::vector<BandEntry> out;
  out.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(2 * radius + 2));
  for (int j = 0; j < n; ++j) {
    const double s = j - disparity(x[j], rig);
    const int lo = std::max(0, static_cast<int>(std::ceil(s - radius)));
    const int hi = std::min(n - 1, static_cast<int>(std::floor(s + radius)));
    for (int i = lo; i <= hi; ++i) {
      const double off = s - i;
      out.push_back({i, j, std::exp(-off * off * inv_var), off});
    }
  }
  return out;
}

Eigen::VectorXd resolve_scale(const Eigen::VectorXd& x, const CameraRig& rig,
                              const WarpConfig& cfg,
                              const std::optional<Eigen::VectorXd>& scale) {
  if (cfg.normalization == Normalization::exact_row) return row_normalizers(x, rig, cfg);
  if (scale) {
    if (scale->size() != x.size()) throw std::invalid_argument("warp: scale length mismatch");
    return *scale;
  }
  return Eigen::VectorXd::Constant(x.size(), cfg.C);
}

SparseMatrix assemble(int n, const std::vector<BandEntry>& entries,
                      const Eigen::VectorXd& scale, auto value) {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(entries.size());
  for (const auto& e : entries) triplets.emplace_back(e.i, e.j, scale[e.i] * value(e));
  SparseMatrix m(n, n);
  m.setFromTriplets(triplets.begin(), triplets.end());
  return m;
}

std::vector<bool> coverage(int n, const std::vector<BandEntry>& entries) {
  std::vector<bool> covered(static_cast<std::size_t>(n), false);
  for (const auto& e : entries)
    if (e.kernel > 0.0) covered[static_cast<std::size_t>(e.i)] = true;
  return covered;
}

}  // namespace

Normalization parse_normalization(const std::string& name) {
  if (name == "exact_row" || name == "exact") return Normalization::exact_row;
  if (name == "constant" || name == "constant_c") return Normalization::constant;
  throw std::invalid_argument("unknown warp normalization '" + name + "'");
}

std::string to_string(Normalization mode) {
  return mode == Normalization::exact_row ? "exact_row" : "constant";
}

WarpJacobian parse_warp_jacobian(const std::string& name) {
  if (name == "frozen_scale") return WarpJacobian::frozen_scale;
  if (name == "normalized") return WarpJacobian::normalized;
  throw std::invalid_argument("unknown warp jacobian '" + name + "'");
}

std::string to_string(WarpJacobian mode) {
  return mode == WarpJacobian::frozen_scale ? "frozen_scale" : "normalized";
}

void WarpConfig::validate() const {
  if (!(sigma_s > 0.0)) throw std::invalid_argument("warp: sigma_s must be > 0");
  if (!(C > 0.0)) throw std::invalid_argument("warp: C must be > 0");
  if (!(truncation > 0.0)) throw std::invalid_argument("warp: truncation must be > 0");
}

double disparity(double depth, const CameraRig& rig) {
  if (!(depth > 0.0)) throw std::domain_error("disparity: depth must be positive");
  return rig.focal_baseline() / depth;
}

Eigen::VectorXd row_normalizers(const Eigen::VectorXd& x, const CameraRig& rig,
                                const WarpConfig& cfg) {
  cfg.validate();
  const auto entries = band_entries(x, rig, cfg);
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(x.size());
  for (const auto& e : entries) sums[e.i] += e.kernel;
  Eigen::VectorXd scale(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) scale[i] = sums[i] > 0.0 ? 1.0 / sums[i] : 0.0;
  return scale;
}

WarpWeights interpolation_weights(const Eigen::VectorXd& x, const CameraRig& rig,
                                  const WarpConfig& cfg,
                                  const std::optional<Eigen::VectorXd>& scale) {
  cfg.validate();
  const int n = static_cast<int>(x.size());
  const auto entries = band_entries(x, rig, cfg);
  const Eigen::VectorXd c = resolve_scale(x, rig, cfg, scale);
  return {assemble(n, entries, c, [](const BandEntry& e) { return e.kernel; }),
          coverage(n, entries)};
}

Eigen::VectorXd apply_warp(const Eigen::VectorXd& x, const CameraRig& rig, const WarpConfig& cfg,
                           const std::optional<Eigen::VectorXd>& scale) {
  return interpolation_weights(x, rig, cfg, scale).W * x;
}

SparseMatrix warp_jacobian(const Eigen::VectorXd& x0, const CameraRig& rig, const WarpConfig& cfg,
                           const std::optional<Eigen::VectorXd>& scale) {
  cfg.validate();
  const int n = static_cast<int>(x0.size());
  const auto entries = band_entries(x0, rig, cfg);
  const Eigen::VectorXd c = resolve_scale(x0, rig, cfg, scale);
  const double fd = rig.focal_baseline();
  const double inv_var = 1.0 / (cfg.sigma_s * cfg.sigma_s);
  // d(omega_ij x_j)/dx_j = omega_ij (1 - 2 (s_j - i) fD / (sigma_s^2 x_j))
  return assemble(n, entries, c, [&](const BandEntry& e) {
    return e.kernel * (1.0 - 2.0 * e.offset * fd * inv_var / x0[e.j]);
  });
}

SparseMatrix normalized_warp_jacobian(const Eigen::VectorXd& x0, const CameraRig& rig,
                                      const WarpConfig& cfg) {
  cfg.validate();
  const int n = static_cast<int>(x0.size());
  const auto entries = band_entries(x0, rig, cfg);
  const Eigen::VectorXd c = row_normalizers(x0, rig, cfg);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
  for (const auto& e : entries) g[e.i] += c[e.i] * e.kernel * x0[e.j];
  const double fd = rig.focal_baseline();
  const double inv_var = 1.0 / (cfg.sigma_s * cfg.sigma_s);
  return assemble(n, entries, c, [&](const BandEntry& e) {
    const double dlog = -2.0 * e.offset * fd * inv_var / (x0[e.j] * x0[e.j]);
    return e.kernel * (1.0 + dlog * (x0[e.j] - g[e.i]));
  });
}

LinearizedWarp linearize(const Eigen::VectorXd& x0, const CameraRig& rig, const WarpConfig& cfg) {
  cfg.validate();
  LinearizedWarp lin;
  lin.x0 = x0;
  lin.row_scale = row_normalizers(x0, rig, cfg);
  WarpConfig frozen = cfg;
  frozen.normalization = Normalization::constant;
  const auto weights = interpolation_weights(x0, rig, frozen, lin.row_scale);
  lin.covered = weights.covered;
  lin.H = cfg.jacobian == WarpJacobian::normalized ? normalized_warp_jacobian(x0, rig, cfg)
                                                   : warp_jacobian(x0, rig, frozen, lin.row_scale);
  const Eigen::VectorXd g0 = weights.W * x0;
  lin.d = g0 - lin.H * x0;
  return lin;
}

}  // namespace mvdepth

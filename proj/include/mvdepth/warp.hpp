#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "mvdepth/scene_io.hpp"

namespace mvdepth {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

enum class Normalization {
  exact_row,  // C_i recomputed from x so each covered row of W sums to 1
  constant,   // C_i supplied externally (a frozen vector, or the scalar C)
};

Normalization parse_normalization(const std::string& name);
std::string to_string(Normalization mode);

/// Which derivative linearize() uses.
enum class WarpJacobian {
  frozen_scale,  // C_i held at their x0 values
  normalized,    // full derivative of the row-normalized warp, C_i(x) included
};

WarpJacobian parse_warp_jacobian(const std::string& name);
std::string to_string(WarpJacobian mode);

struct WarpConfig {
  double sigma_s = 1.0;  // interpolation spread, pixels
  Normalization normalization = Normalization::constant;
  double C = 1.0;           // scale used in constant mode without a frozen vector
  double truncation = 4.0;  // weights vanish beyond truncation * sigma_s
  WarpJacobian jacobian = WarpJacobian::frozen_scale;

  void validate() const;
};

/// Horizontal disparity f D / x in pixels.
double disparity(double depth, const CameraRig& rig);

/// Interpolation matrix W(x) with omega_ij = C_i exp(-(j - fD/x_j - i)^2 / sigma_s^2),
/// truncated to a band. Rows with no weight inside the band are uncovered.
struct WarpWeights {
  SparseMatrix W;
  std::vector<bool> covered;
};

/// Per-row normalizers 1 / sum_m exp(...) evaluated at x; 0 on uncovered rows.
Eigen::VectorXd row_normalizers(const Eigen::VectorXd& x, const CameraRig& rig,
                                const WarpConfig& cfg);

/// `scale` overrides C_i in constant mode; it is ignored in exact mode.
WarpWeights interpolation_weights(const Eigen::VectorXd& x, const CameraRig& rig,
                                  const WarpConfig& cfg,
                                  const std::optional<Eigen::VectorXd>& scale = std::nullopt);

/// g(x) = W(x) x.
Eigen::VectorXd apply_warp(const Eigen::VectorXd& x, const CameraRig& rig, const WarpConfig& cfg,
                           const std::optional<Eigen::VectorXd>& scale = std::nullopt);

/// dg/dx at x0 with every C_i held constant: the normalizers of x0 in exact
/// mode, `scale` (or C) in constant mode.
SparseMatrix warp_jacobian(const Eigen::VectorXd& x0, const CameraRig& rig, const WarpConfig& cfg,
                           const std::optional<Eigen::VectorXd>& scale = std::nullopt);

/// Jacobian of the row-normalized warp with the normalizers differentiated
/// too: J_ij = w_ij (1 + l_ij (x_j - g_i)), l_ij = d ln(omega_ij) / dx_j.
SparseMatrix normalized_warp_jacobian(const Eigen::VectorXd& x0, const CameraRig& rig,
                                      const WarpConfig& cfg);

/// First-order expansion g(x) ~ H x + d around x0.
struct LinearizedWarp {
  SparseMatrix H;
  Eigen::VectorXd d;
  Eigen::VectorXd x0;
  Eigen::VectorXd row_scale;   // the C_i held fixed in H
  std::vector<bool> covered;   // right pixels that receive any weight

  Eigen::VectorXd evaluate(const Eigen::VectorXd& x) const { return H * x + d; }
};

/// In both modes C_i is frozen from x0 (exact normalizers), so the affine
/// map reproduces the row-normalized warp at x0. H follows cfg.jacobian.
LinearizedWarp linearize(const Eigen::VectorXd& x0, const CameraRig& rig, const WarpConfig& cfg);

}  // namespace mvdepth

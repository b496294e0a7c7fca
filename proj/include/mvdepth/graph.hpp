#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "mvdepth/scene_io.hpp"

namespace mvdepth {

inline constexpr int kFeatureDim = 6;

/// Per-pixel feature rows: (normal x, y, z, depth, grid row, grid column),
/// each scaled to comparable ranges.
struct FeatureMatrix {
  Eigen::MatrixXd rows;             // N x F
  std::vector<bool> degenerate;     // normal fell back to (0, 0, 1)

  Eigen::Index size() const { return rows.rows(); }
};

/// Divisors that bring features to unit-ish scale.
struct FeatureScaling {
  double depth_range = 1.0;  // depth feature = z / depth_range
  int height = 1;
  int width = 1;
};

/// Builds features for the last row of `window` (image row `row_index`).
/// Rows before it in the window are the previous image rows, oldest first;
/// up to two of them complete the 3x3 neighborhood used for the normals.
FeatureMatrix compute_features(std::span<const Eigen::VectorXd> window, int row_index,
                               const CameraRig& rig, const FeatureScaling& scaling);

/// Symmetric PD feature metric with trace equal to its dimension.
class MetricMatrix {
 public:
  /// Validates symmetry, trace and the eigenvalue floor.
  explicit MetricMatrix(Eigen::MatrixXd m);

  static MetricMatrix identity(int dim = kFeatureDim);
  /// Minimum admissible eigenvalue, 1e-6 * trace / dim with trace = dim.
  static constexpr double eigen_floor() { return 1e-6; }

  const Eigen::MatrixXd& matrix() const { return m_; }
  int dim() const { return static_cast<int>(m_.rows()); }

 private:
  Eigen::MatrixXd m_;
};

/// (f_i - f_j)^T M (f_i - f_j).
double feature_distance(const Eigen::VectorXd& fi, const Eigen::VectorXd& fj,
                        const Eigen::MatrixXd& M);

/// exp(-d).
double edge_weight(double distance);

struct GraphLaplacian {
  Eigen::SparseMatrix<double, Eigen::RowMajor> L;
  int bandwidth = 0;

  /// x^T L x.
  double quadratic_form(const Eigen::VectorXd& x) const { return x.dot(L * x); }
};

/// Band graph: node i links to j for 0 < |i - j| <= T. Nodes flagged
/// inactive keep no edges.
GraphLaplacian build_laplacian(const FeatureMatrix& features, const Eigen::MatrixXd& M, int T,
                               const std::vector<bool>& active = {});

struct TrainingRow {
  Eigen::VectorXd signal;
  Eigen::MatrixXd features;  // N x F
};

struct MetricLearningOptions {
  int bandwidth = 4;
  int max_outer = 100;
  double rel_tol = 1e-6;
};

struct MetricLearningResult {
  MetricMatrix metric = MetricMatrix::identity();
  bool no_information = false;
  int outer_iterations = 0;
  std::vector<double> objective_trace;  // GLR before and after each outer iteration
};

/// Sum over training rows of x^T L(M) x.
double glr_objective(std::span<const TrainingRow> rows, const Eigen::MatrixXd& M, int T);

/// Minimizes the GLR of the training rows over {M symmetric, trace = dim,
/// eigenvalues >= eigen_floor}, alternating a diagonal projected-gradient
/// step and an off-diagonal gradient step with eigenvalue projection.
/// Steps are only taken when they lower the objective.
MetricLearningResult learn_metric(std::span<const TrainingRow> rows, const MetricMatrix& init,
                                  const MetricLearningOptions& opts = {});

/// Euclidean projection of a symmetric matrix onto {trace = target,
/// eigenvalues >= floor}.
Eigen::MatrixXd project_spectrum(const Eigen::MatrixXd& m, double target_trace, double floor);

}  // namespace mvdepth

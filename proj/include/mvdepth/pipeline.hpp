#pragma once

#include <deque>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "mvdepth/graph.hpp"
#include "mvdepth/noise_model.hpp"
#include "mvdepth/scene_io.hpp"
#include "mvdepth/solver.hpp"
#include "mvdepth/warp.hpp"

namespace mvdepth {

/// How an estimated row precision is scaled before use.
enum class PrecisionScaling {
  estimated,    // the inverse loaded sample covariance as is
  noise_level,  // keep its shape, pin its mean variance to sigma_n^2
};

PrecisionScaling parse_precision_scaling(const std::string& name);
std::string to_string(PrecisionScaling scaling);

struct PipelineConfig {
  int K = 10;         // metric-learning window and refresh period, rows
  int K_n = 30;       // residual window for precision estimation, rows
  int passes = 2;     // outer relinearizations per row
  int bandwidth = 4;  // graph connection radius T
  double lambda_l = 1.0;
  double lambda_r = 1.0;
  double noise_variance = 50.0;  // sigma_n^2
  double quant_step = 1.0;       // Q
  double depth_range = 1.0;      // feature normalization divisor
  double precision_loading = kDefaultPrecisionLoading;
  PrecisionScaling precision_scaling = PrecisionScaling::estimated;
  LikelihoodAnchor anchor = LikelihoodAnchor::tracking;
  bool single_view = false;  // drop the right-view terms

  WarpConfig warp;
  SolverConfig solver;
  MetricLearningOptions metric;

  void validate() const;
};

struct RowDiagnostics {
  int row = 0;
  double objective_initial = 0.0;
  double objective_final = 0.0;
  int iterations = 0;
  int restarts = 0;
  bool converged = false;
  bool fallback = false;
  bool metric_refreshed = false;
  std::string warning;
};

/// Rolling state carried from row to row.
struct EnhancementState {
  std::vector<Eigen::VectorXd> enhanced_left;
  std::vector<Eigen::VectorXd> enhanced_right;
  std::deque<Eigen::VectorXd> residuals_left;
  std::deque<Eigen::VectorXd> residuals_right;
  MetricMatrix metric_left = MetricMatrix::identity();
  MetricMatrix metric_right = MetricMatrix::identity();
  int rows_since_refresh = 0;  // in [0, K)
};

struct RowOutput {
  Eigen::VectorXd left;
  Eigen::VectorXd right;
  RowDiagnostics diagnostics;
};

/// Enhances image row i of both views and advances the state. Rows must be
/// fed in order 0, 1, 2, ...
RowOutput enhance_row_pair(int i, const DepthImage& left, const DepthImage& right,
                           const CameraRig& rig, EnhancementState& state,
                           const PipelineConfig& cfg);

struct EnhancementReport {
  std::vector<RowDiagnostics> rows;
  int fallback_rows = 0;
  int metric_refreshes = 0;
};

nlohmann::json to_json(const EnhancementReport& report);

struct EnhancementResult {
  DepthImage left;
  DepthImage right;
  EnhancementReport report;
};

/// Top-to-bottom sweep over a rectified pair. Invalid pixels pass through.
EnhancementResult enhance_image_pair(const DepthImage& left, const DepthImage& right,
                                     const CameraRig& rig, const PipelineConfig& cfg);

}  // namespace mvdepth

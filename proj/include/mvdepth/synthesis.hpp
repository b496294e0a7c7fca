#pragma once

#include <string>
#include <vector>

#include "mvdepth/scene_io.hpp"

namespace mvdepth {

enum class View { left, right };

/// Back-projects every valid pixel; right-view points are shifted by
/// (baseline, 0, 0) into the left camera frame.
PointCloud project_to_cloud(const DepthImage& img, const CameraRig& rig, View view);

/// Concatenation; normals are kept only when both inputs have them.
PointCloud merge(const PointCloud& a, const PointCloud& b);

inline constexpr int kDefaultNormalNeighbors = 16;

/// PCA plane fit over each point and its k nearest neighbours; normals point
/// toward the camera (non-positive Z). Neighbourhoods without a unique plane
/// get (0, 0, -1) and are flagged in `degenerate` when given.
PointCloud estimate_normals(const PointCloud& cloud, int k = kDefaultNormalNeighbors,
                            std::vector<bool>* degenerate = nullptr);

struct MetricsReport {
  double c2c = 0.0;
  double c2p = 0.0;
  std::vector<double> c2c_distances;  // per reference point
  std::vector<double> c2p_distances;
};

/// Mean distance from each reference point to its nearest test point.
double c2c(const PointCloud& reference, const PointCloud& test);
/// Mean |(p - q) . n_q| with q the nearest test point of p.
double c2p(const PointCloud& reference, const PointCloud& test);
/// Both metrics from one nearest-neighbour pass.
MetricsReport evaluate_clouds(const PointCloud& reference, const PointCloud& test);

/// Same quantities by exhaustive search.
MetricsReport evaluate_clouds_brute_force(const PointCloud& reference, const PointCloud& test);

}  // namespace mvdepth

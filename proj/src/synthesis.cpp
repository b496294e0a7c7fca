#include "mvdepth/synthesis.hpp"

#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "mvdepth/kdtree.hpp"

namespace mvdepth {

namespace {

void check_pair(const PointCloud& reference, const PointCloud& test, bool need_normals) {
  if (reference.points.empty() || test.points.empty())
    throw std::invalid_argument("cloud metrics: empty cloud");
  if (need_normals && !test.has_normals())
    throw std::invalid_argument("cloud metrics: test cloud has no normals");
}

template <typename NearestFn>
MetricsReport accumulate(const PointCloud& reference, const PointCloud& test, bool with_plane,
                         NearestFn nearest) {
  MetricsReport rep;
  rep.c2c_distances.reserve(reference.size());
  double sum_c = 0.0, sum_p = 0.0;
  for (const auto& p : reference.points) {
    const Neighbor nb = nearest(p);
    const Eigen::Vector3d diff = p - test.points[nb.index];
    const double dc = diff.norm();
    rep.c2c_distances.push_back(dc);
    sum_c += dc;
    if (with_plane) {
      const double dp = std::abs(diff.dot(test.normals[nb.index]));
      rep.c2p_distances.push_back(dp);
      sum_p += dp;
    }
  }
  const double count = static_cast<double>(reference.size());
  rep.c2c = sum_c / count;
  rep.c2p = with_plane ? sum_p / count : 0.0;
  return rep;
}

}  // namespace

PointCloud project_to_cloud(const DepthImage& img, const CameraRig& rig, View view) {
  img.check_matches(rig);
  const double shift = view == View::right ? rig.baseline : 0.0;
  PointCloud cloud;
  for (int v = 0; v < img.height(); ++v) {
    for (int u = 0; u < img.width(); ++u) {
      if (!img.valid(v, u)) continue;
      const double z = img.value(v, u);
      cloud.points.emplace_back((u - rig.cx) * z / rig.focal + shift, (v - rig.cy) * z / rig.focal,
                                z);
    }
  }
  return cloud;
}

PointCloud merge(const PointCloud& a, const PointCloud& b) {
  PointCloud out;
  out.points = a.points;
  out.points.insert(out.points.end(), b.points.begin(), b.points.end());
  if (a.has_normals() && b.has_normals()) {
    out.normals = a.normals;
    out.normals.insert(out.normals.end(), b.normals.begin(), b.normals.end());
  }
  return out;
}

PointCloud estimate_normals(const PointCloud& cloud, int k, std::vector<bool>* degenerate) {
  if (k < 3) throw std::invalid_argument("estimate_normals: k must be >= 3");
  if (cloud.size() < static_cast<std::size_t>(k) + 1)
    throw std::invalid_argument("estimate_normals: cloud needs at least k + 1 points");

  const KdTree tree(cloud.points);
  PointCloud out;
  out.points = cloud.points;
  out.normals.resize(cloud.size());
  if (degenerate) degenerate->assign(cloud.size(), false);

  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto nbrs = tree.knn(cloud.points[i], static_cast<std::size_t>(k) + 1);
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto& nb : nbrs) mean += cloud.points[nb.index];
    mean /= static_cast<double>(nbrs.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& nb : nbrs) {
      const Eigen::Vector3d c = cloud.points[nb.index] - mean;
      cov += c * c.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
    const auto& ev = es.eigenvalues();
    Eigen::Vector3d n(0.0, 0.0, -1.0);
    // A plane needs two clearly non-zero spreads.
    if (ev[1] > 1e-12 * std::max(ev[2], 1e-300)) {
      n = es.eigenvectors().col(0).normalized();
      if (n.z() > 0.0) n = -n;
    } else if (degenerate) {
      (*degenerate)[i] = true;
    }
    out.normals[i] = n;
  }
  return out;
}

MetricsReport evaluate_clouds(const PointCloud& reference, const PointCloud& test) {
  check_pair(reference, test, false);
  const KdTree tree(test.points);
  return accumulate(reference, test, test.has_normals(),
                    [&](const Eigen::Vector3d& p) { return tree.nearest(p); });
}

MetricsReport evaluate_clouds_brute_force(const PointCloud& reference, const PointCloud& test) {
  check_pair(reference, test, false);
  return accumulate(reference, test, test.has_normals(), [&](const Eigen::Vector3d& p) {
    return brute_force_nearest(test.points, p);
  });
}

double c2c(const PointCloud& reference, const PointCloud& test) {
  check_pair(reference, test, false);
  PointCloud bare;
  bare.points = test.points;
  return evaluate_clouds(reference, bare).c2c;
}

double c2p(const PointCloud& reference, const PointCloud& test) {
  check_pair(reference, test, true);
  return evaluate_clouds(reference, test).c2p;
}

}  // namespace mvdepth

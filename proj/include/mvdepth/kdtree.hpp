#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

namespace mvdepth {

struct Neighbor {
  std::size_t index;
  double sq_distance;
};

/// Static 3-D kd-tree. Queries are exact; equal distances resolve to the
/// lower point index, so results match a brute-force scan.
class KdTree {
 public:
  explicit KdTree(const std::vector<Eigen::Vector3d>& points);

  Neighbor nearest(const Eigen::Vector3d& q) const;
  /// The k closest points sorted by (distance, index); 1 <= k <= size().
  std::vector<Neighbor> knn(const Eigen::Vector3d& q, std::size_t k) const;

  std::size_t size() const { return pts_.size(); }

 private:
  struct Node {
    std::size_t begin, end;  // range into order_
    int axis = -1;           // -1 for leaves
    double split = 0.0;
    int left = -1, right = -1;
  };

  int build(std::size_t begin, std::size_t end);
  void search(int node, const Eigen::Vector3d& q, std::size_t k,
              std::vector<Neighbor>& heap) const;

  std::vector<Eigen::Vector3d> pts_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

/// O(n) reference scans with the same tie rule.
Neighbor brute_force_nearest(const std::vector<Eigen::Vector3d>& points, const Eigen::Vector3d& q);
std::vector<Neighbor> brute_force_knn(const std::vector<Eigen::Vector3d>& points,
                                      const Eigen::Vector3d& q, std::size_t k);

}  // namespace mvdepth

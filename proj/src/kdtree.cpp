#include "mvdepth/kdtree.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace mvdepth {

namespace {

constexpr std::size_t kLeafSize = 8;

bool closer(const Neighbor& a, const Neighbor& b) {
  return a.sq_distance < b.sq_distance ||
         (a.sq_distance == b.sq_distance && a.index < b.index);
}

}  // namespace

KdTree::KdTree(const std::vector<Eigen::Vector3d>& points) : pts_(points) {
  if (pts_.empty()) throw std::invalid_argument("kd-tree: no points");
  order_.resize(pts_.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  nodes_.reserve(2 * pts_.size() / kLeafSize + 2);
  build(0, pts_.size());
}

int KdTree::build(std::size_t begin, std::size_t end) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({begin, end});
  if (end - begin <= kLeafSize) return id;

  Eigen::Vector3d lo = pts_[order_[begin]], hi = lo;
  for (std::size_t i = begin; i < end; ++i) {
    lo = lo.cwiseMin(pts_[order_[i]]);
    hi = hi.cwiseMax(pts_[order_[i]]);
  }
  int axis;
  if ((hi - lo).maxCoeff(&axis) <= 0.0) return id;  // all points coincide

  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                   order_.begin() + static_cast<std::ptrdiff_t>(mid),
                   order_.begin() + static_cast<std::ptrdiff_t>(end),
                   [&](std::size_t a, std::size_t b) { return pts_[a][axis] < pts_[b][axis]; });
  const double split = pts_[order_[mid]][axis];
  const int l = build(begin, mid);
  const int r = build(mid, end);
  nodes_[static_cast<std::size_t>(id)].axis = axis;
  nodes_[static_cast<std::size_t>(id)].split = split;
  nodes_[static_cast<std::size_t>(id)].left = l;
  nodes_[static_cast<std::size_t>(id)].right = r;
  return id;
}

// `heap` is a max-heap under closer(), holding at most k candidates.
void KdTree::search(int id, const Eigen::Vector3d& q, std::size_t k,
                    std::vector<Neighbor>& heap) const {
  const Node& node = nodes_[static_cast<std::size_t>(id)];
  if (node.axis < 0) {
    for (std::size_t i = node.begin; i < node.end; ++i) {
      const Neighbor cand{order_[i], (pts_[order_[i]] - q).squaredNorm()};
      if (heap.size() < k) {
        heap.push_back(cand);
        std::push_heap(heap.begin(), heap.end(), closer);
      } else if (closer(cand, heap.front())) {
        std::pop_heap(heap.begin(), heap.end(), closer);
        heap.back() = cand;
        std::push_heap(heap.begin(), heap.end(), closer);
      }
    }
    return;
  }
  // Points equal to the split may sit on either side, so the far side is
  // pruned only when strictly farther than the current worst.
  const double diff = q[node.axis] - node.split;
  const int near = diff < 0.0 ? node.left : node.right;
  const int far = diff < 0.0 ? node.right : node.left;
  search(near, q, k, heap);
  if (heap.size() < k || diff * diff <= heap.front().sq_distance) search(far, q, k, heap);
}

Neighbor KdTree::nearest(const Eigen::Vector3d& q) const { return knn(q, 1).front(); }

std::vector<Neighbor> KdTree::knn(const Eigen::Vector3d& q, std::size_t k) const {
  if (k == 0 || k > pts_.size()) throw std::invalid_argument("kd-tree: k out of range");
  std::vector<Neighbor> heap;
  heap.reserve(k);
  search(0, q, k, heap);
  std::sort_heap(heap.begin(), heap.end(), closer);
  return heap;
}

Neighbor brute_force_nearest(const std::vector<Eigen::Vector3d>& points,
                             const Eigen::Vector3d& q) {
  return brute_force_knn(points, q, 1).front();
}

std::vector<Neighbor> brute_force_knn(const std::vector<Eigen::Vector3d>& points,
                                      const Eigen::Vector3d& q, std::size_t k) {
  if (k == 0 || k > points.size()) throw std::invalid_argument("brute force: k out of range");
  std::vector<Neighbor> all;
  all.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) all.push_back({i, (points[i] - q).squaredNorm()});
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), closer);
  all.resize(k);
  return all;
}

}  // namespace mvdepth

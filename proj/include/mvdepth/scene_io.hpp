#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace mvdepth {

/// Geometry of a rectified two-camera rig. The right camera sits at
/// (baseline, 0, 0) in the left camera frame.
struct CameraRig {
  double focal = 1.0;     // pixels
  double baseline = 0.0;  // depth units
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  double focal_baseline() const { return focal * baseline; }
  void validate() const;

  bool operator==(const CameraRig&) const = default;
};

/// H x W grid of non-negative depths with a validity mask.
class DepthImage {
 public:
  DepthImage() = default;
  DepthImage(int height, int width, int bit_depth = 16);

  int height() const { return height_; }
  int width() const { return width_; }
  int bit_depth() const { return bit_depth_; }
  void set_bit_depth(int bits) { bit_depth_ = bits; }

  double value(int row, int col) const { return values_[index(row, col)]; }
  bool valid(int row, int col) const { return mask_[index(row, col)] != 0; }

  /// Stores a depth and marks the pixel valid; negative depths are rejected.
  void set(int row, int col, double depth);
  void invalidate(int row, int col);

  Eigen::VectorXd row(int r) const;
  std::vector<bool> row_mask(int r) const;

  std::size_t valid_count() const;
  bool same_shape(const DepthImage& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }
  void check_matches(const CameraRig& rig) const;

  bool operator==(const DepthImage&) const = default;

 private:
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(col);
  }

  int height_ = 0;
  int width_ = 0;
  int bit_depth_ = 16;
  std::vector<double> values_;
  std::vector<std::uint8_t> mask_;
};

struct PointCloud {
  std::vector<Eigen::Vector3d> points;
  std::vector<Eigen::Vector3d> normals;  // empty, or one per point

  bool has_normals() const { return !normals.empty(); }
  std::size_t size() const { return points.size(); }
  void validate() const;
};

// Depth images are 16-bit binary graymaps (P5) whose header carries a
// "# scale=<float>" comment. depth = raw * scale, raw 0 marks an invalid
// pixel.
DepthImage read_depth_image(const std::filesystem::path& path);

/// Writes with the given scale. Valid depths are rounded to the nearest
/// multiple of the scale; valid pixels never encode as raw 0.
void write_depth_image(const DepthImage& img, const std::filesystem::path& path,
                       double scale);

/// Smallest scale >= preferred that fits every valid depth into 16 bits.
double fitting_scale(const DepthImage& img, double preferred);

void write_point_cloud(const PointCloud& cloud, const std::filesystem::path& path);
PointCloud read_point_cloud(const std::filesystem::path& path);

}  // namespace mvdepth

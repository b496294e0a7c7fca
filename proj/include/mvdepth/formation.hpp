#pragma once

#include <cstdint>
#include <string>

#include "mvdepth/scene_io.hpp"

namespace mvdepth {

struct FormationParams {
  double quant_step = 1.0;      // Q, depth units
  double noise_variance = 0.0;  // sigma_n^2, squared depth units
  std::uint64_t seed = 0;

  void validate() const;
};

/// y = round((x + n) / Q) * Q per valid pixel, n ~ N(0, sigma_n^2) i.i.d.
/// Pixels whose noisy value is negative come back as 0 and invalid.
DepthImage simulate_observation(const DepthImage& clean, const FormationParams& params);

/// Q = (max - min) / 2^bits.
double quantization_step_for_bits(double min_depth, double max_depth, int bits);

enum class SurfaceKind { plane, slanted, slanted_sinusoid };

SurfaceKind parse_surface_kind(const std::string& name);
std::string to_string(SurfaceKind kind);

/// Analytic depth over continuous left-image coordinates (u = column, v = row):
///   z = base + slope_u (u - cx) + slope_v (v - cy)
///       + amplitude sin(2 pi u / period_u) cos(2 pi v / period_v)
/// Planes ignore the slopes/relief terms they do not use.
struct SurfaceParams {
  SurfaceKind kind = SurfaceKind::plane;
  double base_depth = 100.0;
  double slope_u = 0.0;
  double slope_v = 0.0;
  double amplitude = 0.0;
  double period_u = 64.0;
  double period_v = 64.0;
};

struct SyntheticScene {
  SurfaceParams surface;
  CameraRig rig;

  double depth(double u, double v) const;
  /// Throws unless the surface is positive over an extended image strip.
  void validate() const;
};

struct ScenePair {
  DepthImage left;
  DepthImage right;
};

/// Samples the surface at left pixel centers and intersects the right
/// camera's pixel rays with the same surface.
ScenePair render_scene_pair(const SyntheticScene& scene);

/// Depth of the surface seen by right pixel (u_r, v), or a negative value
/// when the ray does not meet the surface.
double right_ray_depth(const SyntheticScene& scene, double u_r, double v);

}  // namespace mvdepth

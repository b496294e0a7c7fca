#include "mvdepth/formation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace mvdepth {

void FormationParams::validate() const {
  if (!(quant_step > 0.0)) throw std::invalid_argument("formation: Q must be > 0");
  if (!(noise_variance >= 0.0))
    throw std::invalid_argument("formation: noise variance must be >= 0");
}

DepthImage simulate_observation(const DepthImage& clean, const FormationParams& params) {
  params.validate();
  std::mt19937_64 rng(params.seed);
  std::normal_distribution<double> noise(0.0, std::sqrt(params.noise_variance));
  const bool noisy = params.noise_variance > 0.0;

  DepthImage out(clean.height(), clean.width(), clean.bit_depth());
  for (int r = 0; r < clean.height(); ++r) {
    for (int c = 0; c < clean.width(); ++c) {
      if (!clean.valid(r, c)) continue;
      const double corrupted = clean.value(r, c) + (noisy ? noise(rng) : 0.0);
      const double y = std::round(corrupted / params.quant_step) * params.quant_step;
      if (y < 0.0) continue;  // physical depths are non-negative
      out.set(r, c, y);
    }
  }
  return out;
}

double quantization_step_for_bits(double min_depth, double max_depth, int bits) {
  if (!(max_depth > min_depth)) throw std::invalid_argument("quantization: degenerate depth range");
  if (bits < 1 || bits > 52) throw std::invalid_argument("quantization: bits out of range");
  return (max_depth - min_depth) / std::ldexp(1.0, bits);
}

SurfaceKind parse_surface_kind(const std::string& name) {
  if (name == "plane") return SurfaceKind::plane;
  if (name == "slanted") return SurfaceKind::slanted;
  if (name == "slanted_sinusoid" || name == "sinusoid") return SurfaceKind::slanted_sinusoid;
  throw std::invalid_argument("unknown scene '" + name +
                              "' (expected plane, slanted, slanted_sinusoid)");
}

std::string to_string(SurfaceKind kind) {
  switch (kind) {
    case SurfaceKind::plane: return "plane";
    case SurfaceKind::slanted: return "slanted";
    case SurfaceKind::slanted_sinusoid: return "slanted_sinusoid";
  }
  return "plane";
}

double SyntheticScene::depth(double u, double v) const {
  const auto& s = surface;
  double z = s.base_depth;
  if (s.kind == SurfaceKind::plane) return z;
  z += s.slope_u * (u - rig.cx) + s.slope_v * (v - rig.cy);
  if (s.kind == SurfaceKind::slanted_sinusoid) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    z += s.amplitude * std::sin(two_pi * u / s.period_u) * std::cos(two_pi * v / s.period_v);
  }
  return z;
}

void SyntheticScene::validate() const {
  rig.validate();
  if (surface.kind == SurfaceKind::slanted_sinusoid &&
      (!(surface.period_u > 0.0) || !(surface.period_v > 0.0)))
    throw std::invalid_argument("scene: relief periods must be positive");
  // Right rays land on left coordinates up to one disparity past the image;
  // check a strip generous enough to cover that.
  const double w = rig.width, h = rig.height;
  for (double v = 0.0; v <= h - 1.0 + 1e-9; v += 1.0) {
    for (double u = -w; u <= 2.0 * w; u += 0.5) {
      const double z = depth(u, v);
      if (!(z > 0.0) || !std::isfinite(z))
        throw std::invalid_argument("scene: surface depth must stay positive over the image");
    }
  }
}

double right_ray_depth(const SyntheticScene& scene, double u_r, double v) {
  const double fd = scene.rig.focal_baseline();
  if (fd == 0.0) return scene.depth(u_r, v);

  // A right-ray point at depth t projects to left column u_l = u_r + fD / t,
  // so the hit solves phi(u_l) = (u_l - u_r) z(u_l, v) - fD = 0 with u_l > u_r.
  auto phi = [&](double u_l) { return (u_l - u_r) * scene.depth(u_l, v) - fd; };
  double lo = u_r;
  double hi = u_r + 1.0;
  const double limit = u_r + 16.0 * scene.rig.width + fd;
  while (phi(hi) < 0.0) {
    lo = hi;
    hi += 1.0;
    if (hi > limit) return -1.0;
  }
  for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
    const double mid = 0.5 * (lo + hi);
    (phi(mid) < 0.0 ? lo : hi) = mid;
  }
  const double u_l = 0.5 * (lo + hi);
  const double z = scene.depth(u_l, v);
  return z > 0.0 ? z : -1.0;
}

ScenePair render_scene_pair(const SyntheticScene& scene) {
  scene.validate();
  const auto& rig = scene.rig;
  ScenePair pair{DepthImage(rig.height, rig.width), DepthImage(rig.height, rig.width)};
  for (int r = 0; r < rig.height; ++r) {
    for (int c = 0; c < rig.width; ++c) {
      pair.left.set(r, c, scene.depth(c, r));
      const double z = right_ray_depth(scene, c, r);
      if (z > 0.0) pair.right.set(r, c, z);
    }
  }
  return pair;
}

}  // namespace mvdepth

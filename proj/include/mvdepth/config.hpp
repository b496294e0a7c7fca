#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "mvdepth/formation.hpp"
#include "mvdepth/pipeline.hpp"
#include "mvdepth/scene_io.hpp"

namespace mvdepth {

/// Everything one experiment needs. Missing keys take the defaults below;
/// unknown keys and wrong types are schema errors.
struct RunConfig {
  CameraRig rig{200.0, 3.5, 127.5, 31.5, 256, 64};
  SurfaceParams surface{SurfaceKind::slanted_sinusoid, 150.0, 0.2, 0.5, 6.0, 64.0, 48.0};

  // Optional clean input pair; when set it replaces the synthetic scene.
  std::optional<std::filesystem::path> left_input;
  std::optional<std::filesystem::path> right_input;

  double noise_variance = 50.0;  // sigma_n^2
  int bits = 8;                  // B
  std::optional<std::pair<double, double>> depth_range;  // default: ground-truth extent
  std::uint64_t seed = 7;

  PipelineConfig pipeline;  // Q and depth_range are filled in at run time
  int normals_k = 16;
  double storage_scale = 1.0 / 128.0;  // file resolution of clean/enhanced depths

  void validate() const;
};

/// Throws std::invalid_argument with the offending key on schema errors.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& cfg);

/// Command-line overrides; set fields win over the config file.
struct ConfigOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> noise_variance;
  std::optional<int> bits;
  std::optional<std::string> scene;
  bool single_view = false;
};

void apply_overrides(RunConfig& cfg, const ConfigOverrides& ov);

}  // namespace mvdepth

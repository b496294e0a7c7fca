#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvdepth/config.hpp"

namespace mvdepth {

/// File names shared by the stages inside one output directory.
namespace files {
inline constexpr const char* left_gt = "left_gt.pgm";
inline constexpr const char* right_gt = "right_gt.pgm";
inline constexpr const char* left_noisy = "left_noisy.pgm";
inline constexpr const char* right_noisy = "right_noisy.pgm";
inline constexpr const char* left_enhanced = "left_enhanced.pgm";
inline constexpr const char* right_enhanced = "right_enhanced.pgm";
inline constexpr const char* cloud_gt = "cloud_gt.ply";
inline constexpr const char* cloud_noisy = "cloud_noisy.ply";
inline constexpr const char* cloud_enhanced = "cloud_enhanced.ply";
inline constexpr const char* enhance_report = "enhance_report.json";
inline constexpr const char* enhance_rows = "enhance_rows.csv";
inline constexpr const char* metrics_json = "metrics.json";
inline constexpr const char* metrics_csv = "metrics.csv";
}  // namespace files

struct CommandOptions {
  std::optional<std::filesystem::path> config_path;
  ConfigOverrides overrides;
  std::filesystem::path out_dir = "out";
  std::optional<std::filesystem::path> in_dir;  // defaults to out_dir
  int jobs = 1;

  // evaluate: explicit cloud pair instead of the stage outputs
  std::optional<std::filesystem::path> reference;
  std::optional<std::filesystem::path> test;
  bool dump_distances = false;

  // pipeline: one run per noise level, in sub-directories, when non-empty
  std::vector<double> sweep;
};

/// Config file (or defaults) with the command-line overrides applied.
RunConfig resolve_config(const CommandOptions& opts);

/// Each stage reads from in_dir (or out_dir), writes into out_dir, and
/// leaves a <stage>_manifest.json describing the run. Errors throw.
void run_simulate(const CommandOptions& opts);
void run_enhance(const CommandOptions& opts);
void run_synthesize(const CommandOptions& opts);
nlohmann::json run_evaluate(const CommandOptions& opts);
/// All four stages in out_dir; returns the metrics.
nlohmann::json run_pipeline(const CommandOptions& opts);

}  // namespace mvdepth

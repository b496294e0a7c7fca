#include "mvdepth/commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <Eigen/Core>

#include "mvdepth/formation.hpp"
#include "mvdepth/pipeline.hpp"
#include "mvdepth/synthesis.hpp"

namespace mvdepth {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr std::uint64_t kRightSeedOffset = 0x9E3779B97F4A7C15ULL;

fs::path input_dir(const CommandOptions& o) { return o.in_dir ? *o.in_dir : o.out_dir; }

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing input " + path.string());
  return json::parse(in);
}

void require(const fs::path& path) {
  if (!fs::exists(path)) throw std::runtime_error("missing input " + path.string());
}

json path_list(const std::vector<fs::path>& paths) {
  json out = json::array();
  for (const auto& p : paths) out.push_back(fs::absolute(p).lexically_normal().string());
  return out;
}

void write_manifest(const std::string& stage, const CommandOptions& opts, const RunConfig& cfg,
                    const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs,
                    json extra = json::object()) {
  json m;
  m["subcommand"] = stage;
  m["config_path"] =
      opts.config_path ? json(fs::absolute(*opts.config_path).lexically_normal().string()) : json();
  m["config"] = to_json(cfg);
  m["seed"] = cfg.seed;
  m["inputs"] = path_list(inputs);
  m["outputs"] = path_list(outputs);
  m["timestamp"] = utc_timestamp();
  m["versions"] = {{"mvdepth", kVersion},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                 std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)}};
  for (auto& [k, v] : extra.items()) m[k] = v;
  write_json(m, opts.out_dir / (stage + "_manifest.json"));
}

std::pair<double, double> valid_extent(const DepthImage& a, const DepthImage& b) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const DepthImage* img : {&a, &b})
    for (int r = 0; r < img->height(); ++r)
      for (int c = 0; c < img->width(); ++c)
        if (img->valid(r, c)) {
          lo = std::min(lo, img->value(r, c));
          hi = std::max(hi, img->value(r, c));
        }
  if (!(hi > lo)) throw std::runtime_error("ground truth has no depth extent");
  return {lo, hi};
}

PointCloud pair_cloud(const DepthImage& left, const DepthImage& right, const CameraRig& rig) {
  return merge(project_to_cloud(left, rig, View::left), project_to_cloud(right, rig, View::right));
}

}  // namespace

RunConfig resolve_config(const CommandOptions& opts) {
  RunConfig cfg = opts.config_path ? load_run_config(*opts.config_path) : RunConfig{};
  apply_overrides(cfg, opts.overrides);
  return cfg;
}

void run_simulate(const CommandOptions& opts) {
  const RunConfig cfg = resolve_config(opts);
  fs::create_directories(opts.out_dir);

  DepthImage gt_l, gt_r;
  std::vector<fs::path> inputs;
  if (cfg.left_input) {
    gt_l = read_depth_image(*cfg.left_input);
    gt_r = read_depth_image(*cfg.right_input);
    gt_l.check_matches(cfg.rig);
    gt_r.check_matches(cfg.rig);
    inputs = {*cfg.left_input, *cfg.right_input};
  } else {
    ScenePair pair = render_scene_pair(SyntheticScene{cfg.surface, cfg.rig});
    gt_l = std::move(pair.left);
    gt_r = std::move(pair.right);
  }

  const auto [lo, hi] = cfg.depth_range ? *cfg.depth_range : valid_extent(gt_l, gt_r);
  const double Q = quantization_step_for_bits(lo, hi, cfg.bits);
  const std::uint64_t seed_l = cfg.seed;
  const std::uint64_t seed_r = cfg.seed + kRightSeedOffset;
  const DepthImage noisy_l = simulate_observation(gt_l, {Q, cfg.noise_variance, seed_l});
  const DepthImage noisy_r = simulate_observation(gt_r, {Q, cfg.noise_variance, seed_r});

  const fs::path o = opts.out_dir;
  write_depth_image(gt_l, o / files::left_gt, fitting_scale(gt_l, cfg.storage_scale));
  write_depth_image(gt_r, o / files::right_gt, fitting_scale(gt_r, cfg.storage_scale));
  write_depth_image(noisy_l, o / files::left_noisy, fitting_scale(noisy_l, Q));
  write_depth_image(noisy_r, o / files::right_noisy, fitting_scale(noisy_r, Q));

  write_manifest("simulate", opts, cfg, inputs,
                 {o / files::left_gt, o / files::right_gt, o / files::left_noisy,
                  o / files::right_noisy},
                 {{"formation",
                   {{"quant_step", Q},
                    {"depth_min", lo},
                    {"depth_max", hi},
                    {"sigma_n2", cfg.noise_variance},
                    {"seed_left", seed_l},
                    {"seed_right", seed_r}}}});
}

void run_enhance(const CommandOptions& opts) {
  const RunConfig cfg = resolve_config(opts);
  const fs::path in = input_dir(opts);
  const json sim = read_json(in / "simulate_manifest.json");
  const json& form = sim.at("formation");
  const fs::path left_path = in / files::left_noisy;
  const fs::path right_path = in / files::right_noisy;
  require(left_path);
  require(right_path);

  PipelineConfig p = cfg.pipeline;
  p.quant_step = form.at("quant_step").get<double>();
  p.depth_range = form.at("depth_max").get<double>() - form.at("depth_min").get<double>();
  // The observations' own noise level unless the command line says otherwise.
  p.noise_variance = opts.overrides.noise_variance ? *opts.overrides.noise_variance
                                                   : form.at("sigma_n2").get<double>();
  if (!(p.noise_variance > 0.0))
    throw std::runtime_error("enhance needs sigma_n2 > 0 (noise-free observations)");

  const DepthImage noisy_l = read_depth_image(left_path);
  const DepthImage noisy_r = read_depth_image(right_path);
  if (!noisy_l.same_shape(noisy_r)) throw std::runtime_error("left/right dimensions differ");
  const EnhancementResult res = enhance_image_pair(noisy_l, noisy_r, cfg.rig, p);

  fs::create_directories(opts.out_dir);
  const fs::path o = opts.out_dir;
  write_depth_image(res.left, o / files::left_enhanced, fitting_scale(res.left, cfg.storage_scale));
  write_depth_image(res.right, o / files::right_enhanced,
                    fitting_scale(res.right, cfg.storage_scale));
  write_json(to_json(res.report), o / files::enhance_report);

  std::ofstream csv(o / files::enhance_rows);
  csv << "row,objective_initial,objective_final,iterations,restarts,converged,fallback,"
         "metric_refreshed\n";
  csv << std::setprecision(17);
  for (const auto& r : res.report.rows)
    csv << r.row << ',' << r.objective_initial << ',' << r.objective_final << ',' << r.iterations
        << ',' << r.restarts << ',' << r.converged << ',' << r.fallback << ','
        << r.metric_refreshed << '\n';
  if (!csv) throw std::runtime_error("cannot write " + (o / files::enhance_rows).string());

  write_manifest("enhance", opts, cfg, {left_path, right_path},
                 {o / files::left_enhanced, o / files::right_enhanced, o / files::enhance_report,
                  o / files::enhance_rows},
                 {{"fallback_rows", res.report.fallback_rows}});
}

void run_synthesize(const CommandOptions& opts) {
  const RunConfig cfg = resolve_config(opts);
  const fs::path in = input_dir(opts);
  const std::vector<fs::path> inputs = {in / files::left_gt,       in / files::right_gt,
                                        in / files::left_noisy,    in / files::right_noisy,
                                        in / files::left_enhanced, in / files::right_enhanced};
  for (const auto& p : inputs) require(p);

  auto load = [&](const char* l, const char* r) {
    return pair_cloud(read_depth_image(in / l), read_depth_image(in / r), cfg.rig);
  };
  const PointCloud gt = load(files::left_gt, files::right_gt);
  const PointCloud noisy = estimate_normals(load(files::left_noisy, files::right_noisy), cfg.normals_k);
  const PointCloud enhanced =
      estimate_normals(load(files::left_enhanced, files::right_enhanced), cfg.normals_k);

  fs::create_directories(opts.out_dir);
  const fs::path o = opts.out_dir;
  write_point_cloud(gt, o / files::cloud_gt);
  write_point_cloud(noisy, o / files::cloud_noisy);
  write_point_cloud(enhanced, o / files::cloud_enhanced);
  write_manifest("synthesize", opts, cfg, inputs,
                 {o / files::cloud_gt, o / files::cloud_noisy, o / files::cloud_enhanced});
}

json run_evaluate(const CommandOptions& opts) {
  const RunConfig cfg = resolve_config(opts);
  fs::create_directories(opts.out_dir);
  const fs::path o = opts.out_dir;

  auto dump = [&](const MetricsReport& rep, const std::string& name) {
    std::ofstream out(o / ("distances_" + name + ".csv"));
    out << "index,c2c,c2p\n" << std::setprecision(17);
    for (std::size_t i = 0; i < rep.c2c_distances.size(); ++i)
      out << i << ',' << rep.c2c_distances[i] << ','
          << (rep.c2p_distances.empty() ? 0.0 : rep.c2p_distances[i]) << '\n';
  };

  json metrics;
  std::ostringstream csv;
  csv << std::setprecision(17) << "cloud,c2c,c2p\n";
  std::vector<fs::path> inputs;

  if (opts.reference || opts.test) {
    if (!opts.reference || !opts.test)
      throw std::runtime_error("evaluate needs both --reference and --test");
    inputs = {*opts.reference, *opts.test};
    const PointCloud ref = read_point_cloud(*opts.reference);
    PointCloud test = read_point_cloud(*opts.test);
    if (!test.has_normals()) test = estimate_normals(test, cfg.normals_k);
    const MetricsReport rep = evaluate_clouds(ref, test);
    metrics = {{"c2c", rep.c2c}, {"c2p", rep.c2p}, {"reference_points", ref.size()},
               {"test_points", test.size()}};
    csv << "test," << rep.c2c << ',' << rep.c2p << '\n';
    if (opts.dump_distances) dump(rep, "test");
  } else {
    const fs::path in = input_dir(opts);
    inputs = {in / files::cloud_gt, in / files::cloud_noisy, in / files::cloud_enhanced};
    for (const auto& p : inputs) require(p);
    const PointCloud gt = read_point_cloud(inputs[0]);
    const PointCloud noisy = read_point_cloud(inputs[1]);
    const PointCloud enhanced = read_point_cloud(inputs[2]);
    const MetricsReport rn = evaluate_clouds(gt, noisy);
    const MetricsReport re = evaluate_clouds(gt, enhanced);
    if (!noisy.has_normals() || !enhanced.has_normals())
      throw std::runtime_error("evaluate: test clouds carry no normals");
    metrics = {{"c2c_noisy", rn.c2c},
               {"c2c_enhanced", re.c2c},
               {"c2p_noisy", rn.c2p},
               {"c2p_enhanced", re.c2p},
               {"reference_points", gt.size()},
               {"noisy_points", noisy.size()},
               {"enhanced_points", enhanced.size()}};
    csv << "noisy," << rn.c2c << ',' << rn.c2p << '\n';
    csv << "enhanced," << re.c2c << ',' << re.c2p << '\n';
    if (opts.dump_distances) {
      dump(rn, "noisy");
      dump(re, "enhanced");
    }
  }

  write_json(metrics, o / files::metrics_json);
  std::ofstream(o / files::metrics_csv) << csv.str();
  write_manifest("evaluate", opts, cfg, inputs, {o / files::metrics_json, o / files::metrics_csv});
  return metrics;
}

json run_pipeline(const CommandOptions& opts) {
  if (opts.sweep.empty()) {
    CommandOptions stage = opts;
    stage.in_dir.reset();
    run_simulate(stage);
    run_enhance(stage);
    run_synthesize(stage);
    json metrics = run_evaluate(stage);
    write_manifest("pipeline", stage, resolve_config(stage), {},
                   {stage.out_dir / files::metrics_json});
    return metrics;
  }

  // Independent runs, one per noise level, spread over the worker threads.
  std::vector<json> results(opts.sweep.size());
  std::vector<std::exception_ptr> errors(opts.sweep.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next++) < opts.sweep.size();) {
      try {
        CommandOptions sub = opts;
        sub.sweep.clear();
        sub.overrides.noise_variance = opts.sweep[k];
        std::ostringstream name;
        name << "sigma_n2_" << opts.sweep[k];
        sub.out_dir = opts.out_dir / name.str();
        results[k] = run_pipeline(sub);
        results[k]["sigma_n2"] = opts.sweep[k];
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(opts.jobs, static_cast<int>(opts.sweep.size())));
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  fs::create_directories(opts.out_dir);
  json sweep = results;
  write_json(sweep, opts.out_dir / "sweep_metrics.json");
  return sweep;
}

}  // namespace mvdepth

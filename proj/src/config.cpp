#include "mvdepth/config.hpp"

#include <fstream>
#include <initializer_list>
#include <stdexcept>

#include "mvdepth/graph.hpp"

namespace mvdepth {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw std::invalid_argument("config: '" + where + "' must be an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw std::invalid_argument("config: unknown key '" + where + "." + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, const std::string& where, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument("config: wrong type for '" + where + "." + key + "'");
  }
}

// Numbers must be JSON numbers; get<double>() would also accept booleans.
void read_number(const json& j, const char* key, const std::string& where, double& out) {
  if (!j.contains(key)) return;
  if (!j.at(key).is_number())
    throw std::invalid_argument("config: '" + where + "." + key + "' must be a number");
  out = j.at(key).get<double>();
}

void read_int(const json& j, const char* key, const std::string& where, int& out) {
  if (!j.contains(key)) return;
  if (!j.at(key).is_number_integer())
    throw std::invalid_argument("config: '" + where + "." + key + "' must be an integer");
  out = j.at(key).get<int>();
}

}  // namespace

void RunConfig::validate() const {
  rig.validate();
  if (left_input.has_value() != right_input.has_value())
    throw std::invalid_argument("config: inputs need both left and right paths");
  if (!left_input) SyntheticScene{surface, rig}.validate();
  if (!(noise_variance >= 0.0)) throw std::invalid_argument("config: sigma_n2 must be >= 0");
  if (bits < 1 || bits > 16) throw std::invalid_argument("config: bits must lie in [1, 16]");
  if (depth_range && !(depth_range->second > depth_range->first))
    throw std::invalid_argument("config: depth_range must be increasing");
  if (normals_k < 3) throw std::invalid_argument("config: normals_k must be >= 3");
  if (!(storage_scale > 0.0)) throw std::invalid_argument("config: storage_scale must be > 0");
  PipelineConfig p = pipeline;
  p.noise_variance = noise_variance > 0.0 ? noise_variance : 1.0;
  p.validate();
}

RunConfig parse_run_config(const json& j) {
  RunConfig c;
  check_keys(j, "config",
             {"rig", "scene", "inputs", "formation", "warp", "graph", "noise", "solver",
              "synthesis", "storage"});

  if (j.contains("rig")) {
    const json& r = j["rig"];
    check_keys(r, "rig", {"focal", "baseline", "cx", "cy", "width", "height"});
    read_number(r, "focal", "rig", c.rig.focal);
    read_number(r, "baseline", "rig", c.rig.baseline);
    read_number(r, "cx", "rig", c.rig.cx);
    read_number(r, "cy", "rig", c.rig.cy);
    read_int(r, "width", "rig", c.rig.width);
    read_int(r, "height", "rig", c.rig.height);
  }
  if (j.contains("scene")) {
    const json& s = j["scene"];
    check_keys(s, "scene",
               {"kind", "base_depth", "slope_u", "slope_v", "amplitude", "period_u", "period_v"});
    std::string kind = to_string(c.surface.kind);
    read(s, "kind", "scene", kind);
    c.surface.kind = parse_surface_kind(kind);
    read_number(s, "base_depth", "scene", c.surface.base_depth);
    read_number(s, "slope_u", "scene", c.surface.slope_u);
    read_number(s, "slope_v", "scene", c.surface.slope_v);
    read_number(s, "amplitude", "scene", c.surface.amplitude);
    read_number(s, "period_u", "scene", c.surface.period_u);
    read_number(s, "period_v", "scene", c.surface.period_v);
  }
  if (j.contains("inputs")) {
    const json& in = j["inputs"];
    check_keys(in, "inputs", {"left", "right"});
    std::string l, r;
    read(in, "left", "inputs", l);
    read(in, "right", "inputs", r);
    if (!l.empty()) c.left_input = l;
    if (!r.empty()) c.right_input = r;
  }
  if (j.contains("formation")) {
    const json& f = j["formation"];
    check_keys(f, "formation", {"sigma_n2", "bits", "depth_range", "seed"});
    read_number(f, "sigma_n2", "formation", c.noise_variance);
    read_int(f, "bits", "formation", c.bits);
    if (f.contains("depth_range")) {
      const json& dr = f["depth_range"];
      if (dr.is_string() && dr.get<std::string>() == "auto") {
        c.depth_range.reset();
      } else if (dr.is_array() && dr.size() == 2 && dr[0].is_number() && dr[1].is_number()) {
        c.depth_range = std::make_pair(dr[0].get<double>(), dr[1].get<double>());
      } else {
        throw std::invalid_argument("config: formation.depth_range must be \"auto\" or [min, max]");
      }
    }
    if (f.contains("seed")) {
      if (!f["seed"].is_number_unsigned())
        throw std::invalid_argument("config: formation.seed must be a non-negative integer");
      c.seed = f["seed"].get<std::uint64_t>();
    }
  }
  PipelineConfig& p = c.pipeline;
  if (j.contains("warp")) {
    const json& w = j["warp"];
    check_keys(w, "warp", {"sigma_s", "normalization", "C", "truncation", "jacobian"});
    read_number(w, "sigma_s", "warp", p.warp.sigma_s);
    std::string mode = to_string(p.warp.normalization);
    read(w, "normalization", "warp", mode);
    p.warp.normalization = parse_normalization(mode);
    read_number(w, "C", "warp", p.warp.C);
    read_number(w, "truncation", "warp", p.warp.truncation);
    std::string jac = to_string(p.warp.jacobian);
    read(w, "jacobian", "warp", jac);
    p.warp.jacobian = parse_warp_jacobian(jac);
  }
  if (j.contains("graph")) {
    const json& g = j["graph"];
    check_keys(g, "graph", {"K", "bandwidth", "max_outer", "rel_tol"});
    read_int(g, "K", "graph", p.K);
    read_int(g, "bandwidth", "graph", p.bandwidth);
    read_int(g, "max_outer", "graph", p.metric.max_outer);
    read_number(g, "rel_tol", "graph", p.metric.rel_tol);
  }
  if (j.contains("noise")) {
    const json& n = j["noise"];
    check_keys(n, "noise", {"K_n", "loading", "scaling"});
    read_int(n, "K_n", "noise", p.K_n);
    read_number(n, "loading", "noise", p.precision_loading);
    std::string scaling = to_string(p.precision_scaling);
    read(n, "scaling", "noise", scaling);
    p.precision_scaling = parse_precision_scaling(scaling);
  }
  if (j.contains("solver")) {
    const json& s = j["solver"];
    check_keys(s, "solver",
               {"lambda_l", "lambda_r", "passes", "anchor", "single_view", "max_iters", "grad_tol",
                "backtrack", "initial_step", "domain_margin"});
    read_number(s, "lambda_l", "solver", p.lambda_l);
    read_number(s, "lambda_r", "solver", p.lambda_r);
    read_int(s, "passes", "solver", p.passes);
    std::string anchor = to_string(p.anchor);
    read(s, "anchor", "solver", anchor);
    p.anchor = parse_anchor(anchor);
    read(s, "single_view", "solver", p.single_view);
    read_int(s, "max_iters", "solver", p.solver.max_iters);
    read_number(s, "grad_tol", "solver", p.solver.grad_tol);
    read_number(s, "backtrack", "solver", p.solver.backtrack);
    read_number(s, "initial_step", "solver", p.solver.initial_step);
    read_number(s, "domain_margin", "solver", p.solver.domain_margin);
  }
  if (j.contains("synthesis")) {
    const json& s = j["synthesis"];
    check_keys(s, "synthesis", {"normals_k"});
    read_int(s, "normals_k", "synthesis", c.normals_k);
  }
  if (j.contains("storage")) {
    const json& s = j["storage"];
    check_keys(s, "storage", {"scale"});
    read_number(s, "scale", "storage", c.storage_scale);
  }
  p.metric.bandwidth = p.bandwidth;
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config " + path.string() + ": " + e.what());
  }
  return parse_run_config(j);
}

json to_json(const RunConfig& c) {
  const PipelineConfig& p = c.pipeline;
  json j;
  j["rig"] = {{"focal", c.rig.focal}, {"baseline", c.rig.baseline}, {"cx", c.rig.cx},
              {"cy", c.rig.cy},       {"width", c.rig.width},       {"height", c.rig.height}};
  j["scene"] = {{"kind", to_string(c.surface.kind)},  {"base_depth", c.surface.base_depth},
                {"slope_u", c.surface.slope_u},       {"slope_v", c.surface.slope_v},
                {"amplitude", c.surface.amplitude},   {"period_u", c.surface.period_u},
                {"period_v", c.surface.period_v}};
  if (c.left_input)
    j["inputs"] = {{"left", c.left_input->string()}, {"right", c.right_input->string()}};
  j["formation"] = {{"sigma_n2", c.noise_variance}, {"bits", c.bits}, {"seed", c.seed}};
  if (c.depth_range)
    j["formation"]["depth_range"] = {c.depth_range->first, c.depth_range->second};
  else
    j["formation"]["depth_range"] = "auto";
  j["warp"] = {{"sigma_s", p.warp.sigma_s},
               {"normalization", to_string(p.warp.normalization)},
               {"C", p.warp.C},
               {"truncation", p.warp.truncation},
               {"jacobian", to_string(p.warp.jacobian)}};
  j["graph"] = {{"K", p.K},
                {"bandwidth", p.bandwidth},
                {"max_outer", p.metric.max_outer},
                {"rel_tol", p.metric.rel_tol}};
  j["noise"] = {{"K_n", p.K_n},
                {"loading", p.precision_loading},
                {"scaling", to_string(p.precision_scaling)}};
  j["solver"] = {{"lambda_l", p.lambda_l},
                 {"lambda_r", p.lambda_r},
                 {"passes", p.passes},
                 {"anchor", to_string(p.anchor)},
                 {"single_view", p.single_view},
                 {"max_iters", p.solver.max_iters},
                 {"grad_tol", p.solver.grad_tol},
                 {"backtrack", p.solver.backtrack},
                 {"initial_step", p.solver.initial_step},
                 {"domain_margin", p.solver.domain_margin}};
  j["synthesis"] = {{"normals_k", c.normals_k}};
  j["storage"] = {{"scale", c.storage_scale}};
  return j;
}

void apply_overrides(RunConfig& cfg, const ConfigOverrides& ov) {
  if (ov.seed) cfg.seed = *ov.seed;
  if (ov.noise_variance) cfg.noise_variance = *ov.noise_variance;
  if (ov.bits) cfg.bits = *ov.bits;
  if (ov.scene) cfg.surface.kind = parse_surface_kind(*ov.scene);
  if (ov.single_view) cfg.pipeline.single_view = true;
  cfg.validate();
}

}  // namespace mvdepth

#include "mvdepth/pipeline.hpp"

#include <algorithm>
#include <optional>
#include <stdexcept>

#include <Eigen/Cholesky>

namespace mvdepth {

namespace {

// Copies the nearest valid neighbour into invalid slots so that features and
// the warp see a complete row. Empty when the row has no valid pixel.
std::optional<Eigen::VectorXd> filled_row(const Eigen::VectorXd& y, const std::vector<bool>& mask) {
  const Eigen::Index n = y.size();
  Eigen::VectorXd out = y;
  Eigen::Index last = -1;
  std::vector<Eigen::Index> nearest(static_cast<std::size_t>(n), -1);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (mask[static_cast<std::size_t>(j)]) last = j;
    nearest[static_cast<std::size_t>(j)] = last;
  }
  if (last < 0) return std::nullopt;
  Eigen::Index next = -1;
  for (Eigen::Index j = n - 1; j >= 0; --j) {
    if (mask[static_cast<std::size_t>(j)]) {
      next = j;
      continue;
    }
    const Eigen::Index prev = nearest[static_cast<std::size_t>(j)];
    Eigen::Index src = prev;
    if (src < 0 || (next >= 0 && next - j < j - prev)) src = next;
    out[j] = y[src];
  }
  return out;
}

Eigen::MatrixXd masked(const Eigen::MatrixXd& P, const std::vector<bool>& keep) {
  Eigen::VectorXd d(P.rows());
  for (Eigen::Index j = 0; j < d.size(); ++j) d[j] = keep[static_cast<std::size_t>(j)] ? 1.0 : 0.0;
  return d.asDiagonal() * P * d.asDiagonal();
}

PrecisionEstimate row_precision(const std::deque<Eigen::VectorXd>& window, Eigen::Index n,
                                const PipelineConfig& cfg) {
  if (static_cast<int>(window.size()) < cfg.K_n) {
    PrecisionEstimate est;
    est.P = Eigen::MatrixXd::Identity(n, n) / cfg.noise_variance;
    est.noise_variance = cfg.noise_variance;
    return est;
  }
  const std::vector<Eigen::VectorXd> rows(window.begin(), window.end());
  PrecisionEstimate est = estimate_precision(rows, cfg.noise_variance, cfg.precision_loading);
  if (cfg.precision_scaling == PrecisionScaling::noise_level) {
    const double mean_var =
        est.P.llt().solve(Eigen::MatrixXd::Identity(n, n)).trace() / static_cast<double>(n);
    est.P *= mean_var / cfg.noise_variance;
  }
  return est;
}

struct ViewRows {
  const DepthImage& image;
  const std::vector<Eigen::VectorXd>& enhanced;
  int current;

  // Enhanced rows before the current one, filled observations from it on.
  Eigen::VectorXd best(int r) const {
    if (r < current) return enhanced[static_cast<std::size_t>(r)];
    auto f = filled_row(image.row(r), image.row_mask(r));
    return f ? *f : Eigen::VectorXd::Zero(image.width());
  }

  FeatureMatrix features(int r, const CameraRig& rig, const FeatureScaling& scaling) const {
    std::vector<Eigen::VectorXd> window;
    for (int k = std::max(0, r - 2); k <= r; ++k) window.push_back(best(k));
    return compute_features(window, r, rig, scaling);
  }
};

MetricMatrix refresh_metric(const ViewRows& view, const MetricMatrix& current, int i,
                            const CameraRig& rig, const FeatureScaling& scaling,
                            const PipelineConfig& cfg) {
  // Up to K previous rows; observed rows from i onward stand in at start-up.
  std::vector<TrainingRow> rows;
  const int first = std::max(0, i - cfg.K);
  for (int r = first; r < first + cfg.K && r < view.image.height(); ++r)
    rows.push_back({view.best(r), view.features(r, rig, scaling).rows});
  MetricLearningOptions opts = cfg.metric;
  opts.bandwidth = cfg.bandwidth;
  auto res = learn_metric(rows, current, opts);
  return res.metric;
}

void push_residual(std::deque<Eigen::VectorXd>& window, Eigen::VectorXd r, int K_n) {
  window.push_back(std::move(r));
  while (static_cast<int>(window.size()) > K_n) window.pop_front();
}

}  // namespace

PrecisionScaling parse_precision_scaling(const std::string& name) {
  if (name == "estimated") return PrecisionScaling::estimated;
  if (name == "noise_level") return PrecisionScaling::noise_level;
  throw std::invalid_argument("unknown precision scaling '" + name + "'");
}

std::string to_string(PrecisionScaling scaling) {
  return scaling == PrecisionScaling::estimated ? "estimated" : "noise_level";
}

void PipelineConfig::validate() const {
  if (K < 1) throw std::invalid_argument("pipeline: K must be >= 1");
  if (K_n < 1) throw std::invalid_argument("pipeline: K_n must be >= 1");
  if (passes < 1) throw std::invalid_argument("pipeline: passes must be >= 1");
  if (bandwidth < 1) throw std::invalid_argument("pipeline: bandwidth must be >= 1");
  if (!(lambda_l >= 0.0) || !(lambda_r >= 0.0))
    throw std::invalid_argument("pipeline: prior weights must be >= 0");
  if (!(noise_variance > 0.0)) throw std::invalid_argument("pipeline: sigma_n^2 must be > 0");
  if (!(quant_step > 0.0)) throw std::invalid_argument("pipeline: Q must be > 0");
  if (!(depth_range > 0.0)) throw std::invalid_argument("pipeline: depth range must be > 0");
  if (!(precision_loading > 0.0))
    throw std::invalid_argument("pipeline: precision loading must be > 0");
  warp.validate();
  solver.validate();
}

RowOutput enhance_row_pair(int i, const DepthImage& left, const DepthImage& right,
                           const CameraRig& rig, EnhancementState& state,
                           const PipelineConfig& cfg) {
  if (static_cast<int>(state.enhanced_left.size()) != i ||
      static_cast<int>(state.enhanced_right.size()) != i)
    throw std::invalid_argument("enhance_row_pair: rows must be processed in order");
  const Eigen::Index n = left.width();
  const Eigen::VectorXd y_l = left.row(i);
  const Eigen::VectorXd y_r = right.row(i);
  const std::vector<bool> mask_l = left.row_mask(i);
  const std::vector<bool> mask_r = right.row_mask(i);

  RowOutput out;
  out.left = y_l;
  out.right = y_r;
  out.diagnostics.row = i;

  const FeatureScaling scaling{cfg.depth_range, rig.height, rig.width};
  const ViewRows view_l{left, state.enhanced_left, i};
  const ViewRows view_r{right, state.enhanced_right, i};

  if (state.rows_since_refresh == 0) {
    state.metric_left = refresh_metric(view_l, state.metric_left, i, rig, scaling, cfg);
    if (!cfg.single_view)
      state.metric_right = refresh_metric(view_r, state.metric_right, i, rig, scaling, cfg);
    out.diagnostics.metric_refreshed = true;
  }
  state.rows_since_refresh = (state.rows_since_refresh + 1) % cfg.K;

  const auto yl_fill = filled_row(y_l, mask_l);
  const Eigen::VectorXd yr_fill = filled_row(y_r, mask_r).value_or(Eigen::VectorXd::Zero(n));

  auto finish = [&](const Eigen::VectorXd& x_l_work) {
    state.enhanced_left.push_back(x_l_work);
    Eigen::VectorXd r_work = yr_fill;
    for (Eigen::Index j = 0; j < n; ++j)
      if (mask_r[static_cast<std::size_t>(j)]) r_work[j] = out.right[j];
    state.enhanced_right.push_back(r_work);

    Eigen::VectorXd res_l = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd res_r = Eigen::VectorXd::Zero(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (mask_l[static_cast<std::size_t>(j)]) res_l[j] = y_l[j] - out.left[j];
      if (mask_r[static_cast<std::size_t>(j)]) res_r[j] = y_r[j] - out.right[j];
    }
    push_residual(state.residuals_left, std::move(res_l), cfg.K_n);
    push_residual(state.residuals_right, std::move(res_r), cfg.K_n);
    return out;
  };

  if (!yl_fill) {
    out.diagnostics.warning = "row has no valid left pixel; passed through";
    return finish(Eigen::VectorXd::Zero(n));
  }

  const FeatureMatrix feat_l = view_l.features(i, rig, scaling);
  const FeatureMatrix feat_r = view_r.features(i, rig, scaling);
  const GraphLaplacian lap_l =
      build_laplacian(feat_l, state.metric_left.matrix(), cfg.bandwidth, mask_l);

  PrecisionEstimate prec_l = row_precision(state.residuals_left, n, cfg);
  prec_l.P = masked(prec_l.P, mask_l);
  const PrecisionEstimate prec_r_full = row_precision(state.residuals_right, n, cfg);

  Eigen::VectorXd x = *yl_fill;
  try {
    for (int pass = 0; pass < cfg.passes; ++pass) {
      const LinearizedWarp lin = linearize(x, rig, cfg.warp);
      std::vector<bool> active_r(static_cast<std::size_t>(n));
      for (Eigen::Index j = 0; j < n; ++j)
        active_r[static_cast<std::size_t>(j)] =
            mask_r[static_cast<std::size_t>(j)] && lin.covered[static_cast<std::size_t>(j)];

      RowContext ctx;
      ctx.y_l = *yl_fill;
      ctx.y_r = yr_fill;
      ctx.H = lin.H;
      ctx.d = lin.d;
      ctx.L_l = lap_l.L;
      ctx.lambda_l = cfg.lambda_l;
      ctx.anchor = cfg.anchor;
      ctx.like_l = affine_approx(ctx.y_l, x, prec_l, cfg.quant_step);
      ctx.precision_l = prec_l;

      PrecisionEstimate prec_r = prec_r_full;
      if (cfg.single_view) {
        prec_r.P = Eigen::MatrixXd::Zero(n, n);
        ctx.lambda_r = 0.0;
        ctx.L_r = SparseMatrix(n, n);
      } else {
        prec_r.P = masked(prec_r.P, active_r);
        ctx.lambda_r = cfg.lambda_r;
        ctx.L_r =
            build_laplacian(feat_r, state.metric_right.matrix(), cfg.bandwidth, active_r).L;
      }
      ctx.like_r = affine_approx(ctx.y_r, lin.evaluate(x), prec_r, cfg.quant_step);
      ctx.precision_r = prec_r;

      const SolverResult res = fgm_solve(x, ctx, cfg.solver);
      if (pass == 0) out.diagnostics.objective_initial = res.trace.objective.front();
      out.diagnostics.objective_final = objective(res.x, ctx).value_or(res.trace.objective.back());
      out.diagnostics.iterations += res.trace.iterations;
      out.diagnostics.restarts += res.trace.restarts;
      out.diagnostics.converged = res.trace.converged;
      if (!res.x.allFinite() || res.x.minCoeff() <= 0.0)
        throw std::domain_error("solver left the positive orthant");
      x = res.x;
    }
  } catch (const std::exception& e) {
    out.diagnostics.fallback = true;
    out.diagnostics.warning = e.what();
    out.diagnostics.converged = false;
    return finish(*yl_fill);
  }

  for (Eigen::Index j = 0; j < n; ++j)
    if (mask_l[static_cast<std::size_t>(j)]) out.left[j] = x[j];

  // The right view follows from the left through the row-normalized warp.
  WarpConfig exact = cfg.warp;
  exact.normalization = Normalization::exact_row;
  const WarpWeights ww = interpolation_weights(x, rig, exact);
  const Eigen::VectorXd xr = ww.W * x;
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto s = static_cast<std::size_t>(j);
    if (mask_r[s] && ww.covered[s]) out.right[j] = std::max(0.0, xr[j]);
  }
  return finish(x);
}

nlohmann::json to_json(const EnhancementReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"row", r.row},
                    {"objective_initial", r.objective_initial},
                    {"objective_final", r.objective_final},
                    {"iterations", r.iterations},
                    {"restarts", r.restarts},
                    {"converged", r.converged},
                    {"fallback", r.fallback},
                    {"metric_refreshed", r.metric_refreshed},
                    {"warning", r.warning}});
  }
  return {{"fallback_rows", report.fallback_rows},
          {"metric_refreshes", report.metric_refreshes},
          {"rows", rows}};
}

EnhancementResult enhance_image_pair(const DepthImage& left, const DepthImage& right,
                                     const CameraRig& rig, const PipelineConfig& cfg) {
  rig.validate();
  cfg.validate();
  left.check_matches(rig);
  right.check_matches(rig);

  EnhancementResult result{left, right, {}};
  EnhancementState state;
  for (int i = 0; i < left.height(); ++i) {
    RowOutput row = enhance_row_pair(i, left, right, rig, state, cfg);
    for (int j = 0; j < left.width(); ++j) {
      if (left.valid(i, j)) result.left.set(i, j, std::max(0.0, row.left[j]));
      if (right.valid(i, j)) result.right.set(i, j, std::max(0.0, row.right[j]));
    }
    result.report.fallback_rows += row.diagnostics.fallback ? 1 : 0;
    result.report.metric_refreshes += row.diagnostics.metric_refreshed ? 1 : 0;
    result.report.rows.push_back(std::move(row.diagnostics));
  }
  return result;
}

}  // namespace mvdepth

#include "mvdepth/solver.hpp"

#include <cmath>
#include <limits>

namespace mvdepth {

namespace {

bool tracking(const RowContext& ctx) { return ctx.anchor == LikelihoodAnchor::tracking; }

double prior_value(const Eigen::VectorXd& x, const Eigen::VectorXd& gx, const RowContext& ctx) {
  double v = 0.0;
  if (ctx.lambda_l != 0.0) v += ctx.lambda_l * x.dot(ctx.L_l * x);
  if (ctx.lambda_r != 0.0) v += ctx.lambda_r * gx.dot(ctx.L_r * gx);
  return v;
}

struct Likelihoods {
  AffineLikelihood left;
  AffineLikelihood right;
};

// The pair of likelihoods in force at x: the stored ones, or re-expanded.
Likelihoods at_point(const Eigen::VectorXd& x, const Eigen::VectorXd& gx, const RowContext& ctx) {
  if (!tracking(ctx)) return {ctx.like_l, ctx.like_r};
  return {affine_approx(ctx.y_l, x, *ctx.precision_l, ctx.like_l.quant_step),
          affine_approx(ctx.y_r, gx, *ctx.precision_r, ctx.like_r.quant_step)};
}

std::optional<double> objective_with(const Eigen::VectorXd& x, const Eigen::VectorXd& gx,
                                     const Likelihoods& lk, const RowContext& ctx) {
  const double al = lk.left.unit_value(ctx.y_l - x);
  const double ar = lk.right.unit_value(ctx.y_r - gx);
  if (!(al > 0.0) || !(ar > 0.0)) return std::nullopt;
  return -std::log(al) - lk.left.log_scale - std::log(ar) - lk.right.log_scale +
         prior_value(x, gx, ctx);
}

Eigen::VectorXd gradient_with(const Eigen::VectorXd& x, const Eigen::VectorXd& gx,
                              const Likelihoods& lk, const RowContext& ctx) {
  const double al = lk.left.unit_value(ctx.y_l - x);
  const double ar = lk.right.unit_value(ctx.y_r - gx);
  Eigen::VectorXd g = lk.left.a_unit / al;
  Eigen::VectorXd back = lk.right.a_unit / ar;
  if (ctx.lambda_r != 0.0) back.noalias() += (2.0 * ctx.lambda_r) * (ctx.L_r * gx);
  g.noalias() += ctx.H.transpose() * back;
  if (ctx.lambda_l != 0.0) g.noalias() += (2.0 * ctx.lambda_l) * (ctx.L_l * x);
  return g;
}

}  // namespace

LikelihoodAnchor parse_anchor(const std::string& name) {
  if (name == "fixed") return LikelihoodAnchor::fixed;
  if (name == "tracking") return LikelihoodAnchor::tracking;
  throw std::invalid_argument("unknown likelihood anchor '" + name + "'");
}

std::string to_string(LikelihoodAnchor anchor) {
  return anchor == LikelihoodAnchor::fixed ? "fixed" : "tracking";
}

void RowContext::validate() const {
  const Eigen::Index n = y_l.size();
  if (y_r.size() != n || d.size() != n || H.rows() != n || H.cols() != n || L_l.rows() != n ||
      L_r.rows() != n || like_l.a_unit.size() != n || like_r.a_unit.size() != n)
    throw std::invalid_argument("row context: inconsistent row lengths");
  if (!(lambda_l >= 0.0) || !(lambda_r >= 0.0))
    throw std::invalid_argument("row context: prior weights must be >= 0");
  if (anchor == LikelihoodAnchor::tracking && (!precision_l || !precision_r))
    throw std::invalid_argument("row context: tracking anchors need both precisions");
}

void SolverConfig::validate() const {
  if (max_iters < 1) throw std::invalid_argument("solver: max_iters must be >= 1");
  if (!(backtrack > 0.0 && backtrack < 1.0))
    throw std::invalid_argument("solver: backtrack factor must lie in (0, 1)");
  if (!(initial_step > 0.0)) throw std::invalid_argument("solver: initial step must be > 0");
  if (!(domain_margin > 0.0)) throw std::invalid_argument("solver: domain margin must be > 0");
  if (!(grad_tol >= 0.0)) throw std::invalid_argument("solver: grad_tol must be >= 0");
}

RowContext reanchored(const RowContext& ctx, const Eigen::VectorXd& x) {
  RowContext out = ctx;
  out.like_l = affine_approx(ctx.y_l, x, *ctx.precision_l, ctx.like_l.quant_step);
  out.like_r = affine_approx(ctx.y_r, ctx.H * x + ctx.d, *ctx.precision_r,
                             ctx.like_r.quant_step);
  out.anchor = LikelihoodAnchor::fixed;
  return out;
}

LogArguments log_arguments(const Eigen::VectorXd& x, const RowContext& ctx) {
  const Eigen::VectorXd gx = ctx.H * x + ctx.d;
  const Likelihoods lk = at_point(x, gx, ctx);
  return {lk.left.unit_value(ctx.y_l - x), lk.right.unit_value(ctx.y_r - gx)};
}

bool in_domain(const Eigen::VectorXd& x, const RowContext& ctx, double margin) {
  if (!x.allFinite()) return false;
  if (tracking(ctx)) return true;  // the expansion point always has argument 1
  const auto args = log_arguments(x, ctx);
  return args.left > 0.0 && args.right > 0.0 &&
         args.left >= margin * std::abs(ctx.like_l.b_unit) &&
         args.right >= margin * std::abs(ctx.like_r.b_unit);
}

std::optional<double> objective(const Eigen::VectorXd& x, const RowContext& ctx) {
  const Eigen::VectorXd gx = ctx.H * x + ctx.d;
  return objective_with(x, gx, at_point(x, gx, ctx), ctx);
}

Eigen::VectorXd gradient(const Eigen::VectorXd& x, const RowContext& ctx) {
  const Eigen::VectorXd gx = ctx.H * x + ctx.d;
  return gradient_with(x, gx, at_point(x, gx, ctx), ctx);
}

SolverResult fgm_solve(const Eigen::VectorXd& x_init, const RowContext& ctx,
                       const SolverConfig& cfg) {
  ctx.validate();
  cfg.validate();
  if (x_init.size() != ctx.size()) throw std::invalid_argument("fgm_solve: x_init length mismatch");
  if (!in_domain(x_init, ctx, cfg.domain_margin))
    throw InfeasibleStart("fgm_solve: initial point violates the log-domain margin");

  auto eval = [&](const Eigen::VectorXd& x) -> double {
    const auto v = objective(x, ctx);
    return v ? *v : std::numeric_limits<double>::infinity();
  };
  // Tolerates rounding in comparisons of nearly equal objective values.
  auto slack = [](double f) { return 16.0 * std::numeric_limits<double>::epsilon() * std::abs(f); };

  SolverResult res;
  Eigen::VectorXd x = x_init;
  double fx = eval(x);
  Eigen::VectorXd gx = gradient(x, ctx);
  res.trace.objective.push_back(fx);

  Eigen::VectorXd best = x;
  double f_best = fx;
  double g_best = gx.norm();

  Eigen::VectorXd y = x;
  double fy = fx;
  Eigen::VectorXd gy = gx;
  double theta = 1.0;
  double step = cfg.initial_step;

  for (int it = 0; it < cfg.max_iters; ++it) {
    if (gx.norm() <= cfg.grad_tol) {
      res.trace.converged = true;
      break;
    }
    res.trace.iterations = it + 1;

    // Backtracking from the extrapolated point y, after a trial enlargement
    // so that a conservative initial step does not persist.
    step /= cfg.backtrack;
    Eigen::VectorXd x_new, g_new;
    double f_new = std::numeric_limits<double>::infinity();
    const double gy_sq = gy.squaredNorm();
    bool accepted = false;
    while (step > 1e-300) {
      x_new = y - step * gy;
      g_new.resize(0);
      if (in_domain(x_new, ctx, cfg.domain_margin)) {
        f_new = eval(x_new);
        if (0.5 * step * gy_sq > slack(fy)) {
          accepted = f_new <= fy - 0.5 * step * gy_sq + slack(fy);
        } else if (std::isfinite(f_new)) {
          // The required decrease is below the rounding of f: test the
          // curvature along the step through gradients instead.
          g_new = gradient(x_new, ctx);
          const Eigen::VectorXd delta = x_new - y;
          accepted = delta.dot(g_new - gy) <= delta.squaredNorm() / step;
        }
        if (accepted) break;
      }
      step *= cfg.backtrack;
    }
    if (!accepted) break;

    if (f_new > fx + slack(fx)) {
      // Momentum overshot: restart from the last iterate.
      ++res.trace.restarts;
      theta = 1.0;
      y = x;
      fy = fx;
      gy = gx;
      continue;
    }

    // Gradient restart: momentum pointing uphill is dropped.
    const bool uphill = gy.dot(x_new - x) > 0.0;
    const double theta_next = uphill ? 1.0 : 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
    if (uphill) ++res.trace.restarts;
    Eigen::VectorXd y_next = x_new + ((theta - 1.0) / theta_next) * (x_new - x);
    if (uphill) y_next = x_new;
    x = std::move(x_new);
    fx = f_new;
    gx = g_new.size() ? std::move(g_new) : gradient(x, ctx);
    res.trace.objective.push_back(fx);
    if (fx < f_best || (fx <= f_best + slack(f_best) && fx <= res.trace.objective.front() &&
                        gx.norm() < g_best)) {
      f_best = fx;
      g_best = gx.norm();
      best = x;
    }

    if (in_domain(y_next, ctx, cfg.domain_margin)) {
      y = std::move(y_next);
      fy = eval(y);
      gy = gradient(y, ctx);
      theta = uphill ? 1.0 : theta_next;
    } else {
      y = x;
      fy = fx;
      gy = gx;
      theta = 1.0;
    }
  }

  if (gx.norm() <= cfg.grad_tol) res.trace.converged = true;
  // Among iterates tied with the best value up to rounding, keep the
  // flattest one, but never one above the starting value.
  if (fx <= f_best || (fx <= f_best + slack(f_best) && fx <= res.trace.objective.front() &&
                       gx.norm() < g_best)) {
    best = x;
    f_best = fx;
  }
  res.x = std::move(best);
  res.trace.final_grad_norm = gradient(res.x, ctx).norm();
  if (res.trace.final_grad_norm <= cfg.grad_tol) res.trace.converged = true;
  return res;
}

}  // namespace mvdepth

#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "mvdepth/noise_model.hpp"
#include "mvdepth/warp.hpp"

namespace mvdepth {

/// How the affine likelihoods are anchored while a row is solved.
enum class LikelihoodAnchor {
  fixed,     // (a, b) computed once per pass and held during the solve
  tracking,  // (a, b) re-expanded at every point the solver evaluates
};

LikelihoodAnchor parse_anchor(const std::string& name);
std::string to_string(LikelihoodAnchor anchor);

/// Everything one row solve needs.
struct RowContext {
  Eigen::VectorXd y_l;
  Eigen::VectorXd y_r;
  AffineLikelihood like_l;
  AffineLikelihood like_r;
  SparseMatrix L_l;
  SparseMatrix L_r;
  SparseMatrix H;
  Eigen::VectorXd d;
  double lambda_l = 1.0;
  double lambda_r = 1.0;

  LikelihoodAnchor anchor = LikelihoodAnchor::fixed;
  // Needed for tracking anchors only.
  std::optional<PrecisionEstimate> precision_l;
  std::optional<PrecisionEstimate> precision_r;

  Eigen::Index size() const { return y_l.size(); }
  void validate() const;
};

struct SolverConfig {
  int max_iters = 500;
  double grad_tol = 1e-8;
  double backtrack = 0.5;      // step shrink factor beta
  double initial_step = 1.0;
  double domain_margin = 1e-8;  // log arguments must stay >= margin * b

  void validate() const;
};

/// Arguments of the two logarithms divided by their likelihood scale,
/// i.e. a_unit^T (y - x) + b_unit for each view.
struct LogArguments {
  double left;
  double right;
};

LogArguments log_arguments(const Eigen::VectorXd& x, const RowContext& ctx);

/// True when both log arguments clear the domain margin.
bool in_domain(const Eigen::VectorXd& x, const RowContext& ctx, double margin);

///   -ln(a_l^T (y_l - x) + b_l) - ln(a_r^T (y_r - H x - d) + b_r)
///   + lambda_l x^T L_l x + lambda_r (H x + d)^T L_r (H x + d)
/// Empty when a log argument is not positive. Tracking contexts re-expand
/// (a, b) at x first.
std::optional<double> objective(const Eigen::VectorXd& x, const RowContext& ctx);

/// Analytic gradient of objective(); requires x in the domain.
Eigen::VectorXd gradient(const Eigen::VectorXd& x, const RowContext& ctx);

/// The context with both likelihoods re-expanded at x.
RowContext reanchored(const RowContext& ctx, const Eigen::VectorXd& x);

struct SolverTrace {
  std::vector<double> objective;  // value at each accepted iterate, starting with x_init
  int iterations = 0;
  int restarts = 0;
  bool converged = false;
  double final_grad_norm = 0.0;
};

struct SolverResult {
  Eigen::VectorXd x;
  SolverTrace trace;
};

class InfeasibleStart : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Nesterov's fast gradient method with backtracking and adaptive restart.
/// Trial points outside the log domain shrink the step; the returned point
/// never has a larger objective than x_init.
SolverResult fgm_solve(const Eigen::VectorXd& x_init, const RowContext& ctx,
                       const SolverConfig& cfg);

}  // namespace mvdepth

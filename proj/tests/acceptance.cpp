// Acceptance checks: one PASS / FAIL / SKIP line per criterion.
// Exit status is non-zero when any criterion fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "mvdepth/commands.hpp"
#include "mvdepth/graph.hpp"
#include "mvdepth/kdtree.hpp"
#include "mvdepth/noise_model.hpp"
#include "mvdepth/solver.hpp"
#include "mvdepth/synthesis.hpp"
#include "mvdepth/warp.hpp"
#include "oracles.hpp"

using namespace mvdepth;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  enum Kind { pass, fail, skip } kind;
  std::string detail;
};

Outcome verdict(bool ok, const std::string& detail) { return {ok ? Outcome::pass : Outcome::fail, detail}; }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

Outcome cell_integral_identity() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  int instances = 0;
  for (int N = 1; N <= 3; ++N) {
    for (int t = 0; t < 100; ++t) {
      const double Q = 0.1 + 2.0 * u(rng);
      const Eigen::VectorXd a = oracle::random_vector(rng, N, -1.0, 1.0);
      const Eigen::VectorXd y = oracle::random_vector(rng, N, 0.0, 20.0);
      const Eigen::VectorXd x = y + oracle::random_vector(rng, N, -3.0, 3.0);
      const Eigen::VectorXd c = y - x;
      // b large enough that a^T n + b > 0 everywhere on the cell.
      const double b = a.cwiseAbs().dot(c.cwiseAbs() + Eigen::VectorXd::Constant(N, Q / 2)) + 0.1 + u(rng);
      const auto al = AffineLikelihood::from_coefficients(a, b, Q);
      const auto closed = cell_likelihood(al, y, x);
      if (!closed) return verdict(false, "closed form reported a non-positive integrand");
      worst = std::max(worst, oracle::rel_err(*closed, oracle::nested_cell_integral(a, b, c, Q)));
      ++instances;
    }
  }
  const double dt = seconds_since(t0);
  return verdict(worst <= 1e-6 && dt < 10.0,
                 fmt("%d instances, max rel err %.2e, %.2f s", instances, worst, dt));
}

Outcome affine_fidelity() {
  double worst = 0.0;
  int cells = 0;
  const PrecisionEstimate unit{Eigen::MatrixXd::Identity(1, 1), 1.0, false};
  for (double sigma2 : {50.0, 70.0, 90.0}) {
    const double sn = std::sqrt(sigma2);
    PrecisionEstimate est = unit;
    est.noise_variance = sigma2;
    for (double qf : {0.05, 0.1, 0.15, 0.2}) {
      const double Q = qf * sn;
      for (int k = -60; k <= 60; ++k) {
        const double n0 = std::sqrt(2.0) * sn * k / 60.0;
        const Eigen::VectorXd y = Eigen::VectorXd::Constant(1, n0), x = Eigen::VectorXd::Zero(1);
        const auto closed = cell_likelihood(affine_approx(y, x, est, Q), y, x);
        const double exact = oracle::integrate(
            [&](double n) { return std::exp(-n * n / sigma2); }, n0 - Q / 2, n0 + Q / 2);
        if (!closed) return verdict(false, fmt("no closed form at n0=%.3f", n0));
        worst = std::max(worst, oracle::rel_err(*closed, exact));
        ++cells;
      }
    }
  }
  return verdict(worst <= 0.02, fmt("%d cells, |n0| <= sqrt(2) sigma_n, max rel err %.2e", cells, worst));
}

// A realistic row context: warp linearization, band Laplacians, estimated precisions.
struct RowProblem {
  RowContext ctx;
  Eigen::VectorXd x0;
};

RowProblem row_problem(std::mt19937_64& rng, int n, LikelihoodAnchor anchor) {
  const CameraRig rig{200.0, 3.5, (n - 1) / 2.0, 0.0, n, 1};
  const double sigma2 = 50.0;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double phase = 6.28 * u(rng);
  Eigen::VectorXd clean(n);
  for (int j = 0; j < n; ++j) clean[j] = 150.0 + 0.2 * j + 6.0 * std::sin(0.1 * j + phase);
  std::normal_distribution<double> g(0.0, std::sqrt(sigma2));
  Eigen::VectorXd yl = clean, yr = clean;
  for (int j = 0; j < n; ++j) {
    yl[j] += g(rng);
    yr[j] += g(rng);
  }
  std::vector<Eigen::VectorXd> residuals(40);
  for (auto& r : residuals) {
    r.resize(n);
    for (int j = 0; j < n; ++j) r[j] = g(rng);
  }
  PrecisionEstimate prec = estimate_precision(residuals, sigma2, 1.0);

  WarpConfig wc;
  wc.jacobian = WarpJacobian::normalized;
  const LinearizedWarp lin = linearize(yl, rig, wc);
  FeatureMatrix f;
  f.rows = Eigen::MatrixXd::Zero(n, kFeatureDim);
  for (int j = 0; j < n; ++j) f.rows.row(j) << 0, 0, 1, yl[j] / 60.0, 0, j / double(n);
  f.degenerate.assign(static_cast<std::size_t>(n), false);
  const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(kFeatureDim, kFeatureDim);

  RowProblem p;
  RowContext& c = p.ctx;
  c.y_l = yl;
  c.y_r = yr;
  c.H = lin.H;
  c.d = lin.d;
  c.L_l = build_laplacian(f, M, 4).L;
  c.L_r = build_laplacian(f, M, 4, lin.covered).L;
  c.lambda_l = c.lambda_r = 3e-4;
  c.anchor = anchor;
  c.precision_l = prec;
  c.precision_r = prec;
  // Expansion at a perturbed point so that the fixed likelihoods have slope.
  p.x0 = yl + oracle::random_vector(rng, n, -2.0, 2.0);
  c.like_l = affine_approx(yl, p.x0, prec, 1.0);
  c.like_r = affine_approx(yr, lin.evaluate(p.x0), prec, 1.0);
  return p;
}

Outcome derivative_checks() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(103);
  const int n = 64;
  double worst_grad = 0.0, worst_jac = 0.0;

  for (int t = 0; t < 32; ++t) {
    const RowProblem p = row_problem(rng, n, t % 2 ? LikelihoodAnchor::tracking : LikelihoodAnchor::fixed);
    // Feasible point near the expansion point.
    Eigen::VectorXd x = p.x0 + oracle::random_vector(rng, n, -0.5, 0.5);
    if (!in_domain(x, p.ctx, 1e-8)) x = p.x0;
    const Eigen::VectorXd g = gradient(x, p.ctx);
    Eigen::VectorXd fd(n);
    for (int k = 0; k < n; ++k) {
      const double h = 1e-5 * std::abs(x[k]);
      Eigen::VectorXd xp = x, xm = x;
      xp[k] += h;
      xm[k] -= h;
      fd[k] = (*objective(xp, p.ctx) - *objective(xm, p.ctx)) / (2 * h);
    }
    worst_grad = std::max(worst_grad, (g - fd).norm() / g.norm());
  }

  const CameraRig rig{200.0, 3.5, 31.5, 0.0, n, 1};
  int points = 0;
  while (points < 32) {
    const double phase = std::uniform_real_distribution<double>(0.0, 6.28)(rng);
    Eigen::VectorXd x0(n);
    for (int j = 0; j < n; ++j) x0[j] = 150.0 + 0.2 * j + 6.0 * std::sin(0.1 * j + phase);
    x0 += oracle::random_vector(rng, n, -1.0, 1.0);
    WarpConfig wc;
    wc.jacobian = points % 2 ? WarpJacobian::normalized : WarpJacobian::frozen_scale;
    const double h_rel = 1e-5;
    if (!oracle::stencil_clear(x0, rig.focal_baseline(), wc.truncation * wc.sigma_s, h_rel)) continue;
    ++points;
    const LinearizedWarp lin = linearize(x0, rig, wc);
    WarpConfig exact = wc;
    exact.normalization = Normalization::exact_row;
    auto warp = [&](const Eigen::VectorXd& x) {
      return wc.jacobian == WarpJacobian::normalized ? apply_warp(x, rig, exact)
                                                     : apply_warp(x, rig, wc, lin.row_scale);
    };
    Eigen::MatrixXd fd(n, n);
    for (int j = 0; j < n; ++j) {
      const double h = h_rel * x0[j];
      Eigen::VectorXd xp = x0, xm = x0;
      xp[j] += h;
      xm[j] -= h;
      fd.col(j) = (warp(xp) - warp(xm)) / (2 * h);
    }
    const Eigen::MatrixXd H = lin.H.toDense();
    worst_jac = std::max(worst_jac, (H - fd).norm() / H.norm());
  }
  const double dt = seconds_since(t0);
  return verdict(worst_grad <= 1e-5 && worst_jac <= 1e-5 && dt < 30.0,
                 fmt("N=64, max rel err gradient %.2e, Jacobian %.2e (32 points each), %.2f s",
                     worst_grad, worst_jac, dt));
}

Outcome fgm_checks() {
  std::mt19937_64 rng(104);
  const int n = 64;
  double worst = 0.0;
  int max_iters = 0;
  bool all_converged = true;
  for (int t = 0; t < 20; ++t) {
    RowContext c;
    c.y_l = oracle::random_vector(rng, n, 50.0, 60.0);
    c.y_r = oracle::random_vector(rng, n, 50.0, 60.0);
    c.like_l = AffineLikelihood::from_coefficients(Eigen::VectorXd::Zero(n), 1.0);
    c.like_r = AffineLikelihood::from_coefficients(Eigen::VectorXd::Zero(n), 1.0);
    c.L_l = oracle::random_spd(rng, n, 1.0).sparseView();
    c.L_r = oracle::random_spd(rng, n, 1.0).sparseView();
    c.H = (Eigen::MatrixXd::Identity(n, n) + 0.2 * oracle::random_spd(rng, n, 0.0)).sparseView();
    c.d = oracle::random_vector(rng, n, -5.0, 5.0);
    c.lambda_l = 1.0;
    c.lambda_r = 0.5;
    const Eigen::MatrixXd H = c.H.toDense();
    const Eigen::MatrixXd A = c.lambda_l * c.L_l.toDense() + c.lambda_r * H.transpose() * c.L_r.toDense() * H;
    const Eigen::VectorXd x_star = A.ldlt().solve(-c.lambda_r * H.transpose() * (c.L_r * c.d));

    SolverConfig cfg;
    cfg.max_iters = 500;
    cfg.grad_tol = 1e-8;
    const SolverResult r = fgm_solve(c.y_l, c, cfg);
    all_converged = all_converged && r.trace.converged && r.trace.final_grad_norm <= 1e-8;
    max_iters = std::max(max_iters, r.trace.iterations);
    worst = std::max(worst, (r.x - x_star).norm() / x_star.norm());
  }

  bool never_above = true;
  for (int t = 0; t < 20; ++t) {
    const RowProblem p = row_problem(rng, n, t % 2 ? LikelihoodAnchor::tracking : LikelihoodAnchor::fixed);
    const SolverResult r = fgm_solve(p.x0, p.ctx, SolverConfig{});
    never_above = never_above && *objective(r.x, p.ctx) <= *objective(p.x0, p.ctx);
  }
  return verdict(worst <= 1e-6 && all_converged && never_above,
                 fmt("20 quadratics: max rel err %.2e, max iterations %d, converged %s; "
                     "20 MAP rows never above start: %s",
                     worst, max_iters, all_converged ? "yes" : "no", never_above ? "yes" : "no"));
}

Outcome metric_learning_checks() {
  std::mt19937_64 rng(105);
  std::normal_distribution<double> g(0.0, 0.5);
  auto training_set = [&](int rows, int n, int dim, int informative) {
    std::vector<TrainingRow> set;
    for (int r = 0; r < rows; ++r) {
      Eigen::MatrixXd f(n, dim);
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < dim; ++k) f(i, k) = g(rng);
      Eigen::VectorXd x = 3.0 * f.col(informative) + 0.2 * oracle::random_vector(rng, n, -1.0, 1.0);
      set.push_back({x, f});
    }
    return set;
  };

  double min_eig = std::numeric_limits<double>::infinity(), worst_trace = 0.0;
  bool descent = true;
  for (int s = 0; s < 50; ++s) {
    const auto rows = training_set(3, 32, kFeatureDim, s % kFeatureDim);
    const MetricLearningResult res = learn_metric(rows, MetricMatrix::identity());
    const Eigen::MatrixXd& M = res.metric.matrix();
    min_eig = std::min(min_eig, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(M).eigenvalues().minCoeff());
    worst_trace = std::max(worst_trace, std::abs(M.trace() - kFeatureDim));
    descent = descent && glr_objective(rows, M, 4) <=
                             glr_objective(rows, Eigen::MatrixXd::Identity(kFeatureDim, kFeatureDim), 4);
  }

  // 2-feature toy: which feature gets the larger weight, learned vs grid search.
  bool ordering = true;
  for (int informative : {0, 1}) {
    const auto rows = training_set(2, 40, 2, informative);
    const Eigen::MatrixXd learned = learn_metric(rows, MetricMatrix::identity(2), {4, 500, 1e-12}).metric.matrix();
    double best = std::numeric_limits<double>::infinity();
    Eigen::Matrix2d best_M;
    for (double p = 0.0; p <= 2.0 + 1e-12; p += 0.05)
      for (double q = -1.0; q <= 1.0 + 1e-12; q += 0.05) {
        Eigen::Matrix2d M;
        M << p, q, q, 2.0 - p;
        if (Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(M).eigenvalues().minCoeff() < MetricMatrix::eigen_floor())
          continue;
        const double J = glr_objective(rows, M, 4);
        if (J < best) {
          best = J;
          best_M = M;
        }
      }
    ordering = ordering && ((learned(0, 0) > learned(1, 1)) == (best_M(0, 0) > best_M(1, 1))) &&
               ((best_M(0, 0) > best_M(1, 1)) == (informative == 0));
  }
  const bool ok = min_eig >= MetricMatrix::eigen_floor() && worst_trace <= 1e-9 && descent && ordering;
  return verdict(ok, fmt("50 sets: min eigenvalue %.2e, max |trace-6| %.1e, GLR descent %s; toy ordering %s",
                         min_eig, worst_trace, descent ? "yes" : "no", ordering ? "matches" : "differs"));
}

fs::path desk_config() { return fs::path(MVDEPTH_SOURCE_DIR) / "configs" / "desk.json"; }

Outcome desk_enhancement(const fs::path& out) {
  const auto t0 = std::chrono::steady_clock::now();
  CommandOptions opts;
  opts.config_path = desk_config();
  opts.out_dir = out;
  const json m = run_pipeline(opts);
  const double dt = seconds_since(t0);
  const double rc = m.at("c2c_enhanced").get<double>() / m.at("c2c_noisy").get<double>();
  const double rp = m.at("c2p_enhanced").get<double>() / m.at("c2p_noisy").get<double>();
  return verdict(rc <= 0.8 && rp <= 0.8 && dt < 300.0,
                 fmt("C2C noisy %.4f enhanced %.4f (x%.3f), C2P noisy %.4f enhanced %.4f (x%.3f), %.1f s",
                     m.at("c2c_noisy").get<double>(), m.at("c2c_enhanced").get<double>(), rc,
                     m.at("c2p_noisy").get<double>(), m.at("c2p_enhanced").get<double>(), rp, dt));
}

Outcome oracle_equivalence() {
  std::mt19937_64 rng(107);
  int mismatches = 0;
  for (int t = 0; t < 20; ++t) {
    PointCloud ref, test;
    std::uniform_int_distribution<int> lattice(0, 9);
    for (int i = 0; i < 500; ++i) {
      ref.points.push_back(oracle::random_vector(rng, 3, 0.0, 10.0));
      // Half the pairs sit on a lattice, which forces distance ties.
      if (t % 2)
        test.points.push_back(Eigen::Vector3d(lattice(rng), lattice(rng), lattice(rng)));
      else
        test.points.push_back(oracle::random_vector(rng, 3, 0.0, 10.0));
    }
    if (t % 2) std::sort(test.points.begin(), test.points.end(), [](const auto& a, const auto& b) {
        return std::tie(a.x(), a.y(), a.z()) < std::tie(b.x(), b.y(), b.z());
      });
    for (int i = 0; i < 500; ++i) test.normals.push_back(oracle::random_vector(rng, 3, -1.0, 1.0).normalized());
    const MetricsReport a = evaluate_clouds(ref, test), b = evaluate_clouds_brute_force(ref, test);
    mismatches += !(a.c2c == b.c2c && a.c2p == b.c2p && c2c(ref, test) == b.c2c && c2p(ref, test) == b.c2p);
  }
  return verdict(mismatches == 0, fmt("20 pairs x 500 points, %d mismatches", mismatches));
}

Outcome reproducibility(const fs::path& first, const fs::path& second) {
  CommandOptions opts;
  opts.config_path = desk_config();
  opts.out_dir = second;
  run_pipeline(opts);
  int differing = 0, compared = 0;
  for (const char* f : {files::left_gt, files::right_gt, files::left_noisy, files::right_noisy,
                        files::left_enhanced, files::right_enhanced, files::metrics_json,
                        files::metrics_csv, files::enhance_report, files::enhance_rows}) {
    ++compared;
    const std::string a = oracle::slurp(first / f), b = oracle::slurp(second / f);
    differing += a.empty() || a != b;
  }
  return verdict(differing == 0, fmt("%d files compared, %d differ", compared, differing));
}

Outcome teddy_direction() {
  const char* env = std::getenv("MVDEPTH_TEDDY_DIR");
  if (!env) return {Outcome::skip, "MVDEPTH_TEDDY_DIR not set; Middlebury crops unavailable"};
  const fs::path dir = env;
  for (const char* f : {"left_gt.pgm", "right_gt.pgm", "config.json"})
    if (!fs::exists(dir / f)) return {Outcome::skip, std::string("missing ") + f + " in MVDEPTH_TEDDY_DIR"};
  json cfg = json::parse(oracle::slurp(dir / "config.json"));
  cfg["inputs"] = {{"left", (dir / "left_gt.pgm").string()}, {"right", (dir / "right_gt.pgm").string()}};
  const RunConfig parsed = parse_run_config(cfg);
  if (parsed.rig.width < 100 || parsed.rig.height < 100)
    return {Outcome::skip, "crops smaller than 100x100"};
  const fs::path out = oracle::temp_dir("acceptance_teddy");
  std::ofstream(out / "config.json") << cfg.dump(2);
  std::ostringstream detail;
  bool ok = true;
  for (double s2 : {50.0, 70.0, 90.0}) {
    CommandOptions opts;
    opts.config_path = out / "config.json";
    opts.overrides.noise_variance = s2;
    opts.out_dir = out / fmt("sigma_%g", s2);
    const json m = run_pipeline(opts);
    const double noisy = m.at("c2c_noisy").get<double>(), enh = m.at("c2c_enhanced").get<double>();
    ok = ok && enh < noisy;
    detail << fmt("s2=%g C2C %.4f -> %.4f; ", s2, noisy, enh);
  }
  return verdict(ok, detail.str());
}

}  // namespace

int main() {
  const fs::path desk_a = oracle::temp_dir("acceptance_desk_a");
  const fs::path desk_b = oracle::temp_dir("acceptance_desk_b");
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"cell integral identity", cell_integral_identity},
      {"affine approximation fidelity", affine_fidelity},
      {"gradient and Jacobian", derivative_checks},
      {"FGM correctness", fgm_checks},
      {"metric learning feasibility and descent", metric_learning_checks},
      {"desk-scale enhancement", [&] { return desk_enhancement(desk_a); }},
      {"metric oracle equivalence", oracle_equivalence},
      {"reproducibility", [&] { return reproducibility(desk_a, desk_b); }},
      {"real-data directional check", teddy_direction},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {Outcome::fail, std::string("exception: ") + e.what()};
    }
    const char* tag = o.kind == Outcome::pass ? "PASS" : o.kind == Outcome::fail ? "FAIL" : "SKIP";
    std::printf("criterion %zu %s: %s -- %s\n", i + 1, tag, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
    failures += o.kind == Outcome::fail;
  }
  return failures == 0 ? 0 : 1;
}

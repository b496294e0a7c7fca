#include "mvdepth/graph.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace mvdepth {

namespace {

// Projection target sits a hair above the floor so that rebuilding the
// matrix from its eigenpairs cannot dip below it through rounding.
constexpr double kFloorMargin = 1.0 + 1e-6;

// Solves sum_i max(v_i - tau, floor) = target for tau by bisection.
Eigen::VectorXd project_capped_sum(const Eigen::VectorXd& v, double target, double floor) {
  auto total = [&](double tau) { return (v.array() - tau).max(floor).sum(); };
  double lo = v.minCoeff() - target - 1.0;
  double hi = v.maxCoeff() + 1.0;
  while (total(lo) < target) lo -= (hi - lo);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (total(mid) > target ? lo : hi) = mid;
    if (hi - lo <= 1e-15 * std::max(1.0, std::abs(mid))) break;
  }
  Eigen::VectorXd out = (v.array() - 0.5 * (lo + hi)).max(floor);
  // Absorb the residual bisection error in the largest entries.
  Eigen::Index top;
  out.maxCoeff(&top);
  out[top] += target - out.sum();
  return out;
}

double min_eigenvalue(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

struct Pair {
  Eigen::VectorXd df;
  double dx2;
};

std::vector<Pair> training_pairs(std::span<const TrainingRow> rows, int T) {
  std::vector<Pair> pairs;
  for (const auto& row : rows) {
    const Eigen::Index n = row.signal.size();
    if (row.features.rows() != n)
      throw std::invalid_argument("learn_metric: feature rows do not match the signal length");
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j <= std::min(n - 1, i + T); ++j) {
        const double dx = row.signal[i] - row.signal[j];
        if (dx == 0.0) continue;
        pairs.push_back({(row.features.row(i) - row.features.row(j)).transpose(), dx * dx});
      }
    }
  }
  return pairs;
}

double objective(const std::vector<Pair>& pairs, const Eigen::MatrixXd& M) {
  double sum = 0.0;
  for (const auto& p : pairs) sum += std::exp(-p.df.dot(M * p.df)) * p.dx2;
  return sum;
}

Eigen::MatrixXd gradient(const std::vector<Pair>& pairs, const Eigen::MatrixXd& M) {
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(M.rows(), M.cols());
  for (const auto& p : pairs) {
    const double w = std::exp(-p.df.dot(M * p.df)) * p.dx2;
    g.selfadjointView<Eigen::Lower>().rankUpdate(p.df, -w);
  }
  return g.selfadjointView<Eigen::Lower>();
}

}  // namespace

FeatureMatrix compute_features(std::span<const Eigen::VectorXd> window, int row_index,
                               const CameraRig& rig, const FeatureScaling& scaling) {
  if (window.empty()) throw std::invalid_argument("compute_features: empty window");
  const Eigen::VectorXd& current = window.back();
  const Eigen::Index n = current.size();
  const std::size_t rows_used = std::min<std::size_t>(3, window.size());

  FeatureMatrix out;
  out.rows.resize(n, kFeatureDim);
  out.degenerate.assign(static_cast<std::size_t>(n), false);

  std::vector<Eigen::Vector3d> pts;
  for (Eigen::Index j = 0; j < n; ++j) {
    pts.clear();
    for (std::size_t k = 0; k < rows_used; ++k) {
      const Eigen::VectorXd& row = window[window.size() - 1 - k];
      const double v = row_index - static_cast<double>(k);
      for (Eigen::Index c = std::max<Eigen::Index>(0, j - 1);
           c <= std::min<Eigen::Index>(n - 1, j + 1); ++c) {
        const double z = row[c];
        if (!(z > 0.0)) continue;
        pts.emplace_back((c - rig.cx) * z / rig.focal, (v - rig.cy) * z / rig.focal, z);
      }
    }

    Eigen::Vector3d normal(0.0, 0.0, 1.0);
    bool degenerate = true;
    if (pts.size() >= 3) {
      Eigen::Vector3d mean = Eigen::Vector3d::Zero();
      for (const auto& p : pts) mean += p;
      mean /= static_cast<double>(pts.size());
      Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
      for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
      const auto& ev = es.eigenvalues();
      if (ev[1] > 1e-12 * std::max(ev[2], 1e-300)) {
        normal = es.eigenvectors().col(0).normalized();
        if (normal.z() < 0.0) normal = -normal;
        degenerate = false;
      }
    }
    out.degenerate[static_cast<std::size_t>(j)] = degenerate;
    out.rows.row(j) << normal.x(), normal.y(), normal.z(), current[j] / scaling.depth_range,
        static_cast<double>(row_index) / scaling.height,
        static_cast<double>(j) / scaling.width;
  }
  return out;
}

MetricMatrix::MetricMatrix(Eigen::MatrixXd m) : m_(std::move(m)) {
  if (m_.rows() != m_.cols() || m_.rows() == 0)
    throw std::invalid_argument("metric: matrix must be square and non-empty");
  const double scale = std::max(1.0, m_.cwiseAbs().maxCoeff());
  if ((m_ - m_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw std::invalid_argument("metric: matrix must be symmetric");
  if (std::abs(m_.trace() - static_cast<double>(m_.rows())) > 1e-9)
    throw std::invalid_argument("metric: trace must equal the feature dimension");
  if (min_eigenvalue(m_) < eigen_floor())
    throw std::invalid_argument("metric: minimum eigenvalue below the PD floor");
}

MetricMatrix MetricMatrix::identity(int dim) {
  return MetricMatrix(Eigen::MatrixXd::Identity(dim, dim));
}

double feature_distance(const Eigen::VectorXd& fi, const Eigen::VectorXd& fj,
                        const Eigen::MatrixXd& M) {
  const Eigen::VectorXd diff = fi - fj;
  return std::max(0.0, diff.dot(M * diff));
}

double edge_weight(double distance) { return std::exp(-distance); }

GraphLaplacian build_laplacian(const FeatureMatrix& features, const Eigen::MatrixXd& M, int T,
                               const std::vector<bool>& active) {
  if (T < 1) throw std::invalid_argument("build_laplacian: bandwidth must be >= 1");
  const Eigen::Index n = features.size();
  if (!active.empty() && static_cast<Eigen::Index>(active.size()) != n)
    throw std::invalid_argument("build_laplacian: activity mask length mismatch");
  auto on = [&](Eigen::Index i) { return active.empty() || active[static_cast<std::size_t>(i)]; };

  std::vector<Eigen::Triplet<double>> triplets;
  Eigen::VectorXd degree = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!on(i)) continue;
    for (Eigen::Index j = i + 1; j <= std::min(n - 1, i + T); ++j) {
      if (!on(j)) continue;
      const double w = edge_weight(feature_distance(features.rows.row(i).transpose(),
                                                    features.rows.row(j).transpose(), M));
      triplets.emplace_back(i, j, -w);
      triplets.emplace_back(j, i, -w);
      degree[i] += w;
      degree[j] += w;
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) triplets.emplace_back(i, i, degree[i]);

  GraphLaplacian g;
  g.bandwidth = T;
  g.L.resize(n, n);
  g.L.setFromTriplets(triplets.begin(), triplets.end());
  return g;
}

Eigen::MatrixXd project_spectrum(const Eigen::MatrixXd& m, double target_trace, double floor) {
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  const Eigen::VectorXd mu =
      project_capped_sum(es.eigenvalues(), target_trace, floor * kFloorMargin);
  Eigen::MatrixXd out = es.eigenvectors() * mu.asDiagonal() * es.eigenvectors().transpose();
  out = 0.5 * (out + out.transpose()).eval();
  out *= target_trace / out.trace();
  return out;
}

double glr_objective(std::span<const TrainingRow> rows, const Eigen::MatrixXd& M, int T) {
  return objective(training_pairs(rows, T), M);
}

MetricLearningResult learn_metric(std::span<const TrainingRow> rows, const MetricMatrix& init,
                                  const MetricLearningOptions& opts) {
  if (rows.empty()) throw std::invalid_argument("learn_metric: no training rows");
  const int dim = init.dim();
  for (const auto& r : rows)
    if (r.features.cols() != dim)
      throw std::invalid_argument("learn_metric: feature width differs from the metric");

  const auto pairs = training_pairs(rows, opts.bandwidth);
  const double floor = MetricMatrix::eigen_floor();
  const double target = static_cast<double>(dim);

  MetricLearningResult result{init, false, 0, {}};
  Eigen::MatrixXd M = init.matrix();
  double J = objective(pairs, M);
  result.objective_trace.push_back(J);
  if (!(J > 0.0)) {
    result.no_information = true;
    return result;
  }

  double eta_diag = 1.0 / std::max(gradient(pairs, M).cwiseAbs().maxCoeff(), 1e-300);
  double eta_off = eta_diag;

  for (int outer = 0; outer < opts.max_outer; ++outer) {
    const double J_start = J;

    // Diagonal block: projected gradient on {sum = dim, entries >= floor}.
    {
      const Eigen::VectorXd g = gradient(pairs, M).diagonal();
      for (int attempt = 0; attempt < 50; ++attempt) {
        Eigen::MatrixXd trial = M;
        trial.diagonal() =
            project_capped_sum(M.diagonal() - eta_diag * g, target, floor * kFloorMargin);
        const double Jt = objective(pairs, trial);
        if (Jt < J && min_eigenvalue(trial) >= floor) {
          M = trial;
          J = Jt;
          if (attempt == 0) eta_diag *= 2.0;
          break;
        }
        eta_diag *= 0.5;
      }
    }

    // Off-diagonal block: gradient step, then eigenvalue floor projection.
    {
      Eigen::MatrixXd g = gradient(pairs, M);
      g.diagonal().setZero();
      if (g.cwiseAbs().maxCoeff() > 0.0) {
        for (int attempt = 0; attempt < 50; ++attempt) {
          const Eigen::MatrixXd trial = project_spectrum(M - eta_off * g, target, floor);
          const double Jt = objective(pairs, trial);
          if (Jt < J) {
            M = trial;
            J = Jt;
            if (attempt == 0) eta_off *= 2.0;
            break;
          }
          eta_off *= 0.5;
        }
      }
    }

    result.objective_trace.push_back(J);
    result.outer_iterations = outer + 1;
    if ((J_start - J) < opts.rel_tol * J_start) break;
  }

  result.metric = MetricMatrix(M);
  return result;
}

}  // namespace mvdepth

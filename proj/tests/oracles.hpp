// Independent reference computations shared by the unit and acceptance tests.
// Nothing here calls into the library's numerical kernels.
#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <functional>
#include <random>
#include <string>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "mvdepth/scene_io.hpp"

namespace oracle {

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

// Adaptive 1-D integral; 61-point Gauss-Kronrod with up to 15 bisections.
inline double integrate(const std::function<double(double)>& f, double lo, double hi) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, lo, hi, 15, 1e-13);
}

// Nested adaptive quadrature of an affine integrand a^T n + b over the cell
// prod_k [c_k - Q/2, c_k + Q/2], one dimension at a time.
inline double nested_cell_integral(const Eigen::VectorXd& a, double b, const Eigen::VectorXd& c,
                                   double Q) {
  const int N = static_cast<int>(a.size());
  std::function<double(int, double)> level = [&](int k, double partial) -> double {
    if (k == N) return partial + b;
    return integrate([&](double t) { return level(k + 1, partial + a[k] * t); }, c[k] - 0.5 * Q,
                     c[k] + 0.5 * Q);
  };
  return level(0, 0.0);
}

// omega_ij written out directly from the kernel formula, dense O(N^2).
inline Eigen::MatrixXd dense_weights(const Eigen::VectorXd& x, double fD, double sigma_s,
                                     double truncation, bool normalize) {
  const int n = static_cast<int>(x.size());
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double off = j - fD / x[j] - i;
      if (std::abs(off) <= truncation * sigma_s)
        W(i, j) = std::exp(-off * off / (sigma_s * sigma_s));
    }
    const double s = W.row(i).sum();
    if (normalize && s > 0.0) W.row(i) /= s;
  }
  return W;
}

// Depth seen by right pixel u_r on the surface z = c + s (u - cx), where u is
// the left-image column: solves z^2 - (c + s (u_r - cx)) z - s f D = 0.
inline double slanted_right_depth(double c, double s, double u_r, double cx, double f, double D) {
  const double B = c + s * (u_r - cx);
  return 0.5 * (B + std::sqrt(B * B + 4.0 * s * f * D));
}

// True when a central-difference stencil of half-width h_rel * x_j around
// every x_j keeps all band offsets clear of the truncation edge, where the
// truncated warp jumps.
inline bool stencil_clear(const Eigen::VectorXd& x, double fD, double radius, double h_rel) {
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = h_rel * x[j];
    const double s1 = j - fD / (x[j] - h), s2 = j - fD / (x[j] + h);
    for (double i = std::floor(s1 - radius) - 2; i <= std::ceil(s2 + radius) + 2; ++i) {
      if ((std::abs(s1 - i) - radius) * (std::abs(s2 - i) - radius) <= 0.0) return false;
    }
  }
  return true;
}

inline Eigen::VectorXd random_vector(std::mt19937_64& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

inline Eigen::MatrixXd random_spd(std::mt19937_64& rng, int n, double min_eig) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = g(rng);
  Eigen::MatrixXd S = A * A.transpose() / n;
  S.diagonal().array() += min_eig;
  return S;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("mvdepth_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace oracle

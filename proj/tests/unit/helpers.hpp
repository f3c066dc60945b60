#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>
#include <vector>

#include "cpmmd/features.hpp"
#include "cpmmd/types.hpp"

namespace testing {

using cpmmd::Matrix;
using cpmmd::Vector;

inline Matrix random_matrix(int rows, int cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix A(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) A(i, j) = g(rng);
  return A;
}

inline int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

/// Random MLP with Gaussian weights and biases (biases nonzero so their
/// gradients are exercised).
inline cpmmd::MlpMap random_mlp(const std::vector<int>& widths, std::mt19937_64& rng, double scale = 0.7) {
  cpmmd::MlpMap map;
  for (std::size_t j = 0; j + 1 < widths.size(); ++j) {
    cpmmd::MlpLayer layer;
    layer.weight = random_matrix(widths[j + 1], widths[j], rng, scale / std::sqrt(widths[j]));
    layer.bias = random_matrix(widths[j + 1], 1, rng, 0.1).col(0);
    map.layers.push_back(layer);
  }
  return map;
}

/// Symmetric eigenvalues by cyclic Jacobi rotations.
inline std::vector<double> jacobi_eigenvalues(Matrix A, int sweeps = 100) {
  const int n = static_cast<int>(A.rows());
  for (int s = 0; s < sweeps; ++s) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += A(p, q) * A(p, q);
    if (off < 1e-30) break;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) {
        if (std::abs(A(p, q)) < 1e-300) continue;
        const double theta = (A(q, q) - A(p, p)) / (2.0 * A(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = A(k, p), akq = A(k, q);
          A(k, p) = c * akp - sn * akq;
          A(k, q) = sn * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = A(p, k), aqk = A(q, k);
          A(p, k) = c * apk - sn * aqk;
          A(q, k) = sn * apk + c * aqk;
        }
      }
  }
  std::vector<double> ev(n);
  for (int i = 0; i < n; ++i) ev[i] = A(i, i);
  return ev;
}

/// Relative error with a denominator floor.
inline double rel_error(double analytic, double fd, double floor = 1e-6) {
  return std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), floor});
}

/// Largest relative error between an analytic gradient and central finite
/// differences of f over every MLP parameter. Each parameter is judged at the
/// best step of a ladder: roundoff dominates small steps (the ratio criterion
/// cancels large sums) and LeakyReLU kinks spoil large ones, while a wrong
/// gradient disagrees at every step. Parameters with an exactly zero gradient,
/// such as output biases under a translation-invariant kernel, are judged
/// against the floor 1e-5 max(1, |f|).
template <class F>
double max_fd_error(const cpmmd::MlpMap& map, const cpmmd::MlpGradient& grad, F f,
                    std::initializer_list<double> steps = {1e-4, 1e-5, 1e-6}) {
  double worst = 0.0;
  cpmmd::MlpMap probe = map;
  const double floor = 1e-5 * std::max(1.0, std::abs(f(map)));
  auto check = [&](double& param, double analytic) {
    const double keep = param;
    double best = std::numeric_limits<double>::infinity();
    for (double h : steps) {
      param = keep + h;
      const double up = f(probe);
      param = keep - h;
      const double dn = f(probe);
      param = keep;
      best = std::min(best, rel_error(analytic, (up - dn) / (2 * h), floor));
    }
    worst = std::max(worst, best);
  };
  for (std::size_t l = 0; l < map.layers.size(); ++l) {
    auto& W = probe.layers[l].weight;
    for (cpmmd::Index i = 0; i < W.rows(); ++i)
      for (cpmmd::Index j = 0; j < W.cols(); ++j) check(W(i, j), grad.layers[l].weight(i, j));
    auto& b = probe.layers[l].bias;
    for (cpmmd::Index i = 0; i < b.size(); ++i) check(b(i), grad.layers[l].bias(i));
  }
  return worst;
}

}  // namespace testing

#pragma once

#include <string>

#include "cpmmd/features.hpp"
#include "cpmmd/types.hpp"

namespace cpmmd {

enum class KernelFamily { GaussianUnit, LaplacianUnit, Constant };

/// A bounded, Lipschitz base kernel: 0 <= k <= nu and
/// |k(u, w) - k(u', w)| <= lipschitz * ||u - u'||.
struct KernelSpec {
  KernelFamily family = KernelFamily::GaussianUnit;
  double nu = 1.0;
  double lipschitz = 1.0;
  double constant = 0.0;  // value of the Constant family

  /// exp(-||u - v||^2 / 2). Recorded lipschitz = 1 (tight value is exp(-1/2)).
  static KernelSpec gaussian();
  /// exp(-||u - v||)
  static KernelSpec laplacian();
  /// k = c with c in [0, nu]. Test-only family.
  static KernelSpec constant_kernel(double c, double nu = 1.0);

  /// Kernel value as a function of the squared feature distance.
  double from_sq_dist(double sq_dist) const;

  std::string name() const;
};

double eval_base(const KernelSpec& spec, const Vector& u, const Vector& v);

/// k_h(x, x') = base(h(x), h(x')).
struct CompositeKernel {
  KernelSpec base;
  FeatureMap feature;

  double operator()(const Vector& x, const Vector& xp) const;
  std::string describe() const;
};

struct GramBlocks {
  Matrix xx;  // m x m
  Matrix yy;  // n x n
  Matrix xy;  // m x n
};

/// Squared Euclidean distances between the rows of A and B via the norm
/// expansion, clamped at zero. Rows are computed in parallel.
Matrix pairwise_sq_dists(const Matrix& A, const Matrix& B);
/// Symmetric variant with an exactly zero diagonal.
Matrix pairwise_sq_dists(const Matrix& A);

/// Entrywise base.from_sq_dist(sq_dists(i, j) * inv_scale_sq).
Matrix gram_from_sq_dists(const KernelSpec& base, const Matrix& sq_dists, double inv_scale_sq = 1.0);

GramBlocks gram_blocks(const CompositeKernel& kernel, const Matrix& X, const Matrix& Y);

/// Gram matrix of the pooled sample [X; Y], N x N with X occupying the
/// first m rows.
Matrix pooled_gram(const CompositeKernel& kernel, const Matrix& X, const Matrix& Y);
/// Gram matrix of precomputed features.
Matrix gram_of_features(const KernelSpec& base, const Matrix& features);

/// Splits an N x N pooled Gram matrix at m.
GramBlocks split_pooled(const Matrix& K, Index m);

/// Single-threaded reference implementations, kept to check the parallel
/// kernels bit-for-bit.
namespace serial {
Matrix pairwise_sq_dists(const Matrix& A, const Matrix& B);
Matrix pairwise_sq_dists(const Matrix& A);
Matrix gram_from_sq_dists(const KernelSpec& base, const Matrix& sq_dists, double inv_scale_sq = 1.0);
GramBlocks gram_blocks(const CompositeKernel& kernel, const Matrix& X, const Matrix& Y);
}  // namespace serial

}  // namespace cpmmd

#include "cpmmd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cpmmd/errors.hpp"

namespace cpmmd {

KernelSpec KernelSpec::gaussian() { return {KernelFamily::GaussianUnit, 1.0, 1.0, 0.0}; }

KernelSpec KernelSpec::laplacian() { return {KernelFamily::LaplacianUnit, 1.0, 1.0, 0.0}; }

KernelSpec KernelSpec::constant_kernel(double c, double nu) {
  if (!(nu > 0) || c < 0 || c > nu) throw ContractViolation("constant kernel needs 0 <= c <= nu, nu > 0");
  return {KernelFamily::Constant, nu, 0.0, c};
}

double KernelSpec::from_sq_dist(double sq_dist) const {
  switch (family) {
    case KernelFamily::GaussianUnit:
      return std::exp(-0.5 * sq_dist);
    case KernelFamily::LaplacianUnit:
      return std::exp(-std::sqrt(sq_dist));
    case KernelFamily::Constant:
      return constant;
  }
  return 0.0;
}

std::string KernelSpec::name() const {
  switch (family) {
    case KernelFamily::GaussianUnit:
      return "gaussian";
    case KernelFamily::LaplacianUnit:
      return "laplacian";
    case KernelFamily::Constant:
      return "constant";
  }
  return "unknown";
}

double eval_base(const KernelSpec& spec, const Vector& u, const Vector& v) {
  if (u.size() != v.size()) throw ContractViolation("kernel arguments differ in dimension");
  return spec.from_sq_dist((u - v).squaredNorm());
}

double CompositeKernel::operator()(const Vector& x, const Vector& xp) const {
  return eval_base(base, apply_feature_map(feature, x), apply_feature_map(feature, xp));
}

std::string CompositeKernel::describe() const {
  std::ostringstream os;
  os.precision(17);
  os << base.name() << "(";
  std::visit(
      [&os](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LinearMap>) {
          os << "linear sigma=" << m.sigma;
        } else if constexpr (std::is_same_v<T, PolynomialMap>) {
          os << "poly p=" << m.degree << " sigma=" << m.sigma;
        } else {
          os << "mlp";
          for (int w : m.widths()) os << ' ' << w;
          os << " pi=" << spectral_product(m);
        }
      },
      feature);
  os << ")";
  return os.str();
}

namespace {

Matrix sq_dists_impl(const Matrix& A, const Matrix& B, bool parallel) {
  if (A.cols() != B.cols()) throw ContractViolation("distance arguments differ in dimension");
  const Vector a2 = A.rowwise().squaredNorm();
  const Vector b2 = B.rowwise().squaredNorm();
  const Matrix cross = A * B.transpose();
  Matrix D(A.rows(), B.rows());
  const Index rows = A.rows();
#pragma omp parallel for schedule(static) if (parallel && rows > 32)
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < B.rows(); ++j) D(i, j) = std::max(0.0, a2(i) + b2(j) - 2.0 * cross(i, j));
  return D;
}

Matrix sym_sq_dists_impl(const Matrix& A, bool parallel) {
  Matrix D = sq_dists_impl(A, A, parallel);
  const Index n = A.rows();
  // mirror the upper triangle so the result is exactly symmetric
  for (Index i = 0; i < n; ++i) {
    D(i, i) = 0.0;
    for (Index j = i + 1; j < n; ++j) D(j, i) = D(i, j);
  }
  return D;
}

Matrix gram_from_sq_impl(const KernelSpec& base, const Matrix& sq, double inv_scale_sq, bool parallel) {
  Matrix K(sq.rows(), sq.cols());
  const Index rows = sq.rows();
#pragma omp parallel for schedule(static) if (parallel && rows > 32)
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < sq.cols(); ++j) K(i, j) = base.from_sq_dist(sq(i, j) * inv_scale_sq);
  return K;
}

void check_sizes(const Matrix& X, const Matrix& Y) {
  if (X.rows() < 2 || Y.rows() < 2) throw InsufficientSample("each sample needs at least 2 points");
  if (X.cols() != Y.cols()) throw ContractViolation("samples differ in dimension");
}

GramBlocks gram_blocks_impl(const CompositeKernel& kernel, const Matrix& X, const Matrix& Y, bool parallel) {
  check_sizes(X, Y);
  const Matrix fx = apply_feature_map(kernel.feature, X);
  const Matrix fy = apply_feature_map(kernel.feature, Y);
  GramBlocks g;
  g.xx = gram_from_sq_impl(kernel.base, sym_sq_dists_impl(fx, parallel), 1.0, parallel);
  g.yy = gram_from_sq_impl(kernel.base, sym_sq_dists_impl(fy, parallel), 1.0, parallel);
  g.xy = gram_from_sq_impl(kernel.base, sq_dists_impl(fx, fy, parallel), 1.0, parallel);
  return g;
}

}  // namespace

Matrix pairwise_sq_dists(const Matrix& A, const Matrix& B) { return sq_dists_impl(A, B, true); }
Matrix pairwise_sq_dists(const Matrix& A) { return sym_sq_dists_impl(A, true); }

Matrix gram_from_sq_dists(const KernelSpec& base, const Matrix& sq_dists, double inv_scale_sq) {
  return gram_from_sq_impl(base, sq_dists, inv_scale_sq, true);
}

GramBlocks gram_blocks(const CompositeKernel& kernel, const Matrix& X, const Matrix& Y) {
  return gram_blocks_impl(kernel, X, Y, true);
}

Matrix gram_of_features(const KernelSpec& base, const Matrix& features) {
  return gram_from_sq_dists(base, pairwise_sq_dists(features));
}

Matrix pooled_gram(const CompositeKernel& kernel, const Matrix& X, const Matrix& Y) {
  check_sizes(X, Y);
  Matrix Z(X.rows() + Y.rows(), X.cols());
  Z << X, Y;
  return gram_of_features(kernel.base, apply_feature_map(kernel.feature, Z));
}

GramBlocks split_pooled(const Matrix& K, Index m) {
  const Index n = K.rows() - m;
  return {K.topLeftCorner(m, m), K.bottomRightCorner(n, n), K.topRightCorner(m, n)};
}

namespace serial {
Matrix pairwise_sq_dists(const Matrix& A, const Matrix& B) { return sq_dists_impl(A, B, false); }
Matrix pairwise_sq_dists(const Matrix& A) { return sym_sq_dists_impl(A, false); }
Matrix gram_from_sq_dists(const KernelSpec& base, const Matrix& sq_dists, double inv_scale_sq) {
  return gram_from_sq_impl(base, sq_dists, inv_scale_sq, false);
}
GramBlocks gram_blocks(const CompositeKernel& kernel, const Matrix& X, const Matrix& Y) {
  return gram_blocks_impl(kernel, X, Y, false);
}
}  // namespace serial

}  // namespace cpmmd

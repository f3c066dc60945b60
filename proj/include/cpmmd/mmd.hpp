#pragma once

#include <span>

#include "cpmmd/features.hpp"
#include "cpmmd/kernels.hpp"
#include "cpmmd/types.hpp"

namespace cpmmd {

/// Two-sample dataset (X ~ P^m, Y ~ Q^n) with the summary quantities the
/// concentration bounds need.
class PooledSample {
 public:
  PooledSample() = default;
  PooledSample(Matrix x, Matrix y);

  const Matrix& x() const { return x_; }
  const Matrix& y() const { return y_; }
  Index m() const { return x_.rows(); }
  Index n() const { return y_.rows(); }
  Index total() const { return x_.rows() + y_.rows(); }
  Index dim() const { return x_.cols(); }

  /// rho* = max(N/m, N/n) >= 2.
  double imbalance_ratio() const;
  /// ||D||_F of the pooled data matrix.
  double frobenius_norm() const;
  /// [X; Y], N x d.
  Matrix pooled() const;

 private:
  Matrix x_;
  Matrix y_;
};

/// Unbiased U-statistic estimate of the squared MMD. May be negative.
double mmd_unbiased(const Matrix& kxx, const Matrix& kyy, const Matrix& kxy);
double mmd_unbiased(const GramBlocks& blocks);
/// Same statistic on a pooled N x N Gram matrix whose first m rows are X.
double mmd_unbiased_pooled(const Matrix& K, Index m);
/// Statistic after relabeling: point order[i] of the pool takes position i.
double mmd_unbiased_relabeled(const Matrix& K, std::span<const int> order, Index m);

/// Population squared MMD of the sigma-bandwidth Gaussian kernel between the
/// univariate laws N(0, s_p^2) and N(0, s_q^2).
double population_mmd_gaussian_oracle(double sigma, double s_p, double s_q);

struct LiuRatio {
  double j_liu = 0.0;
  double mmd = 0.0;
  double tau = 0.0;
  double variance = 0.0;  // unclamped H1-variance estimate
};

/// sqrt(n) * mmd / tau with tau = sqrt(max(var_H1, 0) + lambda_reg), where
/// var_H1 = (4/m^3) sum_i (sum_j H_ij)^2 - (4/m^4) (sum_ij H_ij)^2 over the
/// paired kernel H_ij = k(x_i,x_j) + k(y_i,y_j) - k(x_i,y_j) - k(x_j,y_i).
/// Requires m = n.
LiuRatio liu_ratio(const GramBlocks& blocks, double lambda_reg = 1e-8);

/// d mmd / d K for a pooled Gram matrix (ordered entries; diagonal zero).
Matrix mmd_gram_gradient(Index m, Index n);
/// d var_H1 / d K for a pooled Gram matrix with m = n.
Matrix liu_variance_gram_gradient(const Matrix& K, Index m);

/// Chain rule from d L / d K (pooled, ordered entries) to d L / d features
/// for K = base(features).
Matrix gram_gradient_to_features(const KernelSpec& base, const Matrix& features, const Matrix& K, const Matrix& dK);

/// Exact gradient of mmd_unbiased(k_h) with respect to the MLP parameters.
MlpGradient mmd_gradient_wrt_features(const Matrix& X, const Matrix& Y, const CompositeKernel& kernel);

}  // namespace cpmmd

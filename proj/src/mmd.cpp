#include "cpmmd/mmd.hpp"

#include <cmath>

#include "cpmmd/errors.hpp"

namespace cpmmd {

PooledSample::PooledSample(Matrix x, Matrix y) : x_(std::move(x)), y_(std::move(y)) {
  if (x_.cols() != y_.cols()) throw ContractViolation("samples differ in dimension");
  if (x_.rows() < 1 || y_.rows() < 1) throw InsufficientSample("pooled sample needs both classes");
}

double PooledSample::imbalance_ratio() const {
  const double N = static_cast<double>(total());
  return std::max(N / static_cast<double>(m()), N / static_cast<double>(n()));
}

double PooledSample::frobenius_norm() const { return std::sqrt(x_.squaredNorm() + y_.squaredNorm()); }

Matrix PooledSample::pooled() const {
  Matrix Z(total(), dim());
  Z << x_, y_;
  return Z;
}

namespace {

double off_diagonal_sum(const Matrix& K) { return K.sum() - K.diagonal().sum(); }

}  // namespace

double mmd_unbiased(const Matrix& kxx, const Matrix& kyy, const Matrix& kxy) {
  const double m = static_cast<double>(kxx.rows());
  const double n = static_cast<double>(kyy.rows());
  if (m < 2 || n < 2) throw InsufficientSample("unbiased MMD needs m >= 2 and n >= 2");
  if (kxy.rows() != kxx.rows() || kxy.cols() != kyy.rows()) throw ContractViolation("Gram block shapes disagree");
  return off_diagonal_sum(kxx) / (m * (m - 1)) + off_diagonal_sum(kyy) / (n * (n - 1)) - 2.0 * kxy.sum() / (m * n);
}

double mmd_unbiased(const GramBlocks& blocks) { return mmd_unbiased(blocks.xx, blocks.yy, blocks.xy); }

double mmd_unbiased_pooled(const Matrix& K, Index m) {
  const Index n = K.rows() - m;
  if (m < 2 || n < 2) throw InsufficientSample("unbiased MMD needs m >= 2 and n >= 2");
  return mmd_unbiased(K.topLeftCorner(m, m), K.bottomRightCorner(n, n), K.topRightCorner(m, n));
}

double mmd_unbiased_relabeled(const Matrix& K, std::span<const int> order, Index m) {
  const Index N = K.rows();
  const Index n = N - m;
  if (m < 2 || n < 2) throw InsufficientSample("unbiased MMD needs m >= 2 and n >= 2");
  if (static_cast<Index>(order.size()) != N) throw ContractViolation("relabeling has wrong length");
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (Index a = 0; a < N; ++a) {
    const Index i = order[static_cast<std::size_t>(a)];
    const bool a_is_x = a < m;
    for (Index b = a + 1; b < N; ++b) {
      const double v = K(i, order[static_cast<std::size_t>(b)]);
      const bool b_is_x = b < m;
      if (a_is_x && b_is_x) {
        sxx += v;
      } else if (!a_is_x && !b_is_x) {
        syy += v;
      } else {
        sxy += v;
      }
    }
  }
  const double md = static_cast<double>(m), nd = static_cast<double>(n);
  return 2.0 * sxx / (md * (md - 1)) + 2.0 * syy / (nd * (nd - 1)) - 2.0 * sxy / (md * nd);
}

double population_mmd_gaussian_oracle(double sigma, double s_p, double s_q) {
  if (!(sigma > 0 && s_p > 0 && s_q > 0)) throw ContractViolation("oracle needs positive bandwidth and scales");
  const double s2 = sigma * sigma;
  const double pp = 1.0 / std::sqrt(1.0 + 2.0 * s_p * s_p / s2);
  const double qq = 1.0 / std::sqrt(1.0 + 2.0 * s_q * s_q / s2);
  const double pq = 1.0 / std::sqrt(1.0 + (s_p * s_p + s_q * s_q) / s2);
  return pp + qq - 2.0 * pq;
}

namespace {

Matrix paired_kernel(const GramBlocks& b) { return b.xx + b.yy - b.xy - b.xy.transpose(); }

}  // namespace

LiuRatio liu_ratio(const GramBlocks& blocks, double lambda_reg) {
  const Index m = blocks.xx.rows();
  if (m != blocks.yy.rows()) throw UnsupportedConfiguration("ratio criterion requires m = n");
  if (!(lambda_reg > 0)) throw ContractViolation("lambda_reg must be positive");
  LiuRatio out;
  out.mmd = mmd_unbiased(blocks);
  const Matrix H = paired_kernel(blocks);
  const Vector row_sums = H.rowwise().sum();
  const double md = static_cast<double>(m);
  const double total = H.sum();
  out.variance = 4.0 / (md * md * md) * row_sums.squaredNorm() - 4.0 / (md * md * md * md) * total * total;
  out.tau = std::sqrt(std::max(out.variance, 0.0) + lambda_reg);
  out.j_liu = std::sqrt(md) * out.mmd / out.tau;
  return out;
}

Matrix mmd_gram_gradient(Index m, Index n) {
  const Index N = m + n;
  const double md = static_cast<double>(m), nd = static_cast<double>(n);
  Matrix W(N, N);
  W.topLeftCorner(m, m).setConstant(1.0 / (md * (md - 1)));
  W.bottomRightCorner(n, n).setConstant(1.0 / (nd * (nd - 1)));
  W.topRightCorner(m, n).setConstant(-1.0 / (md * nd));
  W.bottomLeftCorner(n, m).setConstant(-1.0 / (md * nd));
  W.diagonal().setZero();
  return W;
}

Matrix liu_variance_gram_gradient(const Matrix& K, Index m) {
  if (K.rows() != 2 * m) throw UnsupportedConfiguration("ratio criterion requires m = n");
  const GramBlocks b = split_pooled(K, m);
  const Matrix H = paired_kernel(b);
  const Vector r = H.rowwise().sum();
  const double md = static_cast<double>(m);
  const double total = H.sum();
  // dV/dH_ij = (8/m^3) r_i - (8/m^4) S
  Matrix G(m, m);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < m; ++j) G(i, j) = 8.0 / (md * md * md) * r(i) - 8.0 / (md * md * md * md) * total;
  Matrix dK = Matrix::Zero(2 * m, 2 * m);
  dK.topLeftCorner(m, m) = G;
  dK.bottomRightCorner(m, m) = G;
  // H_ij contains -k(x_i, y_j) - k(x_j, y_i); K(i, m + j) = k(x_i, y_j)
  dK.topRightCorner(m, m) = -(G + G.transpose());
  return dK;
}

Matrix gram_gradient_to_features(const KernelSpec& base, const Matrix& F, const Matrix& K, const Matrix& dK) {
  const Index N = F.rows();
  Matrix grad = Matrix::Zero(N, F.cols());
  if (base.family == KernelFamily::Constant) return grad;
  const Matrix S = dK + dK.transpose();
  // coefficient c_ij with dL/dF_i = sum_j c_ij (F_i - F_j)
  Matrix C(N, N);
  if (base.family == KernelFamily::GaussianUnit) {
    C = -(S.cwiseProduct(K));
  } else {
    const Matrix D2 = pairwise_sq_dists(F);
    for (Index i = 0; i < N; ++i)
      for (Index j = 0; j < N; ++j) {
        const double r = std::sqrt(D2(i, j));
        C(i, j) = r > 0 ? -S(i, j) * K(i, j) / r : 0.0;
      }
  }
  C.diagonal().setZero();
  // sum_j c_ij (F_i - F_j) = (rowsum c)_i F_i - (C F)_i
  grad = C.rowwise().sum().asDiagonal() * F - C * F;
  return grad;
}

MlpGradient mmd_gradient_wrt_features(const Matrix& X, const Matrix& Y, const CompositeKernel& kernel) {
  const auto* mlp = std::get_if<MlpMap>(&kernel.feature);
  if (mlp == nullptr) throw UnsupportedConfiguration("feature gradient needs a differentiable (MLP) feature map");
  if (X.rows() < 2 || Y.rows() < 2) throw InsufficientSample("unbiased MMD needs m >= 2 and n >= 2");
  Matrix Z(X.rows() + Y.rows(), X.cols());
  Z << X, Y;
  const MlpForwardCache cache = mlp_forward_cached(*mlp, Z);
  const Matrix K = gram_of_features(kernel.base, cache.output);
  const Matrix dF = gram_gradient_to_features(kernel.base, cache.output, K, mmd_gram_gradient(X.rows(), Y.rows()));
  return mlp_backward(*mlp, cache, dF);
}

}  // namespace cpmmd

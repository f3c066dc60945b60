#pragma once

#include <cstdint>
#include <limits>
#include <variant>
#include <vector>

#include "cpmmd/types.hpp"

namespace cpmmd {

/// h(x) = x / sigma. With sigma = 1 this is the identity map.
struct LinearMap {
  double sigma = 1.0;
  int input_dim = 1;

  int output_dim() const { return input_dim; }
};

using MultiIndex = std::vector<int>;

/// h(x) = Psi_p(x) / sigma, where Psi_p lists every monomial x^alpha with
/// 1 <= |alpha| <= p in graded-lexicographic order.
struct PolynomialMap {
  int degree = 1;
  double sigma = 1.0;
  int input_dim = 1;
  std::vector<MultiIndex> indices;
  /// Data-dependent Lipschitz bound of Psi_p; NaN until fitted.
  double jacobian_bound = std::numeric_limits<double>::quiet_NaN();

  static PolynomialMap make(int input_dim, int degree, double sigma = 1.0);
  int output_dim() const { return static_cast<int>(indices.size()); }
};

/// C(d + p, p) - 1.
std::int64_t polynomial_output_dim(int input_dim, int degree);

/// Graded-lexicographic multi-indices of total degree 1..degree.
std::vector<MultiIndex> graded_lex_indices(int input_dim, int degree);

Vector poly_features(const PolynomialMap& map, const Vector& x);
Matrix poly_features(const PolynomialMap& map, const Matrix& X);

/// Jacobian of Psi_p (unscaled) at x, shape output_dim x input_dim.
Matrix poly_jacobian(const PolynomialMap& map, const Vector& x);

/// max over rows of points of ||J_Psi(x)||_F. An upper bound on the operator
/// norm of the Jacobian at every supplied point.
double poly_jacobian_bound(const PolynomialMap& map, const Matrix& points);

struct MlpLayer {
  Matrix weight;  // out x in
  Vector bias;    // out
};

/// Fully connected network with LeakyReLU hidden activations and an affine
/// output layer: h(x) = W_L phi(... phi(W_1 x + b_1) ...) + b_L.
struct MlpMap {
  std::vector<MlpLayer> layers;
  double negative_slope = 0.01;

  /// Glorot-uniform weights, zero biases. widths = {d, w_1, ..., w_out}.
  static MlpMap glorot(const std::vector<int>& widths, std::uint64_t seed, double negative_slope = 0.01);

  int input_dim() const;
  int output_dim() const;
  std::vector<int> widths() const;
  std::size_t parameter_count() const;
};

/// Same shapes as the MlpMap it differentiates.
struct MlpGradient {
  std::vector<MlpLayer> layers;

  static MlpGradient zeros_like(const MlpMap& map);
  double squared_norm() const;
  double norm() const;
  void scale(double factor);
  MlpGradient& operator+=(const MlpGradient& other);
};

using FeatureMap = std::variant<LinearMap, PolynomialMap, MlpMap>;

/// Applies h row-wise.
Matrix apply_feature_map(const FeatureMap& h, const Matrix& X);
Vector apply_feature_map(const FeatureMap& h, const Vector& x);
int feature_input_dim(const FeatureMap& h);

Matrix mlp_forward(const MlpMap& map, const Matrix& X);

/// Pre-activations and activations of every layer for one batch.
struct MlpForwardCache {
  std::vector<Matrix> inputs;          // inputs[j] feeds layer j (inputs[0] = X)
  std::vector<Matrix> pre_activations;  // W_j a + b_j
  Matrix output;
};

MlpForwardCache mlp_forward_cached(const MlpMap& map, const Matrix& X);

/// Reverse-mode gradient of a scalar s with ds/d(output) = upstream.
MlpGradient mlp_backward(const MlpMap& map, const MlpForwardCache& cache, const Matrix& upstream);
MlpGradient mlp_backward(const MlpMap& map, const Matrix& X, const Matrix& upstream);

struct SpectralNormConfig {
  int max_iters = 50;
  double rel_tol = 1e-8;
};

struct SingularTriplet {
  double value = 0.0;
  Vector left;   // u, ||u|| = 1
  Vector right;  // v, ||v|| = 1, W v = value * u
};

/// Largest singular value by power iteration on W^T W from the normalized
/// all-ones vector. Returns zero for a zero matrix.
double spectral_norm(const Matrix& W, SpectralNormConfig cfg = {});
SingularTriplet top_singular_triplet(const Matrix& W, SpectralNormConfig cfg = {});

/// Top singular triplet from a full eigendecomposition of the smaller Gram
/// matrix. Power iteration stops on the value, which converges twice as fast
/// as the vectors; gradients of the spectral norm use this instead.
SingularTriplet exact_top_singular_triplet(const Matrix& W);

/// Product of layer spectral norms, the Lipschitz bound of an MlpMap.
double spectral_product(const MlpMap& map, SpectralNormConfig cfg = {});

/// L(h): 1/sigma (linear), L_Psi/sigma (polynomial, requires a fitted
/// jacobian_bound), spectral product (MLP).
double lipschitz_constant(const FeatureMap& h);

}  // namespace cpmmd

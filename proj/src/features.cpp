#include "cpmmd/features.hpp"

#include <cmath>
#include <random>

#include "cpmmd/errors.hpp"

namespace cpmmd {

std::int64_t polynomial_output_dim(int input_dim, int degree) {
  // C(d + p, p) computed incrementally; exact for the sizes used here.
  std::int64_t c = 1;
  for (int i = 1; i <= degree; ++i) c = c * (input_dim + i) / i;
  return c - 1;
}

namespace {

void fill_degree(int pos, int remaining, MultiIndex& current, std::vector<MultiIndex>& out) {
  const int d = static_cast<int>(current.size());
  if (pos == d - 1) {
    current[static_cast<std::size_t>(pos)] = remaining;
    out.push_back(current);
    return;
  }
  for (int a = remaining; a >= 0; --a) {
    current[static_cast<std::size_t>(pos)] = a;
    fill_degree(pos + 1, remaining - a, current, out);
  }
}

}  // namespace

std::vector<MultiIndex> graded_lex_indices(int input_dim, int degree) {
  if (input_dim < 1 || degree < 1) throw ContractViolation("polynomial map needs input_dim >= 1 and degree >= 1");
  std::vector<MultiIndex> out;
  MultiIndex current(static_cast<std::size_t>(input_dim), 0);
  for (int k = 1; k <= degree; ++k) fill_degree(0, k, current, out);
  return out;
}

PolynomialMap PolynomialMap::make(int input_dim, int degree, double sigma) {
  if (!(sigma > 0)) throw ContractViolation("polynomial map bandwidth must be positive");
  PolynomialMap map;
  map.degree = degree;
  map.sigma = sigma;
  map.input_dim = input_dim;
  map.indices = graded_lex_indices(input_dim, degree);
  return map;
}

namespace {

// powers(i, k) = x_i^k for k = 0..p
Matrix power_table(const Vector& x, int degree) {
  Matrix powers(x.size(), degree + 1);
  for (Index i = 0; i < x.size(); ++i) {
    powers(i, 0) = 1.0;
    for (int k = 1; k <= degree; ++k) powers(i, k) = powers(i, k - 1) * x(i);
  }
  return powers;
}

void check_poly_dim(const PolynomialMap& map, Index d) {
  if (d != map.input_dim) throw ContractViolation("polynomial map input dimension mismatch");
}

}  // namespace

Vector poly_features(const PolynomialMap& map, const Vector& x) {
  check_poly_dim(map, x.size());
  const Matrix powers = power_table(x, map.degree);
  Vector out(map.output_dim());
  for (std::size_t a = 0; a < map.indices.size(); ++a) {
    double v = 1.0;
    const auto& alpha = map.indices[a];
    for (std::size_t i = 0; i < alpha.size(); ++i)
      if (alpha[i] != 0) v *= powers(static_cast<Index>(i), alpha[i]);
    out(static_cast<Index>(a)) = v;
  }
  return out;
}

Matrix poly_features(const PolynomialMap& map, const Matrix& X) {
  check_poly_dim(map, X.cols());
  Matrix out(X.rows(), map.output_dim());
#pragma omp parallel for schedule(static) if (X.rows() > 64)
  for (Index r = 0; r < X.rows(); ++r) out.row(r) = poly_features(map, Vector(X.row(r).transpose())).transpose();
  return out;
}

Matrix poly_jacobian(const PolynomialMap& map, const Vector& x) {
  check_poly_dim(map, x.size());
  const Matrix powers = power_table(x, map.degree);
  Matrix J = Matrix::Zero(map.output_dim(), map.input_dim);
  for (std::size_t a = 0; a < map.indices.size(); ++a) {
    const auto& alpha = map.indices[a];
    for (std::size_t i = 0; i < alpha.size(); ++i) {
      if (alpha[i] == 0) continue;
      double v = alpha[i] * powers(static_cast<Index>(i), alpha[i] - 1);
      for (std::size_t k = 0; k < alpha.size(); ++k)
        if (k != i && alpha[k] != 0) v *= powers(static_cast<Index>(k), alpha[k]);
      J(static_cast<Index>(a), static_cast<Index>(i)) = v;
    }
  }
  return J;
}

double poly_jacobian_bound(const PolynomialMap& map, const Matrix& points) {
  double best = 0.0;
  for (Index r = 0; r < points.rows(); ++r)
    best = std::max(best, poly_jacobian(map, Vector(points.row(r).transpose())).norm());
  return best;
}

MlpMap MlpMap::glorot(const std::vector<int>& widths, std::uint64_t seed, double negative_slope) {
  if (widths.size() < 2) throw ContractViolation("MLP needs at least an input and an output width");
  MlpMap map;
  map.negative_slope = negative_slope;
  std::mt19937_64 rng(seed);
  for (std::size_t j = 0; j + 1 < widths.size(); ++j) {
    const int fan_in = widths[j];
    const int fan_out = widths[j + 1];
    if (fan_in < 1 || fan_out < 1) throw ContractViolation("MLP widths must be positive");
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    MlpLayer layer{Matrix(fan_out, fan_in), Vector::Zero(fan_out)};
    for (Index c = 0; c < fan_in; ++c)
      for (Index r = 0; r < fan_out; ++r) layer.weight(r, c) = dist(rng);
    map.layers.push_back(std::move(layer));
  }
  return map;
}

int MlpMap::input_dim() const { return static_cast<int>(layers.front().weight.cols()); }
int MlpMap::output_dim() const { return static_cast<int>(layers.back().weight.rows()); }

std::vector<int> MlpMap::widths() const {
  std::vector<int> w{input_dim()};
  for (const auto& l : layers) w.push_back(static_cast<int>(l.weight.rows()));
  return w;
}

std::size_t MlpMap::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

MlpGradient MlpGradient::zeros_like(const MlpMap& map) {
  MlpGradient g;
  for (const auto& l : map.layers)
    g.layers.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())});
  return g;
}

double MlpGradient::squared_norm() const {
  double s = 0.0;
  for (const auto& l : layers) s += l.weight.squaredNorm() + l.bias.squaredNorm();
  return s;
}

double MlpGradient::norm() const { return std::sqrt(squared_norm()); }

void MlpGradient::scale(double factor) {
  for (auto& l : layers) {
    l.weight *= factor;
    l.bias *= factor;
  }
}

MlpGradient& MlpGradient::operator+=(const MlpGradient& other) {
  if (other.layers.size() != layers.size()) throw ContractViolation("gradient shape mismatch");
  for (std::size_t j = 0; j < layers.size(); ++j) {
    layers[j].weight += other.layers[j].weight;
    layers[j].bias += other.layers[j].bias;
  }
  return *this;
}

namespace {

void check_mlp_input(const MlpMap& map, Index cols) {
  if (map.layers.empty()) throw ContractViolation("MLP has no layers");
  if (cols != map.input_dim()) throw ContractViolation("MLP input dimension mismatch");
}

}  // namespace

MlpForwardCache mlp_forward_cached(const MlpMap& map, const Matrix& X) {
  check_mlp_input(map, X.cols());
  MlpForwardCache cache;
  Matrix a = X;
  const std::size_t L = map.layers.size();
  for (std::size_t j = 0; j < L; ++j) {
    const auto& layer = map.layers[j];
    Matrix z = a * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    cache.inputs.push_back(std::move(a));
    if (j + 1 < L) {
      a = z.unaryExpr([s = map.negative_slope](double v) { return v > 0 ? v : s * v; });
    } else {
      cache.output = z;
    }
    cache.pre_activations.push_back(std::move(z));
  }
  return cache;
}

Matrix mlp_forward(const MlpMap& map, const Matrix& X) { return mlp_forward_cached(map, X).output; }

MlpGradient mlp_backward(const MlpMap& map, const MlpForwardCache& cache, const Matrix& upstream) {
  if (upstream.rows() != cache.output.rows() || upstream.cols() != cache.output.cols())
    throw ContractViolation("upstream gradient shape does not match MLP output");
  MlpGradient grad = MlpGradient::zeros_like(map);
  Matrix delta = upstream;  // d s / d z_j
  for (std::size_t jj = map.layers.size(); jj-- > 0;) {
    grad.layers[jj].weight.noalias() = delta.transpose() * cache.inputs[jj];
    grad.layers[jj].bias = delta.colwise().sum().transpose();
    if (jj == 0) break;
    Matrix da = delta * map.layers[jj].weight;
    const Matrix& z = cache.pre_activations[jj - 1];
    const double s = map.negative_slope;
    delta = da.cwiseProduct(z.unaryExpr([s](double v) { return v > 0 ? 1.0 : s; }));
  }
  return grad;
}

MlpGradient mlp_backward(const MlpMap& map, const Matrix& X, const Matrix& upstream) {
  return mlp_backward(map, mlp_forward_cached(map, X), upstream);
}

SingularTriplet top_singular_triplet(const Matrix& W, SpectralNormConfig cfg) {
  if (cfg.max_iters < 1) throw ContractViolation("power iteration needs at least one iteration");
  SingularTriplet out;
  out.right = Vector::Zero(W.cols());
  out.left = Vector::Zero(W.rows());
  if (W.size() == 0 || W.cwiseAbs().maxCoeff() == 0.0) return out;

  Vector v = Vector::Ones(W.cols()).normalized();
  if ((W * v).squaredNorm() == 0.0) {
    // all-ones start lies in the null space; fall back to the heaviest column
    Index col = 0;
    W.colwise().squaredNorm().maxCoeff(&col);
    v = Vector::Unit(W.cols(), col);
  }
  double sigma = 0.0;
  for (int it = 0; it < cfg.max_iters; ++it) {
    const Vector w = W * v;
    const double next = w.norm();
    Vector back = W.transpose() * w;
    const double back_norm = back.norm();
    if (back_norm == 0.0) {
      sigma = next;
      break;
    }
    v = back / back_norm;
    const bool converged = it > 0 && std::abs(next - sigma) <= cfg.rel_tol * next;
    sigma = next;
    if (converged) break;
  }
  const Vector wv = W * v;
  out.value = wv.norm();
  out.right = v;
  out.left = out.value > 0 ? Vector(wv / out.value) : Vector(Vector::Zero(W.rows()));
  return out;
}

SingularTriplet exact_top_singular_triplet(const Matrix& W) {
  SingularTriplet out;
  out.right = Vector::Zero(W.cols());
  out.left = Vector::Zero(W.rows());
  if (W.size() == 0 || W.cwiseAbs().maxCoeff() == 0.0) return out;
  if (W.cols() <= W.rows()) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(W.transpose() * W);
    out.right = es.eigenvectors().col(W.cols() - 1);
    const Vector wv = W * out.right;
    out.value = wv.norm();
    if (out.value > 0) out.left = wv / out.value;
  } else {
    Eigen::SelfAdjointEigenSolver<Matrix> es(W * W.transpose());
    out.left = es.eigenvectors().col(W.rows() - 1);
    const Vector wu = W.transpose() * out.left;
    out.value = wu.norm();
    if (out.value > 0) out.right = wu / out.value;
  }
  return out;
}

double spectral_norm(const Matrix& W, SpectralNormConfig cfg) { return top_singular_triplet(W, cfg).value; }

double spectral_product(const MlpMap& map, SpectralNormConfig cfg) {
  double prod = 1.0;
  for (const auto& l : map.layers) prod *= spectral_norm(l.weight, cfg);
  return prod;
}

double lipschitz_constant(const FeatureMap& h) {
  return std::visit(
      [](const auto& m) -> double {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LinearMap>) {
          return 1.0 / m.sigma;
        } else if constexpr (std::is_same_v<T, PolynomialMap>) {
          if (std::isnan(m.jacobian_bound))
            throw ContractViolation("polynomial Lipschitz constant needs a fitted Jacobian bound");
          return m.jacobian_bound / m.sigma;
        } else {
          return spectral_product(m);
        }
      },
      h);
}

Matrix apply_feature_map(const FeatureMap& h, const Matrix& X) {
  return std::visit(
      [&X](const auto& m) -> Matrix {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LinearMap>) {
          if (X.cols() != m.input_dim) throw ContractViolation("linear map input dimension mismatch");
          return X / m.sigma;
        } else if constexpr (std::is_same_v<T, PolynomialMap>) {
          return poly_features(m, X) / m.sigma;
        } else {
          return mlp_forward(m, X);
        }
      },
      h);
}

Vector apply_feature_map(const FeatureMap& h, const Vector& x) {
  Matrix row = x.transpose();
  return apply_feature_map(h, row).row(0).transpose();
}

int feature_input_dim(const FeatureMap& h) {
  return std::visit(
      [](const auto& m) -> int {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, MlpMap>) {
          return m.input_dim();
        } else {
          return m.input_dim;
        }
      },
      h);
}

}  // namespace cpmmd

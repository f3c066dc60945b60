#include "cpmmd/selection.hpp"

#include <algorithm>
#include <cmath>

#include "cpmmd/criterion.hpp"

namespace cpmmd {

const char* criterion_name(Criterion c) {
  switch (c) {
    case Criterion::ComplexityPenalized:
      return "cpmmd";
    case Criterion::Plain:
      return "plain";
    case Criterion::Liu:
      return "liu";
  }
  return "unknown";
}

double Trajectory::max_proxy() const {
  double best = 0.0;
  for (const auto& r : records)
    if (std::isfinite(r.proxy)) best = std::max(best, r.proxy);
  return best;
}

// ---------------------------------------------------------------------------

BandwidthObjective::BandwidthObjective(const BandwidthFamily& family, const PooledSample& sample)
    : family_(family), m_(sample.m()), n_(sample.n()), frobenius_(sample.frobenius_norm()) {
  if (m_ < 2 || n_ < 2) throw InsufficientSample("bandwidth selection needs at least 2 points per class");
  input_dim_ = static_cast<int>(sample.dim());
  const Matrix Z = sample.pooled();
  if (family_.is_linear()) {
    sq_dists_ = pairwise_sq_dists(Z);
    jacobian_bound_ = 1.0;
  } else {
    const PolynomialMap psi = PolynomialMap::make(input_dim_, family_.degree);
    sq_dists_ = pairwise_sq_dists(poly_features(psi, Z));
    jacobian_bound_ = poly_jacobian_bound(psi, Z);
  }
}

double BandwidthObjective::mmd(double sigma) const {
  return mmd_unbiased_pooled(gram_from_sq_dists(family_.base, sq_dists_, 1.0 / (sigma * sigma)), m_);
}

double BandwidthObjective::lipschitz(double sigma) const { return jacobian_bound_ / sigma; }

double BandwidthObjective::proxy(double sigma) const {
  return complexity_proxy(lipschitz(sigma), frobenius_, m_ + n_);
}

double BandwidthObjective::criterion(Criterion c, double sigma, double c1_hat) const {
  switch (c) {
    case Criterion::Plain:
      return mmd(sigma);
    case Criterion::ComplexityPenalized:
      return j_cp(mmd(sigma), c1_hat, proxy(sigma));
    case Criterion::Liu:
      break;
  }
  throw UnsupportedConfiguration("bandwidth families support the penalized and plain criteria only");
}

CompositeKernel BandwidthObjective::kernel(double sigma) const {
  if (family_.is_linear()) return {family_.base, LinearMap{sigma, input_dim_}};
  PolynomialMap psi = PolynomialMap::make(input_dim_, family_.degree, sigma);
  psi.jacobian_bound = jacobian_bound_;
  return {family_.base, psi};
}

namespace {

double median_of(std::vector<double>& v) {
  const std::size_t k = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  const double upper = v[k];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k));
  return 0.5 * (lower + upper);
}

double median_from_sq_dists(const Matrix& sq) {
  const Index N = sq.rows();
  if (N < 2) throw InsufficientSample("median heuristic needs at least 2 points");
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(N * (N - 1) / 2));
  for (Index i = 0; i < N; ++i)
    for (Index j = i + 1; j < N; ++j) d.push_back(std::sqrt(sq(i, j)));
  const double med = median_of(d);
  if (!(med > 0)) throw DegenerateBandwidth("median pairwise distance is zero");
  return med;
}

}  // namespace

double BandwidthObjective::median_feature_distance() const { return median_from_sq_dists(sq_dists_); }

std::pair<double, double> BandwidthObjective::default_range() const {
  const double med = median_feature_distance();
  return {0.05 * med, 20.0 * med};
}

BandwidthObjective BandwidthObjective::relabeled(std::span<const int> order) const {
  const Index N = m_ + n_;
  if (static_cast<Index>(order.size()) != N) throw ContractViolation("relabeling has wrong length");
  BandwidthObjective out = *this;
  for (Index a = 0; a < N; ++a)
    for (Index b = 0; b < N; ++b)
      out.sq_dists_(a, b) = sq_dists_(order[static_cast<std::size_t>(a)], order[static_cast<std::size_t>(b)]);
  return out;
}

ScalarSelection select_scalar_bandwidth(Criterion criterion, const BandwidthObjective& objective,
                                        std::optional<std::pair<double, double>> sigma_range, double c1_hat) {
  if (criterion == Criterion::Liu)
    throw UnsupportedConfiguration("bandwidth families support the penalized and plain criteria only");
  const auto [lo, hi] = sigma_range ? *sigma_range : objective.default_range();
  if (!(lo > 0 && lo < hi)) throw ContractViolation("bandwidth range must satisfy 0 < lo < hi");

  ScalarSelection out;
  auto evaluate = [&](int step, double sigma) {
    TrajectoryRecord r;
    r.step = step;
    r.sigma = sigma;
    r.mmd = objective.mmd(sigma);
    r.lipschitz = objective.lipschitz(sigma);
    r.proxy = objective.proxy(sigma);
    r.criterion = criterion == Criterion::Plain ? r.mmd : j_cp(r.mmd, c1_hat, r.proxy);
    if (!std::isfinite(r.criterion)) {
      std::optional<TrajectoryRecord> last;
      if (!out.trajectory.records.empty()) last = out.trajectory.records.back();
      throw NumericalAbort("non-finite bandwidth criterion", last);
    }
    return r;
  };

  const double log_lo = std::log(lo), log_hi = std::log(hi);
  std::vector<double> grid(kBandwidthGridPoints);
  for (int i = 0; i < kBandwidthGridPoints; ++i)
    grid[static_cast<std::size_t>(i)] =
        i == kBandwidthGridPoints - 1 ? hi : std::exp(log_lo + (log_hi - log_lo) * i / (kBandwidthGridPoints - 1));
  grid.front() = lo;

  std::size_t best = 0;
  for (int i = 0; i < kBandwidthGridPoints; ++i) {
    out.trajectory.records.push_back(evaluate(i, grid[static_cast<std::size_t>(i)]));
    if (out.trajectory.records.back().criterion > out.trajectory.records[best].criterion)
      best = static_cast<std::size_t>(i);
  }

  // golden-section search in log sigma over the bracket around the grid max
  double a = std::log(grid[best == 0 ? 0 : best - 1]);
  double b = std::log(grid[std::min(best + 1, grid.size() - 1)]);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  auto f = [&](double log_sigma) {
    const double s = std::exp(log_sigma);
    return criterion == Criterion::Plain ? objective.mmd(s) : objective.criterion(criterion, s, c1_hat);
  };
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (std::exp(b - a) - 1.0 > kGoldenRelTol) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  out.trajectory.records.push_back(evaluate(kBandwidthGridPoints, std::exp(0.5 * (a + b))));
  const auto& refined = out.trajectory.records.back();
  out.trajectory.selected = refined.criterion > out.trajectory.records[best].criterion
                                ? out.trajectory.records.size() - 1
                                : best;
  out.sigma = out.trajectory.selected_record().sigma;
  out.kernel = objective.kernel(out.sigma);
  return out;
}

ScalarSelection select_scalar_bandwidth(Criterion criterion, const BandwidthFamily& family, const PooledSample& train,
                                        std::optional<std::pair<double, double>> sigma_range, double c1_hat) {
  return select_scalar_bandwidth(criterion, BandwidthObjective(family, train), sigma_range, c1_hat);
}

// ---------------------------------------------------------------------------

DeepEvaluation evaluate_deep(Criterion criterion, const MlpMap& map, const PooledSample& sample, double c1_hat,
                             double liu_lambda, bool with_gradient) {
  const Index m = sample.m(), n = sample.n();
  if (m < 2 || n < 2) throw InsufficientSample("deep selection needs at least 2 points per class");
  if (criterion == Criterion::Liu && m != n) throw UnsupportedConfiguration("ratio criterion requires m = n");

  const KernelSpec base = KernelSpec::gaussian();
  const MlpForwardCache cache = mlp_forward_cached(map, sample.pooled());
  const Matrix K = gram_of_features(base, cache.output);

  std::vector<SingularTriplet> triplets;
  triplets.reserve(map.layers.size());
  double product = 1.0;
  for (const auto& layer : map.layers) {
    triplets.push_back(top_singular_triplet(layer.weight));
    product *= triplets.back().value;
  }

  DeepEvaluation out;
  out.mmd = mmd_unbiased_pooled(K, m);
  out.lipschitz = product;
  const double proxy_scale = complexity_proxy(1.0, sample);
  out.proxy = product * proxy_scale;

  Matrix dK;
  switch (criterion) {
    case Criterion::Plain:
      out.criterion = out.mmd;
      if (with_gradient) dK = mmd_gram_gradient(m, n);
      break;
    case Criterion::ComplexityPenalized:
      out.criterion = j_cp(out.mmd, c1_hat, out.proxy);
      if (with_gradient) dK = mmd_gram_gradient(m, n);
      break;
    case Criterion::Liu: {
      const LiuRatio r = liu_ratio(split_pooled(K, m), liu_lambda);
      out.criterion = r.j_liu;
      out.j_liu = r.j_liu;
      out.tau = r.tau;
      if (with_gradient) {
        const double root_m = std::sqrt(static_cast<double>(m));
        dK = mmd_gram_gradient(m, n) * (root_m / r.tau);
        if (r.variance > 0) {
          // d tau / d var = 1 / (2 tau)
          dK -= liu_variance_gram_gradient(K, m) * (root_m * r.mmd / (r.tau * r.tau) / (2.0 * r.tau));
        }
      }
      break;
    }
  }

  if (with_gradient) {
    const Matrix dF = gram_gradient_to_features(base, cache.output, K, dK);
    MlpGradient g = mlp_backward(map, cache, dF);
    if (criterion == Criterion::ComplexityPenalized && c1_hat != 0.0) {
      // d Pi / d W_j = (Pi / s_j) u_j v_j^T, with converged singular vectors
      for (std::size_t j = 0; j < map.layers.size(); ++j) {
        if (triplets[j].value <= 0) continue;
        const SingularTriplet t = exact_top_singular_triplet(map.layers[j].weight);
        double others = 1.0;
        for (std::size_t k = 0; k < triplets.size(); ++k)
          if (k != j) others *= triplets[k].value;
        g.layers[j].weight.noalias() -= (c1_hat * proxy_scale * others) * (t.left * t.right.transpose());
      }
    }
    out.gradient = std::move(g);
  }
  return out;
}

namespace {

bool record_is_finite(const TrajectoryRecord& r) {
  return std::isfinite(r.criterion) && std::isfinite(r.mmd) && std::isfinite(r.proxy) && std::isfinite(r.lipschitz);
}

}  // namespace

DeepSelection select_deep(Criterion criterion, const PooledSample& train, const MlpMap& init,
                          const OptimizerConfig& cfg, double c1_hat) {
  if (cfg.steps < 0) throw ContractViolation("step count must be nonnegative");
  if (criterion == Criterion::Liu && train.m() != train.n())
    throw UnsupportedConfiguration("ratio criterion requires m = n");

  DeepSelection out{init, {}};
  MlpMap params = init;
  MlpGradient first = MlpGradient::zeros_like(init);
  MlpGradient second = MlpGradient::zeros_like(init);
  std::optional<TrajectoryRecord> last_finite;
  double best = -std::numeric_limits<double>::infinity();

  for (int t = 0; t <= cfg.steps; ++t) {
    DeepEvaluation ev = evaluate_deep(criterion, params, train, c1_hat, cfg.liu_lambda, t < cfg.steps);
    TrajectoryRecord rec;
    rec.step = t;
    rec.criterion = ev.criterion;
    rec.mmd = ev.mmd;
    rec.proxy = ev.proxy;
    rec.lipschitz = ev.lipschitz;
    rec.j_liu = ev.j_liu;
    rec.tau = ev.tau;
    if (!record_is_finite(rec)) throw NumericalAbort("non-finite criterion at step " + std::to_string(t), last_finite);

    const bool keep = criterion == Criterion::ComplexityPenalized ? rec.criterion > best : t == cfg.steps;
    if (keep) {
      best = rec.criterion;
      out.map = params;
      out.trajectory.selected = static_cast<std::size_t>(t);
    }

    if (t < cfg.steps) {
      MlpGradient& g = *ev.gradient;
      const double norm = g.norm();
      if (!std::isfinite(norm)) throw NumericalAbort("non-finite gradient at step " + std::to_string(t), rec);
      if (norm > cfg.clip_norm) g.scale(cfg.clip_norm / norm);
      rec.grad_norm = std::min(norm, cfg.clip_norm);

      const double bias1 = 1.0 - std::pow(cfg.beta1, t + 1);
      const double bias2 = 1.0 - std::pow(cfg.beta2, t + 1);
      for (std::size_t j = 0; j < params.layers.size(); ++j) {
        auto step = [&](auto& theta, const auto& grad, auto& m1, auto& m2) {
          m1 = cfg.beta1 * m1 + (1.0 - cfg.beta1) * grad;
          m2 = cfg.beta2 * m2 + (1.0 - cfg.beta2) * grad.cwiseAbs2();
          // ascent
          theta.array() += cfg.learning_rate * (m1.array() / bias1) / ((m2.array() / bias2).sqrt() + cfg.epsilon);
        };
        step(params.layers[j].weight, g.layers[j].weight, first.layers[j].weight, second.layers[j].weight);
        step(params.layers[j].bias, g.layers[j].bias, first.layers[j].bias, second.layers[j].bias);
      }
    }
    out.trajectory.records.push_back(rec);
    last_finite = rec;
  }
  return out;
}

// ---------------------------------------------------------------------------

double median_heuristic(const Matrix& points) { return median_from_sq_dists(pairwise_sq_dists(points)); }

double median_heuristic(const PooledSample& pooled) { return median_heuristic(pooled.pooled()); }

GridSelection grid_argmax_selector(std::span<const CompositeKernel> kernels, const PooledSample& train, double delta) {
  if (kernels.empty()) throw ContractViolation("kernel grid is empty");
  if (!(delta > 0 && delta < 1)) throw ContractViolation("delta must lie in (0, 1)");
  GridSelection out;
  double nu = 0.0;
  for (const auto& k : kernels) {
    out.mmds.push_back(mmd_unbiased(gram_blocks(k, train.x(), train.y())));
    nu = std::max(nu, k.base.nu);
  }
  for (std::size_t j = 1; j < out.mmds.size(); ++j)
    if (out.mmds[j] > out.mmds[out.index]) out.index = j;
  const double c2 = 4.0 * nu * train.imbalance_ratio();
  const double B = static_cast<double>(kernels.size());
  out.regret_bound = 2.0 * c2 * std::sqrt(std::log(2.0 * B / delta) / static_cast<double>(train.total()));
  return out;
}

std::vector<CompositeKernel> dyadic_bandwidth_grid(int input_dim, double center, int per_family) {
  if (per_family < 1) throw ContractViolation("grid needs at least one bandwidth per family");
  std::vector<CompositeKernel> grid;
  for (const KernelSpec& base : {KernelSpec::gaussian(), KernelSpec::laplacian()}) {
    for (int i = 0; i < per_family; ++i) {
      const double offset = i - 0.5 * (per_family - 1);
      grid.push_back({base, LinearMap{center * std::exp2(offset), input_dim}});
    }
  }
  return grid;
}

}  // namespace cpmmd

#include "cpmmd/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cpmmd/parallel.hpp"
#include "cpmmd/rng.hpp"

namespace cpmmd {

void TestConfig::validate() const {
  if (!(alpha > 0 && alpha < 1)) throw ConfigError("alpha must lie in (0, 1)");
  if (n_perm < 1) throw ConfigError("n_perm must be at least 1");
  if (n_cal < 1) throw ConfigError("n_cal must be at least 1");
  if (!(split_fraction > 0 && split_fraction < 1)) throw ConfigError("split fraction must lie in (0, 1)");
  if (!(delta > 0 && delta < 1) || !(delta_prime > 0 && delta_prime < 1))
    throw ConfigError("delta and delta' must lie in (0, 1)");
}

namespace {

Matrix take_rows(const Matrix& A, const std::vector<int>& rows) {
  Matrix out(static_cast<Index>(rows.size()), A.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = A.row(rows[i]);
  return out;
}

template <class Fn>
auto run_stage(const char* stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (Error& e) {
    if (e.stage().empty()) e.set_stage(stage);
    throw;
  }
}

}  // namespace

SampleSplit stratified_split(const Matrix& X, const Matrix& Y, double fraction, std::uint64_t seed) {
  if (X.rows() < 4 || Y.rows() < 4) throw InsufficientSample("each class needs at least 4 points to split");
  if (X.cols() != Y.cols()) throw ContractViolation("samples have different dimensions");
  if (!(fraction > 0 && fraction < 1)) throw ContractViolation("split fraction must lie in (0, 1)");

  auto split_class = [&](const Matrix& A, std::uint64_t index) {
    Rng rng = make_rng(derive_seed(seed, index, "stratified-split"));
    const std::vector<int> perm = random_permutation(static_cast<int>(A.rows()), rng);
    const auto n_train = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(A.rows())));
    if (n_train < 2 || perm.size() - n_train < 2)
      throw InsufficientSample("split leaves fewer than 2 points of a class in one half");
    const std::vector<int> train(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    const std::vector<int> test(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
    return std::pair{take_rows(A, train), take_rows(A, test)};
  };
  auto [xtr, xte] = split_class(X, 0);
  auto [ytr, yte] = split_class(Y, 1);
  return {PooledSample(std::move(xtr), std::move(ytr)), PooledSample(std::move(xte), std::move(yte))};
}

namespace {

double relabeled_statistic(const Matrix& K, Index m, std::uint64_t seed, int b) {
  Rng rng = make_rng(derive_seed(seed, static_cast<std::uint64_t>(b), "relabel"));
  const std::vector<int> order = random_permutation(static_cast<int>(K.rows()), rng);
  return mmd_unbiased_relabeled(K, order, m);
}

}  // namespace

std::vector<double> permutation_statistics(const Matrix& K, Index m, int n_perm, std::uint64_t seed) {
  std::vector<double> out(static_cast<std::size_t>(std::max(n_perm, 0)));
#pragma omp parallel for schedule(static)
  for (int b = 0; b < n_perm; ++b) out[static_cast<std::size_t>(b)] = relabeled_statistic(K, m, seed, b);
  return out;
}

std::vector<double> serial::permutation_statistics(const Matrix& K, Index m, int n_perm, std::uint64_t seed) {
  std::vector<double> out(static_cast<std::size_t>(std::max(n_perm, 0)));
  for (int b = 0; b < n_perm; ++b) out[static_cast<std::size_t>(b)] = relabeled_statistic(K, m, seed, b);
  return out;
}

PermutationResult permutation_decision(double observed, std::vector<double> permuted, double alpha) {
  if (permuted.empty()) throw ContractViolation("no permuted statistics");
  PermutationResult r;
  r.statistic = observed;
  const auto count = std::count_if(permuted.begin(), permuted.end(), [&](double s) { return s >= observed; });
  const auto B = static_cast<double>(permuted.size());
  r.p_value = (1.0 + static_cast<double>(count)) / (B + 1.0);
  r.reject = r.p_value <= alpha;
  std::sort(permuted.begin(), permuted.end());
  const auto rank = static_cast<std::size_t>(std::ceil((1.0 - alpha) * (B + 1.0) - 1e-12));
  r.c_alpha = rank > permuted.size() ? std::numeric_limits<double>::infinity()
                                     : permuted[std::max<std::size_t>(rank, 1) - 1];
  return r;
}

TestReport permutation_test(const CompositeKernel& kernel, const PooledSample& test, int n_perm, double alpha,
                            std::uint64_t seed) {
  if (test.m() < 2 || test.n() < 2) throw InsufficientSample("test half needs at least 2 points per class");
  if (n_perm < 1) throw ContractViolation("n_perm must be at least 1");
  const Matrix K = pooled_gram(kernel, test.x(), test.y());
  // same summation order as the permuted statistics, so exact ties stay ties
  std::vector<int> identity(static_cast<std::size_t>(K.rows()));
  std::iota(identity.begin(), identity.end(), 0);
  const double observed = mmd_unbiased_relabeled(K, identity, test.m());
  const PermutationResult pr = permutation_decision(observed, permutation_statistics(K, test.m(), n_perm, seed), alpha);

  TestReport report;
  report.reject = pr.reject;
  report.p_value = pr.p_value;
  report.statistic = pr.statistic;
  report.c_alpha = pr.c_alpha;
  report.selected_kernel = kernel.describe();
  report.n_test = test.total();
  return report;
}

namespace {

struct Selected {
  CompositeKernel kernel;
  Trajectory trajectory;
};

Selected select_for_class(const KernelClass& cls, const PooledSample& train, const OptimizerConfig& optimizer,
                          double c1_hat, std::uint64_t init_seed) {
  if (const auto* lin = std::get_if<LinearClass>(&cls)) {
    ScalarSelection s = select_scalar_bandwidth(Criterion::ComplexityPenalized, BandwidthFamily::linear(), train,
                                                lin->sigma_range, c1_hat);
    return {s.kernel, std::move(s.trajectory)};
  }
  if (const auto* poly = std::get_if<PolynomialClass>(&cls)) {
    ScalarSelection s = select_scalar_bandwidth(Criterion::ComplexityPenalized,
                                                BandwidthFamily::polynomial(poly->degree), train, poly->sigma_range,
                                                c1_hat);
    return {s.kernel, std::move(s.trajectory)};
  }
  const auto& deep = std::get<DeepClass>(cls);
  const MlpMap init = MlpMap::glorot(deep.widths(static_cast<int>(train.dim())), init_seed);
  DeepSelection s = select_deep(Criterion::ComplexityPenalized, train, init, optimizer, c1_hat);
  return {CompositeKernel{KernelSpec::gaussian(), std::move(s.map)}, std::move(s.trajectory)};
}

std::uint64_t init_seed_for(const TestConfig& cfg, const OptimizerConfig& optimizer) {
  return derive_seed(cfg.seed, optimizer.seed, seed_tags::kInit);
}

}  // namespace

TestReport run_cpmmd_test(const Matrix& X, const Matrix& Y, const KernelClass& cls, const TestConfig& cfg,
                          const OptimizerConfig& optimizer, std::optional<double> c1_override) {
  cfg.validate();
  const SampleSplit split =
      run_stage("split", [&] { return stratified_split(X, Y, cfg.split_fraction, derive_seed(cfg.seed, 0, seed_tags::kSplit)); });

  std::optional<CalibrationResult> calibration;
  double c1_hat = 0.0;
  if (c1_override) {
    if (!(*c1_override >= 0)) throw ConfigError("injected c1 must be nonnegative");
    c1_hat = *c1_override;
  } else {
    calibration = run_stage("calibration", [&] {
      return calibrate_c1(cls, split.train, cfg.n_cal, cfg.alpha, optimizer,
                          derive_seed(cfg.seed, 0, seed_tags::kCalibration));
    });
    c1_hat = calibration->c1_hat;
  }

  Selected selected = run_stage(
      "selection", [&] { return select_for_class(cls, split.train, optimizer, c1_hat, init_seed_for(cfg, optimizer)); });

  TestReport report = run_stage("test", [&] {
    return permutation_test(selected.kernel, split.test, cfg.n_perm, cfg.alpha,
                            derive_seed(cfg.seed, 0, seed_tags::kPermutation));
  });
  report.method = "cpmmd-" + describe_kernel_class(cls);
  report.c1_hat = c1_hat;
  report.c1_injected = c1_override.has_value();
  report.calibration = std::move(calibration);
  report.n_train = split.train.total();

  const auto& rec = selected.trajectory.selected_record();
  const UciConstants consts = UciConstants::make(selected.kernel.base, split.train);
  report.certificate = trajectory_certificate(rec.mmd, c1_hat, selected.trajectory.max_proxy(), consts.c2,
                                              split.train.total(), cfg.delta);
  PowerCertificateInput pin;
  pin.mmd_train = rec.mmd;
  pin.proxy = rec.proxy;
  pin.c1 = c1_hat;
  pin.n_train = split.train.total();
  pin.n_holdout = split.test.total();
  pin.alpha = cfg.alpha;
  pin.delta = cfg.delta;
  pin.delta_prime = cfg.delta_prime;
  pin.nu = selected.kernel.base.nu;
  pin.imbalance_ratio = split.train.imbalance_ratio();
  pin.n_perm = cfg.n_perm;
  report.power_certificate = power_certificate(pin);
  report.trajectory = std::move(selected.trajectory);
  return report;
}

const char* baseline_name(Baseline b) {
  switch (b) {
    case Baseline::Median:
      return "median";
    case Baseline::GridArgmax:
      return "grid_argmax";
    case Baseline::Liu:
      return "liu";
    case Baseline::Plain:
      return "plain";
  }
  return "unknown";
}

TestReport run_baseline_test(const Matrix& X, const Matrix& Y, Baseline baseline, const TestConfig& cfg,
                             const OptimizerConfig& optimizer, const BaselineOptions& options) {
  cfg.validate();
  const SampleSplit split =
      run_stage("split", [&] { return stratified_split(X, Y, cfg.split_fraction, derive_seed(cfg.seed, 0, seed_tags::kSplit)); });
  const int d = static_cast<int>(split.train.dim());

  Selected selected = run_stage("selection", [&]() -> Selected {
    switch (baseline) {
      case Baseline::Median:
        return {CompositeKernel{KernelSpec::gaussian(), LinearMap{median_heuristic(split.train), d}}, {}};
      case Baseline::GridArgmax: {
        const auto grid = dyadic_bandwidth_grid(d, median_heuristic(split.train), options.grid_per_family);
        const GridSelection g = grid_argmax_selector(grid, split.train, cfg.delta);
        return {grid[g.index], {}};
      }
      case Baseline::Liu:
      case Baseline::Plain: {
        const MlpMap init = MlpMap::glorot(options.architecture.widths(d), init_seed_for(cfg, optimizer));
        const Criterion c = baseline == Baseline::Liu ? Criterion::Liu : Criterion::Plain;
        DeepSelection s = select_deep(c, split.train, init, optimizer, 0.0);
        return {CompositeKernel{KernelSpec::gaussian(), std::move(s.map)}, std::move(s.trajectory)};
      }
    }
    throw ContractViolation("unknown baseline");
  });

  TestReport report = run_stage("test", [&] {
    return permutation_test(selected.kernel, split.test, cfg.n_perm, cfg.alpha,
                            derive_seed(cfg.seed, 0, seed_tags::kPermutation));
  });
  report.method = baseline_name(baseline);
  report.n_train = split.train.total();
  report.trajectory = std::move(selected.trajectory);
  return report;
}

RateEstimate rate_from_decisions(const std::vector<bool>& decisions) {
  if (decisions.empty()) throw ContractViolation("no replicates");
  RateEstimate r;
  r.n_reps = static_cast<int>(decisions.size());
  r.rate = static_cast<double>(std::count(decisions.begin(), decisions.end(), true)) / r.n_reps;
  r.se = std::sqrt(r.rate * (1.0 - r.rate) / r.n_reps);
  return r;
}

RateEstimate monte_carlo_rate(const std::function<bool(int, std::uint64_t)>& test_closure, int n_reps,
                              std::uint64_t seed) {
  if (n_reps < 1) throw ContractViolation("n_reps must be at least 1");
  std::vector<char> hits(static_cast<std::size_t>(n_reps), 0);
  parallel_for_index(n_reps, [&](int r) {
    hits[static_cast<std::size_t>(r)] =
        test_closure(r, derive_seed(seed, static_cast<std::uint64_t>(r), seed_tags::kReplicate)) ? 1 : 0;
  });
  return rate_from_decisions(std::vector<bool>(hits.begin(), hits.end()));
}

}  // namespace cpmmd

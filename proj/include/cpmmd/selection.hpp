#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "cpmmd/errors.hpp"
#include "cpmmd/features.hpp"
#include "cpmmd/kernels.hpp"
#include "cpmmd/mmd.hpp"

namespace cpmmd {

enum class Criterion {
  ComplexityPenalized,  // J_CP = mmd - c1 * G~(h)
  Plain,                // mmd
  Liu,                  // sqrt(n) * mmd / tau
};

const char* criterion_name(Criterion c);

struct TrajectoryRecord {
  static constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();

  int step = 0;
  double criterion = kUnset;
  double mmd = kUnset;
  double proxy = kUnset;
  double lipschitz = kUnset;  // spectral product for MLPs, L(h) otherwise
  double grad_norm = kUnset;  // post-clip global norm of the applied step
  double j_liu = kUnset;
  double tau = kUnset;
  double sigma = kUnset;  // bandwidth, scalar regimes only
};

struct Trajectory {
  std::vector<TrajectoryRecord> records;
  std::size_t selected = 0;

  const TrajectoryRecord& selected_record() const { return records.at(selected); }
  const TrajectoryRecord& final_record() const { return records.back(); }
  /// max_t G~(h^(t)), the class-level proxy of the visited trajectory.
  double max_proxy() const;
};

/// Non-finite criterion value during selection. Carries the last record whose
/// values were all finite (if any).
class NumericalAbort : public Error {
 public:
  NumericalAbort(const std::string& message, std::optional<TrajectoryRecord> last_finite)
      : Error(message), last_finite_(std::move(last_finite)) {}
  const std::optional<TrajectoryRecord>& last_finite() const { return last_finite_; }

 private:
  std::optional<TrajectoryRecord> last_finite_;
};

struct OptimizerConfig {
  int steps = 100;
  double learning_rate = 0.005;
  double clip_norm = 5.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Regularizer under the square root of the ratio criterion's tau.
  double liu_lambda = 1e-8;
  std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// Scalar bandwidth regimes

/// Linear (x/sigma with a Gaussian base) or polynomial (Psi_p(x)/sigma with a
/// Laplacian base) bandwidth family.
struct BandwidthFamily {
  int degree = 0;  // 0 selects the linear family
  KernelSpec base = KernelSpec::gaussian();

  static BandwidthFamily linear() { return {0, KernelSpec::gaussian()}; }
  static BandwidthFamily polynomial(int p) { return {p, KernelSpec::laplacian()}; }
  bool is_linear() const { return degree == 0; }
};

/// Evaluates the plain and penalized criteria of a bandwidth family on a fixed
/// pooled sample. Feature distances are computed once; relabeling only
/// permutes them.
class BandwidthObjective {
 public:
  BandwidthObjective(const BandwidthFamily& family, const PooledSample& sample);

  double mmd(double sigma) const;
  double lipschitz(double sigma) const;
  double proxy(double sigma) const;
  double criterion(Criterion c, double sigma, double c1_hat) const;
  CompositeKernel kernel(double sigma) const;

  /// Median pairwise distance in feature space (raw inputs for the linear
  /// family).
  double median_feature_distance() const;
  /// [0.05, 20] x median_feature_distance().
  std::pair<double, double> default_range() const;

  /// Same objective with the pooled points reordered by `order`; the first m
  /// entries form the new X.
  BandwidthObjective relabeled(std::span<const int> order) const;

  const BandwidthFamily& family() const { return family_; }

 private:
  BandwidthObjective() = default;

  BandwidthFamily family_;
  Matrix sq_dists_;
  Index m_ = 0;
  Index n_ = 0;
  double frobenius_ = 0.0;
  double jacobian_bound_ = 1.0;
  int input_dim_ = 0;
};

struct ScalarSelection {
  double sigma = 0.0;
  CompositeKernel kernel;
  Trajectory trajectory;
};

inline constexpr int kBandwidthGridPoints = 33;
inline constexpr double kGoldenRelTol = 1e-3;

/// Maximizes the criterion over sigma in [lo, hi]: a 33-point log grid, then
/// golden-section refinement inside the best grid bracket. Ties resolve to the
/// smallest sigma.
ScalarSelection select_scalar_bandwidth(Criterion criterion, const BandwidthObjective& objective,
                                        std::optional<std::pair<double, double>> sigma_range, double c1_hat);
ScalarSelection select_scalar_bandwidth(Criterion criterion, const BandwidthFamily& family, const PooledSample& train,
                                        std::optional<std::pair<double, double>> sigma_range, double c1_hat);

// ---------------------------------------------------------------------------
// Deep regime

struct DeepEvaluation {
  double criterion = 0.0;
  double mmd = 0.0;
  double proxy = 0.0;
  double lipschitz = 0.0;
  double j_liu = TrajectoryRecord::kUnset;
  double tau = TrajectoryRecord::kUnset;
  std::optional<MlpGradient> gradient;
};

/// Criterion value (and optionally its exact gradient) of the Gaussian
/// composite kernel on the MLP features of the pooled sample.
DeepEvaluation evaluate_deep(Criterion criterion, const MlpMap& map, const PooledSample& sample, double c1_hat,
                             double liu_lambda, bool with_gradient);

struct DeepSelection {
  MlpMap map;
  Trajectory trajectory;
};

/// Adam ascent with global-norm clipping. J_CP returns the best recorded
/// iterate; plain and ratio criteria return the final iterate.
DeepSelection select_deep(Criterion criterion, const PooledSample& train, const MlpMap& init,
                          const OptimizerConfig& cfg, double c1_hat);

// ---------------------------------------------------------------------------
// Baselines

/// Median of the N(N-1)/2 pairwise Euclidean distances of the pooled sample.
double median_heuristic(const PooledSample& pooled);
double median_heuristic(const Matrix& points);

struct GridSelection {
  std::size_t index = 0;
  double regret_bound = 0.0;
  std::vector<double> mmds;
};

/// Empirical-MMD argmax over a finite kernel collection (smallest index on
/// ties) with regret bound 2 C2 sqrt(ln(2B/delta) / N).
GridSelection grid_argmax_selector(std::span<const CompositeKernel> kernels, const PooledSample& train, double delta);

/// Gaussian and Laplacian kernels at bandwidths center * 2^k for
/// `per_family` dyadic offsets centred on zero.
std::vector<CompositeKernel> dyadic_bandwidth_grid(int input_dim, double center, int per_family);

}  // namespace cpmmd

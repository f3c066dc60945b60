#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cpmmd/calibration.hpp"
#include "cpmmd/criterion.hpp"
#include "cpmmd/kernels.hpp"
#include "cpmmd/mmd.hpp"
#include "cpmmd/selection.hpp"

namespace cpmmd {

struct TestConfig {
  double alpha = 0.05;
  int n_perm = 200;
  int n_cal = 10;
  double split_fraction = 0.5;
  std::uint64_t seed = 0;
  /// Confidence parameters of the reported certificates.
  double delta = 0.05;
  double delta_prime = 0.05;

  void validate() const;
};

struct SampleSplit {
  PooledSample train;
  PooledSample test;
};

/// Per-class uniform split; each class contributes floor(fraction * size)
/// points to the training half.
SampleSplit stratified_split(const Matrix& X, const Matrix& Y, double fraction, std::uint64_t seed);

/// Unbiased MMD of each of n_perm seeded relabelings of a pooled Gram matrix.
std::vector<double> permutation_statistics(const Matrix& K, Index m, int n_perm, std::uint64_t seed);
namespace serial {
std::vector<double> permutation_statistics(const Matrix& K, Index m, int n_perm, std::uint64_t seed);
}

struct PermutationResult {
  bool reject = false;
  double p_value = 1.0;
  double statistic = 0.0;
  /// ceil((1 - alpha)(n_perm + 1))-th smallest permuted statistic; +inf when
  /// that rank exceeds n_perm.
  double c_alpha = 0.0;
};

PermutationResult permutation_decision(double observed, std::vector<double> permuted, double alpha);

struct TestReport {
  bool reject = false;
  double p_value = 1.0;
  double statistic = 0.0;
  double c_alpha = 0.0;
  std::string method;
  std::string selected_kernel;
  double c1_hat = 0.0;
  bool c1_injected = false;
  std::optional<CalibrationResult> calibration;
  Certificate certificate;
  PowerCertificate power_certificate;
  Trajectory trajectory;
  Index n_train = 0;
  Index n_test = 0;
};

/// Level-alpha permutation test with a kernel fixed before the test half is
/// seen. The pooled Gram matrix is computed once and re-indexed.
TestReport permutation_test(const CompositeKernel& kernel, const PooledSample& test, int n_perm, double alpha,
                            std::uint64_t seed);

/// split -> calibrate on train -> select by J_CP on train -> permutation test
/// on the held-out half. A supplied c1_override skips calibration.
TestReport run_cpmmd_test(const Matrix& X, const Matrix& Y, const KernelClass& cls, const TestConfig& cfg,
                          const OptimizerConfig& optimizer, std::optional<double> c1_override = std::nullopt);

enum class Baseline {
  Median,      // Gaussian kernel at the median heuristic bandwidth
  GridArgmax,  // empirical-MMD argmax over a Gaussian + Laplacian grid
  Liu,         // ratio criterion on the deep class
  Plain,       // plain MMD ascent on the deep class
};

const char* baseline_name(Baseline b);

struct BaselineOptions {
  DeepClass architecture;
  int grid_per_family = 5;
};

/// Same split and permutation seeds as run_cpmmd_test, so runs are matched.
TestReport run_baseline_test(const Matrix& X, const Matrix& Y, Baseline baseline, const TestConfig& cfg,
                             const OptimizerConfig& optimizer, const BaselineOptions& options = {});

struct RateEstimate {
  double rate = 0.0;
  double se = 0.0;
  int n_reps = 0;
};

/// Fraction of replicates that reject, with binomial SE sqrt(p(1-p)/R).
/// Replicate r receives derive_seed(seed, r, "replicate").
RateEstimate monte_carlo_rate(const std::function<bool(int, std::uint64_t)>& test_closure, int n_reps,
                              std::uint64_t seed);
RateEstimate rate_from_decisions(const std::vector<bool>& decisions);

/// Seed streams used by the pipeline stages.
namespace seed_tags {
inline constexpr const char* kSplit = "split";
inline constexpr const char* kCalibration = "calibration";
inline constexpr const char* kInit = "mlp-init";
inline constexpr const char* kPermutation = "test-permutation";
inline constexpr const char* kReplicate = "replicate";
}  // namespace seed_tags

}  // namespace cpmmd

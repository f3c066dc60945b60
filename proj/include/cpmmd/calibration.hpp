#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "cpmmd/mmd.hpp"
#include "cpmmd/selection.hpp"

namespace cpmmd {

struct LinearClass {
  std::optional<std::pair<double, double>> sigma_range;
};

struct PolynomialClass {
  int degree = 4;
  std::optional<std::pair<double, double>> sigma_range;
};

/// MLP d -> hidden... -> output_dim with LeakyReLU hidden activations.
struct DeepClass {
  std::vector<int> hidden = {200, 200};
  int output_dim = 10;

  std::vector<int> widths(int input_dim) const;
};

using KernelClass = std::variant<LinearClass, PolynomialClass, DeepClass>;

/// Parses "linear", "poly:p" or "deep[:w1xw2...[/out]]" (commas also separate
/// widths).
KernelClass parse_kernel_class(const std::string& text);
std::string describe_kernel_class(const KernelClass& cls);

enum class QuantileConvention { Quantile, Max };

struct CalibrationResult {
  double c1_hat = 0.0;
  std::vector<double> ratios;  // permutation order
  std::vector<double> mmds;
  std::vector<double> proxies;
  int n_cal = 0;
  double alpha = 0.05;
  QuantileConvention convention = QuantileConvention::Quantile;
  bool degenerate_warning = false;  // more than half the ratios below 1e-6
  bool negative_warning = false;    // every ratio negative, c1_hat floored at 0
  std::string note;
};

inline constexpr double kDegenerateRatio = 1e-6;

/// r-th smallest ratio with r = ceil((1 - alpha)(n_cal + 1)); the maximum when
/// r exceeds n_cal.
std::pair<double, QuantileConvention> calibration_order_statistic(std::vector<double> ratios, double alpha);

/// Null-permutation calibration of the penalty coefficient on the training
/// half. Each permutation reruns the plain-MMD maximizer of the class.
CalibrationResult calibrate_c1(const KernelClass& cls, const PooledSample& train, int n_cal, double alpha,
                               const OptimizerConfig& optimizer, std::uint64_t seed);

}  // namespace cpmmd

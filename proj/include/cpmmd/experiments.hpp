#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cpmmd/datagen.hpp"
#include "cpmmd/pipeline.hpp"

namespace cpmmd {

/// A CP-MMD kernel class or one of the baselines.
struct Method {
  std::string name;
  std::variant<KernelClass, Baseline> kind;
  BaselineOptions baseline_options;
};

struct PowerCellConfig {
  DistributionFamily family;
  Index n_per_class = 200;
  int reps = 50;
  std::uint64_t cell_seed = 0;
  TestConfig test;
  OptimizerConfig optimizer;
  /// Skips calibration for CP-MMD methods.
  std::optional<double> c1_override;
};

struct PowerCellResult {
  RateEstimate rate;
  std::vector<TestReport> reports;  // replicate order
};

/// Replicate r draws its data from derive_seed(cell_seed, r, "data") and its
/// test seed from derive_seed(cell_seed, r, "test"), so every method sees the
/// same samples and splits.
PowerCellResult run_power_cell(const PowerCellConfig& cfg, const Method& method);

/// Run flagged when mmd < 0.01, tau < 0.001 and J_Liu > 10 all hold.
bool is_collapsed(double mmd, double tau, double j_liu);

struct CollapseRow {
  int width = 0;
  int seed_index = 0;
  int steps = 0;
  double j_liu = 0.0;
  double mmd = 0.0;
  double tau = 0.0;
  double proxy = 0.0;
  double j_cp = 0.0;
  bool collapsed = false;
};

struct CollapseConfig {
  Index n_per_class = 200;
  int dim = 10;
  int steps = 200;
  int output_dim = 10;
  double c1 = 0.008;
  std::uint64_t seed = 0;
  OptimizerConfig optimizer;
};

/// Ratio-criterion ascent on null data P = Q = N(0, I_dim) for an MLP
/// dim -> width -> width -> output_dim, reporting the final iterate.
CollapseRow run_collapse(const CollapseConfig& cfg, int width, int seed_index);

}  // namespace cpmmd

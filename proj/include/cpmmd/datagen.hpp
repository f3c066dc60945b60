#pragma once

#include <cstdint>
#include <string>
#include <variant>

#include "cpmmd/types.hpp"

namespace cpmmd {

/// P = N(0, I_d), Q = N(shift * 1, I_d).
struct GaussianMeanShift {
  int dim = 1;
  double shift = 0.0;
};

/// P = 1/2 N(0, v I_2) + 1/2 N((3, 0), v I_2); Q moves both modes by (shift, 0).
struct MultiScaleMixture2D {
  double shift = 0.0;
  double mode_var = 0.01;
};

/// P = N(0, I_d), Q = sqrt((df - 2)/df) Z with Z multivariate Student-t, so
/// Cov(Q) = I_d.
struct ScaledStudentT {
  int dim = 10;
  double df = 5.0;
};

/// P = N(0, 1), Q = N(0, scale^2) in one dimension.
struct GaussianScale {
  double scale = 2.0;
};

using DistributionFamily = std::variant<GaussianMeanShift, MultiScaleMixture2D, ScaledStudentT, GaussianScale>;

enum class Role { P, Q };

struct DistributionSpec {
  DistributionFamily family;
  Role role = Role::P;
};

int family_dim(const DistributionFamily& family);
std::string describe_family(const DistributionFamily& family);

/// n x d draw, a pure function of (spec, n, seed).
Matrix sample(const DistributionSpec& spec, Index n, std::uint64_t seed);

struct TwoSampleData {
  Matrix x;
  Matrix y;
};

/// X ~ P^m and Y ~ Q^n from the "sample-p" and "sample-q" streams of seed.
TwoSampleData sample_pair(const DistributionFamily& family, Index m, Index n, std::uint64_t seed);

}  // namespace cpmmd

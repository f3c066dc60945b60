#pragma once

#include "cpmmd/features.hpp"
#include "cpmmd/kernels.hpp"
#include "cpmmd/mmd.hpp"

namespace cpmmd {

/// Constants of the two-sample uniform concentration inequality:
/// C1 = 2 sqrt(2 pi) l rho* (1 + rho*), C2 = 4 nu rho*.
struct UciConstants {
  double c1 = 0.0;
  double c2 = 0.0;

  static UciConstants make(double nu, double lipschitz, double imbalance_ratio);
  static UciConstants make(const KernelSpec& base, const PooledSample& sample);
};

/// G~(h) = L(h) ||D||_F / N.
double complexity_proxy(const FeatureMap& h, const PooledSample& sample);
double complexity_proxy(double lipschitz, const PooledSample& sample);
double complexity_proxy(double lipschitz, double frobenius_norm, Index total);

/// J_CP = mmd - c1_hat * proxy.
double j_cp(double mmd, double c1_hat, double proxy);

/// B_N(delta) = C1 * proxy_class + C2 sqrt(ln(2/delta) / N).
double uci_bound(const UciConstants& consts, double proxy_class, Index total, double delta);

/// Lower confidence bound on the population MMD over the visited trajectory:
/// lower_bound = mmd - c1 * proxy_class - C2 sqrt(ln(2/delta) / N).
struct Certificate {
  double lower_bound = 0.0;
  double delta = 0.0;
  double mmd = 0.0;
  double complexity_term = 0.0;
  double concentration_term = 0.0;
};

Certificate trajectory_certificate(double mmd, double c1, double proxy_class, double c2, Index total, double delta);

/// Held-out power certificate with the McDiarmid constant C = 16:
///   lhs = mmd_train - c1 * proxy - C2 sqrt(ln(2/delta') / N_tr)
///   rhs = 16 nu sqrt((ln(2/alpha) + ln(2/delta)) / N_ho)
/// The finite-permutation slack 1/(N_perm + 1) is reported, not folded in.
struct PowerCertificate {
  bool satisfied = false;
  double lhs = 0.0;
  double rhs = 0.0;
  double permutation_slack = 0.0;
};

struct PowerCertificateInput {
  double mmd_train = 0.0;
  double proxy = 0.0;
  double c1 = 0.0;
  Index n_train = 0;
  Index n_holdout = 0;
  double alpha = 0.05;
  double delta = 0.05;
  double delta_prime = 0.05;
  double nu = 1.0;
  double imbalance_ratio = 2.0;
  int n_perm = 0;
};

PowerCertificate power_certificate(const PowerCertificateInput& in);

inline constexpr double kMcDiarmidConstant = 16.0;

}  // namespace cpmmd

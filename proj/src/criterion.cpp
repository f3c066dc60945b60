#include "cpmmd/criterion.hpp"

#include <cmath>
#include <numbers>

#include "cpmmd/errors.hpp"

namespace cpmmd {

namespace {

void check_confidence(double v, const char* name) {
  if (!(v > 0.0 && v < 1.0)) throw ContractViolation(std::string(name) + " must lie in (0, 1)");
}

}  // namespace

UciConstants UciConstants::make(double nu, double lipschitz, double imbalance_ratio) {
  const double rho = imbalance_ratio;
  return {2.0 * std::sqrt(2.0 * std::numbers::pi) * lipschitz * rho * (1.0 + rho), 4.0 * nu * rho};
}

UciConstants UciConstants::make(const KernelSpec& base, const PooledSample& sample) {
  return make(base.nu, base.lipschitz, sample.imbalance_ratio());
}

double complexity_proxy(double lipschitz, double frobenius_norm, Index total) {
  if (total < 1) throw InsufficientSample("complexity proxy needs a nonempty sample");
  return lipschitz * frobenius_norm / static_cast<double>(total);
}

double complexity_proxy(double lipschitz, const PooledSample& sample) {
  return complexity_proxy(lipschitz, sample.frobenius_norm(), sample.total());
}

double complexity_proxy(const FeatureMap& h, const PooledSample& sample) {
  return complexity_proxy(lipschitz_constant(h), sample);
}

double j_cp(double mmd, double c1_hat, double proxy) { return mmd - c1_hat * proxy; }

double uci_bound(const UciConstants& consts, double proxy_class, Index total, double delta) {
  check_confidence(delta, "delta");
  return consts.c1 * proxy_class + consts.c2 * std::sqrt(std::log(2.0 / delta) / static_cast<double>(total));
}

Certificate trajectory_certificate(double mmd, double c1, double proxy_class, double c2, Index total, double delta) {
  check_confidence(delta, "delta");
  Certificate c;
  c.delta = delta;
  c.mmd = mmd;
  c.complexity_term = c1 * proxy_class;
  c.concentration_term = c2 * std::sqrt(std::log(2.0 / delta) / static_cast<double>(total));
  c.lower_bound = mmd - c.complexity_term - c.concentration_term;
  return c;
}

PowerCertificate power_certificate(const PowerCertificateInput& in) {
  check_confidence(in.alpha, "alpha");
  check_confidence(in.delta, "delta");
  check_confidence(in.delta_prime, "delta'");
  if (in.n_train < 1 || in.n_holdout < 1) throw InsufficientSample("certificate needs nonempty halves");
  const double c2 = 4.0 * in.nu * in.imbalance_ratio;
  PowerCertificate out;
  out.lhs = in.mmd_train - in.c1 * in.proxy -
            c2 * std::sqrt(std::log(2.0 / in.delta_prime) / static_cast<double>(in.n_train));
  out.rhs = kMcDiarmidConstant * in.nu *
            std::sqrt((std::log(2.0 / in.alpha) + std::log(2.0 / in.delta)) / static_cast<double>(in.n_holdout));
  out.satisfied = out.lhs >= out.rhs;
  out.permutation_slack = in.n_perm > 0 ? 1.0 / (in.n_perm + 1.0) : 0.0;
  return out;
}

}  // namespace cpmmd

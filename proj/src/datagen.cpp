#include "cpmmd/datagen.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "cpmmd/errors.hpp"
#include "cpmmd/rng.hpp"

namespace cpmmd {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Matrix standard_normal(Index n, Index d, Rng& rng) {
  std::normal_distribution<double> z;
  Matrix out(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) out(i, j) = z(rng);
  return out;
}

}  // namespace

int family_dim(const DistributionFamily& family) {
  return std::visit(Overloaded{[](const GaussianMeanShift& f) { return f.dim; },
                               [](const MultiScaleMixture2D&) { return 2; },
                               [](const ScaledStudentT& f) { return f.dim; }, [](const GaussianScale&) { return 1; }},
                    family);
}

std::string describe_family(const DistributionFamily& family) {
  std::ostringstream os;
  std::visit(Overloaded{[&](const GaussianMeanShift& f) { os << "gaussian-mean-shift(d=" << f.dim << ",shift=" << f.shift << ")"; },
                        [&](const MultiScaleMixture2D& f) {
                          os << "multiscale-mixture(shift=" << f.shift << ",mode_var=" << f.mode_var << ")";
                        },
                        [&](const ScaledStudentT& f) { os << "scaled-student-t(d=" << f.dim << ",df=" << f.df << ")"; },
                        [&](const GaussianScale& f) { os << "gaussian-scale(s=" << f.scale << ")"; }},
             family);
  return os.str();
}

Matrix sample(const DistributionSpec& spec, Index n, std::uint64_t seed) {
  if (n < 1) throw ContractViolation("sample size must be at least 1");
  Rng rng = make_rng(seed);
  const bool q = spec.role == Role::Q;
  return std::visit(
      Overloaded{
          [&](const GaussianMeanShift& f) -> Matrix {
            if (f.dim < 1) throw ContractViolation("dimension must be at least 1");
            Matrix out = standard_normal(n, f.dim, rng);
            if (q) out.array() += f.shift;
            return out;
          },
          [&](const MultiScaleMixture2D& f) -> Matrix {
            if (!(f.mode_var > 0)) throw ContractViolation("mode variance must be positive");
            std::bernoulli_distribution coin(0.5);
            std::normal_distribution<double> z;
            const double sd = std::sqrt(f.mode_var);
            Matrix out(n, 2);
            for (Index i = 0; i < n; ++i) {
              const double centre = (coin(rng) ? 3.0 : 0.0) + (q ? f.shift : 0.0);
              out(i, 0) = centre + sd * z(rng);
              out(i, 1) = sd * z(rng);
            }
            return out;
          },
          [&](const ScaledStudentT& f) -> Matrix {
            if (!(f.df > 2)) throw ContractViolation("Student-t degrees of freedom must exceed 2");
            if (f.dim < 1) throw ContractViolation("dimension must be at least 1");
            if (!q) return standard_normal(n, f.dim, rng);
            std::normal_distribution<double> z;
            std::chi_squared_distribution<double> chi2(f.df);
            const double scale = std::sqrt((f.df - 2.0) / f.df);
            Matrix out(n, f.dim);
            for (Index i = 0; i < n; ++i) {
              for (Index j = 0; j < f.dim; ++j) out(i, j) = z(rng);
              // one chi-squared draw per point: multivariate t
              out.row(i) *= scale / std::sqrt(chi2(rng) / f.df);
            }
            return out;
          },
          [&](const GaussianScale& f) -> Matrix {
            if (!(f.scale > 0)) throw ContractViolation("scale must be positive");
            Matrix out = standard_normal(n, 1, rng);
            if (q) out *= f.scale;
            return out;
          }},
      spec.family);
}

TwoSampleData sample_pair(const DistributionFamily& family, Index m, Index n, std::uint64_t seed) {
  return {sample({family, Role::P}, m, derive_seed(seed, 0, "sample-p")),
          sample({family, Role::Q}, n, derive_seed(seed, 0, "sample-q"))};
}

}  // namespace cpmmd

#include "cpmmd/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cpmmd/criterion.hpp"
#include "cpmmd/parallel.hpp"
#include "cpmmd/rng.hpp"

namespace cpmmd {

std::vector<int> DeepClass::widths(int input_dim) const {
  std::vector<int> w{input_dim};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(output_dim);
  return w;
}

namespace {

int parse_positive(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    throw ConfigError("invalid " + what + ": '" + s + "'");
  }
  if (used != s.size() || v < 1) throw ConfigError("invalid " + what + ": '" + s + "'");
  return v;
}

}  // namespace

KernelClass parse_kernel_class(const std::string& text) {
  if (text == "linear") return LinearClass{};
  if (text.rfind("poly:", 0) == 0) return PolynomialClass{parse_positive(text.substr(5), "polynomial degree"), {}};
  if (text == "deep") return DeepClass{};
  if (text.rfind("deep:", 0) == 0) {
    DeepClass cls;
    std::string spec = text.substr(5);
    if (auto slash = spec.find('/'); slash != std::string::npos) {
      cls.output_dim = parse_positive(spec.substr(slash + 1), "output width");
      spec = spec.substr(0, slash);
    }
    cls.hidden.clear();
    std::replace(spec.begin(), spec.end(), 'x', ',');
    if (spec.empty() || spec.back() == ',') throw ConfigError("malformed deep regime '" + text + "'");
    std::stringstream ss(spec);
    for (std::string item; std::getline(ss, item, ',');) cls.hidden.push_back(parse_positive(item, "hidden width"));
    if (cls.hidden.empty()) throw ConfigError("deep regime needs at least one hidden width");
    return cls;
  }
  throw ConfigError("unknown regime '" + text + "' (expected linear, poly:p or deep)");
}

std::string describe_kernel_class(const KernelClass& cls) {
  if (std::holds_alternative<LinearClass>(cls)) return "linear";
  if (const auto* p = std::get_if<PolynomialClass>(&cls)) return "poly:" + std::to_string(p->degree);
  const auto& d = std::get<DeepClass>(cls);
  std::string s = "deep:";
  for (std::size_t i = 0; i < d.hidden.size(); ++i) s += (i ? "x" : "") + std::to_string(d.hidden[i]);
  return s + "/" + std::to_string(d.output_dim);
}

std::pair<double, QuantileConvention> calibration_order_statistic(std::vector<double> ratios, double alpha) {
  if (ratios.empty()) throw ContractViolation("no calibration ratios");
  if (!(alpha > 0 && alpha < 1)) throw ContractViolation("alpha must lie in (0, 1)");
  std::sort(ratios.begin(), ratios.end());
  const auto n = static_cast<double>(ratios.size());
  const auto r = static_cast<std::size_t>(std::ceil((1.0 - alpha) * (n + 1.0) - 1e-12));
  if (r > ratios.size()) return {ratios.back(), QuantileConvention::Max};
  return {ratios[std::max<std::size_t>(r, 1) - 1], QuantileConvention::Quantile};
}

namespace {

struct PlainMax {
  double mmd = 0.0;
  double proxy = 0.0;
};

PlainMax plain_maximizer(const KernelClass& cls, const PooledSample& permuted, const BandwidthObjective* objective,
                         const OptimizerConfig& optimizer, std::uint64_t init_seed) {
  if (objective != nullptr) {
    const LinearClass* lin = std::get_if<LinearClass>(&cls);
    const auto range = lin ? lin->sigma_range : std::get<PolynomialClass>(cls).sigma_range;
    const ScalarSelection s = select_scalar_bandwidth(Criterion::Plain, *objective, range, 0.0);
    const auto& rec = s.trajectory.selected_record();
    return {rec.mmd, rec.proxy};
  }
  const auto& deep = std::get<DeepClass>(cls);
  const MlpMap init = MlpMap::glorot(deep.widths(static_cast<int>(permuted.dim())), init_seed);
  const DeepSelection s = select_deep(Criterion::Plain, permuted, init, optimizer, 0.0);
  const auto& rec = s.trajectory.selected_record();
  return {rec.mmd, rec.proxy};
}

}  // namespace

CalibrationResult calibrate_c1(const KernelClass& cls, const PooledSample& train, int n_cal, double alpha,
                               const OptimizerConfig& optimizer, std::uint64_t seed) {
  if (n_cal < 1) throw ContractViolation("n_cal must be at least 1");
  if (train.m() < 2 || train.n() < 2) throw InsufficientSample("calibration needs at least 2 points per class");

  CalibrationResult out;
  out.n_cal = n_cal;
  out.alpha = alpha;
  out.ratios.assign(static_cast<std::size_t>(n_cal), 0.0);
  out.mmds.assign(out.ratios.size(), 0.0);
  out.proxies.assign(out.ratios.size(), 0.0);

  const int N = static_cast<int>(train.total());
  const Matrix Z = train.pooled();
  const bool scalar = !std::holds_alternative<DeepClass>(cls);
  std::optional<BandwidthObjective> base_objective;
  if (scalar) {
    const BandwidthFamily family = std::holds_alternative<LinearClass>(cls)
                                       ? BandwidthFamily::linear()
                                       : BandwidthFamily::polynomial(std::get<PolynomialClass>(cls).degree);
    base_objective.emplace(family, train);
  }

  // Permutations are drawn up front so the result does not depend on
  // scheduling.
  std::vector<std::vector<int>> orders;
  for (int k = 0; k < n_cal; ++k) {
    Rng rng = make_rng(derive_seed(seed, static_cast<std::uint64_t>(k), "calibration-permutation"));
    orders.push_back(random_permutation(N, rng));
  }

  parallel_for_index(n_cal, [&](int k) {
    const auto idx = static_cast<std::size_t>(k);
    PlainMax pm;
    if (scalar) {
      const BandwidthObjective obj = base_objective->relabeled(orders[idx]);
      pm = plain_maximizer(cls, train, &obj, optimizer, 0);
    } else {
      Matrix P(N, Z.cols());
      for (int i = 0; i < N; ++i) P.row(i) = Z.row(orders[idx][static_cast<std::size_t>(i)]);
      const PooledSample permuted(P.topRows(train.m()), P.bottomRows(train.n()));
      pm = plain_maximizer(cls, permuted, nullptr, optimizer,
                           derive_seed(seed, static_cast<std::uint64_t>(k), "calibration-init"));
    }
    if (!(pm.proxy > 0)) throw DegenerateProxy("complexity proxy is zero at a calibration maximizer");
    out.mmds[idx] = pm.mmd;
    out.proxies[idx] = pm.proxy;
    out.ratios[idx] = pm.mmd / pm.proxy;
  });

  const auto [value, convention] = calibration_order_statistic(out.ratios, alpha);
  out.convention = convention;
  out.c1_hat = value;
  if (std::all_of(out.ratios.begin(), out.ratios.end(), [](double r) { return r < 0; })) {
    out.negative_warning = true;
    out.c1_hat = 0.0;
    out.note = "all calibration ratios negative; c1_hat floored at 0";
  }
  const auto tiny = std::count_if(out.ratios.begin(), out.ratios.end(), [](double r) { return r < kDegenerateRatio; });
  if (2 * tiny > n_cal) {
    out.degenerate_warning = true;
    if (!out.note.empty()) out.note += "; ";
    out.note += "degenerate calibration: calibrate at the largest well-behaved width and reuse that value";
  }
  out.c1_hat = std::max(out.c1_hat, 0.0);
  return out;
}

}  // namespace cpmmd

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "cpmmd/criterion.hpp"
#include "cpmmd/datagen.hpp"
#include "cpmmd/errors.hpp"
#include "cpmmd/selection.hpp"
#include "helpers.hpp"

using namespace cpmmd;

namespace {

PooledSample small_alternative(std::uint64_t seed, int m = 12, int d = 3, double shift = 0.8) {
  const TwoSampleData data = sample_pair(GaussianMeanShift{d, shift}, m, m, seed);
  return PooledSample(data.x, data.y);
}

bool same_records(const Trajectory& a, const Trajectory& b) {
  if (a.records.size() != b.records.size() || a.selected != b.selected) return false;
  auto eq = [](double x, double y) { return (std::isnan(x) && std::isnan(y)) || x == y; };
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const auto &r = a.records[i], &s = b.records[i];
    if (r.step != s.step || !eq(r.criterion, s.criterion) || !eq(r.mmd, s.mmd) || !eq(r.proxy, s.proxy) ||
        !eq(r.lipschitz, s.lipschitz) || !eq(r.grad_norm, s.grad_norm) || !eq(r.j_liu, s.j_liu) ||
        !eq(r.tau, s.tau) || !eq(r.sigma, s.sigma))
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("median heuristic examples") {
  Matrix a(2, 1);
  a << 0, 2;
  CHECK(median_heuristic(a) == 2.0);
  Matrix b(3, 1);
  b << 0, 1, 3;
  CHECK(median_heuristic(b) == 2.0);
  Matrix c(4, 1);
  c << 0, 1, 3, 7;  // {1, 3, 7, 2, 6, 4}: central pair 3, 4
  CHECK(median_heuristic(c) == 3.5);
  CHECK_THROWS_AS(median_heuristic(Matrix::Zero(3, 1)), DegenerateBandwidth);
  Matrix x(1, 1), y(1, 1);
  x << 0;
  y << 2;
  CHECK(median_heuristic(PooledSample(x, y)) == 2.0);
}

TEST_CASE("scalar selection with a constant criterion returns the first grid point") {
  const PooledSample s = small_alternative(1);
  const BandwidthFamily fam{0, KernelSpec::constant_kernel(0.5)};
  const ScalarSelection sel = select_scalar_bandwidth(Criterion::Plain, fam, s, std::make_pair(0.1, 10.0), 0.0);
  CHECK(sel.sigma == doctest::Approx(0.1));
  CHECK(sel.trajectory.selected == 0);
  CHECK(sel.trajectory.records.size() == kBandwidthGridPoints + 1);
  CHECK_THROWS_AS(select_scalar_bandwidth(Criterion::Plain, fam, s, std::make_pair(1.0, 1.0), 0.0), ContractViolation);
  CHECK_THROWS_AS(select_scalar_bandwidth(Criterion::Liu, fam, s, std::nullopt, 0.0), UnsupportedConfiguration);
}

TEST_CASE("scalar selection maximizes over the recorded grid and refinement") {
  const PooledSample s = small_alternative(2, 40, 2, 0.5);
  for (const BandwidthFamily& fam : {BandwidthFamily::linear(), BandwidthFamily::polynomial(2)}) {
    for (Criterion c : {Criterion::Plain, Criterion::ComplexityPenalized}) {
      const ScalarSelection sel = select_scalar_bandwidth(c, fam, s, std::nullopt, 0.01);
      const auto& rec = sel.trajectory.selected_record();
      for (const auto& r : sel.trajectory.records) CHECK(rec.criterion >= r.criterion);
      CHECK(rec.sigma == sel.sigma);
      const BandwidthObjective obj(fam, s);
      CHECK(obj.criterion(c, sel.sigma, 0.01) == doctest::Approx(rec.criterion).epsilon(1e-12));
      // the returned kernel reproduces the recorded statistic
      CHECK(mmd_unbiased(gram_blocks(sel.kernel, s.x(), s.y())) == doctest::Approx(rec.mmd).epsilon(1e-9));
      const auto [lo, hi] = obj.default_range();
      CHECK(sel.sigma >= lo);
      CHECK(sel.sigma <= hi);
    }
  }
}

TEST_CASE("linear objective matches direct kernels and the proxy formula") {
  const PooledSample s = small_alternative(3, 10, 2);
  const BandwidthObjective obj(BandwidthFamily::linear(), s);
  for (double sigma : {0.3, 1.0, 4.0}) {
    const CompositeKernel k{KernelSpec::gaussian(), LinearMap{sigma, 2}};
    CHECK(obj.mmd(sigma) == doctest::Approx(mmd_unbiased(gram_blocks(k, s.x(), s.y()))).epsilon(1e-10));
    CHECK(obj.proxy(sigma) == doctest::Approx(complexity_proxy(k.feature, s)));
  }
  CHECK(obj.median_feature_distance() == doctest::Approx(median_heuristic(s)));
}

TEST_CASE("empirical bandwidth bracket contains the population optimum") {
  // oracle: population MMD of N(0,1) vs N(0,4) over a fine sigma grid
  double best_sigma = 0, best = -1;
  for (double ls = std::log(0.05); ls < std::log(50.0); ls += 1e-3) {
    const double v = population_mmd_gaussian_oracle(std::exp(ls), 1, 2);
    if (v > best) {
      best = v;
      best_sigma = std::exp(ls);
    }
  }
  const TwoSampleData data = sample_pair(GaussianScale{2.0}, 1000, 1000, 7);
  const PooledSample s(data.x, data.y);
  const BandwidthObjective obj(BandwidthFamily::linear(), s);
  const auto range = obj.default_range();
  const ScalarSelection sel = select_scalar_bandwidth(Criterion::Plain, obj, range, 0.0);
  std::size_t k = 0;
  for (std::size_t i = 1; i < static_cast<std::size_t>(kBandwidthGridPoints); ++i)
    if (sel.trajectory.records[i].criterion > sel.trajectory.records[k].criterion) k = i;
  const double ratio = std::exp(std::log(range.second / range.first) / (kBandwidthGridPoints - 1));
  const double grid_sigma = sel.trajectory.records[k].sigma;
  CHECK(sel.sigma >= grid_sigma / ratio);
  CHECK(sel.sigma <= grid_sigma * ratio);
  CHECK(best_sigma >= grid_sigma / ratio);
  CHECK(best_sigma <= grid_sigma * ratio);
}

TEST_CASE("relabeled objective equals an objective on the relabeled sample") {
  const PooledSample s = small_alternative(4, 6, 2);
  const BandwidthObjective obj(BandwidthFamily::linear(), s);
  std::vector<int> order = {11, 3, 5, 0, 8, 1, 2, 4, 6, 7, 9, 10};
  const Matrix Z = s.pooled();
  Matrix P(12, 2);
  for (int i = 0; i < 12; ++i) P.row(i) = Z.row(order[i]);
  const BandwidthObjective direct(BandwidthFamily::linear(), PooledSample(P.topRows(6), P.bottomRows(6)));
  CHECK(obj.relabeled(order).mmd(0.7) == doctest::Approx(direct.mmd(0.7)).epsilon(1e-12));
}

TEST_CASE("deep selection with zero steps returns the initial map") {
  const PooledSample s = small_alternative(5);
  const MlpMap init = MlpMap::glorot({3, 6, 2}, 3);
  OptimizerConfig cfg;
  cfg.steps = 0;
  for (Criterion c : {Criterion::ComplexityPenalized, Criterion::Plain, Criterion::Liu}) {
    const DeepSelection sel = select_deep(c, s, init, cfg, 0.01);
    REQUIRE(sel.trajectory.records.size() == 1);
    for (std::size_t j = 0; j < init.layers.size(); ++j) {
      CHECK(sel.map.layers[j].weight == init.layers[j].weight);
      CHECK(sel.map.layers[j].bias == init.layers[j].bias);
    }
  }
}

TEST_CASE("deep trajectory argmax, clip contract and final-iterate baselines") {
  const PooledSample s = small_alternative(6, 15, 4);
  const MlpMap init = MlpMap::glorot({4, 8, 8, 3}, 11);
  OptimizerConfig cfg;
  cfg.steps = 40;
  cfg.clip_norm = 0.05;
  cfg.learning_rate = 0.02;
  const DeepSelection cp = select_deep(Criterion::ComplexityPenalized, s, init, cfg, 0.05);
  REQUIRE(cp.trajectory.records.size() == 41);
  const auto& best = cp.trajectory.selected_record();
  bool clipped = false;
  for (const auto& r : cp.trajectory.records) {
    CHECK(best.criterion >= r.criterion);
    if (r.step < cfg.steps) {
      CHECK(r.grad_norm <= cfg.clip_norm + 1e-9);
      clipped = clipped || r.grad_norm == cfg.clip_norm;
    }
    CHECK(r.criterion == doctest::Approx(j_cp(r.mmd, 0.05, r.proxy)));
  }
  CHECK(clipped);
  // earliest index among ties
  for (std::size_t t = 0; t < cp.trajectory.selected; ++t)
    CHECK(cp.trajectory.records[t].criterion < best.criterion);
  // the returned map is the selected iterate
  const DeepEvaluation ev = evaluate_deep(Criterion::ComplexityPenalized, cp.map, s, 0.05, 1e-8, false);
  CHECK(ev.criterion == best.criterion);
  CHECK(cp.trajectory.max_proxy() >= best.proxy);

  for (Criterion c : {Criterion::Plain, Criterion::Liu}) {
    const DeepSelection sel = select_deep(c, s, init, cfg, 0.0);
    CHECK(sel.trajectory.selected == static_cast<std::size_t>(cfg.steps));
    CHECK(evaluate_deep(c, sel.map, s, 0.0, cfg.liu_lambda, false).criterion == sel.trajectory.final_record().criterion);
  }
  const DeepSelection liu = select_deep(Criterion::Liu, s, init, cfg, 0.0);
  CHECK(std::isfinite(liu.trajectory.final_record().tau));
  CHECK(std::isfinite(liu.trajectory.final_record().j_liu));
}

TEST_CASE("deep selection is deterministic at the record level") {
  const PooledSample s = small_alternative(7, 10, 3);
  const MlpMap init = MlpMap::glorot({3, 6, 6, 2}, 2);
  OptimizerConfig cfg;
  cfg.steps = 15;
  for (Criterion c : {Criterion::ComplexityPenalized, Criterion::Plain, Criterion::Liu}) {
    const DeepSelection a = select_deep(c, s, init, cfg, 0.02), b = select_deep(c, s, init, cfg, 0.02);
    CHECK(same_records(a.trajectory, b.trajectory));
  }
}

TEST_CASE("non-finite values abort with the last finite record") {
  const PooledSample s = small_alternative(8, 8, 2);
  const MlpMap init = MlpMap::glorot({2, 4, 2}, 1);
  OptimizerConfig cfg;
  cfg.steps = 5;

  Matrix bad = s.x();
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    select_deep(Criterion::Plain, PooledSample(bad, s.y()), init, cfg, 0.0);
    FAIL("expected an abort");
  } catch (const NumericalAbort& e) {
    CHECK_FALSE(e.last_finite().has_value());
  }

  cfg.learning_rate = 1e300;
  try {
    select_deep(Criterion::Plain, s, init, cfg, 0.0);
    FAIL("expected an abort");
  } catch (const NumericalAbort& e) {
    REQUIRE(e.last_finite().has_value());
    CHECK(std::isfinite(e.last_finite()->criterion));
  }
}

TEST_CASE("ratio criterion requires balanced classes") {
  const TwoSampleData d = sample_pair(GaussianMeanShift{2, 0.0}, 5, 6, 1);
  OptimizerConfig cfg;
  cfg.steps = 1;
  CHECK_THROWS_AS(select_deep(Criterion::Liu, PooledSample(d.x, d.y), MlpMap::glorot({2, 3, 2}, 1), cfg, 0.0),
                  UnsupportedConfiguration);
}

TEST_CASE("grid argmax examples") {
  const PooledSample s = small_alternative(9, 20, 2);
  const std::vector<CompositeKernel> one = {{KernelSpec::gaussian(), LinearMap{1.0, 2}}};
  const GridSelection g1 = grid_argmax_selector(one, s, 0.05);
  CHECK(g1.index == 0);
  CHECK(g1.regret_bound == doctest::Approx(2 * 4 * 2.0 * std::sqrt(std::log(2 / 0.05) / 40)));
  const std::vector<CompositeKernel> twins = {one[0], one[0]};
  CHECK(grid_argmax_selector(twins, s, 0.05).index == 0);
  const auto grid = dyadic_bandwidth_grid(2, 1.0, 5);
  REQUIRE(grid.size() == 10);
  const GridSelection g = grid_argmax_selector(grid, s, 0.05);
  for (double v : g.mmds) CHECK(g.mmds[g.index] >= v);
  CHECK(std::get<LinearMap>(grid[2].feature).sigma == doctest::Approx(1.0));
  CHECK(std::get<LinearMap>(grid[0].feature).sigma == doctest::Approx(0.25));
  CHECK(grid[5].base.family == KernelFamily::LaplacianUnit);
  CHECK_THROWS_AS(grid_argmax_selector({}, s, 0.05), ContractViolation);
}

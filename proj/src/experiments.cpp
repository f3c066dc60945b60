#include "cpmmd/experiments.hpp"

#include "cpmmd/parallel.hpp"
#include "cpmmd/rng.hpp"

namespace cpmmd {

PowerCellResult run_power_cell(const PowerCellConfig& cfg, const Method& method) {
  if (cfg.reps < 1) throw ConfigError("reps must be at least 1");
  PowerCellResult out;
  out.reports.resize(static_cast<std::size_t>(cfg.reps));
  parallel_for_index(cfg.reps, [&](int r) {
    const auto rep = static_cast<std::uint64_t>(r);
    const TwoSampleData data =
        sample_pair(cfg.family, cfg.n_per_class, cfg.n_per_class, derive_seed(cfg.cell_seed, rep, "data"));
    TestConfig tc = cfg.test;
    tc.seed = derive_seed(cfg.cell_seed, rep, "test");
    TestReport report;
    if (const auto* cls = std::get_if<KernelClass>(&method.kind)) {
      report = run_cpmmd_test(data.x, data.y, *cls, tc, cfg.optimizer, cfg.c1_override);
    } else {
      report = run_baseline_test(data.x, data.y, std::get<Baseline>(method.kind), tc, cfg.optimizer,
                                 method.baseline_options);
    }
    report.method = method.name;
    out.reports[static_cast<std::size_t>(r)] = std::move(report);
  });
  std::vector<bool> decisions;
  for (const auto& rep : out.reports) decisions.push_back(rep.reject);
  out.rate = rate_from_decisions(decisions);
  return out;
}

bool is_collapsed(double mmd, double tau, double j_liu) { return mmd < 0.01 && tau < 0.001 && j_liu > 10.0; }

CollapseRow run_collapse(const CollapseConfig& cfg, int width, int seed_index) {
  const auto idx = static_cast<std::uint64_t>(seed_index);
  const TwoSampleData data = sample_pair(GaussianMeanShift{cfg.dim, 0.0}, cfg.n_per_class, cfg.n_per_class,
                                         derive_seed(cfg.seed, idx, "collapse-data"));
  const PooledSample sample(data.x, data.y);
  const MlpMap init = MlpMap::glorot({cfg.dim, width, width, cfg.output_dim},
                                     derive_seed(cfg.seed, idx, "collapse-init-" + std::to_string(width)));
  OptimizerConfig opt = cfg.optimizer;
  opt.steps = cfg.steps;
  const DeepSelection sel = select_deep(Criterion::Liu, sample, init, opt, 0.0);
  const TrajectoryRecord& last = sel.trajectory.final_record();

  CollapseRow row;
  row.width = width;
  row.seed_index = seed_index;
  row.steps = cfg.steps;
  row.j_liu = last.j_liu;
  row.mmd = last.mmd;
  row.tau = last.tau;
  row.proxy = last.proxy;
  row.j_cp = last.mmd - cfg.c1 * last.proxy;
  row.collapsed = is_collapsed(row.mmd, row.tau, row.j_liu);
  return row;
}

}  // namespace cpmmd

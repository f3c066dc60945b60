#include "cpmmd/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cpmmd/calibration.hpp"
#include "cpmmd/csv.hpp"
#include "cpmmd/datagen.hpp"
#include "cpmmd/experiments.hpp"
#include "cpmmd/parallel.hpp"
#include "cpmmd/pipeline.hpp"
#include "cpmmd/rng.hpp"

namespace cpmmd {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<std::string> split_list(const std::string& text, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, sep);)
    if (!item.empty()) out.push_back(item);
  return out;
}

double parse_double(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ConfigError("invalid " + what + ": '" + s + "'");
  }
  if (used != s.size() || !std::isfinite(v)) throw ConfigError("invalid " + what + ": '" + s + "'");
  return v;
}

int parse_int(const std::string& s, const std::string& what) {
  const double v = parse_double(s, what);
  if (v != std::floor(v) || v < 1 || v > 1e9) throw ConfigError("invalid " + what + ": '" + s + "'");
  return static_cast<int>(v);
}

std::vector<double> parse_double_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) out.push_back(parse_double(item, what));
  if (out.empty()) throw ConfigError(what + " is empty");
  return out;
}

// Options shared by the commands that run the pipeline.
struct PipelineFlags {
  double alpha = 0.05;
  int n_perm = 200;
  int n_cal = 10;
  double split = 0.5;
  double delta = 0.05;
  int steps = 100;
  double lr = 0.005;
  double clip = 5.0;
  std::optional<double> c1;

  void add(CLI::App* cmd, bool with_c1 = true) {
    cmd->add_option("--alpha", alpha, "Test level")->capture_default_str();
    cmd->add_option("--n-perm", n_perm, "Permutations of the held-out test")->capture_default_str();
    cmd->add_option("--n-cal", n_cal, "Calibration permutations")->capture_default_str();
    cmd->add_option("--split", split, "Training fraction per class")->capture_default_str();
    cmd->add_option("--delta", delta, "Confidence parameter of the certificates")->capture_default_str();
    cmd->add_option("--steps", steps, "Adam steps in the deep regime")->capture_default_str();
    cmd->add_option("--lr", lr, "Adam learning rate")->capture_default_str();
    cmd->add_option("--clip", clip, "Global gradient-norm clip")->capture_default_str();
    if (with_c1) cmd->add_option("--c1", c1, "Inject a penalty coefficient and skip calibration");
  }

  TestConfig test_config(std::uint64_t seed) const {
    TestConfig t;
    t.alpha = alpha;
    t.n_perm = n_perm;
    t.n_cal = n_cal;
    t.split_fraction = split;
    t.delta = delta;
    t.delta_prime = delta;
    t.seed = seed;
    t.validate();
    return t;
  }

  OptimizerConfig optimizer() const {
    if (steps < 0) throw ConfigError("steps must be nonnegative");
    if (!(lr > 0) || !(clip > 0)) throw ConfigError("learning rate and clip norm must be positive");
    OptimizerConfig o;
    o.steps = steps;
    o.learning_rate = lr;
    o.clip_norm = clip;
    return o;
  }
};

struct Context {
  std::ostream& out;
  std::ostream& err;
  std::vector<std::string> args;
  std::uint64_t seed = 0;
  std::string seed_source = "default";
  int threads = 0;
  std::string started;
};

json option_values(const CLI::App* cmd) {
  json cfg = json::object();
  for (const CLI::Option* opt : cmd->get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string& name = opt->get_lnames().front();
    if (name == "help") continue;
    if (opt->count() > 0) {
      const auto& res = opt->results();
      cfg[name] = res.size() == 1 ? json(res.front()) : json(res);
    } else {
      cfg[name] = opt->get_default_str();
    }
  }
  return cfg;
}

void write_manifest(const Context& ctx, const CLI::App* cmd, const std::string& output, json extra = json::object()) {
  json m;
  m["command"] = cmd->get_name();
  m["args"] = ctx.args;
  m["config"] = option_values(cmd);
  m["seed"] = ctx.seed;
  m["seed_source"] = ctx.seed_source;
  m["threads"] = ctx.threads;
  m["tool_version"] = kToolVersion;
  m["started"] = ctx.started;
  m["finished"] = timestamp();
  m["outputs"] = json::array({output});
  for (auto& [k, v] : extra.items()) m[k] = v;
  std::ofstream f(output + ".manifest.json");
  if (!f) throw ConfigError("cannot write manifest for '" + output + "'");
  f << m.dump(2) << '\n';
}

std::ofstream open_output(const std::string& path) {
  if (const fs::path parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write '" + path + "'");
  return f;
}

// ---------------------------------------------------------------------------

struct TestFlags {
  std::string x, y, regime = "deep", out = "cpmmd_report.csv";
  PipelineFlags pipeline;
};

void cmd_test(Context& ctx, const CLI::App* cmd, const TestFlags& f) {
  const KernelClass cls = parse_kernel_class(f.regime);
  const TestConfig tc = f.pipeline.test_config(ctx.seed);
  const PooledSample data = load_csv_pair(f.x, f.y);
  const TestReport r = run_cpmmd_test(data.x(), data.y(), cls, tc, f.pipeline.optimizer(), f.pipeline.c1);

  std::ofstream os = open_output(f.out);
  CsvWriter w(os);
  w.header({"reject", "p_value", "statistic", "c_alpha", "c1_hat", "selected_kernel", "certificate_lhs",
            "certificate_rhs", "certificate_satisfied", "trajectory_lower_bound", "c1_injected", "n_train", "n_test"});
  w.cell(r.reject)
      .cell(r.p_value)
      .cell(r.statistic)
      .cell(r.c_alpha)
      .cell(r.c1_hat)
      .cell(r.selected_kernel)
      .cell(r.power_certificate.lhs)
      .cell(r.power_certificate.rhs)
      .cell(r.power_certificate.satisfied)
      .cell(r.certificate.lower_bound)
      .cell(r.c1_injected)
      .cell(static_cast<long long>(r.n_train))
      .cell(static_cast<long long>(r.n_test));
  w.end_row();
  os.close();

  json extra;
  extra["c1_injected"] = r.c1_injected;
  if (r.calibration) {
    extra["calibration"] = {{"c1_hat", r.calibration->c1_hat},
                            {"ratios", r.calibration->ratios},
                            {"convention", r.calibration->convention == QuantileConvention::Max ? "max" : "quantile"},
                            {"degenerate_warning", r.calibration->degenerate_warning},
                            {"note", r.calibration->note}};
    if (!r.calibration->note.empty()) ctx.err << "warning: " << r.calibration->note << '\n';
  }
  write_manifest(ctx, cmd, f.out, extra);
  ctx.out << (r.reject ? "reject" : "retain") << " H0: p = " << format_double(r.p_value)
          << ", statistic = " << format_double(r.statistic) << ", c1_hat = " << format_double(r.c1_hat)
          << (r.c1_injected ? " (injected)" : "") << "\nkernel: " << r.selected_kernel << '\n';
}

// ---------------------------------------------------------------------------

struct SweepFlags {
  std::string experiment, grid, out = "results";
  int reps = 50;
  int width = 200;
  std::optional<int> n;
  double shift = 0.5;
  int degree = 4;
  int grid_per_family = 5;
  PipelineFlags pipeline;
};

struct SweepCell {
  DistributionFamily family;
  Index n = 0;
  int d = 0;
  double param = 0.0;
};

void cmd_power_sweep(Context& ctx, const CLI::App* cmd, const SweepFlags& f) {
  if (f.reps < 1) throw ConfigError("reps must be at least 1");
  if (f.width < 1) throw ConfigError("width must be at least 1");
  std::vector<SweepCell> cells;
  std::vector<Method> methods;
  DeepClass arch{{f.width, f.width}, 10};

  if (f.experiment == "multiscale") {
    const Index n = f.n.value_or(200);
    for (double s : parse_double_list(f.grid.empty() ? "0,0.05,0.1,0.15,0.2,0.3" : f.grid, "shift grid"))
      cells.push_back({MultiScaleMixture2D{s, 0.01}, n, 2, s});
    methods.push_back({"cpmmd", KernelClass{LinearClass{}}, {}});
    methods.push_back({"median", Baseline::Median, {}});
  } else if (f.experiment == "kurtosis") {
    const Index n = f.n.value_or(500);
    for (double df : parse_double_list(f.grid.empty() ? "5,8,12,20" : f.grid, "df grid")) {
      if (!(df > 2)) throw ConfigError("degrees of freedom must exceed 2");
      cells.push_back({ScaledStudentT{10, df}, n, 10, df});
    }
    methods.push_back({"cpmmd_poly", KernelClass{PolynomialClass{f.degree, {}}}, {}});
    methods.push_back({"grid_argmax", Baseline::GridArgmax, {arch, f.grid_per_family}});
  } else if (f.experiment == "hdgm") {
    for (const auto& item : split_list(f.grid.empty() ? "2:200,20:200,50:100,100:100,20:50" : f.grid)) {
      const auto parts = split_list(item, ':');
      if (parts.size() != 2) throw ConfigError("hdgm cells are d:n, got '" + item + "'");
      const int d = parse_int(parts[0], "dimension");
      const int n = parse_int(parts[1], "sample size");
      cells.push_back({GaussianMeanShift{d, f.shift}, n, d, f.shift});
    }
    methods.push_back({"cpmmd", KernelClass{arch}, {}});
    methods.push_back({"liu", Baseline::Liu, {arch, f.grid_per_family}});
    methods.push_back({"plain", Baseline::Plain, {arch, f.grid_per_family}});
  } else {
    throw ConfigError("unknown experiment '" + f.experiment + "' (expected multiscale, kurtosis or hdgm)");
  }
  if (cells.empty()) throw ConfigError("grid is empty");

  const std::string path = (fs::path(f.out) / ("power_" + f.experiment + ".csv")).string();
  std::ofstream os = open_output(path);
  CsvWriter w(os);
  w.header({"experiment", "cell", "d", "n", "param", "method", "power", "se", "reps", "c1_mean"});
  for (std::size_t c = 0; c < cells.size(); ++c) {
    PowerCellConfig pc;
    pc.family = cells[c].family;
    pc.n_per_class = cells[c].n;
    pc.reps = f.reps;
    pc.cell_seed = derive_seed(ctx.seed, c, "cell");
    pc.test = f.pipeline.test_config(0);
    pc.optimizer = f.pipeline.optimizer();
    pc.c1_override = f.pipeline.c1;
    for (const Method& method : methods) {
      const PowerCellResult res = run_power_cell(pc, method);
      double c1_mean = 0.0;
      for (const auto& r : res.reports) c1_mean += r.c1_hat / static_cast<double>(res.reports.size());
      w.cell(f.experiment)
          .cell(static_cast<long long>(c))
          .cell(cells[c].d)
          .cell(static_cast<long long>(cells[c].n))
          .cell(cells[c].param)
          .cell(method.name)
          .cell(res.rate.rate)
          .cell(res.rate.se)
          .cell(res.rate.n_reps)
          .cell(c1_mean);
      w.end_row();
      os.flush();
      ctx.out << f.experiment << " cell " << c << " (" << describe_family(cells[c].family) << ") " << method.name
              << ": power " << format_double(res.rate.rate) << " +- " << format_double(res.rate.se) << '\n';
    }
  }
  os.close();
  write_manifest(ctx, cmd, path);
}

// ---------------------------------------------------------------------------

struct CollapseFlags {
  std::string widths = "10,50,200";
  int seeds = 10;
  int steps = 200;
  int n = 200;
  int dim = 10;
  double c1 = 0.008;
  std::string out = "collapse.csv";
};

void cmd_collapse(Context& ctx, const CLI::App* cmd, const CollapseFlags& f) {
  if (f.seeds < 1) throw ConfigError("seeds must be at least 1");
  if (f.steps < 0) throw ConfigError("steps must be nonnegative");
  if (f.n < 2 || f.dim < 1) throw ConfigError("need n >= 2 and dim >= 1");
  std::vector<int> widths;
  for (const auto& item : split_list(f.widths)) widths.push_back(parse_int(item, "width"));
  if (widths.empty()) throw ConfigError("width list is empty");

  CollapseConfig cc;
  cc.n_per_class = f.n;
  cc.dim = f.dim;
  cc.steps = f.steps;
  cc.c1 = f.c1;
  cc.seed = ctx.seed;
  const int total = static_cast<int>(widths.size()) * f.seeds;
  std::vector<CollapseRow> rows(static_cast<std::size_t>(total));
  parallel_for_index(total, [&](int k) {
    rows[static_cast<std::size_t>(k)] = run_collapse(cc, widths[static_cast<std::size_t>(k / f.seeds)], k % f.seeds);
  });

  std::ofstream os = open_output(f.out);
  CsvWriter w(os);
  w.header({"width", "seed", "steps", "j_liu", "mmd", "tau", "proxy", "j_cp", "collapsed"});
  for (const auto& r : rows) {
    w.cell(r.width).cell(r.seed_index).cell(r.steps).cell(r.j_liu).cell(r.mmd).cell(r.tau).cell(r.proxy).cell(r.j_cp);
    w.cell(r.collapsed);
    w.end_row();
  }
  os.close();
  write_manifest(ctx, cmd, f.out);
  for (int width : widths) {
    int collapsed = 0;
    for (const auto& r : rows) collapsed += (r.width == width && r.collapsed) ? 1 : 0;
    ctx.out << "width " << width << ": " << collapsed << "/" << f.seeds << " collapsed\n";
  }
}

// ---------------------------------------------------------------------------

struct AblationFlags {
  std::string c1_grid = "0,0.001,0.01,0.1";
  std::string cell = "20,200,0.5";
  int reps = 25;
  int width = 200;
  std::string out = "c1_ablation.csv";
  PipelineFlags pipeline;
};

void cmd_c1_ablation(Context& ctx, const CLI::App* cmd, const AblationFlags& f) {
  const auto c1s = parse_double_list(f.c1_grid, "c1 grid");
  for (double c : c1s)
    if (c < 0) throw ConfigError("c1 values must be nonnegative");
  const auto cell = split_list(f.cell);
  if (cell.size() != 3) throw ConfigError("cell is d,n,shift");
  const int d = parse_int(cell[0], "dimension");
  const int n = parse_int(cell[1], "sample size");
  const double shift = parse_double(cell[2], "shift");
  if (f.reps < 1) throw ConfigError("reps must be at least 1");

  std::ofstream os = open_output(f.out);
  CsvWriter w(os);
  w.header({"c1", "power", "se", "reps", "pi_final_mean", "pi_final_sd"});
  const Method method{"cpmmd", KernelClass{DeepClass{{f.width, f.width}, 10}}, {}};
  for (double c1 : c1s) {
    PowerCellConfig pc;
    pc.family = GaussianMeanShift{d, shift};
    pc.n_per_class = n;
    pc.reps = f.reps;
    pc.cell_seed = derive_seed(ctx.seed, 0, "ablation-cell");  // matched across c1 values
    pc.test = f.pipeline.test_config(0);
    pc.optimizer = f.pipeline.optimizer();
    pc.c1_override = c1;
    const PowerCellResult res = run_power_cell(pc, method);
    double mean = 0.0, sq = 0.0;
    for (const auto& r : res.reports) mean += r.trajectory.final_record().lipschitz;
    mean /= static_cast<double>(res.reports.size());
    for (const auto& r : res.reports) sq += std::pow(r.trajectory.final_record().lipschitz - mean, 2);
    const double sd = res.reports.size() > 1 ? std::sqrt(sq / static_cast<double>(res.reports.size() - 1)) : 0.0;
    w.cell(c1).cell(res.rate.rate).cell(res.rate.se).cell(res.rate.n_reps).cell(mean).cell(sd);
    w.end_row();
    os.flush();
    ctx.out << "c1 " << format_double(c1) << ": power " << format_double(res.rate.rate) << ", final Pi "
            << format_double(mean) << '\n';
  }
  os.close();
  write_manifest(ctx, cmd, f.out);
}

// ---------------------------------------------------------------------------

struct CalibrateFlags {
  std::string x, y, regime = "deep", out = "calibration.csv";
  int n_cal = 10;
  double alpha = 0.05;
  int steps = 100;
  double lr = 0.005;
  double clip = 5.0;
};

void cmd_calibrate(Context& ctx, const CLI::App* cmd, const CalibrateFlags& f) {
  const KernelClass cls = parse_kernel_class(f.regime);
  if (f.n_cal < 1) throw ConfigError("n-cal must be at least 1");
  if (!(f.alpha > 0 && f.alpha < 1)) throw ConfigError("alpha must lie in (0, 1)");
  PipelineFlags pf;
  pf.steps = f.steps;
  pf.lr = f.lr;
  pf.clip = f.clip;
  const PooledSample data = load_csv_pair(f.x, f.y);
  const CalibrationResult res =
      calibrate_c1(cls, data, f.n_cal, f.alpha, pf.optimizer(), derive_seed(ctx.seed, 0, seed_tags::kCalibration));

  std::ofstream os = open_output(f.out);
  CsvWriter w(os);
  w.header({"permutation", "mmd", "proxy", "ratio", "c1_hat", "convention", "degenerate_warning"});
  for (std::size_t k = 0; k < res.ratios.size(); ++k) {
    w.cell(static_cast<long long>(k)).cell(res.mmds[k]).cell(res.proxies[k]).cell(res.ratios[k]).cell(res.c1_hat);
    w.cell(std::string(res.convention == QuantileConvention::Max ? "max" : "quantile")).cell(res.degenerate_warning);
    w.end_row();
  }
  os.close();
  write_manifest(ctx, cmd, f.out, {{"note", res.note}});
  if (!res.note.empty()) ctx.err << "warning: " << res.note << '\n';
  ctx.out << "c1_hat = " << format_double(res.c1_hat) << '\n';
}

// ---------------------------------------------------------------------------

struct GenerateFlags {
  std::string family = "hdgm";
  int d = 10;
  double param = 0.5;
  int m = 100, n = 100;
  std::string x = "x.csv", y = "y.csv";
};

void cmd_generate(Context& ctx, const CLI::App* cmd, const GenerateFlags& f) {
  DistributionFamily fam;
  if (f.family == "hdgm") fam = GaussianMeanShift{f.d, f.param};
  else if (f.family == "multiscale") fam = MultiScaleMixture2D{f.param, 0.01};
  else if (f.family == "kurtosis") fam = ScaledStudentT{f.d, f.param};
  else if (f.family == "scale") fam = GaussianScale{f.param};
  else throw ConfigError("unknown family '" + f.family + "'");
  if (f.m < 1 || f.n < 1) throw ConfigError("sample sizes must be positive");
  const TwoSampleData data = sample_pair(fam, f.m, f.n, ctx.seed);
  { std::ofstream os = open_output(f.x); write_csv_matrix(os, data.x); }
  { std::ofstream os = open_output(f.y); write_csv_matrix(os, data.y); }
  write_manifest(ctx, cmd, f.x, {{"outputs", {f.x, f.y}}, {"family", describe_family(fam)}});
  ctx.out << "wrote " << f.x << " and " << f.y << '\n';
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, int depth);

int cmd_replay(const std::string& manifest_path, const std::optional<std::string>& new_out, std::ostream& out,
               std::ostream& err, int depth) {
  if (depth > 0) throw ConfigError("a manifest cannot replay another replay");
  std::ifstream f(manifest_path);
  if (!f) throw ConfigError("cannot open manifest '" + manifest_path + "'");
  json m;
  try {
    m = json::parse(f);
  } catch (const json::exception& e) {
    throw ConfigError("malformed manifest: " + std::string(e.what()));
  }
  std::vector<std::string> args = m.at("args").get<std::vector<std::string>>();
  if (new_out) {
    bool replaced = false;
    for (std::size_t i = 0; i + 1 < args.size(); ++i)
      if (args[i] == "--out") {
        args[i + 1] = *new_out;
        replaced = true;
      }
    if (!replaced) {
      args.push_back("--out");
      args.push_back(*new_out);
    }
  }
  return dispatch(args, out, err, depth + 1);
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, int depth) {
  CLI::App app{"Complexity-penalized MMD two-sample testing", "cpmmd"};
  app.require_subcommand(1);
  app.fallthrough();
  std::optional<std::uint64_t> seed;
  int threads = 0;
  app.add_option("--seed", seed, "Master seed (overrides CPMMD_SEED)");
  app.add_option("--threads", threads, "Worker threads (0: available parallelism)")->capture_default_str();

  TestFlags test;
  CLI::App* c_test = app.add_subcommand("test", "Run the split-sample CP-MMD test on two CSV files");
  c_test->add_option("--x", test.x, "CSV sample from P")->required();
  c_test->add_option("--y", test.y, "CSV sample from Q")->required();
  c_test->add_option("--regime", test.regime, "linear | poly:p | deep[:w1xw2[/out]]")->capture_default_str();
  c_test->add_option("--out", test.out, "Report CSV")->capture_default_str();
  test.pipeline.add(c_test);

  SweepFlags sweep;
  CLI::App* c_sweep = app.add_subcommand("power-sweep", "Monte-Carlo power of CP-MMD against baselines");
  c_sweep->add_option("--experiment", sweep.experiment, "multiscale | kurtosis | hdgm")->required();
  c_sweep->add_option("--grid", sweep.grid, "Shifts, dfs, or d:n cells (comma separated)");
  c_sweep->add_option("--reps", sweep.reps, "Replicates per cell and method")->capture_default_str();
  c_sweep->add_option("--width", sweep.width, "Hidden width of the deep regime")->capture_default_str();
  c_sweep->add_option("--n", sweep.n, "Points per class (multiscale 200, kurtosis 500)");
  c_sweep->add_option("--shift", sweep.shift, "Mean shift of the hdgm cells")->capture_default_str();
  c_sweep->add_option("--degree", sweep.degree, "Polynomial degree of the kurtosis experiment")->capture_default_str();
  c_sweep->add_option("--grid-per-family", sweep.grid_per_family, "Bandwidths per base kernel for grid_argmax")
      ->capture_default_str();
  c_sweep->add_option("--out", sweep.out, "Output directory")->capture_default_str();
  sweep.pipeline.add(c_sweep);

  CollapseFlags collapse;
  CLI::App* c_collapse = app.add_subcommand("collapse", "Variance collapse of the ratio criterion under H0");
  c_collapse->add_option("--widths", collapse.widths, "MLP widths")->capture_default_str();
  c_collapse->add_option("--seeds", collapse.seeds, "Seeds per width")->capture_default_str();
  c_collapse->add_option("--steps", collapse.steps, "Adam steps")->capture_default_str();
  c_collapse->add_option("--n", collapse.n, "Points per class")->capture_default_str();
  c_collapse->add_option("--dim", collapse.dim, "Input dimension")->capture_default_str();
  c_collapse->add_option("--c1", collapse.c1, "Penalty coefficient for the reported J_CP")->capture_default_str();
  c_collapse->add_option("--out", collapse.out, "Output CSV")->capture_default_str();

  AblationFlags ablation;
  CLI::App* c_ablation = app.add_subcommand("c1-ablation", "Power and spectral product across injected c1 values");
  c_ablation->add_option("--c1-grid", ablation.c1_grid, "c1 values")->capture_default_str();
  c_ablation->add_option("--cell", ablation.cell, "d,n,shift")->capture_default_str();
  c_ablation->add_option("--reps", ablation.reps, "Replicates per value")->capture_default_str();
  c_ablation->add_option("--width", ablation.width, "Hidden width")->capture_default_str();
  c_ablation->add_option("--out", ablation.out, "Output CSV")->capture_default_str();
  ablation.pipeline.add(c_ablation, false);

  CalibrateFlags calibrate;
  CLI::App* c_cal = app.add_subcommand("calibrate", "Null-permutation calibration of c1 on two CSV files");
  c_cal->add_option("--x", calibrate.x, "CSV sample from P")->required();
  c_cal->add_option("--y", calibrate.y, "CSV sample from Q")->required();
  c_cal->add_option("--regime", calibrate.regime, "linear | poly:p | deep[:w1xw2[/out]]")->capture_default_str();
  c_cal->add_option("--n-cal", calibrate.n_cal, "Calibration permutations")->capture_default_str();
  c_cal->add_option("--alpha", calibrate.alpha, "Quantile level")->capture_default_str();
  c_cal->add_option("--steps", calibrate.steps, "Adam steps")->capture_default_str();
  c_cal->add_option("--lr", calibrate.lr, "Adam learning rate")->capture_default_str();
  c_cal->add_option("--clip", calibrate.clip, "Gradient clip norm")->capture_default_str();
  c_cal->add_option("--out", calibrate.out, "Output CSV")->capture_default_str();

  GenerateFlags gen;
  CLI::App* c_gen = app.add_subcommand("generate", "Write a synthetic two-sample pair as CSV");
  c_gen->add_option("--family", gen.family, "hdgm | multiscale | kurtosis | scale")->capture_default_str();
  c_gen->add_option("--d", gen.d, "Dimension (hdgm, kurtosis)")->capture_default_str();
  c_gen->add_option("--param", gen.param, "Shift, df or scale")->capture_default_str();
  c_gen->add_option("--m", gen.m, "Points from P")->capture_default_str();
  c_gen->add_option("--n", gen.n, "Points from Q")->capture_default_str();
  c_gen->add_option("--x", gen.x, "Output CSV for P")->capture_default_str();
  c_gen->add_option("--y", gen.y, "Output CSV for Q")->capture_default_str();

  std::string manifest;
  std::optional<std::string> replay_out;
  CLI::App* c_replay = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
  c_replay->add_option("manifest", manifest, "Manifest JSON")->required();
  c_replay->add_option("--out", replay_out, "Write to a different output path");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  if (c_replay->parsed()) return cmd_replay(manifest, replay_out, out, err, depth);

  Context ctx{out, err, args, 0, "default", 0, {}};
  ctx.started = timestamp();
  if (seed) {
    ctx.seed = *seed;
    ctx.seed_source = "flag";
  } else if (const char* env = std::getenv("CPMMD_SEED")) {
    try {
      std::size_t used = 0;
      ctx.seed = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ConfigError(std::string("invalid CPMMD_SEED '") + env + "'");
    }
    ctx.seed_source = "env";
  }
  // record the resolved seed so a replay does not depend on the environment
  if (!seed) {
    ctx.args.insert(ctx.args.begin(), {"--seed", std::to_string(ctx.seed)});
  }
  if (threads < 0) throw ConfigError("threads must be nonnegative");
  set_thread_count(threads);
  ctx.threads = max_threads();

  if (c_test->parsed()) cmd_test(ctx, c_test, test);
  else if (c_sweep->parsed()) cmd_power_sweep(ctx, c_sweep, sweep);
  else if (c_collapse->parsed()) cmd_collapse(ctx, c_collapse, collapse);
  else if (c_ablation->parsed()) cmd_c1_ablation(ctx, c_ablation, ablation);
  else if (c_cal->parsed()) cmd_calibrate(ctx, c_cal, calibrate);
  else if (c_gen->parsed()) cmd_generate(ctx, c_gen, gen);
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(args, out, err, 0);
  } catch (const NumericalAbort& e) {
    err << "numerical abort: " << e.what() << '\n';
    return 3;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "fatal: " << e.what() << '\n';
    return 1;
  }
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace cpmmd

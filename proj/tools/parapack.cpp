// parapack command-line front end. Exit codes:
//   0 success (simulate: voltage cutoff, duration or SOC cutoff)
//   1 runtime failure
//   2 usage or configuration error
//   3 simulate ended on over-current
//   4 simulate ended on over-temperature
//   5 simulate ended on the SOC floor guard
#include "parapack/config.hpp"
#include "parapack/errors.hpp"
#include "parapack/estimation.hpp"
#include "parapack/safety.hpp"
#include "parapack/scenarios.hpp"
#include "parapack/sensitivity.hpp"
#include "parapack/simulate.hpp"
#include "parapack/svg.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace parapack;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;
constexpr int kExitOverCurrent = 3;
constexpr int kExitOverTemperature = 4;
constexpr int kExitSocFloor = 5;

struct Common {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::size_t workers = 1;
};

RunConfig load(const Common &c) {
  RunConfig cfg = c.config.empty() ? parse_run_config("{}") : load_run_config(c.config);
  if (c.seed) {
    cfg.seed = *c.seed;
    cfg.synth.noise.seed = *c.seed;
  }
  return cfg;
}

// Written to a temporary name first so a failure leaves no partial file.
template <class F> void write_file(const fs::path &path, F &&fn) {
  if (path.has_parent_path())
    fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out)
      throw Error("cannot write " + path.string());
    fn(out);
    if (!out)
      throw Error("write failed: " + path.string());
  }
  fs::rename(tmp, path);
}

void print_progress(std::size_t done, std::size_t total) {
  if (done == total || done % 1000 == 0)
    std::fprintf(stderr, "\r%zu / %zu samples", done, total);
  if (done == total)
    std::fputc('\n', stderr);
}

int cmd_simulate(const Common &c) {
  const auto cfg = load(c);
  if (!cfg.protocol)
    throw ConfigError("/protocol", "required by simulate");
  const auto result = run(cfg.module, *cfg.protocol, cfg.integrator);
  const fs::path out(c.out);
  write_file(out / "result.csv", [&](std::ostream &o) { write_csv(result, o); });
  write_file(out / "result.json", [&](std::ostream &o) { write_json(result, o); });
  const auto &t = result.termination;
  std::cout << "termination: " << to_string(t.cause) << " at t = " << t.time << " s";
  if (t.cell)
    std::cout << " (cell " << *t.cell + 1 << ")";
  std::cout << '\n';
  switch (t.cause) {
  case TerminationCause::over_current: return kExitOverCurrent;
  case TerminationCause::over_temperature: return kExitOverTemperature;
  case TerminationCause::soc_floor: return kExitSocFloor;
  default: return kExitOk;
  }
}

int cmd_synth(const Common &c) {
  const auto cfg = load(c);
  if (!cfg.protocol)
    throw ConfigError("/protocol", "required by synth");
  const auto data = synthesize_measurements(cfg.module, *cfg.protocol, cfg.synth.noise, cfg.integrator);
  write_file(fs::path(c.out) / "measurements.csv", [&](std::ostream &o) { write_measurements(data, o); });
  std::cout << data.size() << " rows written\n";
  return kExitOk;
}

int cmd_fit(const Common &c, const std::string &measurements) {
  const auto cfg = load(c);
  fs::path path;
  if (!measurements.empty())
    path = measurements;
  else if (cfg.fit.measurements)
    path = *cfg.fit.measurements;
  else
    throw ConfigError("/fit/measurements", "no measurement file given");

  LoadOptions lo;
  lo.sum_tolerance_a = cfg.fit.sum_tolerance_a;
  const auto data = load_measurements(path, lo);
  if (!data.flagged_rows.empty())
    std::cerr << "warning: " << data.flagged_rows.size()
              << " rows where the branch currents do not sum to the total (first at t = "
              << data.time[data.flagged_rows.front()] << " s)\n";
  if (data.n_cells != cfg.module.size())
    throw ConfigError("/module", "module has " + std::to_string(cfg.module.size()) +
                                     " cells, measurements have " + std::to_string(data.n_cells));

  ModuleConfig tmpl = cfg.module;
  tmpl.thermal = perturb_thermal(cfg.module.thermal, cfg.fit.thermal_perturb, cfg.seed);
  const auto spec = FitSpec::around(cfg.module.cells, cfg.fit.perturb, cfg.seed, cfg.fit.lower_factor,
                                    cfg.fit.upper_factor);
  EstimationOptions opts;
  if (cfg.fit.max_evals)
    opts.optimizer.max_evals = *cfg.fit.max_evals;
  opts.optimizer.seed = cfg.seed;

  const auto res = fit_pipeline(data, tmpl, spec, opts);
  for (const auto &n : res.notices)
    std::cerr << "notice: " << n << '\n';
  const ThermalFit thermal = res.thermal ? *res.thermal
                             : res.initial_thermal
                                 ? *res.initial_thermal
                                 : ThermalFit{tmpl.thermal, false, "skipped: no temperatures", {}, {}, {}};
  const fs::path out(c.out);
  write_file(out / "fit.json", [&](std::ostream &o) { write_fit_report(res.electrical, thermal, o); });
  write_file(out / "rmse.csv", [&](std::ostream &o) {
    write_rmse_table({{path.stem().string(), res.electrical.report.rmse}}, o);
  });
  std::cout << "electrical cost " << res.electrical.report.initial_cost << " -> "
            << res.electrical.report.final_cost << " in " << res.electrical.report.evaluations
            << " evaluations\n";
  return kExitOk;
}

int cmd_sobol(const Common &c, std::optional<std::size_t> n_base, bool self_test) {
  const auto cfg = load(c);
  SaltelliOptions so;
  so.n_base = n_base.value_or(cfg.sobol.n_base);
  so.seed = cfg.seed;
  so.batch.workers = c.workers;
  so.batch.progress = print_progress;

  if (self_test) {
    auto model = [](std::span<const double> u) { return std::vector<double>{ishigami(u)}; };
    const auto r = saltelli_indices(3, 1, model, so);
    const auto exact = ishigami_indices();
    const auto &e = r.per_time.front();
    std::printf("%-4s %10s %10s %10s %10s\n", "x", "S1 est", "S1 exact", "ST est", "ST exact");
    for (std::size_t i = 0; i < 3; ++i)
      std::printf("x%-3zu %10.4f %10.4f %10.4f %10.4f\n", i + 1, e.s1[i], exact.s1[i], e.st[i],
                  exact.st[i]);
    return kExitOk;
  }

  SensitivitySetup setup;
  setup.base = cfg.mean_module(cfg.module.size());
  setup.space = ParameterSpace::reference(cfg.module.size());
  setup.c_rate = cfg.sobol.c_rate;
  setup.v_cutoff = cfg.sobol.v_cutoff;
  setup.grid_points = cfg.sobol.grid_points;
  setup.integrator = cfg.integrator;
  so.batch.checkpoint = cfg.sobol.checkpoint;
  if (!so.batch.checkpoint)
    so.batch.checkpoint = fs::path(c.out) / "sobol.checkpoint";
  fs::create_directories(fs::path(c.out));

  const auto r = run_sobol_campaign(setup, so);
  if (r.failed_samples > 0)
    std::cerr << "warning: " << r.failed_samples << " base samples dropped after failed runs\n";
  const fs::path out(c.out);
  write_file(out / "sobol.csv", [&](std::ostream &o) { write_sobol_csv(r, o); });
  write_file(out / "sobol.json", [&](std::ostream &o) { write_sobol_json(r, o); });
  write_file(out / "sobol_indices.svg", [&](std::ostream &o) {
    o << render_svg(chart_from_file(ChartKind::sobol_indices, out / "sobol.csv"));
  });
  std::cout << r.evaluations << " model runs\n";
  return kExitOk;
}

ThresholdQuery base_query(const RunConfig &cfg) {
  ThresholdQuery q;
  q.template_ = cfg.module;
  q.mean_cell = parapack::mean_cell(cfg.module.cells);
  q.integrator = cfg.integrator;
  return q;
}

int cmd_thresholds(const Common &c) {
  const auto cfg = load(c);
  const auto &t = cfg.thresholds;
  auto q = base_query(cfg);
  q.temp_limit_c = t.temp_limit_c;
  q.search_cap_pct = t.search_cap_pct;
  q.q_search_cap_pct = t.q_search_cap_pct;
  q.soc_cutoff = t.soc_cutoff;
  q.n_cells = t.n_cells;
  const auto points = robustness_sweep(SweepAxis::c_rate, t.c_rates, q, t.params, c.workers);
  const fs::path out(c.out);
  write_file(out / "thresholds.csv", [&](std::ostream &o) { write_threshold_csv(points, o); });
  write_file(out / "thresholds.json", [&](std::ostream &o) { write_threshold_json(points, o); });
  write_file(out / "safety_table.csv", [&](std::ostream &o) { write_safety_table(points, o); });
  write_safety_table(points, std::cout);
  int rc = kExitOk;
  for (const auto &p : points)
    if (!p.result) {
      std::cerr << "error: " << to_string(p.param) << " at " << p.axis_value << "C: " << p.error << '\n';
      rc = kExitRuntime;
    }
  return rc;
}

int cmd_sweep(const Common &c) {
  const auto cfg = load(c);
  const auto &s = cfg.sweep;
  auto q = base_query(cfg);
  q.c_rate = s.c_rate;
  q.soc_cutoff = s.soc_cutoff;
  q.n_cells = s.n_cells;
  q.temp_limit_c = s.temp_limit_c;
  const auto points = robustness_sweep(s.axis, s.grid, q, s.params, c.workers);
  const fs::path out(c.out);
  const auto name = "sweep_" + to_string(s.axis);
  write_file(out / (name + ".csv"), [&](std::ostream &o) { write_threshold_csv(points, o); });
  write_file(out / (name + ".json"), [&](std::ostream &o) { write_threshold_json(points, o); });
  write_file(out / (name + ".svg"), [&](std::ostream &o) {
    auto chart = threshold_chart(csv::read(out / (name + ".csv")), to_string(s.axis));
    o << render_svg(chart);
  });
  write_threshold_csv(points, std::cout);
  int rc = kExitOk;
  for (const auto &p : points)
    if (!p.result) {
      std::cerr << "error: " << to_string(p.param) << " at " << p.axis_value << ": " << p.error << '\n';
      rc = kExitRuntime;
    }
  return rc;
}

int cmd_plot(const std::string &kind, const std::string &input, const std::string &output) {
  const auto k = chart_kind_from_string(kind);
  const auto svg = render_svg(chart_from_file(k, input));
  write_file(output, [&](std::ostream &o) { o << svg; });
  return kExitOk;
}

void add_common(CLI::App *app, Common &c, bool workers) {
  app->add_option("--config", c.config, "run configuration (JSON)");
  app->add_option("--out", c.out, "output directory");
  app->add_option("--seed", c.seed, "random seed (overrides the config)");
  if (workers)
    app->add_option("--workers", c.workers, "worker threads")->check(CLI::PositiveNumber);
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Parallel-connected battery module simulation and analysis"};
  app.require_subcommand(1);
  Common common;
  std::string measurements, kind, input, output;
  std::optional<std::size_t> n_base;
  bool self_test = false;

  auto *sim = app.add_subcommand("simulate", "simulate a load protocol");
  add_common(sim, common, false);
  auto *synth = app.add_subcommand("synth", "synthesize a noisy bench log");
  add_common(synth, common, false);
  auto *fit = app.add_subcommand("fit", "fit model parameters to a bench log");
  add_common(fit, common, false);
  fit->add_option("--measurements", measurements, "measurement CSV (overrides the config)");
  auto *sobol = app.add_subcommand("sobol", "Sobol sensitivity campaign");
  add_common(sobol, common, true);
  sobol->add_option("--n-base", n_base, "base sample count");
  sobol->add_flag("--ishigami", self_test, "estimate the Ishigami indices and compare");
  auto *thr = app.add_subcommand("thresholds", "safety thresholds per parameter family");
  add_common(thr, common, true);
  auto *sweep = app.add_subcommand("sweep", "threshold robustness sweep");
  add_common(sweep, common, true);
  auto *plot = app.add_subcommand("plot", "render a result file as SVG");
  plot->add_option("--kind", kind, "chart kind")
      ->required()
      ->check(CLI::IsMember({"currents_vs_time", "temps_vs_time", "sobol_indices", "threshold_curves"}));
  plot->add_option("--input", input, "result CSV")->required();
  plot->add_option("--out", output, "SVG file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (sim->parsed()) return cmd_simulate(common);
    if (synth->parsed()) return cmd_synth(common);
    if (fit->parsed()) return cmd_fit(common, measurements);
    if (sobol->parsed()) return cmd_sobol(common, n_base, self_test);
    if (thr->parsed()) return cmd_thresholds(common);
    if (sweep->parsed()) return cmd_sweep(common);
    if (plot->parsed()) return cmd_plot(kind, input, output);
  } catch (const ConfigError &e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitConfig;
}

// Acceptance run: one PASS/FAIL line per criterion, details indented below.
// Exit status is 0 unless --strict is given and a criterion fails.

#include "../oracles.hpp"

#include "parapack/estimation.hpp"
#include "parapack/integrator.hpp"
#include "parapack/safety.hpp"
#include "parapack/scenarios.hpp"
#include "parapack/sensitivity.hpp"
#include "parapack/simulate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace parapack;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets
constexpr double kKirchhoffRel = 1e-9;
constexpr double kSumRel = 1e-12;
constexpr double kExpFactor = 10.0; // analytic error <= factor * rtol
constexpr double kEventTol = 1e-3;  // [s]
constexpr double kTabSpreadMax = 5.0;
constexpr double kPeakTempBand = 10.0;      // [C] around the model extrapolations
constexpr double kIshigamiS1Tol = 0.02;
constexpr double kDeadInputTol = 0.01;
constexpr double kThresholdTempTol = 0.5; // [C]
constexpr double kPaperFactor = 2.0;
constexpr double kMonotoneSlack = 0.05; // [percentage points], a few bisection resolutions
constexpr double kSeriesRTol = 0.03;
constexpr double kThermalTol = 0.05;

struct Check {
  bool ok;
  std::string text;
};

struct Context {
  fs::path root; // source tree: configs/ and data/fixtures/
  fs::path cli;
  fs::path work;
  std::size_t workers = 1;
};

std::string fmt(const char *f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Check runtime_check(double seconds, double budget) {
  return {seconds < budget, fmt("runtime %.1f s (budget %.0f s)", seconds, budget)};
}

// 1 ------------------------------------------------------------------------

std::vector<Check> kirchhoff_oracle() {
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> r(20e-6, 2e-3), z(0.005, 0.995), v(-0.03, 0.03),
      cur(-1200.0, 1200.0);
  const std::size_t sizes[] = {2, 3, 4, 8};
  double worst = 0.0, worst_sum = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = sizes[trial % 4];
    ModuleConfig m = reference_module();
    m.cells.assign(n, m.cells.front());
    auto s = SimState::uniform(n, 0.5);
    for (std::size_t k = 0; k < n; ++k) {
      m.cells[k].r_ohm = r(rng);
      m.cells[k].r_contact = r(rng);
      s.z[k] = z(rng);
      s.v_rc[k] = v(rng);
    }
    const double total = cur(rng);
    const auto got = branch_currents(m, s, total);
    const auto want = oracle::kirchhoff(m, s, total);
    double scale = std::abs(total), sum = 0.0;
    for (std::size_t k = 0; k < n; ++k)
      scale = std::max(scale, std::abs(want[k]));
    for (std::size_t k = 0; k < n; ++k) {
      worst = std::max(worst, std::abs(got[k] - want[k]) / scale);
      sum += got[k];
    }
    worst_sum = std::max(worst_sum, std::abs(sum - total) / std::max(scale, 1.0));
  }
  return {{worst <= kKirchhoffRel, fmt("1000 configurations, max relative deviation %.2e", worst)},
          {worst_sum <= kSumRel, fmt("max relative current-sum error %.2e", worst_sum)}};
}

// 2 ------------------------------------------------------------------------

std::vector<Check> integrator_convergence() {
  std::vector<Check> out;
  const Rhs decay = [](double, std::span<const double> y, std::span<double> d) { d[0] = -0.5 * y[0]; };
  const double y0[] = {1.0};
  double worst_ratio = 0.0;
  for (double rtol : {1e-4, 1e-6, 1e-8, 1e-10}) {
    IntegratorSettings s;
    s.rtol = rtol;
    s.atol = rtol * 1e-3;
    const auto r = integrate(decay, y0, 0.0, 10.0, s, {}, std::vector<double>{10.0});
    const double exact = std::exp(-5.0);
    worst_ratio = std::max(worst_ratio, std::abs(r.trajectory.y.back() - exact) / exact / rtol);
  }
  out.push_back({worst_ratio <= kExpFactor,
                 fmt("exponential decay: worst relative error %.2f x rtol", worst_ratio)});

  const Rhs ramp = [](double, std::span<const double>, std::span<double> d) { d[0] = 1.0; };
  const double zero[] = {0.0};
  IntegratorSettings s;
  s.max_step = 0.7;
  const Event ev{[](double, std::span<const double> y) { return y[0] - 5.0; }, Crossing::rising, true};
  const auto r = integrate(ramp, zero, 0.0, 20.0, s, std::span(&ev, 1));
  const double err = r.termination.event ? std::abs(r.termination.t - 5.0) : 1e9;
  out.push_back({err <= kEventTol, fmt("linear crossing located within %.2e s", err)});

  // logistic growth, tolerance halved five times
  const Rhs logistic = [](double, std::span<const double> y, std::span<double> d) {
    d[0] = y[0] * (1.0 - y[0]);
  };
  const double p0[] = {0.1};
  std::vector<double> finals;
  for (int i = 0; i < 6; ++i) {
    IntegratorSettings t;
    t.rtol = 1e-5 / std::pow(2.0, i);
    t.atol = 1e-3 * t.rtol;
    finals.push_back(integrate(logistic, p0, 0.0, 10.0, t, {}, std::vector<double>{10.0}).trajectory.y.back());
  }
  std::vector<double> diffs;
  for (std::size_t i = 1; i < finals.size(); ++i)
    diffs.push_back(std::abs(finals[i] - finals[i - 1]));
  out.push_back({diffs.back() < diffs.front() / 4.0,
                 fmt("self-convergence: successive differences %.2e -> %.2e", diffs.front(), diffs.back())});
  return out;
}

// 3 ------------------------------------------------------------------------

std::vector<Check> paper_behaviour() {
  std::vector<Check> out;
  const auto discharge = Protocol::discharge(0.45, 2.5, kCurrentLimit);
  const auto base = run(bench_module(BenchConfig::baseline), discharge);
  const auto bm = imbalance_metrics(base);
  out.push_back({base.termination.cause == TerminationCause::voltage_cutoff && bm.max_tab_spread < kTabSpreadMax,
                 fmt("baseline: %s at %.0f s, tab spread %.2f C", to_string(base.termination.cause).c_str(),
                     base.termination.time, bm.max_tab_spread)});

  // Peaks are the model continued past the over-current stop to 2.5 V.
  const std::pair<BenchConfig, double> failures[] = {{BenchConfig::single_failure, 61.0},
                                                     {BenchConfig::interconnect_failure, 51.0}};
  for (const auto &[which, paper_peak] : failures) {
    const auto m = bench_module(which);
    const auto r = run(m, discharge);
    const bool tripped = r.termination.cause == TerminationCause::over_current;
    out.push_back({tripped, fmt("%s: %s at %.0f s (cell %zu)", std::string(to_string(which)).c_str(),
                               to_string(r.termination.cause).c_str(), r.termination.time,
                               r.termination.cell ? *r.termination.cell + 1 : 0)});
    const auto ext = imbalance_metrics(run(m, Protocol::discharge(0.45, 2.5)));
    out.push_back({std::abs(ext.max_core_temp_c - paper_peak) <= kPeakTempBand,
                   fmt("%s continued to 2.5 V: peak core %.1f C (expected %.0f +- %.0f), core spread %.1f C",
                       std::string(to_string(which)).c_str(), ext.max_core_temp_c, paper_peak,
                       kPeakTempBand, ext.max_core_spread)});
  }
  return out;
}

// 4 ------------------------------------------------------------------------

std::vector<Check> sobol_estimator(const Context &ctx) {
  SaltelliOptions o;
  o.n_base = 8192;
  o.seed = 42;
  o.batch.workers = ctx.workers;
  // fourth input is never read
  const auto r = saltelli_indices(4, 1, [](std::span<const double> u) {
    return std::vector<double>{ishigami(u.first(3))};
  }, o);
  const auto &e = r.per_time.front();
  const auto exact = oracle::ishigami(7.0, 0.1);
  std::vector<Check> out;
  double worst = 0.0;
  for (int i = 0; i < 3; ++i)
    worst = std::max(worst, std::abs(e.s1[i] - exact.s1[i]));
  out.push_back({worst <= kIshigamiS1Tol,
                 fmt("S1 = %.4f %.4f %.4f vs %.4f %.4f %.4f (max deviation %.4f)", e.s1[0], e.s1[1], e.s1[2],
                     exact.s1[0], exact.s1[1], exact.s1[2], worst)});
  out.push_back({std::abs(e.s1[3]) <= kDeadInputTol && std::abs(e.st[3]) <= kDeadInputTol,
                 fmt("dead input: S1 %.2e, ST %.2e", e.s1[3], e.st[3])});
  bool ordered = true;
  for (int i = 0; i < 4; ++i) {
    const double sigma = std::hypot(e.s1_se[i], e.st_se[i]);
    ordered = ordered && e.st[i] >= e.s1[i] - 2.0 * sigma;
  }
  out.push_back({ordered, fmt("ST >= S1 - 2 sigma for all inputs (ST = %.4f %.4f %.4f)", e.st[0], e.st[1],
                              e.st[2])});
  return out;
}

// 5 ------------------------------------------------------------------------

std::vector<Check> sobol_campaign(const Context &ctx) {
  auto setup = SensitivitySetup::reference();
  SaltelliOptions o;
  o.n_base = 1024;
  o.seed = 42;
  o.batch.workers = ctx.workers;
  const auto r = run_sobol_campaign(setup, o);
  enum { contact = 0, ohm = 1, cap = 2 };
  auto mean_over = [&](auto pick, int fam, auto in_window) {
    double s = 0.0;
    int n = 0;
    for (std::size_t t = 0; t < r.fraction.size(); ++t)
      if (in_window(r.fraction[t]))
        s += pick(t)[fam], ++n;
    return n ? s / n : std::numeric_limits<double>::quiet_NaN();
  };
  auto st = [&](std::size_t t) { return r.family_st[t]; };
  auto s1 = [&](std::size_t t) { return r.family_s1[t]; };
  auto early = [](double f) { return f <= 0.25 + 1e-12; };
  auto late = [](double f) { return f > 0.75 + 1e-12; };
  std::vector<Check> out;
  const double c_early = mean_over(st, contact, early), o_early = mean_over(st, ohm, early),
               q_early = mean_over(st, cap, early);
  out.push_back({c_early > o_early && c_early > q_early,
                 fmt("first quarter mean ST: contact %.3f, ohmic %.3f, capacity %.3f (S1: %.3f %.3f %.3f)",
                     c_early, o_early, q_early, mean_over(s1, contact, early), mean_over(s1, ohm, early),
                     mean_over(s1, cap, early))});
  const double o_late = mean_over(st, ohm, late), q_late = mean_over(st, cap, late);
  out.push_back({o_late > o_early, fmt("ohmic family ST rises: %.3f -> %.3f", o_early, o_late)});
  out.push_back({q_late > q_early, fmt("capacity family ST rises: %.3f -> %.3f", q_early, q_late)});
  out.push_back({r.failed_samples == 0, fmt("%zu evaluations, %zu failed base rows", r.evaluations,
                                            r.failed_samples)});
  return out;
}

// 6 ------------------------------------------------------------------------

std::vector<Check> safety_thresholds(const Context &ctx) {
  const std::vector<SafetyParam> params(std::begin(kSafetyParams), std::end(kSafetyParams));
  const auto pts = robustness_sweep(SweepAxis::c_rate, {0.45, 0.85},
                                    ThresholdQuery::reference(SafetyParam::r_ohm, 0.45), params, ctx.workers);
  std::map<std::pair<double, SafetyParam>, ThresholdResult> res;
  std::vector<Check> out;
  for (const auto &p : pts) {
    if (!p.result) {
      out.push_back({false, "error at " + to_string(p.param) + ": " + p.error});
      continue;
    }
    res[{p.axis_value, p.param}] = *p.result;
  }
  if (res.size() != pts.size())
    return out;

  std::ostringstream table;
  write_safety_table(pts, table);
  std::string line;
  for (std::istringstream in(table.str()); std::getline(in, line);)
    out.push_back({true, "table: " + line});

  const auto &q_low = res[{0.45, SafetyParam::q_cap}];
  out.push_back({!q_low.bounded, fmt("(a) capacity at 0.45C: %s, peak %.1f C at the cap",
                                     q_low.bounded ? "bounded" : "N/A", q_low.peak_temp_c)});
  for (SafetyParam p : params) {
    const auto &lo = res[{0.45, p}], &hi = res[{0.85, p}];
    const double a = lo.bounded ? lo.normalized_deviation_pct : std::numeric_limits<double>::infinity();
    const double b = hi.bounded ? hi.normalized_deviation_pct : std::numeric_limits<double>::infinity();
    out.push_back({a >= b, fmt("(b) %s: 0.45C %.1f >= 0.85C %.1f", to_string(p).c_str(), a, b)});
  }
  double worst = 0.0;
  for (const auto &[key, r] : res)
    if (r.bounded)
      worst = std::max(worst, std::abs(r.peak_temp_c - 60.0));
  out.push_back({worst <= kThresholdTempTol, fmt("(c) max |peak - 60 C| over bounded results %.3f C", worst)});
  const std::pair<SafetyParam, double> paper[] = {{SafetyParam::r_ohm, 11.2},
                                                  {SafetyParam::r_contact, 22.3},
                                                  {SafetyParam::r_ct0, 432.3},
                                                  {SafetyParam::q_cap, 16.4}};
  for (const auto &[p, ref] : paper) {
    const auto &r = res[{0.85, p}];
    const double ratio = r.bounded ? r.normalized_deviation_pct / ref : 0.0;
    out.push_back({r.bounded && ratio <= kPaperFactor && ratio >= 1.0 / kPaperFactor,
                   fmt("(d) %s at 0.85C: %.1f%% vs %.1f%% (ratio %.2f)", to_string(p).c_str(),
                       r.normalized_deviation_pct, ref, ratio)});
  }
  return out;
}

// 7 ------------------------------------------------------------------------

std::vector<Check> robustness_sweeps(const Context &ctx) {
  const std::vector<SafetyParam> params(std::begin(kSafetyParams), std::end(kSafetyParams));
  std::vector<Check> out;
  struct Axis {
    SweepAxis axis;
    std::vector<double> grid;
    int sign; // -1 non-increasing, +1 non-decreasing
  };
  const Axis axes[] = {{SweepAxis::c_rate, {0.25, 0.45, 0.65, 0.85}, -1},
                       {SweepAxis::soc_cutoff, {0.0, 0.1, 0.2, 0.3}, +1}};
  for (const auto &ax : axes) {
    const auto base = ThresholdQuery::reference(SafetyParam::r_ohm, 0.85);
    const auto pts = robustness_sweep(ax.axis, ax.grid, base, params, ctx.workers);
    for (SafetyParam p : params) {
      std::vector<double> v;
      std::string text;
      bool ok = true;
      for (const auto &sp : pts) {
        if (sp.param != p)
          continue;
        if (!sp.result) {
          ok = false;
          text += " error";
          continue;
        }
        const double x = sp.result->bounded ? sp.result->normalized_deviation_pct
                                            : std::numeric_limits<double>::infinity();
        v.push_back(x);
        text += sp.result->bounded ? fmt(" %.1f", x) : std::string(" N/A");
      }
      for (std::size_t i = 1; i < v.size(); ++i) {
        if (ax.sign < 0)
          ok = ok && (std::isinf(v[i - 1]) || v[i] <= v[i - 1] + kMonotoneSlack);
        else
          ok = ok && (std::isinf(v[i]) || v[i] >= v[i - 1] - kMonotoneSlack);
      }
      out.push_back({ok, to_string(ax.axis) + " " + to_string(p) + (ax.sign < 0 ? " (non-increasing):" :
                                                                                   " (non-decreasing):") + text});
    }
  }
  return out;
}

// 8 ------------------------------------------------------------------------

std::vector<Check> estimation_round_trip(const Context &ctx) {
  const fs::path dir = ctx.root / "data" / "fixtures";
  const auto truth = bench_module(BenchConfig::baseline);
  const auto data = load_measurements(dir / "baseline.csv");

  // prior: reference cells and a perturbed thermal block, as `parapack fit` does
  const std::uint64_t seed = 3;
  ModuleConfig tmpl = reference_module();
  tmpl.thermal = perturb_thermal(tmpl.thermal, 0.3, seed);
  const auto spec = FitSpec::around(tmpl.cells, 0.3, seed);
  EstimationOptions opts;
  opts.optimizer.seed = seed;
  const auto fit = fit_pipeline(data, tmpl, spec, opts);

  std::vector<Check> out;
  ModuleConfig fitted = fit.electrical.config;
  fitted.thermal = fit.final_thermal(tmpl);
  for (std::size_t k = 0; k < truth.size(); ++k) {
    const double want = truth.cells[k].series_resistance(), got = fitted.cells[k].series_resistance();
    const double rel = got / want - 1.0;
    out.push_back({std::abs(rel) <= kSeriesRTol, fmt("cell %zu series R %.1f uohm vs %.1f uohm (%+.2f%%)", k + 1,
                                                     got * 1e6, want * 1e6, 100.0 * rel)});
  }
  const std::tuple<const char *, double, double> th[] = {
      {"c_p", fitted.thermal.c_p, truth.thermal.c_p},
      {"rth_core_surface", fitted.thermal.rth_core_surface, truth.thermal.rth_core_surface},
      {"rth_surface_ambient", fitted.thermal.rth_surface_ambient, truth.thermal.rth_surface_ambient}};
  for (const auto &[name, got, want] : th) {
    const double rel = got / want - 1.0;
    out.push_back({std::abs(rel) <= kThermalTol, fmt("%s %.4g vs %.4g (%+.1f%%)", name, got, want, 100.0 * rel)});
  }

  // validation: fitted model plus the bench resistance differences
  std::vector<std::pair<std::string, RmseRow>> rows{{"baseline", fit.electrical.report.rmse}};
  for (BenchConfig which : {BenchConfig::single_failure, BenchConfig::interconnect_failure}) {
    const auto name = std::string(to_string(which));
    const auto d = load_measurements(dir / (name + ".csv"));
    ModuleConfig m = fitted;
    const auto failed = bench_module(which);
    for (std::size_t k = 0; k < m.size(); ++k)
      m.cells[k].r_contact += failed.cells[k].r_contact - truth.cells[k].r_contact;
    rows.emplace_back(name, rmse(replay(m, d, opts), d));
  }
  std::ostringstream csv;
  write_rmse_table(rows, csv);
  std::vector<std::string> lines;
  std::string line;
  for (std::istringstream in(csv.str()); std::getline(in, line);)
    lines.push_back(line);
  const std::string header = "configuration,i1_rmse_a,i2_rmse_a,i3_rmse_a,i4_rmse_a,t1_rmse_c,t2_rmse_c,"
                             "t3_rmse_c,t4_rmse_c";
  bool layout = lines.size() == 4 && lines[0] == header;
  for (std::size_t i = 1; layout && i < lines.size(); ++i)
    layout = std::count(lines[i].begin(), lines[i].end(), ',') == 8;
  out.push_back({layout, "RMSE table: 3 configurations x (4 currents, 4 tab temperatures)"});
  for (const auto &[name, row] : rows) {
    double ic = 0.0, tc = 0.0;
    for (double v : row.current_a) ic = std::max(ic, v);
    for (double v : row.tab_temp_c) tc = std::max(tc, v);
    out.push_back({true, fmt("%s: max current RMSE %.2f A, max tab RMSE %.2f C", name.c_str(), ic, tc)});
  }
  for (const auto &n : fit.notices)
    out.push_back({true, "notice: " + n});
  return out;
}

// 9 ------------------------------------------------------------------------

std::map<std::string, std::string> read_tree(const fs::path &dir) {
  std::map<std::string, std::string> files;
  if (!fs::exists(dir))
    return files;
  for (const auto &e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file())
      continue;
    std::ifstream in(e.path(), std::ios::binary);
    files[fs::relative(e.path(), dir).string()] =
        std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  return files;
}

std::string quote(const fs::path &p) { return "'" + p.string() + "'"; }

std::vector<Check> determinism(const Context &ctx) {
  std::vector<Check> out;
  if (!fs::exists(ctx.cli))
    return {{false, "CLI not found at " + ctx.cli.string()}};
  const fs::path cfg = ctx.root / "configs";
  const fs::path work = ctx.work / "determinism";
  fs::remove_all(work);
  fs::create_directories(work);

  const fs::path fit_cfg = work / "fit.json";
  std::ofstream(fit_cfg) << "{\"module\": {\"preset\": \"reference\"}, \"fit\": {\"measurements\": \""
                         << (ctx.root / "data" / "fixtures" / "baseline.csv").string()
                         << "\", \"max_evals\": 40}, \"seed\": 3}\n";

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"simulate", "simulate --config " + quote(cfg / "single_failure.json")},
      {"synth", "synth --config " + quote(cfg / "baseline.json")},
      {"fit", "fit --config " + quote(fit_cfg)},
      {"sobol", "sobol --config " + quote(cfg / "sobol.json") + " --n-base 128 --workers 2"},
      {"thresholds", "thresholds --config " + quote(cfg / "thresholds.json") + " --workers 2"},
      {"sweep", "sweep --config " + quote(cfg / "sweep_soc_cutoff.json") + " --workers 2"},
  };
  for (const auto &[name, args] : commands) {
    std::map<std::string, std::string> runs[2];
    int rc[2];
    for (int i = 0; i < 2; ++i) {
      const fs::path dir = work / (name + "_" + std::to_string(i));
      rc[i] = std::system((quote(ctx.cli) + " " + args + " --out " + quote(dir) + " >/dev/null 2>&1").c_str());
      runs[i] = read_tree(dir);
    }
    const bool same = !runs[0].empty() && runs[0] == runs[1] && rc[0] == rc[1];
    out.push_back({same, fmt("%s: %zu files, exit %d, %s", name.c_str(), runs[0].size(), WEXITSTATUS(rc[0]),
                             same ? "identical" : "DIFFERENT")});
  }
  return out;
}

struct Criterion {
  int id;
  const char *name;
  double budget_s;
  std::function<std::vector<Check>(const Context &)> run;
};

} // namespace

int main(int argc, char **argv) {
  Context ctx;
  ctx.root = fs::current_path();
  ctx.cli = fs::absolute(fs::path(argv[0])).parent_path() / "parapack";
  ctx.work = fs::temp_directory_path() / "parapack_acceptance";
  ctx.workers = std::max(1u, std::thread::hardware_concurrency());
  bool strict = false;
  std::set<int> only;
  std::ofstream report;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    auto value = [&]() -> std::string {
      if (i + 1 >= argc) {
        std::cerr << a << " needs a value\n";
        std::exit(2);
      }
      return argv[++i];
    };
    if (a == "--strict") strict = true;
    else if (a == "--root") ctx.root = value();
    else if (a == "--cli") ctx.cli = value();
    else if (a == "--work") ctx.work = value();
    else if (a == "--workers") ctx.workers = std::stoul(value());
    else if (a == "--report") report.open(value());
    else if (a == "--only") {
      std::stringstream ss(value());
      for (std::string t; std::getline(ss, t, ',');)
        only.insert(std::stoi(t));
    } else {
      std::cerr << "usage: acceptance [--strict] [--only 1,2] [--root dir] [--cli path] [--work dir] "
                   "[--workers n] [--report file]\n";
      return 2;
    }
  }
  ctx.root = fs::absolute(ctx.root);
  ctx.work = fs::absolute(ctx.work);

  const Criterion criteria[] = {
      {1, "Kirchhoff oracle", 10, [](const Context &) { return kirchhoff_oracle(); }},
      {2, "integrator convergence", 5, [](const Context &) { return integrator_convergence(); }},
      {3, "bench behaviour", 60, [](const Context &) { return paper_behaviour(); }},
      {4, "Sobol estimator", 60, sobol_estimator},
      {5, "Sobol campaign trend", 1800, sobol_campaign},
      {6, "safety thresholds", 1200, safety_thresholds},
      {7, "robustness sweeps", 1800, robustness_sweeps},
      {8, "estimation round trip", 600, estimation_round_trip},
      {9, "determinism", 1e9, determinism},
  };

  auto emit = [&](const std::string &line) {
    std::fputs(line.c_str(), stdout);
    std::fflush(stdout);
    if (report.is_open())
      report << line << std::flush;
  };
  int failed = 0;
  for (const auto &c : criteria) {
    if (!only.empty() && !only.count(c.id))
      continue;
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<Check> checks;
    try {
      checks = c.run(ctx);
    } catch (const std::exception &e) {
      checks.push_back({false, std::string("exception: ") + e.what()});
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget_s < 1e8)
      checks.push_back(runtime_check(secs, c.budget_s));
    const bool ok = !checks.empty() &&
                    std::all_of(checks.begin(), checks.end(), [](const Check &k) { return k.ok; });
    failed += !ok;
    emit(fmt("%s  %d  %s  (%.1f s)\n", ok ? "PASS" : "FAIL", c.id, c.name, secs));
    for (const auto &k : checks)
      emit("        " + std::string(k.ok ? "ok   " : "FAIL ") + k.text + "\n");
  }
  emit(fmt("%d criteria failed\n", failed));
  return strict && failed ? 1 : 0;
}

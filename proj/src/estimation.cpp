#include "parapack/estimation.hpp"

#include "parapack/csv.hpp"
#include "parapack/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>

namespace parapack {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool present(double v) { return !std::isnan(v); }

// Advances `j` to the last prediction row not later than t.
std::size_t align(const SimResult &pred, std::size_t j, double t) {
  while (j + 1 < pred.size() && pred.time[j + 1] <= t + 1e-9)
    ++j;
  return j;
}

} // namespace

std::optional<double> MeasurementSet::ambient_c() const {
  double acc = 0.0;
  std::size_t n = 0;
  for (double v : t_amb_c)
    if (present(v))
      acc += v, ++n;
  if (n == 0)
    return std::nullopt;
  return acc / static_cast<double>(n);
}

bool MeasurementSet::has_temperatures() const {
  return std::any_of(tab_temp_c.begin(), tab_temp_c.end(), [](double v) { return present(v); });
}

void MeasurementSet::validate() const {
  const auto m = time.size();
  if (n_cells < 2)
    throw DomainError("measurement set needs at least 2 cells");
  if (m < 2)
    throw DomainError("measurement set needs at least 2 rows");
  if (total_current.size() != m || v_module.size() != m || t_amb_c.size() != m ||
      branch_current.size() != m * n_cells || tab_temp_c.size() != m * n_cells)
    throw DomainError("measurement set columns differ in length");
  for (std::size_t i = 0; i < m; ++i) {
    if (!std::isfinite(time[i]))
      throw DomainError("measurement time is not finite at row " + std::to_string(i));
    if (i > 0 && !(time[i] > time[i - 1]))
      throw DomainError("measurement time not strictly increasing at row " + std::to_string(i));
    if (!present(total_current[i]))
      throw DomainError("total current missing at row " + std::to_string(i));
  }
}

std::vector<std::size_t> MeasurementSet::inconsistent_rows(double sum_tolerance_a) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < time.size(); ++i) {
    double sum = 0.0;
    std::size_t have = 0;
    for (std::size_t k = 0; k < n_cells; ++k)
      if (present(current(i, k)))
        sum += current(i, k), ++have;
    if (have == n_cells && std::abs(sum - total_current[i]) > sum_tolerance_a)
      rows.push_back(i);
  }
  return rows;
}

void fill_temperature_gaps(MeasurementSet &data, double max_gap_s) {
  const auto n = data.n_cells;
  // Temperature cadence: median spacing of the rows where any cell logged
  // a temperature. Rows on that grid are candidates, even when every cell
  // dropped out there.
  std::vector<std::size_t> logged;
  for (std::size_t i = 0; i < data.size(); ++i)
    for (std::size_t k = 0; k < n; ++k)
      if (present(data.tab(i, k))) {
        logged.push_back(i);
        break;
      }
  if (logged.size() < 2)
    return;
  std::vector<double> spacing;
  for (std::size_t j = 1; j < logged.size(); ++j)
    spacing.push_back(data.time[logged[j]] - data.time[logged[j - 1]]);
  std::nth_element(spacing.begin(), spacing.begin() + spacing.size() / 2, spacing.end());
  const double dt = spacing[spacing.size() / 2];
  const double t_first = data.time[logged.front()];
  std::vector<std::size_t> rows;
  for (std::size_t i = logged.front(); i <= logged.back(); ++i) {
    const double steps = (data.time[i] - t_first) / dt;
    if (std::abs(steps - std::round(steps)) <= 0.05)
      rows.push_back(i);
  }
  for (std::size_t k = 0; k < n; ++k) {
    std::optional<std::size_t> prev;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto i = rows[r];
      if (!present(data.tab(i, k)))
        continue;
      if (prev && r > *prev + 1) {
        const auto i0 = rows[*prev];
        const double t0 = data.time[i0], t1 = data.time[i];
        if (t1 - t0 <= max_gap_s) {
          const double v0 = data.tab(i0, k), v1 = data.tab(i, k);
          for (std::size_t q = *prev + 1; q < r; ++q) {
            const auto iq = rows[q];
            const double w = (data.time[iq] - t0) / (t1 - t0);
            data.tab_temp_c[iq * n + k] = v0 + w * (v1 - v0);
          }
        }
      }
      prev = r;
    }
  }
}

MeasurementSet load_measurements(const std::filesystem::path &path, const LoadOptions &options) {
  const auto table = csv::read(path);
  const auto source = path.string();
  auto col = [&](const std::string &name) {
    const auto c = table.column(name);
    if (!c)
      throw ParseError(source + ": missing column '" + name + "'");
    return *c;
  };
  std::size_t n = 0;
  while (table.column("i" + std::to_string(n + 1) + "_a"))
    ++n;
  if (n < 2)
    throw ParseError(source + ": expected branch current columns i1_a, i2_a, ...");

  const auto c_t = col("t_s"), c_i = col("i_total_a"), c_v = col("v_module_v");
  const auto c_amb = table.column("t_amb_c");
  std::vector<std::size_t> c_branch;
  std::vector<std::optional<std::size_t>> c_tab;
  std::size_t n_tab = 0;
  for (std::size_t k = 1; k <= n; ++k) {
    c_branch.push_back(col("i" + std::to_string(k) + "_a"));
    c_tab.push_back(table.column("t" + std::to_string(k) + "_c"));
    n_tab += c_tab.back().has_value();
  }
  if (n_tab != 0 && n_tab != n)
    throw ParseError(source + ": tab temperature columns must be present for every cell or none");

  MeasurementSet d;
  d.n_cells = n;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto &row = table.rows[r];
    const auto ctx = source + ":" + std::to_string(table.line_numbers[r]);
    auto num = [&](std::optional<std::size_t> c) {
      return c ? csv::to_number(row[*c], ctx).value_or(kNaN) : kNaN;
    };
    const double t = num(c_t);
    if (!present(t))
      throw ParseError(ctx + ": empty time cell");
    d.time.push_back(t);
    d.total_current.push_back(num(c_i));
    d.v_module.push_back(num(c_v));
    d.t_amb_c.push_back(num(c_amb));
    for (auto c : c_branch)
      d.branch_current.push_back(num(c));
    for (auto c : c_tab)
      d.tab_temp_c.push_back(num(c));
  }
  d.validate();
  d.flagged_rows = d.inconsistent_rows(options.sum_tolerance_a);
  if (options.gap_fill)
    fill_temperature_gaps(d, options.max_gap_s);
  return d;
}

void write_measurements(const MeasurementSet &d, std::ostream &out) {
  const auto n = d.n_cells;
  out << "t_s,i_total_a";
  for (std::size_t k = 1; k <= n; ++k)
    out << ",i" << k << "_a";
  out << ",v_module_v";
  for (std::size_t k = 1; k <= n; ++k)
    out << ",t" << k << "_c";
  out << ",t_amb_c\n";
  auto cell = [&](double v) { return present(v) ? csv::format(v) : std::string(); };
  for (std::size_t i = 0; i < d.size(); ++i) {
    out << csv::format(d.time[i]) << ',' << cell(d.total_current[i]);
    for (std::size_t k = 0; k < n; ++k)
      out << ',' << cell(d.current(i, k));
    out << ',' << cell(d.v_module[i]);
    for (std::size_t k = 0; k < n; ++k)
      out << ',' << cell(d.tab(i, k));
    out << ',' << cell(d.t_amb_c[i]) << '\n';
  }
}

namespace {

// Rounds to the given number of decimals. Dividing the rounded integer by
// a power of ten gives the double nearest the short decimal, so the CSV
// stays compact.
double quantize(double v, int decimals) {
  if (decimals < 0)
    return v;
  const double scale = std::pow(10.0, decimals);
  return std::round(v * scale) / scale;
}

} // namespace

MeasurementSet synthesize_measurements(const ModuleConfig &config, const Protocol &protocol,
                                       const NoiseOptions &noise,
                                       const IntegratorSettings &settings) {
  if (!(noise.current_dt_s > 0.0 && noise.temp_dt_s >= noise.current_dt_s))
    throw DomainError("synthesize_measurements: need 0 < current_dt <= temp_dt");
  if (noise.current_sigma_a < 0.0 || noise.temp_sigma_c < 0.0)
    throw DomainError("synthesize_measurements: noise levels must be >= 0");
  Protocol p = protocol;
  p.output_times.clear();
  p.output_dt = noise.current_dt_s;
  const auto sim = run(config, p, settings);

  std::mt19937_64 rng(noise.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto n = sim.n_cells;
  MeasurementSet d;
  d.n_cells = n;
  const double amb = quantize(sim.t_ambient_c, noise.temp_decimals);
  const int cd = noise.current_decimals, td = noise.temp_decimals;
  for (std::size_t i = 0; i < sim.size(); ++i) {
    const double t = quantize(sim.time[i], noise.time_decimals);
    if (i > 0 && !(t > d.time.back()))
      continue; // the termination sample can round onto the previous row
    const double ratio = t / noise.temp_dt_s;
    const bool temp_row = std::abs(ratio - std::round(ratio)) < 1e-6;
    d.time.push_back(t);
    for (std::size_t k = 0; k < n; ++k)
      d.branch_current.push_back(
          quantize(sim.at(sim.current, i, k) + noise.current_sigma_a * gauss(rng), cd));
    d.total_current.push_back(
        quantize(sim.total_current[i] + noise.current_sigma_a * gauss(rng), cd));
    d.v_module.push_back(quantize(sim.terminal_voltage[i], noise.voltage_decimals));
    for (std::size_t k = 0; k < n; ++k)
      d.tab_temp_c.push_back(
          temp_row ? quantize(sim.at(sim.tab_temp_c, i, k) + noise.temp_sigma_c * gauss(rng), td)
                   : kNaN);
    d.t_amb_c.push_back(temp_row ? amb : kNaN);
  }
  return d;
}

std::size_t electrical_dim(std::size_t n_cells) { return 3 * n_cells + 3; }

std::vector<double> pack_electrical(const std::vector<CellParams> &cells) {
  if (cells.empty())
    throw DomainError("pack_electrical: no cells");
  std::vector<double> p;
  for (const auto &c : cells) {
    p.push_back(c.r_ohm);
    p.push_back(c.r_contact);
    p.push_back(c.r_ct0);
  }
  p.push_back(cells[0].r_w);
  p.push_back(cells[0].c_rc);
  p.push_back(cells[0].e_act);
  return p;
}

void apply_electrical(std::span<const double> params, ModuleConfig &config) {
  const auto n = config.size();
  if (params.size() != electrical_dim(n))
    throw DomainError("apply_electrical: parameter vector has the wrong length");
  for (std::size_t k = 0; k < n; ++k) {
    auto &c = config.cells[k];
    c.r_ohm = params[3 * k];
    c.r_contact = params[3 * k + 1];
    c.r_ct0 = params[3 * k + 2];
    c.r_w = params[3 * n];
    c.c_rc = params[3 * n + 1];
    c.e_act = params[3 * n + 2];
  }
}

void FitSpec::validate(std::size_t n_cells) const {
  const auto d = electrical_dim(n_cells);
  if (lower.size() != d || upper.size() != d || initial.size() != d)
    throw DomainError("fit spec: vectors must have length 3N+3");
  for (std::size_t i = 0; i < d; ++i) {
    if (!(lower[i] > 0.0 && lower[i] < upper[i]))
      throw DomainError("fit spec: bounds must be positive and ordered");
    if (!(initial[i] >= lower[i] && initial[i] <= upper[i]))
      throw DomainError("fit spec: initial guess outside bounds at index " + std::to_string(i));
  }
}

FitSpec FitSpec::around(const std::vector<CellParams> &reference, double perturb,
                        std::uint64_t seed, double lo_factor, double hi_factor) {
  if (!(perturb >= 0.0 && perturb < 1.0) || !(lo_factor > 0.0 && lo_factor < 1.0 - perturb) ||
      !(hi_factor > 1.0 + perturb))
    throw DomainError("FitSpec::around: inconsistent perturbation and bound factors");
  const auto ref = pack_electrical(reference);
  std::mt19937_64 rng(seed);
  FitSpec s;
  for (double v : ref) {
    const double u = std::generate_canonical<double, 53>(rng);
    s.lower.push_back(v * lo_factor);
    s.upper.push_back(v * hi_factor);
    s.initial.push_back(v * (1.0 + perturb * (2.0 * u - 1.0)));
  }
  return s;
}

ThermalParams perturb_thermal(const ThermalParams &thermal, double spread, std::uint64_t seed) {
  if (!(spread >= 0.0 && spread < 1.0))
    throw DomainError("perturb_thermal: spread must be in [0, 1)");
  std::mt19937_64 rng(seed ^ 0x7468657231ULL);
  auto factor = [&] { return 1.0 + spread * (2.0 * std::generate_canonical<double, 53>(rng) - 1.0); };
  ThermalParams out = thermal;
  out.c_p *= factor();
  out.rth_core_surface *= factor();
  out.rth_surface_ambient *= factor();
  return out;
}

SimResult replay(const ModuleConfig &config, const MeasurementSet &data,
                 const EstimationOptions &options) {
  const double t0 = data.time.front();
  std::vector<double> t(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    t[i] = data.time[i] - t0;
  const auto profile = compress_profile(t, data.total_current, options.profile_tolerance_a);
  ModuleConfig cfg = config;
  if (const auto amb = data.ambient_c())
    cfg.t_ambient_k = to_kelvin(*amb);
  return run_profile(cfg, profile, t, options.integrator, options.initial_soc);
}

double electrical_cost(std::span<const double> params, const MeasurementSet &data,
                       const ModuleConfig &config_template, const EstimationOptions &options) {
  try {
    ModuleConfig cfg = config_template;
    apply_electrical(params, cfg);
    const auto pred = replay(cfg, data, options);
    const double t0 = data.time.front();
    double acc = 0.0;
    std::size_t j = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      j = align(pred, j, data.time[i] - t0);
      for (std::size_t k = 0; k < data.n_cells; ++k) {
        const double m = data.current(i, k);
        if (present(m)) {
          const double r = pred.at(pred.current, j, k) - m;
          acc += r * r;
        }
      }
    }
    const double c = std::sqrt(acc);
    return std::isfinite(c) ? c : kCostSentinel;
  } catch (const Error &) {
    return kCostSentinel;
  }
}

double thermal_cost(const ThermalParams &thermal, const MeasurementSet &data,
                    const ModuleConfig &config, std::size_t target_cell,
                    const EstimationOptions &options) {
  if (target_cell >= data.n_cells)
    throw DomainError("thermal_cost: target cell out of range");
  try {
    ModuleConfig cfg = config;
    cfg.thermal = thermal;
    const auto pred = replay(cfg, data, options);
    const double t0 = data.time.front();
    double acc = 0.0;
    std::size_t j = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double m = data.tab(i, target_cell);
      if (!present(m))
        continue;
      j = align(pred, j, data.time[i] - t0);
      const double r = pred.at(pred.tab_temp_c, j, target_cell) - m;
      acc += r * r;
    }
    const double c = std::sqrt(acc);
    return std::isfinite(c) ? c : kCostSentinel;
  } catch (const Error &) {
    return kCostSentinel;
  }
}

RmseRow rmse(const SimResult &pred, const MeasurementSet &data) {
  const auto n = data.n_cells;
  if (pred.n_cells != n || pred.size() == 0)
    throw DomainError("rmse: prediction does not match the measurement set");
  std::vector<double> si(n, 0.0), st(n, 0.0);
  std::vector<std::size_t> ni(n, 0), nt(n, 0);
  const double t0 = data.time.front();
  std::size_t j = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    j = align(pred, j, data.time[i] - t0);
    for (std::size_t k = 0; k < n; ++k) {
      if (present(data.current(i, k))) {
        const double r = pred.at(pred.current, j, k) - data.current(i, k);
        si[k] += r * r, ++ni[k];
      }
      if (present(data.tab(i, k))) {
        const double r = pred.at(pred.tab_temp_c, j, k) - data.tab(i, k);
        st[k] += r * r, ++nt[k];
      }
    }
  }
  RmseRow row;
  for (std::size_t k = 0; k < n; ++k) {
    row.current_a.push_back(ni[k] ? std::sqrt(si[k] / static_cast<double>(ni[k])) : kNaN);
    row.tab_temp_c.push_back(nt[k] ? std::sqrt(st[k] / static_cast<double>(nt[k])) : kNaN);
  }
  return row;
}

ElectricalFit fit_electrical(const MeasurementSet &data, const ModuleConfig &config_template,
                             const FitSpec &spec, const EstimationOptions &options) {
  config_template.validate();
  spec.validate(config_template.size());
  if (data.n_cells != config_template.size())
    throw DomainError("fit_electrical: data and module differ in cell count");

  const Objective f = [&](std::span<const double> x) {
    return electrical_cost(x, data, config_template, options);
  };

  // The currents pin each cell's r_ohm + r_contact tightly but the split only
  // weakly, so the search runs over (total, ohmic share) per cell. Raw values
  // are clamped into the spec bounds.
  const auto n = config_template.size();
  const auto d = electrical_dim(n);
  auto to_raw = [&](std::span<const double> w) {
    std::vector<double> x(w.begin(), w.end());
    for (std::size_t k = 0; k < n; ++k) {
      const double total = w[3 * k], share = w[3 * k + 1];
      x[3 * k] = share * total;
      x[3 * k + 1] = total - x[3 * k];
    }
    for (std::size_t i = 0; i < d; ++i)
      x[i] = std::clamp(x[i], spec.lower[i], spec.upper[i]);
    return x;
  };
  std::vector<double> w0 = spec.initial, wlo = spec.lower, whi = spec.upper;
  for (std::size_t k = 0; k < n; ++k) {
    const auto io = 3 * k, ic = 3 * k + 1;
    w0[io] = spec.initial[io] + spec.initial[ic];
    w0[ic] = spec.initial[io] / w0[io];
    wlo[io] = spec.lower[io] + spec.lower[ic];
    whi[io] = spec.upper[io] + spec.upper[ic];
    wlo[ic] = std::min(0.02, w0[ic]);
    whi[ic] = std::max(0.98, w0[ic]);
  }
  const Objective g = [&](std::span<const double> w) { return f(to_raw(w)); };
  auto opt = options.optimizer;
  opt.log_scale = false;
  const auto res = nelder_mead(g, w0, wlo, whi, opt);

  ElectricalFit fit;
  fit.params = to_raw(res.x);
  fit.config = config_template;
  apply_electrical(fit.params, fit.config);
  auto &rep = fit.report;
  rep.initial_cost = f(spec.initial);
  rep.final_cost = res.f;
  rep.iterations = res.iterations;
  rep.evaluations = res.evals;
  rep.converged = res.converged;
  rep.cost_history = res.history;
  if (!res.converged)
    rep.warning = "evaluation budget exhausted; best point so far returned";
  rep.rmse = rmse(replay(fit.config, data, options), data);
  return fit;
}

ThermalFit fit_thermal_initial(const MeasurementSet &data, std::span<const double> r_eis,
                               const ThermalParams &prior, const NelderMeadOptions &options) {
  prior.validate();
  const auto n = data.n_cells;
  if (r_eis.size() != n)
    throw DomainError("fit_thermal_initial: one r_eis value per cell required");
  const auto m = data.size();
  const auto amb_logged = data.ambient_c();
  if (!amb_logged)
    throw DomainError("fit_thermal_initial: no ambient temperature samples");
  const double amb = *amb_logged;

  // heat input per row, missing currents held from the previous sample
  std::vector<double> heat(m * n, 0.0);
  double max_heat = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    double last = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (present(data.current(i, k)))
        last = data.current(i, k);
      heat[i * n + k] = last * last * r_eis[k];
      max_heat = std::max(max_heat, heat[i * n + k]);
    }
  }
  double t_lo = std::numeric_limits<double>::infinity(), t_hi = -t_lo;
  for (double v : data.tab_temp_c)
    if (present(v))
      t_lo = std::min(t_lo, v), t_hi = std::max(t_hi, v);

  ThermalFit out;
  out.params = prior;
  if (!(max_heat > 0.0) || !(t_hi - t_lo > 0.05)) {
    out.identified = false;
    out.message = "no thermal excitation in the data (zero heat input or constant temperature)";
    return out;
  }

  const double share = prior.rth_core_surface / prior.total_resistance();
  auto simulate_cost = [&](double c_p, double r_sum, std::vector<double> *per_cell) {
    const double tab_gain = 1.0 - share;
    const double tau = c_p * r_sum;
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      double rise = 0.0, acc = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        if (i > 0) {
          const double dt = data.time[i] - data.time[i - 1];
          const double decay = std::exp(-dt / tau);
          rise = rise * decay + heat[(i - 1) * n + k] * r_sum * (1.0 - decay);
        }
        const double meas = data.tab(i, k);
        if (present(meas)) {
          const double r = amb + tab_gain * rise - meas;
          acc += r * r;
        }
      }
      if (per_cell)
        per_cell->push_back(std::sqrt(acc));
      total += acc;
    }
    return std::sqrt(total);
  };

  const std::vector<double> x0 = {prior.c_p, prior.total_resistance()};
  const std::vector<double> lo = {prior.c_p * 0.2, prior.total_resistance() * 0.2};
  const std::vector<double> hi = {prior.c_p * 5.0, prior.total_resistance() * 5.0};
  const auto res = nelder_mead(
      [&](std::span<const double> x) { return simulate_cost(x[0], x[1], nullptr); }, x0, lo, hi,
      options);
  out.params.c_p = res.x[0];
  out.params.rth_core_surface = share * res.x[1];
  out.params.rth_surface_ambient = (1.0 - share) * res.x[1];
  simulate_cost(res.x[0], res.x[1], &out.per_cell_cost);
  out.identified = true;
  out.message = res.converged ? "converged" : "evaluation budget exhausted";
  return out;
}

ThermalFit refit_thermal(const MeasurementSet &data, const ModuleConfig &config,
                         const EstimationOptions &options) {
  config.validate();
  if (data.n_cells != config.size())
    throw DomainError("refit_thermal: data and module differ in cell count");
  const auto &p = config.thermal;
  const std::vector<double> x0 = {p.c_p, p.rth_core_surface, p.rth_surface_ambient};
  std::vector<double> lo, hi;
  for (double v : x0)
    lo.push_back(v / 3.0), hi.push_back(v * 3.0);

  ThermalFit out;
  double best = std::numeric_limits<double>::infinity();
  bool any_converged = false;
  for (std::size_t k = 0; k < data.n_cells; ++k) {
    const auto res = nelder_mead(
        [&](std::span<const double> x) {
          return thermal_cost(ThermalParams{x[0], x[1], x[2]}, data, config, k, options);
        },
        x0, lo, hi, options.optimizer);
    const ThermalParams fitted{res.x[0], res.x[1], res.x[2]};
    out.per_cell.push_back(fitted);
    out.per_cell_cost.push_back(res.f);
    if (res.f < best) {
      best = res.f;
      out.params = fitted;
      out.cell = k;
      any_converged = res.converged;
    }
  }
  out.identified = best < kCostSentinel;
  out.message = !out.identified  ? "every per-cell fit failed"
                : any_converged ? "converged"
                                : "evaluation budget exhausted";
  return out;
}

ThermalParams FitPipelineResult::final_thermal(const ModuleConfig &config_template) const {
  if (thermal && thermal->identified)
    return thermal->params;
  if (initial_thermal && initial_thermal->identified)
    return initial_thermal->params;
  return config_template.thermal;
}

FitPipelineResult fit_pipeline(const MeasurementSet &data, const ModuleConfig &config_template,
                               const FitSpec &spec, const EstimationOptions &options) {
  FitPipelineResult out;
  auto stage = [](const char *name, auto &&fn) {
    try {
      return fn();
    } catch (const Error &e) {
      throw Error(std::string(name) + ": " + e.what());
    }
  };
  ModuleConfig tmpl = config_template;
  const bool thermal = data.has_temperatures() && data.ambient_c().has_value();
  if (thermal) {
    std::vector<double> r_eis;
    for (std::size_t k = 0; k < data.n_cells; ++k) {
      const double *p = spec.initial.data();
      const auto n = data.n_cells;
      r_eis.push_back(p[3 * k] + p[3 * k + 2] + p[3 * n]);
    }
    out.initial_thermal = stage("thermal_initial", [&] {
      return fit_thermal_initial(data, r_eis, tmpl.thermal, options.optimizer);
    });
    if (out.initial_thermal->identified)
      tmpl.thermal = out.initial_thermal->params;
    else
      out.notices.push_back("thermal_initial: " + out.initial_thermal->message);
  } else {
    out.notices.push_back("no tab or ambient temperatures logged; thermal stages skipped");
  }
  out.electrical =
      stage("electrical", [&] { return fit_electrical(data, tmpl, spec, options); });
  if (!out.electrical.report.warning.empty())
    out.notices.push_back("electrical: " + out.electrical.report.warning);
  if (thermal) {
    out.thermal = stage("thermal_refit",
                        [&] { return refit_thermal(data, out.electrical.config, options); });
    if (out.thermal->identified) {
      out.electrical.config.thermal = out.thermal->params;
      out.electrical.report.rmse = rmse(replay(out.electrical.config, data, options), data);
    } else {
      out.notices.push_back("thermal_refit: " + out.thermal->message);
    }
  }
  return out;
}

void write_rmse_table(const std::vector<std::pair<std::string, RmseRow>> &rows, std::ostream &out) {
  if (rows.empty())
    return;
  const auto n = rows.front().second.current_a.size();
  out << "configuration";
  for (std::size_t k = 1; k <= n; ++k)
    out << ",i" << k << "_rmse_a";
  for (std::size_t k = 1; k <= n; ++k)
    out << ",t" << k << "_rmse_c";
  out << '\n';
  for (const auto &[name, row] : rows) {
    out << name;
    for (double v : row.current_a)
      out << ',' << csv::format(v);
    for (double v : row.tab_temp_c)
      out << ',' << csv::format(v);
    out << '\n';
  }
}

void write_fit_report(const ElectricalFit &fit, const ThermalFit &thermal, std::ostream &out) {
  nlohmann::ordered_json j;
  const auto &rep = fit.report;
  j["electrical"] = {{"initial_cost", rep.initial_cost},
                     {"final_cost", rep.final_cost},
                     {"iterations", rep.iterations},
                     {"evaluations", rep.evaluations},
                     {"converged", rep.converged},
                     {"warning", rep.warning}};
  auto cells = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < fit.config.size(); ++k) {
    const auto &c = fit.config.cells[k];
    cells.push_back({{"cell", k + 1},
                     {"r_ohm_uohm", c.r_ohm * 1e6},
                     {"r_contact_uohm", c.r_contact * 1e6},
                     {"r_ct0_uohm", c.r_ct0 * 1e6},
                     {"rmse_current_a", rep.rmse.current_a[k]},
                     {"rmse_tab_temp_c", rep.rmse.tab_temp_c[k]}});
  }
  j["cells"] = cells;
  const auto &c0 = fit.config.cells.front();
  j["shared"] = {{"r_w_uohm", c0.r_w * 1e6}, {"c_rc_f", c0.c_rc}, {"e_act_j_per_mol", c0.e_act}};
  j["thermal"] = {{"c_p_j_per_k", thermal.params.c_p},
                  {"rth_core_surface_k_per_w", thermal.params.rth_core_surface},
                  {"rth_surface_ambient_k_per_w", thermal.params.rth_surface_ambient},
                  {"identified", thermal.identified},
                  {"message", thermal.message}};
  if (thermal.cell)
    j["thermal"]["selected_cell"] = *thermal.cell + 1;
  out << j.dump(2) << '\n';
}

} // namespace parapack

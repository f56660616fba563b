#include "parapack/simulate.hpp"

#include "parapack/csv.hpp"
#include "parapack/errors.hpp"
#include "parapack/scenarios.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

namespace parapack {

double LoadStep::resolve_current(const ModuleConfig &config) const {
  if (mode == StepMode::rest)
    return 0.0;
  if (current_a)
    return *current_a;
  if (c_rate)
    return *c_rate * config.rated_module_capacity_ah();
  throw DomainError("constant-current step needs a current or a C-rate");
}

void Protocol::validate(std::size_t n_cells) const {
  if (steps.empty())
    throw DomainError("protocol has no steps");
  for (std::size_t s = 0; s < steps.size(); ++s) {
    const auto &st = steps[s];
    const auto where = "protocol step " + std::to_string(s) + ": ";
    if (st.duration_limit_s < 0.0 || !std::isfinite(st.duration_limit_s))
      throw DomainError(where + "duration limit must be finite and >= 0");
    if (st.duration_limit_s == 0.0 && st.terminators.empty())
      throw DomainError(where + "needs a duration limit or at least one terminator");
    if (st.mode == StepMode::constant_current && !st.current_a && !st.c_rate)
      throw DomainError(where + "constant-current step needs a current or a C-rate");
    for (const auto &e : st.terminators)
      if (!std::isfinite(e.threshold))
        throw DomainError(where + "terminator threshold must be finite");
  }
  if (!initial_soc.empty() && initial_soc.size() != 1 && initial_soc.size() != n_cells)
    throw DomainError("initial_soc must have 0, 1 or N entries");
  for (double z : initial_soc)
    if (!(z >= 0.0 && z <= 1.0))
      throw DomainError("initial_soc outside [0, 1]");
  if (t_ambient_k && !(*t_ambient_k > 0.0))
    throw DomainError("ambient temperature must be positive");
  if (output_times.empty() && !(output_dt > 0.0))
    throw DomainError("output_dt must be positive");
  if (!std::is_sorted(output_times.begin(), output_times.end()))
    throw DomainError("output_times must be sorted");
  if (!(soc_cutoff >= 0.0 && soc_cutoff < 1.0))
    throw DomainError("soc_cutoff outside [0, 1)");
}

Protocol Protocol::discharge(double c_rate, double v_cutoff, std::optional<double> i_max) {
  LoadStep st;
  st.mode = StepMode::constant_current;
  st.c_rate = c_rate;
  st.terminators.push_back(EventSpec::make(EventKind::terminal_voltage_below, v_cutoff));
  if (i_max)
    st.terminators.push_back(EventSpec::make(EventKind::any_branch_current_above, *i_max));
  Protocol p;
  p.steps.push_back(std::move(st));
  return p;
}

Protocol Protocol::rest(double duration_s) {
  LoadStep st;
  st.mode = StepMode::rest;
  st.duration_limit_s = duration_s;
  Protocol p;
  p.steps.push_back(std::move(st));
  return p;
}

std::string to_string(TerminationCause cause) {
  switch (cause) {
  case TerminationCause::voltage_cutoff:
    return "voltage_cutoff";
  case TerminationCause::over_current:
    return "over_current";
  case TerminationCause::over_temperature:
    return "over_temperature";
  case TerminationCause::duration:
    return "duration";
  case TerminationCause::soc_floor:
    return "soc_floor";
  case TerminationCause::soc_cutoff:
    return "soc_cutoff";
  }
  return "unknown";
}

std::vector<double> SimResult::final_state() const {
  if (time.empty())
    return {};
  const auto i = time.size() - 1;
  std::vector<double> y(3 * n_cells);
  for (std::size_t k = 0; k < n_cells; ++k) {
    y[k] = at(v_rc, i, k);
    y[n_cells + k] = at(soc, i, k);
    y[2 * n_cells + k] = (at(core_temp_c, i, k) - t_ambient_c);
  }
  return y;
}

namespace {

// Upper bound on how long a step can last when nothing limits it.
double open_span(const ModuleConfig &cfg, double current) {
  double q = 0.0;
  for (const auto &c : cfg.cells)
    q += c.q_coulomb();
  if (std::abs(current) > 0.0)
    return 2.0 * q / std::abs(current) + 3600.0;
  return 1e6;
}

struct StepEvents {
  std::vector<Event> events;
  std::vector<TerminationCause> causes;
};

std::size_t argmax_abs(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < v.size(); ++k)
    if (std::abs(v[k]) > std::abs(v[best]))
      best = k;
  return best;
}

void append_sample(SimResult &r, const ModuleConfig &cfg, double t, std::span<const double> y,
                   double current) {
  const StateView s(y);
  const auto out = evaluate_outputs(cfg, y, current);
  r.time.push_back(t);
  r.terminal_voltage.push_back(out.terminal_voltage);
  r.total_current.push_back(current);
  for (std::size_t k = 0; k < s.size(); ++k) {
    r.current.push_back(out.currents[k]);
    r.soc.push_back(s.z(k));
    r.v_rc.push_back(s.v_rc(k));
    r.core_temp_c.push_back(to_celsius(cfg.t_ambient_k + s.t_rise(k)));
    r.tab_temp_c.push_back(to_celsius(out.surface_temps[k]));
    r.q_gen.push_back(out.q_gen[k]);
  }
}

} // namespace

SimResult run(const ModuleConfig &config, const Protocol &protocol,
              const IntegratorSettings &settings) {
  config.validate();
  const auto n = config.size();
  protocol.validate(n);
  settings.validate();

  ModuleConfig cfg = config;
  if (protocol.t_ambient_k)
    cfg.t_ambient_k = *protocol.t_ambient_k;

  SimState init = SimState::uniform(n, kDefaultInitialSoc);
  if (protocol.initial_soc.size() == 1)
    std::fill(init.z.begin(), init.z.end(), protocol.initial_soc[0]);
  else if (protocol.initial_soc.size() == n)
    init.z = protocol.initial_soc;
  std::vector<double> y = init.pack();

  SimResult result;
  result.n_cells = n;
  result.t_ambient_c = to_celsius(cfg.t_ambient_k);

  std::vector<double> scratch(n);
  double t = 0.0;
  if (!protocol.output_times.empty())
    t = std::min(t, protocol.output_times.front());

  for (std::size_t s = 0; s < protocol.steps.size(); ++s) {
    const auto &step = protocol.steps[s];
    const double current = step.resolve_current(cfg);

    double span = step.duration_limit_s > 0.0 ? step.duration_limit_s : open_span(cfg, current);
    for (const auto &e : step.terminators)
      if (e.kind == EventKind::time_reached)
        span = std::min(span, e.threshold);
    if (!(span > 0.0))
      continue;
    const double t_end = t + span;

    StepEvents ev;
    auto add = [&](Event e, TerminationCause c) {
      ev.events.push_back(std::move(e));
      ev.causes.push_back(c);
    };
    for (const auto &spec : step.terminators) {
      const double thr = spec.threshold;
      switch (spec.kind) {
      case EventKind::terminal_voltage_below:
        add({[&cfg, &scratch, current, thr](double, std::span<const double> yy) {
               return branch_currents(cfg, StateView(yy), current, scratch) - thr;
             },
             spec.direction},
            TerminationCause::voltage_cutoff);
        break;
      case EventKind::any_branch_current_above:
        add({[&cfg, &scratch, current, thr](double, std::span<const double> yy) {
               branch_currents(cfg, StateView(yy), current, scratch);
               double m = 0.0;
               for (double i : scratch)
                 m = std::max(m, std::abs(i));
               return m - thr;
             },
             spec.direction},
            TerminationCause::over_current);
        break;
      case EventKind::any_core_temp_above:
        add({[&cfg, thr](double, std::span<const double> yy) {
               const StateView v(yy);
               double m = -1e300;
               for (std::size_t k = 0; k < v.size(); ++k)
                 m = std::max(m, cfg.t_ambient_k + v.t_rise(k));
               return m - thr;
             },
             spec.direction},
            TerminationCause::over_temperature);
        break;
      case EventKind::time_reached:
        break; // folded into the span
      }
    }
    add({[floor = protocol.soc_floor](double, std::span<const double> yy) {
           const StateView v(yy);
           double m = 1.0;
           for (std::size_t k = 0; k < v.size(); ++k)
             m = std::min(m, v.z(k));
           return m - floor;
         },
         Crossing::falling},
        TerminationCause::soc_floor);
    if (protocol.soc_cutoff > 0.0 && current > 0.0) {
      add({[cut = protocol.soc_cutoff](double, std::span<const double> yy) {
             const StateView v(yy);
             double acc = 0.0;
             for (std::size_t k = 0; k < v.size(); ++k)
               acc += v.z(k);
             return acc / static_cast<double>(v.size()) - cut;
           },
           Crossing::falling},
          TerminationCause::soc_cutoff);
    }

    std::vector<double> out_times;
    const bool first = s == 0;
    if (protocol.output_times.empty()) {
      const double dt = protocol.output_dt;
      double k0 = std::ceil(t / dt - 1e-9);
      for (double k = k0;; k += 1.0) {
        const double to = k * dt;
        if (to > t_end)
          break;
        if (first || to > t)
          out_times.push_back(to);
      }
    } else {
      for (double to : protocol.output_times)
        if (to <= t_end && (to > t || (first && to >= t)))
          out_times.push_back(to);
    }

    const Rhs rhs = [&cfg, current](double, std::span<const double> yy, std::span<double> d) {
      state_derivative(cfg, yy, current, d);
    };

    IntegrationResult res;
    try {
      res = integrate(rhs, y, t, t_end, settings, ev.events, out_times);
    } catch (const IntegrationError &e) {
      throw IntegrationError("protocol step " + std::to_string(s) + ": " + e.what());
    } catch (const DomainError &e) {
      throw IntegrationError("protocol step " + std::to_string(s) + ": " + e.what());
    }

    const auto &traj = res.trajectory;
    for (std::size_t i = 0; i < traj.size(); ++i) {
      // the first sample of a later step repeats the previous step's end
      if (!result.time.empty() && traj.t[i] <= result.time.back())
        continue;
      const auto yy = traj.state(i);
      const StateView v(yy);
      for (std::size_t k = 0; k < n; ++k)
        if (v.t_rise(k) < kMinTempRise || v.t_rise(k) > kMaxTempRise || !std::isfinite(v.t_rise(k)))
          throw IntegrationError("protocol step " + std::to_string(s) +
                                 ": temperature rise left the sanity band at t = " +
                                 std::to_string(traj.t[i]));
      append_sample(result, cfg, traj.t[i], yy, current);
    }

    y = res.termination.y;
    t = res.termination.t;
    if (res.termination.event) {
      const auto idx = *res.termination.event;
      Termination term;
      term.cause = ev.causes[idx];
      term.time = t;
      term.step = s;
      const StateView v(y);
      switch (term.cause) {
      case TerminationCause::over_current:
        branch_currents(cfg, v, current, scratch);
        term.cell = argmax_abs(scratch);
        break;
      case TerminationCause::over_temperature: {
        std::size_t best = 0;
        for (std::size_t k = 1; k < n; ++k)
          if (v.t_rise(k) > v.t_rise(best))
            best = k;
        term.cell = best;
        break;
      }
      case TerminationCause::soc_floor: {
        std::size_t best = 0;
        for (std::size_t k = 1; k < n; ++k)
          if (v.z(k) < v.z(best))
            best = k;
        term.cell = best;
        break;
      }
      default:
        break;
      }
      result.termination = term;
      return result;
    }
    result.termination = Termination{TerminationCause::duration, t, std::nullopt, s};
  }
  return result;
}

ImbalanceMetrics imbalance_metrics(const SimResult &r) {
  if (r.size() == 0)
    throw DomainError("imbalance_metrics: empty result");
  ImbalanceMetrics m;
  m.max_core_temp_c = -1e300;
  m.max_tab_temp_c = -1e300;
  const auto n = r.n_cells;
  for (std::size_t i = 0; i < r.size(); ++i) {
    auto spread = [&](const std::vector<double> &series) {
      const auto first = series.begin() + static_cast<std::ptrdiff_t>(i * n);
      const auto [lo, hi] = std::minmax_element(first, first + static_cast<std::ptrdiff_t>(n));
      return std::pair{*hi - *lo, *hi};
    };
    const auto [di, imax] = spread(r.current);
    const auto [dtab, tabmax] = spread(r.tab_temp_c);
    const auto [dcore, coremax] = spread(r.core_temp_c);
    if (di > m.max_current_spread)
      m.max_current_spread = di, m.t_current_spread = r.time[i];
    if (dtab > m.max_tab_spread)
      m.max_tab_spread = dtab, m.t_tab_spread = r.time[i];
    if (dcore > m.max_core_spread)
      m.max_core_spread = dcore, m.t_core_spread = r.time[i];
    if (coremax > m.max_core_temp_c)
      m.max_core_temp_c = coremax, m.t_max_core_temp = r.time[i];
    m.max_tab_temp_c = std::max(m.max_tab_temp_c, tabmax);
    for (std::size_t k = 0; k < n; ++k)
      m.max_abs_current = std::max(m.max_abs_current, std::abs(r.at(r.current, i, k)));
  }
  return m;
}

std::vector<CaseStudy> case_studies(const ModuleConfig &base, const IntegratorSettings &settings) {
  if (base.size() != 4)
    throw DomainError("case_studies: base module must have 4 cells");
  const CellParams mean = mean_cell(base.cells);
  const auto proto = Protocol::discharge(0.85);

  std::vector<CaseStudy> out;
  auto make = [&](std::string name, auto edit) {
    ModuleConfig m = uniform_module(mean, 4, base);
    edit(m.cells);
    out.push_back(CaseStudy{std::move(name), m, run(m, proto, settings)});
  };
  make("high_resistance_outlier", [](auto &c) { c[3].r_ohm *= 2.0; });
  make("low_resistance_outlier", [](auto &c) { c[3].r_ohm *= 0.5; });
  make("low_capacity_outlier", [](auto &c) { c[3].q_ah *= 0.7; });
  make("high_capacity_outlier", [](auto &c) {
    for (std::size_t k = 0; k < 3; ++k)
      c[k].q_ah *= 0.7;
  });
  return out;
}

CurrentProfile compress_profile(const std::vector<double> &time, const std::vector<double> &current,
                                double tolerance) {
  if (time.size() != current.size() || time.size() < 2)
    throw DomainError("compress_profile: need at least two matching samples");
  CurrentProfile p;
  std::size_t start = 0;
  double sum = current[0];
  for (std::size_t i = 1; i < time.size(); ++i) {
    const double mean = sum / static_cast<double>(i - start);
    if (std::abs(current[i] - mean) > tolerance) {
      p.time.push_back(time[start]);
      p.current.push_back(mean);
      start = i;
      sum = 0.0;
    }
    sum += current[i];
  }
  p.time.push_back(time[start]);
  p.current.push_back(sum / static_cast<double>(time.size() - start));
  p.time.push_back(time.back());
  // a trailing segment that starts at the last sample has zero length
  if (p.time[p.time.size() - 2] == p.time.back()) {
    p.time.erase(p.time.end() - 2);
    p.current.pop_back();
  }
  return p;
}

SimResult run_profile(const ModuleConfig &config, const CurrentProfile &profile,
                      const std::vector<double> &output_times, const IntegratorSettings &settings,
                      double initial_soc) {
  if (profile.time.size() != profile.current.size() + 1 || profile.current.empty())
    throw DomainError("run_profile: need one more breakpoint than segment currents");
  if (std::abs(profile.time.front()) > 1e-12)
    throw DomainError("run_profile: profile must start at t = 0");
  Protocol p;
  p.initial_soc = {initial_soc};
  p.output_times = output_times;
  for (std::size_t j = 0; j < profile.current.size(); ++j) {
    const double dur = profile.time[j + 1] - profile.time[j];
    if (!(dur > 0.0))
      throw DomainError("run_profile: breakpoints must increase");
    LoadStep st;
    st.mode = StepMode::constant_current;
    st.current_a = profile.current[j];
    st.duration_limit_s = dur;
    p.steps.push_back(std::move(st));
  }
  return run(config, p, settings);
}

void write_csv(const SimResult &r, std::ostream &out) {
  const auto n = r.n_cells;
  out << "t_s,v_terminal_v,i_total_a";
  const char *names[] = {"i", "soc", "v_rc", "t_core", "t_tab", "q_gen"};
  const char *units[] = {"_a", "", "_v", "_c", "_c", "_w"};
  for (std::size_t f = 0; f < 6; ++f)
    for (std::size_t k = 0; k < n; ++k)
      out << ',' << names[f] << (k + 1) << units[f];
  out << '\n';
  const std::vector<double> *series[] = {&r.current,     &r.soc,        &r.v_rc,
                                         &r.core_temp_c, &r.tab_temp_c, &r.q_gen};
  for (std::size_t i = 0; i < r.size(); ++i) {
    out << csv::format(r.time[i]) << ',' << csv::format(r.terminal_voltage[i]) << ','
        << csv::format(r.total_current[i]);
    for (const auto *s : series)
      for (std::size_t k = 0; k < n; ++k)
        out << ',' << csv::format(r.at(*s, i, k));
    out << '\n';
  }
}

SimResult read_csv(const csv::Table &table) {
  const auto &h = table.header;
  if (h.size() < 3 || (h.size() - 3) % 6 != 0 || h[0] != "t_s" || h[1] != "v_terminal_v" ||
      h[2] != "i_total_a")
    throw ParseError("not a simulation result CSV");
  SimResult r;
  r.n_cells = (h.size() - 3) / 6;
  const auto n = r.n_cells;
  const char *names[] = {"i", "soc", "v_rc", "t_core", "t_tab", "q_gen"};
  const char *units[] = {"_a", "", "_v", "_c", "_c", "_w"};
  for (std::size_t f = 0; f < 6; ++f)
    for (std::size_t k = 0; k < n; ++k) {
      const std::string want = names[f] + std::to_string(k + 1) + units[f];
      if (h[3 + f * n + k] != want)
        throw ParseError("column " + std::to_string(4 + f * n + k) + ": expected '" + want + "'");
    }
  std::vector<double> *series[] = {&r.current,     &r.soc,        &r.v_rc,
                                   &r.core_temp_c, &r.tab_temp_c, &r.q_gen};
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto &row = table.rows[i];
    const std::string ctx = "line " + std::to_string(table.line_numbers[i]);
    auto num = [&](std::size_t c) {
      auto v = csv::to_number(row[c], ctx);
      if (!v) throw ParseError(ctx + ": empty cell in column " + h[c]);
      return *v;
    };
    r.time.push_back(num(0));
    r.terminal_voltage.push_back(num(1));
    r.total_current.push_back(num(2));
    for (std::size_t f = 0; f < 6; ++f)
      for (std::size_t k = 0; k < n; ++k)
        series[f]->push_back(num(3 + f * n + k));
  }
  return r;
}

void write_json(const SimResult &r, std::ostream &out) {
  nlohmann::ordered_json j;
  j["n_cells"] = r.n_cells;
  j["samples"] = r.size();
  j["t_ambient_c"] = r.t_ambient_c;
  nlohmann::ordered_json term;
  term["cause"] = to_string(r.termination.cause);
  term["time_s"] = r.termination.time;
  term["step"] = r.termination.step;
  if (r.termination.cell)
    term["cell"] = *r.termination.cell + 1;
  else
    term["cell"] = nullptr;
  j["termination"] = term;
  if (r.size() > 0) {
    const auto m = imbalance_metrics(r);
    j["metrics"] = {{"max_current_spread_a", m.max_current_spread},
                    {"max_tab_spread_c", m.max_tab_spread},
                    {"max_core_spread_c", m.max_core_spread},
                    {"max_core_temp_c", m.max_core_temp_c},
                    {"max_abs_current_a", m.max_abs_current}};
  }
  out << j.dump(2) << '\n';
}

} // namespace parapack

#include "parapack/integrator.hpp"

#include "parapack/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

namespace parapack {

void IntegratorSettings::validate() const {
  if (!(rtol > 0.0 && rtol < 1.0))
    throw DomainError("integrator: rtol must lie in (0, 1)");
  if (!(atol > 0.0))
    throw DomainError("integrator: atol must be positive");
  if (!(min_step > 0.0 && min_step < max_step))
    throw DomainError("integrator: require 0 < min_step < max_step");
  if (!(event_tol > 0.0))
    throw DomainError("integrator: event_tol must be positive");
  if (fixed_step && !(*fixed_step > 0.0))
    throw DomainError("integrator: fixed_step must be positive");
}

EventSpec EventSpec::make(EventKind kind, double threshold) {
  const auto dir = kind == EventKind::terminal_voltage_below ? Crossing::falling : Crossing::rising;
  return EventSpec{kind, threshold, dir};
}

std::string to_string(EventKind kind) {
  switch (kind) {
  case EventKind::terminal_voltage_below:
    return "terminal_voltage_below";
  case EventKind::any_branch_current_above:
    return "any_branch_current_above";
  case EventKind::any_core_temp_above:
    return "any_core_temp_above";
  case EventKind::time_reached:
    return "time_reached";
  }
  return "unknown";
}

EventKind event_kind_from_string(const std::string &name) {
  for (auto k : {EventKind::terminal_voltage_below, EventKind::any_branch_current_above,
                 EventKind::any_core_temp_above, EventKind::time_reached})
    if (to_string(k) == name)
      return k;
  throw DomainError("unknown event kind '" + name + "'");
}

std::vector<double> uniform_grid(double t0, double t_end, double dt) {
  if (!(dt > 0.0) || !(t_end >= t0))
    throw DomainError("uniform_grid: need dt > 0 and t_end >= t0");
  std::vector<double> out;
  const auto n = static_cast<std::size_t>(std::floor((t_end - t0) / dt + 1e-9));
  out.reserve(n + 2);
  for (std::size_t i = 0; i <= n; ++i)
    out.push_back(t0 + static_cast<double>(i) * dt);
  if (t_end - out.back() > 1e-9 * std::max(1.0, std::abs(t_end)))
    out.push_back(t_end);
  return out;
}

namespace {

// Dormand-Prince tableau
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
// y5 - y4
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;
// continuous extension
constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                 d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                 d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

// Hairer's PI controller constants
constexpr double kSafety = 0.9;
constexpr double kFacMin = 0.2; // smallest allowed h_new / h is kFacMin
constexpr double kFacMax = 10.0;
constexpr double kBeta = 0.04;

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// Continuous extension over one accepted step [t, t + h].
struct DenseStep {
  double t = 0.0;
  double h = 0.0;
  std::vector<double> r1, r2, r3, r4, r5;

  void eval(double at, std::span<double> out) const {
    const double s = h > 0.0 ? (at - t) / h : 1.0;
    const double s1 = 1.0 - s;
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = r1[i] + s * (r2[i] + s1 * (r3[i] + s * (r4[i] + s1 * r5[i])));
  }
};

bool crossed(Crossing dir, double before, double after) {
  switch (dir) {
  case Crossing::falling:
    return before > 0.0 && after <= 0.0;
  case Crossing::rising:
    return before < 0.0 && after >= 0.0;
  case Crossing::either:
    return (before > 0.0 && after <= 0.0) || (before < 0.0 && after >= 0.0);
  }
  return false;
}

bool already_past(Crossing dir, double g) {
  return (dir == Crossing::falling && g <= 0.0) || (dir == Crossing::rising && g >= 0.0);
}

} // namespace

IntegrationResult integrate(const Rhs &rhs, std::span<const double> y0, double t0, double t_end,
                            const IntegratorSettings &settings, std::span<const Event> events,
                            std::span<const double> output_times) {
  settings.validate();
  if (!(t_end > t0))
    throw DomainError("integrate: t_end must exceed t0");
  if (!all_finite(y0))
    throw DomainError("integrate: initial state is not finite");
  if (!std::is_sorted(output_times.begin(), output_times.end()))
    throw DomainError("integrate: output times must be sorted");

  const std::size_t n = y0.size();
  IntegrationResult result;
  result.trajectory.dim = n;
  auto &stats = result.stats;

  std::vector<double> y(y0.begin(), y0.end()), y_new(n), tmp(n), err(n);
  std::array<std::vector<double>, 7> k;
  for (auto &v : k)
    v.resize(n);

  auto f = [&](double t, std::span<const double> yy, std::vector<double> &out) {
    rhs(t, yy, out);
    ++stats.rhs_evals;
  };

  std::size_t next_out = static_cast<std::size_t>(
      std::lower_bound(output_times.begin(), output_times.end(), t0) - output_times.begin());
  auto record = [&](double t, std::span<const double> state) {
    result.trajectory.t.push_back(t);
    result.trajectory.y.insert(result.trajectory.y.end(), state.begin(), state.end());
  };
  auto finish = [&](std::optional<std::size_t> event, double t, std::span<const double> state) {
    if (result.trajectory.t.empty() || result.trajectory.t.back() < t)
      record(t, state);
    result.termination.event = event;
    result.termination.t = t;
    result.termination.y.assign(state.begin(), state.end());
    return result;
  };

  // output samples at exactly t0
  while (next_out < output_times.size() && output_times[next_out] <= t0) {
    record(t0, y);
    ++next_out;
  }

  std::vector<double> g_prev(events.size());
  for (std::size_t e = 0; e < events.size(); ++e) {
    g_prev[e] = events[e].fn(t0, y);
    if (events[e].terminal && already_past(events[e].direction, g_prev[e]))
      return finish(e, t0, y);
  }

  f(t0, y, k[0]);
  if (!all_finite(k[0]))
    throw IntegrationError("non-finite derivative at t = " + std::to_string(t0));

  auto norm = [&](std::span<const double> v, std::span<const double> ya,
                  std::span<const double> yb) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double sc = settings.atol + settings.rtol * std::max(std::abs(ya[i]), std::abs(yb[i]));
      acc += (v[i] / sc) * (v[i] / sc);
    }
    return std::sqrt(acc / static_cast<double>(std::max<std::size_t>(n, 1)));
  };

  double h;
  if (settings.fixed_step) {
    h = *settings.fixed_step;
  } else if (settings.initial_step > 0.0) {
    h = settings.initial_step;
  } else {
    const double dnf = norm(k[0], y, y);
    const double dny = norm(y, y, y);
    double h0 = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : 0.01 * dny / dnf;
    h0 = std::min(h0, settings.max_step);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + h0 * k[0][i];
    f(t0 + h0, tmp, k[1]);
    for (std::size_t i = 0; i < n; ++i)
      err[i] = (k[1][i] - k[0][i]) / h0;
    const double der2 = norm(err, y, y);
    const double der12 = std::max(der2, dnf);
    const double h1 =
        der12 <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / der12, 1.0 / 5.0);
    h = std::min({100.0 * h0, h1, settings.max_step});
  }
  h = std::max(h, settings.min_step);

  DenseStep dense;
  for (auto *v : {&dense.r1, &dense.r2, &dense.r3, &dense.r4, &dense.r5})
    v->resize(n);
  std::vector<double> probe(n);

  double t = t0;
  double fac_old = 1e-4;
  bool last_rejected = false;

  while (t < t_end) {
    if (stats.accepted + stats.rejected >= settings.max_steps)
      throw IntegrationError("maximum number of steps exceeded at t = " + std::to_string(t));

    const bool fixed = settings.fixed_step.has_value();
    double step = std::min(h, t_end - t);
    if (!fixed)
      step = std::min(step, settings.max_step);
    // avoid a sliver step at the end of the span
    if (t_end - (t + step) < 1e-12 * std::max(1.0, std::abs(t_end)))
      step = t_end - t;

    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + step * a21 * k[0][i];
    f(t + c2 * step, tmp, k[1]);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + step * (a31 * k[0][i] + a32 * k[1][i]);
    f(t + c3 * step, tmp, k[2]);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + step * (a41 * k[0][i] + a42 * k[1][i] + a43 * k[2][i]);
    f(t + c4 * step, tmp, k[3]);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + step * (a51 * k[0][i] + a52 * k[1][i] + a53 * k[2][i] + a54 * k[3][i]);
    f(t + c5 * step, tmp, k[4]);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + step * (a61 * k[0][i] + a62 * k[1][i] + a63 * k[2][i] + a64 * k[3][i] +
                              a65 * k[4][i]);
    f(t + step, tmp, k[5]);
    for (std::size_t i = 0; i < n; ++i)
      y_new[i] = y[i] + step * (a71 * k[0][i] + a73 * k[2][i] + a74 * k[3][i] + a75 * k[4][i] +
                                a76 * k[5][i]);
    f(t + step, y_new, k[6]);

    for (std::size_t i = 0; i < n; ++i)
      err[i] = step * (e1 * k[0][i] + e3 * k[2][i] + e4 * k[3][i] + e5 * k[4][i] + e6 * k[5][i] +
                       e7 * k[6][i]);
    double err_norm = norm(err, y, y_new);
    const bool finite = all_finite(y_new) && all_finite(k[6]) && std::isfinite(err_norm);
    if (!finite)
      err_norm = std::numeric_limits<double>::infinity();

    if (fixed) {
      if (!finite)
        throw IntegrationError("non-finite state at t = " + std::to_string(t + step));
    } else if (err_norm > 1.0) {
      ++stats.rejected;
      const double shrink =
          std::isfinite(err_norm) ? std::max(kFacMin, kSafety * std::pow(err_norm, -0.2)) : kFacMin;
      h = step * std::min(shrink, last_rejected ? 1.0 : shrink);
      last_rejected = true;
      if (h < settings.min_step) {
        std::ostringstream msg;
        msg << (finite ? "step size underflow" : "non-finite derivative") << " at t = " << t;
        throw IntegrationError(msg.str());
      }
      continue;
    }

    // accepted: build the continuous extension of this step
    ++stats.accepted;
    dense.t = t;
    dense.h = step;
    for (std::size_t i = 0; i < n; ++i) {
      const double dy = y_new[i] - y[i];
      const double bspl = step * k[0][i] - dy;
      dense.r1[i] = y[i];
      dense.r2[i] = dy;
      dense.r3[i] = bspl;
      dense.r4[i] = dy - step * k[6][i] - bspl;
      dense.r5[i] = step * (d1 * k[0][i] + d3 * k[2][i] + d4 * k[3][i] + d5 * k[4][i] +
                            d6 * k[5][i] + d7 * k[6][i]);
    }
    const double t_new = step == t_end - t ? t_end : t + step;

    // event scan at the step midpoint and end
    std::optional<std::size_t> hit;
    double hit_time = t_new;
    if (!events.empty()) {
      const double t_mid = t + 0.5 * step;
      dense.eval(t_mid, probe);
      for (std::size_t e = 0; e < events.size(); ++e) {
        const auto &ev = events[e];
        const double g_mid = ev.fn(t_mid, probe);
        const double g_end = ev.fn(t_new, y_new);
        double lo, hi, g_lo;
        if (crossed(ev.direction, g_prev[e], g_mid)) {
          lo = t, hi = t_mid, g_lo = g_prev[e];
        } else if (crossed(ev.direction, g_mid, g_end)) {
          lo = t_mid, hi = t_new, g_lo = g_mid;
        } else {
          g_prev[e] = g_end;
          continue;
        }
        if (!ev.terminal) {
          g_prev[e] = g_end;
          continue;
        }
        // bisection keeps g(lo) on the pre-crossing side
        while (hi - lo > settings.event_tol) {
          const double mid = 0.5 * (lo + hi);
          dense.eval(mid, probe);
          const double g = ev.fn(mid, probe);
          if (crossed(ev.direction, g_lo, g))
            hi = mid;
          else
            lo = mid, g_lo = g;
        }
        if (!hit || hi < hit_time) {
          hit = e;
          hit_time = hi;
        }
        g_prev[e] = g_end;
      }
    }

    const double t_stop = hit ? hit_time : t_new;
    while (next_out < output_times.size() && output_times[next_out] <= t_stop) {
      const double to = output_times[next_out];
      if (to == t_new) {
        record(to, y_new);
      } else {
        dense.eval(to, probe);
        record(to, probe);
      }
      ++next_out;
    }

    if (hit) {
      dense.eval(hit_time, probe);
      return finish(hit, hit_time, probe);
    }

    t = t_new;
    y.swap(y_new);
    std::swap(k[0], k[6]);

    if (!fixed) {
      const double fac11 = std::pow(std::max(err_norm, 1e-10), 0.2 - kBeta * 0.75);
      double fac = fac11 / std::pow(fac_old, kBeta);
      fac = std::clamp(fac / kSafety, 1.0 / kFacMax, 1.0 / kFacMin);
      double h_new = step / fac;
      if (last_rejected)
        h_new = std::min(h_new, step);
      fac_old = std::max(err_norm, 1e-4);
      last_rejected = false;
      h = h_new;
    }
  }
  return finish(std::nullopt, t_end, y);
}

} // namespace parapack

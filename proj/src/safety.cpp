#include "parapack/safety.hpp"

#include "parapack/errors.hpp"
#include "parapack/scenarios.hpp"
#include "parapack/simulate.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

namespace parapack {

std::string to_string(SafetyParam p) {
  switch (p) {
  case SafetyParam::r_ohm: return "r_ohm";
  case SafetyParam::r_contact: return "r_contact";
  case SafetyParam::r_ct0: return "r_ct0";
  case SafetyParam::q_cap: return "q_cap";
  }
  return "?";
}

SafetyParam safety_param_from_string(const std::string &name) {
  for (SafetyParam p : kSafetyParams)
    if (to_string(p) == name) return p;
  throw DomainError("unknown safety parameter '" + name + "'");
}

std::string to_string(SweepAxis axis) {
  switch (axis) {
  case SweepAxis::c_rate: return "c_rate";
  case SweepAxis::soc_cutoff: return "soc_cutoff";
  case SweepAxis::n_cells: return "n_cells";
  }
  return "?";
}

SweepAxis sweep_axis_from_string(const std::string &name) {
  for (SweepAxis a : {SweepAxis::c_rate, SweepAxis::soc_cutoff, SweepAxis::n_cells})
    if (to_string(a) == name) return a;
  throw DomainError("unknown sweep axis '" + name + "'");
}

void ThresholdQuery::validate() const {
  if (!(c_rate > 0.0) || !std::isfinite(c_rate)) throw DomainError("c_rate must be positive");
  if (!(soc_cutoff >= 0.0 && soc_cutoff < 1.0)) throw DomainError("soc_cutoff must be in [0, 1)");
  if (n_cells < 2) throw DomainError("n_cells must be at least 2");
  if (!std::isfinite(temp_limit_c)) throw DomainError("temp_limit_c must be finite");
  if (!(search_cap_pct > 0.0)) throw DomainError("search_cap_pct must be positive");
  if (!(q_search_cap_pct > 0.0 && q_search_cap_pct < 100.0))
    throw DomainError("q_search_cap_pct must be in (0, 100)");
  if (!(resolution_pct > 0.0)) throw DomainError("resolution_pct must be positive");
  if (!(temp_tolerance_c > 0.0)) throw DomainError("temp_tolerance_c must be positive");
  mean_cell.validate();
  integrator.validate();
}

ThresholdQuery ThresholdQuery::reference(SafetyParam param, double c_rate) {
  ThresholdQuery q;
  q.param = param;
  q.c_rate = c_rate;
  q.template_ = reference_module();
  q.mean_cell = parapack::mean_cell(q.template_.cells);
  return q;
}

namespace {

double &field(CellParams &c, SafetyParam p) {
  switch (p) {
  case SafetyParam::r_ohm: return c.r_ohm;
  case SafetyParam::r_contact: return c.r_contact;
  case SafetyParam::r_ct0: return c.r_ct0;
  case SafetyParam::q_cap: return c.q_ah;
  }
  return c.r_ohm;
}

constexpr double kOvershootMargin = 10.0; // [K]

} // namespace

ModuleConfig outlier_module(const ThresholdQuery &query, double deviation_pct) {
  ModuleConfig config = uniform_module(query.mean_cell, query.n_cells, query.template_);
  double factor = query.increases() ? 1.0 + deviation_pct / 100.0 : 1.0 - deviation_pct / 100.0;
  if (!(factor > 0.0)) throw DomainError("deviation leaves a non-positive parameter");
  field(config.cells.back(), query.param) *= factor;
  return config;
}

double peak_core_temp(const ThresholdQuery &query, double deviation_pct) {
  Protocol protocol = Protocol::discharge(query.c_rate, 2.5);
  protocol.soc_cutoff = query.soc_cutoff;
  // Runaway heating is cut short once it is clearly above the limit.
  protocol.steps.front().terminators.push_back(EventSpec::make(
      EventKind::any_core_temp_above, to_kelvin(query.temp_limit_c + kOvershootMargin)));
  try {
    SimResult r = run(outlier_module(query, deviation_pct), protocol, query.integrator);
    return *std::max_element(r.core_temp_c.begin(), r.core_temp_c.end());
  } catch (const Error &e) {
    std::ostringstream msg;
    msg << to_string(query.param) << " deviation " << deviation_pct << "%: " << e.what();
    throw Error(msg.str());
  }
}

ThresholdResult derive_threshold(const ThresholdQuery &query) {
  query.validate();
  ThresholdResult res;
  res.param = query.param;
  res.outlier_cell = query.n_cells - 1;
  CellParams tmp = query.mean_cell;
  res.theta_mean = field(tmp, query.param);

  auto peak = [&](double d) {
    ++res.evaluations;
    return peak_core_temp(query, d);
  };
  auto finish = [&](double d, double p, bool bounded) {
    res.normalized_deviation_pct = d;
    res.peak_temp_c = p;
    res.bounded = bounded;
    double f = query.increases() ? 1.0 + d / 100.0 : 1.0 - d / 100.0;
    res.theta_limit = res.theta_mean * f;
    return res;
  };

  const double limit = query.temp_limit_c;
  const double cap = query.cap_pct();

  // Coarse grid.
  std::vector<double> grid(5), peaks(5);
  for (std::size_t j = 0; j < 5; ++j) {
    grid[j] = cap * static_cast<double>(j) / 4.0;
    peaks[j] = peak(grid[j]);
  }
  if (peaks[0] > limit) {
    // The uniform module already exceeds the limit.
    res.tolerance_met = std::abs(peaks[0] - limit) <= query.temp_tolerance_c;
    return finish(0.0, peaks[0], true);
  }
  // Only the order below the limit matters; runs stopped past it all look alike.
  for (std::size_t j = 1; j < 5; ++j)
    if (std::min(peaks[j], limit) < std::min(peaks[j - 1], limit) - 1e-6) res.non_monotone = true;

  if (res.non_monotone) {
    // Fine scan for the first crossing.
    const std::size_t n_scan = 81;
    std::vector<double> g(n_scan), p(n_scan);
    for (std::size_t j = 0; j < n_scan; ++j) {
      g[j] = cap * static_cast<double>(j) / static_cast<double>(n_scan - 1);
      p[j] = j == 0 ? peaks[0] : peak(g[j]);
    }
    grid = std::move(g);
    peaks = std::move(p);
  }

  std::size_t hi_idx = 0;
  for (std::size_t j = 1; j < grid.size(); ++j) {
    if (peaks[j] > limit) {
      hi_idx = j;
      break;
    }
  }
  if (hi_idx == 0) return finish(cap, peaks.back(), false);

  double lo = grid[hi_idx - 1], p_lo = peaks[hi_idx - 1];
  double hi = grid[hi_idx];
  while (hi - lo > query.resolution_pct || limit - p_lo > query.temp_tolerance_c) {
    if (hi - lo <= 1e-9 * std::max(1.0, hi)) break; // a jump in the peak temperature
    double mid = 0.5 * (lo + hi);
    double p_mid = peak(mid);
    if (p_mid > limit) {
      hi = mid;
    } else {
      lo = mid;
      p_lo = p_mid;
    }
  }
  res.tolerance_met = limit - p_lo <= query.temp_tolerance_c;
  return finish(lo, p_lo, true);
}

std::vector<SweepPoint> robustness_sweep(SweepAxis axis, const std::vector<double> &grid,
                                         const ThresholdQuery &base,
                                         const std::vector<SafetyParam> &params,
                                         std::size_t workers) {
  std::vector<SweepPoint> points;
  for (double v : grid) {
    for (SafetyParam p : params) {
      SweepPoint sp;
      sp.axis_value = v;
      sp.param = p;
      points.push_back(sp);
    }
  }

  auto work = [&](SweepPoint &sp) {
    ThresholdQuery q = base;
    q.param = sp.param;
    switch (axis) {
    case SweepAxis::c_rate: q.c_rate = sp.axis_value; break;
    case SweepAxis::soc_cutoff: q.soc_cutoff = sp.axis_value; break;
    case SweepAxis::n_cells: {
      double n = std::round(sp.axis_value);
      if (!(n >= 2.0) || std::abs(n - sp.axis_value) > 1e-9)
        throw DomainError("n_cells grid values must be integers >= 2");
      q.n_cells = static_cast<std::size_t>(n);
      break;
    }
    }
    sp.result = derive_threshold(q);
  };

  std::atomic<std::size_t> next{0};
  auto loop = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      try {
        work(points[i]);
      } catch (const std::exception &e) {
        points[i].error = e.what();
      }
    }
  };
  workers = std::max<std::size_t>(1, std::min(workers, points.size()));
  if (workers == 1) {
    loop();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(loop);
    for (auto &t : pool) t.join();
  }
  return points;
}

void write_threshold_csv(const std::vector<SweepPoint> &points, std::ostream &out) {
  out << "axis_value,param,threshold_pct,bounded,peak_temp_c\n";
  out.precision(10);
  for (const auto &sp : points) {
    out << sp.axis_value << ',' << to_string(sp.param) << ',';
    if (!sp.result) {
      out << ",,\n";
      continue;
    }
    if (sp.result->bounded) out << sp.result->normalized_deviation_pct;
    out << ',' << (sp.result->bounded ? "true" : "false") << ',' << sp.result->peak_temp_c << '\n';
  }
}

void write_threshold_json(const std::vector<SweepPoint> &points, std::ostream &out) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto &sp : points) {
    nlohmann::json j;
    j["axis_value"] = sp.axis_value;
    j["param"] = to_string(sp.param);
    if (sp.result) {
      const auto &r = *sp.result;
      j["bounded"] = r.bounded;
      j["threshold_pct"] = r.bounded ? nlohmann::json(r.normalized_deviation_pct) : nlohmann::json();
      j["theta_mean"] = r.theta_mean;
      j["theta_limit"] = r.bounded ? nlohmann::json(r.theta_limit) : nlohmann::json();
      j["peak_temp_c"] = r.peak_temp_c;
      j["non_monotone"] = r.non_monotone;
      j["tolerance_met"] = r.tolerance_met;
      j["outlier_cell"] = r.outlier_cell + 1;
      j["evaluations"] = r.evaluations;
    } else {
      j["error"] = sp.error;
    }
    arr.push_back(std::move(j));
  }
  out << arr.dump(2) << '\n';
}

void write_safety_table(const std::vector<SweepPoint> &points, std::ostream &out) {
  std::vector<double> rates;
  std::vector<SafetyParam> params;
  for (const auto &sp : points) {
    if (std::find(rates.begin(), rates.end(), sp.axis_value) == rates.end())
      rates.push_back(sp.axis_value);
    if (std::find(params.begin(), params.end(), sp.param) == params.end())
      params.push_back(sp.param);
  }
  out << "param";
  for (double r : rates) out << ',' << r << 'C';
  out << '\n';
  char buf[64];
  for (SafetyParam p : params) {
    out << to_string(p);
    for (double r : rates) {
      out << ',';
      for (const auto &sp : points) {
        if (sp.param != p || sp.axis_value != r) continue;
        if (!sp.result) {
          out << "error";
        } else if (!sp.result->bounded) {
          out << "N/A";
        } else {
          std::snprintf(buf, sizeof buf, "%.1f", sp.result->normalized_deviation_pct);
          out << buf;
        }
      }
    }
    out << '\n';
  }
}

} // namespace parapack

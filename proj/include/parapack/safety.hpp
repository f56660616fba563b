#pragma once

#include "parapack/integrator.hpp"
#include "parapack/model.hpp"

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace parapack {

enum class SafetyParam { r_ohm, r_contact, r_ct0, q_cap };
std::string to_string(SafetyParam p);
SafetyParam safety_param_from_string(const std::string &name);
inline constexpr SafetyParam kSafetyParams[] = {SafetyParam::r_ohm, SafetyParam::r_contact,
                                               SafetyParam::r_ct0, SafetyParam::q_cap};

struct ThresholdQuery {
  SafetyParam param = SafetyParam::r_ohm;
  double c_rate = 0.45;
  double soc_cutoff = 0.0; // discharge also stops at this module-average SOC
  std::size_t n_cells = 4;
  double temp_limit_c = 60.0;
  CellParams mean_cell;   // every non-outlier cell
  ModuleConfig template_; // thermal block, OCV, ambient
  // Resistances grow up to this many percent; capacity shrinks at most by
  // q_search_cap percent.
  double search_cap_pct = 2000.0;
  double q_search_cap_pct = 95.0;
  double resolution_pct = 0.01; // final bisection bracket width
  double temp_tolerance_c = 0.5;
  IntegratorSettings integrator;

  // Resistances increase, capacity decreases.
  bool increases() const noexcept { return param != SafetyParam::q_cap; }
  double cap_pct() const noexcept { return increases() ? search_cap_pct : q_search_cap_pct; }
  void validate() const;

  // Reference mean cell and module at the given operating point.
  static ThresholdQuery reference(SafetyParam param, double c_rate);
};

// Module of n_cells - 1 mean cells plus one outlier at the last position,
// its parameter moved by deviation_pct percent in the query direction.
ModuleConfig outlier_module(const ThresholdQuery &query, double deviation_pct);

// Highest core temperature over time and cells [C] for a discharge to
// 2.5 V or the SOC cutoff. Throws Error with the deviation in the message
// when the simulation fails.
double peak_core_temp(const ThresholdQuery &query, double deviation_pct);

struct ThresholdResult {
  SafetyParam param = SafetyParam::r_ohm;
  double normalized_deviation_pct = 0.0;
  double theta_mean = 0.0;
  double theta_limit = 0.0;
  bool bounded = false; // false: the limit is never reached within the cap ("N/A")
  double peak_temp_c = 0.0; // at the reported deviation (at the cap when unbounded)
  bool non_monotone = false; // coarse grid was not monotone; scan fallback used
  bool tolerance_met = true; // |peak - limit| <= tolerance at the reported deviation
  std::size_t outlier_cell = 0;
  std::size_t evaluations = 0;
};

// Largest deviation keeping the peak core temperature at or below the
// limit: 5-point coarse grid, then bisection inside the first bracket that
// crosses the limit.
ThresholdResult derive_threshold(const ThresholdQuery &query);

enum class SweepAxis { c_rate, soc_cutoff, n_cells };
std::string to_string(SweepAxis axis);
SweepAxis sweep_axis_from_string(const std::string &name);

struct SweepPoint {
  double axis_value = 0.0;
  SafetyParam param = SafetyParam::r_ohm;
  std::optional<ThresholdResult> result;
  std::string error;
};

// Thresholds of every family at every grid value. The n_cells axis keeps
// the per-cell C-rate fixed, so total current scales with N. Points that
// fail are recorded and the sweep continues.
std::vector<SweepPoint> robustness_sweep(SweepAxis axis, const std::vector<double> &grid,
                                         const ThresholdQuery &base,
                                         const std::vector<SafetyParam> &params,
                                         std::size_t workers = 1);

// axis_value,param,threshold_pct,bounded,peak_temp_c (threshold empty when unbounded)
void write_threshold_csv(const std::vector<SweepPoint> &points, std::ostream &out);
void write_threshold_json(const std::vector<SweepPoint> &points, std::ostream &out);
// One row per family, one column per C-rate, "N/A" when unbounded.
void write_safety_table(const std::vector<SweepPoint> &points, std::ostream &out);

} // namespace parapack

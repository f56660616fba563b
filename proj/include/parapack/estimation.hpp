#pragma once

#include "parapack/integrator.hpp"
#include "parapack/model.hpp"
#include "parapack/optimize.hpp"
#include "parapack/simulate.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace parapack {

// Bench log on a common time base. Signals logged at a lower rate leave
// NaN in the rows where they have no sample.
struct MeasurementSet {
  std::size_t n_cells = 0;
  std::vector<double> time;           // [s]
  std::vector<double> total_current;  // [A]
  std::vector<double> branch_current; // row-major [A]
  std::vector<double> v_module;       // [V]
  std::vector<double> tab_temp_c;     // row-major
  std::vector<double> t_amb_c;
  // Rows whose branch currents disagree with the logged total.
  std::vector<std::size_t> flagged_rows;

  std::size_t size() const noexcept { return time.size(); }
  bool has_temperatures() const; // any tab-temperature sample present
  double current(std::size_t i, std::size_t k) const { return branch_current[i * n_cells + k]; }
  double tab(std::size_t i, std::size_t k) const { return tab_temp_c[i * n_cells + k]; }
  // Mean of the logged ambient samples; nullopt when none were logged.
  std::optional<double> ambient_c() const;

  // Throws DomainError when time is not strictly increasing or a column
  // has the wrong length.
  void validate() const;
  // Rows with all N branch currents present whose sum differs from the
  // total by more than the tolerance.
  std::vector<std::size_t> inconsistent_rows(double sum_tolerance_a = 10.0) const;
};

struct LoadOptions {
  bool gap_fill = true;
  double max_gap_s = 60.0;
  double sum_tolerance_a = 10.0;
};

// Columns: t_s,i_total_a,i1_a..iN_a,v_module_v,t1_c..tN_c,t_amb_c. The
// temperature columns may be absent as a group. Rows failing the current
// sum check are recorded in flagged_rows, not rejected.
// Throws ParseError for a malformed file, DomainError for failed checks.
MeasurementSet load_measurements(const std::filesystem::path &path, const LoadOptions &options = {});
void write_measurements(const MeasurementSet &data, std::ostream &out);

// Linear interpolation across runs of missing tab-temperature samples no
// longer than max_gap_s. Only rows at the 1 Hz temperature cadence are
// filled; longer gaps are left missing.
void fill_temperature_gaps(MeasurementSet &data, double max_gap_s);

struct NoiseOptions {
  double current_sigma_a = 0.5;
  double temp_sigma_c = 0.1;
  double current_dt_s = 0.2; // 5 Hz
  double temp_dt_s = 1.0;    // 1 Hz
  // Logger resolution in decimal places; negative keeps full precision.
  int current_decimals = 3;
  int temp_decimals = 3;
  int voltage_decimals = 5;
  int time_decimals = 3;
  std::uint64_t seed = 1;
};

// Simulated bench log of a constant-current discharge through `config`.
MeasurementSet synthesize_measurements(const ModuleConfig &config, const Protocol &protocol,
                                       const NoiseOptions &noise,
                                       const IntegratorSettings &settings = {});

// Electrical parameter vector: per cell {r_ohm, r_contact, r_ct0}, then the
// shared {r_w, c_rc, e_act}. Length 3N + 3.
std::size_t electrical_dim(std::size_t n_cells);
std::vector<double> pack_electrical(const std::vector<CellParams> &cells);
// Writes the vector into config.cells (shared values go to every cell).
void apply_electrical(std::span<const double> params, ModuleConfig &config);

struct FitSpec {
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<double> initial;

  void validate(std::size_t n_cells) const;

  // Bounds reference*[lo_factor, hi_factor]; the initial guess is the
  // reference scaled by a deterministic factor in [1-perturb, 1+perturb].
  static FitSpec around(const std::vector<CellParams> &reference, double perturb, std::uint64_t seed,
                        double lo_factor = 0.25, double hi_factor = 4.0);
};

// Thermal block with every entry scaled by a deterministic factor in
// [1-spread, 1+spread]; a starting prior for the thermal stages.
ThermalParams perturb_thermal(const ThermalParams &thermal, double spread, std::uint64_t seed);

// The cost surface is only smooth enough for the simplex when the adaptive
// step sequence barely changes between neighbouring parameter sets, hence
// the tight tolerances.
inline IntegratorSettings fit_integrator_settings() {
  IntegratorSettings s;
  s.rtol = 1e-9;
  s.atol = 1e-11;
  return s;
}

inline NelderMeadOptions fit_optimizer_options() {
  NelderMeadOptions o;
  o.max_evals = 8000;
  o.restarts = 4;
  o.restart_step = 0.05;
  return o;
}

struct EstimationOptions {
  NelderMeadOptions optimizer = fit_optimizer_options();
  IntegratorSettings integrator = fit_integrator_settings();
  double profile_tolerance_a = 5.0;
  double initial_soc = kDefaultInitialSoc;
};

// Returned by the costs when the simulation fails, so the optimizer can
// move on.
inline constexpr double kCostSentinel = 1e12;

// Model prediction of a bench log: the measured total current is replayed as
// a piecewise-constant profile, output at every log timestamp. Runs that
// end early hold their last sample.
SimResult replay(const ModuleConfig &config, const MeasurementSet &data,
                 const EstimationOptions &options = {});

// sqrt of the summed squared branch-current residuals over all cells and
// every sample where a current was logged.
double electrical_cost(std::span<const double> params, const MeasurementSet &data,
                       const ModuleConfig &config_template, const EstimationOptions &options = {});

// sqrt of the summed squared tab-temperature residuals of one cell.
double thermal_cost(const ThermalParams &thermal, const MeasurementSet &data,
                    const ModuleConfig &config, std::size_t target_cell,
                    const EstimationOptions &options = {});

// Per-signal root-mean-square error, one value per cell.
struct RmseRow {
  std::vector<double> current_a;
  std::vector<double> tab_temp_c;
};

RmseRow rmse(const SimResult &prediction, const MeasurementSet &data);

struct FitReport {
  double initial_cost = 0.0;
  double final_cost = 0.0;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  bool converged = false;
  std::string warning;
  std::vector<double> cost_history;
  RmseRow rmse;
};

struct ElectricalFit {
  std::vector<double> params;
  ModuleConfig config;
  FitReport report;
};

ElectricalFit fit_electrical(const MeasurementSet &data, const ModuleConfig &config_template,
                             const FitSpec &spec, const EstimationOptions &options = {});

struct ThermalFit {
  ThermalParams params;
  bool identified = false;
  std::string message;
  std::optional<std::size_t> cell; // the cell whose fit was selected
  std::vector<double> per_cell_cost;
  std::vector<ThermalParams> per_cell;
};

// First-order thermal identification driven by measured i^2 r_eis heat.
// The tab temperature only fixes the time constant and the
// surface-to-ambient gain, so the core-to-surface share of the prior is
// kept. Flags an unidentified result (and returns the prior) when the
// data carries no excitation.
ThermalFit fit_thermal_initial(const MeasurementSet &data, std::span<const double> r_eis,
                               const ThermalParams &prior, const NelderMeadOptions &options = {});

// Full-model thermal refit per cell with the fitted electrical parameters;
// the cell with the lowest cost supplies the result.
ThermalFit refit_thermal(const MeasurementSet &data, const ModuleConfig &config,
                         const EstimationOptions &options = {});

struct FitPipelineResult {
  std::optional<ThermalFit> initial_thermal; // empty when no temperatures were logged
  ElectricalFit electrical;
  std::optional<ThermalFit> thermal;
  std::vector<std::string> notices;

  // Thermal block of the final model (the template's when skipped).
  ThermalParams final_thermal(const ModuleConfig &config_template) const;
};

// Thermal first stage on i^2 (r_ohm + r_ct0 + r_w) of the initial guess,
// electrical fit with that thermal block, then the full thermal refit.
// Without tab temperatures both thermal stages are skipped with a notice.
// Stage failures are rethrown as Error prefixed with the stage name.
FitPipelineResult fit_pipeline(const MeasurementSet &data, const ModuleConfig &config_template,
                               const FitSpec &spec, const EstimationOptions &options = {});

// RMSE table in the bench report layout: one row per configuration, N
// current columns then N tab-temperature columns.
void write_rmse_table(const std::vector<std::pair<std::string, RmseRow>> &rows, std::ostream &out);
void write_fit_report(const ElectricalFit &fit, const ThermalFit &thermal, std::ostream &out);

} // namespace parapack

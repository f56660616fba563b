#pragma once

#include "parapack/csv.hpp"
#include "parapack/integrator.hpp"
#include "parapack/model.hpp"

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace parapack {

enum class StepMode { constant_current, rest };

// One load step. Exactly one of current_a / c_rate is used for
// constant-current steps (current wins if both are set); rest ignores both.
// Positive current discharges.
struct LoadStep {
  StepMode mode = StepMode::constant_current;
  std::optional<double> current_a;
  std::optional<double> c_rate;
  double duration_limit_s = 0.0; // 0 = no limit
  std::vector<EventSpec> terminators;

  double resolve_current(const ModuleConfig &config) const;
};

struct Protocol {
  std::vector<LoadStep> steps;
  // Empty: every cell starts at 0.998. One value: shared by all cells.
  std::vector<double> initial_soc;
  std::optional<double> t_ambient_k;
  // Absolute output times. Empty selects a uniform grid with output_dt.
  std::vector<double> output_times;
  double output_dt = 1.0;
  // Stop once the module-average SOC drops to this value (0 = off).
  double soc_cutoff = 0.0;
  double soc_floor = 0.002;

  void validate(std::size_t n_cells) const;

  // Constant-current discharge to v_cutoff, optionally also stopping on a
  // branch current above i_max [A].
  static Protocol discharge(double c_rate, double v_cutoff = 2.5,
                            std::optional<double> i_max = std::nullopt);
  static Protocol rest(double duration_s);
};

inline constexpr double kDefaultInitialSoc = 0.998;
inline constexpr double kCurrentLimit = 280.0; // manufacturer per-cell limit [A]

enum class TerminationCause { voltage_cutoff, over_current, over_temperature, duration, soc_floor,
                              soc_cutoff };

std::string to_string(TerminationCause cause);

struct Termination {
  TerminationCause cause = TerminationCause::duration;
  double time = 0.0;
  std::optional<std::size_t> cell;
  std::size_t step = 0;
};

// Row-major per-cell series: value(sample i, cell k) = series[i * n + k].
struct SimResult {
  std::size_t n_cells = 0;
  std::vector<double> time;
  std::vector<double> current;
  std::vector<double> soc;
  std::vector<double> v_rc;
  std::vector<double> core_temp_c;
  std::vector<double> tab_temp_c;
  std::vector<double> q_gen;
  std::vector<double> terminal_voltage;
  std::vector<double> total_current;
  Termination termination;
  double t_ambient_c = 0.0;

  std::size_t size() const noexcept { return time.size(); }
  double at(const std::vector<double> &series, std::size_t i, std::size_t k) const {
    return series[i * n_cells + k];
  }
  std::vector<double> final_state() const; // packed [v_rc | z | t_rise]
};

// Integrates every step in order, carrying the state across steps.
// Throws IntegrationError with the step index on solver failure.
SimResult run(const ModuleConfig &config, const Protocol &protocol,
              const IntegratorSettings &settings = {});

struct ImbalanceMetrics {
  double max_current_spread = 0.0;
  double t_current_spread = 0.0;
  double max_tab_spread = 0.0;
  double t_tab_spread = 0.0;
  double max_core_spread = 0.0;
  double t_core_spread = 0.0;
  double max_core_temp_c = 0.0;
  double t_max_core_temp = 0.0;
  double max_tab_temp_c = 0.0;
  double max_abs_current = 0.0;
};

ImbalanceMetrics imbalance_metrics(const SimResult &result);

struct CaseStudy {
  std::string name;
  ModuleConfig config;
  SimResult result;
};

// Four single-outlier modules built from the mean cell of `base`: outlier
// with double / half the mean ohmic resistance, one cell at 70% capacity,
// three cells at 70% capacity. Full 0.85C discharge to 2.5 V. The outlier is
// the last cell.
std::vector<CaseStudy> case_studies(const ModuleConfig &base,
                                    const IntegratorSettings &settings = {});

// Piecewise-constant total current: current[j] applies on
// [time[j], time[j+1]); the profile ends at time.back().
struct CurrentProfile {
  std::vector<double> time;
  std::vector<double> current;
};

// Merges consecutive samples of a measured current trace whose values stay
// within `tolerance` amperes of the running segment mean.
CurrentProfile compress_profile(const std::vector<double> &time, const std::vector<double> &current,
                                double tolerance);

// Runs a piecewise-constant profile with output at `output_times`.
SimResult run_profile(const ModuleConfig &config, const CurrentProfile &profile,
                      const std::vector<double> &output_times,
                      const IntegratorSettings &settings = {}, double initial_soc = kDefaultInitialSoc);

void write_csv(const SimResult &result, std::ostream &out);
// Reads the series written by write_csv back. The CSV carries no
// termination record or ambient temperature; those keep their defaults.
// Throws ParseError on a malformed or mislabelled file.
SimResult read_csv(const csv::Table &table);
void write_json(const SimResult &result, std::ostream &out);

} // namespace parapack

#pragma once

#include "parapack/estimation.hpp"
#include "parapack/model.hpp"
#include "parapack/safety.hpp"
#include "parapack/sensitivity.hpp"
#include "parapack/simulate.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace parapack {

struct SobolSection {
  std::size_t n_base = 4096;
  double c_rate = 0.45;
  double v_cutoff = 2.5;
  std::size_t grid_points = 20;
  std::optional<std::filesystem::path> checkpoint;
};

struct ThresholdsSection {
  std::vector<double> c_rates{0.45, 0.85};
  std::vector<SafetyParam> params{std::begin(kSafetyParams), std::end(kSafetyParams)};
  double temp_limit_c = 60.0;
  double search_cap_pct = 2000.0;
  double q_search_cap_pct = 95.0;
  double soc_cutoff = 0.0;
  std::size_t n_cells = 4;
};

struct SweepSection {
  SweepAxis axis = SweepAxis::c_rate;
  std::vector<double> grid{0.25, 0.45, 0.65, 0.85};
  double c_rate = 0.85;
  double soc_cutoff = 0.0;
  std::size_t n_cells = 4;
  std::vector<SafetyParam> params{std::begin(kSafetyParams), std::end(kSafetyParams)};
  double temp_limit_c = 60.0;
};

struct FitSection {
  std::optional<std::filesystem::path> measurements;
  double perturb = 0.3;        // initial guess spread around the module cells
  double lower_factor = 0.25;
  double upper_factor = 4.0;
  double thermal_perturb = 0.3; // prior spread around the module thermal block
  std::optional<std::size_t> max_evals;
  double sum_tolerance_a = 10.0;
};

struct SynthSection {
  NoiseOptions noise;
};

// Everything a command may need. Sections a command does not use are
// parsed and validated all the same.
struct RunConfig {
  ModuleConfig module;
  std::optional<Protocol> protocol;
  IntegratorSettings integrator;
  std::uint64_t seed = 1;
  SobolSection sobol;
  ThresholdsSection thresholds;
  SweepSection sweep;
  FitSection fit;
  SynthSection synth;

  // The module's mean cell repeated over n cells, same thermal block and OCV.
  ModuleConfig mean_module(std::size_t n) const;
};

// Parses a JSON run configuration. Relative paths inside it resolve
// against base_dir. Throws ConfigError naming the JSON pointer of the
// first offending node; unknown keys are errors.
RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path &base_dir = {});
RunConfig load_run_config(const std::filesystem::path &path);

} // namespace parapack

#pragma once

#include "parapack/model.hpp"
#include "parapack/simulate.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace parapack {

// First n points of the Sobol sequence in [0,1)^dim, row-major. The
// sequence starts at the origin. With a seed every dimension gets an
// independent hash-based Owen scramble. Throws DomainError for dim == 0,
// dim > 64 or n == 0.
std::vector<double> sobol_sequence(std::size_t dim, std::size_t n,
                                   std::optional<std::uint64_t> scramble_seed = std::nullopt);

// L-infinity star discrepancy of a 2-D point set, evaluated exactly over
// the grid spanned by the point coordinates (O(n^2 log n)).
double star_discrepancy_2d(std::span<const double> points);

enum class ParamFamily { r_contact, r_ohm, q_cap };
std::string to_string(ParamFamily family);
ParamFamily param_family_from_string(const std::string &name);

struct ParameterDim {
  std::size_t cell = 0;
  ParamFamily family = ParamFamily::r_contact;
  double lower = 0.0; // SI: ohm or Ah
  double upper = 0.0;
};

struct ParameterSpace {
  std::vector<ParameterDim> dims;

  std::size_t size() const noexcept { return dims.size(); }
  void validate(std::size_t n_cells) const;
  // Maps a unit-cube point onto `base` (every varied field is overwritten).
  ModuleConfig apply(const ModuleConfig &base, std::span<const double> unit) const;

  // Three families times n_cells: R_c in [124, 424] uohm, R_ohm in
  // [172, 344] uohm, Q in [191, 273] Ah.
  static ParameterSpace reference(std::size_t n_cells = 4);
};

// Model output for one parameter point: a fixed-length series.
using SeriesModel = std::function<std::vector<double>(std::span<const double> unit)>;

struct BatchOptions {
  std::size_t workers = 1;
  std::optional<std::filesystem::path> checkpoint; // resumable progress file
  std::size_t checkpoint_every = 1000;
  // Describes the model; a checkpoint written under another tag is ignored.
  std::string checkpoint_tag;
  std::function<void(std::size_t done, std::size_t total)> progress;
};

struct BatchResult {
  std::vector<std::vector<double>> outputs; // empty vector = failed sample
  std::vector<std::string> errors;          // per sample, empty when ok
  std::size_t resumed = 0;                  // samples loaded from a checkpoint
};

// Evaluates model(points[i]) for every row of the row-major `points`. Rows
// are dispatched to a worker pool; results land at their own index, so the
// outcome does not depend on scheduling. Exceptions mark the sample failed.
BatchResult evaluate_batch(const SeriesModel &model, std::span<const double> points,
                           std::size_t dim, const BatchOptions &options = {});

struct IndexEstimate {
  std::vector<double> s1;    // per dim
  std::vector<double> st;    // per dim
  std::vector<double> s1_se; // standard error of the per-sample mean
  std::vector<double> st_se;
  double variance = 0.0;
  bool defined = false; // false when the output variance is zero
};

// Saltelli estimators from model values on A, B and A_B^(i):
//   S_i  = mean(fB (fABi - fA)) / V
//   S_Ti = mean((fA - fABi)^2) / (2 V)
// with V the variance over fA and fB together. f_ab is dim x n row-major.
IndexEstimate saltelli_estimate(std::span<const double> f_a, std::span<const double> f_b,
                                std::span<const double> f_ab, std::size_t dim);

struct SobolResult {
  std::vector<double> time;     // output grid [s]
  std::vector<double> fraction; // grid as a fraction of nominal discharge
  std::vector<IndexEstimate> per_time;
  std::vector<std::string> dim_names;
  std::vector<ParamFamily> dim_family;
  // family sums, [time][family]
  std::vector<std::array<double, 3>> family_s1;
  std::vector<std::array<double, 3>> family_st;
  std::size_t n_base = 0;
  std::size_t evaluations = 0;
  std::size_t failed_samples = 0; // base rows dropped because any run failed
  std::vector<std::string> failures;
  std::string output_definition;
};

struct SaltelliOptions {
  std::size_t n_base = 4096;
  std::uint64_t seed = 1;
  BatchOptions batch;
};

// Generic Saltelli campaign over the unit cube; `model` returns a series of
// out_len values. Uses a 2*dim Sobol sequence: first half A, second half B.
SobolResult saltelli_indices(std::size_t dim, std::size_t out_len, const SeriesModel &model,
                             const SaltelliOptions &options);

// Ishigami test function on [-pi, pi]^3, evaluated from unit-cube
// coordinates, and its closed-form first-order and total-effect indices.
double ishigami(std::span<const double> unit, double a = 7.0, double b = 0.1);
struct IshigamiIndices {
  std::array<double, 3> s1;
  std::array<double, 3> st;
};
IshigamiIndices ishigami_indices(double a = 7.0, double b = 0.1);

struct SensitivitySetup {
  ModuleConfig base;      // mean cells; varied fields come from the space
  ParameterSpace space;
  double c_rate = 0.45;
  double v_cutoff = 2.5;
  std::size_t grid_points = 20;
  IntegratorSettings integrator;

  // 4 mean cells from the reference module, reference space, 0.45C.
  static SensitivitySetup reference();
  std::vector<double> time_grid() const; // k/grid_points of 1/c_rate hours
};

// Instantaneous core-temperature spread max_k T - min_k T on the setup's
// time grid; a run that ends early holds its last value.
std::vector<double> sensitivity_output(const SensitivitySetup &setup, std::span<const double> unit);

SobolResult run_sobol_campaign(const SensitivitySetup &setup, const SaltelliOptions &options);

void write_sobol_csv(const SobolResult &result, std::ostream &out);
void write_sobol_json(const SobolResult &result, std::ostream &out);

} // namespace parapack

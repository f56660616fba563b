#pragma once

#include "parapack/ocv.hpp"

#include <memory>
#include <span>
#include <vector>

namespace parapack {

inline constexpr double kGasConstant = 8.314;  // J/(mol K)
inline constexpr double kZeroCelsius = 273.15; // K

inline constexpr double to_kelvin(double celsius) { return celsius + kZeroCelsius; }
inline constexpr double to_celsius(double kelvin) { return kelvin - kZeroCelsius; }

// Electrical parameters of one cell branch. SI units throughout except
// capacity, which is kept in ampere-hours as the datasheets quote it.
struct CellParams {
  double r_ohm = 0.0;     // series ohmic resistance [ohm]
  double r_contact = 0.0; // contact / interconnect resistance [ohm]
  double r_ct0 = 0.0;     // charge-transfer resistance at ambient [ohm]
  double r_w = 0.0;       // temperature independent part of the RC branch [ohm]
  double c_rc = 0.0;      // RC-pair capacitance [F]
  double q_ah = 0.0;      // capacity [Ah]
  double e_act = 0.0;     // activation energy [J/mol]

  double q_coulomb() const noexcept { return q_ah * 3600.0; }
  double series_resistance() const noexcept { return r_ohm + r_contact; }

  // Throws DomainError unless every field is finite and positive.
  void validate() const;
};

// Lumped thermal circuit shared by all cells of a module.
struct ThermalParams {
  double c_p = 0.0;                 // heat capacity [J/K]
  double rth_core_surface = 0.0;    // [K/W]
  double rth_surface_ambient = 0.0; // [K/W]

  double total_resistance() const noexcept { return rth_core_surface + rth_surface_ambient; }
  void validate() const;
};

// How the contact resistances of a module were composed from measured
// busbar values. Recorded for provenance only; the model always uses the
// per-cell r_contact it is given.
enum class ContactConvention { per_branch, ladder };

struct ModuleConfig {
  std::vector<CellParams> cells;
  ThermalParams thermal;
  std::shared_ptr<const OcvTable> ocv;
  double t_ambient_k = to_kelvin(22.2);
  double gas_constant = kGasConstant;
  // Rated capacity of one cell; C-rates resolve against n * rated.
  double rated_cell_capacity_ah = 280.0;
  ContactConvention contact_convention = ContactConvention::per_branch;

  std::size_t size() const noexcept { return cells.size(); }
  double rated_module_capacity_ah() const noexcept {
    return rated_cell_capacity_ah * static_cast<double>(cells.size());
  }

  // Throws DomainError for N < 2, missing OCV, non-positive ambient, or an
  // invalid cell / thermal block.
  void validate() const;
};

// Flat layout of the 3N-dimensional state vector:
//   [ v_rc(0..N-1), z(0..N-1), t_rise(0..N-1) ]
// t_rise is the core temperature above ambient in kelvin.
struct SimState {
  std::vector<double> v_rc;
  std::vector<double> z;
  std::vector<double> t_rise;

  static SimState uniform(std::size_t n, double soc, double v_rc = 0.0, double t_rise = 0.0);
  static SimState unpack(std::span<const double> flat);

  std::size_t size() const noexcept { return z.size(); }
  std::vector<double> pack() const;
};

// Sanity band on t_rise; states outside it indicate divergent integration.
inline constexpr double kMinTempRise = -50.0;
inline constexpr double kMaxTempRise = 200.0;

// Read-only view of a packed state without copying.
class StateView {
public:
  explicit StateView(std::span<const double> flat);

  std::size_t size() const noexcept { return n_; }
  double v_rc(std::size_t k) const noexcept { return flat_[k]; }
  double z(std::size_t k) const noexcept { return flat_[n_ + k]; }
  double t_rise(std::size_t k) const noexcept { return flat_[2 * n_ + k]; }
  std::span<const double> flat() const noexcept { return flat_; }

private:
  std::span<const double> flat_;
  std::size_t n_;
};

// Arrhenius update of the charge-transfer resistance.
// Throws DomainError when t_ambient + t_rise <= 0 K.
double effective_rct(const CellParams &cell, double t_rise, double t_ambient,
                     double gas_constant = kGasConstant);

// Branch currents of the parallel module for total current I (positive is
// discharge). Writes N values to `out`; returns the common terminal voltage.
// Throws SingularityError if any branch series resistance is <= 0.
double branch_currents(const ModuleConfig &config, const StateView &state, double total_current,
                       std::span<double> out);
std::vector<double> branch_currents(const ModuleConfig &config, const SimState &state,
                                    double total_current);

// Joule heat of the cell body: i^2 r_ohm plus the RC-branch dissipation.
// The contact resistance heats the busbar, not the cell.
double heat_generation(const CellParams &cell, double branch_current, double v_rc, double t_rise,
                       double t_ambient, double gas_constant = kGasConstant);

// Thermal divider from core to the measured (tab) surface node.
double surface_temperature(const ThermalParams &thermal, double t_rise, double t_ambient);

// d(state)/dt. `dydt` must have the same length as `y` (3N).
void state_derivative(const ModuleConfig &config, std::span<const double> y, double total_current,
                      std::span<double> dydt);
std::vector<double> state_derivative(const ModuleConfig &config, const SimState &state,
                                     double total_current);

struct BranchOutputs {
  std::vector<double> currents;      // [A]
  double terminal_voltage = 0.0;     // [V]
  std::vector<double> surface_temps; // [K]
  std::vector<double> q_gen;         // [W]
};

BranchOutputs evaluate_outputs(const ModuleConfig &config, std::span<const double> y,
                               double total_current);

// Contact resistance per cell for a ladder busbar: cell k sees the terminal
// joint plus every interconnect between it and the module terminal.
std::vector<double> ladder_to_contact(std::span<const double> interconnects, double terminal_joint);

// Adds one measured resistance to each branch's contact resistance
// (non-cumulative composition).
void add_contact_resistance(ModuleConfig &config, std::span<const double> extra);

} // namespace parapack

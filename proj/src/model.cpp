#include "parapack/model.hpp"

#include "parapack/errors.hpp"

#include <cmath>
#include <string>

namespace parapack {

namespace {

void require_positive(double v, const char *name) {
  if (!std::isfinite(v) || v <= 0.0)
    throw DomainError(std::string(name) + " must be finite and positive");
}

} // namespace

void CellParams::validate() const {
  require_positive(r_ohm, "r_ohm");
  require_positive(r_contact, "r_contact");
  require_positive(r_ct0, "r_ct0");
  require_positive(r_w, "r_w");
  require_positive(c_rc, "c_rc");
  require_positive(q_ah, "q_ah");
  require_positive(e_act, "e_act");
}

void ThermalParams::validate() const {
  require_positive(c_p, "c_p");
  require_positive(rth_core_surface, "rth_core_surface");
  require_positive(rth_surface_ambient, "rth_surface_ambient");
}

void ModuleConfig::validate() const {
  if (cells.size() < 2)
    throw DomainError("module needs at least 2 parallel cells");
  if (!ocv)
    throw DomainError("module has no OCV table");
  require_positive(t_ambient_k, "t_ambient");
  require_positive(gas_constant, "gas_constant");
  require_positive(rated_cell_capacity_ah, "rated_cell_capacity_ah");
  for (const auto &c : cells)
    c.validate();
  thermal.validate();
}

SimState SimState::uniform(std::size_t n, double soc, double v_rc, double t_rise) {
  return SimState{std::vector<double>(n, v_rc), std::vector<double>(n, soc),
                  std::vector<double>(n, t_rise)};
}

SimState SimState::unpack(std::span<const double> flat) {
  const StateView v(flat);
  SimState s;
  const auto n = v.size();
  s.v_rc.assign(flat.begin(), flat.begin() + n);
  s.z.assign(flat.begin() + n, flat.begin() + 2 * n);
  s.t_rise.assign(flat.begin() + 2 * n, flat.end());
  return s;
}

std::vector<double> SimState::pack() const {
  if (v_rc.size() != z.size() || t_rise.size() != z.size())
    throw DomainError("state components differ in length");
  std::vector<double> flat;
  flat.reserve(3 * z.size());
  flat.insert(flat.end(), v_rc.begin(), v_rc.end());
  flat.insert(flat.end(), z.begin(), z.end());
  flat.insert(flat.end(), t_rise.begin(), t_rise.end());
  return flat;
}

StateView::StateView(std::span<const double> flat) : flat_(flat), n_(flat.size() / 3) {
  if (flat.size() % 3 != 0)
    throw DomainError("state vector length must be a multiple of 3");
}

double effective_rct(const CellParams &cell, double t_rise, double t_ambient, double gas_constant) {
  const double t_core = t_ambient + t_rise;
  if (!(t_core > 0.0) || !(t_ambient > 0.0))
    throw DomainError("effective_rct: absolute temperature must be positive");
  return cell.r_ct0 * std::exp(cell.e_act / gas_constant * (1.0 / t_core - 1.0 / t_ambient));
}

double branch_currents(const ModuleConfig &config, const StateView &state, double total_current,
                       std::span<double> out) {
  const auto n = config.cells.size();
  if (state.size() != n || out.size() != n)
    throw DomainError("branch_currents: state size does not match module");

  // Admittance form: with V_k = f(z_k) - V_RC,k and Y_k = 1/R_k the common
  // terminal voltage is Vt = (sum V_k Y_k - I) / sum Y_k and i_k = Y_k (V_k - Vt).
  double sum_y = 0.0;
  double sum_vy = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double r = config.cells[k].series_resistance();
    if (!(r > 0.0))
      throw SingularityError("branch " + std::to_string(k) + " has non-positive series resistance");
    const double y = 1.0 / r;
    const double v = config.ocv->eval(state.z(k)) - state.v_rc(k);
    out[k] = v; // stash V_k
    sum_y += y;
    sum_vy += v * y;
  }
  const double v_terminal = (sum_vy - total_current) / sum_y;
  for (std::size_t k = 0; k < n; ++k)
    out[k] = (out[k] - v_terminal) / config.cells[k].series_resistance();
  return v_terminal;
}

std::vector<double> branch_currents(const ModuleConfig &config, const SimState &state,
                                    double total_current) {
  const auto flat = state.pack();
  std::vector<double> out(state.size());
  branch_currents(config, StateView(flat), total_current, out);
  return out;
}

double heat_generation(const CellParams &cell, double branch_current, double v_rc, double t_rise,
                       double t_ambient, double gas_constant) {
  const double r_rc = effective_rct(cell, t_rise, t_ambient, gas_constant) + cell.r_w;
  return branch_current * branch_current * cell.r_ohm + v_rc * v_rc / r_rc;
}

double surface_temperature(const ThermalParams &thermal, double t_rise, double t_ambient) {
  return t_ambient + t_rise * thermal.rth_surface_ambient / thermal.total_resistance();
}

void state_derivative(const ModuleConfig &config, std::span<const double> y, double total_current,
                      std::span<double> dydt) {
  const StateView s(y);
  const auto n = s.size();
  if (dydt.size() != y.size())
    throw DomainError("state_derivative: output size mismatch");

  // currents land in the t_rise block of dydt first; that slot is
  // overwritten last, after each current has been consumed
  const auto currents = dydt.subspan(2 * n, n);
  branch_currents(config, s, total_current, currents);

  const auto &th = config.thermal;
  const double thermal_decay = 1.0 / (th.c_p * th.total_resistance());
  for (std::size_t k = 0; k < n; ++k) {
    const auto &cell = config.cells[k];
    const double i = currents[k];
    const double v_rc = s.v_rc(k);
    const double t_rise = s.t_rise(k);
    const double r_rc =
        effective_rct(cell, t_rise, config.t_ambient_k, config.gas_constant) + cell.r_w;
    dydt[k] = -v_rc / (r_rc * cell.c_rc) + i / cell.c_rc;
    dydt[n + k] = -i / cell.q_coulomb();
    const double q_gen = i * i * cell.r_ohm + v_rc * v_rc / r_rc;
    dydt[2 * n + k] = -t_rise * thermal_decay + q_gen / th.c_p;
  }
}

std::vector<double> state_derivative(const ModuleConfig &config, const SimState &state,
                                     double total_current) {
  const auto flat = state.pack();
  std::vector<double> d(flat.size());
  state_derivative(config, flat, total_current, d);
  return d;
}

BranchOutputs evaluate_outputs(const ModuleConfig &config, std::span<const double> y,
                               double total_current) {
  const StateView s(y);
  const auto n = s.size();
  BranchOutputs out;
  out.currents.resize(n);
  out.terminal_voltage = branch_currents(config, s, total_current, out.currents);
  out.surface_temps.resize(n);
  out.q_gen.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    out.surface_temps[k] = surface_temperature(config.thermal, s.t_rise(k), config.t_ambient_k);
    out.q_gen[k] = heat_generation(config.cells[k], out.currents[k], s.v_rc(k), s.t_rise(k),
                                   config.t_ambient_k, config.gas_constant);
  }
  return out;
}

std::vector<double> ladder_to_contact(std::span<const double> interconnects, double terminal_joint) {
  if (terminal_joint < 0.0)
    throw DomainError("ladder_to_contact: negative terminal joint resistance");
  std::vector<double> out;
  out.reserve(interconnects.size());
  double acc = terminal_joint;
  for (double r : interconnects) {
    if (!(r >= 0.0))
      throw DomainError("ladder_to_contact: negative interconnect resistance");
    acc += r;
    out.push_back(acc);
  }
  return out;
}

void add_contact_resistance(ModuleConfig &config, std::span<const double> extra) {
  if (extra.size() != config.cells.size())
    throw DomainError("add_contact_resistance: one value per cell required");
  for (std::size_t k = 0; k < extra.size(); ++k) {
    if (!(extra[k] >= 0.0))
      throw DomainError("add_contact_resistance: negative resistance");
    config.cells[k].r_contact += extra[k];
  }
}

} // namespace parapack

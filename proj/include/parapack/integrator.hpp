#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace parapack {

struct IntegratorSettings {
  double rtol = 1e-6;
  double atol = 1e-8;
  double max_step = 10.0;  // [s]
  double min_step = 1e-9;  // [s]
  double event_tol = 1e-3; // [s] width of the final event bracket
  double initial_step = 0.0; // 0 selects a step from the local derivative scale
  // When set, every step has exactly this size and no error control runs.
  std::optional<double> fixed_step;
  std::size_t max_steps = 5'000'000;

  // Throws DomainError unless 0 < rtol < 1, atol > 0, 0 < min_step < max_step.
  void validate() const;
};

// Domain-level stop conditions of a load step. The simulate layer turns
// these into event functions on the module state.
enum class EventKind {
  terminal_voltage_below,
  any_branch_current_above,
  any_core_temp_above,
  time_reached,
};

enum class Crossing { rising, falling, either };

struct EventSpec {
  EventKind kind = EventKind::time_reached;
  double threshold = 0.0; // volts | amperes | kelvin | seconds
  Crossing direction = Crossing::either;

  // Natural direction for each kind: voltage falls, everything else rises.
  static EventSpec make(EventKind kind, double threshold);
};

std::string to_string(EventKind kind);
EventKind event_kind_from_string(const std::string &name);

// dy/dt = f(t, y); writes into dydt.
using Rhs = std::function<void(double t, std::span<const double> y, std::span<double> dydt)>;

// Scalar event function g(t, y). A crossing in `direction` stops the
// integration when `terminal` is set. If the condition already holds at the
// start (g <= 0 for a falling event, g >= 0 for a rising one) the event
// fires immediately.
struct Event {
  std::function<double(double t, std::span<const double> y)> fn;
  Crossing direction = Crossing::either;
  bool terminal = true;
};

// Samples of the solution on the requested output grid, row-major.
struct Trajectory {
  std::size_t dim = 0;
  std::vector<double> t;
  std::vector<double> y;

  std::size_t size() const noexcept { return t.size(); }
  std::span<const double> state(std::size_t i) const { return {y.data() + i * dim, dim}; }
};

struct TerminationRecord {
  std::optional<std::size_t> event; // index into the event list, none = reached t_end
  double t = 0.0;
  std::vector<double> y;
};

struct IntegrationStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t rhs_evals = 0;
};

struct IntegrationResult {
  Trajectory trajectory;
  TerminationRecord termination;
  IntegrationStats stats;
};

// Evenly spaced output times t0, t0+dt, ... up to and including t_end.
std::vector<double> uniform_grid(double t0, double t_end, double dt);

// Dormand-Prince 5(4) with PI step-size control and the 4th-order
// continuous extension. The trajectory holds every output time reached
// before termination, followed by the termination point itself when it is
// not already the last sample. Events are located by bisection on the dense
// output until the bracket is narrower than event_tol; the reported time is
// the late end of the bracket, so the terminating condition holds there.
//
// Throws IntegrationError on step-size underflow, a non-finite derivative
// that step rejection cannot avoid, or exceeding max_steps.
IntegrationResult integrate(const Rhs &rhs, std::span<const double> y0, double t0, double t_end,
                            const IntegratorSettings &settings, std::span<const Event> events = {},
                            std::span<const double> output_times = {});

} // namespace parapack

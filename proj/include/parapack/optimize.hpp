#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace parapack {

struct NelderMeadOptions {
  std::size_t max_evals = 4000;
  double x_tol = 1e-6;  // simplex diameter in normalized box coordinates
  double f_tol = 1e-10; // relative spread of simplex values
  double initial_step = 0.1;
  std::size_t restarts = 3; // fresh simplex around the best point after convergence
  double restart_step = 0.0; // simplex size of a restart, 0 = initial_step
  std::size_t starts = 1;   // >1 adds random starting points (deterministic in seed)
  std::uint64_t seed = 1;
  bool adaptive = true;   // dimension-dependent expansion/contraction/shrink
  bool log_scale = false; // normalize log(x) instead of x; needs lower > 0
};

struct NelderMeadResult {
  std::vector<double> x;
  double f = 0.0;
  std::size_t evals = 0;
  std::size_t iterations = 0;
  bool converged = false;
  // best value after each iteration; non-increasing by construction
  std::vector<double> history;
};

using Objective = std::function<double(std::span<const double> x)>;

// Box-constrained Nelder-Mead. The search runs in coordinates normalized to
// [0,1] per dimension (linearly, or in log(x) with log_scale); trial points are projected back into the box, so no
// evaluated point ever leaves [lower, upper]. A non-finite objective value
// counts as +inf. Throws DomainError on inconsistent bounds or a start
// outside them.
NelderMeadResult nelder_mead(const Objective &f, std::span<const double> x0,
                             std::span<const double> lower, std::span<const double> upper,
                             const NelderMeadOptions &options = {});

} // namespace parapack

#include "parapack/optimize.hpp"

#include "parapack/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace parapack {

namespace {

struct Search {
  const Objective &f;
  std::span<const double> lo, hi;
  std::size_t budget;
  std::size_t evals = 0;
  std::size_t iterations = 0;
  std::vector<double> history;
  std::vector<double> scratch;
  bool log_scale = false;

  double to_x(double u, std::size_t i) const {
    u = std::clamp(u, 0.0, 1.0);
    if (log_scale)
      return std::exp(std::log(lo[i]) + u * (std::log(hi[i]) - std::log(lo[i])));
    return lo[i] + u * (hi[i] - lo[i]);
  }
  double to_u(double x, std::size_t i) const {
    if (log_scale)
      return (std::log(x) - std::log(lo[i])) / (std::log(hi[i]) - std::log(lo[i]));
    return (x - lo[i]) / (hi[i] - lo[i]);
  }

  double eval(const std::vector<double> &u) {
    ++evals;
    for (std::size_t i = 0; i < u.size(); ++i)
      scratch[i] = to_x(u[i], i);
    const double v = f(scratch);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  }

  static void clamp(std::vector<double> &u) {
    for (auto &v : u)
      v = std::clamp(v, 0.0, 1.0);
  }

  // One Nelder-Mead run from u0; returns (best point, best value, converged).
  bool run(std::vector<double> &best, double &f_best, double step, const NelderMeadOptions &o) {
    const std::size_t n = best.size();
    std::vector<std::vector<double>> s(n + 1, best);
    std::vector<double> fv(n + 1);
    fv[0] = f_best;
    for (std::size_t i = 0; i < n; ++i) {
      auto &p = s[i + 1];
      // step away from the nearer wall so the simplex keeps full rank
      p[i] += p[i] + step <= 1.0 ? step : -step;
      fv[i + 1] = eval(p);
    }
    // Gao-Han coefficients keep the search effective in higher dimensions
    const double dn = static_cast<double>(n);
    const double expand = o.adaptive ? 1.0 + 2.0 / dn : 2.0;
    const double contract = o.adaptive ? 0.75 - 0.5 / dn : 0.5;
    const double shrink = o.adaptive ? 1.0 - 1.0 / dn : 0.5;
    std::vector<std::size_t> order(n + 1);
    std::vector<double> centroid(n), xr(n), xe(n), xc(n);

    while (evals < budget) {
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return fv[a] < fv[b]; });
      const auto ib = order.front(), iw = order.back(), isw = order[n - 1];
      ++iterations;
      if (fv[ib] < f_best) {
        f_best = fv[ib];
        best = s[ib];
      }
      history.push_back(f_best);

      double diam = 0.0;
      for (std::size_t j = 0; j <= n; ++j)
        for (std::size_t i = 0; i < n; ++i)
          diam = std::max(diam, std::abs(s[j][i] - s[ib][i]));
      const double fspread = std::abs(fv[iw] - fv[ib]);
      if (diam < o.x_tol && fspread <= o.f_tol * (std::abs(fv[ib]) + 1e-300))
        return true;
      if (diam < o.x_tol * 1e-3)
        return true;

      std::fill(centroid.begin(), centroid.end(), 0.0);
      for (std::size_t j = 0; j <= n; ++j)
        if (j != iw)
          for (std::size_t i = 0; i < n; ++i)
            centroid[i] += s[j][i] / static_cast<double>(n);

      for (std::size_t i = 0; i < n; ++i)
        xr[i] = centroid[i] + (centroid[i] - s[iw][i]);
      clamp(xr);
      const double fr = eval(xr);
      if (fr < fv[ib]) {
        for (std::size_t i = 0; i < n; ++i)
          xe[i] = centroid[i] + expand * (centroid[i] - s[iw][i]);
        clamp(xe);
        const double fe = eval(xe);
        if (fe < fr)
          s[iw] = xe, fv[iw] = fe;
        else
          s[iw] = xr, fv[iw] = fr;
        continue;
      }
      if (fr < fv[isw]) {
        s[iw] = xr, fv[iw] = fr;
        continue;
      }
      const bool outside = fr < fv[iw];
      for (std::size_t i = 0; i < n; ++i)
        xc[i] = outside ? centroid[i] + contract * (xr[i] - centroid[i])
                        : centroid[i] + contract * (s[iw][i] - centroid[i]);
      const double fc = eval(xc);
      if (fc < (outside ? fr : fv[iw])) {
        s[iw] = xc, fv[iw] = fc;
        continue;
      }
      // shrink toward the best vertex
      for (std::size_t j = 0; j <= n; ++j) {
        if (j == ib)
          continue;
        for (std::size_t i = 0; i < n; ++i)
          s[j][i] = s[ib][i] + shrink * (s[j][i] - s[ib][i]);
        fv[j] = eval(s[j]);
      }
    }
    return false;
  }
};

} // namespace

NelderMeadResult nelder_mead(const Objective &f, std::span<const double> x0,
                             std::span<const double> lower, std::span<const double> upper,
                             const NelderMeadOptions &options) {
  const std::size_t n = x0.size();
  if (n == 0 || lower.size() != n || upper.size() != n)
    throw DomainError("nelder_mead: dimension mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(lower[i] < upper[i]))
      throw DomainError("nelder_mead: lower bound must be below upper bound");
    if (!(x0[i] >= lower[i] && x0[i] <= upper[i]))
      throw DomainError("nelder_mead: start point outside bounds");
  }
  if (options.max_evals == 0 || !(options.initial_step > 0.0 && options.initial_step <= 0.5))
    throw DomainError("nelder_mead: invalid options");

  if (options.log_scale)
    for (std::size_t i = 0; i < n; ++i)
      if (!(lower[i] > 0.0))
        throw DomainError("nelder_mead: log scaling needs positive lower bounds");
  Search search{f, lower, upper, options.max_evals, 0, 0, {}, {}, options.log_scale};
  search.scratch.resize(n);

  std::vector<std::vector<double>> starts;
  std::vector<double> u0(n);
  for (std::size_t i = 0; i < n; ++i)
    u0[i] = search.to_u(x0[i], i);
  starts.push_back(u0);
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t s = 1; s < options.starts; ++s) {
    std::vector<double> u(n);
    for (auto &v : u)
      v = unit(rng);
    starts.push_back(std::move(u));
  }

  std::vector<double> best_u;
  double best_f = std::numeric_limits<double>::infinity();
  bool converged = false;
  const std::size_t per_start = options.max_evals / starts.size();
  for (std::size_t s = 0; s < starts.size(); ++s) {
    search.budget = std::min(options.max_evals, search.evals + per_start);
    if (s + 1 == starts.size())
      search.budget = options.max_evals;
    std::vector<double> u = starts[s];
    double fu = search.eval(u);
    bool conv = false;
    double step = options.initial_step;
    for (std::size_t r = 0; r <= options.restarts && search.evals < search.budget; ++r) {
      const double before = fu;
      conv = search.run(u, fu, step, options);
      if (!conv)
        break;
      // a restart that no longer improves confirms the minimum
      if (r > 0 && before - fu <= options.f_tol * (std::abs(fu) + 1e-300))
        break;
      step = options.restart_step > 0.0 ? options.restart_step : options.initial_step;
    }
    if (fu < best_f) {
      best_f = fu;
      best_u = u;
      converged = conv;
    }
    if (!search.history.empty())
      search.history.back() = std::min(search.history.back(), best_f);
  }

  // keep the reported history non-increasing across restarts and starts
  for (std::size_t i = 1; i < search.history.size(); ++i)
    search.history[i] = std::min(search.history[i], search.history[i - 1]);

  NelderMeadResult res;
  res.x.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    res.x[i] = search.to_x(best_u[i], i);
  res.f = best_f;
  res.evals = search.evals;
  res.iterations = search.iterations;
  res.converged = converged;
  res.history = std::move(search.history);
  return res;
}

} // namespace parapack

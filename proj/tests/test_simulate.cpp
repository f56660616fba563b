#include "parapack/csv.hpp"
#include "parapack/errors.hpp"
#include "parapack/scenarios.hpp"
#include "parapack/simulate.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace parapack;

namespace {

double charge(const ModuleConfig &m, const SimResult &r, std::size_t i) {
  double q = 0.0;
  for (std::size_t k = 0; k < m.size(); ++k)
    q += m.cells[k].q_coulomb() * r.at(r.soc, i, k);
  return q;
}

LoadStep cc(double amps, double seconds) {
  LoadStep s;
  s.current_a = amps;
  s.duration_limit_s = seconds;
  return s;
}

} // namespace

TEST_SUITE("simulate") {

TEST_CASE("charge is conserved across steps") {
  const auto m = bench_module(BenchConfig::baseline);
  Protocol p;
  p.steps = {cc(300.0, 1200.0), Protocol::rest(600.0).steps.front(), cc(-150.0, 900.0)};
  p.initial_soc = {0.8};
  IntegratorSettings s;
  s.rtol = 1e-9;
  s.atol = 1e-11;
  const auto r = run(m, p, s);
  CHECK(r.termination.cause == TerminationCause::duration);
  CHECK(r.time.back() == doctest::Approx(2700.0));
  const double moved = 300.0 * 1200.0 - 150.0 * 900.0;
  CHECK(charge(m, r, 0) - charge(m, r, r.size() - 1) == doctest::Approx(moved).epsilon(1e-7));
}

TEST_CASE("rest equalizes two cells at different SOC") {
  auto m = reference_module();
  m.cells = {mean_cell(m.cells), mean_cell(m.cells)};
  auto p = Protocol::rest(3 * 3600.0);
  p.initial_soc = {0.6, 0.4};
  p.output_dt = 60.0;
  const auto r = run(m, p);
  double prev_gap = 0.2;
  for (std::size_t i = 1; i < r.size(); ++i) {
    const double gap = r.at(r.soc, i, 0) - r.at(r.soc, i, 1);
    CHECK(gap <= prev_gap + 1e-12);
    CHECK(gap >= -1e-9);
    prev_gap = gap;
  }
  CHECK(prev_gap < 0.05);
  CHECK(charge(m, r, r.size() - 1) == doctest::Approx(charge(m, r, 0)).epsilon(1e-9));
  // no external current: branch currents cancel
  for (std::size_t i = 0; i < r.size(); i += 10)
    CHECK(std::abs(r.at(r.current, i, 0) + r.at(r.current, i, 1)) < 1e-9);
}

TEST_CASE("C-rate resolves against the module rating") {
  const auto m = reference_module();
  LoadStep s;
  s.c_rate = 0.45;
  CHECK(s.resolve_current(m) == doctest::Approx(504.0));
  s.current_a = 100.0;
  CHECK(s.resolve_current(m) == 100.0);
}

TEST_CASE("termination causes") {
  const auto base = run(bench_module(BenchConfig::baseline), Protocol::discharge(0.45, 2.5, kCurrentLimit));
  CHECK(base.termination.cause == TerminationCause::voltage_cutoff);
  CHECK(base.terminal_voltage.back() == doctest::Approx(2.5).epsilon(1e-3));

  const auto fail =
      run(bench_module(BenchConfig::single_failure), Protocol::discharge(0.45, 2.5, kCurrentLimit));
  CHECK(fail.termination.cause == TerminationCause::over_current);
  REQUIRE(fail.termination.cell.has_value());
  CHECK(*fail.termination.cell == 3);

  auto cut = Protocol::discharge(0.45, 2.5);
  cut.soc_cutoff = 0.3;
  const auto rc = run(reference_module(), cut);
  CHECK(rc.termination.cause == TerminationCause::soc_cutoff);
  double avg = 0.0;
  for (std::size_t k = 0; k < 4; ++k)
    avg += rc.at(rc.soc, rc.size() - 1, k) / 4.0;
  CHECK(avg == doctest::Approx(0.3).epsilon(1e-3));

  // a voltage limit below the curve leaves only the SOC floor guard
  const auto deep = run(reference_module(), Protocol::discharge(0.45, 1.0));
  CHECK(deep.termination.cause == TerminationCause::soc_floor);
}

TEST_CASE("protocol validation") {
  Protocol p;
  CHECK_THROWS_AS(p.validate(4), DomainError);
  p = Protocol::discharge(0.45);
  p.initial_soc = {0.5, 0.5};
  CHECK_THROWS_AS(p.validate(4), DomainError);
  p.initial_soc = {1.2};
  CHECK_THROWS_AS(p.validate(4), DomainError);
  p.initial_soc = {};
  p.steps.front().terminators.clear();
  CHECK_THROWS_AS(p.validate(4), DomainError);
}

TEST_CASE("result CSV round trip") {
  auto p = Protocol::discharge(0.85, 2.5);
  p.output_dt = 7.0;
  const auto r = run(bench_module(BenchConfig::single_failure), p);
  std::ostringstream out;
  write_csv(r, out);
  const auto back = read_csv(csv::parse(out.str()));
  CHECK(back.n_cells == r.n_cells);
  CHECK(back.time == r.time);
  CHECK(back.current == r.current);
  CHECK(back.soc == r.soc);
  CHECK(back.v_rc == r.v_rc);
  CHECK(back.core_temp_c == r.core_temp_c);
  CHECK(back.tab_temp_c == r.tab_temp_c);
  CHECK(back.q_gen == r.q_gen);
  CHECK(back.terminal_voltage == r.terminal_voltage);
  CHECK(back.total_current == r.total_current);
  CHECK_THROWS_AS(read_csv(csv::parse("a,b\n1,2\n")), ParseError);
}

TEST_CASE("imbalance metrics of a hand-made result") {
  SimResult r;
  r.n_cells = 2;
  r.time = {0.0, 1.0, 2.0};
  r.current = {10, 10, 30, -10, 5, 5};
  r.tab_temp_c = {20, 21, 25, 22, 30, 30};
  r.core_temp_c = {20, 20, 28, 24, 33, 31};
  r.soc = r.v_rc = r.q_gen = std::vector<double>(6, 0.0);
  r.terminal_voltage = r.total_current = {0, 0, 0};
  const auto m = imbalance_metrics(r);
  CHECK(m.max_current_spread == 40.0);
  CHECK(m.t_current_spread == 1.0);
  CHECK(m.max_tab_spread == 3.0);
  CHECK(m.max_core_spread == 4.0);
  CHECK(m.max_core_temp_c == 33.0);
  CHECK(m.t_max_core_temp == 2.0);
  CHECK(m.max_abs_current == 30.0);
}

TEST_CASE("profile compression and replay") {
  std::vector<double> t, i;
  for (int k = 0; k <= 100; ++k) {
    t.push_back(k);
    i.push_back(k < 50 ? 500.0 + (k % 2 ? 1.0 : -1.0) : 200.0);
  }
  const auto prof = compress_profile(t, i, 5.0);
  REQUIRE(prof.current.size() == 2);
  CHECK(prof.current[0] == doctest::Approx(500.0).epsilon(1e-2));
  CHECK(prof.time[1] == 50.0);

  const auto m = reference_module();
  CurrentProfile steps{{0.0, 600.0, 1200.0}, {400.0, 100.0}};
  const auto r = run_profile(m, steps, uniform_grid(0.0, 1200.0, 60.0));
  Protocol p;
  p.steps = {cc(400.0, 600.0), cc(100.0, 600.0)};
  p.output_dt = 60.0;
  const auto q = run(m, p);
  REQUIRE(r.size() == q.size());
  for (std::size_t k = 0; k < r.soc.size(); ++k)
    CHECK(r.soc[k] == doctest::Approx(q.soc[k]).epsilon(1e-6));
}

TEST_CASE("case studies put the outlier last") {
  const auto cases = case_studies(reference_module());
  REQUIRE(cases.size() == 4);
  CHECK(cases[0].name == "high_resistance_outlier");
  const auto &hr = cases[0];
  CHECK(hr.config.cells[3].r_ohm == doctest::Approx(2.0 * hr.config.cells[0].r_ohm));
  // the high-resistance outlier carries the least current at first
  for (std::size_t k = 0; k < 3; ++k)
    CHECK(hr.result.at(hr.result.current, 1, 3) < hr.result.at(hr.result.current, 1, k));
  const auto &lc = cases[2];
  CHECK(lc.config.cells[3].q_ah == doctest::Approx(0.7 * lc.config.cells[0].q_ah));
}

}

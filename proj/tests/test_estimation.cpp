#include "parapack/errors.hpp"
#include "parapack/estimation.hpp"
#include "parapack/scenarios.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace parapack;

namespace {

std::filesystem::path write_temp(const std::string &name, const std::string &body) {
  auto p = std::filesystem::temp_directory_path() / ("parapack_test_" + name);
  std::ofstream(p) << body;
  return p;
}

std::filesystem::path save(const MeasurementSet &d, const std::string &name) {
  std::ostringstream s;
  write_measurements(d, s);
  return write_temp(name, s.str());
}

Protocol short_discharge(double seconds) {
  Protocol p;
  LoadStep s;
  s.c_rate = 0.45;
  s.duration_limit_s = seconds;
  p.steps = {s};
  return p;
}

NoiseOptions clean() {
  NoiseOptions n;
  n.current_sigma_a = 0.0;
  n.temp_sigma_c = 0.0;
  n.current_decimals = n.temp_decimals = n.voltage_decimals = n.time_decimals = -1;
  return n;
}

} // namespace

TEST_SUITE("estimation") {

TEST_CASE("measurement CSV round trip keeps gaps") {
  auto noise = NoiseOptions{};
  noise.seed = 5;
  const auto d = synthesize_measurements(bench_module(BenchConfig::baseline), short_discharge(60.0), noise);
  LoadOptions lo;
  lo.gap_fill = false;
  const auto back = load_measurements(save(d, "meas_rt.csv"), lo);
  REQUIRE(back.size() == d.size());
  CHECK(back.n_cells == 4);
  CHECK(back.time == d.time);
  CHECK(back.total_current == d.total_current);
  CHECK(back.branch_current == d.branch_current);
  for (std::size_t i = 0; i < d.tab_temp_c.size(); ++i)
    CHECK(std::isnan(back.tab_temp_c[i]) == std::isnan(d.tab_temp_c[i]));
  // 5 Hz currents, 1 Hz temperatures
  CHECK(std::isnan(back.tab(1, 0)));
  CHECK_FALSE(std::isnan(back.tab(5, 0)));
  CHECK(back.flagged_rows.empty());
}

TEST_CASE("short temperature gaps are interpolated, long ones kept") {
  std::string body = "t_s,i_total_a,i1_a,i2_a,v_module_v,t1_c,t2_c,t_amb_c\n";
  for (int k = 0; k <= 200; ++k) {
    const bool gap = (k >= 10 && k <= 14) || (k >= 100 && k <= 180);
    std::string temp = gap ? "," : std::to_string(20.0 + 0.01 * k) + "," + std::to_string(21.0);
    body += std::to_string(k) + ",10,5,5,3.3," + temp + ",20\n";
  }
  const auto d = load_measurements(write_temp("gaps.csv", body));
  CHECK(d.tab(12, 0) == doctest::Approx(20.12).epsilon(1e-9));
  CHECK(std::isnan(d.tab(140, 0)));
}

TEST_CASE("inconsistent current sums are flagged, not rejected") {
  const std::string body = "t_s,i_total_a,i1_a,i2_a,v_module_v,t1_c,t2_c,t_amb_c\n"
                           "0,10,5,5,3.3,20,20,20\n"
                           "1,10,30,5,3.3,20,20,20\n"
                           "2,10,5,5,3.3,20,20,20\n";
  const auto d = load_measurements(write_temp("flag.csv", body));
  CHECK(d.flagged_rows == std::vector<std::size_t>{1});
}

TEST_CASE("temperature columns are optional as a group") {
  const std::string none = "t_s,i_total_a,i1_a,i2_a,v_module_v\n0,10,5,5,3.3\n1,10,5,5,3.3\n";
  const auto d = load_measurements(write_temp("notemp.csv", none));
  CHECK_FALSE(d.has_temperatures());
  CHECK_FALSE(d.ambient_c().has_value());
  const std::string half = "t_s,i_total_a,i1_a,i2_a,v_module_v,t1_c\n0,10,5,5,3.3,20\n1,10,5,5,3.3,20\n";
  CHECK_THROWS_AS(load_measurements(write_temp("halftemp.csv", half)), ParseError);
  const std::string back = "t_s,i_total_a,i1_a,i2_a,v_module_v\n1,10,5,5,3.3\n0,10,5,5,3.3\n";
  CHECK_THROWS_AS(load_measurements(write_temp("backwards.csv", back)), DomainError);
}

TEST_CASE("parameter packing and fit bounds") {
  const auto cells = reference_cells();
  const auto x = pack_electrical(cells);
  REQUIRE(x.size() == electrical_dim(4));
  auto m = reference_module();
  auto y = x;
  y[4] *= 2.0; // r_contact of cell 2
  apply_electrical(y, m);
  CHECK(m.cells[1].r_contact == doctest::Approx(2.0 * cells[1].r_contact));
  const auto a = FitSpec::around(cells, 0.3, 9), b = FitSpec::around(cells, 0.3, 9);
  CHECK(a.initial == b.initial);
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(a.lower[i] == doctest::Approx(0.25 * x[i]));
    CHECK(a.upper[i] == doctest::Approx(4.0 * x[i]));
    CHECK(std::abs(a.initial[i] / x[i] - 1.0) <= 0.3 + 1e-12);
  }
  CHECK_NOTHROW(a.validate(4));
}

TEST_CASE("replay of noise-free data is exact at the truth") {
  const auto truth = bench_module(BenchConfig::single_failure);
  auto n = clean();
  n.current_dt_s = 1.0;
  const auto d = synthesize_measurements(truth, short_discharge(900.0), n);
  EstimationOptions o;
  const double at_truth = electrical_cost(pack_electrical(truth.cells), d, truth, o);
  CHECK(at_truth < 0.05);
  auto off = pack_electrical(truth.cells);
  off[0] *= 1.2;
  CHECK(electrical_cost(off, d, truth, o) > 10.0 * at_truth);
  const auto r = rmse(replay(truth, d, o), d);
  for (double v : r.tab_temp_c)
    CHECK(v < 1e-3);
}

TEST_CASE("a small electrical fit recovers the series resistance") {
  auto truth = reference_module();
  truth.cells.resize(2);
  truth.cells[1].r_contact *= 3.0;
  auto n = NoiseOptions{};
  n.current_dt_s = 1.0;
  n.seed = 2;
  const auto d = synthesize_measurements(truth, short_discharge(1800.0), n);
  const auto spec = FitSpec::around(truth.cells, 0.15, 4);
  EstimationOptions o;
  o.optimizer.max_evals = 2500;
  o.optimizer.restarts = 2;
  const auto fit = fit_electrical(d, truth, spec, o);
  CHECK(fit.report.final_cost <= fit.report.initial_cost);
  for (std::size_t k = 0; k < 2; ++k) {
    const double want = truth.cells[k].series_resistance();
    CHECK(fit.config.cells[k].series_resistance() == doctest::Approx(want).epsilon(0.03));
  }
}

TEST_CASE("thermal first stage") {
  const auto truth = bench_module(BenchConfig::baseline);
  auto n = clean();
  n.current_dt_s = 1.0;
  const auto d = synthesize_measurements(truth, short_discharge(3600.0), n);
  std::vector<double> r_eis;
  for (const auto &c : truth.cells)
    r_eis.push_back(c.r_ohm + c.r_ct0 + c.r_w);
  ThermalParams prior = truth.thermal;
  prior.c_p *= 1.4;
  prior.rth_surface_ambient *= 0.7;
  prior.rth_core_surface *= 0.7;
  const auto fit = fit_thermal_initial(d, r_eis, prior);
  CHECK(fit.identified);
  // the core share of the prior is kept
  CHECK(fit.params.rth_core_surface / fit.params.total_resistance() ==
        doctest::Approx(prior.rth_core_surface / prior.total_resistance()));

  // flat temperatures carry no information
  auto flat = d;
  for (auto &t : flat.tab_temp_c)
    if (!std::isnan(t))
      t = 22.2;
  const auto none = fit_thermal_initial(flat, r_eis, prior);
  CHECK_FALSE(none.identified);
  CHECK(none.params.c_p == prior.c_p);
}

TEST_CASE("RMSE table layout") {
  RmseRow row{{0.1, 0.2}, {0.3, 0.4}};
  std::ostringstream out;
  write_rmse_table({{"baseline", row}}, out);
  CHECK(out.str() == "configuration,i1_rmse_a,i2_rmse_a,t1_rmse_c,t2_rmse_c\n"
                     "baseline,0.1,0.2,0.3,0.4\n");
}

}

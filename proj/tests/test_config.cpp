#include "parapack/config.hpp"
#include "parapack/errors.hpp"
#include "parapack/scenarios.hpp"
#include "parapack/svg.hpp"

#include <doctest.h>

#include <cmath>
#include <string>

using namespace parapack;

namespace {

std::string pointer_of(const std::string &text) {
  try {
    parse_run_config(text);
  } catch (const ConfigError &e) {
    return e.pointer();
  }
  return "<accepted>";
}

std::size_t count(const std::string &hay, const std::string &needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1))
    ++n;
  return n;
}

} // namespace

TEST_SUITE("config") {

TEST_CASE("a full run configuration parses") {
  const auto cfg = parse_run_config(R"({
    "module": {
      "preset": "reference",
      "cells": [{}, {}, {}, {"r_contact": 0.0005}],
      "thermal": {"c_p": 1500},
      "t_ambient_c": 25
    },
    "protocol": {
      "steps": [
        {"mode": "constant_current", "current_a": 200,
         "terminators": [{"kind": "terminal_voltage_below", "threshold": 2.7},
                         {"kind": "any_core_temp_above", "threshold": 55}]},
        {"mode": "rest", "duration_s": 60}
      ],
      "initial_soc": 0.9
    },
    "seed": 12,
    "sobol": {"n_base": 128, "grid_points": 8},
    "thresholds": {"c_rates": [0.5], "params": ["r_ohm", "q_cap"]},
    "sweep": {"axis": "n_cells", "grid": [2, 3]}
  })");
  REQUIRE(cfg.module.size() == 4);
  CHECK(cfg.module.cells[3].r_contact == 0.0005);
  CHECK(cfg.module.cells[0].r_contact == cfg.module.cells[1].r_contact);
  CHECK(cfg.module.thermal.c_p == 1500.0);
  CHECK(cfg.module.t_ambient_k == doctest::Approx(298.15));
  REQUIRE(cfg.protocol);
  REQUIRE(cfg.protocol->steps.size() == 2);
  CHECK(*cfg.protocol->steps[0].current_a == 200.0);
  REQUIRE(cfg.protocol->steps[0].terminators.size() == 2);
  CHECK(cfg.protocol->steps[0].terminators[1].threshold == doctest::Approx(328.15));
  CHECK(cfg.protocol->steps[1].mode == StepMode::rest);
  CHECK(cfg.seed == 12);
  CHECK(cfg.sobol.n_base == 128);
  CHECK(cfg.thresholds.params.size() == 2);
  CHECK(cfg.sweep.axis == SweepAxis::n_cells);
  CHECK(cfg.mean_module(3).size() == 3);
}

TEST_CASE("defaults without a module give the reference module") {
  const auto cfg = parse_run_config("{}");
  CHECK(cfg.module.size() == reference_module().size());
  CHECK_FALSE(cfg.protocol);
}

TEST_CASE("errors name the offending node") {
  CHECK(pointer_of(R"({"modul": {}})") == "/modul");
  CHECK(pointer_of(R"({"module": {"cells": [{}, {"r_ohm": -1}]}})") == "/module/cells/1/r_ohm");
  CHECK(pointer_of(R"({"module": {"preset": "nonsense"}})") == "/module/preset");
  CHECK(pointer_of(R"({"protocol": {"steps": [{"mode": "constant_current"}]}})") ==
        "/protocol/steps/0");
  CHECK(pointer_of(R"({"protocol": {"steps": [{"mode": "constant_current", "c_rate": 1,
                      "terminators": [{"kind": "sideways", "threshold": 1}]}]}})") ==
        "/protocol/steps/0/terminators/0/kind");
  CHECK(pointer_of(R"({"sweep": {"axis": "n_cells", "n_cells": 1}})") == "/sweep/n_cells");
  CHECK(pointer_of(R"({"thresholds": {"q_search_cap_pct": 100}})") == "/thresholds/q_search_cap_pct");
  CHECK(pointer_of("{not json") == "");
}

TEST_CASE("svg has one group per series and a legend entry for each") {
  Chart c{"T & I", "x", "y", {}};
  c.series.push_back({"a<1>", {0, 1, 2}, {0, 1, 4}});
  c.series.push_back({"b", {0, 1, 2, 3}, {1, std::nan(""), 2, 3}});
  const auto svg = render_svg(c);
  CHECK(svg.starts_with("<svg "));
  CHECK(count(svg, "class=\"series\"") == 2);
  // the NaN splits series b into two polylines
  CHECK(count(svg, "<polyline") == 3);
  CHECK(svg.find("T &amp; I") != std::string::npos);
  CHECK(svg.find(">a&lt;1&gt;</text>") != std::string::npos);
}

TEST_CASE("empty charts are rejected") {
  Chart c{"empty", "x", "y", {}};
  c.series.push_back({"nothing", {}, {}});
  CHECK_THROWS_AS(render_svg(c), DomainError);
}

TEST_CASE("threshold chart leaves out unbounded points") {
  csv::Table t;
  t.header = {"axis_value", "param", "threshold_pct", "bounded", "peak_temp_c"};
  t.rows = {{"0.45", "r_ohm", "116.8", "true", "60"},
            {"0.85", "r_ohm", "14", "true", "60"},
            {"0.45", "q_cap", "", "false", "55"},
            {"0.85", "q_cap", "19", "true", "60"}};
  t.line_numbers = {2, 3, 4, 5};
  const auto c = threshold_chart(t, "C-rate");
  REQUIRE(c.series.size() == 2);
  CHECK(c.series[0].label == "r_ohm");
  CHECK(c.series[0].x.size() == 2);
  CHECK(c.series[1].x.size() == 1);
  CHECK(chart_kind_from_string("sobol_indices") == ChartKind::sobol_indices);
  CHECK_THROWS_AS(chart_kind_from_string("pie"), DomainError);
}

} // TEST_SUITE

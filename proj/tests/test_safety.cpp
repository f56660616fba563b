#include "parapack/errors.hpp"
#include "parapack/safety.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace parapack;

namespace {

double field(const CellParams &c, SafetyParam p) {
  switch (p) {
  case SafetyParam::r_ohm: return c.r_ohm;
  case SafetyParam::r_contact: return c.r_contact;
  case SafetyParam::r_ct0: return c.r_ct0;
  case SafetyParam::q_cap: return c.q_ah;
  }
  return 0.0;
}

} // namespace

TEST_SUITE("safety") {

TEST_CASE("outlier sits last and moves in the query direction") {
  for (SafetyParam p : kSafetyParams) {
    auto q = ThresholdQuery::reference(p, 0.85);
    q.n_cells = 5;
    const auto m0 = outlier_module(q, 0.0);
    REQUIRE(m0.size() == 5);
    for (const auto &c : m0.cells)
      CHECK(field(c, p) == field(q.mean_cell, p));

    const auto m = outlier_module(q, 40.0);
    const double want = field(q.mean_cell, p) * (p == SafetyParam::q_cap ? 0.6 : 1.4);
    CHECK(field(m.cells.back(), p) == doctest::Approx(want).epsilon(1e-14));
    for (std::size_t k = 0; k + 1 < m.size(); ++k)
      CHECK(field(m.cells[k], p) == field(q.mean_cell, p));
  }
}

TEST_CASE("threshold reports the limit within tolerance") {
  auto q = ThresholdQuery::reference(SafetyParam::r_ohm, 0.85);
  const auto r = derive_threshold(q);
  REQUIRE(r.bounded);
  CHECK(r.tolerance_met);
  CHECK(r.outlier_cell == q.n_cells - 1);
  CHECK(r.peak_temp_c <= q.temp_limit_c + 1e-9);
  CHECK(q.temp_limit_c - r.peak_temp_c <= q.temp_tolerance_c);
  // a visibly larger deviation breaks the limit
  CHECK(peak_core_temp(q, r.normalized_deviation_pct + 1.0) > q.temp_limit_c);
  CHECK(r.normalized_deviation_pct ==
        doctest::Approx(100.0 * (r.theta_limit - r.theta_mean) / r.theta_mean).epsilon(1e-12));
  CHECK(r.theta_mean == q.mean_cell.r_ohm);
}

TEST_CASE("capacity threshold is normalized as a loss") {
  auto q = ThresholdQuery::reference(SafetyParam::q_cap, 0.85);
  const auto r = derive_threshold(q);
  REQUIRE(r.bounded);
  CHECK(r.theta_limit < r.theta_mean);
  CHECK(r.normalized_deviation_pct ==
        doctest::Approx(100.0 * (r.theta_mean - r.theta_limit) / r.theta_mean).epsilon(1e-12));
}

TEST_CASE("capacity never reaches the limit at low current") {
  const auto r = derive_threshold(ThresholdQuery::reference(SafetyParam::q_cap, 0.45));
  CHECK_FALSE(r.bounded);
  CHECK(r.peak_temp_c < 60.0);
}

TEST_CASE("a limit below the healthy peak gives zero") {
  auto q = ThresholdQuery::reference(SafetyParam::r_contact, 0.85);
  q.temp_limit_c = 25.0;
  const auto r = derive_threshold(q);
  CHECK(r.bounded);
  CHECK(r.normalized_deviation_pct == 0.0);
  CHECK_FALSE(r.tolerance_met);
}

TEST_CASE("thresholds are deterministic") {
  const auto q = ThresholdQuery::reference(SafetyParam::r_contact, 0.85);
  const auto a = derive_threshold(q), b = derive_threshold(q);
  CHECK(a.normalized_deviation_pct == b.normalized_deviation_pct);
  CHECK(a.evaluations == b.evaluations);
}

TEST_CASE("invalid queries are rejected") {
  auto q = ThresholdQuery::reference(SafetyParam::r_ohm, 0.45);
  q.n_cells = 1;
  CHECK_THROWS_AS(derive_threshold(q), DomainError);
  q = ThresholdQuery::reference(SafetyParam::q_cap, 0.45);
  q.q_search_cap_pct = 100.0;
  CHECK_THROWS_AS(derive_threshold(q), DomainError);
  CHECK_THROWS_AS(safety_param_from_string("r_nope"), DomainError);
}

TEST_CASE("sweep records bad grid values and keeps going") {
  const auto base = ThresholdQuery::reference(SafetyParam::r_ohm, 0.85);
  const auto pts = robustness_sweep(SweepAxis::n_cells, {2.5, 3.0}, base, {SafetyParam::r_ohm}, 2);
  REQUIRE(pts.size() == 2);
  CHECK_FALSE(pts[0].result);
  CHECK_FALSE(pts[0].error.empty());
  CHECK(pts[1].result);
}

TEST_CASE("safety table layout") {
  std::vector<SweepPoint> pts(3);
  pts[0].axis_value = 0.45, pts[0].param = SafetyParam::r_ohm;
  pts[0].result = ThresholdResult{};
  pts[0].result->bounded = true;
  pts[0].result->normalized_deviation_pct = 116.84;
  pts[1].axis_value = 0.85, pts[1].param = SafetyParam::r_ohm;
  pts[1].result = ThresholdResult{};
  pts[1].result->bounded = false;
  pts[2].axis_value = 0.45, pts[2].param = SafetyParam::q_cap;
  std::ostringstream out;
  write_safety_table(pts, out);
  CHECK(out.str() == "param,0.45C,0.85C\nr_ohm,116.8,N/A\nq_cap,error,\n");
}

} // TEST_SUITE

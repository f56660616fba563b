#include "parapack/scenarios.hpp"

#include "parapack/errors.hpp"

#include <string>

namespace parapack {

namespace {
constexpr double kMicro = 1e-6;
}

std::vector<CellParams> reference_cells() {
  const double r_ohm[] = {168.9, 183.9, 159.6, 171.2};
  const double r_c[] = {127.8, 150.9, 218.2, 225.9};
  const double q[] = {274.9, 273.0, 273.8, 272.1};
  const double r_ct0[] = {44.4, 45.1, 73.4, 69.5};
  std::vector<CellParams> cells(4);
  for (std::size_t k = 0; k < 4; ++k) {
    auto &c = cells[k];
    c.r_ohm = r_ohm[k] * kMicro;
    c.r_contact = r_c[k] * kMicro;
    c.r_ct0 = r_ct0[k] * kMicro;
    c.r_w = 101.0 * kMicro;
    c.c_rc = 4.5e6;
    c.q_ah = q[k];
    c.e_act = 65e3;
  }
  return cells;
}

ThermalParams reference_thermal() { return ThermalParams{205.0, 0.595, 1.362}; }

std::array<double, 4> bench_resistances(BenchConfig which) {
  switch (which) {
  case BenchConfig::baseline:
    return {15.8 * kMicro, 12.0 * kMicro, 16.6 * kMicro, 17.1 * kMicro};
  case BenchConfig::single_failure:
    return {15.5 * kMicro, 12.5 * kMicro, 16.3 * kMicro, 264.2 * kMicro};
  case BenchConfig::interconnect_failure:
    return {15.5 * kMicro, 112.8 * kMicro, 113.7 * kMicro, 119.7 * kMicro};
  }
  throw DomainError("unknown bench configuration");
}

std::string_view to_string(BenchConfig which) {
  switch (which) {
  case BenchConfig::baseline:
    return "baseline";
  case BenchConfig::single_failure:
    return "single_failure";
  case BenchConfig::interconnect_failure:
    return "interconnect_failure";
  }
  return "unknown";
}

BenchConfig bench_config_from_string(std::string_view name) {
  if (name == "baseline")
    return BenchConfig::baseline;
  if (name == "single_failure")
    return BenchConfig::single_failure;
  if (name == "interconnect_failure")
    return BenchConfig::interconnect_failure;
  throw DomainError("unknown bench configuration '" + std::string(name) + "'");
}

ModuleConfig reference_module() {
  ModuleConfig m;
  m.cells = reference_cells();
  m.thermal = reference_thermal();
  m.ocv = std::make_shared<const OcvTable>(synthetic_lfp());
  m.t_ambient_k = to_kelvin(22.2);
  return m;
}

ModuleConfig bench_module(BenchConfig which) {
  auto m = reference_module();
  const auto extra = bench_resistances(which);
  if (which == BenchConfig::interconnect_failure) {
    const auto ladder = ladder_to_contact(extra, 0.0);
    add_contact_resistance(m, ladder);
    m.contact_convention = ContactConvention::ladder;
  } else {
    add_contact_resistance(m, extra);
    m.contact_convention = ContactConvention::per_branch;
  }
  return m;
}

CellParams mean_cell(const std::vector<CellParams> &cells) {
  if (cells.empty())
    throw DomainError("mean_cell: no cells");
  CellParams m;
  for (const auto &c : cells) {
    m.r_ohm += c.r_ohm;
    m.r_contact += c.r_contact;
    m.r_ct0 += c.r_ct0;
    m.r_w += c.r_w;
    m.c_rc += c.c_rc;
    m.q_ah += c.q_ah;
    m.e_act += c.e_act;
  }
  const double n = static_cast<double>(cells.size());
  m.r_ohm /= n;
  m.r_contact /= n;
  m.r_ct0 /= n;
  m.r_w /= n;
  m.c_rc /= n;
  m.q_ah /= n;
  m.e_act /= n;
  return m;
}

ModuleConfig uniform_module(const CellParams &cell, std::size_t n, const ModuleConfig &like) {
  ModuleConfig m = like;
  m.cells.assign(n, cell);
  m.contact_convention = ContactConvention::per_branch;
  return m;
}

} // namespace parapack

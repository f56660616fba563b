#pragma once

#include "parapack/model.hpp"

#include <array>
#include <string_view>
#include <vector>

namespace parapack {

// Fitted parameters of the 4P prismatic LFP test module (280 Ah cells).
std::vector<CellParams> reference_cells();
ThermalParams reference_thermal();

// Measured parasitic/added resistance per branch for each bench
// configuration [ohm].
enum class BenchConfig { baseline, single_failure, interconnect_failure };

std::array<double, 4> bench_resistances(BenchConfig which);
std::string_view to_string(BenchConfig which);
BenchConfig bench_config_from_string(std::string_view name);

// 4-cell module with reference parameters, synthetic LFP OCV and 22.2 C
// ambient, before any bench resistances are applied.
ModuleConfig reference_module();

// Reference module with the bench resistances of `which` applied.
// Baseline and single failure add each value to its own branch. The
// interconnect-failure resistors sit on the DC bus between neighbouring
// cells, so they accumulate along the ladder.
ModuleConfig bench_module(BenchConfig which);

// Cell whose every parameter is the arithmetic mean over `cells`.
CellParams mean_cell(const std::vector<CellParams> &cells);

// N identical mean cells sharing the reference thermal block and OCV.
ModuleConfig uniform_module(const CellParams &cell, std::size_t n, const ModuleConfig &like);

} // namespace parapack

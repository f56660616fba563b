#pragma once

#include "parapack/csv.hpp"
#include "parapack/simulate.hpp"

#include <string>
#include <vector>

namespace parapack {

enum class ChartKind { currents_vs_time, temps_vs_time, sobol_indices, threshold_curves };
std::string to_string(ChartKind kind);
ChartKind chart_kind_from_string(const std::string &name);

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y; // NaN breaks the line
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  double width = 800;
  double height = 480;
};

// Standalone SVG line chart with axes, ticks and a legend. Each series is
// one <polyline> per unbroken run. Throws DomainError when there is no
// finite point to draw.
std::string render_svg(const Chart &chart);

Chart currents_chart(const SimResult &result);
Chart temps_chart(const SimResult &result); // core and tab per cell
// Family-summed first-order and total-effect indices from a Sobol CSV.
Chart sobol_chart(const csv::Table &sobol_csv);
// One line per parameter family from a threshold CSV; unbounded points
// are left out.
Chart threshold_chart(const csv::Table &threshold_csv, const std::string &axis_label);

// Builds the chart for `kind` from a result file. Throws ParseError when
// the file does not match the kind, DomainError when it holds no data.
Chart chart_from_file(ChartKind kind, const std::filesystem::path &path);

} // namespace parapack

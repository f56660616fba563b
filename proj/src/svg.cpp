#include "parapack/svg.hpp"

#include "parapack/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace parapack {

std::string to_string(ChartKind kind) {
  switch (kind) {
  case ChartKind::currents_vs_time: return "currents_vs_time";
  case ChartKind::temps_vs_time: return "temps_vs_time";
  case ChartKind::sobol_indices: return "sobol_indices";
  case ChartKind::threshold_curves: return "threshold_curves";
  }
  return "?";
}

ChartKind chart_kind_from_string(const std::string &name) {
  for (auto k : {ChartKind::currents_vs_time, ChartKind::temps_vs_time, ChartKind::sobol_indices,
                 ChartKind::threshold_curves})
    if (to_string(k) == name)
      return k;
  throw DomainError("unknown chart kind '" + name + "'");
}

namespace {

constexpr const char *kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string escape(const std::string &s) {
  std::string out;
  for (char c : s) {
    switch (c) {
    case '&': out += "&amp;"; break;
    case '<': out += "&lt;"; break;
    case '>': out += "&gt;"; break;
    case '"': out += "&quot;"; break;
    default: out += c;
    }
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v, double step) {
  char buf[32];
  const int digits = std::max(0, -static_cast<int>(std::floor(std::log10(step) + 1e-9)));
  std::snprintf(buf, sizeof buf, "%.*f", std::min(digits, 6), std::abs(v) < 1e-12 * step ? 0.0 : v);
  return buf;
}

// Round step of roughly (hi - lo) / target in 1-2-5 steps.
double nice_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double f = raw / mag;
  return (f < 1.5 ? 1.0 : f < 3.0 ? 2.0 : f < 7.0 ? 5.0 : 10.0) * mag;
}

struct Axis {
  double lo, hi, step;
};

Axis make_axis(double lo, double hi) {
  if (hi - lo <= 0.0) {
    const double pad = std::max(1.0, std::abs(lo) * 0.05);
    lo -= pad;
    hi += pad;
  }
  const double step = nice_step(hi - lo, 6);
  return {std::floor(lo / step) * step, std::ceil(hi / step) * step, step};
}

std::vector<double> column(const csv::Table &t, const std::string &name) {
  const auto c = t.column(name);
  if (!c)
    throw ParseError("missing column '" + name + "'");
  std::vector<double> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    out.push_back(csv::to_number(t.rows[i][*c], "line " + std::to_string(t.line_numbers[i]))
                      .value_or(std::numeric_limits<double>::quiet_NaN()));
  return out;
}

} // namespace

std::string render_svg(const Chart &chart) {
  double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
  double y_lo = x_lo, y_hi = -x_lo;
  for (const auto &s : chart.series)
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i)
      if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) {
        x_lo = std::min(x_lo, s.x[i]), x_hi = std::max(x_hi, s.x[i]);
        y_lo = std::min(y_lo, s.y[i]), y_hi = std::max(y_hi, s.y[i]);
      }
  if (!std::isfinite(x_lo))
    throw DomainError("chart '" + chart.title + "' has no data to draw");
  const Axis ax = make_axis(x_lo, x_hi), ay = make_axis(y_lo, y_hi);

  const double left = 80, right = 170, top = 40, bottom = 60;
  const double pw = chart.width - left - right, ph = chart.height - top - bottom;
  auto px = [&](double x) { return left + (x - ax.lo) / (ax.hi - ax.lo) * pw; };
  auto py = [&](double y) { return top + ph - (y - ay.lo) / (ay.hi - ay.lo) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(chart.width) << "\" height=\""
    << fmt(chart.height) << "\" viewBox=\"0 0 " << fmt(chart.width) << ' ' << fmt(chart.height)
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text class=\"title\" x=\"" << fmt(left + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
    << escape(chart.title) << "</text>\n";

  o << "<g class=\"axes\" stroke=\"#333\" fill=\"none\">\n";
  o << "<rect x=\"" << fmt(left) << "\" y=\"" << fmt(top) << "\" width=\"" << fmt(pw) << "\" height=\""
    << fmt(ph) << "\"/>\n</g>\n";
  o << "<g class=\"ticks\">\n";
  for (double v = ax.lo; v <= ax.hi + 0.5 * ax.step; v += ax.step) {
    const double x = px(v);
    o << "<line x1=\"" << fmt(x) << "\" y1=\"" << fmt(top + ph) << "\" x2=\"" << fmt(x) << "\" y2=\""
      << fmt(top + ph + 5) << "\" stroke=\"#333\"/>";
    o << "<line x1=\"" << fmt(x) << "\" y1=\"" << fmt(top) << "\" x2=\"" << fmt(x) << "\" y2=\""
      << fmt(top + ph) << "\" stroke=\"#eee\"/>";
    o << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(top + ph + 18) << "\" text-anchor=\"middle\">"
      << tick_label(v, ax.step) << "</text>\n";
  }
  for (double v = ay.lo; v <= ay.hi + 0.5 * ay.step; v += ay.step) {
    const double y = py(v);
    o << "<line x1=\"" << fmt(left - 5) << "\" y1=\"" << fmt(y) << "\" x2=\"" << fmt(left) << "\" y2=\""
      << fmt(y) << "\" stroke=\"#333\"/>";
    o << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(y) << "\" x2=\"" << fmt(left + pw) << "\" y2=\""
      << fmt(y) << "\" stroke=\"#eee\"/>";
    o << "<text x=\"" << fmt(left - 8) << "\" y=\"" << fmt(y + 4) << "\" text-anchor=\"end\">"
      << tick_label(v, ay.step) << "</text>\n";
  }
  o << "</g>\n";
  o << "<text class=\"x-label\" x=\"" << fmt(left + pw / 2) << "\" y=\"" << fmt(chart.height - 15)
    << "\" text-anchor=\"middle\">" << escape(chart.x_label) << "</text>\n";
  o << "<text class=\"y-label\" x=\"20\" y=\"" << fmt(top + ph / 2)
    << "\" text-anchor=\"middle\" transform=\"rotate(-90 20 " << fmt(top + ph / 2) << ")\">"
    << escape(chart.y_label) << "</text>\n";

  for (std::size_t s = 0; s < chart.series.size(); ++s) {
    const auto &ser = chart.series[s];
    const char *color = kPalette[s % std::size(kPalette)];
    o << "<g class=\"series\" data-label=\"" << escape(ser.label) << "\" stroke=\"" << color
      << "\" fill=\"none\" stroke-width=\"1.5\">\n";
    std::string pts;
    auto flush = [&] {
      if (!pts.empty())
        o << "<polyline points=\"" << pts << "\"/>\n";
      pts.clear();
    };
    for (std::size_t i = 0; i < ser.x.size() && i < ser.y.size(); ++i) {
      if (!std::isfinite(ser.x[i]) || !std::isfinite(ser.y[i])) {
        flush();
        continue;
      }
      if (!pts.empty())
        pts += ' ';
      pts += fmt(px(ser.x[i])) + ',' + fmt(py(ser.y[i]));
    }
    flush();
    o << "</g>\n";
  }

  o << "<g class=\"legend\">\n";
  for (std::size_t s = 0; s < chart.series.size(); ++s) {
    const double y = top + 10 + 18 * static_cast<double>(s);
    const double x = left + pw + 15;
    o << "<line x1=\"" << fmt(x) << "\" y1=\"" << fmt(y) << "\" x2=\"" << fmt(x + 20) << "\" y2=\""
      << fmt(y) << "\" stroke=\"" << kPalette[s % std::size(kPalette)] << "\" stroke-width=\"2\"/>";
    o << "<text x=\"" << fmt(x + 26) << "\" y=\"" << fmt(y + 4) << "\">" << escape(chart.series[s].label)
      << "</text>\n";
  }
  o << "</g>\n</svg>\n";
  return o.str();
}

Chart currents_chart(const SimResult &r) {
  Chart c{"Branch currents", "time [s]", "current [A]", {}};
  for (std::size_t k = 0; k < r.n_cells; ++k) {
    Series s{"cell " + std::to_string(k + 1), r.time, {}};
    for (std::size_t i = 0; i < r.size(); ++i)
      s.y.push_back(r.at(r.current, i, k));
    c.series.push_back(std::move(s));
  }
  return c;
}

Chart temps_chart(const SimResult &r) {
  Chart c{"Cell temperatures", "time [s]", "temperature [C]", {}};
  for (const auto *which : {&r.core_temp_c, &r.tab_temp_c}) {
    const std::string kind = which == &r.core_temp_c ? "core" : "tab";
    for (std::size_t k = 0; k < r.n_cells; ++k) {
      Series s{kind + " " + std::to_string(k + 1), r.time, {}};
      for (std::size_t i = 0; i < r.size(); ++i)
        s.y.push_back(r.at(*which, i, k));
      c.series.push_back(std::move(s));
    }
  }
  return c;
}

Chart sobol_chart(const csv::Table &t) {
  Chart c{"Sobol indices of the core-temperature spread", "fraction of nominal discharge",
          "index", {}};
  const auto x = column(t, "fraction");
  for (const char *kind : {"s1", "st"})
    for (const char *fam : {"r_contact", "r_ohm", "q_cap"}) {
      const std::string name = std::string(kind) + "_" + fam;
      c.series.push_back({name, x, column(t, name)});
    }
  return c;
}

Chart threshold_chart(const csv::Table &t, const std::string &axis_label) {
  Chart c{"Safety thresholds", axis_label, "threshold [%]", {}};
  const auto x = column(t, "axis_value");
  const auto y = column(t, "threshold_pct");
  const auto pc = t.column("param");
  if (!pc)
    throw ParseError("missing column 'param'");
  std::vector<std::string> order;
  for (const auto &row : t.rows)
    if (std::find(order.begin(), order.end(), row[*pc]) == order.end())
      order.push_back(row[*pc]);
  for (const auto &name : order) {
    Series s{name, {}, {}};
    for (std::size_t i = 0; i < t.rows.size(); ++i)
      if (t.rows[i][*pc] == name && std::isfinite(y[i]))
        s.x.push_back(x[i]), s.y.push_back(y[i]);
    c.series.push_back(std::move(s));
  }
  return c;
}

Chart chart_from_file(ChartKind kind, const std::filesystem::path &path) {
  const auto table = csv::read(path);
  if (table.rows.empty())
    throw DomainError(path.string() + ": no data rows");
  switch (kind) {
  case ChartKind::currents_vs_time: return currents_chart(read_csv(table));
  case ChartKind::temps_vs_time: return temps_chart(read_csv(table));
  case ChartKind::sobol_indices: return sobol_chart(table);
  case ChartKind::threshold_curves: return threshold_chart(table, "axis value");
  }
  throw DomainError("unknown chart kind");
}

} // namespace parapack

#include "parapack/ocv.hpp"

#include "parapack/csv.hpp"
#include "parapack/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

namespace parapack {

OcvTable::OcvTable(std::vector<double> soc, std::vector<double> voltage)
    : soc_(std::move(soc)), voltage_(std::move(voltage)) {
  if (soc_.size() != voltage_.size())
    throw DomainError("ocv table: soc and voltage columns differ in length");
  if (soc_.size() < 2)
    throw DomainError("ocv table: at least 2 knots required");
  for (std::size_t i = 0; i < soc_.size(); ++i) {
    if (!std::isfinite(soc_[i]) || soc_[i] < 0.0 || soc_[i] > 1.0)
      throw DomainError("ocv table: soc " + std::to_string(soc_[i]) + " outside [0, 1]");
    if (!std::isfinite(voltage_[i]) || voltage_[i] <= 0.0)
      throw DomainError("ocv table: voltage must be finite and positive");
    if (i > 0 && !(soc_[i] > soc_[i - 1])) {
      throw DomainError(soc_[i] == soc_[i - 1]
                            ? "ocv table: duplicate soc knot " + std::to_string(soc_[i])
                            : "ocv table: soc column not increasing");
    }
  }
  if (soc_.front() != 0.0 || soc_.back() != 1.0)
    throw DomainError("ocv table: knots must span soc 0 to 1");

  monotone_ = std::is_sorted(voltage_.begin(), voltage_.end());

  const double spacing = 1.0 / static_cast<double>(soc_.size() - 1);
  uniform_ = true;
  for (std::size_t i = 0; i < soc_.size() && uniform_; ++i)
    uniform_ = std::abs(soc_[i] - static_cast<double>(i) * spacing) < 1e-12;
  inv_spacing_ = static_cast<double>(soc_.size() - 1);
}

double OcvTable::eval(double z) const noexcept {
  if (!(z > 0.0))
    return voltage_.front();
  if (z >= 1.0)
    return voltage_.back();

  std::size_t hi;
  if (uniform_) {
    hi = static_cast<std::size_t>(z * inv_spacing_) + 1;
    hi = std::min(hi, soc_.size() - 1);
    // guard against rounding in the index computation
    while (hi > 1 && soc_[hi - 1] > z)
      --hi;
    while (hi < soc_.size() - 1 && soc_[hi] < z)
      ++hi;
  } else {
    hi = static_cast<std::size_t>(std::upper_bound(soc_.begin(), soc_.end(), z) - soc_.begin());
    hi = std::clamp<std::size_t>(hi, 1, soc_.size() - 1);
  }
  const std::size_t lo = hi - 1;
  const double w = (z - soc_[lo]) / (soc_[hi] - soc_[lo]);
  return voltage_[lo] + w * (voltage_[hi] - voltage_[lo]);
}

OcvTable load_ocv_csv(const std::filesystem::path &path) {
  const auto table = csv::read(path);
  if (table.header.size() != 2)
    throw ParseError(path.string() + ": expected two columns soc,voltage_v");
  std::vector<double> soc, volt;
  soc.reserve(table.rows.size());
  volt.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const std::string where = path.string() + ":" + std::to_string(table.line_numbers[r]);
    const auto z = csv::to_number(table.rows[r][0], where);
    const auto v = csv::to_number(table.rows[r][1], where);
    if (!z || !v)
      throw ParseError(where + ": empty cell");
    soc.push_back(*z);
    volt.push_back(*v);
  }
  return OcvTable(std::move(soc), std::move(volt));
}

void save_ocv_csv(const OcvTable &table, const std::filesystem::path &path) {
  std::ofstream out(path);
  if (!out)
    throw Error("cannot write " + path.string());
  out << "soc,voltage_v\n";
  for (std::size_t i = 0; i < table.size(); ++i)
    out << csv::format(table.soc()[i]) << ',' << csv::format(table.voltage()[i]) << '\n';
}

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// exp(-x/tau) rescaled so decay(0) = 1 and decay(1) = 0
double decay(double x, double tau) {
  const double tail = std::exp(-1.0 / tau);
  return (std::exp(-x / tau) - tail) / (1.0 - tail);
}

} // namespace

OcvTable synthetic_lfp(const SyntheticLfpOptions &o) {
  if (o.n_knots < 2)
    throw DomainError("synthetic_lfp: n_knots must be at least 2");
  if (o.bump_amplitude < 0.0 || o.knee_drop < 0.0 || o.plateau_slope < 0.0)
    throw DomainError("synthetic_lfp: negative bump, knee or slope breaks monotonicity");
  if (o.bump_width <= 0.0 || o.knee_width <= 0.0 || o.tail_tau <= 0.0 || o.top_tau <= 0.0)
    throw DomainError("synthetic_lfp: widths and time scales must be positive");

  const auto plateau = [&](double z) {
    const double bumps =
        logistic((z - 0.4) / o.bump_width) + logistic((z - 0.7) / o.bump_width) - 1.5;
    const double knee = 1.0 - logistic((z - o.knee_soc) / o.knee_width);
    return o.plateau_v + o.plateau_slope * (z - 0.5) + o.bump_amplitude * bumps -
           o.knee_drop * knee;
  };
  const double p0 = plateau(0.0);
  const double p1 = plateau(1.0);
  if (!(p0 > o.v_min) || !(p1 < o.v_max))
    throw DomainError("synthetic_lfp: plateau leaves the [v_min, v_max] band; "
                      "bump amplitude or knee too large for a monotone curve");

  std::vector<double> soc(o.n_knots), volt(o.n_knots);
  const double step = 1.0 / static_cast<double>(o.n_knots - 1);
  for (std::size_t i = 0; i < o.n_knots; ++i) {
    const double z = i + 1 == o.n_knots ? 1.0 : static_cast<double>(i) * step;
    soc[i] = z;
    volt[i] = plateau(z) - (p0 - o.v_min) * decay(z, o.tail_tau) +
              (o.v_max - p1) * decay(1.0 - z, o.top_tau);
  }
  volt.front() = o.v_min;
  volt.back() = o.v_max;
  return OcvTable(std::move(soc), std::move(volt));
}

} // namespace parapack

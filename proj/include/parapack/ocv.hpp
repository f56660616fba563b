#pragma once

#include <filesystem>
#include <span>
#include <vector>

namespace parapack {

// Open-circuit voltage as a function of state of charge, stored as a
// piecewise-linear look-up table over [0, 1]. Immutable once built.
class OcvTable {
public:
  // Validates and takes ownership of the knots. Throws DomainError when the
  // soc column is not strictly increasing, does not span exactly [0, 1], or
  // a voltage is non-finite or non-positive.
  OcvTable(std::vector<double> soc, std::vector<double> voltage);

  // Linear interpolation; z outside [0, 1] is clamped to the end knots.
  double eval(double z) const noexcept;

  std::size_t size() const noexcept { return soc_.size(); }
  std::span<const double> soc() const noexcept { return soc_; }
  std::span<const double> voltage() const noexcept { return voltage_; }

  // True when voltage is non-decreasing in soc.
  bool monotone() const noexcept { return monotone_; }

private:
  std::vector<double> soc_;
  std::vector<double> voltage_;
  bool monotone_ = false;
  bool uniform_ = false; // knots equally spaced: O(1) segment lookup
  double inv_spacing_ = 0.0;
};

// Reads a `soc,voltage_v` CSV with a header row. Accepts LF or CRLF.
// Throws ParseError on malformed rows and DomainError on invalid knots.
OcvTable load_ocv_csv(const std::filesystem::path &path);

void save_ocv_csv(const OcvTable &table, const std::filesystem::path &path);

// Shape controls for the packaged LFP curve. The curve is
//
//   plateau(z) = plateau_v + plateau_slope * (z - 0.5)
//              + bump_amplitude * (s((z-0.4)/bump_width) + s((z-0.7)/bump_width) - 1.5)
//              - knee_drop * (1 - s((z - knee_soc)/knee_width))
//   f(z) = plateau(z) - (plateau(0) - v_min) * E(z; tail_tau)
//                     + (v_max - plateau(1)) * E(1 - z; top_tau)
//
// with s the logistic function and E(x; tau) an exponential decay
// normalised so E(0) = 1 and E(1) = 0. Every term is non-decreasing in z,
// so the curve is monotone whenever the amplitudes are non-negative and
// v_min < plateau(0), plateau(1) < v_max. The endpoints are exact.
struct SyntheticLfpOptions {
  std::size_t n_knots = 520;
  double plateau_v = 3.3;
  double bump_amplitude = 0.06;
  double plateau_slope = 0.1;
  double bump_width = 0.01;
  double knee_drop = 0.29;
  double knee_soc = 0.032;
  double knee_width = 0.003;
  double tail_tau = 0.053;
  double top_tau = 0.01;
  double v_min = 2.5;
  double v_max = 3.65;
};

// Uniformly spaced synthetic LFP curve. Throws DomainError for
// n_knots < 2 or shape parameters that would break monotonicity.
OcvTable synthetic_lfp(const SyntheticLfpOptions &options = {});

} // namespace parapack

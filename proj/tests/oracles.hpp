#pragma once

// Reference computations used as independent checks. They share no code
// with the library beyond the data types.

#include "parapack/model.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <vector>

namespace oracle {

// Branch currents from the full (N+1)x(N+1) Kirchhoff system
//   i_k R_k + V = f(z_k) - v_rc,k   (every branch)
//   sum_k i_k  = I
// solved densely with column-pivoting QR. The last entry is V.
inline std::vector<double> kirchhoff(const parapack::ModuleConfig &m, const parapack::SimState &s,
                                     double total) {
  const int n = static_cast<int>(m.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n + 1, n + 1);
  Eigen::VectorXd b(n + 1);
  for (int k = 0; k < n; ++k) {
    a(k, k) = m.cells[k].r_ohm + m.cells[k].r_contact;
    a(k, n) = 1.0;
    b(k) = m.ocv->eval(s.z[k]) - s.v_rc[k];
    a(n, k) = 1.0;
  }
  b(n) = total;
  const Eigen::VectorXd x = a.colPivHouseholderQr().solve(b);
  return {x.data(), x.data() + n + 1};
}

// Closed-form Ishigami indices for x_i ~ U(-pi, pi).
struct Ishigami {
  double s1[3];
  double st[3];
};

inline Ishigami ishigami(double a, double b) {
  const double pi = std::numbers::pi;
  const double d1 = b * std::pow(pi, 4) / 5.0;
  const double v1 = 0.5 * (1 + d1) * (1 + d1);
  const double v2 = a * a / 8.0;
  // Var of b x3^4 sin x1 minus its x1-only part
  const double ex8 = std::pow(pi, 8) / 9.0, ex4 = std::pow(pi, 4) / 5.0;
  const double v13 = 0.5 * b * b * (ex8 - ex4 * ex4);
  const double v = v1 + v2 + v13;
  return {{v1 / v, v2 / v, 0.0}, {(v1 + v13) / v, v2 / v, v13 / v}};
}

} // namespace oracle

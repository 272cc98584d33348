#pragma once

// Sufficient hyperbolicity constraints for the four-coefficient gradient
// closure, in the a-form (last row of the coefficient matrix) and the
// equivalent N-form (closure coefficients N_{N-3}..N_N).
//
// Near the edge of the admissible set the upper bound on N_{N-1} grows like
// (N_{N-3} - lower bound)^-2, so margins are evaluated in quad precision from
// the double inputs; the verdict is then a statement about the values the
// solver actually uses.

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cmath>
#include <limits>

namespace mlclosure {

using Extended = boost::multiprecision::cpp_bin_float_quad;

/// Lower bound on a_{N-3}: -(N-1)(N-2) / (N(2N-3)).
template <class Real = double>
Real a_lower_bound(int n) {
  const Real nn = n;
  return -(nn - 1) * (nn - 2) / (nn * (2 * nn - 3));
}

/// Lower bound on N_{N-3}: -(N-2)(N-1)(2N+1) / (N(2N-3)(N+1)).
template <class Real = double>
Real coeff_lower_bound(int n) {
  const Real nn = n;
  return -(nn - 2) * (nn - 1) * (2 * nn + 1) / (nn * (2 * nn - 3) * (nn + 1));
}

/// Numerator g(a_{N-3}, a_{N-2}, a_N; N) of the bound on a_{N-1}.
template <class Real>
Real g_poly(const Real& a3, const Real& a2, const Real& a0, int n) {
  const Real nn = n;
  const Real t = a2 * nn - a0 * (nn - 1);
  return a3 * a3 * a3 * (nn - 1) * nn * nn * (3 - 2 * nn) * (3 - 2 * nn) +
         a2 * (2 * nn - 1) * (nn - 2) * (nn - 2) * (nn - 2) * t +
         a3 * (nn - 2) * (nn - 2) *
             (a0 * (4 * nn * nn - 8 * nn + 3) * t + (nn - 1) * (nn - 1) * (nn - 1)) +
         2 * a3 * a3 * (nn - 1) * (nn - 1) * nn * (2 * nn - 3) * (nn - 2);
}

/// Denominator (N-2)(a_{N-3}(2N-3)N + (N-1)(N-2))^2 of the bound on a_{N-1}.
template <class Real>
Real g_denominator(const Real& a3, int n) {
  const Real nn = n;
  const Real s = a3 * (2 * nn - 3) * nn + (nn - 1) * (nn - 2);
  return (nn - 2) * s * s;
}

/// Numerator h(N_{N-3}, N_{N-2}, N_N; N) of the bound on N_{N-1}.
template <class Real>
Real h_poly(const Real& n3, const Real& n2, const Real& n0, int n) {
  const Real nn = n;
  const Real q = -2 * nn * nn + nn + 3;
  const Real t = n2 * nn - n0 * (nn - 1);
  return n3 * n3 * n3 * (nn - 1) * nn * nn * q * q +
         n2 * (nn + 1) * (2 * nn - 1) * (2 * nn + 1) * (nn - 2) * (nn - 2) * (nn - 2) * t +
         n3 * (nn - 2) * (nn - 2) *
             (n0 * (nn + 1) * (nn + 1) * (4 * nn * nn - 8 * nn + 3) * t +
              (2 * nn + 1) * (2 * nn + 1) * (nn - 1) * (nn - 1) * (nn - 1)) +
         2 * n3 * n3 * (nn - 1) * (nn - 1) * nn * (nn + 1) * (2 * nn - 3) * (2 * nn + 1) * (nn - 2);
}

/// Denominator (N-2)(N_{N-3}(N+1)(2N-3)N + (N-2)(N-1)(2N+1))^2.
template <class Real>
Real h_denominator(const Real& n3, int n) {
  const Real nn = n;
  const Real s = n3 * (nn + 1) * (2 * nn - 3) * nn + (nn - 2) * (nn - 1) * (2 * nn + 1);
  return (nn - 2) * s * s;
}

/// Gradients of h with respect to (N_{N-3}, N_{N-2}, N_N).
template <class Real>
void h_gradient(const Real& n3, const Real& n2, const Real& n0, int n, Real& d3, Real& d2,
                Real& d0) {
  const Real nn = n;
  const Real q = -2 * nn * nn + nn + 3;
  const Real c1 = (nn - 1) * nn * nn * q * q;
  const Real c2 = (nn + 1) * (2 * nn - 1) * (2 * nn + 1) * (nn - 2) * (nn - 2) * (nn - 2);
  const Real c3 = (nn - 2) * (nn - 2);
  const Real c4 = (nn + 1) * (nn + 1) * (4 * nn * nn - 8 * nn + 3);
  const Real c5 = (2 * nn + 1) * (2 * nn + 1) * (nn - 1) * (nn - 1) * (nn - 1);
  const Real c6 = 2 * (nn - 1) * (nn - 1) * nn * (nn + 1) * (2 * nn - 3) * (2 * nn + 1) * (nn - 2);
  const Real t = n2 * nn - n0 * (nn - 1);
  d3 = 3 * c1 * n3 * n3 + c3 * (c4 * n0 * t + c5) + 2 * c6 * n3;
  d2 = c2 * (2 * nn * n2 - (nn - 1) * n0) + n3 * c3 * c4 * n0 * nn;
  d0 = -c2 * (nn - 1) * n2 + n3 * c3 * c4 * (nn * n2 - 2 * (nn - 1) * n0);
}

/// Outcome of one of the two explicit constraint tests. Margins are signed:
/// both positive means the strict inequalities hold.
struct ConstraintVerdict {
  bool satisfied = false;
  double first_margin = 0.0;   // lower-bound inequality on the N-3 entry
  double second_margin = 0.0;  // bound on the N-1 entry; -inf if undefined
};

namespace detail {

inline ConstraintVerdict finish_verdict(const Extended& m1, const Extended& m2, bool second_defined) {
  ConstraintVerdict v;
  v.first_margin = static_cast<double>(m1);
  v.second_margin = second_defined ? static_cast<double>(m2)
                                   : -std::numeric_limits<double>::infinity();
  v.satisfied = m1 > 0 && second_defined && m2 > 0;
  return v;
}

}  // namespace detail

/// a-form: a_{N-3} > -(N-1)(N-2)/(N(2N-3)) and a_{N-1} > g / ((N-2)(...)^2).
inline ConstraintVerdict constraint_check_g(double a3, double a2, double a1, double a0, int n) {
  const Extended e3 = a3, e2 = a2, e1 = a1, e0 = a0;
  const Extended m1 = e3 - a_lower_bound<Extended>(n);
  const Extended den = g_denominator(e3, n);
  if (!(den > 0)) return detail::finish_verdict(m1, Extended(0), false);
  return detail::finish_verdict(m1, e1 - g_poly(e3, e2, e0, n) / den, true);
}

/// N-form: N_{N-3} above its lower bound and N_{N-1} > -N/(N+1) + h / (...).
inline ConstraintVerdict constraint_check_h(double n3, double n2, double n1, double n0, int n) {
  const Extended e3 = n3, e2 = n2, e1 = n1, e0 = n0;
  const Extended m1 = e3 - coeff_lower_bound<Extended>(n);
  const Extended den = h_denominator(e3, n);
  if (!(den > 0)) return detail::finish_verdict(m1, Extended(0), false);
  const Extended nn = n;
  return detail::finish_verdict(m1, e1 + nn / (nn + 1) - h_poly(e3, e2, e0, n) / den, true);
}

}  // namespace mlclosure

#pragma once

// Gradient closures  d/dx m_{N+1} = sum_{i=N-3}^{N} N_i(m) d/dx m_i  and the
// coefficient matrix of the closed moment system.

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "mlclosure/constraints.hpp"
#include "mlclosure/errors.hpp"

namespace mlclosure {

/// Closure coefficients N_{N-3}, N_{N-2}, N_{N-1}, N_N.
/// dof is the number of coefficients the closure may use (2, 3 or 4); the
/// unused leading slots are stored as zeros.
struct ClosureCoefficients {
  int n_order = 0;
  int dof = 4;
  std::array<double, 4> values{};

  double& n3() { return values[0]; }
  double& n2() { return values[1]; }
  double& n1() { return values[2]; }
  double& n0() { return values[3]; }
  double n3() const { return values[0]; }
  double n2() const { return values[1]; }
  double n1() const { return values[2]; }
  double n0() const { return values[3]; }
};

struct CoefficientMatrix {
  int n_order = 0;
  Eigen::MatrixXd entries;
};

/// Last row a_0..a_N of the coefficient matrix:
/// a_j = (N+1)/(2N+1) N_j, plus N/(2N+1) on j = N-1.
inline Eigen::VectorXd closure_row(const ClosureCoefficients& c) {
  const int n = c.n_order;
  if (n < 1) throw DomainError("closure_row: order must be >= 1");
  Eigen::VectorXd a = Eigen::VectorXd::Zero(n + 1);
  const double scale = (n + 1.0) / (2.0 * n + 1.0);
  for (int s = 0; s < 4; ++s) {
    const int j = n - 3 + s;
    if (j < 0) {
      if (c.values[s] != 0.0)
        throw DomainError("closure_row: coefficient below index 0 must vanish");
      continue;
    }
    a[j] = scale * c.values[s];
  }
  a[n - 1] += n / (2.0 * n + 1.0);
  return a;
}

/// Fixed tridiagonal rows 0..N-1 (row i: i/(2i+1) left, (i+1)/(2i+1) right)
/// and closure_row(c) as row N.
inline CoefficientMatrix assemble_matrix(const ClosureCoefficients& c) {
  const int n = c.n_order;
  CoefficientMatrix m{n, Eigen::MatrixXd::Zero(n + 1, n + 1)};
  for (int i = 0; i < n; ++i) {
    if (i > 0) m.entries(i, i - 1) = i / (2.0 * i + 1.0);
    m.entries(i, i + 1) = (i + 1.0) / (2.0 * i + 1.0);
  }
  m.entries.row(n) = closure_row(c).transpose();
  return m;
}

/// The P_N closure: every coefficient zero.
inline ClosureCoefficients pn_closure(int n_order, int dof = 4) {
  return ClosureCoefficients{n_order, dof, {0.0, 0.0, 0.0, 0.0}};
}

/// sum_i N_i d/dx m_i over the four slots (N-3..N).
inline double evaluate_closure_gradient(const ClosureCoefficients& c,
                                        const std::array<double, 4>& gradients) {
  double s = 0.0;
  for (int i = 0; i < 4; ++i) s += c.values[i] * gradients[i];
  return s;
}

enum class SigmaFn { softplus, exp, square };

inline constexpr double kSquareFloor = 1e-6;

inline std::string to_string(SigmaFn f) {
  switch (f) {
    case SigmaFn::softplus: return "softplus";
    case SigmaFn::exp: return "exp";
    case SigmaFn::square: return "square";
  }
  return "softplus";
}

inline SigmaFn sigma_fn_from_string(const std::string& s) {
  if (s == "softplus") return SigmaFn::softplus;
  if (s == "exp") return SigmaFn::exp;
  if (s == "square") return SigmaFn::square;
  throw DomainError("unknown positive map '" + s + "'");
}

/// Strictly positive map used to push coefficients inside the constraints.
inline double sigma_value(SigmaFn f, double x) {
  switch (f) {
    case SigmaFn::softplus: return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    case SigmaFn::exp: return std::exp(x);
    case SigmaFn::square: return x * x + kSquareFloor;
  }
  return 0.0;
}

inline double sigma_derivative(SigmaFn f, double x) {
  switch (f) {
    case SigmaFn::softplus: return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    case SigmaFn::exp: return std::exp(x);
    case SigmaFn::square: return 2.0 * x;
  }
  return 0.0;
}

/// Raw network outputs M_1..M_4 mapped onto constraint-satisfying
/// coefficients, with the Jacobian d(N_{N-3},N_{N-2},N_{N-1},N_N)/d(M_1..M_4).
struct PostprocessResult {
  ClosureCoefficients coeffs;
  Eigen::Matrix4d jacobian;  // row: coefficient slot, column: M index
};

namespace detail {

inline bool row_satisfies_constraints(const ClosureCoefficients& c) {
  const int n = c.n_order;
  const Eigen::VectorXd a = closure_row(c);
  return constraint_check_h(c.n3(), c.n2(), c.n1(), c.n0(), n).satisfied &&
         constraint_check_g(a[n - 3], a[n - 2], a[n - 1], a[n], n).satisfied;
}

}  // namespace detail

///   N_N = M_4,  N_{N-2} = M_2,  N_{N-3} = sigma(M_3) - lower bound,
///   N_{N-1} = sigma(M_1) - N/(N+1) + h / ((N-2)(...)^2).
/// dof = 3 fixes N_{N-3} = 0, dof = 2 also N_{N-2} = 0. After rounding,
/// N_{N-1} (and N_{N-3} if needed) is nudged upward until both constraint
/// forms hold for the stored doubles.
inline PostprocessResult hyperbolic_postprocess_with_jacobian(const std::array<double, 4>& m,
                                                              int n, SigmaFn sigma = SigmaFn::softplus,
                                                              int dof = 4) {
  if (n < 3) throw DomainError("hyperbolic_postprocess: order must be >= 3");
  if (dof < 2 || dof > 4) throw DomainError("hyperbolic_postprocess: dof must be 2, 3 or 4");
  const double nn = n;
  PostprocessResult r;
  r.coeffs = ClosureCoefficients{n, dof, {}};
  r.jacobian.setZero();
  ClosureCoefficients& c = r.coeffs;

  const double s1 = sigma_value(sigma, m[0]);
  const double ds1 = sigma_derivative(sigma, m[0]);
  c.n0() = m[3];
  r.jacobian(3, 3) = 1.0;
  if (dof >= 3) {
    c.n2() = m[1];
    r.jacobian(1, 1) = 1.0;
  }
  double ds3 = 0.0;
  if (dof == 4) {
    c.n3() = sigma_value(sigma, m[2]) + coeff_lower_bound<double>(n);
    ds3 = sigma_derivative(sigma, m[2]);
    r.jacobian(0, 2) = ds3;
    if (!(c.n3() - coeff_lower_bound<double>(n) > 1e-12)) {
      const double row_scale = (nn + 1.0) / (2.0 * nn + 1.0);
      while (!(constraint_check_h(c.n3(), 0.0, 0.0, 0.0, n).first_margin > 0.0 &&
               constraint_check_g(row_scale * c.n3(), 0.0, 0.0, 0.0, n).first_margin > 0.0))
        c.n3() = std::nextafter(c.n3(), std::numeric_limits<double>::infinity());
    }
  }
  const bool near_bound = dof == 4 && !(c.n3() - coeff_lower_bound<double>(n) > 1e-4);

  const double den = h_denominator(c.n3(), n);
  if (!(den > 1e-30)) throw BoundaryError("hyperbolic_postprocess: degenerate constraint denominator");
  const double h = h_poly(c.n3(), c.n2(), c.n0(), n);
  if (near_bound) {
    const Extended e3 = c.n3(), e2 = c.n2(), e0 = c.n0();
    c.n1() = static_cast<double>(Extended(s1) - Extended(nn) / (nn + 1) +
                                 h_poly(e3, e2, e0, n) / h_denominator(e3, n));
  } else {
    c.n1() = s1 - nn / (nn + 1.0) + h / den;
  }

  double dh3 = 0.0, dh2 = 0.0, dh0 = 0.0;
  h_gradient(c.n3(), c.n2(), c.n0(), n, dh3, dh2, dh0);
  const double s = c.n3() * (nn + 1) * (2 * nn - 3) * nn + (nn - 2) * (nn - 1) * (2 * nn + 1);
  const double dden3 = 2.0 * (nn - 2) * s * (nn + 1) * (2 * nn - 3) * nn;
  r.jacobian(2, 0) = ds1;
  if (dof >= 3) r.jacobian(2, 1) = dh2 / den;
  if (dof == 4) r.jacobian(2, 2) = (dh3 / den - h * dden3 / (den * den)) * ds3;
  r.jacobian(2, 3) = dh0 / den;

  // The double margin is conclusive when it clears the cancellation error and
  // N_{N-3} is far enough from its bound that rounding the row cannot move
  // the a-form bound by more than that.
  const double bound = -nn / (nn + 1.0) + h / den;
  const double scale = 1.0 + std::abs(bound) + std::abs(c.n1());
  if (!near_bound && c.n1() - bound > 1e-10 * scale) return r;
  // Near the N_{N-3} bound the two forms see differently rounded rows, so the
  // step grows geometrically from one ulp.
  double step = std::nextafter(c.n1(), std::numeric_limits<double>::infinity()) - c.n1();
  for (int guard = 0; !detail::row_satisfies_constraints(c); ++guard) {
    if (guard > 128)
      throw BoundaryError("hyperbolic_postprocess: rounding guard did not restore the constraints");
    c.n1() += step;
    step *= 2.0;
  }
  return r;
}

inline ClosureCoefficients hyperbolic_postprocess(const std::array<double, 4>& m, int n,
                                                  SigmaFn sigma = SigmaFn::softplus, int dof = 4) {
  return hyperbolic_postprocess_with_jacobian(m, n, sigma, dof).coeffs;
}

/// Unconstrained head: outputs used directly as (N_{N-1}, N_{N-2}, N_{N-3}, N_N).
inline ClosureCoefficients unconstrained_postprocess(const std::array<double, 4>& m, int n) {
  return ClosureCoefficients{n, 4, {m[2], m[1], m[0], m[3]}};
}

}  // namespace mlclosure

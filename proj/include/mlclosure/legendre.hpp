#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "mlclosure/errors.hpp"
#include "mlclosure/fields.hpp"

namespace mlclosure {

/// P_k(x) by the three-term recurrence (k+1) P_{k+1} = (2k+1) x P_k - k P_{k-1}.
inline double legendre_eval(int k, double x) {
  if (k == 0) return 1.0;
  double p_prev = 1.0;
  double p = x;
  for (int j = 1; j < k; ++j) {
    const double p_next = ((2.0 * j + 1.0) * x * p - j * p_prev) / (j + 1.0);
    p_prev = p;
    p = p_next;
  }
  return p;
}

/// Values P_0(x)..P_kmax(x) in one pass.
inline std::vector<double> legendre_all(int kmax, double x) {
  std::vector<double> p(kmax + 1);
  p[0] = 1.0;
  if (kmax >= 1) p[1] = x;
  for (int j = 1; j < kmax; ++j)
    p[j + 1] = ((2.0 * j + 1.0) * x * p[j] - j * p[j - 1]) / (j + 1.0);
  return p;
}

/// Derivative P_k'(x) for |x| < 1 via (1 - x^2) P_k' = k (P_{k-1} - x P_k).
inline double legendre_derivative(int k, double x) {
  if (k == 0) return 0.0;
  return k * (legendre_eval(k - 1, x) - x * legendre_eval(k, x)) / (1.0 - x * x);
}

struct Quadrature {
  std::vector<double> nodes;    // strictly increasing, in (-1, 1)
  std::vector<double> weights;  // positive, sum to 2

  int size() const { return static_cast<int>(nodes.size()); }
};

/// Gauss-Legendre rule with q points: Newton on P_q from Chebyshev guesses.
inline Quadrature gauss_legendre(int q) {
  if (q < 1) throw DomainError("gauss_legendre: q must be >= 1");
  Quadrature rule;
  rule.nodes.resize(q);
  rule.weights.resize(q);
  for (int i = 0; i < q; ++i) {
    // i-th largest root
    double v = std::cos(std::numbers::pi * (i + 0.75) / (q + 0.5));
    bool converged = false;
    for (int it = 0; it < 100; ++it) {
      const double dv = legendre_eval(q, v) / legendre_derivative(q, v);
      v -= dv;
      if (std::abs(dv) <= 1e-14) {
        converged = true;
        break;
      }
    }
    if (!converged)
      throw NumericalError("gauss_legendre: Newton did not converge for root " +
                           std::to_string(i) + " of P_" + std::to_string(q));
    const double dp = legendre_derivative(q, v);
    rule.nodes[q - 1 - i] = v;
    rule.weights[q - 1 - i] = 2.0 / ((1.0 - v * v) * dp * dp);
  }
  return rule;
}

/// Matrix T (Q x (n+1)) with T(q, k) = w_q P_k(v_q) / 2, so that the moments
/// of an nx x Q intensity are f * T.
inline Eigen::MatrixXd moment_projector(const Quadrature& quad, int n_order) {
  Eigen::MatrixXd t(quad.size(), n_order + 1);
  for (int q = 0; q < quad.size(); ++q) {
    const auto p = legendre_all(n_order, quad.nodes[q]);
    for (int k = 0; k <= n_order; ++k) t(q, k) = 0.5 * quad.weights[q] * p[k];
  }
  return t;
}

/// m_k(x_i) = 1/2 sum_q w_q f(x_i, v_q) P_k(v_q), k = 0..n_order.
inline MomentField moments_from_kinetic(const KineticField& f, const Quadrature& quad,
                                       int n_order) {
  if (f.values.cols() != quad.size() || f.values.rows() != f.grid.nx)
    throw DimensionError("moments_from_kinetic: field is " +
                         std::to_string(f.values.rows()) + "x" +
                         std::to_string(f.values.cols()) + ", expected " +
                         std::to_string(f.grid.nx) + "x" + std::to_string(quad.size()));
  if (n_order < 0) throw DimensionError("moments_from_kinetic: negative order");
  MomentField m{f.grid, (f.values * moment_projector(quad, n_order)).transpose(), f.time};
  return m;
}

}  // namespace mlclosure

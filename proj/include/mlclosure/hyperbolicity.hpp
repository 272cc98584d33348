#pragma once

// Block-diagonal symmetrizers A0 = diag(D, B) for the closed moment system,
// the SPD certificates for B, an eigenvalue oracle, and the structural
// stability check for the relaxation source.

#include <Eigen/Dense>
#include <boost/multiprecision/eigen.hpp>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "mlclosure/closure.hpp"
#include "mlclosure/constraints.hpp"
#include "mlclosure/errors.hpp"

namespace mlclosure {

using ExtendedMatrix = Eigen::Matrix<Extended, Eigen::Dynamic, Eigen::Dynamic>;

/// Pivot threshold for the SPD certificates on the unit-diagonal (equilibrated)
/// form of B. Relative to a unit diagonal, so it is a relative tolerance.
inline constexpr double kSpdTolerance = 1e-30;
inline constexpr double kSymmetryTolerance = 1e-10;

struct SpdCertificate {
  bool cholesky_ok = false;
  bool minors_ok = false;
  double min_pivot = 0.0;     // smallest Cholesky pivot of the equilibrated matrix
  double min_minor = 0.0;     // smallest leading principal minor, equilibrated
  double min_eigenvalue = 0.0;  // of the raw matrix, for reporting
};

/// Two certificates for positive definiteness of a small symmetric matrix,
/// evaluated in extended precision after scaling to unit diagonal.
inline SpdCertificate certify_spd(const ExtendedMatrix& b) {
  SpdCertificate cert;
  const Eigen::Index k = b.rows();
  Eigen::MatrixXd bd(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) bd(i, j) = static_cast<double>(b(i, j));
  cert.min_eigenvalue = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(bd).eigenvalues().minCoeff();

  for (Eigen::Index i = 0; i < k; ++i) {
    if (!(b(i, i) > 0)) {
      cert.min_pivot = cert.min_minor = static_cast<double>(b(i, i));
      return cert;
    }
  }
  ExtendedMatrix s = b;
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j)
      s(i, j) = b(i, j) / boost::multiprecision::sqrt(b(i, i) * b(j, j));

  // Cholesky with explicit pivots.
  ExtendedMatrix l = ExtendedMatrix::Zero(k, k);
  Extended min_pivot = 1;
  bool chol_ok = true;
  for (Eigen::Index j = 0; j < k && chol_ok; ++j) {
    Extended d = s(j, j);
    for (Eigen::Index p = 0; p < j; ++p) d -= l(j, p) * l(j, p);
    min_pivot = std::min(min_pivot, d);
    if (!(d > kSpdTolerance)) {
      chol_ok = false;
      break;
    }
    l(j, j) = boost::multiprecision::sqrt(d);
    for (Eigen::Index i = j + 1; i < k; ++i) {
      Extended v = s(i, j);
      for (Eigen::Index p = 0; p < j; ++p) v -= l(i, p) * l(j, p);
      l(i, j) = v / l(j, j);
    }
  }
  cert.cholesky_ok = chol_ok;
  cert.min_pivot = static_cast<double>(min_pivot);

  Extended min_minor = 1;
  bool minors_ok = true;
  for (Eigen::Index r = 1; r <= k; ++r) {
    const Extended det = s.topLeftCorner(r, r).fullPivLu().determinant();
    min_minor = std::min(min_minor, det);
    if (!(det > kSpdTolerance)) minors_ok = false;
  }
  cert.minors_ok = minors_ok;
  cert.min_minor = static_cast<double>(min_minor);
  return cert;
}

struct SymmetrizerResult {
  int n_order = 0;
  std::vector<double> d_block;  // diag(1, 3, ..., 2(N+1-k)-1)
  Eigen::MatrixXd b_block;      // k x k, symmetric
  ExtendedMatrix b_extended;    // B before rounding to double
  double symmetry_residual = 0.0;           // max |A0A - (A0A)^T|
  double symmetry_residual_relative = 0.0;  // divided by max |A0A|
  SpdCertificate spd;
  ConstraintVerdict constraints;
  bool hyperbolic = false;

  Eigen::MatrixXd full() const {
    const Eigen::Index nd = static_cast<Eigen::Index>(d_block.size());
    const Eigen::Index k = b_block.rows();
    Eigen::MatrixXd a0 = Eigen::MatrixXd::Zero(nd + k, nd + k);
    for (Eigen::Index i = 0; i < nd; ++i) a0(i, i) = d_block[i];
    a0.bottomRightCorner(k, k) = b_block;
    return a0;
  }

  ExtendedMatrix full_extended() const {
    const Eigen::Index nd = static_cast<Eigen::Index>(d_block.size());
    const Eigen::Index k = b_block.rows();
    ExtendedMatrix a0 = ExtendedMatrix::Zero(nd + k, nd + k);
    for (Eigen::Index i = 0; i < nd; ++i) a0(i, i) = d_block[i];
    if (b_extended.rows() == k)
      a0.bottomRightCorner(k, k) = b_extended;
    else
      a0.bottomRightCorner(k, k) = b_block.cast<Extended>();
    return a0;
  }
};

namespace detail {

inline std::vector<double> odd_diagonal(int count) {
  std::vector<double> d(count);
  for (int i = 0; i < count; ++i) d[i] = 2.0 * i + 1.0;
  return d;
}

inline void fill_symmetry_residual(SymmetrizerResult& r, const Eigen::MatrixXd& a,
                                   const ExtendedMatrix& b) {
  const Eigen::Index n1 = a.rows();
  const Eigen::Index k = b.rows();
  const Eigen::Index nd = n1 - k;
  ExtendedMatrix a0 = ExtendedMatrix::Zero(n1, n1);
  for (Eigen::Index i = 0; i < nd; ++i) a0(i, i) = r.d_block[i];
  a0.bottomRightCorner(k, k) = b;
  ExtendedMatrix ae(n1, n1);
  for (Eigen::Index i = 0; i < n1; ++i)
    for (Eigen::Index j = 0; j < n1; ++j) ae(i, j) = a(i, j);
  const ExtendedMatrix s = a0 * ae;
  Extended res = 0, big = 0;
  for (Eigen::Index i = 0; i < n1; ++i)
    for (Eigen::Index j = 0; j < n1; ++j) {
      res = std::max(res, Extended(boost::multiprecision::abs(s(i, j) - s(j, i))));
      big = std::max(big, Extended(boost::multiprecision::abs(s(i, j))));
    }
  r.symmetry_residual = static_cast<double>(res);
  r.symmetry_residual_relative = big > 0 ? static_cast<double>(res / big) : 0.0;
  r.b_extended = b;
  r.b_block.resize(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j) r.b_block(i, j) = static_cast<double>(b(i, j));
}

inline void check_row(const Eigen::VectorXd& a, int n, int first_free) {
  if (n < 3) throw DomainError("symmetrizer: order must be >= 3");
  if (a.size() != n + 1) throw DimensionError("symmetrizer: closure row must have N+1 entries");
  for (int j = 0; j < first_free; ++j)
    if (a[j] != 0.0)
      throw DomainError("symmetrizer: entry a_" + std::to_string(j) + " must vanish");
}

}  // namespace detail

/// Closed-form 2x2 block for rows with a_{N-3} = 0:
///   Delta = -N(2N-1)a_{N-2}^2 + (N-1)^2 a_{N-1} + (N-1)(2N-1)a_{N-2}a_N,
///   b11 = (N-1)(2N-1)((N-1)a_{N-1} + (2N-1)a_{N-2}a_N) / Delta,
///   b12 = -N(N-1)(2N-1)a_{N-2} / Delta,  b22 = N(N-1)^2 / Delta.
/// Hyperbolic iff a_{N-1} > (2N-1)/(N-1)^2 a_{N-2}(N a_{N-2} - (N-1)a_N).
inline SymmetrizerResult symmetrizer_k2(const Eigen::VectorXd& a, int n) {
  detail::check_row(a, n, n - 2);
  const Extended nn = n;
  const Extended a2 = a[n - 2], a1 = a[n - 1], a0 = a[n];
  const Extended delta = -nn * (2 * nn - 1) * a2 * a2 + (nn - 1) * (nn - 1) * a1 +
                         (nn - 1) * (2 * nn - 1) * a2 * a0;
  if (delta == 0) throw BoundaryError("symmetrizer_k2: vanishing determinant (boundary of hyperbolicity)");
  ExtendedMatrix b(2, 2);
  b(0, 0) = (nn - 1) * (2 * nn - 1) * ((nn - 1) * a1 + (2 * nn - 1) * a2 * a0) / delta;
  b(0, 1) = b(1, 0) = -nn * (nn - 1) * (2 * nn - 1) * a2 / delta;
  b(1, 1) = nn * (nn - 1) * (nn - 1) / delta;

  SymmetrizerResult r;
  r.n_order = n;
  r.d_block = detail::odd_diagonal(n - 1);
  Eigen::MatrixXd full_a = assemble_matrix(ClosureCoefficients{n, 3, {}}).entries;
  full_a.row(n) = a.transpose();
  detail::fill_symmetry_residual(r, full_a, b);
  r.spd = certify_spd(b);

  const Extended margin = a1 - (2 * nn - 1) / ((nn - 1) * (nn - 1)) * a2 * (nn * a2 - (nn - 1) * a0);
  r.constraints.first_margin = static_cast<double>(-a_lower_bound<Extended>(n));
  r.constraints.second_margin = static_cast<double>(margin);
  r.constraints.satisfied = margin > 0;
  r.hyperbolic = r.constraints.satisfied && r.spd.cholesky_ok && r.spd.minors_ok;
  return r;
}

/// 3x3 block B for a general four-coefficient row, from the six linear
/// conditions (B A_21 = (D A_12)^T and B A_22 symmetric), eliminated in
/// extended precision. Hyperbolic iff B is SPD and the explicit constraints hold;
/// the two verdicts must agree unless the constraint margins are at rounding level.
inline SymmetrizerResult symmetrizer_k3(const Eigen::VectorXd& a, int n) {
  detail::check_row(a, n, n - 3);
  const Extended nn = n;
  const Extended a3 = a[n - 3], a2 = a[n - 2], a1 = a[n - 1], a0 = a[n];
  const Extended c = (nn - 2) / (2 * nn - 3);   // A(N-2, N-3)
  const Extended p = (nn - 1) / (2 * nn - 3);   // A(N-2, N-1)
  const Extended q = (nn - 1) / (2 * nn - 1);   // A(N-1, N-2)
  const Extended rr = nn / (2 * nn - 1);        // A(N-1, N)
  const Extended d_last = 2 * nn - 5;           // D entry of row N-3
  const Extended coupling = d_last * (nn - 2) / (2 * nn - 5);  // (D A)(N-3, N-2)

  // Conditions on column N-3 of B A_21 give b11, b12, b13 in terms of b23, b33;
  // symmetry of B A_22 then makes b22, b23 proportional to b33.
  const Extended pivot = a3 * rr + q * c;  // vanishes on the lower bound of a_{N-3}
  if (pivot == 0) throw BoundaryError("symmetrizer_k3: a_{N-3} on its lower bound");
  const Extended beta = -(a3 * a0 + a2 * c) / pivot;        // b23 / b33
  const Extended gamma = (a1 - a3 * p / c - beta * a0) / rr;  // b22 / b33
  const Extended kappa = p * a3 * a3 / (c * c) - a1 * a3 / c - q * gamma - a2 * beta;
  if (kappa == 0) throw BoundaryError("symmetrizer_k3: singular symmetry system");
  const Extended b33 = -p * coupling / (c * kappa);
  const Extended b23 = beta * b33;
  const Extended b22 = gamma * b33;
  const Extended b13 = -b33 * a3 / c;
  const Extended b12 = -b23 * a3 / c;
  const Extended b11 = (coupling - b13 * a3) / c;
  ExtendedMatrix b(3, 3);
  b << b11, b12, b13, b12, b22, b23, b13, b23, b33;

  SymmetrizerResult r;
  r.n_order = n;
  r.d_block = detail::odd_diagonal(n - 2);
  Eigen::MatrixXd full_a = assemble_matrix(ClosureCoefficients{n, 4, {}}).entries;
  full_a.row(n) = a.transpose();
  detail::fill_symmetry_residual(r, full_a, b);
  r.spd = certify_spd(b);
  r.constraints = constraint_check_g(a[n - 3], a[n - 2], a[n - 1], a[n], n);

  const bool spd = r.spd.cholesky_ok && r.spd.minors_ok;
  if (spd != r.constraints.satisfied || r.spd.cholesky_ok != r.spd.minors_ok) {
    const double scale = 1.0 + a.cwiseAbs().maxCoeff();
    const bool at_rounding_level = std::abs(r.constraints.first_margin) < 1e-12 ||
                                   std::abs(r.constraints.second_margin) < 1e-12 * scale;
    if (!at_rounding_level)
      throw ConsistencyError("symmetrizer_k3: SPD certificate and explicit constraints disagree");
  }
  r.hyperbolic = spd && r.constraints.satisfied;
  return r;
}

/// diag(1, 3, ..., 2N+1), the symmetrizer of the P_N matrix.
inline Eigen::MatrixXd pn_symmetrizer(int n) {
  Eigen::MatrixXd a0 = Eigen::MatrixXd::Zero(n + 1, n + 1);
  for (int i = 0; i <= n; ++i) a0(i, i) = 2.0 * i + 1.0;
  return a0;
}

struct EigenReport {
  bool real_diagonalizable = false;
  Eigen::VectorXcd eigenvalues;
  double max_imag = 0.0;
  double spectral_radius = 0.0;
  double eigenvector_condition = 0.0;
};

inline constexpr double kEigenTolerance = 1e-8;
inline constexpr double kMaxEigenvectorCondition = 1e12;

/// Dense eigen-decomposition: real diagonalizable iff every |Im lambda| is
/// within tol (1 + max |lambda|) and the eigenvector matrix is well conditioned.
inline EigenReport is_real_diagonalizable(const Eigen::MatrixXd& a, double tol = kEigenTolerance) {
  EigenReport rep;
  Eigen::EigenSolver<Eigen::MatrixXd> es(a, true);
  if (es.info() != Eigen::Success) return rep;
  rep.eigenvalues = es.eigenvalues();
  rep.max_imag = rep.eigenvalues.imag().cwiseAbs().maxCoeff();
  rep.spectral_radius = rep.eigenvalues.cwiseAbs().maxCoeff();
  Eigen::MatrixXcd v = es.eigenvectors();
  for (Eigen::Index j = 0; j < v.cols(); ++j) v.col(j).normalize();
  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXcd>(v).singularValues();
  rep.eigenvector_condition = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1)
                                                      : std::numeric_limits<double>::infinity();
  rep.real_diagonalizable = rep.max_imag <= tol * (1.0 + rep.spectral_radius) &&
                            rep.eigenvector_condition < kMaxEigenvectorCondition;
  return rep;
}

inline EigenReport is_real_diagonalizable(const CoefficientMatrix& a, double tol = kEigenTolerance) {
  return is_real_diagonalizable(a.entries, tol);
}

/// Spectral radius only (no eigenvectors).
inline std::pair<double, double> spectral_radius_and_max_imag(const Eigen::MatrixXd& a) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(a, false);
  const Eigen::VectorXcd ev = es.eigenvalues();
  return {ev.cwiseAbs().maxCoeff(), ev.imag().cwiseAbs().maxCoeff()};
}

struct StabilityReport {
  bool condition_ii_ok = false;    // A0 A symmetric
  bool condition_i_iii_ok = false;  // source coupling with scalar P
  double symmetry_residual = 0.0;        // of A0 A, relative
  double source_symmetry_residual = 0.0;  // of A0 Q_U, absolute
  double max_eigenvalue_a0qu = 0.0;       // of A0 Q_U (must be <= 0)
  double max_eigenvalue_off_equilibrium = 0.0;  // of A0Q_U + Q_U^T A0 on the relaxing block
  double p_scalar = 0.0;                 // P = p I
  int relaxing_rank = 0;                 // r
};

namespace detail {

/// Largest eigenvalue of a small symmetric matrix by cyclic Jacobi rotations.
inline Extended max_symmetric_eigenvalue(ExtendedMatrix a) {
  const Eigen::Index n = a.rows();
  for (int sweep = 0; sweep < 64; ++sweep) {
    Extended off = 0, diag = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      diag += a(i, i) * a(i, i);
      for (Eigen::Index j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    }
    if (off <= std::numeric_limits<Extended>::epsilon() * std::numeric_limits<Extended>::epsilon() * diag) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (a(p, q) == 0) continue;
        const Extended theta = (a(q, q) - a(p, p)) / (2 * a(p, q));
        const Extended t = (theta >= 0 ? Extended(1) : Extended(-1)) /
                           (boost::multiprecision::abs(theta) + boost::multiprecision::sqrt(theta * theta + 1));
        const Extended c = 1 / boost::multiprecision::sqrt(t * t + 1), s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const Extended akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const Extended apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  Extended best = a(0, 0);
  for (Eigen::Index i = 1; i < n; ++i) best = std::max(best, Extended(a(i, i)));
  return best;
}

}  // namespace detail

/// Builds Q_U = diag(-sigma_a, -(sigma_s + sigma_a) I_N) and checks the
/// three structural stability conditions with P a scalar matrix.
inline StabilityReport structural_stability_check(const SymmetrizerResult& sym, double sigma_s,
                                                  double sigma_a, int n, int k) {
  if (sigma_s < 0.0 || sigma_a < 0.0) throw DomainError("structural stability: negative cross section");
  const Eigen::MatrixXd a0 = sym.full();
  if (a0.rows() != n + 1 || sym.b_block.rows() != k)
    throw DimensionError("structural stability: symmetrizer does not match N and k");

  StabilityReport rep;
  rep.symmetry_residual = sym.symmetry_residual_relative;
  rep.condition_ii_ok = sym.spd.cholesky_ok && rep.symmetry_residual <= kSymmetryTolerance;

  Eigen::VectorXd qdiag(n + 1);
  qdiag[0] = -sigma_a;
  for (int i = 1; i <= n; ++i) qdiag[i] = -(sigma_s + sigma_a);
  const Eigen::MatrixXd qu = qdiag.asDiagonal();
  const Eigen::MatrixXd a0q = a0 * qu;
  rep.source_symmetry_residual = (a0q - a0q.transpose()).cwiseAbs().maxCoeff();
  // B can be graded enough near the constraint boundary that its double
  // rounding is no longer definite, so the sign test uses the unrounded B.
  const ExtendedMatrix a0q_ext = sym.full_extended() * qu.cast<Extended>();
  const ExtendedMatrix a0q_sym = (a0q_ext + a0q_ext.transpose()) / 2;
  rep.max_eigenvalue_a0qu = static_cast<double>(detail::max_symmetric_eigenvalue(a0q_sym));

  // Equilibrium directions are the leading zero entries of Q_U; the rest relax.
  int zeros = 0;
  while (zeros <= n && qdiag[zeros] == 0.0) ++zeros;
  rep.relaxing_rank = n + 1 - zeros;
  const ExtendedMatrix coupling = a0q_ext + a0q_ext.transpose();
  if (rep.relaxing_rank == 0) {
    rep.condition_i_iii_ok = rep.source_symmetry_residual <= kSymmetryTolerance;
    return rep;
  }
  // (i) holds with P = p I and S = diag(qdiag) on the relaxing block, which is
  // invertible. For (iii) choose p^2 as half the available dissipation.
  const Eigen::Index r = rep.relaxing_rank;
  const ExtendedMatrix relaxing = coupling.bottomRightCorner(r, r);
  const Extended off_eq = detail::max_symmetric_eigenvalue((relaxing + relaxing.transpose()) / 2);
  rep.max_eigenvalue_off_equilibrium = static_cast<double>(off_eq);
  Extended mixed = 0;
  for (int i = 0; i < zeros; ++i)
    for (Eigen::Index j = 0; j <= n; ++j) mixed += boost::multiprecision::abs(coupling(i, j));
  if (off_eq < 0 && mixed == 0) {
    const Extended p2 = -off_eq / 2;
    rep.p_scalar = static_cast<double>(boost::multiprecision::sqrt(p2));
    ExtendedMatrix target = coupling;
    target.bottomRightCorner(r, r) += p2 * ExtendedMatrix::Identity(r, r);
    const Extended worst = detail::max_symmetric_eigenvalue((target + target.transpose()) / 2);
    Extended scale = 0;
    for (Eigen::Index i = 0; i <= n; ++i)
      for (Eigen::Index j = 0; j <= n; ++j) scale = std::max(scale, Extended(boost::multiprecision::abs(coupling(i, j))));
    rep.condition_i_iii_ok = worst <= Extended(1e-12) * (1 + scale) &&
                             rep.source_symmetry_residual <= kSymmetryTolerance * (1.0 + a0q.cwiseAbs().maxCoeff());
  }
  return rep;
}

}  // namespace mlclosure

#pragma once

// Fifth-order finite-difference WENO (Jiang-Shu weights) on periodic lines,
// plus the central-difference stencils used for gradient extraction.

#include <cstddef>
#include <span>
#include <vector>

namespace mlclosure::weno {

inline constexpr int kGhost = 3;
inline constexpr double kEpsilon = 1e-6;

/// Value at x_{i+1/2} from the left-biased stencil f_{i-2}..f_{i+2}.
inline double reconstruct_left(double fm2, double fm1, double f0, double fp1,
                               double fp2) {
  const double q0 = (2.0 * fm2 - 7.0 * fm1 + 11.0 * f0) / 6.0;
  const double q1 = (-fm1 + 5.0 * f0 + 2.0 * fp1) / 6.0;
  const double q2 = (2.0 * f0 + 5.0 * fp1 - fp2) / 6.0;

  const double d0 = fm2 - 2.0 * fm1 + f0;
  const double d1 = fm1 - 2.0 * f0 + fp1;
  const double d2 = f0 - 2.0 * fp1 + fp2;
  const double e0 = fm2 - 4.0 * fm1 + 3.0 * f0;
  const double e1 = fm1 - fp1;
  const double e2 = 3.0 * f0 - 4.0 * fp1 + fp2;
  const double b0 = 13.0 / 12.0 * d0 * d0 + 0.25 * e0 * e0;
  const double b1 = 13.0 / 12.0 * d1 * d1 + 0.25 * e1 * e1;
  const double b2 = 13.0 / 12.0 * d2 * d2 + 0.25 * e2 * e2;

  const double a0 = 0.1 / ((kEpsilon + b0) * (kEpsilon + b0));
  const double a1 = 0.6 / ((kEpsilon + b1) * (kEpsilon + b1));
  const double a2 = 0.3 / ((kEpsilon + b2) * (kEpsilon + b2));
  return (a0 * q0 + a1 * q1 + a2 * q2) / (a0 + a1 + a2);
}

/// Value at x_{i+1/2} from the right-biased stencil f_{i-1}..f_{i+3}.
inline double reconstruct_right(double fm1, double f0, double fp1, double fp2,
                                double fp3) {
  return reconstruct_left(fp3, fp2, fp1, f0, fm1);
}

/// Periodic line with kGhost ghost values on each side.
class PaddedLine {
 public:
  explicit PaddedLine(int n = 0) { resize(n); }

  void resize(int n) {
    n_ = n;
    buf_.assign(static_cast<std::size_t>(n + 2 * kGhost), 0.0);
  }

  /// Copies n values read with the given stride, then fills the ghosts.
  void load(const double* data, std::ptrdiff_t stride = 1) {
    for (int i = 0; i < n_; ++i) buf_[i + kGhost] = data[i * stride];
    wrap();
  }

  /// Writable interior; call wrap() after editing.
  double* interior() { return buf_.data() + kGhost; }

  void wrap() {
    for (int g = 0; g < kGhost; ++g) {
      buf_[g] = buf_[n_ + g];
      buf_[n_ + kGhost + g] = buf_[kGhost + g];
    }
  }

  int size() const { return n_; }
  /// Value at (possibly ghost) index i in [-kGhost, n + kGhost).
  double operator[](int i) const { return buf_[i + kGhost]; }

 private:
  int n_ = 0;
  std::vector<double> buf_;
};

/// Upwind derivative of a line advected with a velocity of the given sign.
/// Writes d/dx into out (size n).
inline void upwind_derivative(const PaddedLine& f, bool positive_velocity, double dx,
                              std::span<double> out) {
  const int n = f.size();
  auto flux = [&](int i) {  // interface i+1/2
    return positive_velocity
               ? reconstruct_left(f[i - 2], f[i - 1], f[i], f[i + 1], f[i + 2])
               : reconstruct_right(f[i - 1], f[i], f[i + 1], f[i + 2], f[i + 3]);
  };
  double left = flux(-1);
  for (int i = 0; i < n; ++i) {
    const double right = flux(i);
    out[i] = (right - left) / dx;
    left = right;
  }
}

/// Average of the left- and right-biased WENO derivatives: a non-dissipative
/// fifth-order derivative for non-conservative products.
inline void central_derivative(const PaddedLine& f, double dx, std::span<double> out) {
  const int n = f.size();
  auto iface = [&](int i) {
    return reconstruct_left(f[i - 2], f[i - 1], f[i], f[i + 1], f[i + 2]) +
           reconstruct_right(f[i - 1], f[i], f[i + 1], f[i + 2], f[i + 3]);
  };
  double left = iface(-1);
  for (int i = 0; i < n; ++i) {
    const double right = iface(i);
    out[i] = 0.5 * (right - left) / dx;
    left = right;
  }
}

/// d/dx of a flux by Lax-Friedrichs splitting f^{+-} = (flux +- alpha u) / 2,
/// f^+ reconstructed from the left and f^- from the right.
inline void lf_flux_derivative(const PaddedLine& flux, const PaddedLine& u, double alpha,
                               double dx, std::span<double> out) {
  const int n = flux.size();
  auto fp = [&](int i) { return 0.5 * (flux[i] + alpha * u[i]); };
  auto fm = [&](int i) { return 0.5 * (flux[i] - alpha * u[i]); };
  auto iface = [&](int i) {
    return reconstruct_left(fp(i - 2), fp(i - 1), fp(i), fp(i + 1), fp(i + 2)) +
           reconstruct_right(fm(i - 1), fm(i), fm(i + 1), fm(i + 2), fm(i + 3));
  };
  double left = iface(-1);
  for (int i = 0; i < n; ++i) {
    const double right = iface(i);
    out[i] = (right - left) / dx;
    left = right;
  }
}

/// Sixth-order central first derivative.
inline void central_difference6(const PaddedLine& f, double dx, std::span<double> out) {
  const int n = f.size();
  for (int i = 0; i < n; ++i) {
    out[i] = (-f[i - 3] + 9.0 * f[i - 2] - 45.0 * f[i - 1] + 45.0 * f[i + 1] -
              9.0 * f[i + 2] + f[i + 3]) /
             (60.0 * dx);
  }
}

}  // namespace mlclosure::weno

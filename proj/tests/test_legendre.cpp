#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mlclosure/legendre.hpp"

using namespace mlclosure;

namespace {

// Rodrigues: P_k(x) = 1/(2^k k!) d^k/dx^k (x^2 - 1)^k, expanded as
// P_k(x) = 2^-k sum_j (-1)^j C(k,j) C(2k-2j,k) x^(k-2j).
double rodrigues(int k, double x) {
  auto binom = [](int n, int r) {
    double b = 1.0;
    for (int i = 1; i <= r; ++i) b = b * (n - r + i) / i;
    return b;
  };
  double s = 0.0;
  for (int j = 0; 2 * j <= k; ++j)
    s += ((j % 2) ? -1.0 : 1.0) * binom(k, j) * binom(2 * k - 2 * j, k) * std::pow(x, k - 2 * j);
  return s / std::pow(2.0, k);
}

KineticField field_from(const Quadrature& q, int nx, double (*g)(double)) {
  KineticField f{PeriodicGrid{nx}, Eigen::MatrixXd(nx, q.size()), 0.0};
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < q.size(); ++j) f.values(i, j) = g(q.nodes[j]);
  return f;
}

}  // namespace

TEST(LegendreEval, LowOrders) {
  EXPECT_EQ(legendre_eval(0, 0.37), 1.0);
  EXPECT_EQ(legendre_eval(1, -0.5), -0.5);
  const double x = 0.0;
  EXPECT_DOUBLE_EQ(legendre_eval(2, x), (3.0 * x * x - 1.0) / 2.0);
}

TEST(LegendreEval, MatchesRodrigues) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ux(-1.0, 1.0);
  std::uniform_int_distribution<int> uk(0, 12);
  for (int t = 0; t < 100; ++t) {
    const int k = uk(rng);
    const double x = ux(rng);
    EXPECT_NEAR(legendre_eval(k, x), rodrigues(k, x), 1e-12) << "k=" << k << " x=" << x;
  }
}

TEST(LegendreEval, AllAndDerivative) {
  const auto p = legendre_all(8, 0.3);
  for (int k = 0; k <= 8; ++k) EXPECT_DOUBLE_EQ(p[k], legendre_eval(k, 0.3));
  const double h = 1e-6;
  for (int k = 1; k <= 8; ++k) {
    const double fd = (legendre_eval(k, 0.3 + h) - legendre_eval(k, 0.3 - h)) / (2 * h);
    EXPECT_NEAR(legendre_derivative(k, 0.3), fd, 1e-7);
  }
}

TEST(GaussLegendre, SmallRules) {
  const Quadrature q1 = gauss_legendre(1);
  ASSERT_EQ(q1.size(), 1);
  EXPECT_NEAR(q1.nodes[0], 0.0, 1e-15);
  EXPECT_NEAR(q1.weights[0], 2.0, 1e-15);

  const Quadrature q2 = gauss_legendre(2);
  ASSERT_EQ(q2.size(), 2);
  EXPECT_NEAR(q2.nodes[0], -1.0 / std::sqrt(3.0), 1e-15);
  EXPECT_NEAR(q2.nodes[1], 1.0 / std::sqrt(3.0), 1e-15);
  EXPECT_NEAR(q2.weights[0], 1.0, 1e-15);
  EXPECT_NEAR(q2.weights[1], 1.0, 1e-15);
}

TEST(GaussLegendre, Invariants) {
  for (int q : {3, 7, 16, 64}) {
    const Quadrature quad = gauss_legendre(q);
    double wsum = 0.0;
    for (int i = 0; i < q; ++i) {
      EXPECT_GT(quad.weights[i], 0.0);
      EXPECT_GT(quad.nodes[i], -1.0);
      EXPECT_LT(quad.nodes[i], 1.0);
      if (i > 0) {
        EXPECT_GT(quad.nodes[i], quad.nodes[i - 1]);
      }
      wsum += quad.weights[i];
    }
    EXPECT_NEAR(wsum, 2.0, 1e-13);
  }
}

TEST(GaussLegendre, ExactForMonomials) {
  for (int q : {1, 2, 5, 16}) {
    const Quadrature quad = gauss_legendre(q);
    for (int p = 0; p <= 2 * q - 1; ++p) {
      double s = 0.0;
      for (int i = 0; i < q; ++i) s += quad.weights[i] * std::pow(quad.nodes[i], p);
      const double exact = (p % 2) ? 0.0 : 2.0 / (p + 1);
      EXPECT_NEAR(s, exact, 1e-12) << "q=" << q << " p=" << p;
    }
  }
}

TEST(GaussLegendre, Orthogonality) {
  const Quadrature quad = gauss_legendre(10);
  for (int i = 0; i <= 19; ++i)
    for (int j = 0; i + j <= 19; ++j) {
      double s = 0.0;
      for (int q = 0; q < quad.size(); ++q)
        s += 0.5 * quad.weights[q] * legendre_eval(i, quad.nodes[q]) * legendre_eval(j, quad.nodes[q]);
      EXPECT_NEAR(s, i == j ? 1.0 / (2 * i + 1) : 0.0, 1e-12);
    }
}

TEST(GaussLegendre, RejectsZeroPoints) { EXPECT_THROW(gauss_legendre(0), DomainError); }

TEST(Moments, ConstantIntensity) {
  const Quadrature quad = gauss_legendre(16);
  const auto f = field_from(quad, 8, [](double) { return 1.0; });
  const MomentField m = moments_from_kinetic(f, quad, 6);
  for (int i = 0; i < 8; ++i) {
    EXPECT_NEAR(m.values(0, i), 1.0, 1e-14);
    for (int k = 1; k <= 6; ++k) EXPECT_NEAR(m.values(k, i), 0.0, 1e-14);
  }
}

TEST(Moments, LinearAndCubicIntensity) {
  const Quadrature quad = gauss_legendre(16);
  const auto fv = field_from(quad, 4, [](double v) { return v; });
  const MomentField m1 = moments_from_kinetic(fv, quad, 6);
  const auto f3 = field_from(quad, 4, [](double v) { return 0.5 * (5 * v * v * v - 3 * v); });
  const MomentField m3 = moments_from_kinetic(f3, quad, 6);
  for (int k = 0; k <= 6; ++k) {
    EXPECT_NEAR(m1.values(k, 2), k == 1 ? 1.0 / 3.0 : 0.0, 1e-14);
    EXPECT_NEAR(m3.values(k, 2), k == 3 ? 1.0 / 7.0 : 0.0, 1e-14);
  }
}

TEST(Moments, Linearity) {
  const Quadrature quad = gauss_legendre(12);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  KineticField a{PeriodicGrid{6}, Eigen::MatrixXd(6, 12), 0.0};
  KineticField b = a;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 12; ++j) {
      a.values(i, j) = g(rng);
      b.values(i, j) = g(rng);
    }
  KineticField c = a;
  c.values = 2.5 * a.values - 0.75 * b.values;
  const auto ma = moments_from_kinetic(a, quad, 5).values;
  const auto mb = moments_from_kinetic(b, quad, 5).values;
  const auto mc = moments_from_kinetic(c, quad, 5).values;
  EXPECT_LT((mc - (2.5 * ma - 0.75 * mb)).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Moments, ShapeMismatch) {
  const Quadrature quad = gauss_legendre(8);
  KineticField f{PeriodicGrid{4}, Eigen::MatrixXd::Zero(4, 7), 0.0};
  EXPECT_THROW(moments_from_kinetic(f, quad, 3), DimensionError);
}

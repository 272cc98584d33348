#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mlclosure/nn.hpp"

using namespace mlclosure;

namespace {

Batch random_batch(int n, int size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Batch b{Eigen::MatrixXd(n + 1, size), Eigen::MatrixXd(n + 2, size)};
  for (int j = 0; j < size; ++j) {
    b.moments(0, j) = 2.0 + u(rng);
    for (int k = 1; k <= n; ++k) b.moments(k, j) = 0.5 * u(rng);
    for (int k = 0; k <= n + 1; ++k) b.gradients(k, j) = u(rng);
  }
  return b;
}

void randomize(MlpModel& m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.5);
  for (int l = 0; l < m.num_layers(); ++l) {
    for (Eigen::Index i = 0; i < m.weights[l].size(); ++i) m.weights[l].data()[i] = g(rng);
    for (Eigen::Index i = 0; i < m.biases[l].size(); ++i) m.biases[l][i] = g(rng);
  }
  for (int k = 0; k <= m.n_order; ++k) {
    m.input_mean[k] = 0.1 * g(rng);
    m.input_scale[k] = 0.5 + std::abs(g(rng));
  }
}

// Relative error of the analytic gradient against central differences
// (step 1e-5) over every parameter; entries far below the gradient scale are
// compared against that scale.
double max_fd_error(MlpModel m, const Batch& b) {
  ParameterGradients g;
  loss_and_gradient(m, b, &g);
  double scale = 0.0;
  for (int l = 0; l < m.num_layers(); ++l)
    scale = std::max({scale, g.weights[l].cwiseAbs().maxCoeff(), g.biases[l].cwiseAbs().maxCoeff()});
  const double h = 1e-5;
  double worst = 0.0;
  auto check = [&](double& p, double analytic) {
    const double keep = p;
    p = keep + h;
    const double lp = loss(m, b);
    p = keep - h;
    const double lm = loss(m, b);
    p = keep;
    const double fd = (lp - lm) / (2 * h);
    const double denom = std::max({std::abs(fd), std::abs(analytic), 1e-4 * scale});
    worst = std::max(worst, std::abs(fd - analytic) / denom);
  };
  for (int l = 0; l < m.num_layers(); ++l) {
    for (Eigen::Index i = 0; i < m.weights[l].size(); ++i) check(m.weights[l].data()[i], g.weights[l].data()[i]);
    for (Eigen::Index i = 0; i < m.biases[l].size(); ++i) check(m.biases[l][i], g.biases[l][i]);
  }
  return worst;
}

}  // namespace

TEST(Forward, ZeroParameters) {
  MlpModel m = make_model(6, 2, 8, 1);
  for (auto& w : m.weights) w.setZero();
  const auto out = forward(m, Eigen::VectorXd::LinSpaced(7, 1.0, 2.0));
  for (double v : out) EXPECT_EQ(v, 0.0);
}

TEST(Forward, SingleLinearLayer) {
  MlpModel m = make_model(6, 0, 0, 1);
  ASSERT_EQ(m.num_layers(), 1);
  m.weights[0].setZero();
  for (int i = 0; i < 4; ++i) m.weights[0](i, i) = 1.0;
  m.input_mean.setConstant(0.5);
  m.input_scale.setConstant(2.0);
  Eigen::VectorXd x(7);
  x << 1, 2, 3, 4, 5, 6, 7;
  const auto out = forward(m, x);
  for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(out[i], (x[i] - 0.5) / 2.0);
}

TEST(Forward, SeededModelIsReproducible) {
  const MlpModel a = make_model(6, 3, 16, 42);
  const MlpModel b = make_model(6, 3, 16, 42);
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(7, 0.3, 3.0);
  EXPECT_EQ(forward(a, x), forward(b, x));
  const MlpModel c = make_model(6, 3, 16, 43);
  EXPECT_NE(forward(a, x), forward(c, x));
  EXPECT_THROW(forward(a, Eigen::VectorXd::Zero(5)), DimensionError);
}

TEST(Forward, BatchMatchesSingle) {
  MlpModel m = make_model(5, 2, 8, 3);
  randomize(m, 4);
  const Batch b = random_batch(5, 9, 5);
  const Eigen::MatrixXd out = forward_batch(m, b.moments);
  for (int j = 0; j < 9; ++j) {
    const auto o = forward(m, b.moments.col(j));
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(out(i, j), o[i], 1e-15);
  }
}

TEST(Loss, ExactPredictionIsZero) {
  const MlpModel m = make_model(6, 1, 4, 9);
  Batch b = random_batch(6, 12, 10);
  for (int j = 0; j < 12; ++j) {
    const ClosureCoefficients c = model_closure(m, b.moments.col(j));
    b.gradients(7, j) = c.n3() * b.gradients(3, j) + c.n2() * b.gradients(4, j) +
                        c.n1() * b.gradients(5, j) + c.n0() * b.gradients(6, j);
  }
  EXPECT_LT(loss(m, b), 1e-28);
}

TEST(Loss, ZeroGradientsGiveZero) {
  MlpModel m = make_model(6, 2, 8, 9);
  randomize(m, 1);
  Batch b = random_batch(6, 20, 11);
  b.gradients.setZero();
  EXPECT_EQ(loss(m, b), 0.0);
  ParameterGradients g;
  loss_and_gradient(m, b, &g);
  for (int l = 0; l < m.num_layers(); ++l) {
    EXPECT_EQ(g.weights[l].cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(g.biases[l].cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(Loss, SingleSampleByHand) {
  // zero parameters: M = 0, so N = (ln2 - 260/378, 0, N_{N-1}(0), 0) for N = 6
  MlpModel m = make_model(6, 1, 3, 2);
  for (auto& w : m.weights) w.setZero();
  Batch b{Eigen::MatrixXd::Ones(7, 1), Eigen::MatrixXd::Zero(8, 1)};
  b.gradients(3, 0) = 2.0;
  b.gradients(5, 0) = -1.0;
  b.gradients(7, 0) = 0.5;
  const ClosureCoefficients c = hyperbolic_postprocess({0, 0, 0, 0}, 6);
  const double pred = 2.0 * (std::log(2.0) - 260.0 / 378.0) - c.n1();
  EXPECT_NEAR(loss(m, b), (pred - 0.5) * (pred - 0.5) / (1e-6 + 0.25), 1e-14);
}

TEST(Backward, TinyModelMatchesFiniteDifferences) {
  MlpModel m = make_model(6, 1, 8, 5);
  randomize(m, 6);
  EXPECT_LT(max_fd_error(m, random_batch(6, 16, 7)), 1e-6);
}

TEST(Backward, RandomShapesMatchFiniteDifferences) {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> layers(0, 3), width(1, 16), order(3, 8), dof(2, 4);
  for (int t = 0; t < 12; ++t) {
    const int n = order(rng);
    MlpModel m = make_model(n, layers(rng), width(rng), 100 + t, t % 3 == 2 ? HeadType::unconstrained : HeadType::hyperbolic,
                            dof(rng), static_cast<SigmaFn>(t % 3));
    randomize(m, 200 + t);
    EXPECT_LT(max_fd_error(m, random_batch(n, 8, 300 + t)), 1e-6) << "case " << t;
  }
}

TEST(Backward, PostprocessLayerAtZero) {
  const auto r = hyperbolic_postprocess_with_jacobian({0, 0, 0, 0}, 6);
  for (int j = 0; j < 4; ++j) {
    std::array<double, 4> p{0, 0, 0, 0}, q{0, 0, 0, 0};
    p[j] = 1e-6;
    q[j] = -1e-6;
    const auto cp = hyperbolic_postprocess(p, 6), cq = hyperbolic_postprocess(q, 6);
    for (int s = 0; s < 4; ++s) EXPECT_NEAR(r.jacobian(s, j), (cp.values[s] - cq.values[s]) / 2e-6, 1e-7);
  }
}

TEST(Serialization, RoundTripIsExact) {
  MlpModel m = make_model(6, 2, 5, 77, HeadType::hyperbolic, 4, SigmaFn::exp);
  randomize(m, 78);
  const nlohmann::json j = model_to_json(m);
  const MlpModel back = model_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(back.layer_dims, m.layer_dims);
  for (int l = 0; l < m.num_layers(); ++l) {
    EXPECT_EQ(back.weights[l], m.weights[l]);
    EXPECT_EQ(back.biases[l], m.biases[l]);
  }
  EXPECT_EQ(back.input_mean, m.input_mean);
  EXPECT_EQ(back.input_scale, m.input_scale);
  EXPECT_EQ(back.sigma_fn, SigmaFn::exp);
  EXPECT_EQ(back.seed, 77u);
  EXPECT_EQ(model_to_json(back).dump(), j.dump());

  const std::string path = ::testing::TempDir() + "model.json";
  save_model(m, path);
  EXPECT_EQ(model_to_json(load_model(path)).dump(), j.dump());
}

TEST(Serialization, RejectsBrokenFiles) {
  nlohmann::json j = model_to_json(make_model(6, 1, 4, 1));
  j["format_version"] = 99;
  EXPECT_THROW(model_from_json(j), DomainError);
  j = model_to_json(make_model(6, 1, 4, 1));
  j["weights"][0].erase(0);
  EXPECT_THROW(model_from_json(j), DimensionError);
  j = model_to_json(make_model(6, 1, 4, 1));
  j["input_scale"][2] = 0.0;
  EXPECT_THROW(model_from_json(j), DomainError);
}

TEST(Train, ConstantDataHasZeroLoss) {
  Dataset ds{6, Eigen::MatrixXd::Constant(7, 64, 2.0), Eigen::MatrixXd::Zero(8, 64), {}, {}, {}};
  TrainConfig cfg;
  cfg.hidden_layers = 1;
  cfg.width = 4;
  cfg.epochs = 2;
  const TrainResult r = train(ds, cfg);
  EXPECT_EQ(r.train_loss.front(), 0.0);
  EXPECT_EQ(r.validation_loss.front(), 0.0);
}

TEST(Train, SyntheticClosureImprovesAndIsDeterministic) {
  const int n = 6, samples = 3000;
  const Batch b = random_batch(n, samples, 31);
  Dataset ds{n, b.moments, b.gradients, {}, {}, {}};
  for (int j = 0; j < samples; ++j)
    ds.gradients(n + 1, j) = 0.3 * ds.moments(1, j) / (std::abs(ds.moments(0, j)) + 1.0) * ds.gradients(n, j);
  TrainConfig cfg;
  cfg.hidden_layers = 2;
  cfg.width = 16;
  cfg.epochs = 30;
  cfg.batch_size = 128;
  cfg.seed = 5;
  const TrainResult a = train(ds, cfg);
  EXPECT_LT(a.train_loss.back(), a.train_loss.front());
  EXPECT_LE(a.best_epoch, 29);
  const TrainResult c = train(ds, cfg);
  EXPECT_EQ(model_to_json(a.model).dump(), model_to_json(c.model).dump());
}

TEST(Train, NonFiniteLossAborts) {
  Dataset ds{6, Eigen::MatrixXd::Ones(7, 16), Eigen::MatrixXd::Ones(8, 16), {}, {}, {}};
  ds.moments(0, 0) = 2.0;  // keeps normalization nondegenerate
  for (int j = 0; j < 16; ++j) ds.gradients(7, j) = std::numeric_limits<double>::quiet_NaN();
  TrainConfig cfg;
  cfg.hidden_layers = 1;
  cfg.width = 2;
  cfg.epochs = 1;
  EXPECT_THROW(train(ds, cfg), NumericalError);
}

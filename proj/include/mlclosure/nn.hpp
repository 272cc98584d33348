#pragma once

// Fully connected network M: (m_0..m_N) -> (M_1..M_4) with tanh hidden
// layers, the closure head that turns its output into coefficients, a relative
// squared loss on the closed gradient d/dx m_{N+1}, exact reverse-mode
// gradients, Adam training and JSON model files.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "mlclosure/closure.hpp"
#include "mlclosure/errors.hpp"
#include "mlclosure/kinetic.hpp"

namespace mlclosure {

enum class HeadType { hyperbolic, unconstrained };

inline std::string to_string(HeadType h) {
  return h == HeadType::hyperbolic ? "hyperbolic" : "unconstrained";
}

inline HeadType head_type_from_string(const std::string& s) {
  if (s == "hyperbolic") return HeadType::hyperbolic;
  if (s == "unconstrained") return HeadType::unconstrained;
  throw DomainError("unknown closure head '" + s + "'");
}

inline constexpr int kModelFormatVersion = 1;
inline constexpr double kLossFloor = 1e-6;

struct MlpModel {
  std::vector<int> layer_dims;           // N+1, hidden..., 4
  std::vector<Eigen::MatrixXd> weights;  // layer l: dims[l+1] x dims[l]
  std::vector<Eigen::VectorXd> biases;
  Eigen::VectorXd input_mean;
  Eigen::VectorXd input_scale;
  int n_order = 0;
  int k_dof = 4;
  SigmaFn sigma_fn = SigmaFn::softplus;
  HeadType head = HeadType::hyperbolic;
  std::uint64_t seed = 0;

  int num_layers() const { return static_cast<int>(weights.size()); }

  void validate() const {
    if (layer_dims.size() < 2) throw DimensionError("model: need at least input and output widths");
    if (layer_dims.front() != n_order + 1 || layer_dims.back() != 4)
      throw DimensionError("model: widths must run from N+1 to 4");
    if (weights.size() != layer_dims.size() - 1 || biases.size() != weights.size())
      throw DimensionError("model: layer count mismatch");
    for (std::size_t l = 0; l < weights.size(); ++l) {
      if (weights[l].rows() != layer_dims[l + 1] || weights[l].cols() != layer_dims[l] ||
          biases[l].size() != layer_dims[l + 1])
        throw DimensionError("model: layer " + std::to_string(l) + " has the wrong shape");
    }
    if (input_mean.size() != n_order + 1 || input_scale.size() != n_order + 1)
      throw DimensionError("model: normalization size mismatch");
    if (!(input_scale.array() > 0.0).all()) throw DomainError("model: input scales must be positive");
    if (k_dof < 2 || k_dof > 4) throw DomainError("model: k_dof must be 2, 3 or 4");
  }
};

/// Xavier-uniform weights, zero biases, identity normalization.
inline MlpModel make_model(int n_order, int hidden_layers, int width, std::uint64_t seed,
                           HeadType head = HeadType::hyperbolic, int k_dof = 4,
                           SigmaFn sigma_fn = SigmaFn::softplus) {
  if (n_order < 3) throw DomainError("model: order must be >= 3");
  if (hidden_layers < 0 || (hidden_layers > 0 && width < 1)) throw DomainError("model: bad architecture");
  MlpModel m;
  m.n_order = n_order;
  m.k_dof = k_dof;
  m.sigma_fn = sigma_fn;
  m.head = head;
  m.seed = seed;
  m.layer_dims.push_back(n_order + 1);
  for (int l = 0; l < hidden_layers; ++l) m.layer_dims.push_back(width);
  m.layer_dims.push_back(4);
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l + 1 < m.layer_dims.size(); ++l) {
    const int in = m.layer_dims[l], out = m.layer_dims[l + 1];
    const double limit = std::sqrt(6.0 / (in + out));
    std::uniform_real_distribution<double> u(-limit, limit);
    Eigen::MatrixXd w(out, in);
    for (int j = 0; j < in; ++j)
      for (int i = 0; i < out; ++i) w(i, j) = u(rng);
    m.weights.push_back(std::move(w));
    m.biases.push_back(Eigen::VectorXd::Zero(out));
  }
  m.input_mean = Eigen::VectorXd::Zero(n_order + 1);
  m.input_scale = Eigen::VectorXd::Ones(n_order + 1);
  m.validate();
  return m;
}

/// Per-feature standardization; near-constant features keep scale 1.
inline void fit_normalization(MlpModel& m, const Eigen::MatrixXd& moments) {
  if (moments.rows() != m.n_order + 1 || moments.cols() == 0)
    throw DimensionError("fit_normalization: moments must be (N+1) x S with S > 0");
  m.input_mean = moments.rowwise().mean();
  const Eigen::MatrixXd centered = moments.colwise() - m.input_mean;
  for (int k = 0; k <= m.n_order; ++k) {
    const double sd = std::sqrt(centered.row(k).squaredNorm() / static_cast<double>(moments.cols()));
    m.input_scale[k] = sd > 1e-12 * (1.0 + std::abs(m.input_mean[k])) ? sd : 1.0;
  }
}

namespace detail {

struct ForwardCache {
  std::vector<Eigen::MatrixXd> activations;  // a_0 = normalized input, a_L = output
};

inline Eigen::MatrixXd normalize(const MlpModel& m, const Eigen::MatrixXd& x) {
  return (x.colwise() - m.input_mean).array().colwise() / m.input_scale.array();
}

inline Eigen::MatrixXd forward_cached(const MlpModel& m, const Eigen::MatrixXd& x, ForwardCache* cache) {
  Eigen::MatrixXd a = normalize(m, x);
  if (cache) cache->activations = {a};
  const int nl = m.num_layers();
  for (int l = 0; l < nl; ++l) {
    Eigen::MatrixXd z = m.weights[l] * a;
    z.colwise() += m.biases[l];
    a = (l + 1 < nl) ? Eigen::MatrixXd(z.array().tanh()) : z;
    if (cache) cache->activations.push_back(a);
  }
  return a;
}

}  // namespace detail

/// Network outputs for a batch of columns (N+1) x B; returns 4 x B.
inline Eigen::MatrixXd forward_batch(const MlpModel& m, const Eigen::MatrixXd& moments) {
  if (moments.rows() != m.n_order + 1) throw DimensionError("forward: input must have N+1 rows");
  return detail::forward_cached(m, moments, nullptr);
}

inline std::array<double, 4> forward(const MlpModel& m, const Eigen::VectorXd& moments) {
  if (moments.size() != m.n_order + 1) throw DimensionError("forward: input must have N+1 entries");
  const Eigen::MatrixXd out = detail::forward_cached(m, moments, nullptr);
  return {out(0, 0), out(1, 0), out(2, 0), out(3, 0)};
}

/// Coefficients and d(coefficients)/d(M) for the model's head.
inline PostprocessResult apply_head(const MlpModel& m, const std::array<double, 4>& out) {
  if (m.head == HeadType::hyperbolic)
    return hyperbolic_postprocess_with_jacobian(out, m.n_order, m.sigma_fn, m.k_dof);
  PostprocessResult r;
  r.coeffs = unconstrained_postprocess(out, m.n_order);
  r.jacobian.setZero();
  r.jacobian(2, 0) = r.jacobian(1, 1) = r.jacobian(0, 2) = r.jacobian(3, 3) = 1.0;
  if (m.k_dof < 4) {
    r.coeffs.n3() = 0.0;
    r.jacobian(0, 2) = 0.0;
  }
  if (m.k_dof < 3) {
    r.coeffs.n2() = 0.0;
    r.jacobian(1, 1) = 0.0;
  }
  r.coeffs.dof = m.k_dof;
  return r;
}

inline ClosureCoefficients model_closure(const MlpModel& m, const Eigen::VectorXd& moments) {
  return apply_head(m, forward(m, moments)).coeffs;
}

/// A view of training samples: moments (N+1) x B and gradients (N+2) x B.
struct Batch {
  Eigen::MatrixXd moments;
  Eigen::MatrixXd gradients;

  int size() const { return static_cast<int>(moments.cols()); }
};

inline Batch batch_from(const Dataset& ds, const std::vector<int>& index, std::size_t begin,
                        std::size_t end) {
  Batch b{Eigen::MatrixXd(ds.n_order + 1, end - begin), Eigen::MatrixXd(ds.n_order + 2, end - begin)};
  for (std::size_t j = begin; j < end; ++j) {
    b.moments.col(j - begin) = ds.moments.col(index[j]);
    b.gradients.col(j - begin) = ds.gradients.col(index[j]);
  }
  return b;
}

struct ParameterGradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

namespace detail {

inline std::array<double, 4> slot_gradients(const Batch& b, int n, int j) {
  return {b.gradients(n - 3, j), b.gradients(n - 2, j), b.gradients(n - 1, j), b.gradients(n, j)};
}

}  // namespace detail

enum class LossKind { relative, mse };

inline std::string to_string(LossKind k) { return k == LossKind::mse ? "mse" : "relative"; }

inline LossKind loss_kind_from_string(const std::string& s) {
  if (s == "relative") return LossKind::relative;
  if (s == "mse") return LossKind::mse;
  throw DomainError("unknown loss '" + s + "'");
}

enum class LrSchedule { constant, cosine };

inline std::string to_string(LrSchedule k) { return k == LrSchedule::cosine ? "cosine" : "constant"; }

inline LrSchedule lr_schedule_from_string(const std::string& s) {
  if (s == "constant") return LrSchedule::constant;
  if (s == "cosine") return LrSchedule::cosine;
  throw DomainError("unknown learning-rate schedule '" + s + "'");
}

/// relative: mean_b (pred_b - true_b)^2 / (1e-6 + true_b^2); mse: mean_b (pred_b - true_b)^2,
/// with pred_b = sum_i N_i(m_b) d/dx m_i and true_b = d/dx m_{N+1}.
/// Fills parameter gradients when grad is non-null.
inline double loss_and_gradient(const MlpModel& m, const Batch& b, ParameterGradients* grad,
                                LossKind kind = LossKind::relative) {
  const int n = m.n_order;
  if (b.moments.rows() != n + 1 || b.gradients.rows() != n + 2 || b.moments.cols() != b.gradients.cols())
    throw DimensionError("loss: batch shape does not match the model");
  const int bs = b.size();
  if (bs == 0) throw DimensionError("loss: empty batch");
  detail::ForwardCache cache;
  const Eigen::MatrixXd out = detail::forward_cached(m, b.moments, grad ? &cache : nullptr);

  double total = 0.0;
  Eigen::MatrixXd delta(4, bs);
  for (int j = 0; j < bs; ++j) {
    const PostprocessResult r = apply_head(m, {out(0, j), out(1, j), out(2, j), out(3, j)});
    const auto g = detail::slot_gradients(b, n, j);
    const double target = b.gradients(n + 1, j);
    const double weight = kind == LossKind::mse ? 1.0 : 1.0 / (kLossFloor + target * target);
    const double resid = evaluate_closure_gradient(r.coeffs, g) - target;
    total += resid * resid * weight;
    if (grad) {
      const Eigen::Vector4d dcoef = Eigen::Vector4d(g[0], g[1], g[2], g[3]) * (2.0 * resid * weight / bs);
      delta.col(j) = r.jacobian.transpose() * dcoef;
    }
  }
  const double loss = total / bs;
  if (!grad) return loss;

  const int nl = m.num_layers();
  grad->weights.resize(nl);
  grad->biases.resize(nl);
  for (int l = nl - 1; l >= 0; --l) {
    grad->weights[l] = delta * cache.activations[l].transpose();
    grad->biases[l] = delta.rowwise().sum();
    if (l > 0) {
      delta = (m.weights[l].transpose() * delta).array() *
              (1.0 - cache.activations[l].array().square());
    }
  }
  return loss;
}

inline double loss(const MlpModel& m, const Batch& b, LossKind kind = LossKind::relative) {
  return loss_and_gradient(m, b, nullptr, kind);
}

struct TrainConfig {
  int hidden_layers = 4;
  int width = 64;
  int epochs = 200;
  int batch_size = 1024;
  double learning_rate = 1e-3;
  LrSchedule schedule = LrSchedule::constant;
  double final_lr_fraction = 0.01;  // cosine floor relative to learning_rate
  LossKind loss = LossKind::relative;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double validation_fraction = 0.1;
  std::uint64_t seed = 1;
  int k_dof = 4;
  SigmaFn sigma_fn = SigmaFn::softplus;
  HeadType head = HeadType::hyperbolic;
  int log_every = 10;
};

struct TrainResult {
  MlpModel model;  // best validation loss
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
  int best_epoch = -1;
};

inline double dataset_loss(const MlpModel& m, const Dataset& ds, const std::vector<int>& index,
                           std::size_t begin, std::size_t end, LossKind kind = LossKind::relative,
                           int chunk = 4096) {
  double s = 0.0;
  for (std::size_t i = begin; i < end; i += chunk) {
    const std::size_t e = std::min(end, i + chunk);
    s += loss(m, batch_from(ds, index, i, e), kind) * static_cast<double>(e - i);
  }
  return end > begin ? s / static_cast<double>(end - begin) : 0.0;
}

/// Adam over shuffled minibatches; the model with the lowest validation loss
/// is returned.
inline TrainResult train(const Dataset& ds, const TrainConfig& cfg, std::ostream* log = nullptr) {
  if (ds.size() < 2) throw DimensionError("train: need at least two samples");
  if (cfg.epochs < 1 || cfg.batch_size < 1 || !(cfg.learning_rate > 0.0))
    throw DomainError("train: epochs, batch size and learning rate must be positive");
  TrainResult res;
  MlpModel m = make_model(ds.n_order, cfg.hidden_layers, cfg.width, cfg.seed, cfg.head, cfg.k_dof,
                          cfg.sigma_fn);

  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<int> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_val = std::min<std::size_t>(
      order.size() - 1, static_cast<std::size_t>(std::floor(cfg.validation_fraction * order.size())));
  std::vector<int> val(order.begin(), order.begin() + n_val);
  std::vector<int> tr(order.begin() + n_val, order.end());

  Eigen::MatrixXd train_moments(ds.n_order + 1, tr.size());
  for (std::size_t j = 0; j < tr.size(); ++j) train_moments.col(j) = ds.moments.col(tr[j]);
  fit_normalization(m, train_moments);

  const int nl = m.num_layers();
  std::vector<Eigen::MatrixXd> mw(nl), vw(nl);
  std::vector<Eigen::VectorXd> mb(nl), vb(nl);
  for (int l = 0; l < nl; ++l) {
    mw[l] = vw[l] = Eigen::MatrixXd::Zero(m.weights[l].rows(), m.weights[l].cols());
    mb[l] = vb[l] = Eigen::VectorXd::Zero(m.biases[l].size());
  }

  double best = std::numeric_limits<double>::infinity();
  long step = 0;
  ParameterGradients g;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(tr.begin(), tr.end(), rng);
    double lr = cfg.learning_rate;
    if (cfg.schedule == LrSchedule::cosine) {
      const double f = cfg.final_lr_fraction;
      lr *= f + (1.0 - f) * 0.5 * (1.0 + std::cos(std::numbers::pi * epoch / cfg.epochs));
    }
    double epoch_sum = 0.0;
    for (std::size_t i = 0; i < tr.size(); i += cfg.batch_size) {
      const std::size_t e = std::min(tr.size(), i + static_cast<std::size_t>(cfg.batch_size));
      const Batch b = batch_from(ds, tr, i, e);
      const double l = loss_and_gradient(m, b, &g, cfg.loss);
      if (!std::isfinite(l))
        throw NumericalError("train: non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                             std::to_string(step));
      epoch_sum += l * static_cast<double>(e - i);
      ++step;
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      for (int k = 0; k < nl; ++k) {
        mw[k] = cfg.beta1 * mw[k] + (1.0 - cfg.beta1) * g.weights[k];
        vw[k] = cfg.beta2 * vw[k] + (1.0 - cfg.beta2) * g.weights[k].cwiseProduct(g.weights[k]);
        mb[k] = cfg.beta1 * mb[k] + (1.0 - cfg.beta1) * g.biases[k];
        vb[k] = cfg.beta2 * vb[k] + (1.0 - cfg.beta2) * g.biases[k].cwiseProduct(g.biases[k]);
        m.weights[k].array() -= lr * (mw[k].array() / c1) /
                                ((vw[k].array() / c2).sqrt() + cfg.adam_epsilon);
        m.biases[k].array() -= lr * (mb[k].array() / c1) /
                               ((vb[k].array() / c2).sqrt() + cfg.adam_epsilon);
      }
      if (step % 100 == 0 && m.head == HeadType::hyperbolic) {
        const ClosureCoefficients c = model_closure(m, b.moments.col(0));
        if (!constraint_check_h(c.n3(), c.n2(), c.n1(), c.n0(), m.n_order).satisfied)
          throw ConsistencyError("train: post-processed closure violates the constraints");
      }
    }
    res.train_loss.push_back(epoch_sum / static_cast<double>(tr.size()));
    const double vl = val.empty() ? res.train_loss.back() : dataset_loss(m, ds, val, 0, val.size(), cfg.loss);
    res.validation_loss.push_back(vl);
    if (vl < best) {
      best = vl;
      res.model = m;
      res.best_epoch = epoch;
    }
    if (log && cfg.log_every > 0 && (epoch % cfg.log_every == 0 || epoch + 1 == cfg.epochs))
      *log << "epoch " << epoch << " train " << res.train_loss.back() << " val " << vl << "\n";
  }
  if (res.best_epoch < 0) res.model = m;
  return res;
}

inline nlohmann::json model_to_json(const MlpModel& m) {
  nlohmann::json j;
  j["format"] = "mlclosure-mlp";
  j["format_version"] = kModelFormatVersion;
  j["layer_dims"] = m.layer_dims;
  j["activation"] = "tanh";
  j["head"] = to_string(m.head);
  j["n_order"] = m.n_order;
  j["k_dof"] = m.k_dof;
  j["sigma_fn"] = to_string(m.sigma_fn);
  j["seed"] = m.seed;
  j["input_mean"] = std::vector<double>(m.input_mean.data(), m.input_mean.data() + m.input_mean.size());
  j["input_scale"] = std::vector<double>(m.input_scale.data(), m.input_scale.data() + m.input_scale.size());
  nlohmann::json ws = nlohmann::json::array(), bs = nlohmann::json::array();
  for (int l = 0; l < m.num_layers(); ++l) {
    std::vector<double> w;
    for (Eigen::Index r = 0; r < m.weights[l].rows(); ++r)
      for (Eigen::Index c = 0; c < m.weights[l].cols(); ++c) w.push_back(m.weights[l](r, c));
    ws.push_back(w);
    bs.push_back(std::vector<double>(m.biases[l].data(), m.biases[l].data() + m.biases[l].size()));
  }
  j["weights"] = ws;
  j["biases"] = bs;
  return j;
}

inline MlpModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format_version").get<int>() != kModelFormatVersion)
      throw DomainError("model file: unsupported format version");
    MlpModel m;
    m.layer_dims = j.at("layer_dims").get<std::vector<int>>();
    m.n_order = j.at("n_order").get<int>();
    m.k_dof = j.at("k_dof").get<int>();
    m.sigma_fn = sigma_fn_from_string(j.at("sigma_fn").get<std::string>());
    m.head = head_type_from_string(j.value("head", std::string("hyperbolic")));
    m.seed = j.at("seed").get<std::uint64_t>();
    const auto mean = j.at("input_mean").get<std::vector<double>>();
    const auto scale = j.at("input_scale").get<std::vector<double>>();
    m.input_mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
    m.input_scale = Eigen::Map<const Eigen::VectorXd>(scale.data(), static_cast<Eigen::Index>(scale.size()));
    const auto& ws = j.at("weights");
    const auto& bs = j.at("biases");
    if (!ws.is_array() || ws.size() + 1 != m.layer_dims.size() || bs.size() != ws.size())
      throw DimensionError("model file: layer count mismatch");
    for (std::size_t l = 0; l < ws.size(); ++l) {
      const auto w = ws[l].get<std::vector<double>>();
      const auto b = bs[l].get<std::vector<double>>();
      const int rows = m.layer_dims[l + 1], cols = m.layer_dims[l];
      if (static_cast<int>(w.size()) != rows * cols || static_cast<int>(b.size()) != rows)
        throw DimensionError("model file: layer " + std::to_string(l) + " has the wrong size");
      m.weights.push_back(Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          w.data(), rows, cols));
      m.biases.push_back(Eigen::Map<const Eigen::VectorXd>(b.data(), rows));
    }
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("model file: ") + e.what());
  }
}

inline void save_model(const MlpModel& m, const std::string& path) {
  io::write_file(path, model_to_json(m).dump(1) + "\n");
}

inline MlpModel load_model(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw DomainError("model file " + path + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace mlclosure

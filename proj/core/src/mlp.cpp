#include <cmath>
#include <numeric>

#include "sleuth/errors.hpp"
#include "sleuth/probes.hpp"
#include "sleuth/random.hpp"

namespace sleuth::probes {
namespace {

void softmax_rows(Matrix& Z) {
  for (Eigen::Index r = 0; r < Z.rows(); ++r) {
    const double peak = Z.row(r).maxCoeff();
    Z.row(r) = (Z.row(r).array() - peak).exp();
    Z.row(r) /= Z.row(r).sum();
  }
}

double cross_entropy(const Matrix& probs, Labels labels) {
  double total = 0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    total -= std::log(std::max(probs(i, labels[static_cast<std::size_t>(i)]), 1e-300));
  }
  return total / static_cast<double>(probs.rows());
}

Matrix forward_probs(const Matrix& X, const Matrix& w1, const Matrix& w2) {
  Matrix Z = (X * w1).cwiseMax(0.0) * w2;
  softmax_rows(Z);
  return Z;
}

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Matrix init_weights(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
  Matrix W(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) W(r, c) = rng.uniform(-bound, bound);
  }
  return W;
}

struct AdamState {
  Matrix m, v;
  explicit AdamState(const Matrix& like) : m(Matrix::Zero(like.rows(), like.cols())), v(m) {}

  void step(Matrix& w, const Matrix& g, const MlpConfig& cfg, int t) {
    w *= 1.0 - cfg.learning_rate * cfg.weight_decay;
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    w.array() -= cfg.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.epsilon);
  }
};

}  // namespace

MlpLossGrad mlp_loss_grad(const Matrix& X, Labels labels, const Matrix& w1, const Matrix& w2) {
  if (X.cols() != w1.rows() || w1.cols() != w2.rows()) throw DimensionError("MLP weight shapes do not match input");
  if (static_cast<Eigen::Index>(labels.size()) != X.rows() || X.rows() == 0) {
    throw DimensionError("label count does not match row count");
  }
  const Matrix pre = X * w1;
  const Matrix hidden = pre.cwiseMax(0.0);
  Matrix probs = hidden * w2;
  softmax_rows(probs);

  MlpLossGrad out;
  out.loss = cross_entropy(probs, labels);
  Matrix dz = std::move(probs);
  for (Eigen::Index i = 0; i < dz.rows(); ++i) dz(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
  dz /= static_cast<double>(X.rows());
  out.grad_w2 = hidden.transpose() * dz;
  Matrix dpre = (dz * w2.transpose()).cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
  out.grad_w1 = X.transpose() * dpre;
  return out;
}

double mlp_loss(const Matrix& X, Labels labels, const Matrix& w1, const Matrix& w2) {
  return cross_entropy(forward_probs(X, w1, w2), labels);
}

MlpProbe fit_mlp(const Matrix& X, Labels labels, int num_classes, const MlpConfig& config, std::uint64_t seed) {
  if (config.hidden < 1) throw InvalidArgument("MLP hidden size must be >= 1");
  if (config.epochs < 1) throw InvalidArgument("MLP epochs must be >= 1");
  if (config.batch_size < 1) throw InvalidArgument("MLP batch size must be >= 1");
  if (num_classes < 1) throw InvalidArgument("MLP needs at least one class");
  if (X.rows() < 1) throw InvalidArgument("MLP needs at least one example");
  if (static_cast<Eigen::Index>(labels.size()) != X.rows()) throw DimensionError("label count does not match row count");
  if (!X.allFinite()) throw InvalidArgument("X contains NaN or Inf");
  for (int y : labels) {
    if (y < 0 || y >= num_classes) throw InvalidArgument("label outside [0, num_classes)");
  }

  Rng rng(seed);
  MlpProbe probe;
  probe.config = config;
  probe.seed = seed;
  probe.w1 = init_weights(X.cols(), config.hidden, rng);
  probe.w2 = init_weights(config.hidden, num_classes, rng);

  AdamState adam1(probe.w1), adam2(probe.w2);
  std::vector<std::size_t> order(static_cast<std::size_t>(X.rows()));
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> batch_labels;
  int step = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), order.size() - start);
      Matrix xb(static_cast<Eigen::Index>(n), X.cols());
      batch_labels.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        xb.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(order[start + i]));
        batch_labels[i] = labels[order[start + i]];
      }
      const auto lg = mlp_loss_grad(xb, batch_labels, probe.w1, probe.w2);
      if (!std::isfinite(lg.loss)) throw DivergenceError(epoch, "MLP loss became non-finite in epoch " + std::to_string(epoch));
      ++step;
      adam1.step(probe.w1, lg.grad_w1, config, step);
      adam2.step(probe.w2, lg.grad_w2, config, step);
    }
    const double loss = mlp_loss(X, labels, probe.w1, probe.w2);
    if (!std::isfinite(loss) || !probe.w1.allFinite() || !probe.w2.allFinite()) {
      throw DivergenceError(epoch, "MLP training diverged in epoch " + std::to_string(epoch));
    }
    probe.epoch_loss.push_back(loss);
  }
  return probe;
}

ProbePrediction predict_mlp(const MlpProbe& probe, const Matrix& X, bool keep_scores) {
  if (X.cols() != probe.w1.rows()) {
    throw DimensionError("X has " + std::to_string(X.cols()) + " columns, probe expects " + std::to_string(probe.w1.rows()));
  }
  ProbePrediction out;
  constexpr Eigen::Index kBlock = 2048;
  if (keep_scores) out.scores = Matrix(X.rows(), probe.w2.cols());
  for (Eigen::Index start = 0; start < X.rows(); start += kBlock) {
    const auto n = std::min(kBlock, X.rows() - start);
    Matrix logits = (X.middleRows(start, n) * probe.w1).cwiseMax(0.0) * probe.w2;
    auto block = argmax_rows(logits);
    out.classes.insert(out.classes.end(), block.begin(), block.end());
    if (keep_scores) {
      softmax_rows(logits);
      out.scores->middleRows(start, n) = logits;
    }
  }
  return out;
}

}  // namespace sleuth::probes

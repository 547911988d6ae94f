#include <gtest/gtest.h>

#include "oracles/oracles.hpp"
#include "sleuth/errors.hpp"
#include "sleuth/metrics.hpp"
#include "sleuth/probes.hpp"

using namespace sleuth;
using namespace sleuth::probes;

namespace {

Matrix gaussian(int rows, int cols, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  Matrix X(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) X(i, j) = scale * rng.normal();
  return X;
}

// Two Gaussian blobs at +-2 along every axis.
void blobs(int n, int d, std::uint64_t seed, Matrix& X, std::vector<int>& y) {
  Rng rng(seed);
  X.resize(n, d);
  y.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    y[static_cast<std::size_t>(i)] = i % 2;
    const double c = i % 2 ? 2.0 : -2.0;
    for (int j = 0; j < d; ++j) X(i, j) = c + 0.5 * rng.normal();
  }
}

// XOR on four cluster centres (+-1, +-1); label = centre sign product > 0.
void xor_suite(int n, std::uint64_t seed, Matrix& X, std::vector<int>& y) {
  Rng rng(seed);
  X.resize(n, 2);
  y.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double a = (i % 4) < 2 ? 1.0 : -1.0;
    const double b = (i % 2) ? 1.0 : -1.0;
    X(i, 0) = a + 0.15 * rng.normal();
    X(i, 1) = b + 0.15 * rng.normal();
    y[static_cast<std::size_t>(i)] = a * b > 0 ? 1 : 0;
  }
}

}  // namespace

TEST(MlpGradient, MatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Matrix X = gaussian(3, 4, seed);
    const Matrix w1 = gaussian(4, 5, seed + 100);
    const Matrix w2 = gaussian(5, 3, seed + 200);
    const std::vector<int> y = {0, 2, 1};
    const auto lg = mlp_loss_grad(X, y, w1, w2);
    EXPECT_NEAR(lg.loss, oracle::mlp_loss(X, y, w1, w2), 1e-12);
    const auto g1 = oracle::central_diff([&](const Matrix& w) { return oracle::mlp_loss(X, y, w, w2); }, w1, 1e-5);
    const auto g2 = oracle::central_diff([&](const Matrix& w) { return oracle::mlp_loss(X, y, w1, w); }, w2, 1e-5);
    EXPECT_LE(oracle::max_relative_error(lg.grad_w1, g1), 1e-4);
    EXPECT_LE(oracle::max_relative_error(lg.grad_w2, g2), 1e-4);
  }
}

TEST(MlpLoss, UniformLogitsGiveLogC) {
  const Matrix X = gaussian(6, 3, 1);
  const Matrix w1 = gaussian(3, 4, 2);
  const Matrix w2 = Matrix::Zero(4, 5);
  const std::vector<int> y = {0, 1, 2, 3, 4, 0};
  EXPECT_NEAR(mlp_loss(X, y, w1, w2), std::log(5.0), 1e-12);
}

TEST(Mlp, SeparableBlobs) {
  Matrix X;
  std::vector<int> y;
  blobs(200, 4, 3, X, y);
  MlpConfig cfg;
  cfg.epochs = 30;
  cfg.learning_rate = 1e-2;
  cfg.batch_size = 32;
  const auto probe = fit_mlp(X, y, 2, cfg, 7);
  EXPECT_GE(metrics::accuracy(predict_mlp(probe, X).classes, y), 0.99);
  ASSERT_EQ(probe.epoch_loss.size(), 30u);
  EXPECT_LE(probe.epoch_loss.back(), probe.epoch_loss.front());
}

TEST(Mlp, XorBeatsLinear) {
  Matrix X, Xt;
  std::vector<int> y, yt;
  xor_suite(400, 1, X, y);
  xor_suite(400, 2, Xt, yt);
  MlpConfig cfg;
  cfg.epochs = 200;
  cfg.learning_rate = 1e-2;
  cfg.batch_size = 32;
  cfg.weight_decay = 0;
  const auto mlp = fit_mlp(X, y, 2, cfg, 3);
  const double mlp_acc = metrics::accuracy(predict_mlp(mlp, Xt).classes, yt);
  const double lin_acc = metrics::accuracy(predict_linear(fit_ridge(X, y, 2, 0.1), Xt).classes, yt);
  EXPECT_GE(mlp_acc, 0.95);
  EXPECT_LE(lin_acc, 0.60);
  EXPECT_GE(mlp_acc - lin_acc, 0.3);
}

TEST(Mlp, DeterministicForSeed) {
  Matrix X;
  std::vector<int> y;
  blobs(60, 3, 4, X, y);
  MlpConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 16;
  const auto a = fit_mlp(X, y, 2, cfg, 11);
  const auto b = fit_mlp(X, y, 2, cfg, 11);
  const auto c = fit_mlp(X, y, 2, cfg, 12);
  EXPECT_EQ(a.w1, b.w1);
  EXPECT_EQ(a.w2, b.w2);
  EXPECT_EQ(a.epoch_loss, b.epoch_loss);
  EXPECT_NE(a.w1, c.w1);
}

TEST(Mlp, InitScaleBoundedByFanIn) {
  Matrix X;
  std::vector<int> y;
  blobs(10, 16, 5, X, y);
  MlpConfig cfg;
  cfg.epochs = 1;
  cfg.learning_rate = 1e-12;
  cfg.weight_decay = 0;
  const auto p = fit_mlp(X, y, 2, cfg, 1);
  EXPECT_LE(p.w1.cwiseAbs().maxCoeff(), 1.0 / std::sqrt(16.0) + 1e-9);
  EXPECT_LE(p.w2.cwiseAbs().maxCoeff(), 1.0 / std::sqrt(64.0) + 1e-9);
  EXPECT_NEAR(p.w1.mean(), 0.0, 0.02);
}

TEST(Mlp, DivergenceReportsEpoch) {
  Matrix X = gaussian(20, 3, 6, 1e3);
  std::vector<int> y(20, 0);
  for (int i = 0; i < 20; i += 2) y[i] = 1;
  MlpConfig cfg;
  cfg.learning_rate = 1e200;
  cfg.epochs = 5;
  try {
    fit_mlp(X, y, 2, cfg, 1);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_GE(e.epoch(), 1);
    EXPECT_LE(e.epoch(), 5);
  }
}

TEST(Mlp, RejectsBadConfig) {
  const Matrix X = gaussian(4, 2, 7);
  const std::vector<int> y = {0, 1, 0, 1};
  MlpConfig cfg;
  cfg.hidden = 0;
  EXPECT_THROW(fit_mlp(X, y, 2, cfg, 1), InvalidArgument);
  cfg = {};
  cfg.epochs = 0;
  EXPECT_THROW(fit_mlp(X, y, 2, cfg, 1), InvalidArgument);
  EXPECT_THROW(fit_mlp(X, std::vector<int>{0, 1, 2, 0}, 2, MlpConfig{}, 1), InvalidArgument);
  const auto p = fit_mlp(X, y, 2, MlpConfig{}, 1);
  EXPECT_THROW(predict_mlp(p, gaussian(2, 3, 8)), DimensionError);
}

#include <gtest/gtest.h>

#include <cmath>

#include "oracles/oracles.hpp"
#include "sleuth/errors.hpp"
#include "sleuth/geometry.hpp"
#include "sleuth/tensorstore.hpp"

using namespace sleuth;
using namespace sleuth::geometry;

TEST(Pca, RankOneLine) {
  Eigen::MatrixXd X(20, 4);
  const Eigen::RowVectorXd dir = (Eigen::RowVectorXd(4) << 1, 2, -1, 0.5).finished();
  const Eigen::RowVectorXd mean = (Eigen::RowVectorXd(4) << 3, 3, 3, 3).finished();
  for (int i = 0; i < 20; ++i) X.row(i) = mean + (i - 7.3) * dir;
  const auto s = pca_spectrum(X);
  ASSERT_EQ(s.ratios.size(), 4u);
  EXPECT_NEAR(s.ratios[0], 1.0, 1e-12);
  for (std::size_t k = 1; k < 4; ++k) EXPECT_NEAR(s.ratios[k], 0.0, 1e-12);
  EXPECT_EQ(s.effective_rank, 1);
  for (double t : kDefaultThresholds) EXPECT_EQ(intrinsic_dim(s, t), 1);
}

TEST(Pca, IsotropicPlane) {
  const auto X = oracle::planted_data(50, 2, {4.0, 4.0}, 1);
  const auto s = pca_spectrum(X);
  EXPECT_NEAR(s.ratios[0], 0.5, 1e-9);
  EXPECT_NEAR(s.ratios[1], 0.5, 1e-9);
}

TEST(Pca, PlantedSpectrum) {
  const auto X = oracle::planted_data(500, 16, {100, 10, 1}, 2);
  const auto s = pca_spectrum(X);
  const double total = 111.0;
  const std::vector<double> want = {100 / total, 10 / total, 1 / total};
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(s.ratios[k], want[k], 0.02 * want[k]);
  EXPECT_EQ(intrinsic_dim(s, 90), 1);
  EXPECT_EQ(intrinsic_dim(s, 99), 2);
  EXPECT_EQ(intrinsic_dim(s, 100), 3);
  EXPECT_EQ(s.effective_rank, 3);
}

TEST(Pca, RotationAndScaleInvariance) {
  const auto X = oracle::planted_data(80, 6, {9, 5, 2, 1, 0.5}, 3);
  const auto base = pca_spectrum(X);
  const auto Q = oracle::random_orthogonal(6, 4);
  const auto rotated = pca_spectrum(X * Q);
  const auto scaled = pca_spectrum(-3.7 * X);
  for (std::size_t k = 0; k < base.ratios.size(); ++k) {
    EXPECT_NEAR(rotated.ratios[k], base.ratios[k], 1e-6);
    EXPECT_NEAR(scaled.ratios[k], base.ratios[k], 1e-12);
  }
}

TEST(IntrinsicDim, MonotoneAndConsistent) {
  Rng rng(5);
  Eigen::MatrixXd X(60, 10);
  for (int i = 0; i < 60; ++i)
    for (int j = 0; j < 10; ++j) X(i, j) = rng.normal() * (j + 1);
  const auto s = pca_spectrum(X);
  int prev = 0;
  for (double t = 1; t <= 100; t += 0.5) {
    const int id = intrinsic_dim(s, t);
    EXPECT_GE(id, prev);
    EXPECT_GE(id, 1);
    prev = id;
    if (t < 100) {
      double top = 0;
      for (int k = 0; k < id; ++k) top += s.ratios[static_cast<std::size_t>(k)];
      EXPECT_GE(top + 1e-12, t / 100);
      EXPECT_LT(top - s.ratios[static_cast<std::size_t>(id - 1)], t / 100);
    }
  }
  EXPECT_EQ(intrinsic_dim(s, 100), s.effective_rank);
  EXPECT_THROW(intrinsic_dim(s, 0), InvalidArgument);
  EXPECT_THROW(intrinsic_dim(s, 100.5), InvalidArgument);
}

TEST(Pca, DegenerateAndTooFewRows) {
  Eigen::MatrixXd same = Eigen::MatrixXd::Constant(5, 3, 2.5);
  EXPECT_THROW(pca_spectrum(same), DegenerateSpectrumError);
  EXPECT_THROW(pca_spectrum(Eigen::MatrixXd::Ones(1, 3)), InvalidArgument);
  same(0, 0) = std::nan("");
  EXPECT_THROW(pca_spectrum(same), InvalidArgument);
}

TEST(DimProfile, TwoLayerStore) {
  oracle::TempDir dir;
  const int m = 40, d = 10;
  Eigen::MatrixXd rank1(m, d);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < d; ++j) rank1(i, j) = (i - 20.0) * (j + 1) * 0.1 + 1.0;
  const Eigen::MatrixXd iso = oracle::planted_data(m, d, std::vector<double>(d, 1.0), 6);
  std::vector<store::LayerMatrix> layers;
  for (const Eigen::MatrixXd* M : std::array<const Eigen::MatrixXd*, 2>{&rank1, &iso}) {
    store::LayerMatrix lm;
    lm.layer = static_cast<std::int32_t>(layers.size());
    lm.rows = m;
    lm.cols = d;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < d; ++j) lm.values.push_back(static_cast<float>((*M)(i, j)));
    layers.push_back(std::move(lm));
  }
  store::StoreHeader h;
  h.model_id = "synthetic";
  h.layer_count = 2;
  h.example_count = m;
  h.hidden_dim = d;
  store::write_store(dir / "s.store", h, layers);

  const std::vector<double> t = {50, 90, 100};
  const auto p = dim_profile(dir / "s.store", t);
  ASSERT_EQ(p.layers.size(), 2u);
  EXPECT_EQ(p.layers[0].id.at(90), 1);
  // f32 storage perturbs the cumulative sum at exactly 0.9
  EXPECT_GE(p.layers[1].id.at(90), 9);
  EXPECT_LE(p.layers[1].id.at(90), 10);
  EXPECT_EQ(p.layers[1].id.at(100), 10);
  EXPECT_DOUBLE_EQ(p.layers[1].fraction(100), 1.0);
  EXPECT_LE(p.layers[0].fraction(100), 1.0);
  EXPECT_EQ(p.summary_layers(), (std::array<int, 3>{0, 1, 1}));

  const std::vector<std::size_t> rows = {0, 1, 2, 3, 4, 5};
  const auto sub = dim_profile(dir / "s.store", t, rows);
  EXPECT_LE(sub.layers[1].id.at(100), 5);
}

TEST(DimProfile, DegenerateLayerTaggedOrSkipped) {
  std::vector<Eigen::MatrixXd> layers = {oracle::planted_data(10, 3, {1, 1}, 7), Eigen::MatrixXd::Zero(10, 3)};
  const std::vector<double> t = {90};
  try {
    dim_profile(layers, t);
    FAIL();
  } catch (const DegenerateSpectrumError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 1"), std::string::npos);
  }
  const auto p = dim_profile(layers, t, true);
  ASSERT_EQ(p.layers.size(), 2u);
  EXPECT_FALSE(p.layers[0].error.has_value());
  EXPECT_TRUE(p.layers[1].error.has_value());
}

TEST(DimProfile, MiddleLayerIsFloorHalf) {
  DimProfile p;
  for (int l = 0; l < 13; ++l) p.layers.push_back({l, 4, {}, {}});
  EXPECT_EQ(p.summary_layers(), (std::array<int, 3>{0, 6, 12}));
}

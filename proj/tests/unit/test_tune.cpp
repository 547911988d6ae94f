#include <gtest/gtest.h>

#include <numeric>

#include "sleuth/errors.hpp"
#include "sleuth/metrics.hpp"
#include "sleuth/probes.hpp"
#include "sleuth/random.hpp"

using namespace sleuth;
using namespace sleuth::probes;

namespace {

struct Fixture {
  Matrix Xtr, Xva;
  std::vector<int> ytr, yva;
  std::vector<std::size_t> idtr, idva;

  Fixture(int ntr, int nva, std::uint64_t seed) {
    Rng rng(seed);
    auto fill = [&](int n, Matrix& X, std::vector<int>& y) {
      X.resize(n, 4);
      y.resize(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        const int k = static_cast<int>(rng.below(3));
        y[static_cast<std::size_t>(i)] = k;
        for (int j = 0; j < 4; ++j) X(i, j) = rng.normal() + (j == k ? 1.5 : 0.0);
      }
    };
    fill(ntr, Xtr, ytr);
    fill(nva, Xva, yva);
    idtr.resize(static_cast<std::size_t>(ntr));
    idva.resize(static_cast<std::size_t>(nva));
    std::iota(idtr.begin(), idtr.end(), 0);
    std::iota(idva.begin(), idva.end(), static_cast<std::size_t>(ntr));
  }
  LabeledSet train() const { return {&Xtr, ytr, idtr}; }
  LabeledSet val() const { return {&Xva, yva, idva}; }
};

}  // namespace

TEST(Tune, SingletonGridReturnsItsConfig) {
  Fixture f(60, 20, 1);
  const auto r = tune(RidgeGrid{{0.5}}, f.train(), f.val(), 3, 1);
  EXPECT_EQ(std::get<double>(r.config), 0.5);
  ASSERT_EQ(r.scores.size(), 1u);
  const auto& probe = std::get<LinearProbe>(r.probe);
  EXPECT_DOUBLE_EQ(r.validation_accuracy, metrics::accuracy(predict_linear(probe, f.Xva).classes, f.yva));
}

TEST(Tune, SelectsArgmaxOfValidationAccuracy) {
  Fixture f(80, 40, 2);
  const auto r = tune(RidgeGrid{{1e4, 1e-2, 1.0, 1e6, 10.0}}, f.train(), f.val(), 3, 1);
  double best = -1;
  for (const auto& s : r.scores) best = std::max(best, s.validation_accuracy);
  EXPECT_DOUBLE_EQ(r.validation_accuracy, best);
  std::vector<double> order;
  for (const auto& s : r.scores) order.push_back(std::get<double>(s.config));
  EXPECT_EQ(order, (std::vector<double>{1e-2, 1.0, 10.0, 1e4, 1e6}));
  // ties go to the first (smallest) lambda
  for (const auto& s : r.scores) {
    if (s.validation_accuracy == best) {
      EXPECT_EQ(std::get<double>(s.config), std::get<double>(r.config));
      break;
    }
  }
}

TEST(Tune, ForestTieBreakOrder) {
  Fixture f(60, 30, 3);
  ForestGrid g;
  g.trees = {3, 1};
  g.depths = {0, 2, 1};
  const auto r = tune(g, f.train(), f.val(), 3, 5);
  std::vector<std::pair<int, int>> order;
  for (const auto& s : r.scores) {
    const auto& c = std::get<ForestConfig>(s.config);
    order.emplace_back(c.trees, c.max_depth);
  }
  EXPECT_EQ(order, (std::vector<std::pair<int, int>>{{1, 1}, {1, 2}, {1, 0}, {3, 1}, {3, 2}, {3, 0}}));
}

TEST(Tune, MlpTieBreakOrder) {
  Fixture f(40, 20, 4);
  MlpGrid g;
  MlpConfig a, b, c;
  a.epochs = 2, a.learning_rate = 1e-2;
  b.epochs = 1, b.learning_rate = 1e-2;
  c.epochs = 1, c.learning_rate = 1e-3;
  g.configs = {a, b, c};
  const auto r = tune(g, f.train(), f.val(), 3, 5);
  ASSERT_EQ(r.scores.size(), 3u);
  EXPECT_EQ(std::get<MlpConfig>(r.scores[0].config).learning_rate, 1e-3);
  EXPECT_EQ(std::get<MlpConfig>(r.scores[1].config).epochs, 1);
  EXPECT_EQ(std::get<MlpConfig>(r.scores[2].config).epochs, 2);
}

TEST(Tune, OverlappingIdsAreRejected) {
  Fixture f(20, 10, 5);
  f.idva[3] = f.idtr[7];
  EXPECT_THROW(tune(RidgeGrid{}, f.train(), f.val(), 3, 1), ProtocolError);
}

TEST(Tune, EmptyGridRejected) {
  Fixture f(20, 10, 6);
  EXPECT_THROW(tune(RidgeGrid{{}}, f.train(), f.val(), 3, 1), InvalidArgument);
}

TEST(FitWith, FamilyFollowsConfig) {
  Fixture f(30, 10, 7);
  EXPECT_EQ(fit_with(ProbeConfig(1.0), f.Xtr, f.ytr, 3, 1).index(), 0u);
  MlpConfig m;
  m.epochs = 1;
  EXPECT_EQ(fit_with(ProbeConfig(m), f.Xtr, f.ytr, 3, 1).index(), 1u);
  ForestConfig fc;
  fc.trees = 1;
  EXPECT_EQ(fit_with(ProbeConfig(fc), f.Xtr, f.ytr, 3, 1).index(), 2u);
  EXPECT_EQ(family_of(ProbeConfig(fc)), Family::forest);
  EXPECT_EQ(family_from_string("mlp"), Family::mlp);
  EXPECT_FALSE(family_from_string("svm").has_value());
  EXPECT_EQ(to_string(Family::linear), "linear");
}

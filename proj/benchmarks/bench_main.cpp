#include <benchmark/benchmark.h>

#include <filesystem>
#include <unistd.h>

#include "sleuth/analogy.hpp"
#include "sleuth/geometry.hpp"
#include "sleuth/probes.hpp"
#include "sleuth/random.hpp"
#include "sleuth/tensorstore.hpp"

using namespace sleuth;

namespace {

Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd X(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) X(i, j) = rng.normal();
  return X;
}

std::vector<int> labels(std::size_t n, int classes, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> y(n);
  for (auto& v : y) v = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));
  return y;
}

// m x 768 activations, 8 classes: one ridge fit per iteration.
void BM_RidgeFit(benchmark::State& state) {
  const auto m = state.range(0);
  const auto X = gaussian(m, 768, 1);
  const auto y = labels(static_cast<std::size_t>(m), 8, 2);
  for (auto _ : state) benchmark::DoNotOptimize(probes::fit_ridge(X, y, 8, 1.0));
  state.SetItemsProcessed(state.iterations() * m);
}
BENCHMARK(BM_RidgeFit)->Arg(4000)->Arg(16000)->Unit(benchmark::kMillisecond);

// Five lambdas from one Gram matrix, as done during tuning.
void BM_RidgeSweep(benchmark::State& state) {
  const auto X = gaussian(16000, 768, 3);
  const auto y = labels(16000, 8, 4);
  for (auto _ : state) {
    probes::RidgeSystem sys(X, y, 8);
    for (double l : {1e-2, 1e-1, 1.0, 10.0, 100.0}) benchmark::DoNotOptimize(sys.solve(l));
  }
}
BENCHMARK(BM_RidgeSweep)->Unit(benchmark::kMillisecond);

void BM_MlpEpoch(benchmark::State& state) {
  const auto X = gaussian(8000, 768, 5);
  const auto y = labels(8000, 8, 6);
  probes::MlpConfig cfg;
  cfg.epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(probes::fit_mlp(X, y, 8, cfg, 7));
}
BENCHMARK(BM_MlpEpoch)->Unit(benchmark::kMillisecond);

void BM_ForestFit(benchmark::State& state) {
  const auto X = gaussian(4000, 768, 8);
  const auto y = labels(4000, 8, 9);
  probes::ForestConfig cfg;
  cfg.trees = static_cast<int>(state.range(0));
  cfg.max_depth = 8;
  for (auto _ : state) benchmark::DoNotOptimize(probes::fit_forest_ova(X, y, 8, cfg, 10));
}
BENCHMARK(BM_ForestFit)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_PcaSpectrum(benchmark::State& state) {
  const auto X = gaussian(state.range(0), 768, 11);
  for (auto _ : state) benchmark::DoNotOptimize(geometry::pca_spectrum(X));
}
BENCHMARK(BM_PcaSpectrum)->Arg(2000)->Arg(8000)->Unit(benchmark::kMillisecond);

class StoreFixture : public benchmark::Fixture {
 public:
  void SetUp(const benchmark::State&) override {
    path_ = std::filesystem::temp_directory_path() / ("sleuth_bench_" + std::to_string(::getpid()) + ".store");
    store::StoreHeader h;
    h.model_id = "bench";
    h.layer_count = 4;
    h.example_count = 8000;
    h.hidden_dim = 768;
    std::vector<store::LayerMatrix> layers(4);
    Rng rng(12);
    for (int l = 0; l < 4; ++l) {
      auto& lm = layers[static_cast<std::size_t>(l)];
      lm.layer = l;
      lm.rows = h.example_count;
      lm.cols = h.hidden_dim;
      lm.values.resize(lm.rows * lm.cols);
      for (auto& v : lm.values) v = static_cast<float>(rng.uniform());
    }
    store::write_store(path_, h, layers);
  }
  void TearDown(const benchmark::State&) override { std::filesystem::remove(path_); }

 protected:
  std::filesystem::path path_;
};

BENCHMARK_F(StoreFixture, ReadLayer)(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(store::read_layer(path_, 2));
  state.SetBytesProcessed(state.iterations() * 8000 * 768 * 4);
}
BENCHMARK_REGISTER_F(StoreFixture, ReadLayer)->Unit(benchmark::kMillisecond);

void BM_AnalogyRank(benchmark::State& state) {
  store::EmbeddingTable t;
  t.vocab_size = 5000;
  t.dim = 768;
  Rng rng(13);
  t.values.resize(t.vocab_size * t.dim);
  for (auto& v : t.values) v = static_cast<float>(rng.normal());
  for (std::uint32_t w = 0; w < 2000; ++w) {
    t.encodings.push_back({"w" + std::to_string(w), {w, w + 2000}, {w}, false});
  }
  const analogy::AnalogyQuery q{"w1", "w2", "w3", "w4"};
  for (auto _ : state) benchmark::DoNotOptimize(analogy::analogy_rank(q, t, t.encodings, analogy::Mode::subtoken_avg));
}
BENCHMARK(BM_AnalogyRank)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();

#include <algorithm>
#include <tuple>

#include "sleuth/errors.hpp"
#include "sleuth/metrics.hpp"
#include "sleuth/probes.hpp"

namespace sleuth::probes {
namespace {

void check_disjoint(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  std::vector<std::size_t> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  std::vector<std::size_t> common;
  std::set_intersection(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(common));
  if (!common.empty()) {
    throw ProtocolError("train and validation share " + std::to_string(common.size()) + " data points (first id " +
                        std::to_string(common.front()) + ")");
  }
}

int depth_key(int depth) { return depth <= 0 ? std::numeric_limits<int>::max() : depth; }

std::vector<ProbeConfig> ordered_configs(const Grid& grid) {
  std::vector<ProbeConfig> out;
  if (const auto* g = std::get_if<RidgeGrid>(&grid)) {
    auto lambdas = g->lambdas;
    std::stable_sort(lambdas.begin(), lambdas.end());
    for (double l : lambdas) out.emplace_back(l);
  } else if (const auto* g = std::get_if<MlpGrid>(&grid)) {
    auto configs = g->configs;
    std::stable_sort(configs.begin(), configs.end(), [](const MlpConfig& a, const MlpConfig& b) {
      return std::tie(a.epochs, a.learning_rate) < std::tie(b.epochs, b.learning_rate);
    });
    for (const auto& c : configs) out.emplace_back(c);
  } else {
    const auto& fg = std::get<ForestGrid>(grid);
    std::vector<std::pair<int, int>> points;
    for (int t : fg.trees)
      for (int d : fg.depths) points.emplace_back(t, d);
    std::stable_sort(points.begin(), points.end(), [](auto a, auto b) {
      return std::make_pair(a.first, depth_key(a.second)) < std::make_pair(b.first, depth_key(b.second));
    });
    for (auto [t, d] : points) {
      ForestConfig c = fg.base;
      c.trees = t;
      c.max_depth = d;
      out.emplace_back(c);
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(Family family) {
  switch (family) {
    case Family::linear: return "linear";
    case Family::mlp: return "mlp";
    case Family::forest: return "forest";
  }
  return "?";
}

std::optional<Family> family_from_string(std::string_view name) {
  if (name == "linear") return Family::linear;
  if (name == "mlp") return Family::mlp;
  if (name == "forest") return Family::forest;
  return std::nullopt;
}

Family family_of(const ProbeConfig& config) { return static_cast<Family>(config.index()); }

ProbePrediction predict(const Probe& probe, const Matrix& X, bool keep_scores) {
  return std::visit(
      [&](const auto& p) -> ProbePrediction {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, LinearProbe>) {
          return predict_linear(p, X, keep_scores);
        } else if constexpr (std::is_same_v<T, MlpProbe>) {
          return predict_mlp(p, X, keep_scores);
        } else {
          return predict_forest(p, X, keep_scores);
        }
      },
      probe);
}

Probe fit_with(const ProbeConfig& config, const Matrix& X, Labels labels, int num_classes, std::uint64_t seed) {
  switch (family_of(config)) {
    case Family::linear: return fit_ridge(X, labels, num_classes, std::get<double>(config));
    case Family::mlp: return fit_mlp(X, labels, num_classes, std::get<MlpConfig>(config), seed);
    case Family::forest: return fit_forest_ova(X, labels, num_classes, std::get<ForestConfig>(config), seed);
  }
  throw InvalidArgument("unknown probe family");
}

TuneResult tune(const Grid& grid, const LabeledSet& train, const LabeledSet& validation, int num_classes,
                std::uint64_t seed) {
  if (!train.X || !validation.X) throw InvalidArgument("tune needs train and validation matrices");
  check_disjoint(train.ids, validation.ids);
  const auto configs = ordered_configs(grid);
  if (configs.empty()) throw InvalidArgument("empty hyperparameter grid");

  std::optional<RidgeSystem> ridge;
  if (std::holds_alternative<RidgeGrid>(grid)) ridge.emplace(*train.X, train.labels, num_classes);

  std::optional<TuneResult> best;
  std::vector<GridScore> scores;
  for (const auto& config : configs) {
    Probe probe = ridge ? Probe(ridge->solve(std::get<double>(config)))
                        : fit_with(config, *train.X, train.labels, num_classes, seed);
    const auto pred = predict(probe, *validation.X);
    const double acc = metrics::accuracy(pred.classes, validation.labels);
    scores.push_back({config, acc});
    if (!best || acc > best->validation_accuracy) best = TuneResult{config, std::move(probe), acc, {}};
  }
  best->scores = std::move(scores);
  return std::move(*best);
}

}  // namespace sleuth::probes

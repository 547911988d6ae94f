#include <algorithm>
#include <cmath>
#include <numeric>

#include "sleuth/errors.hpp"
#include "sleuth/probes.hpp"
#include "sleuth/random.hpp"

namespace sleuth::probes {
namespace {

struct Candidate {
  int feature = -1;
  float threshold = 0;
  double impurity = 0;  // weighted child Gini, n_l * g_l + n_r * g_r
};

double gini_mass(double pos, double n) {
  if (n <= 0) return 0;
  const double p = pos / n;
  return n * 2.0 * p * (1.0 - p);
}

// A float t with lo <= t < hi, or nullopt when none exists.
std::optional<float> float_between(double lo, double hi) {
  float t = static_cast<float>(0.5 * (lo + hi));
  if (static_cast<double>(t) < lo) t = std::nextafter(t, std::numeric_limits<float>::infinity());
  if (static_cast<double>(t) >= hi) t = std::nextafter(t, -std::numeric_limits<float>::infinity());
  if (static_cast<double>(t) < lo || static_cast<double>(t) >= hi) return std::nullopt;
  return t;
}

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& X, const std::vector<std::uint8_t>& target, const ForestConfig& config, Rng& rng)
      : X_(X), target_(target), config_(config), rng_(rng) {
    features_.resize(static_cast<std::size_t>(X.cols()));
    std::iota(features_.begin(), features_.end(), 0);
    const auto d = static_cast<double>(X.cols());
    max_features_ = config.features == FeatureRule::all
                        ? static_cast<int>(X.cols())
                        : std::max(1, static_cast<int>(std::floor(std::sqrt(d))));
  }

  Tree build(std::vector<std::size_t> sample) {
    Tree tree;
    sample_ = std::move(sample);
    grow(tree, 0, sample_.size(), 0);
    return tree;
  }

 private:
  std::int32_t grow(Tree& tree, std::size_t begin, std::size_t end, int depth) {
    const auto node_id = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    const std::size_t n = end - begin;
    std::size_t pos = 0;
    for (std::size_t i = begin; i < end; ++i) pos += target_[sample_[i]];

    const bool pure = pos == 0 || pos == n;
    const bool depth_reached = config_.max_depth > 0 && depth >= config_.max_depth;
    if (pure || depth_reached || n < static_cast<std::size_t>(std::max(2, config_.min_samples_split))) {
      tree.nodes[node_id].vote = 2 * pos > n ? 1 : 0;
      return node_id;
    }

    const auto best = best_split(begin, end, static_cast<double>(pos));
    if (best.feature < 0) {
      tree.nodes[node_id].vote = 2 * pos > n ? 1 : 0;
      return node_id;
    }
    auto mid = std::partition(sample_.begin() + static_cast<std::ptrdiff_t>(begin),
                              sample_.begin() + static_cast<std::ptrdiff_t>(end), [&](std::size_t r) {
                                return X_(static_cast<Eigen::Index>(r), best.feature) <= static_cast<double>(best.threshold);
                              });
    const auto split = static_cast<std::size_t>(mid - sample_.begin());
    tree.nodes[node_id].feature = best.feature;
    tree.nodes[node_id].threshold = best.threshold;
    const auto left = grow(tree, begin, split, depth + 1);
    const auto right = grow(tree, split, end, depth + 1);
    tree.nodes[node_id].left = left;
    tree.nodes[node_id].right = right;
    return node_id;
  }

  Candidate best_split(std::size_t begin, std::size_t end, double pos_total) {
    const double n_total = static_cast<double>(end - begin);
    Candidate best;
    best.impurity = gini_mass(pos_total, n_total);
    bool found = false;

    // partial Fisher-Yates: first max_features_ entries become the candidates
    for (int k = 0; k < max_features_; ++k) {
      const auto j = static_cast<std::size_t>(k) + rng_.below(features_.size() - static_cast<std::size_t>(k));
      std::swap(features_[static_cast<std::size_t>(k)], features_[j]);
    }
    for (int k = 0; k < max_features_; ++k) {
      const int f = features_[static_cast<std::size_t>(k)];
      values_.clear();
      for (std::size_t i = begin; i < end; ++i) {
        const auto r = sample_[i];
        values_.emplace_back(X_(static_cast<Eigen::Index>(r), f), target_[r]);
      }
      std::sort(values_.begin(), values_.end());
      double left_n = 0, left_pos = 0;
      for (std::size_t i = 0; i + 1 < values_.size(); ++i) {
        left_n += 1;
        left_pos += values_[i].second;
        if (values_[i].first == values_[i + 1].first) continue;
        const double impurity =
            gini_mass(left_pos, left_n) + gini_mass(pos_total - left_pos, n_total - left_n);
        if (impurity < best.impurity - 1e-12 || (!found && impurity <= best.impurity)) {
          const auto t = float_between(values_[i].first, values_[i + 1].first);
          if (!t) continue;
          best = {f, *t, impurity};
          found = true;
        }
      }
    }
    if (!found) best.feature = -1;
    return best;
  }

  const Matrix& X_;
  const std::vector<std::uint8_t>& target_;
  const ForestConfig& config_;
  Rng& rng_;
  std::vector<int> features_;
  int max_features_ = 1;
  std::vector<std::size_t> sample_;
  std::vector<std::pair<double, std::uint8_t>> values_;
};

}  // namespace

int Tree::predict(std::span<const double> x) const {
  std::size_t node = 0;
  while (nodes[node].feature >= 0) {
    const auto& n = nodes[node];
    node = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= static_cast<double>(n.threshold) ? n.left
                                                                                                                 : n.right);
  }
  return nodes[node].vote;
}

Matrix ForestProbe::scores(const Matrix& X) const {
  Matrix out = Matrix::Zero(X.rows(), num_classes());
  std::vector<double> row(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index r = 0; r < X.rows(); ++r) {
    for (Eigen::Index c = 0; c < X.cols(); ++c) row[static_cast<std::size_t>(c)] = X(r, c);
    for (int j = 0; j < num_classes(); ++j) {
      const auto& ensemble = ensembles[static_cast<std::size_t>(j)];
      int votes = 0;
      for (const auto& tree : ensemble) votes += tree.predict(row);
      out(r, j) = ensemble.empty() ? 0.0 : static_cast<double>(votes) / static_cast<double>(ensemble.size());
    }
  }
  return out;
}

ForestProbe fit_forest_ova(const Matrix& X, Labels labels, int num_classes, const ForestConfig& config,
                           std::uint64_t seed) {
  if (num_classes > config.class_ceiling) {
    throw GuardError("forest disabled for high-cardinality task (" + std::to_string(num_classes) + " classes > ceiling " +
                     std::to_string(config.class_ceiling) + ")");
  }
  if (num_classes < 2) throw InvalidArgument("forest needs at least two classes");
  if (config.trees < 1) throw InvalidArgument("forest needs at least one tree per class");
  if (static_cast<Eigen::Index>(labels.size()) != X.rows() || X.rows() == 0) {
    throw DimensionError("label count does not match row count");
  }
  if (!X.allFinite()) throw InvalidArgument("X contains NaN or Inf");
  std::vector<std::size_t> class_counts(static_cast<std::size_t>(num_classes), 0);
  for (int y : labels) {
    if (y < 0 || y >= num_classes) throw InvalidArgument("label outside [0, num_classes)");
    ++class_counts[static_cast<std::size_t>(y)];
  }
  const auto present = std::count_if(class_counts.begin(), class_counts.end(), [](auto c) { return c > 0; });
  if (present < 2) throw InvalidArgument("forest training data holds a single class");

  ForestProbe probe;
  probe.config = config;
  probe.seed = seed;
  probe.ensembles.resize(static_cast<std::size_t>(num_classes));
  const auto m = static_cast<std::size_t>(X.rows());
  std::vector<std::uint8_t> target(m);

  for (int j = 0; j < num_classes; ++j) {
    // Classes without training examples get an ensemble that never votes.
    if (class_counts[static_cast<std::size_t>(j)] == 0) {
      Tree never;
      never.nodes.push_back(TreeNode{});
      probe.ensembles[static_cast<std::size_t>(j)].assign(static_cast<std::size_t>(config.trees), never);
      continue;
    }
    for (std::size_t i = 0; i < m; ++i) target[i] = labels[i] == j ? 1 : 0;
    auto& ensemble = probe.ensembles[static_cast<std::size_t>(j)];
    for (int t = 0; t < config.trees; ++t) {
      auto rng = Rng::derived(seed, static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(t));
      std::vector<std::size_t> sample(m);
      if (config.bootstrap) {
        for (auto& s : sample) s = rng.below(m);
      } else {
        std::iota(sample.begin(), sample.end(), 0);
      }
      TreeBuilder builder(X, target, config, rng);
      ensemble.push_back(builder.build(std::move(sample)));
    }
  }
  return probe;
}

ProbePrediction predict_forest(const ForestProbe& probe, const Matrix& X, bool keep_scores) {
  if (!probe.ensembles.empty() && !probe.ensembles.front().empty()) {
    int max_feature = -1;
    for (const auto& e : probe.ensembles)
      for (const auto& t : e)
        for (const auto& n : t.nodes) max_feature = std::max(max_feature, static_cast<int>(n.feature));
    if (max_feature >= X.cols()) throw DimensionError("X has fewer columns than the forest was trained on");
  }
  ProbePrediction out;
  Matrix s = probe.scores(X);
  out.classes = argmax_rows(s);
  if (keep_scores) out.scores = std::move(s);
  return out;
}

}  // namespace sleuth::probes

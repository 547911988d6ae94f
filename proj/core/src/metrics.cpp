#include "sleuth/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "sleuth/errors.hpp"

namespace sleuth::metrics {
namespace {

void check_pair(std::span<const int> pred, std::span<const int> gold) {
  if (pred.size() != gold.size()) {
    throw DimensionError("prediction and gold lengths differ (" + std::to_string(pred.size()) + " vs " +
                         std::to_string(gold.size()) + ")");
  }
  if (gold.empty()) throw InvalidArgument("metrics need at least one example");
}

}  // namespace

double accuracy(std::span<const int> pred, std::span<const int> gold) {
  check_pair(pred, gold);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) hits += pred[i] == gold[i];
  return static_cast<double>(hits) / static_cast<double>(gold.size());
}

double macro_f1(std::span<const int> pred, std::span<const int> gold, std::span<const int> classes) {
  check_pair(pred, gold);
  if (classes.empty()) throw InvalidArgument("macro-F1 needs a non-empty class set");
  std::unordered_map<int, std::size_t> index;
  for (std::size_t k = 0; k < classes.size(); ++k) index.emplace(classes[k], k);
  std::vector<double> tp(classes.size(), 0), fp(classes.size(), 0), fn(classes.size(), 0);
  for (std::size_t i = 0; i < gold.size(); ++i) {
    auto g = index.find(gold[i]);
    if (g == index.end()) throw InvalidArgument("gold label " + std::to_string(gold[i]) + " not in class set");
    auto p = index.find(pred[i]);
    if (pred[i] == gold[i]) {
      tp[g->second] += 1;
    } else {
      fn[g->second] += 1;
      if (p != index.end()) fp[p->second] += 1;
    }
  }
  double sum = 0;
  for (std::size_t k = 0; k < classes.size(); ++k) {
    const double denom = 2 * tp[k] + fp[k] + fn[k];
    sum += denom > 0 ? 2 * tp[k] / denom : 0.0;
  }
  return sum / static_cast<double>(classes.size());
}

double macro_f1(std::span<const int> pred, std::span<const int> gold, int num_classes) {
  if (num_classes < 1) throw InvalidArgument("macro-F1 needs a non-empty class set");
  std::vector<int> classes(static_cast<std::size_t>(num_classes));
  std::iota(classes.begin(), classes.end(), 0);
  return macro_f1(pred, gold, classes);
}

double selectivity(double linguistic_accuracy, double control_accuracy) { return linguistic_accuracy - control_accuracy; }

double separability_gap(double nonlinear_accuracy, double linear_accuracy) { return nonlinear_accuracy - linear_accuracy; }

TrendFit layer_trend(std::span<const double> accuracies) {
  const std::size_t n = accuracies.size();
  if (n < 2) throw InvalidArgument("layer trend needs at least two layers");
  const double last = static_cast<double>(n - 1);
  double mean_t = 0, mean_y = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_t += static_cast<double>(i) / last;
    mean_y += accuracies[i];
  }
  mean_t /= static_cast<double>(n);
  mean_y /= static_cast<double>(n);
  double stt = 0, sty = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dt = static_cast<double>(i) / last - mean_t;
    const double dy = accuracies[i] - mean_y;
    stt += dt * dt;
    sty += dt * dy;
    syy += dy * dy;
  }
  TrendFit fit;
  fit.slope = sty / stt;
  fit.intercept = mean_y - fit.slope * mean_t;
  double ss_res = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = accuracies[i] - (fit.intercept + fit.slope * static_cast<double>(i) / last);
    ss_res += r * r;
  }
  // Flat data: a perfect (zero-residual) fit by convention.
  const double scale = std::max(1.0, syy);
  if (syy <= 1e-24 * scale) {
    fit.slope = 0;
    fit.r_squared = ss_res <= 1e-24 ? 1.0 : 0.0;
  } else {
    fit.r_squared = std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
  }
  return fit;
}

std::map<std::string, GroupCount> group_counts(std::span<const int> pred, std::span<const int> gold,
                                               std::span<const std::string> groups) {
  check_pair(pred, gold);
  if (groups.size() != gold.size()) throw DimensionError("group vector length differs from gold");
  std::map<std::string, GroupCount> out;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    auto& c = out[groups[i]];
    c.correct += pred[i] == gold[i];
    ++c.total;
  }
  return out;
}

std::map<std::string, double> group_breakdown(std::span<const std::vector<int>> per_layer_pred,
                                              std::span<const int> gold, std::span<const std::string> groups) {
  if (groups.empty()) throw InvalidArgument("group breakdown needs at least one grouped example");
  if (per_layer_pred.empty()) throw InvalidArgument("group breakdown needs at least one layer");
  std::map<std::string, double> sums;
  for (const auto& pred : per_layer_pred) {
    for (const auto& [group, c] : group_counts(pred, gold, groups)) {
      sums[group] += static_cast<double>(c.correct) / static_cast<double>(c.total);
    }
  }
  for (auto& [group, s] : sums) s /= static_cast<double>(per_layer_pred.size());
  return sums;
}

}  // namespace sleuth::metrics

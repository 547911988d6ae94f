#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

namespace sleuth::metrics {

double accuracy(std::span<const int> pred, std::span<const int> gold);

// Unweighted mean of per-class F1 over classes 0..num_classes-1. A class with
// P + R = 0 (including one absent from both vectors) contributes 0.
double macro_f1(std::span<const int> pred, std::span<const int> gold, int num_classes);

// Same, over an explicit class set.
double macro_f1(std::span<const int> pred, std::span<const int> gold, std::span<const int> classes);

// linguistic - control
double selectivity(double linguistic_accuracy, double control_accuracy);

// nonlinear - linear
double separability_gap(double nonlinear_accuracy, double linear_accuracy);

struct TrendFit {
  double slope = 0;
  double intercept = 0;
  double r_squared = 0;
};

// OLS of accuracy on normalized depth t = layer / (L - 1).
TrendFit layer_trend(std::span<const double> accuracies);

// Mean over layers of per-group accuracy. `per_layer_pred[l]` holds the
// predictions of the layer-l probe for the same examples as `gold`.
std::map<std::string, double> group_breakdown(std::span<const std::vector<int>> per_layer_pred,
                                              std::span<const int> gold,
                                              std::span<const std::string> groups);

// Per-group (correct, total) counts for one layer.
struct GroupCount {
  std::size_t correct = 0;
  std::size_t total = 0;
};
std::map<std::string, GroupCount> group_counts(std::span<const int> pred, std::span<const int> gold,
                                               std::span<const std::string> groups);

}  // namespace sleuth::metrics

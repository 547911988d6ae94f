#pragma once

#include <Eigen/Dense>
#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sleuth::geometry {

struct VarianceSpectrum {
  int layer = 0;
  // Explained-variance ratios, descending, zero-padded to d entries.
  std::vector<double> ratios;
  int effective_rank = 0;
};

// PCA spectrum from the singular values of the column-centred data
// (covariance divisor m - 1). Throws DegenerateSpectrumError when all rows
// are identical.
VarianceSpectrum pca_spectrum(const Eigen::MatrixXd& X, int layer = 0);

// Smallest k >= 1 whose cumulative ratio reaches threshold/100; 100 maps to
// the effective rank.
int intrinsic_dim(const VarianceSpectrum& spectrum, double threshold_percent);

inline const std::vector<double> kDefaultThresholds = {50, 60, 70, 80, 90, 95, 99, 100};

struct LayerDims {
  int layer = 0;
  int hidden_dim = 0;
  std::map<double, int> id;  // threshold -> ID
  std::optional<std::string> error;  // set when the layer's spectrum is degenerate

  double fraction(double threshold) const { return static_cast<double>(id.at(threshold)) / hidden_dim; }
};

struct DimProfile {
  std::vector<LayerDims> layers;
  std::vector<double> thresholds;

  // First, middle (floor(L/2)) and final layer indices.
  std::array<int, 3> summary_layers() const;
};

// Per-layer profile from a validated store. `rows` restricts PCA to a
// subset of examples (the training split by default in the CLI); empty
// means all rows. Degenerate layers are recorded with their error and
// skipped when `continue_on_degenerate` is set, otherwise rethrown tagged
// with the layer index.
DimProfile dim_profile(const std::filesystem::path& store, std::span<const double> thresholds,
                       std::span<const std::size_t> rows = {}, bool continue_on_degenerate = false);

// Profile over in-memory layer matrices (used by tests and dim_profile).
DimProfile dim_profile(std::span<const Eigen::MatrixXd> layers, std::span<const double> thresholds,
                       bool continue_on_degenerate = false);

}  // namespace sleuth::geometry

#include "sleuth/geometry.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <limits>

#include "sleuth/errors.hpp"
#include "sleuth/tensorstore.hpp"

namespace sleuth::geometry {
namespace {

// Slack on the cumulative-ratio comparison; ratios are sums of many terms.
constexpr double kCumulativeSlack = 1e-12;

Eigen::MatrixXd to_matrix(const store::LayerMatrix& m) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(m.rows), static_cast<Eigen::Index>(m.cols));
  for (std::uint64_t r = 0; r < m.rows; ++r) {
    for (std::uint64_t c = 0; c < m.cols; ++c) {
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = static_cast<double>(m.at(r, c));
    }
  }
  return out;
}

LayerDims layer_dims(const Eigen::MatrixXd& X, int layer, std::span<const double> thresholds, bool keep_going) {
  LayerDims dims;
  dims.layer = layer;
  dims.hidden_dim = static_cast<int>(X.cols());
  try {
    const auto spectrum = pca_spectrum(X, layer);
    for (double t : thresholds) dims.id[t] = intrinsic_dim(spectrum, t);
  } catch (const DegenerateSpectrumError& e) {
    if (!keep_going) throw DegenerateSpectrumError("layer " + std::to_string(layer) + ": " + e.what());
    dims.error = e.what();
  }
  return dims;
}

}  // namespace

VarianceSpectrum pca_spectrum(const Eigen::MatrixXd& X, int layer) {
  if (X.rows() < 2) throw InvalidArgument("PCA needs at least two rows");
  if (X.cols() < 1) throw InvalidArgument("PCA needs at least one column");
  if (!X.allFinite()) throw InvalidArgument("PCA input contains NaN or Inf");

  const Eigen::RowVectorXd mean = X.colwise().mean();
  const Eigen::MatrixXd centered = X.rowwise() - mean;
  const double scale = X.cwiseAbs().maxCoeff();

  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double top = sv.size() > 0 ? sv(0) : 0.0;
  const double eps = std::numeric_limits<double>::epsilon();
  if (top <= eps * std::max(scale, eps) * std::sqrt(static_cast<double>(X.rows() * X.cols()))) {
    throw DegenerateSpectrumError("zero total variance (all rows identical)");
  }

  const double tol = top * static_cast<double>(std::max(X.rows(), X.cols())) * eps;
  const auto max_rank = std::min<Eigen::Index>(X.rows() - 1, X.cols());
  VarianceSpectrum out;
  out.layer = layer;
  out.ratios.assign(static_cast<std::size_t>(X.cols()), 0.0);
  double total = 0;
  for (Eigen::Index i = 0; i < std::min(max_rank, sv.size()); ++i) {
    if (sv(i) <= tol) break;
    const double var = sv(i) * sv(i) / static_cast<double>(X.rows() - 1);
    out.ratios[static_cast<std::size_t>(i)] = var;
    total += var;
    ++out.effective_rank;
  }
  for (auto& r : out.ratios) r /= total;
  return out;
}

int intrinsic_dim(const VarianceSpectrum& spectrum, double threshold_percent) {
  if (!(threshold_percent > 0 && threshold_percent <= 100)) {
    throw InvalidArgument("threshold must lie in (0, 100]");
  }
  if (spectrum.effective_rank < 1) throw InvalidArgument("spectrum has no variance");
  if (threshold_percent >= 100) return spectrum.effective_rank;
  const double target = threshold_percent / 100.0 - kCumulativeSlack;
  double cumulative = 0;
  for (int k = 0; k < spectrum.effective_rank; ++k) {
    cumulative += spectrum.ratios[static_cast<std::size_t>(k)];
    if (cumulative >= target) return k + 1;
  }
  return spectrum.effective_rank;
}

std::array<int, 3> DimProfile::summary_layers() const {
  if (layers.empty()) throw InvalidArgument("empty dimensionality profile");
  const int count = static_cast<int>(layers.size());
  return {layers.front().layer, layers[static_cast<std::size_t>(count / 2)].layer, layers.back().layer};
}

DimProfile dim_profile(std::span<const Eigen::MatrixXd> layers, std::span<const double> thresholds,
                       bool continue_on_degenerate) {
  DimProfile profile;
  profile.thresholds.assign(thresholds.begin(), thresholds.end());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    profile.layers.push_back(layer_dims(layers[l], static_cast<int>(l), thresholds, continue_on_degenerate));
  }
  return profile;
}

DimProfile dim_profile(const std::filesystem::path& path, std::span<const double> thresholds,
                       std::span<const std::size_t> rows, bool continue_on_degenerate) {
  const auto layout = store::read_layout(path);
  DimProfile profile;
  profile.thresholds.assign(thresholds.begin(), thresholds.end());
  for (std::uint32_t l = 0; l < layout.header.layer_count; ++l) {
    const auto layer = static_cast<std::int32_t>(l);
    const auto m = rows.empty() ? store::read_layer(path, layer) : store::read_layer_rows(path, layer, rows);
    profile.layers.push_back(layer_dims(to_matrix(m), layer, thresholds, continue_on_degenerate));
  }
  return profile;
}

}  // namespace sleuth::geometry

#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace sleuth::probes {

using Matrix = Eigen::MatrixXd;
using Labels = std::span<const int>;

// Dense one-hot {0,1} targets, m x num_classes.
Matrix one_hot(Labels labels, int num_classes);

struct ProbePrediction {
  std::vector<int> classes;
  std::optional<Matrix> scores;  // n x c when requested
};

// Row-wise argmax, lowest index wins ties.
std::vector<int> argmax_rows(const Matrix& scores);

// --- linear (closed-form ridge) -------------------------------------------------

struct LinearProbe {
  Matrix weights;  // d x c
  double lambda = 0;
  std::vector<std::string> class_names;

  int num_classes() const { return static_cast<int>(weights.cols()); }
};

// Normal equations (X'X + lambda I) W = X'Y via Cholesky. Throws
// SingularSystemError when lambda = 0 and X'X is not invertible.
LinearProbe fit_ridge(const Matrix& X, const Matrix& Y, double lambda);
LinearProbe fit_ridge(const Matrix& X, Labels labels, int num_classes, double lambda);

// ||(X'X + lambda I) W - X'Y||_inf / max(1, ||X'Y||_inf)
double normal_equation_residual(const Matrix& X, const Matrix& Y, const Matrix& W, double lambda);

// Gram matrix and X'Y computed once, solved for several lambdas. X'Y is
// accumulated from integer labels so the one-hot matrix is never formed.
class RidgeSystem {
 public:
  RidgeSystem(const Matrix& X, Labels labels, int num_classes);
  RidgeSystem(const Matrix& X, const Matrix& Y);

  LinearProbe solve(double lambda) const;
  double residual(const Matrix& W, double lambda) const;

 private:
  Matrix gram_;  // X'X
  Matrix xty_;   // X'Y
};

ProbePrediction predict_linear(const LinearProbe& probe, const Matrix& X, bool keep_scores = false);

// --- MLP ------------------------------------------------------------------------

struct MlpConfig {
  int hidden = 64;
  int epochs = 20;
  double learning_rate = 1e-3;
  double weight_decay = 1e-2;
  int batch_size = 256;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct MlpProbe {
  Matrix w1;  // d x h
  Matrix w2;  // h x c
  MlpConfig config;
  std::uint64_t seed = 0;
  std::vector<double> epoch_loss;  // mean training cross-entropy after each epoch
  std::vector<std::string> class_names;

  int num_classes() const { return static_cast<int>(w2.cols()); }
};

struct MlpLossGrad {
  double loss = 0;
  Matrix grad_w1;
  Matrix grad_w2;
};

// Mean cross-entropy of softmax(ReLU(X W1) W2) against integer labels and
// its gradients. No bias terms.
MlpLossGrad mlp_loss_grad(const Matrix& X, Labels labels, const Matrix& w1, const Matrix& w2);
double mlp_loss(const Matrix& X, Labels labels, const Matrix& w1, const Matrix& w2);

// AdamW on mini-batches. Throws DivergenceError when the loss stops being
// finite.
MlpProbe fit_mlp(const Matrix& X, Labels labels, int num_classes, const MlpConfig& config, std::uint64_t seed);
ProbePrediction predict_mlp(const MlpProbe& probe, const Matrix& X, bool keep_scores = false);

// --- random forest, one-vs-all --------------------------------------------------

enum class FeatureRule { sqrt, all };

struct ForestConfig {
  int trees = 100;
  int max_depth = 0;  // 0 = unlimited
  FeatureRule features = FeatureRule::sqrt;
  int min_samples_split = 2;
  bool bootstrap = true;
  int class_ceiling = 512;
};

// Flat binary tree. Leaves have feature == -1 and `vote` in {0, 1}.
struct TreeNode {
  std::int32_t feature = -1;
  float threshold = 0;  // go left when x <= threshold
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::uint8_t vote = 0;
};

struct Tree {
  std::vector<TreeNode> nodes;
  int predict(std::span<const double> x) const;
};

struct ForestProbe {
  std::vector<std::vector<Tree>> ensembles;  // one ensemble per class
  ForestConfig config;
  std::uint64_t seed = 0;
  std::vector<std::string> class_names;

  int num_classes() const { return static_cast<int>(ensembles.size()); }
  // s_j(x) for every class: fraction of trees voting positive.
  Matrix scores(const Matrix& X) const;
};

// Throws InvalidArgument for fewer than two classes and GuardError when
// num_classes exceeds config.class_ceiling.
ForestProbe fit_forest_ova(const Matrix& X, Labels labels, int num_classes, const ForestConfig& config,
                           std::uint64_t seed);
ProbePrediction predict_forest(const ForestProbe& probe, const Matrix& X, bool keep_scores = false);

// --- any probe ------------------------------------------------------------------

enum class Family { linear, mlp, forest };
std::string_view to_string(Family family);
std::optional<Family> family_from_string(std::string_view name);

using Probe = std::variant<LinearProbe, MlpProbe, ForestProbe>;
ProbePrediction predict(const Probe& probe, const Matrix& X, bool keep_scores = false);

// --- tuning ---------------------------------------------------------------------

struct LabeledSet {
  const Matrix* X = nullptr;
  Labels labels;
  std::span<const std::size_t> ids;  // data point ids, for the overlap check
};

struct RidgeGrid {
  std::vector<double> lambdas = {1e-2, 1e-1, 1.0, 10.0, 100.0};
};
struct MlpGrid {
  std::vector<MlpConfig> configs = {MlpConfig{}};
};
struct ForestGrid {
  std::vector<int> trees = {50, 100};
  std::vector<int> depths = {8, 16, 0};
  ForestConfig base{};
};
using Grid = std::variant<RidgeGrid, MlpGrid, ForestGrid>;

using ProbeConfig = std::variant<double, MlpConfig, ForestConfig>;  // lambda | mlp | forest

struct GridScore {
  ProbeConfig config;
  double validation_accuracy = 0;
};

struct TuneResult {
  ProbeConfig config;
  Probe probe;
  double validation_accuracy = 0;
  std::vector<GridScore> scores;  // in tie-break order
};

// Fits one probe per grid point on `train`, keeps the best validation
// accuracy. Ties go to the smaller lambda, fewer trees (then shallower
// trees), or fewer epochs (then smaller learning rate). ProtocolError when
// train and validation ids overlap.
TuneResult tune(const Grid& grid, const LabeledSet& train, const LabeledSet& validation, int num_classes, std::uint64_t seed);

// Fit with a fixed configuration (used for control tasks, which reuse the
// linguistic task's tuned hyperparameters).
Probe fit_with(const ProbeConfig& config, const Matrix& X, Labels labels, int num_classes, std::uint64_t seed);

Family family_of(const ProbeConfig& config);

// --- serialization --------------------------------------------------------------

// `<base>.json` holds family, configuration, seed and class map; `<base>.bin`
// is a single-layer tensorstore container with the weights. The blob's
// alignment digest is the manifest digest the probe was trained against.
void save_probe(const Probe& probe, const std::filesystem::path& base, const std::array<std::uint8_t, 32>& digest);
Probe load_probe(const std::filesystem::path& base);

}  // namespace sleuth::probes

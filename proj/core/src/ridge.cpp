#include <cmath>

#include "sleuth/errors.hpp"
#include "sleuth/probes.hpp"

namespace sleuth::probes {
namespace {

constexpr double kResidualTolerance = 1e-6;
// Below this reciprocal condition number an unregularised Gram matrix is
// treated as singular.
constexpr double kMinRcond = 1e-13;

void require_finite(const Matrix& M, const char* what) {
  if (!M.allFinite()) throw InvalidArgument(std::string(what) + " contains NaN or Inf");
}

void check_labels(Labels labels, int num_classes, Eigen::Index rows) {
  if (static_cast<Eigen::Index>(labels.size()) != rows) throw DimensionError("label count does not match row count");
  for (int y : labels) {
    if (y < 0 || y >= num_classes) throw InvalidArgument("label " + std::to_string(y) + " outside [0, num_classes)");
  }
}

Matrix gram_of(const Matrix& X) {
  Matrix gram = Matrix::Zero(X.cols(), X.cols());
  gram.selfadjointView<Eigen::Lower>().rankUpdate(X.transpose());
  return gram.selfadjointView<Eigen::Lower>();
}

// Elementwise max-abs residual of the normal equations, relative to X'Y.
double residual_of(const Matrix& gram, const Matrix& xty, const Matrix& W, double lambda) {
  const Matrix r = gram * W + lambda * W - xty;
  const double scale = std::max(1.0, xty.cwiseAbs().maxCoeff());
  return r.cwiseAbs().maxCoeff() / scale;
}

}  // namespace

Matrix one_hot(Labels labels, int num_classes) {
  Matrix Y = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) throw InvalidArgument("label outside [0, num_classes)");
    Y(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  return Y;
}

std::vector<int> argmax_rows(const Matrix& scores) {
  std::vector<int> out(static_cast<std::size_t>(scores.rows()), 0);
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    int best = 0;
    for (Eigen::Index c = 1; c < scores.cols(); ++c) {
      if (scores(r, c) > scores(r, best)) best = static_cast<int>(c);
    }
    out[static_cast<std::size_t>(r)] = best;
  }
  return out;
}

RidgeSystem::RidgeSystem(const Matrix& X, Labels labels, int num_classes) {
  if (X.rows() < 1) throw InvalidArgument("ridge needs at least one example");
  if (num_classes < 1) throw InvalidArgument("ridge needs at least one class");
  require_finite(X, "X");
  check_labels(labels, num_classes, X.rows());
  gram_ = gram_of(X);
  xty_ = Matrix::Zero(X.cols(), num_classes);
  for (Eigen::Index i = 0; i < X.rows(); ++i) xty_.col(labels[static_cast<std::size_t>(i)]) += X.row(i).transpose();
}

RidgeSystem::RidgeSystem(const Matrix& X, const Matrix& Y) {
  if (X.rows() < 1) throw InvalidArgument("ridge needs at least one example");
  if (Y.rows() != X.rows()) throw DimensionError("X and Y have different row counts");
  require_finite(X, "X");
  require_finite(Y, "Y");
  gram_ = gram_of(X);
  xty_ = X.transpose() * Y;
}

LinearProbe RidgeSystem::solve(double lambda) const {
  if (!(lambda >= 0) || !std::isfinite(lambda)) throw InvalidArgument("lambda must be a finite nonnegative number");
  Matrix A = gram_;
  A.diagonal().array() += lambda;
  Eigen::LLT<Matrix> llt(A);
  const bool singular = llt.info() != Eigen::Success || (A.rows() > 0 && llt.rcond() < kMinRcond);
  if (singular) {
    if (lambda == 0) throw SingularSystemError("X'X is singular; use lambda > 0");
    throw SingularSystemError("ridge system is not positive definite at lambda " + std::to_string(lambda));
  }
  LinearProbe probe;
  probe.lambda = lambda;
  probe.weights = llt.solve(xty_);
  if (!probe.weights.allFinite()) throw SingularSystemError("ridge solution is not finite");
  if (residual(probe.weights, lambda) > kResidualTolerance) {
    throw SingularSystemError("normal-equation residual above tolerance; system is ill-conditioned, increase lambda");
  }
  return probe;
}

double RidgeSystem::residual(const Matrix& W, double lambda) const { return residual_of(gram_, xty_, W, lambda); }

LinearProbe fit_ridge(const Matrix& X, const Matrix& Y, double lambda) { return RidgeSystem(X, Y).solve(lambda); }

LinearProbe fit_ridge(const Matrix& X, Labels labels, int num_classes, double lambda) {
  return RidgeSystem(X, labels, num_classes).solve(lambda);
}

double normal_equation_residual(const Matrix& X, const Matrix& Y, const Matrix& W, double lambda) {
  return residual_of(gram_of(X), X.transpose() * Y, W, lambda);
}

ProbePrediction predict_linear(const LinearProbe& probe, const Matrix& X, bool keep_scores) {
  if (X.cols() != probe.weights.rows()) {
    throw DimensionError("X has " + std::to_string(X.cols()) + " columns, probe expects " +
                         std::to_string(probe.weights.rows()));
  }
  ProbePrediction out;
  // Blocked so that lemma-sized score matrices are never held in full.
  constexpr Eigen::Index kBlock = 2048;
  out.classes.reserve(static_cast<std::size_t>(X.rows()));
  if (keep_scores) out.scores = Matrix(X.rows(), probe.weights.cols());
  for (Eigen::Index start = 0; start < X.rows(); start += kBlock) {
    const auto n = std::min(kBlock, X.rows() - start);
    const Matrix scores = X.middleRows(start, n) * probe.weights;
    auto block = argmax_rows(scores);
    out.classes.insert(out.classes.end(), block.begin(), block.end());
    if (keep_scores) out.scores->middleRows(start, n) = scores;
  }
  return out;
}

}  // namespace sleuth::probes

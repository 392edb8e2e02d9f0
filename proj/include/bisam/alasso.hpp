#pragma once

#include <vector>

#include <Eigen/Dense>

#include "bisam/panel.hpp"
#include "bisam/parallel.hpp"

namespace bisam {

enum class LambdaSelection { bic, cv };

struct AlassoConfig {
  /// Absolute ridge penalties searched by generalized cross-validation.
  std::vector<double> ridge_lambda_grid;
  /// Lasso penalties as fractions of lambda_max, the smallest penalty
  /// at which every break coefficient is zero.
  std::vector<double> lasso_lambda_grid;
  LambdaSelection selection = LambdaSelection::bic;
  double weight_power = 1.0;
  /// Convergence is declared when the largest KKT violation is below tol.
  double tol = 1e-9;
  int max_iter = 20000;
  int cv_folds = 5;

  /// 30 ridge penalties in [1e-4, 1e4] and 60 lasso fractions in [1e-2, 1].
  static AlassoConfig defaults();
  void validate() const;
};

/// Adaptive weights are capped here so exactly-zero ridge coefficients
/// never produce an infinite penalty.
inline constexpr double max_adaptive_weight = 1e12;

struct WeightedLassoFit {
  Eigen::VectorXd coef;         // penalized block
  Eigen::VectorXd unpenalized;  // unpenalized block
  int sweeps = 0;
  bool converged = false;
  double kkt_violation = 0.0;
};

/// Minimizes 1/2 ||y - U b - X g||^2 + lambda * sum_j w_j |g_j| by cyclical
/// coordinate descent on the problem with U profiled out. U may have no
/// columns; it must have full column rank otherwise.
WeightedLassoFit weighted_lasso(const Eigen::MatrixXd& X, const Eigen::MatrixXd& U,
                                const Eigen::VectorXd& y, const Eigen::VectorXd& weights,
                                double lambda, double tol = 1e-9, int max_iter = 20000);

struct RidgeFit {
  double lambda = 0.0;
  double gcv = 0.0;
  Eigen::VectorXd coef;  // break block
};

/// Ridge on the break columns with the mean block unpenalized; lambda by GCV.
RidgeFit ridge_gcv(const SaturatedDesign& design, const Eigen::VectorXd& y,
                   const std::vector<double>& grid);

struct AlassoPathPoint {
  double lambda = 0.0;
  double criterion = 0.0;
  int n_selected = 0;
  int sweeps = 0;
  bool converged = false;
};

struct AlassoResult {
  std::vector<BreakCandidate> detected;
  Eigen::VectorXd beta;
  Eigen::VectorXd gamma;
  Eigen::VectorXd weights;
  double ridge_lambda = 0.0;
  double lambda_max = 0.0;
  double lasso_lambda = 0.0;
  double kkt_violation = 0.0;
  std::vector<AlassoPathPoint> path;
};

/// Two-stage adaptive LASSO break detector. Stage one: ridge weights
/// |g_ridge|^-power. Stage two: weighted l1 fit over the lasso grid,
/// penalty chosen by BIC (or K-fold CV). Detected breaks are the nonzero
/// break coefficients. Error: "coordinate descent did not converge" when
/// no grid point converges.
AlassoResult alasso_detect(const SaturatedDesign& design, const Eigen::VectorXd& y,
                           const AlassoConfig& config, Execution exec = Execution::parallel);

}  // namespace bisam

#include "bisam/alasso.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "bisam/error.hpp"

namespace bisam {

namespace {

std::vector<double> log_spaced(double from, double to, int count) {
  std::vector<double> out(static_cast<std::size_t>(count));
  const double a = std::log(from);
  const double b = std::log(to);
  for (int k = 0; k < count; ++k) out[k] = std::exp(a + (b - a) * k / (count - 1));
  return out;
}

double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

// Penalized block of the least-squares problem after projecting out the
// unpenalized columns: only the Gram matrix G = X~'X~ and c = X~'y~ are
// needed by coordinate descent.
class ProfiledProblem {
 public:
  ProfiledProblem(const Eigen::MatrixXd& X, const Eigen::MatrixXd& U, const Eigen::VectorXd& y)
      : X_(X), y_(y), has_u_(U.cols() > 0) {
    Eigen::MatrixXd Xt = X;
    Eigen::VectorXd yt = y;
    if (has_u_) {
      qr_.compute(U);
      const Eigen::MatrixXd Q = qr_.householderQ() * Eigen::MatrixXd::Identity(U.rows(), U.cols());
      Xt.noalias() -= Q * (Q.transpose() * X);
      yt.noalias() -= Q * (Q.transpose() * y);
    }
    gram_ = Xt.transpose() * Xt;
    corr_ = Xt.transpose() * yt;
    yy_ = yt.squaredNorm();
  }

  const Eigen::MatrixXd& gram() const { return gram_; }
  const Eigen::VectorXd& corr() const { return corr_; }

  double rss(const Eigen::VectorXd& g) const {
    return std::max(yy_ - 2.0 * corr_.dot(g) + g.dot(gram_ * g), 0.0);
  }

  Eigen::VectorXd unpenalized(const Eigen::VectorXd& g) const {
    if (!has_u_) return Eigen::VectorXd(0);
    return qr_.solve(Eigen::VectorXd(y_ - X_ * g));
  }

  double lambda_max(const Eigen::VectorXd& w) const {
    double out = 0.0;
    for (Eigen::Index j = 0; j < corr_.size(); ++j) out = std::max(out, std::abs(corr_(j)) / w(j));
    return out;
  }

  double kkt_violation(const Eigen::VectorXd& g, const Eigen::VectorXd& gg,
                       const Eigen::VectorXd& w, double lambda) const {
    double worst = 0.0;
    for (Eigen::Index j = 0; j < g.size(); ++j) {
      const double grad = corr_(j) - gg(j);
      const double pen = lambda * w(j);
      const double v = g(j) != 0.0 ? std::abs(grad - pen * (g(j) > 0.0 ? 1.0 : -1.0))
                                   : std::max(0.0, std::abs(grad) - pen);
      worst = std::max(worst, v);
    }
    return worst;
  }

  WeightedLassoFit solve(const Eigen::VectorXd& w, double lambda, double tol, int max_iter) const {
    const Eigen::Index q = corr_.size();
    Eigen::VectorXd g = Eigen::VectorXd::Zero(q);
    Eigen::VectorXd gg = Eigen::VectorXd::Zero(q);  // G g

    auto update = [&](Eigen::Index j) {
      const double gjj = gram_(j, j);
      if (gjj <= 0.0) return 0.0;
      const double z = corr_(j) - gg(j) + gjj * g(j);
      const double next = soft_threshold(z, lambda * w(j)) / gjj;
      const double delta = next - g(j);
      if (delta != 0.0) {
        gg.noalias() += gram_.col(j) * delta;
        g(j) = next;
      }
      return std::abs(delta) * std::sqrt(gjj);
    };

    WeightedLassoFit fit;
    std::vector<Eigen::Index> active;
    while (fit.sweeps < max_iter) {
      for (Eigen::Index j = 0; j < q; ++j) update(j);
      ++fit.sweeps;
      fit.kkt_violation = kkt_violation(g, gg, w, lambda);
      if (fit.kkt_violation <= tol) {
        fit.converged = true;
        break;
      }
      active.clear();
      for (Eigen::Index j = 0; j < q; ++j) if (g(j) != 0.0) active.push_back(j);
      while (fit.sweeps < max_iter) {
        double change = 0.0;
        for (Eigen::Index j : active) change = std::max(change, update(j));
        ++fit.sweeps;
        if (change <= 0.01 * tol) break;
      }
    }
    fit.coef = g;
    fit.unpenalized = unpenalized(g);
    return fit;
  }

 private:
  const Eigen::MatrixXd& X_;
  const Eigen::VectorXd& y_;
  bool has_u_;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr_;
  Eigen::MatrixXd gram_;
  Eigen::VectorXd corr_;
  double yy_ = 0.0;
};

int count_nonzero(const Eigen::VectorXd& g) {
  int n = 0;
  for (Eigen::Index j = 0; j < g.size(); ++j) n += g(j) != 0.0 ? 1 : 0;
  return n;
}

// Mean squared prediction error of K-fold CV with folds by row index mod K.
std::vector<double> cross_validate(const SaturatedDesign& design, const Eigen::VectorXd& y,
                                   const Eigen::VectorXd& w, const std::vector<double>& lambdas,
                                   const AlassoConfig& config, Execution exec) {
  const int n = design.n_rows();
  const int folds = config.cv_folds;
  std::vector<double> sse(lambdas.size(), 0.0);
  for (int f = 0; f < folds; ++f) {
    std::vector<int> train;
    std::vector<int> test;
    for (int r = 0; r < n; ++r) (r % folds == f ? test : train).push_back(r);
    const Eigen::MatrixXd Xtr = design.D(train, Eigen::all);
    const Eigen::MatrixXd Utr = design.Z(train, Eigen::all);
    const Eigen::VectorXd ytr = y(train);
    const ProfiledProblem problem(Xtr, Utr, ytr);
    std::vector<double> fold_sse(lambdas.size(), 0.0);
    const int m = static_cast<int>(lambdas.size());
#pragma omp parallel for schedule(dynamic) if (exec == Execution::parallel)
    for (int k = 0; k < m; ++k) {
      const WeightedLassoFit fit = problem.solve(w, lambdas[k], config.tol, config.max_iter);
      double s = 0.0;
      for (int r : test) {
        double pred = design.D.row(r).dot(fit.coef);
        if (fit.unpenalized.size() > 0) pred += design.Z.row(r).dot(fit.unpenalized);
        s += (y(r) - pred) * (y(r) - pred);
      }
      fold_sse[k] = fit.converged ? s : std::numeric_limits<double>::infinity();
    }
    for (std::size_t k = 0; k < lambdas.size(); ++k) sse[k] += fold_sse[k];
  }
  for (double& s : sse) s /= n;
  return sse;
}

}  // namespace

AlassoConfig AlassoConfig::defaults() {
  AlassoConfig c;
  c.ridge_lambda_grid = log_spaced(1e-4, 1e4, 30);
  c.lasso_lambda_grid = log_spaced(1.0, 1e-2, 60);
  return c;
}

void AlassoConfig::validate() const {
  if (ridge_lambda_grid.empty() || lasso_lambda_grid.empty()) {
    throw invalid_input("alasso lambda grids must be nonempty");
  }
  for (double v : ridge_lambda_grid) {
    if (!(v > 0.0)) throw invalid_input("ridge penalties must be positive");
  }
  for (double v : lasso_lambda_grid) {
    if (!(v > 0.0)) throw invalid_input("lasso penalties must be positive");
  }
  if (!(tol > 0.0)) throw invalid_input("alasso tolerance must be positive");
  if (!(weight_power > 0.0)) throw invalid_input("weight power must be positive");
  if (max_iter <= 0) throw invalid_input("max_iter must be positive");
  if (selection == LambdaSelection::cv && cv_folds < 2) throw invalid_input("cv needs at least 2 folds");
}

WeightedLassoFit weighted_lasso(const Eigen::MatrixXd& X, const Eigen::MatrixXd& U,
                                const Eigen::VectorXd& y, const Eigen::VectorXd& weights,
                                double lambda, double tol, int max_iter) {
  if (X.rows() != y.size() || (U.cols() > 0 && U.rows() != y.size()) || weights.size() != X.cols()) {
    throw invalid_input("weighted lasso dimensions do not match");
  }
  if (!(lambda >= 0.0)) throw invalid_input("lasso penalty must be non-negative");
  const ProfiledProblem problem(X, U, y);
  return problem.solve(weights, lambda, tol, max_iter);
}

RidgeFit ridge_gcv(const SaturatedDesign& design, const Eigen::VectorXd& y,
                   const std::vector<double>& grid) {
  if (grid.empty()) throw invalid_input("alasso lambda grids must be nonempty");
  const ProfiledProblem problem(design.D, design.Z, y);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(problem.gram());
  const Eigen::VectorXd& ev = eig.eigenvalues();
  const Eigen::VectorXd proj = eig.eigenvectors().transpose() * problem.corr();
  const double n = design.n_rows();

  RidgeFit best;
  best.gcv = std::numeric_limits<double>::infinity();
  for (double lambda : grid) {
    Eigen::VectorXd shrunk(ev.size());
    double df = design.n_mean();
    for (Eigen::Index k = 0; k < ev.size(); ++k) {
      const double e = std::max(ev(k), 0.0);
      shrunk(k) = proj(k) / (e + lambda);
      df += e / (e + lambda);
    }
    const Eigen::VectorXd coef = eig.eigenvectors() * shrunk;
    const double resid_df = n - df;
    if (resid_df <= 0.0) continue;
    const double gcv = n * problem.rss(coef) / (resid_df * resid_df);
    if (gcv < best.gcv) {
      best.gcv = gcv;
      best.lambda = lambda;
      best.coef = coef;
    }
  }
  if (!std::isfinite(best.gcv)) throw numerical_failure("ridge GCV failed on every grid point");
  return best;
}

AlassoResult alasso_detect(const SaturatedDesign& design, const Eigen::VectorXd& y,
                           const AlassoConfig& config, Execution exec) {
  config.validate();
  if (y.size() != design.n_rows()) throw invalid_input("response length does not match design");

  const RidgeFit ridge = ridge_gcv(design, y, config.ridge_lambda_grid);
  AlassoResult result;
  result.ridge_lambda = ridge.lambda;
  result.weights.resize(ridge.coef.size());
  for (Eigen::Index j = 0; j < ridge.coef.size(); ++j) {
    const double a = std::abs(ridge.coef(j));
    const double w = a > 0.0 ? std::pow(a, -config.weight_power) : max_adaptive_weight;
    result.weights(j) = std::min(w, max_adaptive_weight);
  }

  const ProfiledProblem problem(design.D, design.Z, y);
  result.lambda_max = problem.lambda_max(result.weights);
  std::vector<double> lambdas;
  for (double frac : config.lasso_lambda_grid) lambdas.push_back(frac * result.lambda_max);

  const int m = static_cast<int>(lambdas.size());
  std::vector<WeightedLassoFit> fits(lambdas.size());
#pragma omp parallel for schedule(dynamic) if (exec == Execution::parallel)
  for (int k = 0; k < m; ++k) {
    fits[k] = problem.solve(result.weights, lambdas[k], config.tol, config.max_iter);
  }

  std::vector<double> criterion(lambdas.size());
  if (config.selection == LambdaSelection::bic) {
    const double n = design.n_rows();
    for (int k = 0; k < m; ++k) {
      const double rss = std::max(problem.rss(fits[k].coef), 1e-300);
      criterion[k] = n * std::log(rss / n) + std::log(n) * (design.n_mean() + count_nonzero(fits[k].coef));
    }
  } else {
    criterion = cross_validate(design, y, result.weights, lambdas, config, exec);
  }

  int best = -1;
  for (int k = 0; k < m; ++k) {
    result.path.push_back({lambdas[k], criterion[k], count_nonzero(fits[k].coef), fits[k].sweeps,
                           fits[k].converged});
    if (!fits[k].converged) continue;
    if (best < 0 || criterion[k] < criterion[best]) best = k;
  }
  if (best < 0) {
    double worst = 0.0;
    for (const auto& f : fits) worst = std::max(worst, f.kkt_violation);
    throw numerical_failure(fmt::format(
        "coordinate descent did not converge (max_iter {}, largest KKT violation {:.3g})",
        config.max_iter, worst));
  }

  const WeightedLassoFit& chosen = fits[best];
  result.lasso_lambda = lambdas[best];
  result.gamma = chosen.coef;
  result.beta = chosen.unpenalized;
  result.kkt_violation = chosen.kkt_violation;
  for (int c = 0; c < design.n_candidates(); ++c) {
    if (chosen.coef(c) != 0.0) result.detected.push_back(design.candidates[c]);
  }
  return result;
}

}  // namespace bisam

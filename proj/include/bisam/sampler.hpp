#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "bisam/panel.hpp"
#include "bisam/rng.hpp"
#include "bisam/slab.hpp"

namespace bisam {

struct BetaHyperprior {
  double a = 1.0;
  double b = 1.0;
};

/// Prior hyperparameters. Unset optionals are filled by empirical Bayes.
struct PriorConfig {
  double tau = 3.32;
  double omega = 0.01;
  /// When set, omega is sampled from its Beta full conditional.
  std::optional<BetaHyperprior> omega_prior;
  std::optional<double> m0;
  std::optional<double> n0;
  std::optional<double> beta_prior_var;
  double eta = 0.01;
  double tau_eps = 10.0;
  bool outliers_enabled = true;

  void validate() const;
};

struct SamplerConfig {
  int n_burn = 2000;
  int n_draw = 5000;
  int thin = 1;
  std::uint64_t seed = 1;
  int grid_points = 400;
  /// When false the unit variances stay at their reference values.
  bool sample_variances = true;
  /// Restricts the sweep to these candidate columns; the others stay at
  /// zero. Empty means all candidates.
  std::vector<int> active_candidates;

  void validate() const;
};

/// Resolved variance hyperparameters for one panel.
struct EmpiricalBayes {
  Eigen::VectorXd sigma2_ref;  // per-unit residual variance of the no-break fit
  double m0 = 2.5;
  Eigen::VectorXd n0;          // per-unit inverse-gamma rate
  double beta_prior_var = 1.0;
  Eigen::VectorXd beta_init;   // least-squares no-break coefficients
};

/// Least-squares fit of the no-break model. The inverse-gamma prior gets
/// mean sigma2_ref_i and the weight of five observations (m0 = 2.5).
/// Errors: "insufficient data for empirical Bayes" when a unit has fewer
/// than two residual degrees of freedom.
EmpiricalBayes empirical_bayes_init(const SaturatedDesign& design, const Eigen::VectorXd& y);

/// Applies explicit PriorConfig overrides (m0, n0, beta_prior_var) on top
/// of the empirical-Bayes defaults.
EmpiricalBayes resolve_hyperparameters(const SaturatedDesign& design, const Eigen::VectorXd& y,
                                       const PriorConfig& prior);

struct SamplerState {
  Eigen::VectorXd beta;
  Eigen::VectorXd gamma;
  std::vector<std::uint8_t> delta_gamma;
  Eigen::VectorXd sigma2;
  std::vector<std::uint8_t> delta_eps;  // unit-major N*T
  double omega = 0.0;
  Eigen::VectorXd sigma2_ref;
};

struct SamplerDiagnostics {
  std::int64_t break_updates = 0;
  std::int64_t break_inclusions = 0;
  std::int64_t underflow_fallbacks = 0;
  std::int64_t outlier_flags = 0;
  std::int64_t shift_moves = 0;
  std::int64_t split_moves = 0;
  std::int64_t merge_moves = 0;
};

/// Recorded post-burn-in states, one row per kept iteration.
struct PosteriorDraws {
  int n_units = 0;
  int n_times = 0;
  std::vector<BreakCandidate> candidates;
  Eigen::MatrixXd beta;    // records x p
  Eigen::MatrixXd gamma;   // records x q
  std::vector<std::uint8_t> delta_gamma;  // records x q, row-major
  Eigen::MatrixXd sigma2;  // records x N
  std::vector<std::uint8_t> delta_eps;    // records x (N*T), row-major
  std::vector<double> omega;
  SamplerDiagnostics diagnostics;
  std::uint64_t seed = 0;

  int records() const { return static_cast<int>(omega.size()); }
  int n_candidates() const { return static_cast<int>(candidates.size()); }
  bool included(int record, int candidate) const {
    return delta_gamma[static_cast<std::size_t>(record) * candidates.size() + candidate] != 0;
  }
  bool outlier(int record, int cell) const {
    return delta_eps[static_cast<std::size_t>(record) * n_units * n_times + cell] != 0;
  }
};

/// Gaussian full conditional of beta under an independent N(0, v0) prior
/// and diagonal observation precisions w: precision Z'WZ + I/v0 and mean
/// (Z'WZ + I/v0)^{-1} Z'W y.
struct BetaConditional {
  Eigen::VectorXd mean;
  Eigen::LLT<Eigen::MatrixXd> precision_chol;

  Eigen::MatrixXd covariance() const;
  Eigen::VectorXd draw(Rng& rng) const;
};

BetaConditional beta_conditional(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y,
                                 const Eigen::VectorXd& row_precision, double prior_var);

/// Single-site Gibbs sampler over (beta, gamma, delta, sigma2, delta_eps, omega).
class GibbsSampler {
 public:
  GibbsSampler(const SaturatedDesign& design, Eigen::VectorXd y, PriorConfig prior,
               SamplerConfig config, EmpiricalBayes hyper);

  const SamplerState& state() const { return state_; }
  const SamplerDiagnostics& diagnostics() const { return diagnostics_; }
  const EmpiricalBayes& hyper() const { return hyper_; }
  const Eigen::VectorXd& response() const { return y_; }

  /// Replaces the state; residuals and weights are recomputed.
  void set_state(SamplerState state);
  /// Replaces the response (successive-conditional simulation).
  void set_response(Eigen::VectorXd y);

  /// One full iteration: outliers, beta, randomly ordered break sweep,
  /// shift moves, split/merge moves, unit variances, omega.
  void sweep(Rng& rng);

  void update_outliers(Rng& rng);
  void update_beta(Rng& rng);
  void update_break(int candidate, Rng& rng);
  /// Metropolis moves of included breaks to a neighbouring start in the
  /// same unit, keeping their size. Prior-neutral, so the ratio is the
  /// likelihood ratio of the single row where the step columns differ.
  void update_shifts(Rng& rng);
  /// Reversible jump pair within a unit. A split adds a break next to an
  /// included one and hands it part of the size, so the fit changes only
  /// between the two starts; a merge folds one break into another. One
  /// attempt per unit and sweep.
  void update_split_merge(Rng& rng);
  void update_sigma2(int unit, Rng& rng);
  void update_omega(Rng& rng);

  /// Posterior outlier probability for a residual in a given unit.
  double outlier_probability(double residual, int unit) const;

  /// log BF (slab vs spike) for a candidate at the current state.
  double break_log_bayes_factor(int candidate);

  /// Current residual y - Z beta - D gamma (unweighted).
  const Eigen::VectorXd& residual() const { return residual_; }
  /// Row weights: 1 or 1 / (2 tau_eps) on the squared residual.
  const Eigen::VectorXd& row_weight() const { return weight_; }

 private:
  void recompute_residual();
  void refresh_weights();
  int active_count() const { return static_cast<int>(active_.size()); }
  struct SplitSegment {
    double sign;  // +1 when the added break precedes the one it splits from
    double sum_w;
    double sum_wr;
  };
  SplitSegment split_segment(int from, int added) const;
  double split_log_ratio(int from, int added, double u) const;
  void try_split(Rng& rng);
  void try_merge(Rng& rng);

  const SaturatedDesign& design_;
  Eigen::VectorXd y_;
  PriorConfig prior_;
  SamplerConfig config_;
  EmpiricalBayes hyper_;
  SamplerState state_;
  SamplerDiagnostics diagnostics_;
  std::vector<int> active_;
  std::vector<int> order_;
  Eigen::VectorXd residual_;
  Eigen::VectorXd weight_;
  SlabPosterior slab_;
  double outlier_weight_;
};

/// Runs one chain: empirical Bayes, null-model start, burn-in, recording.
/// Identical inputs and seed give bitwise-identical draws.
PosteriorDraws run_chain(const SaturatedDesign& design, const Eigen::VectorXd& y,
                         const PriorConfig& prior, const SamplerConfig& config);

PosteriorDraws run_chain(const PanelData& panel, const PriorConfig& prior,
                         const SamplerConfig& config);

}  // namespace bisam

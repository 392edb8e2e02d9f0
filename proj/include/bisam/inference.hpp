#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "bisam/panel.hpp"
#include "bisam/sampler.hpp"

namespace bisam {

enum class ThresholdRule {
  at_least,  // pip >= threshold (default)
  greater,   // pip > threshold
};

struct GammaSummary {
  BreakCandidate candidate;
  int n_included = 0;
  /// Unset when the candidate was never included ("no conditional draws").
  std::optional<double> mean;
  std::optional<double> median;
  std::optional<double> lower;  // 5% quantile
  std::optional<double> upper;  // 95% quantile
};

struct WindowProbability {
  int unit = 0;
  int start = 0;
  int width = 1;
  double probability = 0.0;
};

struct BreakReport {
  int n_units = 0;
  int n_times = 0;
  double threshold = 0.5;
  ThresholdRule rule = ThresholdRule::at_least;
  std::vector<BreakCandidate> candidates;
  Eigen::VectorXd pip;
  std::vector<BreakCandidate> selected;
  std::vector<GammaSummary> gamma_summary;
  std::vector<WindowProbability> window_prob;
  Eigen::MatrixXd outlier_prob;  // N x T
  Eigen::MatrixXd fitted;        // N x T posterior-mean fitted path
};

/// Fraction of draws with each inclusion flag set. Error: "no posterior sample".
Eigen::VectorXd compute_pips(const PosteriorDraws& draws);

/// Candidates passing the threshold, sorted by unit then start.
std::vector<BreakCandidate> select_breaks(const Eigen::VectorXd& pips,
                                          const std::vector<BreakCandidate>& candidates,
                                          double threshold = 0.5,
                                          ThresholdRule rule = ThresholdRule::at_least);

/// Probability that at least one break falls in [start, start + width - 1]
/// for the unit, computed from joint draw-level events.
/// Error: "invalid window" when the window leaves the admissible range.
double window_break_prob(const PosteriorDraws& draws, int unit, int start, int width);

/// Conditional-on-inclusion summaries of gamma for each selected candidate.
std::vector<GammaSummary> summarize_breaks(const PosteriorDraws& draws,
                                           const std::vector<BreakCandidate>& selected);

/// Posterior probability that each cell is flagged as an outlier (N x T).
Eigen::MatrixXd outlier_probabilities(const PosteriorDraws& draws);

/// Z * mean(beta) + D * mean(gamma), reshaped to N x T.
Eigen::MatrixXd fitted_path(const SaturatedDesign& design, const PosteriorDraws& draws);

/// All of the above for widths 1..3.
BreakReport make_report(const SaturatedDesign& design, const PosteriorDraws& draws,
                        double threshold = 0.5, ThresholdRule rule = ThresholdRule::at_least);

}  // namespace bisam

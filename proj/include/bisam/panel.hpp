#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace bisam {

/// Balanced N x T panel. Rows of `y` are units, columns are periods.
struct PanelData {
  std::vector<std::string> units;
  std::vector<std::int64_t> times;
  Eigen::MatrixXd y;
  /// One N x T matrix per covariate.
  std::vector<Eigen::MatrixXd> covariates;
  std::vector<std::string> covariate_names;

  bool include_unit_fe = true;
  bool include_time_fe = true;
  bool include_intercept = true;

  int n_units() const { return static_cast<int>(units.size()); }
  int n_times() const { return static_cast<int>(times.size()); }
  int n_covariates() const { return static_cast<int>(covariates.size()); }

  /// Throws bisam::Error when the panel is unbalanced, too small or
  /// carries non-finite cells.
  void validate() const;
};

/// Step shift for unit `unit` starting at zero-based period `start`.
/// Admissible starts are 2 .. T-2 (periods 3 .. T-1 in one-based terms).
struct BreakCandidate {
  int unit = 0;
  int start = 0;

  friend auto operator<=>(const BreakCandidate&, const BreakCandidate&) = default;
};

constexpr int first_admissible_start() { return 2; }
constexpr int last_admissible_start(int n_times) { return n_times - 2; }
constexpr int starts_per_unit(int n_times) { return n_times - 3; }

/// Column of candidate (unit, start) in the full saturated design.
constexpr int candidate_index(int unit, int start, int n_times) {
  return unit * starts_per_unit(n_times) + (start - first_admissible_start());
}

/// Mean-function block Z plus all step-shift columns D. Rows are
/// unit-major: row = unit * T + t.
struct SaturatedDesign {
  int n_units = 0;
  int n_times = 0;
  Eigen::MatrixXd Z;
  std::vector<std::string> z_names;
  Eigen::MatrixXd D;
  std::vector<BreakCandidate> candidates;

  int n_rows() const { return n_units * n_times; }
  int n_mean() const { return static_cast<int>(Z.cols()); }
  int n_candidates() const { return static_cast<int>(candidates.size()); }
  int row(int unit, int t) const { return unit * n_times + t; }
  int unit_of_row(int r) const { return r / n_times; }
  int time_of_row(int r) const { return r % n_times; }
};

/// Builds the step-indicator saturated design for a validated panel.
/// Errors: "degenerate horizon" (T < 5), "collinear mean design".
SaturatedDesign build_design(const PanelData& panel);

/// Unit-major stacking of the N x T response into a length N*T vector.
Eigen::VectorXd stack_response(const PanelData& panel);

/// Step indicator column for an arbitrary start (including the
/// inadmissible ones); used to study identification.
Eigen::VectorXd step_column(int n_units, int n_times, int unit, int start);

}  // namespace bisam

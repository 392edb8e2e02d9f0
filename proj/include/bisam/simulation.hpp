#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bisam/alasso.hpp"
#include "bisam/panel.hpp"
#include "bisam/parallel.hpp"
#include "bisam/sampler.hpp"

namespace bisam {

struct PlannedBreak {
  int unit = 0;
  int start = 0;
  double size = 0.0;
};

enum class LayoutKind {
  sparse,  // 4 units with one break each
  dense,   // 8 units with breaks, 4 of them with two (12 breaks)
  count,   // `break_count` breaks placed at random
  custom,  // explicit list
};

struct Layout {
  LayoutKind kind = LayoutKind::sparse;
  int break_count = 0;
  std::vector<PlannedBreak> custom;

  /// "sparse", "dense", "count:K" or "custom".
  std::string name() const;
  static Layout parse(const std::string& text);
};

struct SimDesign {
  int n_units = 10;
  int n_times = 30;
  double sigma2 = 1.0;
  /// Break magnitude in units of sigma.
  double break_size = 1.0;
  Layout layout;
  int n_reps = 20;
  std::uint64_t seed = 1;
  /// Minimum distance between two breaks in one unit.
  int min_spacing = 3;
};

struct SimDataset {
  PanelData panel;
  std::vector<BreakCandidate> truth;  // sorted
  std::vector<double> truth_sizes;
};

/// y = unit FE + time FE + step breaks + N(0, sigma2) noise, with both
/// fixed-effect sets drawn from N(0, 1) per replication. Deterministic
/// in (seed, rep_index). Error: "infeasible layout".
SimDataset generate(const SimDesign& design, int rep_index);

/// Classification metrics for one replication. Unset means undefined.
struct ScoreRow {
  int true_positives = 0;
  int false_positives = 0;
  int false_negatives = 0;
  int near_misses = 0;
  std::optional<double> tpr;
  std::optional<double> fpr;
  std::optional<double> precision;
  std::optional<double> f1;
  std::optional<double> near_miss;
};

/// Exact (unit, start) matching against the truth; `n_candidates` is q.
ScoreRow score(const std::vector<BreakCandidate>& detected,
               const std::vector<BreakCandidate>& truth, int n_candidates);

struct MetricSummary {
  std::optional<double> mean;
  std::optional<double> se;
  int n = 0;  // replications where the metric was defined
};

struct MetricsReport {
  MetricSummary tpr, fpr, precision, f1, near_miss;
};

MetricsReport aggregate(const std::vector<ScoreRow>& rows);

enum class Method { bisam, alasso };
std::string method_name(Method m);

struct StudyConfig {
  int n_units = 10;
  int n_times = 30;
  double sigma2 = 1.0;
  std::vector<Layout> layouts;
  std::vector<double> sizes;
  std::vector<Method> methods{Method::bisam, Method::alasso};
  int n_reps = 20;
  std::uint64_t seed = 1;
  int min_spacing = 3;
  double threshold = 0.5;
  PriorConfig prior;
  SamplerConfig sampler;
  AlassoConfig alasso = AlassoConfig::defaults();
};

struct StudyCell {
  Method method;
  std::string layout;
  double size = 0.0;
  MetricsReport metrics;
  std::vector<ScoreRow> rows;  // successful replications, in rep order
  int failures = 0;
  std::vector<std::string> failure_messages;
};

struct StudyResult {
  std::vector<StudyCell> cells;  // method-major, then layout, then size
};

/// Runs every (layout, size, replication) task; each replication is scored
/// by every requested method on the same dataset. Replications execute
/// in parallel under Execution::parallel; the serial path is the reference.
StudyResult run_study(const StudyConfig& config, Execution exec = Execution::parallel);

/// Seed of the BISAM chain used for a replication.
std::uint64_t chain_seed(std::uint64_t master, int layout_index, double size, int rep_index);

}  // namespace bisam

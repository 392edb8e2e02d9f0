#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "bisam/alasso.hpp"
#include "bisam/inference.hpp"
#include "bisam/panel.hpp"
#include "bisam/sampler.hpp"
#include "bisam/simulation.hpp"

namespace bisam {

inline constexpr int format_version = 1;
inline constexpr const char* format_tag = "bisam/1";

enum class TransformOp { log, square };

/// `source:op[:op...]` rewrites a column in place; `target=source:op...`
/// appends a derived covariate. Ops apply left to right.
struct TransformDirective {
  std::string target;
  std::string source;
  std::vector<TransformOp> ops;

  static TransformDirective parse(const std::string& text);
};

struct PanelSchema {
  std::vector<TransformDirective> transforms;
  bool include_unit_fe = true;
  bool include_time_fe = true;
};

/// Delimited text with header `unit,time,y[,cov...]`. Units keep their
/// order of first appearance; periods are sorted integers.
/// Errors: "missing cell (unit, time)", position-reported parse errors.
PanelData read_panel(std::istream& in, const PanelSchema& schema = {});
PanelData ingest_panel(const std::string& path, const PanelSchema& schema = {});
void write_panel(std::ostream& out, const PanelData& panel);

/// Columnar draw file: a tag line, a one-line JSON header (config, seed,
/// version, dimensions), the column names, then one row per record.
void save_draws(std::ostream& out, const PosteriorDraws& draws, const nlohmann::json& run_info);
void save_draws(const std::string& path, const PosteriorDraws& draws, const nlohmann::json& run_info);

struct LoadedDraws {
  PosteriorDraws draws;
  nlohmann::json header;
};

/// Error: "incompatible draw file" on version mismatch or truncation.
LoadedDraws load_draws(std::istream& in);
LoadedDraws load_draws(const std::string& path);

/// unit, start, pip (start is the label of the first affected period).
void write_pips_csv(std::ostream& out, const BreakReport& report, const PanelData& panel);
void write_report_json(std::ostream& out, const BreakReport& report, const PanelData& panel);
/// unit, time, observed, fitted, window_w1, window_w2, window_w3 where
/// window_wK is the probability of a break in the K periods starting at time.
void write_fitpath_csv(std::ostream& out, const BreakReport& report, const PanelData& panel);
/// method, layout, size, metric, mean, se
void write_metrics_csv(std::ostream& out, const StudyResult& result);

/// Break lists keyed by labels: unit, time[, value].
struct LabeledBreak {
  std::string unit;
  std::int64_t time = 0;
  double value = 0.0;
};
void write_breaks_csv(std::ostream& out, const std::vector<LabeledBreak>& breaks,
                      const std::string& value_name = "");
std::vector<LabeledBreak> read_breaks_csv(std::istream& in);

/// Settings shared by every command; loaded from a JSON file whose unknown
/// keys are rejected.
struct RunConfig {
  int version = format_version;
  PriorConfig prior;
  SamplerConfig sampler;
  AlassoConfig alasso = AlassoConfig::defaults();
  double threshold = 0.5;
  ThresholdRule rule = ThresholdRule::at_least;

  // simulate
  int n_units = 10;
  int n_times = 30;
  double sigma2 = 1.0;
  std::vector<std::string> layouts{"sparse"};
  std::vector<double> sizes{1.0, 1.5, 2.0, 3.0, 6.0, 10.0};
  std::vector<std::string> methods{"bisam", "alasso"};
  int n_reps = 20;
  int min_spacing = 3;
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);
nlohmann::json to_json(const RunConfig& config);

}  // namespace bisam

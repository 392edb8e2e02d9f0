#include "bisam/inference.hpp"

#include <algorithm>
#include <cmath>

#include "bisam/error.hpp"

namespace bisam {

namespace {

// Linear interpolation between order statistics (R type 7).
double quantile_sorted(const std::vector<double>& v, double p) {
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

int find_candidate(const PosteriorDraws& draws, int unit, int start) {
  const BreakCandidate key{unit, start};
  const auto it = std::lower_bound(draws.candidates.begin(), draws.candidates.end(), key);
  if (it == draws.candidates.end() || *it != key) return -1;
  return static_cast<int>(it - draws.candidates.begin());
}

}  // namespace

Eigen::VectorXd compute_pips(const PosteriorDraws& draws) {
  const int m = draws.records();
  if (m == 0) throw invalid_input("no posterior sample");
  const int q = draws.n_candidates();
  Eigen::VectorXd pip(q);
#pragma omp parallel for schedule(static)
  for (int c = 0; c < q; ++c) {
    long count = 0;
    for (int r = 0; r < m; ++r) count += draws.included(r, c) ? 1 : 0;
    pip(c) = static_cast<double>(count) / m;
  }
  return pip;
}

std::vector<BreakCandidate> select_breaks(const Eigen::VectorXd& pips,
                                          const std::vector<BreakCandidate>& candidates,
                                          double threshold, ThresholdRule rule) {
  if (pips.size() != static_cast<Eigen::Index>(candidates.size())) {
    throw invalid_input("pip vector and candidate list differ in length");
  }
  std::vector<BreakCandidate> out;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const double p = pips(static_cast<Eigen::Index>(c));
    const bool pass = rule == ThresholdRule::at_least ? p >= threshold : p > threshold;
    if (pass) out.push_back(candidates[c]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

double window_break_prob(const PosteriorDraws& draws, int unit, int start, int width) {
  const int m = draws.records();
  if (m == 0) throw invalid_input("no posterior sample");
  if (width < 1 || unit < 0 || unit >= draws.n_units || start < first_admissible_start() ||
      start + width - 1 > last_admissible_start(draws.n_times)) {
    throw invalid_input("invalid window");
  }
  std::vector<int> cols;
  for (int s = start; s < start + width; ++s) {
    const int c = find_candidate(draws, unit, s);
    if (c < 0) throw invalid_input("invalid window");
    cols.push_back(c);
  }
  long hits = 0;
  for (int r = 0; r < m; ++r) {
    bool any = false;
    for (int c : cols) any = any || draws.included(r, c);
    hits += any ? 1 : 0;
  }
  return static_cast<double>(hits) / m;
}

std::vector<GammaSummary> summarize_breaks(const PosteriorDraws& draws,
                                           const std::vector<BreakCandidate>& selected) {
  std::vector<GammaSummary> out;
  out.reserve(selected.size());
  std::vector<double> values;
  for (const auto& cand : selected) {
    const int c = find_candidate(draws, cand.unit, cand.start);
    if (c < 0) throw invalid_input("selected break is not a candidate");
    values.clear();
    for (int r = 0; r < draws.records(); ++r) {
      if (draws.included(r, c)) values.push_back(draws.gamma(r, c));
    }
    GammaSummary s;
    s.candidate = cand;
    s.n_included = static_cast<int>(values.size());
    if (!values.empty()) {
      double sum = 0.0;
      for (double v : values) sum += v;
      s.mean = sum / static_cast<double>(values.size());
      std::sort(values.begin(), values.end());
      s.median = quantile_sorted(values, 0.5);
      s.lower = quantile_sorted(values, 0.05);
      s.upper = quantile_sorted(values, 0.95);
    }
    out.push_back(s);
  }
  return out;
}

Eigen::MatrixXd outlier_probabilities(const PosteriorDraws& draws) {
  const int m = draws.records();
  if (m == 0) throw invalid_input("no posterior sample");
  Eigen::MatrixXd prob = Eigen::MatrixXd::Zero(draws.n_units, draws.n_times);
  for (int i = 0; i < draws.n_units; ++i) {
    for (int t = 0; t < draws.n_times; ++t) {
      long count = 0;
      for (int r = 0; r < m; ++r) count += draws.outlier(r, i * draws.n_times + t) ? 1 : 0;
      prob(i, t) = static_cast<double>(count) / m;
    }
  }
  return prob;
}

Eigen::MatrixXd fitted_path(const SaturatedDesign& design, const PosteriorDraws& draws) {
  if (draws.records() == 0) throw invalid_input("no posterior sample");
  Eigen::VectorXd fit = Eigen::VectorXd::Zero(design.n_rows());
  if (design.n_mean() > 0) fit += design.Z * draws.beta.colwise().mean().transpose();
  fit += design.D * draws.gamma.colwise().mean().transpose();
  Eigen::MatrixXd out(design.n_units, design.n_times);
  for (int i = 0; i < design.n_units; ++i) {
    for (int t = 0; t < design.n_times; ++t) out(i, t) = fit(design.row(i, t));
  }
  return out;
}

BreakReport make_report(const SaturatedDesign& design, const PosteriorDraws& draws,
                        double threshold, ThresholdRule rule) {
  BreakReport report;
  report.n_units = design.n_units;
  report.n_times = design.n_times;
  report.threshold = threshold;
  report.rule = rule;
  report.candidates = draws.candidates;
  report.pip = compute_pips(draws);
  report.selected = select_breaks(report.pip, draws.candidates, threshold, rule);
  report.gamma_summary = summarize_breaks(draws, report.selected);
  const int last = last_admissible_start(design.n_times);
  for (int i = 0; i < design.n_units; ++i) {
    for (int s = first_admissible_start(); s <= last; ++s) {
      for (int w = 1; w <= 3 && s + w - 1 <= last; ++w) {
        report.window_prob.push_back({i, s, w, window_break_prob(draws, i, s, w)});
      }
    }
  }
  report.outlier_prob = outlier_probabilities(draws);
  report.fitted = fitted_path(design, draws);
  return report;
}

}  // namespace bisam

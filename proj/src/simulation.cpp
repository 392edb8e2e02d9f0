#include "bisam/simulation.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <set>
#include <tuple>

#include <fmt/format.h>

#include "bisam/error.hpp"
#include "bisam/inference.hpp"
#include "bisam/rng.hpp"

namespace bisam {

namespace {

int uniform_int(Rng& rng, int lo, int hi) {  // inclusive
  const auto span = static_cast<unsigned __int128>(hi - lo + 1);
  return lo + static_cast<int>((static_cast<unsigned __int128>(rng()) * span) >> 64);
}

std::vector<int> pick_units(Rng& rng, int n_units, int count) {
  std::vector<int> units(static_cast<std::size_t>(n_units));
  for (int i = 0; i < n_units; ++i) units[i] = i;
  for (int k = 0; k < count; ++k) std::swap(units[k], units[uniform_int(rng, k, n_units - 1)]);
  units.resize(static_cast<std::size_t>(count));
  return units;
}

// Admissible starts of `unit` at least `spacing` away from its breaks.
std::vector<int> free_starts(const std::vector<PlannedBreak>& placed, int unit, int n_times, int spacing) {
  std::vector<int> out;
  for (int s = first_admissible_start(); s <= last_admissible_start(n_times); ++s) {
    bool ok = true;
    for (const auto& b : placed) {
      if (b.unit == unit && std::abs(b.start - s) < spacing) ok = false;
    }
    if (ok) out.push_back(s);
  }
  return out;
}

void place(Rng& rng, std::vector<PlannedBreak>& placed, int unit, const SimDesign& d, double size) {
  const auto starts = free_starts(placed, unit, d.n_times, d.min_spacing);
  if (starts.empty()) throw invalid_input("infeasible layout");
  placed.push_back({unit, starts[uniform_int(rng, 0, static_cast<int>(starts.size()) - 1)], size});
}

std::vector<PlannedBreak> plan_breaks(const SimDesign& d, Rng& rng) {
  const double size = d.break_size * std::sqrt(d.sigma2);
  std::vector<PlannedBreak> placed;
  switch (d.layout.kind) {
    case LayoutKind::sparse: {
      if (d.n_units < 4) throw invalid_input("infeasible layout");
      for (int u : pick_units(rng, d.n_units, 4)) place(rng, placed, u, d, size);
      break;
    }
    case LayoutKind::dense: {
      if (d.n_units < 8) throw invalid_input("infeasible layout");
      const auto units = pick_units(rng, d.n_units, 8);
      for (int k = 0; k < 8; ++k) {
        place(rng, placed, units[k], d, size);
        if (k < 4) place(rng, placed, units[k], d, size);
      }
      break;
    }
    case LayoutKind::count: {
      if (d.layout.break_count < 0) throw invalid_input("infeasible layout");
      for (int k = 0; k < d.layout.break_count; ++k) {
        std::vector<int> open;
        for (int u = 0; u < d.n_units; ++u) {
          if (!free_starts(placed, u, d.n_times, d.min_spacing).empty()) open.push_back(u);
        }
        if (open.empty()) throw invalid_input("infeasible layout");
        place(rng, placed, open[uniform_int(rng, 0, static_cast<int>(open.size()) - 1)], d, size);
      }
      break;
    }
    case LayoutKind::custom: {
      for (const auto& b : d.layout.custom) {
        if (b.unit < 0 || b.unit >= d.n_units || b.start < first_admissible_start() ||
            b.start > last_admissible_start(d.n_times)) {
          throw invalid_input("infeasible layout");
        }
        placed.push_back(b);
      }
      break;
    }
  }
  return placed;
}

MetricSummary summarize(const std::vector<double>& values) {
  MetricSummary s;
  s.n = static_cast<int>(values.size());
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / s.n;
  s.mean = mean;
  if (s.n >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    s.se = std::sqrt(ss / (s.n - 1) / s.n);
  }
  return s;
}

}  // namespace

std::string Layout::name() const {
  switch (kind) {
    case LayoutKind::sparse: return "sparse";
    case LayoutKind::dense: return "dense";
    case LayoutKind::count: return fmt::format("count:{}", break_count);
    case LayoutKind::custom: return "custom";
  }
  return "unknown";
}

Layout Layout::parse(const std::string& text) {
  Layout l;
  if (text == "sparse") {
    l.kind = LayoutKind::sparse;
  } else if (text == "dense") {
    l.kind = LayoutKind::dense;
  } else if (text.rfind("count:", 0) == 0) {
    l.kind = LayoutKind::count;
    try {
      std::size_t used = 0;
      l.break_count = std::stoi(text.substr(6), &used);
      if (used != text.size() - 6 || l.break_count < 0) throw std::invalid_argument(text);
    } catch (const std::exception&) {
      throw invalid_input(fmt::format("invalid layout '{}'", text));
    }
  } else {
    throw invalid_input(fmt::format("invalid layout '{}'", text));
  }
  return l;
}

SimDataset generate(const SimDesign& d, int rep_index) {
  if (d.n_units < 2 || d.n_times < 5 || !(d.sigma2 > 0.0)) throw invalid_input("invalid simulation design");
  Rng rng(derive_seed(d.seed, static_cast<std::uint64_t>(rep_index)));

  auto breaks = plan_breaks(d, rng);
  // Zero-size breaks leave the panel unchanged and are not part of the truth.
  std::erase_if(breaks, [](const PlannedBreak& b) { return b.size == 0.0; });

  SimDataset out;
  PanelData& p = out.panel;
  for (int i = 0; i < d.n_units; ++i) p.units.push_back(fmt::format("unit{:02d}", i + 1));
  for (int t = 0; t < d.n_times; ++t) p.times.push_back(t + 1);

  Eigen::VectorXd unit_fe(d.n_units);
  Eigen::VectorXd time_fe(d.n_times);
  for (int i = 0; i < d.n_units; ++i) unit_fe(i) = standard_normal(rng);
  for (int t = 0; t < d.n_times; ++t) time_fe(t) = standard_normal(rng);

  const double sd = std::sqrt(d.sigma2);
  p.y.resize(d.n_units, d.n_times);
  for (int i = 0; i < d.n_units; ++i) {
    for (int t = 0; t < d.n_times; ++t) p.y(i, t) = unit_fe(i) + time_fe(t) + sd * standard_normal(rng);
  }
  for (const auto& b : breaks) {
    for (int t = b.start; t < d.n_times; ++t) p.y(b.unit, t) += b.size;
  }

  std::vector<PlannedBreak> sorted = breaks;
  std::sort(sorted.begin(), sorted.end(), [](const PlannedBreak& a, const PlannedBreak& b) {
    return std::tie(a.unit, a.start) < std::tie(b.unit, b.start);
  });
  for (const auto& b : sorted) {
    out.truth.push_back({b.unit, b.start});
    out.truth_sizes.push_back(b.size);
  }
  return out;
}

ScoreRow score(const std::vector<BreakCandidate>& detected, const std::vector<BreakCandidate>& truth,
               int n_candidates) {
  const std::set<BreakCandidate> found(detected.begin(), detected.end());
  const std::set<BreakCandidate> real(truth.begin(), truth.end());

  ScoreRow row;
  for (const auto& b : found) row.true_positives += real.count(b) ? 1 : 0;
  row.false_positives = static_cast<int>(found.size()) - row.true_positives;
  row.false_negatives = static_cast<int>(real.size()) - row.true_positives;

  for (const auto& b : real) {
    if (found.count(b)) continue;
    bool near = false;
    for (int offset : {-1, 1}) {
      const BreakCandidate adj{b.unit, b.start + offset};
      if (found.count(adj) && !real.count(adj)) near = true;
    }
    row.near_misses += near ? 1 : 0;
  }

  const int n_true = static_cast<int>(real.size());
  const int n_found = static_cast<int>(found.size());
  if (n_true > 0) row.tpr = static_cast<double>(row.true_positives) / n_true;
  if (n_candidates - n_true > 0) row.fpr = static_cast<double>(row.false_positives) / (n_candidates - n_true);
  if (n_found > 0) row.precision = static_cast<double>(row.true_positives) / n_found;
  const int f1_denom = 2 * row.true_positives + row.false_positives + row.false_negatives;
  if (f1_denom > 0) row.f1 = 2.0 * row.true_positives / f1_denom;
  if (row.false_negatives > 0) row.near_miss = static_cast<double>(row.near_misses) / row.false_negatives;
  return row;
}

MetricsReport aggregate(const std::vector<ScoreRow>& rows) {
  auto collect = [&](auto member) {
    std::vector<double> v;
    for (const auto& r : rows) {
      if ((r.*member).has_value()) v.push_back(*(r.*member));
    }
    return summarize(v);
  };
  MetricsReport m;
  m.tpr = collect(&ScoreRow::tpr);
  m.fpr = collect(&ScoreRow::fpr);
  m.precision = collect(&ScoreRow::precision);
  m.f1 = collect(&ScoreRow::f1);
  m.near_miss = collect(&ScoreRow::near_miss);
  return m;
}

std::string method_name(Method m) { return m == Method::bisam ? "bisam" : "alasso"; }

std::uint64_t chain_seed(std::uint64_t master, int layout_index, double size, int rep_index) {
  const std::uint64_t base = derive_seed(master ^ std::bit_cast<std::uint64_t>(size),
                                         0x1000u + static_cast<std::uint64_t>(layout_index));
  return derive_seed(base, static_cast<std::uint64_t>(rep_index));
}

StudyResult run_study(const StudyConfig& config, Execution exec) {
  if (config.layouts.empty() || config.sizes.empty() || config.methods.empty() || config.n_reps <= 0) {
    throw invalid_input("study needs layouts, sizes, methods and a positive replication count");
  }
  config.prior.validate();
  config.sampler.validate();
  config.alasso.validate();

  const int n_layouts = static_cast<int>(config.layouts.size());
  const int n_sizes = static_cast<int>(config.sizes.size());
  const int n_methods = static_cast<int>(config.methods.size());
  const int n_tasks = n_layouts * n_sizes * config.n_reps;

  struct Outcome {
    std::optional<ScoreRow> row;
    std::string error;
  };
  // outcomes[task * n_methods + method]
  std::vector<Outcome> outcomes(static_cast<std::size_t>(n_tasks) * n_methods);

#pragma omp parallel for schedule(dynamic) if (exec == Execution::parallel)
  for (int task = 0; task < n_tasks; ++task) {
    const int rep = task % config.n_reps;
    const int size_index = (task / config.n_reps) % n_sizes;
    const int layout_index = task / (config.n_reps * n_sizes);

    SimDesign sim;
    sim.n_units = config.n_units;
    sim.n_times = config.n_times;
    sim.sigma2 = config.sigma2;
    sim.break_size = config.sizes[size_index];
    sim.layout = config.layouts[layout_index];
    sim.n_reps = config.n_reps;
    sim.seed = derive_seed(config.seed, static_cast<std::uint64_t>(layout_index));
    sim.min_spacing = config.min_spacing;

    std::optional<SimDataset> data;
    std::optional<SaturatedDesign> design;
    std::string setup_error;
    try {
      data = generate(sim, rep);
      design = build_design(data->panel);
    } catch (const std::exception& e) {
      setup_error = e.what();
    }

    for (int m = 0; m < n_methods; ++m) {
      Outcome& out = outcomes[static_cast<std::size_t>(task) * n_methods + m];
      if (!design) {
        out.error = setup_error;
        continue;
      }
      try {
        const Eigen::VectorXd y = stack_response(data->panel);
        std::vector<BreakCandidate> detected;
        if (config.methods[m] == Method::bisam) {
          SamplerConfig sc = config.sampler;
          sc.seed = chain_seed(config.seed, layout_index, sim.break_size, rep);
          const PosteriorDraws draws = run_chain(*design, y, config.prior, sc);
          detected = select_breaks(compute_pips(draws), draws.candidates, config.threshold);
        } else {
          detected = alasso_detect(*design, y, config.alasso, Execution::serial).detected;
        }
        out.row = score(detected, data->truth, design->n_candidates());
      } catch (const std::exception& e) {
        out.error = e.what();
      }
    }
  }

  StudyResult result;
  for (int m = 0; m < n_methods; ++m) {
    for (int l = 0; l < n_layouts; ++l) {
      for (int s = 0; s < n_sizes; ++s) {
        StudyCell cell;
        cell.method = config.methods[m];
        cell.layout = config.layouts[l].name();
        cell.size = config.sizes[s];
        for (int rep = 0; rep < config.n_reps; ++rep) {
          const int task = (l * n_sizes + s) * config.n_reps + rep;
          const Outcome& out = outcomes[static_cast<std::size_t>(task) * n_methods + m];
          if (out.row) {
            cell.rows.push_back(*out.row);
          } else {
            ++cell.failures;
            cell.failure_messages.push_back(fmt::format("rep {}: {}", rep, out.error));
          }
        }
        cell.metrics = aggregate(cell.rows);
        result.cells.push_back(std::move(cell));
      }
    }
  }
  return result;
}

}  // namespace bisam

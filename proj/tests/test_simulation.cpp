#include <cmath>
#include <map>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "bisam/error.hpp"
#include "bisam/simulation.hpp"

using namespace bisam;

namespace {

SimDesign base_design(Layout layout, double size = 2.0) {
  SimDesign d;
  d.layout = std::move(layout);
  d.break_size = size;
  d.seed = 7;
  return d;
}

StudyConfig small_study() {
  StudyConfig c;
  c.n_units = 5;
  c.n_times = 12;
  c.layouts = {Layout::parse("count:2")};
  c.sizes = {0.0, 4.0};
  c.n_reps = 3;
  c.seed = 5;
  c.sampler.n_burn = 50;
  c.sampler.n_draw = 100;
  return c;
}

}  // namespace

TEST(Layouts, Parse) {
  EXPECT_EQ(Layout::parse("sparse").kind, LayoutKind::sparse);
  EXPECT_EQ(Layout::parse("dense").kind, LayoutKind::dense);
  const auto c = Layout::parse("count:7");
  EXPECT_EQ(c.kind, LayoutKind::count);
  EXPECT_EQ(c.break_count, 7);
  EXPECT_EQ(c.name(), "count:7");
  for (const char* bad : {"count:", "count:x", "count:-1", "count:3a", "weird"}) {
    EXPECT_THROW(Layout::parse(bad), Error) << bad;
  }
}

TEST(Generate, SparseLayout) {
  const auto data = generate(base_design(Layout::parse("sparse")), 0);
  ASSERT_EQ(data.truth.size(), 4u);
  std::set<int> units;
  for (const auto& b : data.truth) {
    units.insert(b.unit);
    EXPECT_GE(b.start, 2);
    EXPECT_LE(b.start, 28);
  }
  EXPECT_EQ(units.size(), 4u);
  for (double s : data.truth_sizes) EXPECT_EQ(s, 2.0);
  EXPECT_EQ(data.panel.n_units(), 10);
  EXPECT_EQ(data.panel.n_times(), 30);
  EXPECT_EQ(data.panel.units[0], "unit01");
}

TEST(Generate, DenseLayoutRespectsSpacing) {
  for (int rep = 0; rep < 20; ++rep) {
    const auto data = generate(base_design(Layout::parse("dense")), rep);
    ASSERT_EQ(data.truth.size(), 12u);
    std::map<int, std::vector<int>> per_unit;
    for (const auto& b : data.truth) per_unit[b.unit].push_back(b.start);
    EXPECT_EQ(per_unit.size(), 8u);
    int doubles = 0;
    for (const auto& [u, starts] : per_unit) {
      if (starts.size() == 2) {
        ++doubles;
        EXPECT_GE(std::abs(starts[0] - starts[1]), 3);
      }
    }
    EXPECT_EQ(doubles, 4);
  }
}

TEST(Generate, InfeasibleLayouts) {
  auto d = base_design(Layout::parse("dense"));
  d.n_units = 6;
  EXPECT_THROW(generate(d, 0), Error);
  d = base_design(Layout::parse("count:100"));
  d.n_units = 2;
  d.n_times = 8;
  try {
    generate(d, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "infeasible layout");
  }
}

TEST(Generate, DeterministicWithCommonRandomNumbers) {
  const auto a = generate(base_design(Layout::parse("sparse"), 1.0), 3);
  const auto b = generate(base_design(Layout::parse("sparse"), 1.0), 3);
  EXPECT_EQ(a.panel.y, b.panel.y);
  EXPECT_EQ(a.truth, b.truth);
  const auto c = generate(base_design(Layout::parse("sparse"), 1.0), 4);
  EXPECT_NE(a.panel.y, c.panel.y);

  // Sizes share placements and noise; the panels differ by the steps only.
  const auto big = generate(base_design(Layout::parse("sparse"), 3.0), 3);
  ASSERT_EQ(big.truth, a.truth);
  Eigen::MatrixXd steps = Eigen::MatrixXd::Zero(10, 30);
  for (const auto& br : a.truth) steps.row(br.unit).tail(30 - br.start).array() += 2.0;
  EXPECT_LT((big.panel.y - a.panel.y - steps).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Generate, ZeroSizeHasNoTruth) {
  const auto data = generate(base_design(Layout::parse("sparse"), 0.0), 0);
  EXPECT_TRUE(data.truth.empty());
}

TEST(Score, Counts) {
  // q = 10 candidates, truth {(0,3), (1,5)}, detected {(0,3), (1,6), (2,2)}.
  const auto r = score({{0, 3}, {1, 6}, {2, 2}}, {{0, 3}, {1, 5}}, 10);
  EXPECT_EQ(r.true_positives, 1);
  EXPECT_EQ(r.false_positives, 2);
  EXPECT_EQ(r.false_negatives, 1);
  EXPECT_EQ(r.near_misses, 1);
  EXPECT_DOUBLE_EQ(*r.tpr, 0.5);
  EXPECT_DOUBLE_EQ(*r.fpr, 2.0 / 8.0);
  EXPECT_DOUBLE_EQ(*r.precision, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(*r.f1, 2.0 / 5.0);
  EXPECT_DOUBLE_EQ(*r.near_miss, 1.0);
}

TEST(Score, UndefinedMetrics) {
  const auto none = score({}, {}, 10);
  EXPECT_FALSE(none.tpr);
  EXPECT_FALSE(none.precision);
  EXPECT_FALSE(none.f1);
  EXPECT_FALSE(none.near_miss);
  EXPECT_DOUBLE_EQ(*none.fpr, 0.0);

  const auto perfect = score({{0, 2}}, {{0, 2}}, 5);
  EXPECT_DOUBLE_EQ(*perfect.f1, 1.0);
  EXPECT_FALSE(perfect.near_miss);

  // A detection next to a true break that is itself real is not a near miss.
  const auto adjacent = score({{0, 3}}, {{0, 2}, {0, 3}}, 10);
  EXPECT_EQ(adjacent.near_misses, 0);
  // Duplicates count once.
  const auto dup = score({{0, 2}, {0, 2}}, {{0, 2}}, 5);
  EXPECT_EQ(dup.true_positives, 1);
  EXPECT_EQ(dup.false_positives, 0);
}

TEST(Aggregate, MeanAndStandardError) {
  std::vector<ScoreRow> rows(3);
  rows[0].tpr = 1.0;
  rows[1].tpr = 0.5;
  rows[2].tpr = 0.0;
  rows[0].f1 = 0.4;
  const auto m = aggregate(rows);
  EXPECT_EQ(m.tpr.n, 3);
  EXPECT_DOUBLE_EQ(*m.tpr.mean, 0.5);
  EXPECT_DOUBLE_EQ(*m.tpr.se, 0.5 / std::sqrt(3.0));
  EXPECT_EQ(m.f1.n, 1);
  EXPECT_DOUBLE_EQ(*m.f1.mean, 0.4);
  EXPECT_FALSE(m.f1.se);
  EXPECT_EQ(m.precision.n, 0);
  EXPECT_FALSE(m.precision.mean);
}

TEST(Study, SerialMatchesParallel) {
  const auto cfg = small_study();
  const auto a = run_study(cfg, Execution::serial);
  const auto b = run_study(cfg, Execution::parallel);
  ASSERT_EQ(a.cells.size(), 4u);
  ASSERT_EQ(a.cells.size(), b.cells.size());
  for (std::size_t k = 0; k < a.cells.size(); ++k) {
    EXPECT_EQ(a.cells[k].method, b.cells[k].method);
    EXPECT_EQ(a.cells[k].size, b.cells[k].size);
    ASSERT_EQ(a.cells[k].rows.size(), b.cells[k].rows.size());
    for (std::size_t r = 0; r < a.cells[k].rows.size(); ++r) {
      EXPECT_EQ(a.cells[k].rows[r].true_positives, b.cells[k].rows[r].true_positives);
      EXPECT_EQ(a.cells[k].rows[r].false_positives, b.cells[k].rows[r].false_positives);
    }
    EXPECT_EQ(a.cells[k].metrics.fpr.mean, b.cells[k].metrics.fpr.mean);
  }
  // Cell order: method-major, then layout, then size.
  EXPECT_EQ(a.cells[0].method, Method::bisam);
  EXPECT_EQ(a.cells[1].size, 4.0);
  EXPECT_EQ(a.cells[2].method, Method::alasso);
  EXPECT_EQ(a.cells[0].rows.size(), 3u);
  EXPECT_EQ(a.cells[0].metrics.tpr.n, 0);  // no true breaks at size 0
}

TEST(Study, FailuresAreCounted) {
  auto cfg = small_study();
  cfg.layouts = {Layout::parse("count:200")};
  cfg.methods = {Method::alasso};
  const auto res = run_study(cfg, Execution::serial);
  for (const auto& cell : res.cells) {
    EXPECT_EQ(cell.failures, 3);
    EXPECT_TRUE(cell.rows.empty());
    ASSERT_FALSE(cell.failure_messages.empty());
    EXPECT_EQ(cell.failure_messages[0], "rep 0: infeasible layout");
  }
}

TEST(Study, Validation) {
  auto cfg = small_study();
  cfg.n_reps = 0;
  EXPECT_THROW(run_study(cfg), Error);
  cfg = small_study();
  cfg.sizes.clear();
  EXPECT_THROW(run_study(cfg), Error);
}

TEST(ChainSeed, DistinctStreams) {
  std::set<std::uint64_t> seen;
  for (int l = 0; l < 2; ++l) {
    for (double s : {1.0, 2.0}) {
      for (int r = 0; r < 5; ++r) seen.insert(chain_seed(1, l, s, r));
    }
  }
  EXPECT_EQ(seen.size(), 20u);
  EXPECT_EQ(chain_seed(1, 0, 1.0, 0), chain_seed(1, 0, 1.0, 0));
}

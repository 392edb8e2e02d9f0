#include <gtest/gtest.h>

#include "bisam/error.hpp"
#include "bisam/panel.hpp"
#include "support.hpp"

using namespace bisam;

namespace {

bool in_span(const Eigen::MatrixXd& basis, const Eigen::VectorXd& v) {
  const Eigen::VectorXd coef = basis.colPivHouseholderQr().solve(v);
  return (basis * coef - v).norm() < 1e-9 * std::max(1.0, v.norm());
}

}  // namespace

TEST(Design, SmallPanelCandidates) {
  const auto design = build_design(test::noisy_panel(3, 5, 1));
  ASSERT_EQ(design.n_candidates(), 6);
  const std::vector<BreakCandidate> expected{{0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 2}, {2, 3}};
  EXPECT_EQ(design.candidates, expected);
  for (int c = 0; c < 6; ++c) {
    EXPECT_EQ(candidate_index(expected[c].unit, expected[c].start, 5), c);
  }
}

TEST(Design, PaperDimensions) {
  const auto design = build_design(test::noisy_panel(10, 30, 2));
  EXPECT_EQ(design.n_candidates(), 270);
  EXPECT_EQ(design.n_rows(), 300);
  EXPECT_EQ(design.n_mean(), 1 + 9 + 29);
}

TEST(Design, StepColumnMatchesDefinition) {
  const auto design = build_design(test::noisy_panel(3, 5, 3));
  const Eigen::VectorXd col = design.D.col(candidate_index(0, 2, 5));
  Eigen::VectorXd expected = Eigen::VectorXd::Zero(15);
  expected.segment(2, 3).setOnes();
  EXPECT_EQ(col, expected);
  EXPECT_EQ(col, step_column(3, 5, 0, 2));
}

TEST(Design, ColumnsLiveInTheirUnit) {
  const int n = 4;
  const int t = 9;
  const auto design = build_design(test::noisy_panel(n, t, 4));
  for (int c = 0; c < design.n_candidates(); ++c) {
    const auto& cand = design.candidates[c];
    for (int i = 0; i < n; ++i) {
      const auto block = design.D.col(c).segment(i * t, t);
      if (i != cand.unit) {
        EXPECT_EQ(block.sum(), 0.0);
      } else {
        EXPECT_EQ(block.sum(), t - cand.start);
        EXPECT_EQ(block.head(cand.start).sum(), 0.0);
      }
    }
  }
}

TEST(Design, MeanBlockHasFullRankAndReferenceCoding) {
  auto panel = test::noisy_panel(4, 7, 5);
  panel.covariates.push_back(Eigen::MatrixXd::Random(4, 7));
  panel.covariate_names.push_back("x");
  const auto design = build_design(panel);
  EXPECT_EQ(design.n_mean(), 1 + 3 + 6 + 1);
  EXPECT_EQ(design.z_names.front(), "intercept");
  EXPECT_EQ(design.z_names[1], "unit:u2");
  EXPECT_EQ(design.z_names[4], "time:2");
  EXPECT_EQ(design.z_names.back(), "x");
  EXPECT_EQ(design.Z.colPivHouseholderQr().rank(), design.n_mean());
}

TEST(Design, AdmissibleColumnsAreNotInMeanSpan) {
  const auto design = build_design(test::noisy_panel(3, 8, 6));
  for (int c = 0; c < design.n_candidates(); ++c) {
    EXPECT_FALSE(in_span(design.Z, design.D.col(c))) << c;
  }
}

TEST(Design, ExcludedStartsDuplicateEffectsOrSingleObservations) {
  const int n = 3;
  const int t = 8;
  const auto design = build_design(test::noisy_panel(n, t, 7));
  for (int j = 0; j < n; ++j) {
    // Start at the first period is the unit effect itself.
    EXPECT_TRUE(in_span(design.Z, step_column(n, t, j, 0)));
    // Start at the second period is the unit effect minus one impulse.
    Eigen::VectorXd impulse_first = Eigen::VectorXd::Zero(n * t);
    impulse_first(j * t) = 1.0;
    Eigen::MatrixXd aug(n * t, design.n_mean() + 1);
    aug << design.Z, impulse_first;
    EXPECT_TRUE(in_span(aug, step_column(n, t, j, 1)));
    // Start at the last period is a single-observation dummy.
    Eigen::VectorXd impulse_last = Eigen::VectorXd::Zero(n * t);
    impulse_last(j * t + t - 1) = 1.0;
    EXPECT_EQ(step_column(n, t, j, t - 1), impulse_last);
  }
}

TEST(Design, NoiselessRecoveryOnTrueSupport) {
  const int n = 4;
  const int t = 10;
  auto panel = test::noisy_panel(n, t, 8, 0.0);
  test::add_step(panel, 1, 4, 2.5);
  test::add_step(panel, 3, 7, -1.25);
  const auto design = build_design(panel);
  const Eigen::VectorXd y = stack_response(panel);
  Eigen::MatrixXd X(design.n_rows(), design.n_mean() + 2);
  X << design.Z, design.D.col(candidate_index(1, 4, t)), design.D.col(candidate_index(3, 7, t));
  const Eigen::VectorXd coef = X.colPivHouseholderQr().solve(y);
  EXPECT_NEAR(coef(design.n_mean()), 2.5, 1e-10);
  EXPECT_NEAR(coef(design.n_mean() + 1), -1.25, 1e-10);
  EXPECT_LT((X * coef - y).norm(), 1e-10);
}

TEST(Design, StackingIsUnitMajor) {
  Eigen::MatrixXd y(2, 5);
  y << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10;
  const Eigen::VectorXd v = stack_response(test::make_panel(y));
  for (int r = 0; r < 10; ++r) EXPECT_EQ(v(r), r + 1);
}

TEST(Design, DegenerateHorizon) {
  try {
    build_design(test::noisy_panel(3, 4, 9));
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "degenerate horizon");
    EXPECT_EQ(e.kind(), ErrorKind::invalid_input);
  }
}

TEST(Design, CollinearCovariate) {
  auto panel = test::noisy_panel(3, 6, 10);
  panel.covariates.push_back(Eigen::MatrixXd::Constant(3, 6, 2.0));
  panel.covariate_names.push_back("const");
  EXPECT_THROW(
      {
        try {
          build_design(panel);
        } catch (const Error& e) {
          EXPECT_STREQ(e.what(), "collinear mean design");
          throw;
        }
      },
      Error);
}

TEST(Design, WithoutEffects) {
  auto panel = test::noisy_panel(3, 6, 11);
  panel.include_unit_fe = false;
  panel.include_time_fe = false;
  EXPECT_EQ(build_design(panel).n_mean(), 1);
  panel.include_intercept = false;
  EXPECT_EQ(build_design(panel).n_mean(), 0);
  panel.include_unit_fe = true;
  EXPECT_EQ(build_design(panel).n_mean(), 3);
}

TEST(Panel, Validation) {
  auto panel = test::noisy_panel(3, 6, 12);
  panel.y(1, 2) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(panel.validate(), Error);

  auto single = test::noisy_panel(1, 6, 13);
  EXPECT_THROW(single.validate(), Error);

  auto unordered = test::noisy_panel(2, 6, 14);
  std::swap(unordered.times[0], unordered.times[1]);
  EXPECT_THROW(unordered.validate(), Error);
}

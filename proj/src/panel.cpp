#include "bisam/panel.hpp"

#include <cmath>
#include <string>

#include <fmt/format.h>

#include "bisam/error.hpp"

namespace bisam {

void PanelData::validate() const {
  const int n = n_units();
  const int t = n_times();
  if (n < 2) throw invalid_input(fmt::format("panel needs at least 2 units, got {}", n));
  if (t < 5) throw invalid_input("degenerate horizon");
  if (y.rows() != n || y.cols() != t) {
    throw invalid_input(fmt::format("response is {}x{}, expected {}x{}", y.rows(), y.cols(), n, t));
  }
  for (int k = 1; k < t; ++k) {
    if (times[k] <= times[k - 1]) throw invalid_input("time labels must be strictly increasing");
  }
  if (covariate_names.size() != covariates.size()) {
    throw invalid_input("covariate names and covariate matrices differ in count");
  }
  for (int i = 0; i < n; ++i) {
    for (int s = 0; s < t; ++s) {
      if (!std::isfinite(y(i, s))) {
        throw invalid_input(fmt::format("missing cell ({}, {})", units[i], times[s]));
      }
    }
  }
  for (std::size_t c = 0; c < covariates.size(); ++c) {
    const auto& x = covariates[c];
    if (x.rows() != n || x.cols() != t) {
      throw invalid_input(fmt::format("covariate '{}' has wrong shape", covariate_names[c]));
    }
    if (!x.allFinite()) {
      throw invalid_input(fmt::format("covariate '{}' has non-finite cells", covariate_names[c]));
    }
  }
}

Eigen::VectorXd stack_response(const PanelData& panel) {
  const int n = panel.n_units();
  const int t = panel.n_times();
  Eigen::VectorXd out(n * t);
  for (int i = 0; i < n; ++i) {
    for (int s = 0; s < t; ++s) out(i * t + s) = panel.y(i, s);
  }
  return out;
}

Eigen::VectorXd step_column(int n_units, int n_times, int unit, int start) {
  Eigen::VectorXd col = Eigen::VectorXd::Zero(n_units * n_times);
  for (int s = start; s < n_times; ++s) col(unit * n_times + s) = 1.0;
  return col;
}

SaturatedDesign build_design(const PanelData& panel) {
  if (panel.n_times() < 5) throw invalid_input("degenerate horizon");
  panel.validate();

  const int n = panel.n_units();
  const int t = panel.n_times();
  const int rows = n * t;

  SaturatedDesign design;
  design.n_units = n;
  design.n_times = t;

  // Reference-category coding: with an intercept the first dummy of each
  // fixed-effect set is dropped. Without one, unit effects keep all levels
  // and time effects drop their first level when unit effects are present.
  const bool intercept = panel.include_intercept;
  const int unit_first = intercept ? 1 : 0;
  const int time_first = (intercept || panel.include_unit_fe) ? 1 : 0;

  std::vector<Eigen::VectorXd> cols;
  auto add = [&](std::string name, Eigen::VectorXd col) {
    design.z_names.push_back(std::move(name));
    cols.push_back(std::move(col));
  };

  if (intercept) add("intercept", Eigen::VectorXd::Ones(rows));
  if (panel.include_unit_fe) {
    for (int i = unit_first; i < n; ++i) {
      Eigen::VectorXd col = Eigen::VectorXd::Zero(rows);
      col.segment(i * t, t).setOnes();
      add("unit:" + panel.units[i], std::move(col));
    }
  }
  if (panel.include_time_fe) {
    for (int s = time_first; s < t; ++s) {
      Eigen::VectorXd col = Eigen::VectorXd::Zero(rows);
      for (int i = 0; i < n; ++i) col(i * t + s) = 1.0;
      add("time:" + std::to_string(panel.times[s]), std::move(col));
    }
  }
  for (int c = 0; c < panel.n_covariates(); ++c) {
    Eigen::VectorXd col(rows);
    for (int i = 0; i < n; ++i) {
      for (int s = 0; s < t; ++s) col(i * t + s) = panel.covariates[c](i, s);
    }
    add(panel.covariate_names[c], std::move(col));
  }

  design.Z.resize(rows, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) design.Z.col(static_cast<Eigen::Index>(k)) = cols[k];

  if (design.Z.cols() > 0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design.Z);
    if (qr.rank() < design.Z.cols()) throw invalid_input("collinear mean design");
  }

  const int per_unit = starts_per_unit(t);
  design.D = Eigen::MatrixXd::Zero(rows, n * per_unit);
  design.candidates.reserve(static_cast<std::size_t>(n * per_unit));
  for (int j = 0; j < n; ++j) {
    for (int s = first_admissible_start(); s <= last_admissible_start(t); ++s) {
      const int c = candidate_index(j, s, t);
      design.D.col(c).segment(j * t + s, t - s).setOnes();
      design.candidates.push_back({j, s});
    }
  }
  return design;
}

}  // namespace bisam

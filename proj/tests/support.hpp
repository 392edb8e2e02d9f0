#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "bisam/panel.hpp"
#include "bisam/rng.hpp"

namespace bisam::test {

inline PanelData make_panel(const Eigen::MatrixXd& y) {
  PanelData p;
  for (Eigen::Index i = 0; i < y.rows(); ++i) p.units.push_back(fmt::format("u{}", i + 1));
  for (Eigen::Index t = 0; t < y.cols(); ++t) p.times.push_back(t + 1);
  p.y = y;
  return p;
}

/// Unit and time effects from N(0, 1) plus N(0, sd^2) noise.
inline PanelData noisy_panel(int n, int t, std::uint64_t seed, double sd = 1.0) {
  Rng rng(seed);
  Eigen::VectorXd a(n);
  Eigen::VectorXd b(t);
  for (int i = 0; i < n; ++i) a(i) = standard_normal(rng);
  for (int s = 0; s < t; ++s) b(s) = standard_normal(rng);
  Eigen::MatrixXd y(n, t);
  for (int i = 0; i < n; ++i) {
    for (int s = 0; s < t; ++s) y(i, s) = a(i) + b(s) + sd * standard_normal(rng);
  }
  return make_panel(y);
}

inline void add_step(PanelData& p, int unit, int start, double size) {
  for (int s = start; s < p.n_times(); ++s) p.y(unit, s) += size;
}

}  // namespace bisam::test

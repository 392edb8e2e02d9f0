#pragma once

#include <vector>

#include "bisam/imom.hpp"
#include "bisam/rng.hpp"

namespace bisam {

/// Full conditional of a single break size under the iMOM slab.
///
/// The Gaussian likelihood of the coordinate is summarized by its
/// precision A and least-squares centre b, i.e. it is proportional to
/// exp(A b g - A g^2 / 2). `evaluate` computes
///
///   log BF = log integral exp(A b g - A g^2 / 2) pi_iMOM(g) dg,
///
/// the log ratio of slab to spike marginal likelihoods, on a
/// deterministic grid adapted to the integrand: each half-line gets a
/// uniform grid centred on its mode and wide enough that the neglected
/// tails are below exp(-40) of the peak (the log integrand is uniformly
/// concave whenever A exceeds the prior's maximal log-curvature). When it
/// is not, the half-line falls back to a logarithmic grid. The draw is an
/// exact inverse-CDF on the piecewise-linear interpolant of the same grid.
class SlabPosterior {
 public:
  explicit SlabPosterior(int grid_points = 400);

  /// Returns log BF; non-finite when both half-lines underflow.
  double evaluate(double precision, double center, const IMomParams& slab);

  double log_bayes_factor() const { return log_bayes_factor_; }

  /// Draws from the normalized conditional built by the last `evaluate`.
  double sample(Rng& rng) const;

  int grid_points() const { return 2 * half_points_; }

 private:
  struct Half {
    double lo = 0.0;
    double step = 0.0;
    bool log_grid = false;
    double log_mass = 0.0;
    std::vector<double> rel;  // integrand / peak at the nodes
    std::vector<double> cum;  // cumulative trapezoid mass, cum[0] = 0
  };

  void build_half(Half& half, double precision, double signed_center, const IMomParams& slab) const;
  double sample_half(const Half& half, Rng& rng) const;

  int half_points_;
  double center_shift_ = 0.0;
  Half positive_;
  Half negative_;
  double log_bayes_factor_ = 0.0;
};

}  // namespace bisam

#pragma once

#include <optional>

#include "bisam/rng.hpp"

namespace bisam {

/// Inverse-moment (iMOM) density parameters:
///   pi(x) = k s^{nu/2} / Gamma(nu / 2k) |x - c|^{-(nu+1)} exp{-(|x - c|^2 / s)^{-k}}
/// with center c, order k, shape nu and scale s (tau * sigma^2 for a slab).
struct IMomParams {
  double center = 0.0;
  double order = 1.0;
  double shape = 1.0;
  double scale = 1.0;

  /// Throws "invalid iMOM parameters" unless order, shape and scale are
  /// positive and finite.
  void validate() const;

  /// E|x - c|^2 is finite only when shape > 2.
  bool has_variance() const { return shape > 2.0; }
};

/// Log of the normalizing constant k s^{nu/2} / Gamma(nu / 2k).
double imom_log_normalizer(const IMomParams& params);

/// Log density; -infinity at the center (the density vanishes there).
double imom_log_density(double x, const IMomParams& params);

double imom_density(double x, const IMomParams& params);

/// Central absolute moment E|x - c|^r, or nullopt when shape <= r.
std::optional<double> imom_moment(int r, const IMomParams& params);

/// P(|x - c| <= radius), closed form through the regularized upper
/// incomplete gamma function: (s / radius^2)^k ~ Gamma(nu / 2k, 1).
double imom_central_probability(double radius, const IMomParams& params);

/// Same probability by adaptive quadrature of the density.
double imom_central_probability_quadrature(double radius, const IMomParams& params);

/// Slab scale multiplier tau such that P(|gamma| <= multiple * sigma) = p_small
/// under iMOM(0, k = 1, nu = 1, tau * sigma^2). Closed form through the
/// chi-square(1) quantile: tau = multiple^2 * q_{chi2_1}(1 - p_small) / 2.
double calibrate_tau(double p_small, double threshold_multiple = 1.0);

/// Root-finding on the quadrature CDF; valid for any order and shape.
double calibrate_tau_numeric(double p_small, double threshold_multiple = 1.0,
                             double order = 1.0, double shape = 1.0);

/// Exact draw: u = (s / (x - c)^2)^k ~ Gamma(nu / 2k, 1) with a fair sign.
double imom_sample(const IMomParams& params, Rng& rng);

}  // namespace bisam

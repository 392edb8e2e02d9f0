#include "bisam/imom.hpp"

#include <cmath>
#include <limits>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/roots.hpp>

#include "bisam/error.hpp"
#include "bisam/quadrature.hpp"

namespace bisam {

namespace {

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

void check_probability(double p) {
  if (!(p > 0.0 && p < 1.0)) throw invalid_input("invalid probability");
}

}  // namespace

void IMomParams::validate() const {
  if (!std::isfinite(center) || !positive_finite(order) || !positive_finite(shape) ||
      !positive_finite(scale)) {
    throw invalid_input("invalid iMOM parameters");
  }
}

double imom_log_normalizer(const IMomParams& params) {
  return std::log(params.order) + 0.5 * params.shape * std::log(params.scale) -
         std::lgamma(params.shape / (2.0 * params.order));
}

double imom_log_density(double x, const IMomParams& params) {
  params.validate();
  const double d = std::abs(x - params.center);
  if (d == 0.0) return -std::numeric_limits<double>::infinity();
  const double ratio = d * d / params.scale;
  return imom_log_normalizer(params) - (params.shape + 1.0) * std::log(d) -
         std::pow(ratio, -params.order);
}

double imom_density(double x, const IMomParams& params) {
  return std::exp(imom_log_density(x, params));
}

std::optional<double> imom_moment(int r, const IMomParams& params) {
  params.validate();
  if (r < 1) throw invalid_input("moment order must be positive");
  if (params.shape <= r) return std::nullopt;
  const double two_k = 2.0 * params.order;
  return std::pow(params.scale, 0.5 * r) *
         std::exp(std::lgamma((params.shape - r) / two_k) - std::lgamma(params.shape / two_k));
}

double imom_central_probability(double radius, const IMomParams& params) {
  params.validate();
  if (!(radius > 0.0)) return 0.0;
  if (std::isinf(radius)) return 1.0;
  const double u = std::pow(params.scale / (radius * radius), params.order);
  return boost::math::gamma_q(params.shape / (2.0 * params.order), u);
}

double imom_central_probability_quadrature(double radius, const IMomParams& params) {
  params.validate();
  if (!(radius > 0.0)) return 0.0;
  auto f = [&](double x) { return imom_density(params.center + x, params); };
  const QuadratureResult half = integrate(f, 0.0, radius);
  return 2.0 * half.value;
}

double calibrate_tau(double p_small, double threshold_multiple) {
  check_probability(p_small);
  if (!positive_finite(threshold_multiple)) throw invalid_input("threshold multiple must be positive");
  const boost::math::chi_squared chi2(1.0);
  const double q = boost::math::quantile(boost::math::complement(chi2, p_small));
  return threshold_multiple * threshold_multiple * q / 2.0;
}

double calibrate_tau_numeric(double p_small, double threshold_multiple, double order, double shape) {
  check_probability(p_small);
  if (!positive_finite(threshold_multiple)) throw invalid_input("threshold multiple must be positive");

  // Work with sigma = 1: the probability depends on tau and the multiple only.
  auto excess = [&](double log_tau) {
    const IMomParams params{0.0, order, shape, std::exp(log_tau)};
    return imom_central_probability_quadrature(threshold_multiple, params) - p_small;
  };

  // The central probability falls monotonically as tau grows.
  double lo = std::log(1e-8);
  double hi = std::log(1e8);
  if (excess(lo) < 0.0 || excess(hi) > 0.0) {
    throw numerical_failure("tau calibration could not bracket a root");
  }
  std::uintmax_t max_iter = 200;
  const auto root = boost::math::tools::toms748_solve(
      excess, lo, hi, boost::math::tools::eps_tolerance<double>(45), max_iter);
  return std::exp(0.5 * (root.first + root.second));
}

double imom_sample(const IMomParams& params, Rng& rng) {
  params.validate();
  const double u = standard_gamma(rng, params.shape / (2.0 * params.order));
  const double magnitude = std::sqrt(params.scale) * std::pow(u, -0.5 / params.order);
  const double sign = (rng() >> 63) ? 1.0 : -1.0;
  return params.center + sign * magnitude;
}

}  // namespace bisam

#include "bisam/slab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bisam/error.hpp"

namespace bisam {

namespace {

constexpr double neg_inf = -std::numeric_limits<double>::infinity();

// Half-width of the uniform grid in units of 1/sqrt(curvature bound).
constexpr double width_in_scales = 9.0;
// Fallback logarithmic grid spans this many e-folds below the prior mode.
constexpr double log_grid_below = 6.0;

double log_add(double a, double b) {
  if (a == neg_inf) return b;
  if (b == neg_inf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(-std::abs(a - b)));
}

// Log integrand on the half-line x > 0, where x = |g - center|:
//   psi(x) = A b x - A x^2 / 2 + log pi(x).
struct HalfIntegrand {
  double precision;
  double center;
  double log_norm;
  double order;
  double shape;
  double scale_pow;  // s^k

  double operator()(double x) const {
    if (x <= 0.0) return neg_inf;
    const double inv = order == 1.0 ? scale_pow / (x * x) : scale_pow * std::pow(x, -2.0 * order);
    return precision * x * (center - 0.5 * x) + log_norm - (shape + 1.0) * std::log(x) - inv;
  }

  double slope(double x) const {
    const double tail = order == 1.0 ? 2.0 * scale_pow / (x * x * x)
                                     : 2.0 * order * scale_pow * std::pow(x, -2.0 * order - 1.0);
    return precision * (center - x) - (shape + 1.0) / x + tail;
  }

  double curvature(double x) const {
    const double tail = order == 1.0
                            ? 6.0 * scale_pow / (x * x * x * x)
                            : 2.0 * order * (2.0 * order + 1.0) * scale_pow * std::pow(x, -2.0 * order - 2.0);
    return -precision + (shape + 1.0) / (x * x) - tail;
  }

  // Supremum over x of the prior's log-curvature (nu+1)/x^2 - 2k(2k+1) s^k x^{-2k-2}.
  double max_prior_curvature() const {
    const double k = order;
    const double vk = (shape + 1.0) / (2.0 * k * (2.0 * k + 1.0) * (k + 1.0) * scale_pow);
    const double v = std::pow(vk, 1.0 / k);
    return (shape + 1.0) * v * k / (k + 1.0);
  }

  double prior_mode() const {
    return std::pow(2.0 * order * scale_pow / (shape + 1.0), 0.5 / order);
  }
};

// Root of the slope on (0, inf): slope -> +inf at 0 and -inf at infinity.
double find_mode(const HalfIntegrand& f) {
  double x = std::max(f.center, f.prior_mode());
  double lo = x;
  double hi = x;
  for (int k = 0; k < 2000 && f.slope(lo) <= 0.0; ++k) lo *= 0.5;
  for (int k = 0; k < 2000 && f.slope(hi) >= 0.0; ++k) hi *= 2.0;
  x = std::clamp(x, lo, hi);
  for (int it = 0; it < 100; ++it) {
    const double g = f.slope(x);
    if (g > 0.0) lo = x; else hi = x;
    const double h = f.curvature(x);
    double next = h < 0.0 ? x - g / h : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-12 * x) return next;
    x = next;
  }
  return x;
}

}  // namespace

SlabPosterior::SlabPosterior(int grid_points) : half_points_(std::max(grid_points / 2, 8)) {
  for (Half* h : {&positive_, &negative_}) {
    h->rel.assign(static_cast<std::size_t>(half_points_), 0.0);
    h->cum.assign(static_cast<std::size_t>(half_points_), 0.0);
  }
}

void SlabPosterior::build_half(Half& half, double precision, double signed_center,
                               const IMomParams& slab) const {
  const HalfIntegrand f{precision, signed_center, imom_log_normalizer(slab), slab.order, slab.shape,
                        std::pow(slab.scale, slab.order)};
  const double mode = find_mode(f);
  const double bound = precision - f.max_prior_curvature();
  const int n = half_points_;

  half.log_grid = !(bound >= 0.5 * precision);
  double peak = neg_inf;
  auto& rel = half.rel;

  if (!half.log_grid) {
    const double width = width_in_scales / std::sqrt(bound);
    half.lo = std::max(mode - width, 0.0);
    half.step = (mode + width - half.lo) / (n - 1);
    for (int i = 0; i < n; ++i) {
      rel[i] = f(half.lo + i * half.step);
      peak = std::max(peak, rel[i]);
    }
  } else {
    // Weak likelihood: integrate over u = log x with Jacobian x.
    const double anchor = std::max(mode, f.prior_mode());
    const double reach = std::max(anchor, f.center) + width_in_scales / std::sqrt(precision);
    const double u_lo = std::log(anchor) - log_grid_below;
    const double u_hi = std::min(std::log(reach), std::log(anchor) + 30.0);
    half.lo = u_lo;
    half.step = (u_hi - u_lo) / (n - 1);
    for (int i = 0; i < n; ++i) {
      const double u = u_lo + i * half.step;
      rel[i] = f(std::exp(u)) + u;
      peak = std::max(peak, rel[i]);
    }
  }

  if (!std::isfinite(peak)) {
    half.log_mass = neg_inf;
    std::fill(half.cum.begin(), half.cum.end(), 0.0);
    return;
  }
  for (int i = 0; i < n; ++i) rel[i] = std::exp(rel[i] - peak);
  half.cum[0] = 0.0;
  for (int i = 1; i < n; ++i) half.cum[i] = half.cum[i - 1] + 0.5 * (rel[i - 1] + rel[i]);
  const double total = half.cum[n - 1] * half.step;
  half.log_mass = total > 0.0 ? peak + std::log(total) : neg_inf;
}

double SlabPosterior::evaluate(double precision, double center, const IMomParams& slab) {
  if (!(precision > 0.0) || !std::isfinite(precision) || !std::isfinite(center)) {
    log_bayes_factor_ = std::numeric_limits<double>::quiet_NaN();
    return log_bayes_factor_;
  }
  // Shift to the slab centre c: A b g - A g^2/2 = A (b - c) x - A x^2/2 + A c (b - c/2).
  const double shifted = center - slab.center;
  center_shift_ = slab.center;
  build_half(positive_, precision, shifted, slab);
  build_half(negative_, precision, -shifted, slab);
  const double constant = precision * slab.center * (center - 0.5 * slab.center);
  log_bayes_factor_ = log_add(positive_.log_mass, negative_.log_mass) + constant;
  return log_bayes_factor_;
}

double SlabPosterior::sample_half(const Half& half, Rng& rng) const {
  const int n = half_points_;
  const double target = uniform_open(rng) * half.cum[n - 1];
  const auto it = std::upper_bound(half.cum.begin() + 1, half.cum.end(), target);
  const int cell = std::min(static_cast<int>(it - half.cum.begin()), n - 1) - 1;

  // Invert the linear density f0 + (f1 - f0) t on the cell.
  const double f0 = half.rel[cell];
  const double f1 = half.rel[cell + 1];
  const double m = target - half.cum[cell];
  const double disc = std::max(f0 * f0 + 2.0 * (f1 - f0) * m, 0.0);
  const double denom = f0 + std::sqrt(disc);
  const double t = denom > 0.0 ? std::clamp(2.0 * m / denom, 0.0, 1.0) : uniform_open(rng);
  const double pos = half.lo + (cell + t) * half.step;
  return half.log_grid ? std::exp(pos) : pos;
}

double SlabPosterior::sample(Rng& rng) const {
  if (!std::isfinite(log_bayes_factor_)) throw numerical_failure("slab conditional is not finite");
  const double p_positive =
      1.0 / (1.0 + std::exp(negative_.log_mass - positive_.log_mass));
  const bool positive = uniform_open(rng) < p_positive;
  const double x = sample_half(positive ? positive_ : negative_, rng);
  return center_shift_ + (positive ? x : -x);
}

}  // namespace bisam

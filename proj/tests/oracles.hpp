#pragma once

// Reference computations for the sampler tests. They only use boost
// quadrature and closed forms, never the library's own integrators.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/tools/minima.hpp>

#include "bisam/imom.hpp"

namespace bisam::oracle {

inline constexpr double inf = std::numeric_limits<double>::infinity();
inline constexpr double nan_value = std::numeric_limits<double>::quiet_NaN();

/// log of the integral of exp(phi(g)) over the real line. `peaks` lists
/// points where phi may be concentrated; the line is split there and the
/// integrand is scaled by its largest value.
inline double log_integrate(const std::function<double(double)>& phi, std::vector<double> peaks) {
  peaks.push_back(0.0);
  std::sort(peaks.begin(), peaks.end());
  peaks.erase(std::unique(peaks.begin(), peaks.end()), peaks.end());

  // Reference level from a wide scan, refined around the best point.
  double ref = -inf;
  double arg = 0.0;
  for (double c : peaks) {
    for (int k = -160; k <= 160; ++k) {
      const double g = c + k * 0.05;
      if (g == 0.0) continue;
      const double v = phi(g);
      if (v > ref) {
        ref = v;
        arg = g;
      }
    }
  }
  if (ref == -inf) return -inf;
  const auto refined = boost::math::tools::brent_find_minima([&](double g) { return -phi(g); }, arg - 0.05,
                                                             arg + 0.05, 40);
  ref = std::max(ref, -refined.second);
  // The scan can miss a narrow peak; integrate again at the highest level
  // seen until no evaluation exceeds the reference.
  boost::math::quadrature::tanh_sinh<double> finite;
  boost::math::quadrature::exp_sinh<double> tail;
  for (int attempt = 0; attempt < 8; ++attempt) {
    double seen = -inf;
    auto f = [&](double g) {
      const double v = phi(g);
      if (!(v > -inf)) return 0.0;
      seen = std::max(seen, v);
      return std::exp(std::min(v - ref, 50.0));
    };
    double total = tail.integrate([&](double x) { return f(peaks.front() - x); }, 1e-13);
    for (std::size_t k = 0; k + 1 < peaks.size(); ++k) {
      if (peaks[k + 1] > peaks[k]) total += finite.integrate(f, peaks[k], peaks[k + 1], 1e-13);
    }
    total += tail.integrate([&](double x) { return f(peaks.back() + x); }, 1e-13);
    if (seen <= ref + 1.0) return ref + std::log(total);
    ref = seen;
  }
  return nan_value;
}

/// Posterior model probabilities over the 2^K inclusion patterns of K <= 2
/// candidates, given the log marginal likelihood of each pattern.
inline std::vector<double> pips_from_models(const std::vector<double>& log_marginal, int k, double omega) {
  const int models = 1 << k;
  std::vector<double> lp(models);
  for (int m = 0; m < models; ++m) {
    const int size = __builtin_popcount(static_cast<unsigned>(m));
    lp[m] = log_marginal[m] + size * std::log(omega) + (k - size) * std::log1p(-omega);
  }
  const double top = *std::max_element(lp.begin(), lp.end());
  double z = 0.0;
  for (double& v : lp) z += (v = std::exp(v - top));
  std::vector<double> pip(k, 0.0);
  for (int m = 0; m < models; ++m) {
    for (int c = 0; c < k; ++c) {
      if (m & (1 << c)) pip[c] += lp[m] / z;
    }
  }
  return pip;
}

/// Log marginal likelihood of each inclusion pattern of K <= 2 candidates.
/// `loglik(g0, g1)` is the log likelihood with excluded sizes passed as 0;
/// `hints` are points near which the integrand may concentrate;
/// `conditional_hint(g0)` locates the peak in g1 given g0 for the pair.
using LogLik = std::function<double(double, double)>;

inline std::vector<double> model_evidence(const LogLik& loglik, const std::vector<IMomParams>& slabs,
                                          const std::vector<double>& hints,
                                          const std::function<double(double)>& conditional_hint = {}) {
  const int k = static_cast<int>(slabs.size());
  std::vector<double> out(1u << k);
  std::vector<double> mirrored = hints;
  for (double h : hints) mirrored.push_back(-h);
  out[0] = loglik(0.0, 0.0);
  out[1] = log_integrate([&](double g) { return loglik(g, 0.0) + imom_log_density(g, slabs[0]); }, mirrored);
  if (k == 2) {
    out[2] = log_integrate([&](double g) { return loglik(0.0, g) + imom_log_density(g, slabs[1]); }, mirrored);
    out[3] = log_integrate(
        [&](double g0) {
          const double lp = imom_log_density(g0, slabs[0]);
          if (lp == -inf) return -inf;
          std::vector<double> inner = mirrored;
          if (conditional_hint) {
            const double h = conditional_hint(g0);
            if (std::isfinite(h) && std::abs(h) < 1e6) {
              inner.push_back(h);
              inner.push_back(-h);
            }
          }
          return lp + log_integrate([&](double g1) { return loglik(g0, g1) + imom_log_density(g1, slabs[1]); },
                                    inner);
        },
        mirrored);
  }
  return out;
}

/// Gaussian likelihood summarized by h = X' S^-1 y and H = X' S^-1 X,
/// relative to the empty model.
inline LogLik gaussian_loglik(const Eigen::VectorXd& h, const Eigen::MatrixXd& H) {
  if (h.size() == 1) {
    return [h0 = h(0), a = H(0, 0)](double g0, double) { return h0 * g0 - 0.5 * a * g0 * g0; };
  }
  return [h0 = h(0), h1 = h(1), a = H(0, 0), b = H(0, 1), c = H(1, 1)](double g0, double g1) {
    return h0 * g0 + h1 * g1 - 0.5 * (a * g0 * g0 + 2.0 * b * g0 * g1 + c * g1 * g1);
  };
}

/// Two-sided p-value of a z statistic.
inline double two_sided_p(double z) {
  const boost::math::normal_distribution<double> n;
  return 2.0 * boost::math::cdf(boost::math::complement(n, std::abs(z)));
}

/// Batch-means standard error of the mean of a correlated series.
inline double batch_means_se(const std::vector<double>& x, int batches = 50) {
  const std::size_t len = x.size() / batches;
  std::vector<double> means(batches, 0.0);
  for (int b = 0; b < batches; ++b) {
    for (std::size_t k = 0; k < len; ++k) means[b] += x[b * len + k];
    means[b] /= static_cast<double>(len);
  }
  double m = 0.0;
  for (double v : means) m += v;
  m /= batches;
  double ss = 0.0;
  for (double v : means) ss += (v - m) * (v - m);
  return std::sqrt(ss / (batches - 1) / batches);
}

}  // namespace bisam::oracle

#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <vector>

namespace bisam {

struct QuadratureOptions {
  double abs_tol = 1e-14;
  double rel_tol = 1e-11;
  int max_subdivisions = 4000;
};

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
  int evaluations = 0;
  bool converged = false;
};

namespace detail {

// 15-point Kronrod rule with its embedded 7-point Gauss rule (QUADPACK qk15).
inline constexpr std::array<double, 8> kronrod_nodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kronrod_weights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> gauss_weights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double a, b, value, error;
  bool operator<(const Segment& other) const { return error < other.error; }
};

template <class F>
Segment gauss_kronrod(F& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(center);
  double kronrod = fc * kronrod_weights[7];
  double gauss = fc * gauss_weights[3];
  for (int k = 0; k < 7; ++k) {
    const double dx = half * kronrod_nodes[k];
    const double pair = f(center - dx) + f(center + dx);
    kronrod += kronrod_weights[k] * pair;
    if (k % 2 == 1) gauss += gauss_weights[k / 2] * pair;
  }
  return {a, b, kronrod * half, std::abs((kronrod - gauss) * half)};
}

template <class F>
QuadratureResult adaptive_finite(F& f, double a, double b, const QuadratureOptions& opt) {
  std::priority_queue<Segment> heap;
  QuadratureResult out;
  Segment first = gauss_kronrod(f, a, b);
  out.evaluations = 15;
  double total = first.value;
  double error = first.error;
  heap.push(first);
  int splits = 0;
  while (error > std::max(opt.abs_tol, opt.rel_tol * std::abs(total)) &&
         splits < opt.max_subdivisions) {
    Segment worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    Segment left = gauss_kronrod(f, worst.a, mid);
    Segment right = gauss_kronrod(f, mid, worst.b);
    out.evaluations += 30;
    total += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    ++splits;
  }
  // Re-sum to shed the cancellation accumulated by incremental updates.
  total = 0.0;
  error = 0.0;
  while (!heap.empty()) {
    total += heap.top().value;
    error += heap.top().error;
    heap.pop();
  }
  out.value = total;
  out.error = error;
  out.converged = error <= std::max(opt.abs_tol, opt.rel_tol * std::abs(total));
  return out;
}

}  // namespace detail

/// Adaptive Gauss-Kronrod integration of f over [a, b]. Either bound may
/// be infinite; a semi-infinite range [a, inf) is mapped to (0, 1] by
/// x = a + (1 - u) / u, which turns polynomial tails into smooth
/// integrands. A doubly infinite range is split at zero.
template <class F>
QuadratureResult integrate(F&& f, double a, double b, const QuadratureOptions& opt = {}) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (a == b) return {0.0, 0.0, 0, true};
  if (a > b) {
    QuadratureResult r = integrate(f, b, a, opt);
    r.value = -r.value;
    return r;
  }
  if (a == -inf && b == inf) {
    QuadratureResult left = integrate(f, -inf, 0.0, opt);
    QuadratureResult right = integrate(f, 0.0, inf, opt);
    return {left.value + right.value, left.error + right.error,
            left.evaluations + right.evaluations, left.converged && right.converged};
  }
  if (b == inf) {
    auto g = [&](double u) {
      const double x = a + (1.0 - u) / u;
      return f(x) / (u * u);
    };
    return detail::adaptive_finite(g, 0.0, 1.0, opt);
  }
  if (a == -inf) {
    auto g = [&](double u) {
      const double x = b - (1.0 - u) / u;
      return f(x) / (u * u);
    };
    return detail::adaptive_finite(g, 0.0, 1.0, opt);
  }
  return detail::adaptive_finite(f, a, b, opt);
}

}  // namespace bisam

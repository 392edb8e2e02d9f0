#include "bisam/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "bisam/error.hpp"
#include "bisam/imom.hpp"

namespace bisam {

namespace {

constexpr double variance_floor = 1e-12;
// Shape of the outlier iMOM component; three is the smallest integer
// shape with a finite variance.
constexpr double outlier_shape = 3.0;

double logistic(double log_odds) {
  if (log_odds >= 0.0) return 1.0 / (1.0 + std::exp(-log_odds));
  const double e = std::exp(log_odds);
  return e / (1.0 + e);
}

std::size_t uniform_index(Rng& rng, std::size_t bound) {
  return static_cast<std::size_t>((static_cast<unsigned __int128>(rng()) * bound) >> 64);
}

}  // namespace

void PriorConfig::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw invalid_input("tau must be positive");
  if (omega_prior) {
    if (!(omega_prior->a > 0.0 && omega_prior->b > 0.0)) {
      throw invalid_input("omega hyperprior parameters must be positive");
    }
  }
  if (!(omega >= 0.0 && omega <= 1.0)) throw invalid_input("omega must lie in [0, 1]");
  if (m0 && !(*m0 > 0.0)) throw invalid_input("m0 must be positive");
  if (n0 && !(*n0 > 0.0)) throw invalid_input("n0 must be positive");
  if (beta_prior_var && !(*beta_prior_var > 0.0)) throw invalid_input("beta prior variance must be positive");
  if (!(eta >= 0.0 && eta < 1.0)) throw invalid_input("eta must lie in [0, 1)");
  if (!(tau_eps > 1.0) || !std::isfinite(tau_eps)) throw invalid_input("tau_eps must exceed 1");
}

void SamplerConfig::validate() const {
  if (n_burn < 0 || n_draw <= 0 || thin <= 0 || grid_points < 16) {
    throw invalid_input("sampler iteration counts and grid size must be positive");
  }
  if (n_draw < thin) throw invalid_input("n_draw must be at least thin");
}

EmpiricalBayes empirical_bayes_init(const SaturatedDesign& design, const Eigen::VectorXd& y) {
  const int n = design.n_units;
  const int t = design.n_times;
  const int p = design.n_mean();
  if (y.size() != design.n_rows()) throw invalid_input("response length does not match design");

  const double df = t - static_cast<double>(p) / n;
  if (df < 2.0) throw invalid_input("insufficient data for empirical Bayes");

  EmpiricalBayes eb;
  Eigen::VectorXd resid = y;
  if (p > 0) {
    eb.beta_init = design.Z.colPivHouseholderQr().solve(y);
    resid -= design.Z * eb.beta_init;
  } else {
    eb.beta_init.resize(0);
  }

  eb.sigma2_ref.resize(n);
  for (int i = 0; i < n; ++i) {
    const double ssr = resid.segment(i * t, t).squaredNorm();
    eb.sigma2_ref(i) = std::max(ssr / df, variance_floor);
  }
  eb.m0 = 2.5;
  eb.n0 = eb.sigma2_ref * (eb.m0 - 1.0);
  eb.beta_prior_var = 1e4 * eb.sigma2_ref.mean();
  return eb;
}

EmpiricalBayes resolve_hyperparameters(const SaturatedDesign& design, const Eigen::VectorXd& y,
                                       const PriorConfig& prior) {
  EmpiricalBayes eb = empirical_bayes_init(design, y);
  if (prior.m0) {
    eb.m0 = *prior.m0;
    eb.n0 = eb.sigma2_ref * (eb.m0 > 1.0 ? eb.m0 - 1.0 : eb.m0);
  }
  if (prior.n0) eb.n0.setConstant(*prior.n0);
  if (prior.beta_prior_var) eb.beta_prior_var = *prior.beta_prior_var;
  return eb;
}

Eigen::MatrixXd BetaConditional::covariance() const {
  const auto n = mean.size();
  return precision_chol.solve(Eigen::MatrixXd::Identity(n, n));
}

Eigen::VectorXd BetaConditional::draw(Rng& rng) const {
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = standard_normal(rng);
  return mean + precision_chol.matrixU().solve(z);
}

BetaConditional beta_conditional(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y,
                                 const Eigen::VectorXd& row_precision, double prior_var) {
  const auto p = Z.cols();
  Eigen::MatrixXd precision(p, p);
  precision.setZero();
  precision.selfadjointView<Eigen::Lower>().rankUpdate(Z.transpose() * row_precision.cwiseSqrt().asDiagonal());
  precision = precision.selfadjointView<Eigen::Lower>();
  precision.diagonal().array() += 1.0 / prior_var;

  BetaConditional out;
  out.precision_chol.compute(precision);
  if (out.precision_chol.info() != Eigen::Success || !precision.allFinite()) {
    throw numerical_failure("numerical failure in beta update");
  }
  out.mean = out.precision_chol.solve(Z.transpose() * row_precision.cwiseProduct(y));
  if (!out.mean.allFinite()) throw numerical_failure("numerical failure in beta update");
  return out;
}

GibbsSampler::GibbsSampler(const SaturatedDesign& design, Eigen::VectorXd y, PriorConfig prior,
                           SamplerConfig config, EmpiricalBayes hyper)
    : design_(design),
      y_(std::move(y)),
      prior_(std::move(prior)),
      config_(std::move(config)),
      hyper_(std::move(hyper)),
      slab_(config_.grid_points) {
  prior_.validate();
  config_.validate();
  if (y_.size() != design_.n_rows()) throw invalid_input("response length does not match design");
  if (hyper_.sigma2_ref.size() != design_.n_units || hyper_.n0.size() != design_.n_units) {
    throw invalid_input("hyperparameters do not match the number of units");
  }

  const int q = design_.n_candidates();
  if (config_.active_candidates.empty()) {
    active_.resize(static_cast<std::size_t>(q));
    for (int c = 0; c < q; ++c) active_[c] = c;
  } else {
    active_ = config_.active_candidates;
    std::sort(active_.begin(), active_.end());
    active_.erase(std::unique(active_.begin(), active_.end()), active_.end());
    if (active_.front() < 0 || active_.back() >= q) throw invalid_input("active candidate out of range");
  }
  order_ = active_;
  outlier_weight_ = 1.0 / (2.0 * prior_.tau_eps);

  SamplerState s;
  s.beta = hyper_.beta_init.size() == design_.n_mean() ? hyper_.beta_init
                                                       : Eigen::VectorXd::Zero(design_.n_mean());
  s.gamma = Eigen::VectorXd::Zero(q);
  s.delta_gamma.assign(static_cast<std::size_t>(q), 0);
  s.sigma2 = hyper_.sigma2_ref;
  s.delta_eps.assign(static_cast<std::size_t>(design_.n_rows()), 0);
  s.omega = prior_.omega;
  s.sigma2_ref = hyper_.sigma2_ref;
  set_state(std::move(s));
}

void GibbsSampler::set_state(SamplerState state) {
  state_ = std::move(state);
  recompute_residual();
  refresh_weights();
}

void GibbsSampler::set_response(Eigen::VectorXd y) {
  if (y.size() != design_.n_rows()) throw invalid_input("response length does not match design");
  y_ = std::move(y);
  recompute_residual();
}

void GibbsSampler::recompute_residual() {
  residual_ = y_;
  if (design_.n_mean() > 0) residual_.noalias() -= design_.Z * state_.beta;
  const int t = design_.n_times;
  for (int c = 0; c < design_.n_candidates(); ++c) {
    const double g = state_.gamma(c);
    if (g == 0.0) continue;
    const auto& cand = design_.candidates[c];
    residual_.segment(cand.unit * t + cand.start, t - cand.start).array() -= g;
  }
}

void GibbsSampler::refresh_weights() {
  weight_.resize(design_.n_rows());
  for (int r = 0; r < design_.n_rows(); ++r) {
    weight_(r) = state_.delta_eps[r] ? outlier_weight_ : 1.0;
  }
}

double GibbsSampler::outlier_probability(double residual, int unit) const {
  if (!prior_.outliers_enabled || prior_.eta <= 0.0 || residual == 0.0) return 0.0;
  const IMomParams outlier{0.0, 1.0, outlier_shape, hyper_.sigma2_ref(unit) * prior_.tau_eps};
  const double var = state_.sigma2(unit);
  const double log_normal =
      -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * residual * residual / var;
  const double log_odds = std::log(prior_.eta) - std::log1p(-prior_.eta) +
                          imom_log_density(residual, outlier) - log_normal;
  return logistic(log_odds);
}

void GibbsSampler::update_outliers(Rng& rng) {
  for (int r = 0; r < design_.n_rows(); ++r) {
    const double p = outlier_probability(residual_(r), design_.unit_of_row(r));
    const bool flag = p > 0.0 && bernoulli(rng, p);
    state_.delta_eps[r] = flag ? 1 : 0;
    weight_(r) = flag ? outlier_weight_ : 1.0;
    diagnostics_.outlier_flags += flag ? 1 : 0;
  }
}

void GibbsSampler::update_beta(Rng& rng) {
  if (design_.n_mean() == 0) return;
  Eigen::VectorXd working = residual_;
  working.noalias() += design_.Z * state_.beta;
  Eigen::VectorXd precision(design_.n_rows());
  for (int r = 0; r < design_.n_rows(); ++r) {
    precision(r) = weight_(r) / state_.sigma2(design_.unit_of_row(r));
  }
  const BetaConditional cond = beta_conditional(design_.Z, working, precision, hyper_.beta_prior_var);
  state_.beta = cond.draw(rng);
  residual_ = working;
  residual_.noalias() -= design_.Z * state_.beta;
}

double GibbsSampler::break_log_bayes_factor(int candidate) {
  const auto& cand = design_.candidates[candidate];
  const int t = design_.n_times;
  const int begin = cand.unit * t + cand.start;
  const int len = t - cand.start;
  const double g_old = state_.gamma(candidate);

  double sum_w = 0.0;
  double sum_wr = 0.0;
  for (int k = 0; k < len; ++k) {
    const double w = weight_(begin + k);
    sum_w += w;
    sum_wr += w * (residual_(begin + k) + g_old);
  }
  const double precision = sum_w / state_.sigma2(cand.unit);
  const double center = sum_wr / sum_w;
  const IMomParams slab{0.0, 1.0, 1.0, prior_.tau * hyper_.sigma2_ref(cand.unit)};
  return slab_.evaluate(precision, center, slab);
}

void GibbsSampler::update_break(int candidate, Rng& rng) {
  const auto& cand = design_.candidates[candidate];
  const double g_old = state_.gamma(candidate);
  const double omega = state_.omega;
  ++diagnostics_.break_updates;

  double g_new = 0.0;
  if (omega > 0.0) {
    const double log_bf = break_log_bayes_factor(candidate);
    if (!std::isfinite(log_bf)) {
      ++diagnostics_.underflow_fallbacks;
    } else {
      const double p = omega >= 1.0
                           ? 1.0
                           : logistic(std::log(omega) - std::log1p(-omega) + log_bf);
      if (bernoulli(rng, p)) g_new = slab_.sample(rng);
    }
  }

  state_.gamma(candidate) = g_new;
  state_.delta_gamma[candidate] = g_new != 0.0 ? 1 : 0;
  diagnostics_.break_inclusions += g_new != 0.0 ? 1 : 0;
  if (g_new != g_old) {
    const int t = design_.n_times;
    residual_.segment(cand.unit * t + cand.start, t - cand.start).array() += g_old - g_new;
  }
}

void GibbsSampler::update_shifts(Rng& rng) {
  std::vector<int> included;
  for (int c : active_) {
    if (state_.delta_gamma[c]) included.push_back(c);
  }
  const int t = design_.n_times;
  for (std::size_t k = 0; k < included.size(); ++k) {
    const std::size_t pick = uniform_index(rng, included.size());
    const int from = included[pick];
    const bool left = bernoulli(rng, 0.5);
    const auto& cand = design_.candidates[from];
    const int start = cand.start + (left ? -1 : 1);
    if (start < first_admissible_start() || start > last_admissible_start(t)) continue;
    const int to = from + (left ? -1 : 1);
    if (state_.delta_gamma[to] || !std::binary_search(active_.begin(), active_.end(), to)) continue;

    // The two step columns differ in one row only.
    const int row = cand.unit * t + (left ? start : cand.start);
    const double g = state_.gamma(from);
    const double r_old = residual_(row);
    const double r_new = left ? r_old - g : r_old + g;
    const double log_ratio =
        -0.5 * weight_(row) * (r_new * r_new - r_old * r_old) / state_.sigma2(cand.unit);
    if (log_ratio < 0.0 && std::log(uniform_open(rng)) >= log_ratio) continue;

    residual_(row) = r_new;
    state_.gamma(to) = g;
    state_.gamma(from) = 0.0;
    state_.delta_gamma[to] = 1;
    state_.delta_gamma[from] = 0;
    included[pick] = to;
    ++diagnostics_.shift_moves;
  }
}

GibbsSampler::SplitSegment GibbsSampler::split_segment(int from, int added) const {
  const auto& a = design_.candidates[from];
  const auto& c = design_.candidates[added];
  const int base = a.unit * design_.n_times;
  SplitSegment seg{c.start < a.start ? 1.0 : -1.0, 0.0, 0.0};
  for (int s = std::min(a.start, c.start); s < std::max(a.start, c.start); ++s) {
    seg.sum_w += weight_(base + s);
    seg.sum_wr += weight_(base + s) * residual_(base + s);
  }
  return seg;
}

// Log acceptance ratio of splitting u off `from` into `added`, from the
// current state. The residual moves by -sign * u between the two starts.
double GibbsSampler::split_log_ratio(int from, int added, double u) const {
  const int unit = design_.candidates[from].unit;
  const double var = state_.sigma2(unit);
  const SplitSegment seg = split_segment(from, added);
  const double log_lik = -(u * u * seg.sum_w - 2.0 * seg.sign * u * seg.sum_wr) / (2.0 * var);

  const double g = state_.gamma(from);
  const IMomParams slab{0.0, 1.0, 1.0, prior_.tau * hyper_.sigma2_ref(unit)};
  const double omega = state_.omega;
  const double log_prior = std::log(omega) - std::log1p(-omega) + imom_log_density(g - u, slab) +
                           imom_log_density(u, slab) - imom_log_density(g, slab);

  int included = 0;
  int free_in_unit = 0;
  std::vector<int> per_unit(static_cast<std::size_t>(design_.n_units), 0);
  for (int k : active_) {
    if (state_.delta_gamma[k]) {
      ++included;
      ++per_unit[design_.candidates[k].unit];
    } else if (design_.candidates[k].unit == unit) {
      ++free_in_unit;
    }
  }
  ++per_unit[unit];
  int mergeable = 0;
  for (int n : per_unit) mergeable += n >= 2 ? n : 0;

  const double center = seg.sign * seg.sum_wr / seg.sum_w;
  const double spread = var / seg.sum_w;
  const double log_q = -0.5 * std::log(2.0 * std::numbers::pi * spread) - 0.5 * (u - center) * (u - center) / spread;
  const double log_forward = -std::log(included) - std::log(free_in_unit) + log_q;
  const double log_reverse = -std::log(mergeable) - std::log(per_unit[unit] - 1);
  return log_lik + log_prior + log_reverse - log_forward;
}

void GibbsSampler::try_split(Rng& rng) {
  std::vector<int> included;
  for (int c : active_) {
    if (state_.delta_gamma[c]) included.push_back(c);
  }
  if (included.empty()) return;
  const int from = included[uniform_index(rng, included.size())];
  const int unit = design_.candidates[from].unit;
  std::vector<int> free;
  for (int c : active_) {
    if (!state_.delta_gamma[c] && design_.candidates[c].unit == unit) free.push_back(c);
  }
  if (free.empty()) return;
  const int added = free[uniform_index(rng, free.size())];

  const SplitSegment seg = split_segment(from, added);
  const double u = seg.sign * seg.sum_wr / seg.sum_w +
                   std::sqrt(state_.sigma2(unit) / seg.sum_w) * standard_normal(rng);
  const double g = state_.gamma(from);
  if (u == 0.0 || u == g) return;
  const double log_ratio = split_log_ratio(from, added, u);
  if (!(log_ratio >= 0.0) && !(std::log(uniform_open(rng)) < log_ratio)) return;

  const auto& a = design_.candidates[from];
  const auto& c = design_.candidates[added];
  const int base = unit * design_.n_times;
  for (int s = std::min(a.start, c.start); s < std::max(a.start, c.start); ++s) residual_(base + s) -= seg.sign * u;
  state_.gamma(from) = g - u;
  state_.gamma(added) = u;
  state_.delta_gamma[added] = 1;
  ++diagnostics_.split_moves;
}

void GibbsSampler::try_merge(Rng& rng) {
  std::vector<int> per_unit(static_cast<std::size_t>(design_.n_units), 0);
  for (int c : active_) {
    if (state_.delta_gamma[c]) ++per_unit[design_.candidates[c].unit];
  }
  std::vector<int> mergeable;
  for (int c : active_) {
    if (state_.delta_gamma[c] && per_unit[design_.candidates[c].unit] >= 2) mergeable.push_back(c);
  }
  if (mergeable.empty()) return;
  const int removed = mergeable[uniform_index(rng, mergeable.size())];
  const int unit = design_.candidates[removed].unit;
  std::vector<int> partners;
  for (int c : active_) {
    if (c != removed && state_.delta_gamma[c] && design_.candidates[c].unit == unit) partners.push_back(c);
  }
  const int into = partners[uniform_index(rng, partners.size())];

  const double u = state_.gamma(removed);
  const double g = state_.gamma(into) + u;
  if (g == 0.0) return;
  const auto& a = design_.candidates[into];
  const auto& c = design_.candidates[removed];
  const int base = unit * design_.n_times;
  const int lo = std::min(a.start, c.start);
  const int hi = std::max(a.start, c.start);
  const double sign = c.start < a.start ? 1.0 : -1.0;

  // Evaluate from the merged state, the start of the reverse split.
  for (int s = lo; s < hi; ++s) residual_(base + s) += sign * u;
  const double g_into = state_.gamma(into);
  state_.gamma(into) = g;
  state_.gamma(removed) = 0.0;
  state_.delta_gamma[removed] = 0;
  const double log_ratio = -split_log_ratio(into, removed, u);
  if (log_ratio >= 0.0 || std::log(uniform_open(rng)) < log_ratio) {
    ++diagnostics_.merge_moves;
    return;
  }
  for (int s = lo; s < hi; ++s) residual_(base + s) -= sign * u;
  state_.gamma(into) = g_into;
  state_.gamma(removed) = u;
  state_.delta_gamma[removed] = 1;
}

void GibbsSampler::update_split_merge(Rng& rng) {
  if (!(state_.omega > 0.0 && state_.omega < 1.0)) return;
  for (int i = 0; i < design_.n_units; ++i) {
    if (bernoulli(rng, 0.5)) {
      try_split(rng);
    } else {
      try_merge(rng);
    }
  }
}

void GibbsSampler::update_sigma2(int unit, Rng& rng) {
  if (!config_.sample_variances) return;
  const int t = design_.n_times;
  const auto e = residual_.segment(unit * t, t);
  const auto w = weight_.segment(unit * t, t);
  const double ssr = (w.array() * e.array().square()).sum();
  const double shape = hyper_.m0 + 0.5 * t;
  const double rate = hyper_.n0(unit) + 0.5 * ssr;
  state_.sigma2(unit) = rate / standard_gamma(rng, shape);
}

void GibbsSampler::update_omega(Rng& rng) {
  if (!prior_.omega_prior) return;
  int included = 0;
  for (int c : active_) included += state_.delta_gamma[c];
  const double a = prior_.omega_prior->a + included;
  const double b = prior_.omega_prior->b + active_count() - included;
  const double x = standard_gamma(rng, a);
  const double y = standard_gamma(rng, b);
  state_.omega = x / (x + y);
}

void GibbsSampler::sweep(Rng& rng) {
  if (prior_.outliers_enabled) update_outliers(rng);
  update_beta(rng);
  for (std::size_t i = order_.size(); i > 1; --i) {
    std::swap(order_[i - 1], order_[uniform_index(rng, i)]);
  }
  for (int c : order_) update_break(c, rng);
  update_shifts(rng);
  update_split_merge(rng);
  for (int i = 0; i < design_.n_units; ++i) update_sigma2(i, rng);
  update_omega(rng);
}

PosteriorDraws run_chain(const SaturatedDesign& design, const Eigen::VectorXd& y,
                         const PriorConfig& prior, const SamplerConfig& config) {
  prior.validate();
  config.validate();
  GibbsSampler sampler(design, y, prior, config, resolve_hyperparameters(design, y, prior));
  Rng rng(config.seed);

  const int records = config.n_draw / config.thin;
  const int q = design.n_candidates();
  const int p = design.n_mean();
  const int cells = design.n_rows();

  PosteriorDraws draws;
  draws.n_units = design.n_units;
  draws.n_times = design.n_times;
  draws.candidates = design.candidates;
  draws.seed = config.seed;
  draws.beta.resize(records, p);
  draws.gamma.resize(records, q);
  draws.sigma2.resize(records, design.n_units);
  draws.delta_gamma.resize(static_cast<std::size_t>(records) * q);
  draws.delta_eps.resize(static_cast<std::size_t>(records) * cells);
  draws.omega.reserve(static_cast<std::size_t>(records));

  int kept = 0;
  for (int iter = 0; iter < config.n_burn + config.n_draw; ++iter) {
    sampler.sweep(rng);
    const auto& s = sampler.state();
    if (!s.sigma2.allFinite() || !s.beta.allFinite() || !s.gamma.allFinite()) {
      throw numerical_failure(fmt::format("non-finite sampler state at iteration {}", iter));
    }
    const int post = iter - config.n_burn;
    if (post < 0 || (post + 1) % config.thin != 0 || kept >= records) continue;

    draws.beta.row(kept) = s.beta.transpose();
    draws.gamma.row(kept) = s.gamma.transpose();
    draws.sigma2.row(kept) = s.sigma2.transpose();
    std::copy(s.delta_gamma.begin(), s.delta_gamma.end(),
              draws.delta_gamma.begin() + static_cast<std::ptrdiff_t>(kept) * q);
    std::copy(s.delta_eps.begin(), s.delta_eps.end(),
              draws.delta_eps.begin() + static_cast<std::ptrdiff_t>(kept) * cells);
    draws.omega.push_back(s.omega);
    ++kept;
  }
  draws.diagnostics = sampler.diagnostics();
  return draws;
}

PosteriorDraws run_chain(const PanelData& panel, const PriorConfig& prior,
                         const SamplerConfig& config) {
  const SaturatedDesign design = build_design(panel);
  return run_chain(design, stack_response(panel), prior, config);
}

}  // namespace bisam

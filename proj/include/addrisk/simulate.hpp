#pragma once

#include "addrisk/types.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

namespace addrisk {

enum class ScenarioKind {
  const_hazard,  // h(t|x) = 0.2 + beta'x
  timedep,       // h(t|x) = 0.2 + beta'x exp(t)
  sqrt_two_cov,  // h(t|x) = 0.2 sqrt(t) + beta'x
};

/**
 * Synthetic-data design: hazard form, regression coefficients, Bernoulli
 * covariate success probabilities and the censoring-window distributions
 * L ~ U(l_lo, l_hi), R ~ U(L + r_gap, r_hi).
 */
struct Scenario {
  ScenarioKind kind = ScenarioKind::const_hazard;
  Eigen::VectorXd beta;
  Eigen::VectorXd bernoulli_p;  // defaults to 0.5 per covariate when empty
  int n = 100;
  std::uint64_t seed = 1;
  double l_lo = 0.1, l_hi = 2.0, r_gap = 0.5, r_hi = 4.0;

  static Scenario make(ScenarioKind kind, Eigen::VectorXd beta, int n, std::uint64_t seed) {
    Scenario s;
    s.kind = kind;
    s.beta = std::move(beta);
    s.n = n;
    s.seed = seed;
    if (kind == ScenarioKind::sqrt_two_cov) {
      s.l_lo = 0.1;
      s.l_hi = 1.5;
      s.r_gap = 1.5;
      s.r_hi = 4.0;
    }
    return s;
  }

  int p() const { return static_cast<int>(beta.size()); }

  double bern_p(int j) const { return bernoulli_p.size() > 0 ? bernoulli_p[j] : 0.5; }

  // Conditional cumulative hazard H(t | x).
  double cum_hazard(double t, const Eigen::VectorXd& x) const {
    const double bx = beta.dot(x);
    switch (kind) {
      case ScenarioKind::const_hazard:
        return (0.2 + bx) * t;
      case ScenarioKind::timedep:
        return 0.2 * t + bx * std::expm1(t);
      case ScenarioKind::sqrt_two_cov:
        return (0.4 / 3.0) * std::pow(t, 1.5) + bx * t;
    }
    return 0.0;
  }

  // Covariate trajectory matching the hazard form, for fitting.
  CovariateProcess process() const {
    if (kind == ScenarioKind::timedep)
      return CovariateProcess::user_supplied(
          [](const Eigen::VectorXd& x, double t) -> Eigen::VectorXd { return x * std::expm1(t); });
    return CovariateProcess::time_independent();
  }
};

/**
 * Inverse-hazard sampling: the event time solves H(T | x) = -log(u).
 * The constant-hazard design inverts in closed form; the others bisect to
 * |H(T) - target| <= 1e-10.
 */
inline double draw_event_time(const Scenario& scenario, const Eigen::VectorXd& x, double u) {
  if (!(u > 0.0) || !(u < 1.0)) throw std::invalid_argument("draw_event_time: u must lie in (0,1)");
  const double target = -std::log(u);
  if (scenario.kind == ScenarioKind::const_hazard) {
    const double rate = 0.2 + scenario.beta.dot(x);
    if (!(rate > 0.0)) throw std::invalid_argument("draw_event_time: nonpositive hazard");
    return target / rate;
  }
  double lo = 0.0, hi = 1.0;
  int expansions = 0;
  while (scenario.cum_hazard(hi, x) < target) {
    lo = hi;
    hi *= 2.0;
    if (++expansions > 1024) throw std::runtime_error("draw_event_time: bracket expansion failed");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double h = scenario.cum_hazard(mid, x);
    if (std::abs(h - target) <= 1e-10) return mid;
    (h < target ? lo : hi) = mid;
    if (hi - lo <= 1e-15 * (1.0 + hi)) break;
  }
  return 0.5 * (lo + hi);
}

/**
 * Draw a full dataset: covariates, event time by hazard inversion, then the
 * inspection window. Indicators follow the strict comparisons
 * Delta_L = I(T < L), Delta_R = I(T > R). Deterministic per seed; the draw
 * order per subject is covariates, u, L, R on a single mt19937_64 stream.
 */
inline Dataset generate(const Scenario& scenario) {
  std::mt19937_64 rng(scenario.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Dataset data;
  data.reserve(scenario.n);
  for (int i = 0; i < scenario.n; ++i) {
    Eigen::VectorXd x(scenario.p());
    for (int j = 0; j < scenario.p(); ++j) x[j] = unif(rng) < scenario.bern_p(j) ? 1.0 : 0.0;
    double u = unif(rng);
    while (!(u > 0.0)) u = unif(rng);
    const double t_event = draw_event_time(scenario, x, u);
    const double l = scenario.l_lo + (scenario.l_hi - scenario.l_lo) * unif(rng);
    const double r = (l + scenario.r_gap) + (scenario.r_hi - (l + scenario.r_gap)) * unif(rng);

    Observation o;
    o.x = x;
    if (t_event < l) {
      o.kind = Censoring::left;
      o.left = 0.0;
      o.right = l;
    } else if (t_event > r) {
      o.kind = Censoring::right;
      o.left = r;
      o.right = kInf;
    } else {
      o.kind = Censoring::interval;
      o.left = l;
      o.right = r;
    }
    data.push_back(std::move(o));
  }
  return data;
}

}  // namespace addrisk

#pragma once

#include "addrisk/likelihood.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace addrisk {

struct SolverConfig {
  int max_iter = 1000;
  double tol = 1e-3;          // sum of absolute parameter changes per sweep
  double ascent_tol = 1e-8;   // tolerated per-sweep log-likelihood decrease
  int step_halving_max = 30;
  bool freeze_beta = false;   // keep beta fixed (profile inner loop, oracle tests)
  std::optional<Eigen::VectorXd> init_eta;
  std::optional<Eigen::VectorXd> init_beta;
};

struct FitResult {
  ModelParams params;
  double loglik = 0.0;
  int n_iter = 0;
  bool converged = false;
  InspectionGrid grid;
  std::vector<double> loglik_trace;  // value at the start plus one per sweep
  int n_halvings = 0;
  bool curvature_flag = false;  // a coordinate had zero curvature with nonzero score

  // Most negative per-sweep log-likelihood change (>= 0 when ascent is clean).
  double min_sweep_delta() const {
    double worst = 0.0;
    for (std::size_t i = 1; i < loglik_trace.size(); ++i)
      worst = std::min(worst, loglik_trace[i] - loglik_trace[i - 1]);
    return worst;
  }
};

struct SolverError : std::runtime_error {
  std::vector<double> trace;
  SolverError(const std::string& msg, std::vector<double> t) : std::runtime_error(msg), trace(std::move(t)) {}
};

namespace detail {

// Anchored score/curvature factors at one state. g and h hold the per-k sums
// without the leading exp(eta_k); s2/s22 are the beta-block score and
// curvature. Built in one pass over observations with range accumulation
// over each observation's contiguous mask.
struct Scores {
  Eigen::VectorXd g;
  Eigen::VectorXd h;
  Eigen::VectorXd s2;
  Eigen::MatrixXd s22;
};

inline Scores compute_scores(const Design& d, const Eigen::VectorXd& eta, const Eigen::VectorXd& beta,
                             bool with_beta_blocks = true) {
  const int m = d.grid.m();
  const std::vector<double> prefix = d.hazard_prefix(eta);

  Eigen::VectorXd gd = Eigen::VectorXd::Zero(m + 1);
  Eigen::VectorXd hd = Eigen::VectorXd::Zero(m + 1);
  auto range_add = [&](Eigen::VectorXd& diff, int lo, int hi, double c) {
    if (lo >= hi) return;
    diff[lo] += c;
    diff[hi] -= c;
  };

  Scores s;
  s.s2 = Eigen::VectorXd::Zero(d.p);
  s.s22 = Eigen::MatrixXd::Zero(d.p, d.p);

  for (int i = 0; i < d.n; ++i) {
    const UTerms u = d.u_terms_at(i, prefix, beta);
    switch (d.kind[i]) {
      case Censoring::left: {
        if (!(u.uL > 0.0)) throw std::domain_error("scores: nonpositive u(L) at observation " + std::to_string(i));
        const double a1v = a1(u.uL);
        const double a2v = a2(u.uL);
        range_add(gd, 0, d.cnt_l[i], a1v);
        range_add(hd, 0, d.cnt_l[i], a1v - 2.0 * a2v * u.uL - 2.0 / u.uL);
        if (with_beta_blocks) {
          s.s2 += a1v * d.zl.col(i);
          const double bz = beta.dot(d.zl.col(i));
          const double w = a2v * u.uL + 1.0 / u.uL;
          if (bz != 0.0)
            s.s22 -= 2.0 * (w / bz) * (d.zl.col(i) * d.zl.col(i).transpose());
          else if (!d.zl.col(i).isZero(0.0))
            throw std::domain_error("scores: beta'Z(L) = 0 with nonzero Z at observation " + std::to_string(i));
        }
        break;
      }
      case Censoring::interval: {
        if (!(u.uL > 0.0) || !(u.uLR > 0.0))
          throw std::domain_error("scores: nonpositive u-term at observation " + std::to_string(i));
        const double a1v = a1(u.uLR);
        const double a2v = a2(u.uLR);
        range_add(gd, 0, d.cnt_l[i], -1.0);
        range_add(hd, 0, d.cnt_l[i], -1.0);
        range_add(gd, d.cnt_l[i], d.cnt_r[i], a1v);
        range_add(hd, d.cnt_l[i], d.cnt_r[i], a1v - 2.0 * a2v * u.uLR - 2.0 / u.uLR);
        if (with_beta_blocks) {
          s.s2 += a1v * d.zlr.col(i) - d.zl.col(i);
          const double bz = beta.dot(d.zlr.col(i));
          const double w = a2v * u.uLR + 1.0 / u.uLR;
          if (bz != 0.0)
            s.s22 -= 2.0 * (w / bz) * (d.zlr.col(i) * d.zlr.col(i).transpose());
          else if (!d.zlr.col(i).isZero(0.0))
            throw std::domain_error("scores: beta'{Z(R)-Z(L)} = 0 with nonzero Z at observation " + std::to_string(i));
        }
        break;
      }
      case Censoring::right: {
        if (!(u.uR > 0.0)) throw std::domain_error("scores: nonpositive u(R) at observation " + std::to_string(i));
        range_add(gd, 0, d.cnt_r[i], -1.0);
        range_add(hd, 0, d.cnt_r[i], -1.0);
        if (with_beta_blocks) s.s2 -= d.zr.col(i);
        break;
      }
    }
  }

  s.g.resize(m);
  s.h.resize(m);
  double ga = 0.0, ha = 0.0;
  for (int k = 0; k < m; ++k) {
    ga += gd[k];
    ha += hd[k];
    s.g[k] = ga;
    s.h[k] = ha;
  }
  return s;
}

}  // namespace detail

// S_{1,k}: derivative of the surrogate in eta_k at the anchor `state`;
// equals d ell / d eta_k there.
inline double score_eta(int k, const ModelParams& state, const Design& d) {
  const detail::Scores s = detail::compute_scores(d, state.eta, state.beta, false);
  return std::exp(state.eta[k]) * s.g[k];
}

// S_{1,kk}: second derivative of the surrogate in eta_k at the anchor.
inline double curvature_eta(int k, const ModelParams& state, const Design& d) {
  const detail::Scores s = detail::compute_scores(d, state.eta, state.beta, false);
  return std::exp(state.eta[k]) * s.h[k];
}

// S_2: gradient of the surrogate in beta at the anchor; equals grad_beta ell.
inline Eigen::VectorXd score_beta(const ModelParams& state, const Design& d) {
  return detail::compute_scores(d, state.eta, state.beta).s2;
}

// S_22: curvature of the surrogate in beta at the anchor (symmetric,
// negative semidefinite on the valid domain).
inline Eigen::MatrixXd curvature_beta(const ModelParams& state, const Design& d) {
  return detail::compute_scores(d, state.eta, state.beta).s22;
}

namespace detail {

// Per-coordinate pieces of the surrogate score away from the anchor,
// S_{1,k}(eta_k | anchor) = lam0_k^2 a / lam_k + b lam_k - 2 c lam_k^2,
// exposed for the finite-difference consistency checks.
struct EtaSurrogateCoeffs {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double lam0 = 0.0;
};

inline EtaSurrogateCoeffs eta_surrogate_coeffs(int k, const ModelParams& anchor, const Design& d) {
  const std::vector<double> prefix0 = d.hazard_prefix(anchor.eta);
  EtaSurrogateCoeffs co;
  co.lam0 = std::exp(anchor.eta[k]);
  for (int i = 0; i < d.n; ++i) {
    const UTerms u0 = d.u_terms_at(i, prefix0, anchor.beta);
    switch (d.kind[i]) {
      case Censoring::left:
        if (k < d.cnt_l[i]) {
          const double a1v = a1(u0.uL), a2v = a2(u0.uL);
          co.a += 1.0 / u0.uL;
          co.b += a1v + 2.0 * a2v * u0.uL - 1.0 / u0.uL;
          co.c += a2v * u0.uL / co.lam0;
        }
        break;
      case Censoring::interval:
        if (k < d.cnt_l[i]) co.b -= 1.0;
        if (k >= d.cnt_l[i] && k < d.cnt_r[i]) {
          const double a1v = a1(u0.uLR), a2v = a2(u0.uLR);
          co.a += 1.0 / u0.uLR;
          co.b += a1v + 2.0 * a2v * u0.uLR - 1.0 / u0.uLR;
          co.c += a2v * u0.uLR / co.lam0;
        }
        break;
      case Censoring::right:
        if (k < d.cnt_r[i]) co.b -= 1.0;
        break;
    }
  }
  return co;
}

}  // namespace detail

// S_{1,k}(eta_k | anchor) as a function of eta_k with the anchor held fixed.
inline double surrogate_score_eta(int k, double eta_k, const ModelParams& anchor, const Design& d) {
  const detail::EtaSurrogateCoeffs co = detail::eta_surrogate_coeffs(k, anchor, d);
  const double lam = std::exp(eta_k);
  return co.lam0 * co.lam0 * co.a / lam + co.b * lam - 2.0 * co.c * lam * lam;
}

inline double surrogate_curvature_eta(int k, double eta_k, const ModelParams& anchor, const Design& d) {
  const detail::EtaSurrogateCoeffs co = detail::eta_surrogate_coeffs(k, anchor, d);
  const double lam = std::exp(eta_k);
  return -co.lam0 * co.lam0 * co.a / lam + co.b * lam - 4.0 * co.c * lam * lam;
}

// Gradient of the beta surrogate away from the anchor (anchor held fixed).
inline Eigen::VectorXd surrogate_score_beta(const Eigen::VectorXd& beta, const ModelParams& anchor, const Design& d) {
  const std::vector<double> prefix0 = d.hazard_prefix(anchor.eta);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(d.p);
  for (int i = 0; i < d.n; ++i) {
    const UTerms u0 = d.u_terms_at(i, prefix0, anchor.beta);
    auto add_block = [&](double u0v, const Eigen::VectorXd& z) {
      const double bz = beta.dot(z);
      const double bz0 = anchor.beta.dot(z);
      const double a1v = a1(u0v), a2v = a2(u0v);
      const double lin = a1v + 2.0 * a2v * u0v - 1.0 / u0v;
      const double coef =
          lin + zerosafe_div(bz0 * bz0 / u0v, bz * bz) - 2.0 * a2v * u0v * zerosafe_div(bz, bz0);
      out += coef * z;
    };
    switch (d.kind[i]) {
      case Censoring::left:
        add_block(u0.uL, d.zl.col(i));
        break;
      case Censoring::interval:
        add_block(u0.uLR, d.zlr.col(i));
        out -= d.zl.col(i);
        break;
      case Censoring::right:
        out -= d.zr.col(i);
        break;
    }
  }
  return out;
}

namespace detail {

// Newton displacement: beta_new - beta = -S22^{-1} S2 = (-S22)^{-1} S2.
inline Eigen::VectorXd solve_beta_step(const Eigen::MatrixXd& s22, const Eigen::VectorXd& s2) {
  Eigen::MatrixXd a = -s22;  // PSD on the valid domain
  Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  Eigen::VectorXd x = ldlt.solve(s2);
  if (ldlt.info() == Eigen::Success && x.allFinite() && (a * x - s2).norm() <= 1e-8 * (1.0 + s2.norm())) return x;
  // Collinear covariates (small bootstrap resamples): ridge and retry once.
  const double ridge = 1e-8 * a.trace() / static_cast<double>(a.rows());
  a.diagonal().array() += ridge;
  ldlt.compute(a);
  x = ldlt.solve(s2);
  if (ldlt.info() != Eigen::Success || !x.allFinite())
    throw std::runtime_error("beta update: singular curvature matrix even after ridge");
  return x;
}

}  // namespace detail

struct SweepResult {
  ModelParams state;
  double loglik = 0.0;
  int halvings = 0;
  bool curvature_flag = false;
};

/**
 * One gradient-MM sweep: every eta_k takes a scalar Newton step on its
 * surrogate block, then beta takes a p-dimensional Newton step, all scores
 * evaluated at the incoming state. Each block is step-halved toward the old
 * value if it would break hazard positivity or decrease the log-likelihood.
 */
inline SweepResult sweep(const ModelParams& state, const SolverConfig& config, const Design& d,
                         std::optional<double> loglik_old = std::nullopt) {
  const detail::Scores sc = detail::compute_scores(d, state.eta, state.beta, !config.freeze_beta);
  const double ell_old = loglik_old ? *loglik_old : loglik_components(d, state).total;
  const double block_tol = config.ascent_tol / 2.0;

  SweepResult out;
  out.state = state;

  // eta block
  Eigen::VectorXd eta_prop = state.eta;
  for (int k = 0; k < d.grid.m(); ++k) {
    const double lam = std::exp(state.eta[k]);
    const double s1k = lam * sc.g[k];
    const double s1kk = lam * sc.h[k];
    if (s1kk == 0.0) {
      if (s1k != 0.0) out.curvature_flag = true;  // no update for this coordinate
      continue;
    }
    eta_prop[k] = state.eta[k] - s1k / s1kk;
  }
  double ell_eta = ell_old;
  {
    Eigen::VectorXd step = eta_prop - state.eta;
    int tries = 0;
    for (;; ++tries) {
      const std::optional<LogLik> ll = try_loglik(d, state.eta + step, state.beta);
      if (ll && ll->total >= ell_old - block_tol) {
        out.state.eta = state.eta + step;
        ell_eta = ll->total;
        break;
      }
      if (tries >= config.step_halving_max)
        throw SolverError("eta block: step halving exhausted without ascent", {ell_old});
      step *= 0.5;
    }
    out.halvings += tries;
  }

  // beta block (scores from the incoming state)
  if (!config.freeze_beta && d.p > 0) {
    Eigen::VectorXd step = detail::solve_beta_step(sc.s22, sc.s2);
    int tries = 0;
    for (;; ++tries) {
      const std::optional<LogLik> ll = try_loglik(d, out.state.eta, state.beta + step);
      if (ll && ll->total >= ell_eta - block_tol) {
        out.state.beta = state.beta + step;
        out.loglik = ll->total;
        break;
      }
      if (tries >= config.step_halving_max)
        throw SolverError("beta block: step halving exhausted without ascent", {ell_old, ell_eta});
      step *= 0.5;
    }
    out.halvings += tries;
  } else {
    out.loglik = ell_eta;
  }
  return out;
}

inline ModelParams default_init(const Design& d, const SolverConfig& config) {
  ModelParams s;
  const int m = d.grid.m();
  s.eta = config.init_eta ? *config.init_eta
                          : Eigen::VectorXd::Constant(m, -std::log(static_cast<double>(m)));
  s.beta = config.init_beta ? *config.init_beta : Eigen::VectorXd::Constant(d.p, 0.01);
  if (s.eta.size() != m) throw std::invalid_argument("init_eta has wrong dimension");
  if (s.beta.size() != d.p) throw std::invalid_argument("init_beta has wrong dimension");
  return s;
}

/**
 * Full gradient-MM fit. Iterates sweeps until the summed absolute parameter
 * change drops below config.tol; hitting max_iter flags the result as
 * non-converged instead of throwing. Deterministic given data and config.
 */
inline FitResult mm_fit(const Design& d, const SolverConfig& config = {}) {
  bool any_event = false;
  for (const Censoring k : d.kind)
    if (k != Censoring::right) any_event = true;
  if (!any_event)
    throw std::invalid_argument("fit: degenerate data, needs a left- or interval-censored observation");

  ModelParams state = default_init(d, config);
  const std::optional<LogLik> ll0 = try_loglik(d, state.eta, state.beta);
  if (!ll0) throw std::runtime_error("fit: initial state violates hazard positivity");

  FitResult res;
  res.grid = d.grid;
  res.loglik_trace.reserve(config.max_iter + 1);
  res.loglik_trace.push_back(ll0->total);

  double ell = ll0->total;
  for (int it = 1; it <= config.max_iter; ++it) {
    SweepResult sw = sweep(state, config, d, ell);
    const double delta =
        (sw.state.eta - state.eta).cwiseAbs().sum() + (sw.state.beta - state.beta).cwiseAbs().sum();
    state = std::move(sw.state);
    ell = sw.loglik;
    res.loglik_trace.push_back(ell);
    res.n_halvings += sw.halvings;
    res.curvature_flag = res.curvature_flag || sw.curvature_flag;
    res.n_iter = it;
    if (delta < config.tol) {
      res.converged = true;
      break;
    }
  }
  res.params = std::move(state);
  res.loglik = ell;
  return res;
}

inline FitResult fit(const Dataset& data, const SolverConfig& config = {},
                     const CovariateProcess& process = CovariateProcess::time_independent()) {
  return mm_fit(Design::build(data, process), config);
}

}  // namespace addrisk

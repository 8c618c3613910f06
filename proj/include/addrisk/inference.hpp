#pragma once

#include "addrisk/mm_solver.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace addrisk {

struct ProfileConfig {
  double hn_multiplier = 1.5;  // h_n = multiplier * n^{-1/2}
  SolverConfig solver;
};

/**
 * Inner MM loop: maximize the log-likelihood over eta with beta held fixed,
 * warm-started. Runs the same eta sweeps as the full fit under the shared
 * stopping rule.
 */
inline Eigen::VectorXd profile_eta(const Design& d, const Eigen::VectorXd& beta,
                                   const Eigen::VectorXd& warm_start, const SolverConfig& solver = {}) {
  SolverConfig cfg = solver;
  cfg.freeze_beta = true;
  cfg.init_eta = warm_start;
  cfg.init_beta = beta;
  const FitResult res = mm_fit(d, cfg);
  if (!res.converged) {
    std::ostringstream msg;
    msg << "profile_eta: inner solver did not converge at beta = [" << beta.transpose() << "]";
    throw SolverError(msg.str(), res.loglik_trace);
  }
  return res.params.eta;
}

// pl(beta) = max over eta of ell(eta, beta), to inner-solver tolerance.
inline double profile_loglik(const Design& d, const Eigen::VectorXd& beta, const Eigen::VectorXd& warm_start,
                             const SolverConfig& solver = {}) {
  ModelParams state;
  state.eta = profile_eta(d, beta, warm_start, solver);
  state.beta = beta;
  return loglik_components(d, state).total;
}

struct ProfileCovariance {
  Eigen::MatrixXd cov;  // -D^{-1}
  Eigen::VectorXd se;   // sqrt of the diagonal of cov
  Eigen::MatrixXd d_matrix;
  double hn = 0.0;
  int pl_evaluations = 0;
};

/**
 * Second-difference covariance of beta-hat built from the profile
 * log-likelihood on a forward stencil with spacing h_n = c n^{-1/2}:
 *
 *   D_rs = { pl(b) - pl(b + h e_r) - pl(b + h e_s) + pl(b + h e_r + h e_s) } / h^2
 *
 * pl at the fitted beta is the fit's own log-likelihood; every shifted point
 * is profiled by the warm-started inner loop. Distinct pl values are cached,
 * so exactly 1 + p + p(p+1)/2 profile evaluations are performed.
 */
inline ProfileCovariance profile_covariance(const Design& d, const FitResult& fit,
                                            const ProfileConfig& config = {}) {
  if (!fit.converged) throw std::invalid_argument("profile_covariance: fit did not converge");
  if (!(config.hn_multiplier > 0.0)) throw std::invalid_argument("profile_covariance: hn multiplier must be positive");
  const int p = fit.params.p();
  const double hn = config.hn_multiplier / std::sqrt(static_cast<double>(d.n));

  ProfileCovariance out;
  out.hn = hn;

  const Eigen::VectorXd& beta_hat = fit.params.beta;
  const Eigen::VectorXd& warm = fit.params.eta;
  const double pl0 = fit.loglik;
  out.pl_evaluations = 1;

  auto pl_shift = [&](int r, int s) {  // pl at beta_hat + h e_r (+ h e_s when s >= 0)
    Eigen::VectorXd b = beta_hat;
    b[r] += hn;
    if (s >= 0) b[s] += hn;
    ++out.pl_evaluations;
    return profile_loglik(d, b, warm, config.solver);
  };

  std::vector<double> pl_single(p);
  for (int r = 0; r < p; ++r) pl_single[r] = pl_shift(r, -1);

  Eigen::MatrixXd D(p, p);
  for (int r = 0; r < p; ++r) {
    for (int s = r; s < p; ++s) {
      const double pl_rs = pl_shift(r, s);
      const double v = (pl0 - pl_single[r] - pl_single[s] + pl_rs) / (hn * hn);
      D(r, s) = v;
      D(s, r) = v;
    }
  }
  out.d_matrix = D;

  Eigen::MatrixXd neg_d = -D;
  Eigen::LLT<Eigen::MatrixXd> llt(neg_d);
  if (llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(neg_d);
    std::ostringstream msg;
    msg << "profile_covariance: -D is not positive definite (bad h_n?); eigenvalues of -D: ["
        << eig.eigenvalues().transpose() << "]";
    throw std::runtime_error(msg.str());
  }
  out.cov = llt.solve(Eigen::MatrixXd::Identity(p, p));
  out.se = out.cov.diagonal().cwiseSqrt();
  return out;
}

}  // namespace addrisk

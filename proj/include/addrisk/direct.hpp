#pragma once

#include "addrisk/inference.hpp"
#include "addrisk/mm_solver.hpp"
#include "addrisk/simulate.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace addrisk {

struct DirectConfig {
  int max_iter = 5000;
  double grad_tol = 1e-7;   // stop when ||grad||_inf < grad_tol * (1 + |f|)
  double f_tol = 1e-12;     // stop on relative objective stagnation
  int backtrack_max = 60;
  std::optional<Eigen::VectorXd> init_eta;
  std::optional<Eigen::VectorXd> init_beta;
};

namespace detail {

// Objective -ell(eta, beta) over theta = [eta; beta]; +inf outside the
// positivity domain so the line search backs off.
inline double direct_objective(const Design& d, const Eigen::VectorXd& theta) {
  const int m = d.grid.m();
  const std::optional<LogLik> ll = try_loglik(d, theta.head(m), theta.tail(d.p));
  return ll ? -ll->total : std::numeric_limits<double>::infinity();
}

inline Eigen::VectorXd direct_gradient(const Design& d, const Eigen::VectorXd& theta) {
  const int m = d.grid.m();
  const Scores sc = compute_scores(d, theta.head(m), theta.tail(d.p));
  Eigen::VectorXd grad(m + d.p);
  for (int k = 0; k < m; ++k) grad[k] = -std::exp(theta[k]) * sc.g[k];
  grad.tail(d.p) = -sc.s2;
  return grad;
}

}  // namespace detail

/**
 * Quasi-Newton (BFGS) ascent of the log-likelihood over all m + p
 * parameters, with analytic gradient and backtracking line search. Serves as
 * the independent optimizer the MM fit is checked against and the slow side
 * of the timing comparison.
 */
inline FitResult direct_fit(const Design& d, const DirectConfig& config = {}) {
  const int m = d.grid.m();
  const int dim = m + d.p;

  SolverConfig init_cfg;
  init_cfg.init_eta = config.init_eta;
  init_cfg.init_beta = config.init_beta;
  const ModelParams start = default_init(d, init_cfg);
  Eigen::VectorXd theta(dim);
  theta.head(m) = start.eta;
  theta.tail(d.p) = start.beta;

  double f = detail::direct_objective(d, theta);
  if (!std::isfinite(f)) throw std::runtime_error("direct_fit: initial state violates hazard positivity");
  Eigen::VectorXd grad = detail::direct_gradient(d, theta);

  Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(dim, dim);
  bool scaled = false;
  bool converged = false;
  int it = 0;

  FitResult res;
  res.grid = d.grid;
  res.loglik_trace.push_back(-f);

  for (; it < config.max_iter; ++it) {
    if (grad.cwiseAbs().maxCoeff() < config.grad_tol * (1.0 + std::abs(f))) {
      converged = true;
      break;
    }
    Eigen::VectorXd dir = -(h_inv * grad);
    if (dir.dot(grad) >= 0.0) {  // not a descent direction; reset
      h_inv.setIdentity();
      dir = -grad;
    }

    double alpha = 1.0;
    double f_new = std::numeric_limits<double>::infinity();
    Eigen::VectorXd theta_new;
    const double slope = grad.dot(dir);
    bool found = false;
    for (int bt = 0; bt < config.backtrack_max; ++bt) {
      theta_new = theta + alpha * dir;
      f_new = detail::direct_objective(d, theta_new);
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * alpha * slope) {
        found = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!found) break;  // line-search failure

    Eigen::VectorXd grad_new = detail::direct_gradient(d, theta_new);
    const Eigen::VectorXd s = theta_new - theta;
    const Eigen::VectorXd y = grad_new - grad;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        h_inv = (sy / y.dot(y)) * Eigen::MatrixXd::Identity(dim, dim);
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::VectorXd hy = h_inv * y;
      // BFGS inverse update: H += (1 + y'Hy rho) rho ss' - rho (s (Hy)' + Hy s')
      h_inv += (1.0 + rho * y.dot(hy)) * rho * (s * s.transpose());
      h_inv -= rho * (s * hy.transpose() + hy * s.transpose());
    }

    const double f_drop = f - f_new;
    theta = std::move(theta_new);
    grad = std::move(grad_new);
    f = f_new;
    res.loglik_trace.push_back(-f);
    if (f_drop < config.f_tol * (1.0 + std::abs(f))) {
      converged = grad.cwiseAbs().maxCoeff() < std::sqrt(config.grad_tol) * (1.0 + std::abs(f));
      break;
    }
  }

  res.params.eta = theta.head(m);
  res.params.beta = theta.tail(d.p);
  res.loglik = -f;
  res.n_iter = it;
  res.converged = converged;
  return res;
}

inline FitResult direct_fit(const Dataset& data, const DirectConfig& config = {},
                            const CovariateProcess& process = CovariateProcess::time_independent()) {
  return direct_fit(Design::build(data, process), config);
}

// Central finite differences of the analytic gradient; the full (m+p)^2
// observed information, inverted for the direct method's standard errors.
inline Eigen::VectorXd direct_se(const Design& d, const ModelParams& params, double step = 1e-5) {
  const int m = d.grid.m();
  const int dim = m + d.p;
  Eigen::VectorXd theta(dim);
  theta.head(m) = params.eta;
  theta.tail(d.p) = params.beta;

  Eigen::MatrixXd hess(dim, dim);
  Eigen::VectorXd tp = theta, tm = theta;
  for (int j = 0; j < dim; ++j) {
    const double h = step * (1.0 + std::abs(theta[j]));
    tp[j] = theta[j] + h;
    tm[j] = theta[j] - h;
    hess.col(j) = (detail::direct_gradient(d, tp) - detail::direct_gradient(d, tm)) / (2.0 * h);
    tp[j] = theta[j];
    tm[j] = theta[j];
  }
  hess = 0.5 * (hess + hess.transpose()).eval();  // -grad f = grad ell, so hess is -d2 ell

  Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
  const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(dim, dim));
  return cov.diagonal().tail(d.p).cwiseSqrt();
}

struct BenchRecord {
  std::string method;
  int n = 0;
  int m = 0;
  int p = 0;
  double ate_s = 0.0;  // median time to compute estimates
  double ats_s = 0.0;  // median time to compute standard errors
  double loglik = 0.0;
};

/**
 * Wall-clock comparison of the MM fit against the direct quasi-Newton fit on
 * simulated data, single-threaded, median over `repetitions` runs on the
 * same dataset per sample size. Standard errors are timed with each
 * method's own procedure: profile likelihood for MM, inverse observed
 * information for the direct fit.
 */
inline std::vector<BenchRecord> bench(const std::vector<int>& sizes, ScenarioKind kind,
                                      const Eigen::VectorXd& beta_true, int repetitions = 3,
                                      std::uint64_t seed = 20240401) {
  using clock = std::chrono::steady_clock;
  auto median_of = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };

  std::vector<BenchRecord> records;
  for (std::size_t si = 0; si < sizes.size(); ++si) {
    const Scenario scenario = Scenario::make(kind, beta_true, sizes[si], seed + si);
    const Dataset data = generate(scenario);
    const Design design = Design::build(data, scenario.process());

    BenchRecord mm{"mm", sizes[si], design.grid.m(), design.p, 0.0, 0.0, 0.0};
    BenchRecord direct{"direct", sizes[si], design.grid.m(), design.p, 0.0, 0.0, 0.0};

    std::vector<double> t_fit, t_se;
    FitResult mm_res;
    for (int r = 0; r < repetitions; ++r) {
      const auto t0 = clock::now();
      mm_res = mm_fit(design);
      const auto t1 = clock::now();
      profile_covariance(design, mm_res);
      const auto t2 = clock::now();
      t_fit.push_back(std::chrono::duration<double>(t1 - t0).count());
      t_se.push_back(std::chrono::duration<double>(t2 - t1).count());
    }
    mm.ate_s = median_of(t_fit);
    mm.ats_s = median_of(t_se);
    mm.loglik = mm_res.loglik;

    t_fit.clear();
    t_se.clear();
    FitResult direct_res;
    for (int r = 0; r < repetitions; ++r) {
      const auto t0 = clock::now();
      direct_res = direct_fit(design);
      const auto t1 = clock::now();
      direct_se(design, direct_res.params);
      const auto t2 = clock::now();
      t_fit.push_back(std::chrono::duration<double>(t1 - t0).count());
      t_se.push_back(std::chrono::duration<double>(t2 - t1).count());
    }
    direct.ate_s = median_of(t_fit);
    direct.ats_s = median_of(t_se);
    direct.loglik = direct_res.loglik;

    records.push_back(mm);
    records.push_back(direct);
  }
  return records;
}

}  // namespace addrisk

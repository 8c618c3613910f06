#pragma once

#include "addrisk/grid.hpp"
#include "addrisk/types.hpp"

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

namespace addrisk {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// A1(u) = exp(-u) / (1 - exp(-u)), strictly decreasing on (0, inf).
inline double a1(double u) {
  if (!(u > 0.0)) throw std::domain_error("a1: argument must be positive");
  return std::exp(-u) / (-std::expm1(-u));
}

// A2(u) = exp(-u) / (2 (1 - exp(-u))^2).
inline double a2(double u) {
  if (!(u > 0.0)) throw std::domain_error("a2: argument must be positive");
  const double d = -std::expm1(-u);
  return std::exp(-u) / (2.0 * d * d);
}

// log(1 - exp(-u)) for u > 0, stable down to u ~ 1e-300. Above the double
// underflow boundary 1 - exp(-u) is treated as exactly 1.
inline double log1mexp(double u) {
  if (!(u > 0.0)) throw std::domain_error("log1mexp: argument must be positive");
  if (u > 745.0) return 0.0;
  if (u <= 0.6931471805599453) return std::log(-std::expm1(-u));
  return std::log1p(-std::exp(-u));
}

// Guarded ratio: an exact 0/0 is defined as 0; any other zero denominator
// is a domain error.
inline double zerosafe_div(double num, double den) {
  if (den == 0.0) {
    if (num == 0.0) return 0.0;
    throw std::domain_error("zerosafe_div: nonzero numerator over zero denominator");
  }
  return num / den;
}

/**
 * Per-observation cumulative sums entering the likelihood:
 *   uL  = sum of lambda_k over t_k <= L  + beta' Z_x(L)
 *   uR  = sum of lambda_k over t_k <= R  + beta' Z_x(R)
 *   uLR = sum of lambda_k over L < t_k <= R + beta' {Z_x(R) - Z_x(L)}
 * Sides that do not exist for the censoring type are NaN.
 */
struct UTerms {
  double uL = kNaN;
  double uR = kNaN;
  double uLR = kNaN;
};

/**
 * Immutable per-dataset working set: grid, mask prefix counts and cached
 * cumulative covariate values at each observation's endpoints. Columns of
 * zl/zr/zlr correspond to observations; unused sides are zero.
 */
struct Design {
  InspectionGrid grid;
  std::vector<Censoring> kind;
  std::vector<int> cnt_l;  // #{k : t_k <= L}, -1 for right-censored
  std::vector<int> cnt_r;  // #{k : t_k <= R}, -1 for left-censored
  Eigen::MatrixXd zl;      // p x n, Z_x(L)
  Eigen::MatrixXd zr;      // p x n, Z_x(R)
  Eigen::MatrixXd zlr;     // p x n, Z_x(R) - Z_x(L)
  int n = 0;
  int p = 0;

  static Design build(const Dataset& data, const CovariateProcess& process) {
    return build(data, build_grid(data), process);
  }

  static Design build(const Dataset& data, InspectionGrid grid, const CovariateProcess& process) {
    Design d;
    d.n = static_cast<int>(data.size());
    d.p = covariate_dim(data);
    d.grid = std::move(grid);
    d.kind.resize(d.n);
    d.cnt_l = d.grid.count_le_l;
    d.cnt_r = d.grid.count_le_r;
    d.zl = Eigen::MatrixXd::Zero(d.p, d.n);
    d.zr = Eigen::MatrixXd::Zero(d.p, d.n);
    d.zlr = Eigen::MatrixXd::Zero(d.p, d.n);
    for (int i = 0; i < d.n; ++i) {
      const Observation& o = data[i];
      d.kind[i] = o.kind;
      if (!o.is_right()) d.zl.col(i) = process.cumulative(o.x, o.l_point());
      if (!o.is_left()) d.zr.col(i) = process.cumulative(o.x, o.r_point());
      if (o.is_interval()) d.zlr.col(i) = d.zr.col(i) - d.zl.col(i);
    }
    return d;
  }

  // prefix[c] = sum of exp(eta_k) over the first c grid points.
  std::vector<double> hazard_prefix(const Eigen::VectorXd& eta) const {
    std::vector<double> prefix(grid.m() + 1, 0.0);
    for (int k = 0; k < grid.m(); ++k) prefix[k + 1] = prefix[k] + std::exp(eta[k]);
    return prefix;
  }

  UTerms u_terms_at(int i, const std::vector<double>& prefix, const Eigen::VectorXd& beta) const {
    UTerms u;
    switch (kind[i]) {
      case Censoring::left:
        u.uL = prefix[cnt_l[i]] + beta.dot(zl.col(i));
        break;
      case Censoring::interval:
        u.uL = prefix[cnt_l[i]] + beta.dot(zl.col(i));
        u.uR = prefix[cnt_r[i]] + beta.dot(zr.col(i));
        u.uLR = (prefix[cnt_r[i]] - prefix[cnt_l[i]]) + beta.dot(zlr.col(i));
        break;
      case Censoring::right:
        u.uR = prefix[cnt_r[i]] + beta.dot(zr.col(i));
        break;
    }
    return u;
  }
};

inline UTerms u_terms(const Observation& obs, const InspectionGrid& grid, const ModelParams& params,
                      const CovariateProcess& process) {
  UTerms u;
  const Eigen::VectorXd lam = params.lambda();
  auto lam_prefix = [&](double t) {
    double s = 0.0;
    const int c = grid.count_le(t);
    for (int k = 0; k < c; ++k) s += lam[k];
    return s;
  };
  if (!obs.is_right()) u.uL = lam_prefix(obs.l_point()) + params.beta.dot(process.cumulative(obs.x, obs.l_point()));
  if (!obs.is_left()) u.uR = lam_prefix(obs.r_point()) + params.beta.dot(process.cumulative(obs.x, obs.r_point()));
  if (obs.is_interval()) u.uLR = u.uR - u.uL;
  return u;
}

/** Observed-data log-likelihood with its four components. */
struct LogLik {
  double total = 0.0;
  double l1 = 0.0;  // left-censored:   log(1 - exp(-uL))
  double l2 = 0.0;  // interval:        -uL
  double l3 = 0.0;  // interval:        log(1 - exp(-uLR))
  double l4 = 0.0;  // right-censored:  -uR
};

// Evaluates the log-likelihood; empty result when a log-term argument is
// nonpositive (hazard-positivity violation at this parameter point).
inline std::optional<LogLik> try_loglik(const Design& d, const Eigen::VectorXd& eta, const Eigen::VectorXd& beta) {
  const std::vector<double> prefix = d.hazard_prefix(eta);
  LogLik ll;
  for (int i = 0; i < d.n; ++i) {
    const UTerms u = d.u_terms_at(i, prefix, beta);
    switch (d.kind[i]) {
      case Censoring::left:
        if (!(u.uL > 0.0)) return std::nullopt;
        ll.l1 += log1mexp(u.uL);
        break;
      case Censoring::interval:
        if (!(u.uL > 0.0) || !(u.uLR > 0.0)) return std::nullopt;
        ll.l2 -= u.uL;
        ll.l3 += log1mexp(u.uLR);
        break;
      case Censoring::right:
        if (!(u.uR > 0.0)) return std::nullopt;
        ll.l4 -= u.uR;
        break;
    }
  }
  ll.total = ll.l1 + ll.l2 + ll.l3 + ll.l4;
  return ll;
}

inline LogLik loglik_components(const Design& d, const ModelParams& params) {
  const std::optional<LogLik> ll = try_loglik(d, params.eta, params.beta);
  if (!ll) throw std::domain_error("loglik: hazard positivity violated (nonpositive u-term)");
  return *ll;
}

inline LogLik loglik_components(const Dataset& data, const InspectionGrid& grid, const ModelParams& params,
                                const CovariateProcess& process) {
  return loglik_components(Design::build(data, grid, process), params);
}

inline double loglik(const Dataset& data, const InspectionGrid& grid, const ModelParams& params,
                     const CovariateProcess& process) {
  return loglik_components(data, grid, params, process).total;
}

namespace detail {

// Shared pieces of the surrogate for one anchored u-term:
//   lin  = A1(u0) + 2 A2(u0) u0 - 1/u0        (coefficient of the linear part)
//   quad = A2(u0) u0                           (coefficient scale of squares)
//   cst  = log(1 - e^{-u0}) - A1(u0) u0 - A2(u0) u0^2 + 2
// The +2 collects the two additive constants produced by the tangent bounds;
// it makes the surrogate exactly tangent at the anchor.
struct SurrogatePieces {
  double lin;
  double quad;
  double cst;
  double inv_u0;
};

inline SurrogatePieces surrogate_pieces(double u0) {
  SurrogatePieces s;
  const double A1v = a1(u0);
  const double A2v = a2(u0);
  s.inv_u0 = 1.0 / u0;
  s.lin = A1v + 2.0 * A2v * u0 - s.inv_u0;
  s.quad = A2v * u0;
  s.cst = log1mexp(u0) - A1v * u0 - A2v * u0 * u0 + 2.0;
  return s;
}

}  // namespace detail

/**
 * The separable surrogate evaluated at (params | anchor): sum over k of the
 * lambda_k blocks, the beta block and the anchor-only constant. Tangent to
 * the log-likelihood at params == anchor and below it everywhere on the
 * valid domain (positive lambdas, positive anchor u-terms, positive
 * covariate inner products except exact 0/0).
 */
inline double minorizer(const ModelParams& params, const ModelParams& anchor, const Design& d) {
  if (params.eta.size() != d.grid.m() || anchor.eta.size() != d.grid.m())
    throw std::invalid_argument("minorizer: eta dimension mismatch");
  const Eigen::VectorXd lam = params.lambda();
  const Eigen::VectorXd lam0 = anchor.lambda();
  const std::vector<double> prefix0 = d.hazard_prefix(anchor.eta);

  double value = 0.0;
  // Accumulated per-k coefficients of lambda_k, lambda_k^2 and 1/lambda_k.
  Eigen::VectorXd c_lin = Eigen::VectorXd::Zero(d.grid.m());
  Eigen::VectorXd c_sq = Eigen::VectorXd::Zero(d.grid.m());
  Eigen::VectorXd c_inv = Eigen::VectorXd::Zero(d.grid.m());

  for (int i = 0; i < d.n; ++i) {
    const UTerms u0 = d.u_terms_at(i, prefix0, anchor.beta);
    switch (d.kind[i]) {
      case Censoring::left: {
        if (!(u0.uL > 0.0)) throw std::domain_error("minorizer: nonpositive anchor u-term");
        const detail::SurrogatePieces s = detail::surrogate_pieces(u0.uL);
        for (int k = 0; k < d.cnt_l[i]; ++k) {
          c_lin[k] += s.lin;
          c_sq[k] += s.quad / lam0[k];
          c_inv[k] += lam0[k] * lam0[k] * s.inv_u0;
        }
        const double bz = params.beta.dot(d.zl.col(i));
        const double bz0 = anchor.beta.dot(d.zl.col(i));
        value += s.lin * bz - zerosafe_div(s.quad * bz * bz, bz0) - zerosafe_div(bz0 * bz0 * s.inv_u0, bz) + s.cst;
        break;
      }
      case Censoring::interval: {
        if (!(u0.uLR > 0.0) || !(u0.uL > 0.0)) throw std::domain_error("minorizer: nonpositive anchor u-term");
        const detail::SurrogatePieces s = detail::surrogate_pieces(u0.uLR);
        for (int k = d.cnt_l[i]; k < d.cnt_r[i]; ++k) {
          c_lin[k] += s.lin;
          c_sq[k] += s.quad / lam0[k];
          c_inv[k] += lam0[k] * lam0[k] * s.inv_u0;
        }
        const double bz = params.beta.dot(d.zlr.col(i));
        const double bz0 = anchor.beta.dot(d.zlr.col(i));
        value += s.lin * bz - zerosafe_div(s.quad * bz * bz, bz0) - zerosafe_div(bz0 * bz0 * s.inv_u0, bz) + s.cst;
        // The linear ell_2 piece -uL is kept exactly (no bound needed).
        for (int k = 0; k < d.cnt_l[i]; ++k) c_lin[k] += -1.0;
        value += -params.beta.dot(d.zl.col(i));
        break;
      }
      case Censoring::right: {
        // The linear ell_4 piece -uR is kept exactly.
        for (int k = 0; k < d.cnt_r[i]; ++k) c_lin[k] += -1.0;
        value += -params.beta.dot(d.zr.col(i));
        break;
      }
    }
  }

  for (int k = 0; k < d.grid.m(); ++k)
    value += c_lin[k] * lam[k] - c_sq[k] * lam[k] * lam[k] - zerosafe_div(c_inv[k], lam[k]);
  return value;
}

inline double minorizer(const ModelParams& params, const ModelParams& anchor, const Dataset& data,
                        const InspectionGrid& grid, const CovariateProcess& process) {
  return minorizer(params, anchor, Design::build(data, grid, process));
}

}  // namespace addrisk

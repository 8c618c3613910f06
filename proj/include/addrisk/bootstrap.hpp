#pragma once

#include "addrisk/grid.hpp"
#include "addrisk/mm_solver.hpp"
#include "addrisk/parallel.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace addrisk {

struct BootConfig {
  int boot_num = 200;
  double conf = 0.95;
  std::set<std::string> ci_types = {"normal", "basic", "percent", "bca"};
  std::vector<double> surv_times;     // optional survival targets
  Eigen::VectorXd surv_covariate;     // covariate value for the survival targets
  std::uint64_t seed = 1;
  int threads = 1;
};

struct CiInterval {
  double lwr = 0.0;
  double upr = 0.0;
};

struct BootstrapResult {
  Eigen::VectorXd beta_est;
  Eigen::MatrixXd replicate_betas;  // successful replicates only, in index order
  Eigen::VectorXd beta_boot_se;
  std::map<std::string, std::vector<CiInterval>> ci_beta;

  Eigen::VectorXd surv_est;         // empty unless survival targets requested
  Eigen::MatrixXd replicate_survs;
  Eigen::VectorXd surv_boot_se;
  std::map<std::string, std::vector<CiInterval>> ci_surv;

  int n_failed = 0;
  double min_sweep_delta = 0.0;  // worst per-sweep log-likelihood drop seen
};

// Subject-level resample with replacement; the caller rebuilds the grid.
inline Dataset resample(const Dataset& data, std::mt19937_64& rng) {
  if (data.size() < 2) throw std::invalid_argument("resample: need at least two subjects");
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  Dataset out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out.push_back(data[pick(rng)]);
  return out;
}

// Type-7 empirical quantile (linear interpolation) on a sorted sample.
inline double quantile_type7(const std::vector<double>& sorted, double prob) {
  if (sorted.empty()) throw std::invalid_argument("quantile_type7: empty sample");
  if (prob <= 0.0) return sorted.front();
  if (prob >= 1.0) return sorted.back();
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - std::floor(h)) * (sorted[hi] - sorted[lo]);
}

namespace detail {

inline double norm_quantile(double p) { return boost::math::quantile(boost::math::normal(), p); }
inline double norm_cdf(double x) { return boost::math::cdf(boost::math::normal(), x); }

inline double sample_mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double sample_sd(const std::vector<double>& v) {
  const double m = sample_mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / (static_cast<double>(v.size()) - 1.0));
}

}  // namespace detail

// Bias-corrected normal interval: center 2*est - mean(reps), half-width
// z_{(1+conf)/2} * sd(reps).
inline CiInterval normal_ci(double est, const std::vector<double>& reps, double conf) {
  const double z = detail::norm_quantile(0.5 + conf / 2.0);
  const double center = 2.0 * est - detail::sample_mean(reps);
  const double se = detail::sample_sd(reps);
  return {center - z * se, center + z * se};
}

inline CiInterval percentile_ci(const std::vector<double>& sorted_reps, double conf) {
  const double alpha = 1.0 - conf;
  return {quantile_type7(sorted_reps, alpha / 2.0), quantile_type7(sorted_reps, 1.0 - alpha / 2.0)};
}

// Basic interval: the percentile interval reflected around the estimate.
inline CiInterval basic_ci(double est, const std::vector<double>& sorted_reps, double conf) {
  const CiInterval perc = percentile_ci(sorted_reps, conf);
  return {2.0 * est - perc.upr, 2.0 * est - perc.lwr};
}

// Jackknife acceleration for BCa from leave-one-out estimates.
inline double bca_acceleration(const std::vector<double>& jack) {
  if (jack.size() < 2) return 0.0;
  const double m = detail::sample_mean(jack);
  double num = 0.0, den = 0.0;
  for (double x : jack) {
    const double dd = m - x;
    num += dd * dd * dd;
    den += dd * dd;
  }
  if (den == 0.0) return 0.0;
  return num / (6.0 * std::pow(den, 1.5));
}

// Bias-correction z0 from the fraction of replicates below the estimate,
// clamped away from 0/1 so the interval stays finite.
inline double bca_z0(double est, const std::vector<double>& reps) {
  double below = 0.0;
  for (double x : reps)
    if (x < est) below += 1.0;
  const double b = static_cast<double>(reps.size());
  const double frac = std::min(std::max(below / b, 0.5 / b), 1.0 - 0.5 / b);
  return detail::norm_quantile(frac);
}

inline CiInterval bca_ci(const std::vector<double>& sorted_reps, double conf, double z0, double accel) {
  const double alpha = 1.0 - conf;
  auto adjusted = [&](double a_level) {
    const double z = detail::norm_quantile(a_level);
    return detail::norm_cdf(z0 + (z0 + z) / (1.0 - accel * (z0 + z)));
  };
  return {quantile_type7(sorted_reps, adjusted(alpha / 2.0)), quantile_type7(sorted_reps, adjusted(1.0 - alpha / 2.0))};
}

namespace detail {

// Survival probability at time t for covariate x under a fitted model,
// constant beyond the last grid point (step-function convention).
inline double survival_at(const FitResult& fit, const CovariateProcess& process, const Eigen::VectorXd& x,
                          double t) {
  return survival(fit.grid, fit.params, process, x, t);
}

struct ReplicateStats {
  Eigen::MatrixXd values;        // boot_num x q, NaN rows for failures
  std::vector<bool> ok;
  int n_failed = 0;
  double min_sweep_delta = 0.0;
};

// Runs boot_num subject-level replicate fits and extracts q statistics per
// replicate. Per-replicate RNG streams are derived from (seed, index), so
// the result does not depend on the thread count.
template <class Extract>
inline ReplicateStats run_replicates(const Dataset& data, const CovariateProcess& process,
                                     const SolverConfig& solver, int boot_num, std::uint64_t seed, int threads,
                                     int q, Extract extract) {
  ReplicateStats out;
  out.values = Eigen::MatrixXd::Constant(boot_num, q, kNaN);
  out.ok.assign(boot_num, false);
  std::vector<double> worst(boot_num, 0.0);

  parallel_for_index(boot_num, threads, [&](int b) {
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(b)));
    try {
      const Dataset rep = resample(data, rng);
      const FitResult fit = mm_fit(Design::build(rep, process), solver);
      worst[b] = fit.min_sweep_delta();
      if (!fit.converged) return;
      out.values.row(b) = extract(fit).transpose();
      out.ok[b] = true;
    } catch (const std::exception&) {
      // failed replicate: dropped and counted
    }
  });

  for (int b = 0; b < boot_num; ++b) {
    if (!out.ok[b]) ++out.n_failed;
    out.min_sweep_delta = std::min(out.min_sweep_delta, worst[b]);
  }
  return out;
}

inline std::vector<double> column_of(const Eigen::MatrixXd& mat, const std::vector<bool>& ok, int j) {
  std::vector<double> v;
  v.reserve(mat.rows());
  for (int b = 0; b < mat.rows(); ++b)
    if (ok[b]) v.push_back(mat(b, j));
  return v;
}

}  // namespace detail

/**
 * Nonparametric bootstrap over subjects: standard errors and the requested
 * confidence-interval families for beta and, optionally, for survival
 * probabilities at given times and covariate value. BCa acceleration uses
 * leave-one-out jackknife refits. Deterministic per (seed, config),
 * independent of the thread count.
 */
inline BootstrapResult boot_analyze(const Dataset& data, const BootConfig& config = {},
                                    const SolverConfig& solver = {},
                                    const CovariateProcess& process = CovariateProcess::time_independent()) {
  if (config.boot_num < 2) throw std::invalid_argument("boot_analyze: boot_num must be >= 2");
  if (!(config.conf > 0.0 && config.conf < 1.0)) throw std::invalid_argument("boot_analyze: conf must lie in (0,1)");

  const Design design = Design::build(data, process);
  const FitResult base = mm_fit(design, solver);
  if (!base.converged) throw std::runtime_error("boot_analyze: base fit did not converge");

  const int p = design.p;
  const bool with_surv = !config.surv_times.empty();
  if (with_surv && config.surv_covariate.size() != p)
    throw std::invalid_argument("boot_analyze: survival covariate has wrong dimension");
  const int n_surv = static_cast<int>(config.surv_times.size());
  const int q = p + n_surv;

  auto extract = [&](const FitResult& fit) {
    Eigen::VectorXd v(q);
    v.head(p) = fit.params.beta;
    for (int j = 0; j < n_surv; ++j)
      v[p + j] = detail::survival_at(fit, process, config.surv_covariate, config.surv_times[j]);
    return v;
  };

  const detail::ReplicateStats reps = detail::run_replicates(data, process, solver, config.boot_num, config.seed,
                                                             config.threads, q, extract);
  if (reps.n_failed > config.boot_num / 5)
    throw std::runtime_error("boot_analyze: more than 20% of replicates failed (" +
                             std::to_string(reps.n_failed) + "/" + std::to_string(config.boot_num) + ")");

  // Jackknife estimates for the BCa acceleration.
  std::vector<std::vector<double>> jack(q);
  if (config.ci_types.count("bca") > 0) {
    const int n = static_cast<int>(data.size());
    std::vector<Eigen::VectorXd> jack_rows(n);
    std::vector<bool> jack_ok(n, false);
    parallel_for_index(n, config.threads, [&](int i) {
      Dataset loo;
      loo.reserve(n - 1);
      for (int j = 0; j < n; ++j)
        if (j != i) loo.push_back(data[j]);
      try {
        const FitResult fit = mm_fit(Design::build(loo, process), solver);
        if (!fit.converged) return;
        jack_rows[i] = extract(fit);
        jack_ok[i] = true;
      } catch (const std::exception&) {
      }
    });
    for (int j = 0; j < q; ++j)
      for (int i = 0; i < n; ++i)
        if (jack_ok[i]) jack[j].push_back(jack_rows[i][j]);
  }

  BootstrapResult out;
  out.n_failed = reps.n_failed;
  out.min_sweep_delta = std::min(base.min_sweep_delta(), reps.min_sweep_delta);
  out.beta_est = base.params.beta;

  const int kept = config.boot_num - reps.n_failed;
  out.replicate_betas.resize(kept, p);
  if (with_surv) out.replicate_survs.resize(kept, n_surv);
  for (int b = 0, r = 0; b < config.boot_num; ++b) {
    if (!reps.ok[b]) continue;
    out.replicate_betas.row(r) = reps.values.row(b).head(p);
    if (with_surv) out.replicate_survs.row(r) = reps.values.row(b).tail(n_surv);
    ++r;
  }

  auto summarize = [&](int j, double est, std::map<std::string, std::vector<CiInterval>>& ci_map, bool clamp01) {
    std::vector<double> col = detail::column_of(reps.values, reps.ok, j);
    std::vector<double> sorted = col;
    std::sort(sorted.begin(), sorted.end());
    const double se = detail::sample_sd(col);
    for (const std::string& type : config.ci_types) {
      CiInterval ci;
      if (type == "normal")
        ci = normal_ci(est, col, config.conf);
      else if (type == "basic")
        ci = basic_ci(est, sorted, config.conf);
      else if (type == "percent")
        ci = percentile_ci(sorted, config.conf);
      else if (type == "bca")
        ci = bca_ci(sorted, config.conf, bca_z0(est, col), bca_acceleration(jack[j]));
      else
        throw std::invalid_argument("boot_analyze: unknown CI type '" + type + "'");
      if (clamp01) {
        ci.lwr = std::min(std::max(ci.lwr, 0.0), 1.0);
        ci.upr = std::min(std::max(ci.upr, 0.0), 1.0);
      }
      ci_map[type].push_back(ci);
    }
    return se;
  };

  out.beta_boot_se.resize(p);
  for (int j = 0; j < p; ++j) out.beta_boot_se[j] = summarize(j, out.beta_est[j], out.ci_beta, false);

  if (with_surv) {
    out.surv_est.resize(n_surv);
    out.surv_boot_se.resize(n_surv);
    for (int j = 0; j < n_surv; ++j) {
      out.surv_est[j] = detail::survival_at(base, process, config.surv_covariate, config.surv_times[j]);
      // survival CI endpoints are clamped to [0,1]
      out.surv_boot_se[j] = summarize(p + j, out.surv_est[j], out.ci_surv, true);
    }
  }
  return out;
}

struct SurvivalBandRow {
  double time = 0.0;
  double group = 0.0;
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

/**
 * Pointwise bootstrap percentile bands for the fitted survival curves of a
 * set of covariate profiles, evaluated at the base-fit grid times. Rows come
 * out ordered by (group, time).
 */
inline std::vector<SurvivalBandRow> survival_bands(const Dataset& data,
                                                   const std::vector<Eigen::VectorXd>& groups,
                                                   const std::vector<double>& group_labels, int boot_num,
                                                   double conf, std::uint64_t seed, int threads = 1,
                                                   const SolverConfig& solver = {},
                                                   const CovariateProcess& process = CovariateProcess::time_independent()) {
  const Design design = Design::build(data, process);
  const FitResult base = mm_fit(design, solver);
  if (!base.converged) throw std::runtime_error("survival_bands: base fit did not converge");
  const std::vector<double>& times = base.grid.times;
  const int nt = static_cast<int>(times.size());
  const int ng = static_cast<int>(groups.size());

  auto extract = [&](const FitResult& fit) {
    Eigen::VectorXd v(ng * nt);
    for (int g = 0; g < ng; ++g)
      for (int t = 0; t < nt; ++t) v[g * nt + t] = detail::survival_at(fit, process, groups[g], times[t]);
    return v;
  };
  const detail::ReplicateStats reps =
      detail::run_replicates(data, process, solver, boot_num, seed, threads, ng * nt, extract);
  if (reps.n_failed > boot_num / 5) throw std::runtime_error("survival_bands: more than 20% of replicates failed");

  std::vector<SurvivalBandRow> rows;
  rows.reserve(ng * nt);
  for (int g = 0; g < ng; ++g) {
    for (int t = 0; t < nt; ++t) {
      std::vector<double> col = detail::column_of(reps.values, reps.ok, g * nt + t);
      std::sort(col.begin(), col.end());
      const CiInterval ci = percentile_ci(col, conf);
      SurvivalBandRow row;
      row.time = times[t];
      row.group = group_labels[g];
      row.estimate = detail::survival_at(base, process, groups[g], times[t]);
      row.lower = std::min(std::max(ci.lwr, 0.0), 1.0);
      row.upper = std::min(std::max(ci.upr, 0.0), 1.0);
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace addrisk

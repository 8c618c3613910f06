#pragma once

#include <Eigen/Core>

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace addrisk {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Censoring { left, interval, right };

/**
 * One subject's censoring window, censoring type and covariate row.
 *
 * Storage follows the canonical file layout: a left-censored subject keeps
 * left = 0 and its inspection point in `right`; a right-censored subject
 * keeps its inspection point in `left` and right = +inf. Interval-censored
 * subjects carry the window (left, right] directly.
 */
struct Observation {
  double left = 0.0;
  double right = kInf;
  Censoring kind = Censoring::interval;
  Eigen::VectorXd x;

  // Canonical L endpoint entering the likelihood (valid for left/interval).
  double l_point() const { return kind == Censoring::left ? right : left; }
  // Canonical R endpoint entering the likelihood (valid for right/interval).
  double r_point() const { return kind == Censoring::right ? left : right; }

  bool is_left() const { return kind == Censoring::left; }
  bool is_interval() const { return kind == Censoring::interval; }
  bool is_right() const { return kind == Censoring::right; }
};

using Dataset = std::vector<Observation>;

inline int covariate_dim(const Dataset& data) {
  return data.empty() ? 0 : static_cast<int>(data.front().x.size());
}

/**
 * Cumulative covariate trajectory t -> Z_x(t) = integral of X(s) ds on [0, t],
 * evaluated for a subject with covariate row x. The time-independent kind is
 * Z_x(t) = x * t; arbitrary trajectories are supplied as callables.
 */
class CovariateProcess {
 public:
  using Fn = std::function<Eigen::VectorXd(const Eigen::VectorXd& x, double t)>;

  static CovariateProcess time_independent() {
    return CovariateProcess([](const Eigen::VectorXd& x, double t) -> Eigen::VectorXd { return x * t; });
  }

  static CovariateProcess user_supplied(Fn fn) { return CovariateProcess(std::move(fn)); }

  Eigen::VectorXd cumulative(const Eigen::VectorXd& x, double t) const { return fn_(x, t); }

 private:
  explicit CovariateProcess(Fn fn) : fn_(std::move(fn)) {}
  Fn fn_;
};

/**
 * Full parameter state: eta_k = log(lambda_k) for the baseline hazard jumps
 * and the regression coefficients beta. Positivity of lambda is enforced by
 * the log parametrization.
 */
struct ModelParams {
  Eigen::VectorXd eta;
  Eigen::VectorXd beta;

  Eigen::VectorXd lambda() const { return eta.array().exp(); }
  int m() const { return static_cast<int>(eta.size()); }
  int p() const { return static_cast<int>(beta.size()); }
};

}  // namespace addrisk

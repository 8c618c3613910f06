#include "addrisk/mm_solver.hpp"

#include "addrisk/data_io.hpp"
#include "addrisk/simulate.hpp"

#include "support.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

using namespace addrisk;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const CovariateProcess kTimeIndep = CovariateProcess::time_independent();

Dataset single_right_censored(double r, double x) {
  Observation o;
  o.kind = Censoring::right;
  o.left = r;
  o.right = kInf;
  o.x = Eigen::VectorXd::Constant(1, x);
  return {o};
}

double fd_loglik_eta(const Design& d, const ModelParams& state, int k) {
  const double h = 1e-6 * (1.0 + std::abs(state.eta[k]));
  ModelParams up = state, dn = state;
  up.eta[k] += h;
  dn.eta[k] -= h;
  return (loglik_components(d, up).total - loglik_components(d, dn).total) / (2.0 * h);
}

double fd_loglik_beta(const Design& d, const ModelParams& state, int j) {
  const double h = 1e-6 * (1.0 + std::abs(state.beta[j]));
  ModelParams up = state, dn = state;
  up.beta[j] += h;
  dn.beta[j] -= h;
  return (loglik_components(d, up).total - loglik_components(d, dn).total) / (2.0 * h);
}

}  // namespace

TEST_CASE("eta score: hand case and gradient tangency") {
  SECTION("single right-censored subject gives -exp(eta_k)") {
    const Dataset data = single_right_censored(2.0, 0.0);
    const Design d = Design::build(data, kTimeIndep);
    ModelParams state;
    state.eta = Eigen::VectorXd::Constant(1, -0.4);
    state.beta = Eigen::VectorXd::Zero(1);
    CHECK_THAT(score_eta(0, state, d), WithinRel(-std::exp(-0.4), 1e-14));
    CHECK_THAT(curvature_eta(0, state, d), WithinRel(-std::exp(-0.4), 1e-14));
  }

  SECTION("anchored scores equal finite differences of the log-likelihood") {
    std::mt19937_64 rng(17);
    for (int ds = 0; ds < 5; ++ds) {
      const Dataset data = test_support::random_dataset(rng, 8 + 4 * ds, 2);
      const Design d = Design::build(data, kTimeIndep);
      for (int rep = 0; rep < 4; ++rep) {
        const ModelParams state = test_support::random_params(rng, d.grid.m(), 2);
        for (int k = 0; k < d.grid.m(); ++k) {
          const double analytic = score_eta(k, state, d);
          const double fd = fd_loglik_eta(d, state, k);
          REQUIRE_THAT(analytic, WithinAbs(fd, 1e-5 * std::max(1.0, std::abs(fd))));
        }
        const Eigen::VectorXd s2 = score_beta(state, d);
        for (int j = 0; j < 2; ++j) {
          const double fd = fd_loglik_beta(d, state, j);
          REQUIRE_THAT(s2[j], WithinAbs(fd, 1e-5 * std::max(1.0, std::abs(fd))));
        }
      }
    }
  }
}

TEST_CASE("eta curvature: consistency with the surrogate score") {
  std::mt19937_64 rng(29);
  for (int ds = 0; ds < 5; ++ds) {
    const Dataset data = test_support::random_dataset(rng, 10, 1);
    const Design d = Design::build(data, kTimeIndep);
    const ModelParams anchor = test_support::random_params(rng, d.grid.m(), 1);
    for (int k = 0; k < d.grid.m(); ++k) {
      // the anchored score is the surrogate score evaluated at the anchor
      CHECK_THAT(surrogate_score_eta(k, anchor.eta[k], anchor, d),
                 WithinAbs(score_eta(k, anchor, d), 1e-10 * (1.0 + std::abs(score_eta(k, anchor, d)))));

      // S_{1,kk} equals d/d eta_k of the surrogate score with the anchor fixed
      const double h = 1e-6 * (1.0 + std::abs(anchor.eta[k]));
      const double fd = (surrogate_score_eta(k, anchor.eta[k] + h, anchor, d) -
                         surrogate_score_eta(k, anchor.eta[k] - h, anchor, d)) /
                        (2.0 * h);
      const double analytic = curvature_eta(k, anchor, d);
      REQUIRE_THAT(analytic, WithinAbs(fd, 1e-4 * std::max(1.0, std::abs(fd))));
    }
  }
}

TEST_CASE("eta curvature is negative when observations contribute") {
  std::mt19937_64 rng(41);
  for (int rep = 0; rep < 100; ++rep) {
    const Dataset data = test_support::random_dataset(rng, 15, 1);
    const Design d = Design::build(data, kTimeIndep);
    const ModelParams state = test_support::random_params(rng, d.grid.m(), 1);
    for (int k = 0; k < d.grid.m(); ++k) REQUIRE(curvature_eta(k, state, d) < 0.0);
  }
}

TEST_CASE("beta score and curvature") {
  SECTION("one right-censored subject, p = 1") {
    const Dataset data = single_right_censored(2.0, 1.5);
    const Design d = Design::build(data, kTimeIndep);
    ModelParams state;
    state.eta = Eigen::VectorXd::Constant(1, -0.7);
    state.beta = Eigen::VectorXd::Constant(1, 0.3);
    // S_2 = -Z(R) = -(x * R)
    CHECK_THAT(score_beta(state, d)[0], WithinRel(-3.0, 1e-14));
  }

  SECTION("all-zero covariates give a zero score") {
    std::mt19937_64 rng(5);
    Dataset data = test_support::random_dataset(rng, 10, 1);
    for (Observation& o : data) o.x.setZero();
    const Design d = Design::build(data, kTimeIndep);
    const ModelParams state = test_support::random_params(rng, d.grid.m(), 1);
    CHECK(score_beta(state, d).isZero(0.0));
  }

  SECTION("symmetric, negative semidefinite, matches scalar reduction") {
    std::mt19937_64 rng(67);
    for (int rep = 0; rep < 50; ++rep) {
      const Dataset data = test_support::random_dataset(rng, 12, 2);
      const Design d = Design::build(data, kTimeIndep);
      const ModelParams state = test_support::random_params(rng, d.grid.m(), 2);
      const Eigen::MatrixXd s22 = curvature_beta(state, d);
      REQUIRE(s22 == s22.transpose());
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s22);
      REQUIRE(eig.eigenvalues().maxCoeff() <= 1e-10);
    }

    // p = 1: the curvature is the finite difference of the surrogate score
    const Dataset data = test_support::random_dataset(rng, 12, 1);
    const Design d = Design::build(data, kTimeIndep);
    const ModelParams anchor = test_support::random_params(rng, d.grid.m(), 1);
    const double h = 1e-6;
    const double fd = (surrogate_score_beta(anchor.beta.array() + h, anchor, d)[0] -
                       surrogate_score_beta(anchor.beta.array() - h, anchor, d)[0]) /
                      (2.0 * h);
    CHECK_THAT(curvature_beta(anchor, d)(0, 0), WithinAbs(fd, 1e-4 * std::max(1.0, std::abs(fd))));
  }
}

TEST_CASE("sweep: fixed point and monotone ascent") {
  SECTION("stationary at a tightly converged fit") {
    std::mt19937_64 rng(3);
    const Dataset data = test_support::random_dataset(rng, 40, 1);
    const Design d = Design::build(data, kTimeIndep);
    SolverConfig tight;
    tight.tol = 1e-10;
    tight.max_iter = 20000;
    const FitResult res = mm_fit(d, tight);
    REQUIRE(res.converged);
    const SweepResult sw = sweep(res.params, tight, d);
    CHECK((sw.state.eta - res.params.eta).cwiseAbs().maxCoeff() < 1e-7);
    CHECK((sw.state.beta - res.params.beta).cwiseAbs().maxCoeff() < 1e-7);
  }

  SECTION("no sweep decreases the log-likelihood on simulated fits") {
    for (int rep = 0; rep < 50; ++rep) {
      Scenario sc = Scenario::make(ScenarioKind::const_hazard, Eigen::VectorXd::Constant(1, 0.5), 100,
                                   1000 + rep);
      const Dataset data = generate(sc);
      const FitResult res = fit(data);
      REQUIRE(res.min_sweep_delta() >= -1e-8);
    }
  }
}

TEST_CASE("fit on the breast cosmesis data") {
  const Dataset data = read_dataset_csv(ADDRISK_BCOS_CSV);
  REQUIRE(data.size() == 94);
  const Design d = Design::build(data, kTimeIndep);

  SECTION("first sweep strictly increases the log-likelihood") {
    SolverConfig cfg;
    const ModelParams init = default_init(d, cfg);
    const double ell0 = loglik_components(d, init).total;
    const SweepResult sw = sweep(init, cfg, d);
    CHECK(sw.loglik > ell0);
  }

  SECTION("defaults reproduce the published estimate") {
    const FitResult res = mm_fit(d);
    REQUIRE(res.converged);
    CHECK_THAT(res.params.beta[0], WithinAbs(0.03136608, 1e-4));
    CHECK(res.min_sweep_delta() >= -1e-8);
  }

  SECTION("fit is deterministic") {
    const FitResult a = mm_fit(d);
    const FitResult b = mm_fit(d);
    CHECK(a.params.beta == b.params.beta);
    CHECK(a.params.eta == b.params.eta);
    CHECK(a.loglik == b.loglik);
  }
}

TEST_CASE("covariate-free NPMLE against a grid-search oracle") {
  // 3 left-censored at t=1, 2 interval (1,2], 2 right-censored at 2:
  // ell(l1,l2) = 3 log(1-e^{-l1}) - 2 l1 + 2 log(1-e^{-l2}) - 2(l1+l2)
  Dataset data;
  for (int i = 0; i < 3; ++i) {
    Observation o;
    o.kind = Censoring::left;
    o.left = 0.0;
    o.right = 1.0;
    o.x = Eigen::VectorXd::Zero(1);
    data.push_back(o);
  }
  for (int i = 0; i < 2; ++i) {
    Observation o;
    o.kind = Censoring::interval;
    o.left = 1.0;
    o.right = 2.0;
    o.x = Eigen::VectorXd::Zero(1);
    data.push_back(o);
  }
  for (int i = 0; i < 2; ++i) {
    Observation o;
    o.kind = Censoring::right;
    o.left = 2.0;
    o.right = kInf;
    o.x = Eigen::VectorXd::Zero(1);
    data.push_back(o);
  }
  const Design d = Design::build(data, kTimeIndep);

  auto ell = [&](double l1, double l2) {
    ModelParams s;
    s.eta = Eigen::VectorXd(2);
    s.eta << std::log(l1), std::log(l2);
    s.beta = Eigen::VectorXd::Zero(1);
    return loglik_components(d, s).total;
  };

  // coarse-to-fine 2-D grid search
  double best1 = 0.1, best2 = 0.1, width = 2.0;
  for (int level = 0; level < 8; ++level) {
    double arg1 = best1, arg2 = best2, best = -1e300;
    for (double l1 = std::max(1e-4, best1 - width); l1 <= best1 + width; l1 += width / 40.0)
      for (double l2 = std::max(1e-4, best2 - width); l2 <= best2 + width; l2 += width / 40.0) {
        const double v = ell(l1, l2);
        if (v > best) {
          best = v;
          arg1 = l1;
          arg2 = l2;
        }
      }
    best1 = arg1;
    best2 = arg2;
    width /= 10.0;
  }

  SolverConfig cfg;
  cfg.freeze_beta = true;
  cfg.init_beta = Eigen::VectorXd::Zero(1);
  cfg.tol = 1e-9;
  cfg.max_iter = 10000;
  const FitResult res = mm_fit(d, cfg);
  REQUIRE(res.converged);
  const Eigen::VectorXd lambda = res.params.lambda();
  CHECK_THAT(lambda[0], WithinAbs(best1, 1e-4));
  CHECK_THAT(lambda[1], WithinAbs(best2, 1e-4));
  // stationarity: A1(l1) = 4/3 and A1(l2) = 1 in closed form
  CHECK_THAT(lambda[0], WithinAbs(std::log(1.75), 1e-6));
  CHECK_THAT(lambda[1], WithinAbs(std::log(2.0), 1e-6));
}

TEST_CASE("fit error handling") {
  SECTION("all right-censored data is degenerate") {
    Dataset data;
    for (int i = 0; i < 5; ++i) {
      Observation o;
      o.kind = Censoring::right;
      o.left = 1.0 + i;
      o.right = kInf;
      o.x = Eigen::VectorXd::Zero(1);
      data.push_back(o);
    }
    CHECK_THROWS_AS(fit(data), std::invalid_argument);
  }

  SECTION("max_iter exhaustion flags non-convergence") {
    std::mt19937_64 rng(8);
    const Dataset data = test_support::random_dataset(rng, 30, 1);
    SolverConfig cfg;
    cfg.max_iter = 2;
    const FitResult res = fit(data, cfg);
    CHECK_FALSE(res.converged);
    CHECK(res.n_iter == 2);
  }
}

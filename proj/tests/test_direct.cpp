#include "addrisk/direct.hpp"

#include "addrisk/data_io.hpp"

#include "support.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace addrisk;
using Catch::Matchers::WithinAbs;

namespace {
const CovariateProcess kTimeIndep = CovariateProcess::time_independent();
}

TEST_CASE("direct objective gradient matches finite differences") {
  std::mt19937_64 rng(707);
  const Dataset data = test_support::random_dataset(rng, 20, 2);
  const Design d = Design::build(data, kTimeIndep);
  const ModelParams state = test_support::random_params(rng, d.grid.m(), 2);

  Eigen::VectorXd theta(d.grid.m() + 2);
  theta.head(d.grid.m()) = state.eta;
  theta.tail(2) = state.beta;

  const Eigen::VectorXd grad = detail::direct_gradient(d, theta);
  for (int j = 0; j < theta.size(); ++j) {
    const double h = 1e-6 * (1.0 + std::abs(theta[j]));
    Eigen::VectorXd up = theta, dn = theta;
    up[j] += h;
    dn[j] -= h;
    const double fd = (detail::direct_objective(d, up) - detail::direct_objective(d, dn)) / (2.0 * h);
    REQUIRE_THAT(grad[j], WithinAbs(fd, 1e-5 * std::max(1.0, std::abs(fd))));
  }
}

TEST_CASE("direct fit matches the covariate-free stationary point") {
  Dataset data;
  auto add = [&](Censoring kind, double a, double b, int copies) {
    for (int i = 0; i < copies; ++i) {
      Observation o;
      o.kind = kind;
      o.left = a;
      o.right = b;
      o.x = Eigen::VectorXd::Zero(1);
      data.push_back(o);
    }
  };
  add(Censoring::left, 0.0, 1.0, 3);
  add(Censoring::interval, 1.0, 2.0, 2);
  add(Censoring::right, 2.0, kInf, 2);

  const FitResult res = direct_fit(data);
  REQUIRE(res.converged);
  // closed-form stationary point: lambda = (log 7/4, log 2)
  CHECK_THAT(std::exp(res.params.eta[0]), WithinAbs(std::log(1.75), 1e-5));
  CHECK_THAT(std::exp(res.params.eta[1]), WithinAbs(std::log(2.0), 1e-5));
}

TEST_CASE("MM and direct optimizers agree") {
  SolverConfig mm_tight;
  mm_tight.tol = 1e-7;
  mm_tight.max_iter = 100000;
  DirectConfig bfgs_tight;
  bfgs_tight.grad_tol = 1e-9;

  SECTION("on the breast cosmesis data") {
    const Dataset data = read_dataset_csv(ADDRISK_BCOS_CSV);
    const Design d = Design::build(data, kTimeIndep);
    const FitResult mm = mm_fit(d, mm_tight);
    const FitResult direct = direct_fit(d, bfgs_tight);
    REQUIRE(mm.converged);
    CHECK(std::abs(mm.params.beta[0] - direct.params.beta[0]) < 1e-3);
    CHECK(std::abs(mm.loglik - direct.loglik) < 1e-4);
  }

  SECTION("on simulated data") {
    for (int rep = 0; rep < 3; ++rep) {
      const Scenario sc =
          Scenario::make(ScenarioKind::const_hazard, Eigen::VectorXd::Constant(1, 0.5), 60, 500 + rep);
      const Dataset data = generate(sc);
      const Design d = Design::build(data, kTimeIndep);
      const FitResult mm = mm_fit(d, mm_tight);
      const FitResult direct = direct_fit(d, bfgs_tight);
      CHECK(std::abs(mm.params.beta[0] - direct.params.beta[0]) < 1e-3);
      CHECK(std::abs(mm.loglik - direct.loglik) < 1e-4);
    }
  }
}

TEST_CASE("direct standard errors are finite and positive") {
  const Dataset data = read_dataset_csv(ADDRISK_BCOS_CSV);
  const Design d = Design::build(data, kTimeIndep);
  const FitResult direct = direct_fit(d);
  const Eigen::VectorXd se = direct_se(d, direct.params);
  REQUIRE(se.size() == 1);
  CHECK(se[0] > 0.0);
  CHECK(se[0] < 1.0);
}

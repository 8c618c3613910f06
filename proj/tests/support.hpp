#pragma once

#include "addrisk/addrisk.hpp"

#include <random>
#include <vector>

namespace test_support {

using addrisk::Censoring;
using addrisk::Dataset;
using addrisk::ModelParams;
using addrisk::Observation;

// Small random mixed-censoring dataset with nonnegative covariates. Endpoints
// are drawn from a coarse lattice so ties across subjects actually occur.
inline Dataset random_dataset(std::mt19937_64& rng, int n, int p, bool lattice_times = true) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto draw_time = [&](double lo, double hi) {
    const double t = lo + (hi - lo) * unif(rng);
    if (!lattice_times) return t;
    return std::max(lo * 0.5 + 0.05, std::round(t * 8.0) / 8.0);
  };

  Dataset data;
  data.reserve(n);
  for (int i = 0; i < n; ++i) {
    Observation o;
    o.x.resize(p);
    for (int j = 0; j < p; ++j) o.x[j] = unif(rng) < 0.5 ? 0.0 : std::round(unif(rng) * 4.0) / 2.0;
    const double roll = unif(rng);
    if (roll < 0.3) {
      o.kind = Censoring::left;
      o.left = 0.0;
      o.right = draw_time(0.2, 2.0);
    } else if (roll < 0.7) {
      o.kind = Censoring::interval;
      o.left = draw_time(0.2, 2.0);
      o.right = o.left + draw_time(0.25, 2.0);
    } else {
      o.kind = Censoring::right;
      o.left = draw_time(0.2, 3.5);
      o.right = addrisk::kInf;
    }
    data.push_back(std::move(o));
  }
  // Guarantee at least one non-right-censored subject so fits are defined.
  if (!data.empty()) {
    bool any = false;
    for (const Observation& o : data) any = any || o.kind != Censoring::right;
    if (!any) {
      data.front().kind = Censoring::left;
      data.front().right = data.front().left;
      data.front().left = 0.0;
    }
  }
  return data;
}

// Random parameter state inside the validity region (positive beta keeps the
// covariate inner products used as denominators positive).
inline ModelParams random_params(std::mt19937_64& rng, int m, int p) {
  std::uniform_real_distribution<double> eta_d(-3.0, 0.0);
  std::uniform_real_distribution<double> beta_d(0.05, 1.0);
  ModelParams s;
  s.eta.resize(m);
  s.beta.resize(p);
  for (int k = 0; k < m; ++k) s.eta[k] = eta_d(rng);
  for (int j = 0; j < p; ++j) s.beta[j] = beta_d(rng);
  return s;
}

}  // namespace test_support

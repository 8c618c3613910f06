#pragma once

// Maximum-likelihood estimation of the semiparametric additive risks model
// for case-II interval-censored data: gradient-MM solver, profile-likelihood
// and bootstrap inference, data simulation and a direct-optimizer baseline.

#include "addrisk/bootstrap.hpp"
#include "addrisk/data_io.hpp"
#include "addrisk/direct.hpp"
#include "addrisk/grid.hpp"
#include "addrisk/inference.hpp"
#include "addrisk/likelihood.hpp"
#include "addrisk/mm_solver.hpp"
#include "addrisk/parallel.hpp"
#include "addrisk/simulate.hpp"
#include "addrisk/types.hpp"

namespace addrisk {
inline constexpr const char* kVersion = "0.1.0";
}

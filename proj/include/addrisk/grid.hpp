#pragma once

#include "addrisk/types.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

namespace addrisk {

/**
 * Sorted unique finite inspection times t_1 < ... < t_m together with, for
 * each observation, the prefix counts that encode its index masks:
 *
 *   count_le_l[i] = #{k : t_k <= L_i}   (L_i is the observation's l_point)
 *   count_le_r[i] = #{k : t_k <= R_i}   (R_i is the observation's r_point)
 *
 * A count of -1 marks a side that does not exist for the censoring type.
 * Grid membership and the masks use exact floating-point comparison; tied
 * endpoints across subjects collapse to one grid time.
 */
struct InspectionGrid {
  std::vector<double> times;
  std::vector<int> count_le_l;
  std::vector<int> count_le_r;

  int m() const { return static_cast<int>(times.size()); }

  int count_le(double t) const {
    return static_cast<int>(std::upper_bound(times.begin(), times.end(), t) - times.begin());
  }
};

inline InspectionGrid build_grid(const Dataset& data) {
  if (data.empty()) throw std::invalid_argument("build_grid: empty dataset");

  std::vector<double> pts;
  pts.reserve(2 * data.size());
  for (const Observation& o : data) {
    switch (o.kind) {
      case Censoring::left:
        pts.push_back(o.l_point());
        break;
      case Censoring::interval:
        pts.push_back(o.l_point());
        pts.push_back(o.r_point());
        break;
      case Censoring::right:
        pts.push_back(o.r_point());
        break;
    }
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.empty()) throw std::invalid_argument("build_grid: no finite inspection endpoint");

  InspectionGrid grid;
  grid.times = std::move(pts);
  grid.count_le_l.resize(data.size(), -1);
  grid.count_le_r.resize(data.size(), -1);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Observation& o = data[i];
    if (!o.is_right()) grid.count_le_l[i] = grid.count_le(o.l_point());
    if (!o.is_left()) grid.count_le_r[i] = grid.count_le(o.r_point());
  }
  return grid;
}

// Lambda(t) = sum of exp(eta_k) over grid points t_k <= t; zero below t_1.
inline double cumulative_hazard(const InspectionGrid& grid, const Eigen::VectorXd& eta, double t) {
  if (t < 0.0) throw std::invalid_argument("cumulative_hazard: negative time");
  const int c = grid.count_le(t);
  double sum = 0.0;
  for (int k = 0; k < c; ++k) sum += std::exp(eta[k]);
  return sum;
}

// S(t; x) = exp(-(Lambda(t) + beta' Z_x(t))).
inline double survival(const InspectionGrid& grid, const ModelParams& params,
                       const CovariateProcess& process, const Eigen::VectorXd& x, double t) {
  const double total = cumulative_hazard(grid, params.eta, t) + params.beta.dot(process.cumulative(x, t));
  if (total < 0.0)
    throw std::domain_error("survival: negative cumulative hazard Lambda(t) + beta'Z(t) = " + std::to_string(total));
  return std::exp(-total);
}

}  // namespace addrisk

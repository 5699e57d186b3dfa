#pragma once

#include <vector>

#include "curvebind/tensor.hpp"

namespace curvebind {

// Exact discrete optimal transport (transportation problem).
//
// Minimizes sum_ij f_ij * cost(i,j) subject to row sums = supply, column
// sums = demand, f >= 0. Solved as min-cost flow by successive shortest
// augmenting paths in the residual graph; each path is found with a
// label-correcting search, so intermediate reverse arcs with negative cost
// are handled exactly. Deterministic: ties break on the lowest node index.
//
// Throws NumericError when |sum(supply) - sum(demand)| > 1e-9 or when the
// solve exceeds its iteration guard.
double solve_transport(const std::vector<double>& supply, const std::vector<double>& demand,
                       const Tensor& cost);

// As above, but also returns the optimal plan (rows = supply points).
double solve_transport_plan(const std::vector<double>& supply, const std::vector<double>& demand,
                            const Tensor& cost, Tensor& plan);

} // namespace curvebind

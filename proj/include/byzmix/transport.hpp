#pragma once

#include <span>

#include "byzmix/divergences.hpp"

namespace byzmix {

struct TransportPlan {
  Matrix plan;
  double cost = 0.0;
};

/// Exact solution of the balanced transportation problem
///   min <pi, C>  s.t.  pi 1 = source, pi^T 1 = target, pi >= 0
/// by the transportation simplex: north-west-corner start, MODI potentials,
/// Bland's rule. Degenerate bases are avoided by perturbing the marginals;
/// the reported plan is recomputed on the optimal basis with the exact
/// marginals. Both marginals must sum to 1 within 1e-9; at most 64 x 64.
[[nodiscard]] TransportPlan solve_transport(std::span<const double> source, std::span<const double> target,
                                            const Matrix& costs);
[[nodiscard]] TransportPlan solve_transport(std::span<const double> source, std::span<const double> target,
                                            const CostMatrix& costs);

}  // namespace byzmix

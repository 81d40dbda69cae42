#pragma once

#include <vector>

#include "byzmix/mixture.hpp"
#include "byzmix/transport.hpp"

namespace byzmix {

/// Symmetric PSD square root by eigendecomposition, eigenvalues clamped at 0.
[[nodiscard]] Matrix psd_sqrt(const Matrix& sym);

/// ||mu_a - mu_b||_2 + ||Sigma_a^{1/2} - Sigma_b^{1/2}||_F.
[[nodiscard]] double d1_gaussian(const GaussianComponent& a, const GaussianComponent& b);
/// |r_a - r_b| + |s_a - s_b|.
[[nodiscard]] double d1_gamma(const GammaComponent& a, const GammaComponent& b);
[[nodiscard]] double d1(const Component& a, const Component& b);

/// Transportation distance between mixing distributions with ground cost d1.
[[nodiscard]] double w1(const MixingDistribution& g, const MixingDistribution& h);

/// argmax_k w_k f(x; theta_k) per row; ties go to the lowest index.
[[nodiscard]] std::vector<int> cluster_assign(const MixingDistribution& g, const Dataset& data);

/// Adjusted Rand index. Pair counts are accumulated in exact integer
/// arithmetic; returns 1 when the denominator vanishes.
[[nodiscard]] double ari(const std::vector<int>& a, const std::vector<int>& b);

struct OverlapEstimate {
  double max_omega = 0.0;
  double std_error = 0.0;
  int pair_i = 0;
  int pair_j = 1;
};

/// Monte-Carlo estimate of max_{i<j} (o_{j|i} + o_{i|j}) with
/// o_{j|i} = P(w_i f_i(X) < w_j f_j(X) | X ~ f_i), n_mc draws per component.
/// Ties in the strict inequality count as no overlap, so identical
/// equal-weight components report 0.
[[nodiscard]] OverlapEstimate max_omega(const MixingDistribution& g, int n_mc, Rng& rng);

}  // namespace byzmix

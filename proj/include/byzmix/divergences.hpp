#pragma once

// Distances and divergences between mixture components and mixtures.

#include <span>
#include <utility>
#include <vector>

#include "byzmix/mixture.hpp"

namespace byzmix {

enum class CostKind { KL, SquaredEuclidean, L2CrossIntegral };

std::string_view cost_kind_name(CostKind kind) noexcept;

/// \int phi(x; a) phi(x; b) dx = phi(mu_a; mu_b, Sigma_a + Sigma_b).
[[nodiscard]] double l2_cross_integral(const GaussianComponent& a, const GaussianComponent& b);
/// Closed form for two Gamma densities; requires r_a + r_b > 1.
[[nodiscard]] double l2_cross_integral(const GammaComponent& a, const GammaComponent& b);
[[nodiscard]] double l2_cross_integral(const Component& a, const Component& b);

/// L2 distance between the two mixture densities, sqrt(\int (f_G - f_G')^2).
[[nodiscard]] double l2_distance(const MixingDistribution& g, const MixingDistribution& h);

/// KL(from || to) for Gaussians.
[[nodiscard]] double kl_gaussian(const GaussianComponent& from, const GaussianComponent& to);

/// Squared Euclidean distance between component parameter vectors
/// (see component_params).
[[nodiscard]] double squared_euclidean(const Component& a, const Component& b);

/// c(a, b) for the chosen kind. KL is only defined for Gaussians.
[[nodiscard]] double cost(CostKind kind, const Component& a, const Component& b);

struct CostMatrix {
  Matrix entries;
  CostKind kind = CostKind::KL;
};

[[nodiscard]] CostMatrix cost_matrix(CostKind kind, std::span<const Component> rows,
                                     std::span<const Component> cols);

/// A pooled atom: mass and component.
struct Atom {
  double mass = 0.0;
  Component component;
};

/// Reduced composite transportation divergence: every source atom sends its
/// full mass to the nearest target component, sum_g w_g min_j c(theta_g, theta_j).
[[nodiscard]] double ctd(std::span<const Atom> source, const MixingDistribution& target, CostKind kind);

}  // namespace byzmix

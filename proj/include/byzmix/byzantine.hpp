#pragma once

// Byzantine failure model: a random minority of machines replace their local
// estimate by a corrupted one. Corruptions draw only from the failure RNG and
// never look at the authentic values they overwrite (beyond keeping the
// untouched fields).

#include <string_view>
#include <vector>

#include "byzmix/mixture.hpp"

namespace byzmix {

enum class FailureKind { Mean, Covariance, Weight, Shape, Scale };

std::string_view failure_name(FailureKind kind) noexcept;
FailureKind parse_failure(std::string_view name);
/// Whether the corruption applies to mixtures of `family`.
bool failure_applies(FailureKind kind, Family family) noexcept;

/// floor(alpha * m) distinct indices drawn uniformly, sorted ascending.
/// Rejects sets holding half of the machines or more.
[[nodiscard]] std::vector<int> select_failure_set(int m, double alpha, Rng& rng);

/// Component means replaced by iid N(0, 100^2) vectors.
[[nodiscard]] MixingDistribution inject_mean_failure(const MixingDistribution& g, Rng& rng);
/// Each covariance gets its own d^{-2} sum_{i<=d} xi_i xi_i^T added.
[[nodiscard]] MixingDistribution inject_cov_failure(const MixingDistribution& g, Rng& rng);
/// Weights replaced by a Dirichlet draw whose parameters are iid uniform
/// integers in [10, 20].
[[nodiscard]] MixingDistribution inject_weight_failure(const MixingDistribution& g, Rng& rng);
/// Shape: every shape replaced by U(1, 10). Scale: every scale increased by U(0, 10).
[[nodiscard]] MixingDistribution inject_gamma_failure(const MixingDistribution& g, FailureKind kind, Rng& rng);

/// Dispatch on `kind`.
[[nodiscard]] MixingDistribution inject_failure(const MixingDistribution& g, FailureKind kind, Rng& rng);

/// Dirichlet(alpha) draw via normalised Gamma variates.
[[nodiscard]] std::vector<double> sample_dirichlet(const std::vector<double>& concentration, Rng& rng);

}  // namespace byzmix

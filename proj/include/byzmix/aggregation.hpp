#pragma once

// Server-side aggregation of local mixture estimates: the centre-of-attention
// (COAT) selection, distance filtering, mixture reduction by an MM algorithm
// on the composite transportation divergence, and the trimmed-barycentre
// (TRIM) baseline.

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "byzmix/divergences.hpp"
#include "byzmix/mixture.hpp"

namespace byzmix {

/// Passing this as rho disables filtering.
inline constexpr double kRhoUnbounded = std::numeric_limits<double>::infinity();

struct LocalEstimateSet {
  std::vector<MixingDistribution> estimates;
  /// Machine weights lambda_i; uniform when empty.
  std::vector<double> machine_weights;
  /// Ground-truth failure flags. Diagnostics only; no estimator reads this.
  std::optional<std::vector<bool>> failure_mask;

  [[nodiscard]] int size() const noexcept { return static_cast<int>(estimates.size()); }
  [[nodiscard]] double lambda(int i) const;
  void validate() const;
};

struct CoatResult {
  int index = 0;
  double radius = 0.0;
  Matrix distances;
  std::vector<double> medians;
};

/// Symmetric m x m matrix of L2 distances with an exactly zero diagonal.
[[nodiscard]] Matrix pairwise_distances(const LocalEstimateSet& set);

/// Row statistic: the ceil(m/2)-th smallest entry of each row, self-distance
/// included, so the closed ball of that radius holds at least half of the
/// estimates. The COAT is the row with the smallest statistic (lowest index
/// on ties).
[[nodiscard]] CoatResult coat_from_distances(Matrix distances);
[[nodiscard]] CoatResult coat(const LocalEstimateSet& set);

/// Indices i with D(COAT, G_i) <= rho * radius, ascending.
[[nodiscard]] std::vector<int> filter(const CoatResult& coat, double rho);

/// Moment-matching barycentre: argmin_theta sum_g mass_g KL(f_g || f_theta).
[[nodiscard]] GaussianComponent kl_barycentre(std::span<const Atom> items);
/// Barycentre under the given cost. Squared Euclidean gives the weighted mean
/// of the parameter vectors.
[[nodiscard]] Component barycentre(CostKind kind, std::span<const Atom> items);

/// KL for Gaussians, squared Euclidean on (shape, scale) for Gamma.
[[nodiscard]] CostKind default_cost(Family family) noexcept;

struct ReduceConfig {
  CostKind cost = CostKind::KL;
  double tol = 1e-9;
  int max_iters = 1000;
  /// Total number of runs; runs after the first start from K random distinct
  /// pooled atoms. The lowest objective wins.
  int restarts = 1;
  std::uint64_t seed = 0;
};

struct Reduction {
  MixingDistribution estimate;
  int iterations = 0;
  double objective = 0.0;
  bool converged = false;
  /// Objective at the initial value and after every iteration.
  std::vector<double> trace;
};

/// Atoms of the selected estimates with masses lambda_i / sum_S lambda * w_ik.
[[nodiscard]] std::vector<Atom> pool(const LocalEstimateSet& set, std::span<const int> indices);

/// MM (k-means style) minimisation of the reduced composite transportation
/// divergence from the pooled atoms to a K-component mixture.
[[nodiscard]] Reduction mm_reduce(std::span<const Atom> pooled, int K, const MixingDistribution& init,
                                  const ReduceConfig& cfg);

struct DfmrResult {
  Reduction reduction;
  CoatResult coat;
  std::vector<int> selected;
};

/// COAT, then filter at rho, then reduce the selected estimates starting
/// from the COAT estimate.
[[nodiscard]] DfmrResult dfmr(const LocalEstimateSet& set, double rho, int K, const ReduceConfig& cfg);

/// Trimmed masses for losses sorted ascending: keep total mass 1 - eta,
/// splitting the boundary atom. Returned in the original atom order.
[[nodiscard]] std::vector<double> trim_masses(std::span<const double> losses, std::span<const double> masses,
                                              double eta);

/// Trimmed k-barycentre over all pooled atoms.
[[nodiscard]] Reduction trim(const LocalEstimateSet& set, double eta, int K, const MixingDistribution& init,
                             const ReduceConfig& cfg);

}  // namespace byzmix

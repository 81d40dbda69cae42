#pragma once

// Penalised maximum-likelihood fitting of finite mixtures by EM.
//
// Gaussian penalty per component: tr(Sigma^{-1} S_x) + log det Sigma, with S_x
// the (1/n) sample covariance of the local data. Gamma penalty per component:
// r - log r. Both are scaled by the penalty strength a_n (default n^{-1/2}).

#include <optional>
#include <vector>

#include "byzmix/mixture.hpp"

namespace byzmix {

struct EmConfig {
  int max_iters = 1000;
  /// Stop when the per-observation penalised log-likelihood changes by less.
  double tol = 1e-6;
  /// a_n; n^{-1/2} when unset.
  std::optional<double> penalty;

  void validate() const;
  [[nodiscard]] double penalty_for(int n) const;
};

struct EmResult {
  MixingDistribution estimate;
  int iterations = 0;
  double penalized_loglik = 0.0;
  bool converged = false;
  /// Penalised log-likelihood at the initial value and after every iteration.
  std::vector<double> trace;
};

/// Posterior membership probabilities, n x K, computed in log space.
/// Throws NumericalError naming the row whose total density underflows.
[[nodiscard]] Matrix responsibilities(const MixingDistribution& g, const Dataset& data);

/// Sample covariance of the rows with divisor n.
[[nodiscard]] Matrix sample_covariance(const DataMatrix& x);

/// Penalised log-likelihood of G on `data` with strength `a`.
[[nodiscard]] double penalized_loglik(const MixingDistribution& g, const Dataset& data, double a);

[[nodiscard]] EmResult fit_gaussian(const Dataset& data, int K, const MixingDistribution& init,
                                    const EmConfig& cfg = {});
[[nodiscard]] EmResult fit_gamma(const Dataset& data, int K, const MixingDistribution& init,
                                 const EmConfig& cfg = {});
/// Dispatches on the family of `init`.
[[nodiscard]] EmResult fit(const Dataset& data, int K, const MixingDistribution& init,
                           const EmConfig& cfg = {});

/// Shape range searched by the Gamma M-step.
inline constexpr double kGammaShapeMin = 0.5 + 1e-6;
inline constexpr double kGammaShapeMax = 1e3;

/// Gamma M-step for one component from its weighted sufficient statistics
/// (sum of weights, sum of w*x, sum of w*log x). Maximises the penalised
/// weighted log-likelihood with the scale profiled out; Newton on the shape
/// with bisection fallback inside [kGammaShapeMin, kGammaShapeMax].
[[nodiscard]] GammaComponent gamma_mstep(double sum_w, double sum_wx, double sum_wlogx, double a,
                                         double shape_start);

/// k-means++ seeding followed by one hard-assignment M-step.
[[nodiscard]] MixingDistribution kmeanspp_init(const Dataset& data, int K, Family family,
                                               const EmConfig& cfg, Rng& rng);

}  // namespace byzmix

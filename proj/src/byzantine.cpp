#include "byzmix/byzantine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace byzmix {

std::string_view failure_name(FailureKind kind) noexcept {
  switch (kind) {
    case FailureKind::Mean: return "mean";
    case FailureKind::Covariance: return "cov";
    case FailureKind::Weight: return "weight";
    case FailureKind::Shape: return "shape";
    case FailureKind::Scale: return "scale";
  }
  return "?";
}

FailureKind parse_failure(std::string_view name) {
  for (auto k : {FailureKind::Mean, FailureKind::Covariance, FailureKind::Weight, FailureKind::Shape, FailureKind::Scale})
    if (failure_name(k) == name) return k;
  throw std::invalid_argument("unknown failure kind '" + std::string(name) + "'");
}

bool failure_applies(FailureKind kind, Family family) noexcept {
  switch (kind) {
    case FailureKind::Mean:
    case FailureKind::Covariance: return family == Family::Gaussian;
    case FailureKind::Shape:
    case FailureKind::Scale: return family == Family::Gamma;
    case FailureKind::Weight: return true;
  }
  return false;
}

std::vector<int> select_failure_set(int m, double alpha, Rng& rng) {
  if (m < 1) throw std::invalid_argument("select_failure_set: m must be >= 1");
  if (!(alpha >= 0.0 && alpha < 0.5)) throw std::invalid_argument("failure rate alpha must lie in [0, 0.5)");
  const int count = static_cast<int>(std::floor(alpha * m + 1e-9));
  if (2 * count >= m && count > 0) throw std::invalid_argument("failure set would contain half of the machines or more");
  std::vector<int> idx(static_cast<std::size_t>(m));
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(static_cast<std::size_t>(count));
  std::sort(idx.begin(), idx.end());
  return idx;
}

MixingDistribution inject_mean_failure(const MixingDistribution& g, Rng& rng) {
  if (g.family() != Family::Gaussian) throw std::invalid_argument("mean failure needs a Gaussian mixture");
  std::normal_distribution<double> noise(0.0, 100.0);
  std::vector<Component> comps;
  for (int k = 0; k < g.order(); ++k) {
    Vector mean(g.dim());
    for (int j = 0; j < g.dim(); ++j) mean[j] = noise(rng);
    comps.emplace_back(GaussianComponent(std::move(mean), g.gaussian(k).covariance()));
  }
  return {g.weights(), std::move(comps)};
}

MixingDistribution inject_cov_failure(const MixingDistribution& g, Rng& rng) {
  if (g.family() != Family::Gaussian) throw std::invalid_argument("covariance failure needs a Gaussian mixture");
  std::normal_distribution<double> normal(0.0, 1.0);
  const int d = g.dim();
  std::vector<Component> comps;
  for (int k = 0; k < g.order(); ++k) {
    Matrix xi(d, d);
    for (int c = 0; c < d; ++c)
      for (int r = 0; r < d; ++r) xi(r, c) = normal(rng);
    const Matrix noise = (xi * xi.transpose()) / static_cast<double>(d * d);
    comps.emplace_back(GaussianComponent(g.gaussian(k).mean(), g.gaussian(k).covariance() + noise));
  }
  return {g.weights(), std::move(comps)};
}

std::vector<double> sample_dirichlet(const std::vector<double>& concentration, Rng& rng) {
  std::vector<double> w;
  double total = 0.0;
  for (double a : concentration) {
    std::gamma_distribution<double> draw(a, 1.0);
    w.push_back(draw(rng));
    total += w.back();
  }
  for (auto& x : w) x /= total;
  return w;
}

MixingDistribution inject_weight_failure(const MixingDistribution& g, Rng& rng) {
  std::uniform_int_distribution<int> level(10, 20);
  std::vector<double> conc;
  for (int k = 0; k < g.order(); ++k) conc.push_back(level(rng));
  return g.with_weights(sample_dirichlet(conc, rng));
}

MixingDistribution inject_gamma_failure(const MixingDistribution& g, FailureKind kind, Rng& rng) {
  if (g.family() != Family::Gamma) throw std::invalid_argument("shape/scale failure needs a Gamma mixture");
  if (kind != FailureKind::Shape && kind != FailureKind::Scale)
    throw std::invalid_argument("inject_gamma_failure: kind must be shape or scale");
  std::vector<Component> comps;
  for (int k = 0; k < g.order(); ++k) {
    const auto& c = g.gamma(k);
    if (kind == FailureKind::Shape) {
      std::uniform_real_distribution<double> shape(1.0, 10.0);
      comps.emplace_back(GammaComponent(shape(rng), c.scale()));
    } else {
      std::uniform_real_distribution<double> bump(0.0, 10.0);
      comps.emplace_back(GammaComponent(c.shape(), c.scale() + bump(rng)));
    }
  }
  return {g.weights(), std::move(comps)};
}

MixingDistribution inject_failure(const MixingDistribution& g, FailureKind kind, Rng& rng) {
  switch (kind) {
    case FailureKind::Mean: return inject_mean_failure(g, rng);
    case FailureKind::Covariance: return inject_cov_failure(g, rng);
    case FailureKind::Weight: return inject_weight_failure(g, rng);
    case FailureKind::Shape:
    case FailureKind::Scale: return inject_gamma_failure(g, kind, rng);
  }
  throw std::invalid_argument("unknown failure kind");
}

}  // namespace byzmix

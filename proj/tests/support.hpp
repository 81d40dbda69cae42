#pragma once

// Shared fixtures for the unit and acceptance tests: random mixtures and
// quadrature oracles that do not go through the library's closed forms.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/LU>
#include <Eigen/QR>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "byzmix/mixture.hpp"

namespace byzmix::testing {

inline double normal_pdf(double x, double mu, double var) {
  return std::exp(-0.5 * (x - mu) * (x - mu) / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

inline double gamma_pdf(double x, double shape, double scale) {
  if (x <= 0.0) return 0.0;
  return std::exp((shape - 1.0) * std::log(x) - x / scale - shape * std::log(scale) - std::lgamma(shape));
}

/// One-dimensional mixture density assembled from the helpers above.
inline double mixture_pdf(const MixingDistribution& g, double x) {
  double total = 0.0;
  for (int k = 0; k < g.order(); ++k) {
    const auto& c = g.components()[static_cast<std::size_t>(k)];
    if (const auto* n = std::get_if<GaussianComponent>(&c))
      total += g.weight(k) * normal_pdf(x, n->mean()(0), n->covariance()(0, 0));
    else
      total += g.weight(k) * gamma_pdf(x, std::get<GammaComponent>(c).shape(), std::get<GammaComponent>(c).scale());
  }
  return total;
}

/// Adaptive Gauss-Kronrod integral of f over [a, b], split at `cuts` to keep
/// narrow peaks inside a single panel.
template <class F>
double integrate(F f, double a, double b, std::vector<double> cuts = {}) {
  cuts.insert(cuts.begin(), a);
  cuts.push_back(b);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (!(cuts[i + 1] > cuts[i])) continue;
    total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, cuts[i], cuts[i + 1], 15, 1e-13);
  }
  return total;
}

/// Integral over the positive half line using a log substitution x = e^t.
/// Products of Gamma densities with total shape near 1 decay only like
/// e^{0.2 t} as t -> -inf, hence the deep lower limit.
template <class F>
double integrate_positive(F f, double t_lo = -250.0, double t_hi = 12.0) {
  auto g = [&](double t) {
    const double x = std::exp(t);
    return f(x) * x;
  };
  std::vector<double> cuts;
  for (double t = std::max(t_lo, -40.0) + 2.0; t < t_hi; t += 2.0) cuts.push_back(t);
  return integrate(g, t_lo, t_hi, cuts);
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline std::vector<double> random_simplex(int K, Rng& rng) {
  std::vector<double> w(static_cast<std::size_t>(K));
  double s = 0.0;
  for (auto& x : w) s += (x = uniform(rng, 0.1, 1.0));
  for (auto& x : w) x /= s;
  return w;
}

inline Matrix random_spd(int d, Rng& rng, double lo = 0.3, double hi = 3.0) {
  std::normal_distribution<double> z;
  Matrix a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = z(rng);
  Eigen::HouseholderQR<Matrix> qr(a);
  const Matrix q = qr.householderQ();
  Vector eig(d);
  for (int i = 0; i < d; ++i) eig(i) = uniform(rng, lo, hi);
  Matrix s = q * eig.asDiagonal() * q.transpose();
  return 0.5 * (s + s.transpose());
}

inline GaussianComponent random_gaussian(int d, Rng& rng, double box = 3.0) {
  Vector mu(d);
  for (int i = 0; i < d; ++i) mu(i) = uniform(rng, -box, box);
  return GaussianComponent(mu, random_spd(d, rng));
}

inline GammaComponent random_gamma(Rng& rng) {
  return GammaComponent(uniform(rng, 0.6, 12.0), uniform(rng, 0.2, 5.0));
}

inline MixingDistribution random_gaussian_mixture(int K, int d, Rng& rng, double box = 3.0) {
  std::vector<GaussianComponent> comps;
  for (int k = 0; k < K; ++k) comps.push_back(random_gaussian(d, rng, box));
  return MixingDistribution(random_simplex(K, rng), comps);
}

inline MixingDistribution random_gamma_mixture(int K, Rng& rng) {
  std::vector<GammaComponent> comps;
  for (int k = 0; k < K; ++k) comps.push_back(random_gamma(rng));
  return MixingDistribution(random_simplex(K, rng), comps);
}

// Minimum over all basic feasible solutions: every choice of K + L - 1 cells
// whose equality system has a unique nonnegative solution.
inline double vertex_enumeration(const std::vector<double>& a, const std::vector<double>& b, const Matrix& c) {
  const int K = static_cast<int>(a.size());
  const int L = static_cast<int>(b.size());
  const int cells = K * L;
  const int basis = K + L - 1;
  Matrix eq(K + L, cells);
  eq.setZero();
  Vector rhs(K + L);
  for (int i = 0; i < K; ++i) rhs(i) = a[static_cast<std::size_t>(i)];
  for (int j = 0; j < L; ++j) rhs(K + j) = b[static_cast<std::size_t>(j)];
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < L; ++j) {
      eq(i, i * L + j) = 1.0;
      eq(K + j, i * L + j) = 1.0;
    }
  // Drop the last (redundant) equation.
  const Matrix A = eq.topRows(K + L - 1);
  const Vector r = rhs.head(K + L - 1);

  double best = std::numeric_limits<double>::infinity();
  std::vector<bool> pick(static_cast<std::size_t>(cells), false);
  std::fill(pick.begin(), pick.begin() + basis, true);
  do {
    Matrix sub(basis, basis);
    std::vector<int> idx;
    for (int k = 0; k < cells; ++k)
      if (pick[static_cast<std::size_t>(k)]) idx.push_back(k);
    for (int col = 0; col < basis; ++col) sub.col(col) = A.col(idx[static_cast<std::size_t>(col)]);
    Eigen::FullPivLU<Matrix> lu(sub);
    if (lu.rank() < basis) continue;
    const Vector x = lu.solve(r);
    if (x.minCoeff() < -1e-12) continue;
    double v = 0.0;
    for (int col = 0; col < basis; ++col) {
      const int k = idx[static_cast<std::size_t>(col)];
      v += x(col) * c(k / L, k % L);
    }
    best = std::min(best, v);
  } while (std::prev_permutation(pick.begin(), pick.end()));
  return best;
}

inline GaussianComponent gauss1(double mu, double var) {
  return GaussianComponent(Vector::Constant(1, mu), Matrix::Constant(1, 1, var));
}

}  // namespace byzmix::testing

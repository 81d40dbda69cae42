#include "byzmix/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace byzmix {

Matrix psd_sqrt(const Matrix& sym) {
  if (sym.rows() != sym.cols()) throw std::invalid_argument("psd_sqrt: matrix is not square");
  const double scale = std::max(1.0, sym.cwiseAbs().maxCoeff());
  if ((sym - sym.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw std::invalid_argument("psd_sqrt: matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  if (eig.info() != Eigen::Success) throw NumericalError("psd_sqrt: eigendecomposition failed");
  const Vector root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

double d1_gaussian(const GaussianComponent& a, const GaussianComponent& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("d1_gaussian: dimension mismatch");
  return (a.mean() - b.mean()).norm() + (psd_sqrt(a.covariance()) - psd_sqrt(b.covariance())).norm();
}

double d1_gamma(const GammaComponent& a, const GammaComponent& b) {
  return std::abs(a.shape() - b.shape()) + std::abs(a.scale() - b.scale());
}

double d1(const Component& a, const Component& b) {
  if (family_of(a) != family_of(b)) throw std::invalid_argument("d1: family mismatch");
  if (const auto* ga = std::get_if<GaussianComponent>(&a)) return d1_gaussian(*ga, std::get<GaussianComponent>(b));
  return d1_gamma(std::get<GammaComponent>(a), std::get<GammaComponent>(b));
}

double w1(const MixingDistribution& g, const MixingDistribution& h) {
  if (g.family() != h.family() || g.dim() != h.dim()) throw std::invalid_argument("w1: mixtures are not comparable");
  Matrix c(g.order(), h.order());
  // Square roots once per component rather than once per pair.
  if (g.family() == Family::Gaussian) {
    std::vector<Matrix> rg;
    std::vector<Matrix> rh;
    for (int i = 0; i < g.order(); ++i) rg.push_back(psd_sqrt(g.gaussian(i).covariance()));
    for (int j = 0; j < h.order(); ++j) rh.push_back(psd_sqrt(h.gaussian(j).covariance()));
    for (int i = 0; i < g.order(); ++i)
      for (int j = 0; j < h.order(); ++j)
        c(i, j) = (g.gaussian(i).mean() - h.gaussian(j).mean()).norm() +
                  (rg[static_cast<std::size_t>(i)] - rh[static_cast<std::size_t>(j)]).norm();
  } else {
    for (int i = 0; i < g.order(); ++i)
      for (int j = 0; j < h.order(); ++j) c(i, j) = d1(g.component(i), h.component(j));
  }
  return solve_transport(g.weights(), h.weights(), c).cost;
}

std::vector<int> cluster_assign(const MixingDistribution& g, const Dataset& data) {
  if (data.dim() != g.dim()) throw std::invalid_argument("cluster_assign: dimension mismatch");
  const int n = data.size();
  Matrix score(n, g.order());
  for (int k = 0; k < g.order(); ++k)
    score.col(k) = log_pdf_rows(g.component(k), data.rows).array() + std::log(g.weight(k));
  std::vector<int> out(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    int best = 0;
    for (int k = 1; k < g.order(); ++k)
      if (score(i, k) > score(i, best)) best = k;
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

double ari(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("ari: label vectors differ in length");
  if (a.size() < 2) throw std::invalid_argument("ari: need at least two observations");
  using Int = __int128;
  auto pairs = [](Int n) { return n * (n - 1) / 2; };
  std::map<std::pair<int, int>, long long> joint;
  std::map<int, long long> rows;
  std::map<int, long long> cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++joint[{a[i], b[i]}];
    ++rows[a[i]];
    ++cols[b[i]];
  }
  Int index = 0;
  for (const auto& [key, c] : joint) index += pairs(c);
  Int sum_a = 0;
  for (const auto& [key, c] : rows) sum_a += pairs(c);
  Int sum_b = 0;
  for (const auto& [key, c] : cols) sum_b += pairs(c);
  const Int total = pairs(static_cast<Int>(a.size()));
  // Multiply numerator and denominator by 2 * C(N, 2) to stay in integers.
  const Int num = 2 * index * total - 2 * sum_a * sum_b;
  const Int den = (sum_a + sum_b) * total - 2 * sum_a * sum_b;
  if (den == 0) return 1.0;
  return static_cast<double>(static_cast<long double>(num) / static_cast<long double>(den));
}

OverlapEstimate max_omega(const MixingDistribution& g, int n_mc, Rng& rng) {
  const int K = g.order();
  if (K < 2) throw std::invalid_argument("max_omega: need K >= 2");
  if (n_mc < 1000) throw std::invalid_argument("max_omega: need at least 1000 Monte-Carlo draws");
  // misclassified(i, j): fraction of draws from component i where j wins strictly.
  Matrix miss = Matrix::Zero(K, K);
  for (int i = 0; i < K; ++i) {
    const auto one = MixingDistribution({1.0}, std::vector<Component>{g.component(i)});
    const Dataset draws = sample(one, n_mc, rng);
    Matrix score(n_mc, K);
    for (int k = 0; k < K; ++k)
      score.col(k) = log_pdf_rows(g.component(k), draws.rows).array() + std::log(g.weight(k));
    for (int j = 0; j < K; ++j) {
      if (j == i) continue;
      miss(i, j) = static_cast<double>((score.col(j).array() > score.col(i).array()).count()) / n_mc;
    }
  }
  OverlapEstimate out;
  out.max_omega = -1.0;
  for (int i = 0; i < K; ++i)
    for (int j = i + 1; j < K; ++j) {
      const double v = miss(j, i) + miss(i, j);
      if (v > out.max_omega) {
        out.max_omega = v;
        out.pair_i = i;
        out.pair_j = j;
        // Two independent binomial proportions.
        const double p1 = miss(i, j);
        const double p2 = miss(j, i);
        out.std_error = std::sqrt((p1 * (1 - p1) + p2 * (1 - p2)) / n_mc);
      }
    }
  return out;
}

}  // namespace byzmix

#include "byzmix/divergences.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace byzmix {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

std::string_view cost_kind_name(CostKind kind) noexcept {
  switch (kind) {
    case CostKind::KL: return "kl";
    case CostKind::SquaredEuclidean: return "sqeuclidean";
    case CostKind::L2CrossIntegral: return "l2cross";
  }
  return "?";
}

double l2_cross_integral(const GaussianComponent& a, const GaussianComponent& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("l2_cross_integral: dimension mismatch");
  const Matrix sum = a.covariance() + b.covariance();
  Eigen::LLT<Matrix> llt(sum);
  if (llt.info() != Eigen::Success) throw NumericalError("l2_cross_integral: summed covariance is not PD");
  const Matrix L = llt.matrixL();
  const Vector z = L.triangularView<Eigen::Lower>().solve(a.mean() - b.mean());
  const double log_det = 2.0 * L.diagonal().array().log().sum();
  return std::exp(-0.5 * (a.dim() * kLog2Pi + log_det + z.squaredNorm()));
}

double l2_cross_integral(const GammaComponent& a, const GammaComponent& b) {
  // Fixed argument order makes the result bit-symmetric.
  const bool swap = std::make_pair(a.shape(), a.scale()) > std::make_pair(b.shape(), b.scale());
  const GammaComponent& x = swap ? b : a;
  const GammaComponent& y = swap ? a : b;
  const double r = x.shape() + y.shape() - 1.0;
  if (!(r > 0.0)) throw std::invalid_argument("l2_cross_integral: Gamma shapes must satisfy r1 + r2 > 1");
  const double log_value = (y.shape() - 1.0) * std::log(x.scale()) + (x.shape() - 1.0) * std::log(y.scale()) +
                           boost::math::lgamma(r) - r * std::log(x.scale() + y.scale()) -
                           boost::math::lgamma(x.shape()) - boost::math::lgamma(y.shape());
  return std::exp(log_value);
}

double l2_cross_integral(const Component& a, const Component& b) {
  if (family_of(a) != family_of(b)) throw std::invalid_argument("l2_cross_integral: family mismatch");
  if (const auto* ga = std::get_if<GaussianComponent>(&a)) return l2_cross_integral(*ga, std::get<GaussianComponent>(b));
  return l2_cross_integral(std::get<GammaComponent>(a), std::get<GammaComponent>(b));
}

double l2_distance(const MixingDistribution& g, const MixingDistribution& h) {
  if (g.family() != h.family()) throw std::invalid_argument("l2_distance: family mismatch");
  if (g.dim() != h.dim()) throw std::invalid_argument("l2_distance: dimension mismatch");
  auto form = [](const MixingDistribution& p, const MixingDistribution& q) {
    double s = 0.0;
    for (int i = 0; i < p.order(); ++i) {
      double row = 0.0;
      for (int j = 0; j < q.order(); ++j) row += q.weight(j) * l2_cross_integral(p.component(i), q.component(j));
      s += p.weight(i) * row;
    }
    return s;
  };
  const double sq = form(g, g) - 2.0 * form(g, h) + form(h, h);
  return std::sqrt(std::max(0.0, sq));
}

double kl_gaussian(const GaussianComponent& from, const GaussianComponent& to) {
  if (from.dim() != to.dim()) throw std::invalid_argument("kl_gaussian: dimension mismatch");
  if (from == to) return 0.0;
  const auto L = to.cholesky().triangularView<Eigen::Lower>();
  const Matrix a = L.solve(from.covariance());
  const double trace = L.solve(a.transpose()).trace();
  const double maha = L.solve(to.mean() - from.mean()).squaredNorm();
  const double kl = 0.5 * (trace + maha - from.dim() + to.log_det() - from.log_det());
  return std::max(0.0, kl);
}

double squared_euclidean(const Component& a, const Component& b) {
  if (family_of(a) != family_of(b) || dim_of(a) != dim_of(b))
    throw std::invalid_argument("squared_euclidean: component mismatch");
  return (component_params(a) - component_params(b)).squaredNorm();
}

double cost(CostKind kind, const Component& a, const Component& b) {
  switch (kind) {
    case CostKind::KL: {
      const auto* fa = std::get_if<GaussianComponent>(&a);
      const auto* fb = std::get_if<GaussianComponent>(&b);
      if (fa == nullptr || fb == nullptr) throw std::invalid_argument("KL cost is only available for Gaussians");
      return kl_gaussian(*fa, *fb);
    }
    case CostKind::SquaredEuclidean: return squared_euclidean(a, b);
    case CostKind::L2CrossIntegral: return l2_cross_integral(a, b);
  }
  throw std::invalid_argument("unknown cost kind");
}

CostMatrix cost_matrix(CostKind kind, std::span<const Component> rows, std::span<const Component> cols) {
  CostMatrix out{Matrix(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size())), kind};
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      out.entries(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = cost(kind, rows[i], cols[j]);
  if (out.entries.hasNaN()) throw NumericalError("cost matrix contains NaN");
  return out;
}

double ctd(std::span<const Atom> source, const MixingDistribution& target, CostKind kind) {
  if (source.empty()) throw std::invalid_argument("ctd: empty source");
  double total_mass = 0.0;
  double value = 0.0;
  for (const auto& atom : source) {
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < target.order(); ++j) best = std::min(best, cost(kind, atom.component, target.component(j)));
    value += atom.mass * best;
    total_mass += atom.mass;
  }
  if (std::abs(total_mass - 1.0) > 1e-9) throw std::invalid_argument("ctd: source masses must sum to 1");
  return value;
}

}  // namespace byzmix

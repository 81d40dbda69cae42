#include "byzmix/local_em.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace byzmix {

namespace {

constexpr double kWeightFloor = 1e-8;
// Components whose expected count falls below this keep their parameters.
constexpr double kMinComponentMass = 1e-10;

struct EStep {
  Matrix resp;
  double loglik = 0.0;
};

EStep e_step(const MixingDistribution& g, const Dataset& data) {
  const int K = g.order();
  const int n = data.size();
  EStep out;
  out.resp.resize(n, K);
  for (int k = 0; k < K; ++k)
    out.resp.col(k) = log_pdf_rows(g.component(k), data.rows).array() + std::log(std::max(g.weight(k), kWeightFloor));
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    auto row = out.resp.row(i);
    const double mx = row.maxCoeff();
    if (!std::isfinite(mx))
      throw NumericalError("total density underflows at observation " + std::to_string(i));
    row.array() = (row.array() - mx).exp();
    const double s = row.sum();
    row /= s;
    total += mx + std::log(s);
  }
  out.loglik = total;
  return out;
}

double trace_inv_times(const GaussianComponent& c, const Matrix& s) {
  const auto L = c.cholesky().triangularView<Eigen::Lower>();
  const Matrix a = L.solve(s);
  const Matrix b = L.solve(a.transpose());
  return b.trace();
}

double penalty(const MixingDistribution& g, const Matrix* s_x) {
  double p = 0.0;
  for (int k = 0; k < g.order(); ++k) {
    if (g.family() == Family::Gaussian) {
      const auto& c = g.gaussian(k);
      p += trace_inv_times(c, *s_x) + c.log_det();
    } else {
      const double r = g.gamma(k).shape();
      p += r - std::log(r);
    }
  }
  return p;
}

void check_init(const Dataset& data, int K, const MixingDistribution& init, Family family) {
  data.validate();
  if (K < 1) throw std::invalid_argument("EM: K must be >= 1");
  if (init.order() != K) throw std::invalid_argument("EM: initial mixture order differs from K");
  if (init.family() != family) throw std::invalid_argument("EM: initial mixture has the wrong family");
  if (init.dim() != data.dim()) throw std::invalid_argument("EM: initial mixture dimension differs from data");
}

MixingDistribution gaussian_mstep(const Dataset& data, const Matrix& resp, const Matrix& s_x, double a,
                                  const MixingDistribution* previous) {
  const int n = data.size();
  const int K = static_cast<int>(resp.cols());
  std::vector<double> w(static_cast<std::size_t>(K));
  std::vector<Component> comps;
  comps.reserve(static_cast<std::size_t>(K));
  double wsum = 0.0;
  for (int k = 0; k < K; ++k) {
    const double nk = resp.col(k).sum();
    w[static_cast<std::size_t>(k)] = nk / n;
    wsum += nk / n;
    if (nk < kMinComponentMass * n) {
      if (previous != nullptr) {
        comps.push_back(previous->component(k));
      } else {
        comps.emplace_back(GaussianComponent(data.rows.colwise().mean().transpose(), s_x));
      }
      continue;
    }
    Vector mu = (data.rows.transpose() * resp.col(k)) / nk;
    const DataMatrix centred = data.rows.rowwise() - mu.transpose();
    Matrix s_k = centred.transpose() * (centred.array().colwise() * resp.col(k).array()).matrix();
    Matrix cov = (2.0 * a * s_x + s_k) / (2.0 * a + nk);
    comps.emplace_back(GaussianComponent(std::move(mu), std::move(cov)));
  }
  for (auto& x : w) x /= wsum;
  return {std::move(w), std::move(comps)};
}

// d/dr of the profiled penalised Gamma log-likelihood, and its second derivative.
struct ShapeScore {
  double n, lhs, a;
  [[nodiscard]] double grad(double r) const {
    return lhs + n * (std::log(r) - boost::math::digamma(r)) - a + a / r;
  }
  [[nodiscard]] double hess(double r) const {
    return n * (1.0 / r - boost::math::trigamma(r)) - a / (r * r);
  }
};

MixingDistribution gamma_mstep_all(const Dataset& data, const Vector& logx, const Matrix& resp, double a,
                                   const MixingDistribution* previous) {
  const int n = data.size();
  const int K = static_cast<int>(resp.cols());
  std::vector<double> w(static_cast<std::size_t>(K));
  std::vector<Component> comps;
  double wsum = 0.0;
  for (int k = 0; k < K; ++k) {
    const double nk = resp.col(k).sum();
    w[static_cast<std::size_t>(k)] = nk / n;
    wsum += nk / n;
    if (nk < kMinComponentMass * n && previous != nullptr) {
      comps.push_back(previous->component(k));
      continue;
    }
    const double sx = resp.col(k).dot(data.rows.col(0));
    const double slx = resp.col(k).dot(logx);
    const double start = previous != nullptr ? previous->gamma(k).shape() : 1.0;
    comps.emplace_back(gamma_mstep(nk, sx, slx, a, start));
  }
  for (auto& x : w) x /= wsum;
  return {std::move(w), std::move(comps)};
}

template <class MStep>
EmResult run_em(const Dataset& data, const MixingDistribution& init, const EmConfig& cfg, double a,
                const Matrix* s_x, MStep&& m_step) {
  const int n = data.size();
  EmResult out{init, 0, 0.0, false, {}};
  EStep e = e_step(init, data);
  double pl = e.loglik - a * penalty(init, s_x);
  out.trace.push_back(pl);
  for (int it = 1; it <= cfg.max_iters; ++it) {
    out.estimate = m_step(e.resp, out.estimate);
    e = e_step(out.estimate, data);
    const double next = e.loglik - a * penalty(out.estimate, s_x);
    out.trace.push_back(next);
    out.iterations = it;
    const double change = std::abs(next - pl) / n;
    pl = next;
    if (change < cfg.tol) {
      out.converged = true;
      break;
    }
  }
  out.penalized_loglik = pl;
  return out;
}

}  // namespace

void EmConfig::validate() const {
  if (max_iters < 1) throw std::invalid_argument("em.max_iters must be >= 1");
  if (!(tol > 0.0)) throw std::invalid_argument("em.tol must be > 0");
  if (penalty && !(*penalty >= 0.0 && std::isfinite(*penalty)))
    throw std::invalid_argument("em.penalty must be finite and >= 0");
}

double EmConfig::penalty_for(int n) const {
  return penalty ? *penalty : 1.0 / std::sqrt(static_cast<double>(n));
}

Matrix responsibilities(const MixingDistribution& g, const Dataset& data) {
  data.validate();
  if (data.dim() != g.dim()) throw std::invalid_argument("responsibilities: dimension mismatch");
  return e_step(g, data).resp;
}

Matrix sample_covariance(const DataMatrix& x) {
  const DataMatrix centred = x.rowwise() - x.colwise().mean();
  return (centred.transpose() * centred) / static_cast<double>(x.rows());
}

double penalized_loglik(const MixingDistribution& g, const Dataset& data, double a) {
  data.validate();
  const EStep e = e_step(g, data);
  if (g.family() == Family::Gaussian) {
    const Matrix s_x = sample_covariance(data.rows);
    return e.loglik - a * penalty(g, &s_x);
  }
  return e.loglik - a * penalty(g, nullptr);
}

EmResult fit_gaussian(const Dataset& data, int K, const MixingDistribution& init, const EmConfig& cfg) {
  cfg.validate();
  check_init(data, K, init, Family::Gaussian);
  if (data.size() <= data.dim())
    throw std::invalid_argument("EM: need more observations than dimensions (sample covariance is singular)");
  const Matrix s_x = sample_covariance(data.rows);
  const double a = cfg.penalty_for(data.size());
  return run_em(data, init, cfg, a, &s_x, [&](const Matrix& resp, const MixingDistribution& prev) {
    return gaussian_mstep(data, resp, s_x, a, &prev);
  });
}

EmResult fit_gamma(const Dataset& data, int K, const MixingDistribution& init, const EmConfig& cfg) {
  cfg.validate();
  check_init(data, K, init, Family::Gamma);
  if ((data.rows.array() <= 0.0).any()) throw std::invalid_argument("Gamma EM: observations must be > 0");
  const Vector logx = data.rows.col(0).array().log();
  const double a = cfg.penalty_for(data.size());
  return run_em(data, init, cfg, a, nullptr, [&](const Matrix& resp, const MixingDistribution& prev) {
    return gamma_mstep_all(data, logx, resp, a, &prev);
  });
}

EmResult fit(const Dataset& data, int K, const MixingDistribution& init, const EmConfig& cfg) {
  return init.family() == Family::Gaussian ? fit_gaussian(data, K, init, cfg) : fit_gamma(data, K, init, cfg);
}

GammaComponent gamma_mstep(double sum_w, double sum_wx, double sum_wlogx, double a, double shape_start) {
  if (!(sum_w > 0.0) || !(sum_wx > 0.0)) throw std::invalid_argument("gamma_mstep: empty component");
  const ShapeScore score{sum_w, sum_wlogx - sum_w * std::log(sum_wx / sum_w), a};
  double lo = kGammaShapeMin;
  double hi = kGammaShapeMax;
  double r;
  if (score.grad(lo) <= 0.0) {
    r = lo;
  } else if (score.grad(hi) >= 0.0) {
    r = hi;
  } else {
    r = std::clamp(shape_start, lo, hi);
    for (int it = 0; it < 200; ++it) {
      const double g = score.grad(r);
      if (g > 0.0) lo = r; else hi = r;
      double next = r - g / score.hess(r);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      const bool done = std::abs(next - r) <= 1e-13 * r || hi - lo <= 1e-13 * r;
      r = next;
      if (done) break;
    }
  }
  return {r, sum_wx / (sum_w * r)};
}

MixingDistribution kmeanspp_init(const Dataset& data, int K, Family family, const EmConfig& cfg, Rng& rng) {
  data.validate();
  const int n = data.size();
  if (K < 1 || K > n) throw std::invalid_argument("kmeans++: need 1 <= K <= n");
  std::uniform_int_distribution<int> first(0, n - 1);
  std::vector<int> centres{first(rng)};
  Vector dist2 = (data.rows.rowwise() - data.rows.row(centres[0])).rowwise().squaredNorm();
  while (static_cast<int>(centres.size()) < K) {
    int next;
    if (dist2.sum() > 0.0) {
      std::discrete_distribution<int> pick(dist2.data(), dist2.data() + dist2.size());
      next = pick(rng);
    } else {
      next = first(rng);
    }
    centres.push_back(next);
    dist2 = dist2.cwiseMin((data.rows.rowwise() - data.rows.row(next)).rowwise().squaredNorm());
  }

  std::vector<int> label(static_cast<std::size_t>(n));
  std::vector<int> count(static_cast<std::size_t>(K), 0);
  Vector best(n);
  for (int i = 0; i < n; ++i) {
    double bd = std::numeric_limits<double>::infinity();
    for (int k = 0; k < K; ++k) {
      const double dd = (data.rows.row(i) - data.rows.row(centres[static_cast<std::size_t>(k)])).squaredNorm();
      if (dd < bd) {
        bd = dd;
        label[static_cast<std::size_t>(i)] = k;
      }
    }
    best[i] = bd;
    ++count[static_cast<std::size_t>(label[static_cast<std::size_t>(i)])];
  }
  // Duplicate seeds can leave a cluster empty; hand it the worst-fitting point.
  for (int k = 0; k < K; ++k) {
    if (count[static_cast<std::size_t>(k)] > 0) continue;
    Eigen::Index far = 0;
    for (Eigen::Index i = 0; i < n; ++i)
      if (count[static_cast<std::size_t>(label[static_cast<std::size_t>(i)])] > 1 && best[i] >= best[far]) far = i;
    --count[static_cast<std::size_t>(label[static_cast<std::size_t>(far)])];
    label[static_cast<std::size_t>(far)] = k;
    best[far] = 0.0;
    ++count[static_cast<std::size_t>(k)];
  }

  Matrix resp = Matrix::Zero(n, K);
  for (int i = 0; i < n; ++i) resp(i, label[static_cast<std::size_t>(i)]) = 1.0;
  const double a = cfg.penalty_for(n);
  if (family == Family::Gaussian) {
    const Matrix s_x = sample_covariance(data.rows);
    // Tiny clusters get the pooled covariance instead of a near-singular one.
    const double a_init = std::max(a, static_cast<double>(data.dim() + 1));
    return gaussian_mstep(data, resp, s_x, a_init, nullptr);
  }
  if ((data.rows.array() <= 0.0).any()) throw std::invalid_argument("Gamma init: observations must be > 0");
  const Vector logx = data.rows.col(0).array().log();
  return gamma_mstep_all(data, logx, resp, a, nullptr);
}

}  // namespace byzmix

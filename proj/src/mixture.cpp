#include "byzmix/mixture.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

namespace byzmix {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2 pi)

double log_sum_exp(const double* v, int k) {
  double mx = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < k; ++i) mx = std::max(mx, v[i]);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (int i = 0; i < k; ++i) s += std::exp(v[i] - mx);
  return mx + std::log(s);
}

void check_weights(const std::vector<double>& w) {
  if (w.empty()) throw std::invalid_argument("mixture needs at least one component");
  double total = 0.0;
  for (double x : w) {
    if (!std::isfinite(x) || x < 0.0) throw std::invalid_argument("mixture weights must be finite and >= 0");
    total += x;
  }
  if (std::abs(total - 1.0) > 1e-10) {
    std::ostringstream os;
    os << "mixture weights sum to " << total << ", expected 1";
    throw std::invalid_argument(os.str());
  }
}

}  // namespace

std::string_view family_name(Family family) noexcept {
  return family == Family::Gaussian ? "gaussian" : "gamma";
}

Family parse_family(std::string_view name) {
  if (name == "gaussian") return Family::Gaussian;
  if (name == "gamma") return Family::Gamma;
  throw std::invalid_argument("unknown family '" + std::string(name) + "'");
}

Matrix cholesky_with_jitter(const Matrix& sym, Matrix* adjusted) {
  Eigen::LLT<Matrix> llt(sym);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  const auto d = sym.rows();
  const double trace = sym.trace();
  if (std::isfinite(trace) && trace > 0.0) {
    Matrix bumped = sym;
    bumped.diagonal().array() += 1e-10 * trace / static_cast<double>(d);
    Eigen::LLT<Matrix> retry(bumped);
    if (retry.info() == Eigen::Success) {
      if (adjusted != nullptr) *adjusted = bumped;
      return retry.matrixL();
    }
  }
  throw NumericalError("matrix is not positive definite");
}

GaussianComponent::GaussianComponent(Vector mean, Matrix covariance)
    : mean_(std::move(mean)), covariance_(std::move(covariance)) {
  const auto d = mean_.size();
  if (d < 1) throw std::invalid_argument("Gaussian component needs dimension >= 1");
  if (covariance_.rows() != d || covariance_.cols() != d)
    throw std::invalid_argument("covariance shape does not match mean");
  if (!mean_.allFinite() || !covariance_.allFinite())
    throw std::invalid_argument("Gaussian parameters must be finite");
  const double scale = std::max(1.0, covariance_.cwiseAbs().maxCoeff());
  if ((covariance_ - covariance_.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw std::invalid_argument("covariance is not symmetric");
  covariance_ = 0.5 * (covariance_ + covariance_.transpose()).eval();
  Matrix adjusted;
  chol_ = cholesky_with_jitter(covariance_, &adjusted);
  if (adjusted.size() != 0) covariance_ = std::move(adjusted);
  log_det_ = 2.0 * chol_.diagonal().array().log().sum();
}

double GaussianComponent::log_pdf(const Eigen::Ref<const Vector>& x) const {
  if (x.size() != mean_.size()) throw std::invalid_argument("observation dimension mismatch");
  const Vector z = chol_.triangularView<Eigen::Lower>().solve(x - mean_);
  return -0.5 * (static_cast<double>(dim()) * kLog2Pi + log_det_ + z.squaredNorm());
}

Vector GaussianComponent::log_pdf_rows(const DataMatrix& x) const {
  if (x.cols() != mean_.size()) throw std::invalid_argument("observation dimension mismatch");
  Matrix centred = (x.rowwise() - mean_.transpose()).transpose();
  chol_.triangularView<Eigen::Lower>().solveInPlace(centred);
  const double c = static_cast<double>(dim()) * kLog2Pi + log_det_;
  return (-0.5 * (centred.colwise().squaredNorm().array() + c)).transpose();
}

GammaComponent::GammaComponent(double shape, double scale) : shape_(shape), scale_(scale) {
  if (!std::isfinite(shape) || shape <= 0.5)
    throw std::invalid_argument("Gamma shape must be finite and > 0.5");
  if (!std::isfinite(scale) || scale <= 0.0)
    throw std::invalid_argument("Gamma scale must be finite and > 0");
}

double GammaComponent::log_pdf(double x) const noexcept {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return (shape_ - 1.0) * std::log(x) - x / scale_ - shape_ * std::log(scale_) -
         boost::math::lgamma(shape_);
}

Family family_of(const Component& c) noexcept {
  return std::holds_alternative<GaussianComponent>(c) ? Family::Gaussian : Family::Gamma;
}

int dim_of(const Component& c) noexcept {
  if (const auto* g = std::get_if<GaussianComponent>(&c)) return g->dim();
  return 1;
}

double log_pdf(const Component& c, const Eigen::Ref<const Vector>& x) {
  if (const auto* g = std::get_if<GaussianComponent>(&c)) return g->log_pdf(x);
  if (x.size() != 1) throw std::invalid_argument("observation dimension mismatch");
  return std::get<GammaComponent>(c).log_pdf(x[0]);
}

Vector log_pdf_rows(const Component& c, const DataMatrix& x) {
  if (const auto* g = std::get_if<GaussianComponent>(&c)) return g->log_pdf_rows(x);
  if (x.cols() != 1) throw std::invalid_argument("observation dimension mismatch");
  const auto& gam = std::get<GammaComponent>(c);
  const double lnorm = gam.shape() * std::log(gam.scale()) + boost::math::lgamma(gam.shape());
  Vector out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double v = x(i, 0);
    out[i] = v > 0.0 ? (gam.shape() - 1.0) * std::log(v) - v / gam.scale() - lnorm
                     : -std::numeric_limits<double>::infinity();
  }
  return out;
}

MixingDistribution::MixingDistribution(std::vector<double> weights, std::vector<Component> components)
    : weights_(std::move(weights)), components_(std::move(components)) {
  check_weights(weights_);
  if (components_.size() != weights_.size())
    throw std::invalid_argument("number of weights and components differ");
  family_ = family_of(components_.front());
  dim_ = dim_of(components_.front());
  for (const auto& c : components_) {
    if (family_of(c) != family_) throw std::invalid_argument("mixture components must share one family");
    if (dim_of(c) != dim_) throw std::invalid_argument("mixture components must share one dimension");
  }
}

MixingDistribution::MixingDistribution(std::vector<double> weights,
                                       const std::vector<GaussianComponent>& components)
    : MixingDistribution(std::move(weights), std::vector<Component>(components.begin(), components.end())) {}

MixingDistribution::MixingDistribution(std::vector<double> weights,
                                       const std::vector<GammaComponent>& components)
    : MixingDistribution(std::move(weights), std::vector<Component>(components.begin(), components.end())) {}

const GaussianComponent& MixingDistribution::gaussian(int k) const {
  const auto* g = std::get_if<GaussianComponent>(&component(k));
  if (g == nullptr) throw std::invalid_argument("mixture is not Gaussian");
  return *g;
}

const GammaComponent& MixingDistribution::gamma(int k) const {
  const auto* g = std::get_if<GammaComponent>(&component(k));
  if (g == nullptr) throw std::invalid_argument("mixture is not Gamma");
  return *g;
}

MixingDistribution MixingDistribution::permuted(std::span<const int> perm) const {
  if (static_cast<int>(perm.size()) != order()) throw std::invalid_argument("permutation has wrong length");
  std::vector<double> w;
  std::vector<Component> c;
  std::vector<bool> seen(perm.size(), false);
  for (int p : perm) {
    if (p < 0 || p >= order() || seen[static_cast<std::size_t>(p)])
      throw std::invalid_argument("not a permutation");
    seen[static_cast<std::size_t>(p)] = true;
    w.push_back(weight(p));
    c.push_back(component(p));
  }
  return {std::move(w), std::move(c)};
}

MixingDistribution MixingDistribution::with_weights(std::vector<double> weights) const {
  return {std::move(weights), components_};
}

void Dataset::validate() const {
  if (rows.rows() < 1 || rows.cols() < 1) throw std::invalid_argument("dataset must be non-empty");
  if (!rows.allFinite()) throw std::invalid_argument("dataset contains non-finite values");
  if (labels && static_cast<Eigen::Index>(labels->size()) != rows.rows())
    throw std::invalid_argument("label count does not match row count");
}

double log_density(const MixingDistribution& g, const Eigen::Ref<const Vector>& x) {
  if (x.size() != g.dim()) throw std::invalid_argument("observation dimension does not match mixture");
  if (!x.allFinite()) throw std::invalid_argument("observation is not finite");
  std::vector<double> terms(static_cast<std::size_t>(g.order()));
  for (int k = 0; k < g.order(); ++k)
    terms[static_cast<std::size_t>(k)] = std::log(g.weight(k)) + log_pdf(g.component(k), x);
  return log_sum_exp(terms.data(), g.order());
}

double density(const MixingDistribution& g, const Eigen::Ref<const Vector>& x) {
  return std::exp(log_density(g, x));
}

double density(const MixingDistribution& g, double x) {
  Vector v(1);
  v[0] = x;
  return density(g, v);
}

Vector log_density_rows(const MixingDistribution& g, const DataMatrix& x) {
  const int K = g.order();
  Matrix terms(x.rows(), K);
  for (int k = 0; k < K; ++k) terms.col(k) = log_pdf_rows(g.component(k), x).array() + std::log(g.weight(k));
  Vector out(x.rows());
  std::vector<double> row(static_cast<std::size_t>(K));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (int k = 0; k < K; ++k) row[static_cast<std::size_t>(k)] = terms(i, k);
    out[i] = log_sum_exp(row.data(), K);
  }
  return out;
}

Dataset sample(const MixingDistribution& g, int n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("sample size must be >= 1");
  std::discrete_distribution<int> pick(g.weights().begin(), g.weights().end());
  std::normal_distribution<double> normal(0.0, 1.0);
  Dataset out;
  out.rows.resize(n, g.dim());
  out.labels.emplace(static_cast<std::size_t>(n));
  Vector z(g.dim());
  for (int i = 0; i < n; ++i) {
    const int k = pick(rng);
    (*out.labels)[static_cast<std::size_t>(i)] = k;
    if (const auto* gc = std::get_if<GaussianComponent>(&g.component(k))) {
      for (int j = 0; j < g.dim(); ++j) z[j] = normal(rng);
      out.rows.row(i) = (gc->mean() + gc->cholesky().triangularView<Eigen::Lower>() * z).transpose();
    } else {
      const auto& gam = std::get<GammaComponent>(g.component(k));
      std::gamma_distribution<double> draw(gam.shape(), gam.scale());
      out.rows(i, 0) = draw(rng);
    }
  }
  return out;
}

int params_per_component(Family family, int dim) noexcept {
  return family == Family::Gaussian ? dim + dim * (dim + 1) / 2 : 2;
}

Vector component_params(const Component& c) {
  if (const auto* g = std::get_if<GaussianComponent>(&c)) {
    const int d = g->dim();
    Vector theta(params_per_component(Family::Gaussian, d));
    theta.head(d) = g->mean();
    int pos = d;
    for (int r = 0; r < d; ++r)
      for (int col = r; col < d; ++col) theta[pos++] = g->covariance()(r, col);
    return theta;
  }
  const auto& gam = std::get<GammaComponent>(c);
  Vector theta(2);
  theta << gam.shape(), gam.scale();
  return theta;
}

Component component_from_params(Family family, int dim, const Eigen::Ref<const Vector>& theta) {
  if (theta.size() != params_per_component(family, dim))
    throw std::invalid_argument("parameter block has wrong length");
  if (family == Family::Gamma) return GammaComponent(theta[0], theta[1]);
  Matrix cov(dim, dim);
  int pos = dim;
  for (int r = 0; r < dim; ++r)
    for (int col = r; col < dim; ++col) cov(r, col) = cov(col, r) = theta[pos++];
  return GaussianComponent(theta.head(dim), std::move(cov));
}

ParamVector vectorize(const MixingDistribution& g, std::span<const int> perm) {
  const int K = g.order();
  std::vector<int> order(static_cast<std::size_t>(K));
  if (perm.empty()) {
    std::iota(order.begin(), order.end(), 0);
  } else {
    if (static_cast<int>(perm.size()) != K) throw std::invalid_argument("permutation has wrong length");
    order.assign(perm.begin(), perm.end());
  }
  const int p = params_per_component(g.family(), g.dim());
  ParamVector out;
  out.values.resize(p * K + K - 1);
  for (int j = 0; j + 1 < K; ++j) out.values[j] = g.weight(order[static_cast<std::size_t>(j)]);
  for (int j = 0; j < K; ++j)
    out.values.segment(K - 1 + j * p, p) = component_params(g.component(order[static_cast<std::size_t>(j)]));
  out.permutation = std::move(order);
  return out;
}

MixingDistribution devectorize(const ParamVector& v, Family family, int dim) {
  const int p = params_per_component(family, dim);
  if ((v.values.size() + 1) % (p + 1) != 0) throw std::invalid_argument("parameter vector has wrong length");
  const int K = static_cast<int>((v.values.size() + 1) / (p + 1));
  std::vector<double> w(static_cast<std::size_t>(K));
  double rest = 1.0;
  for (int j = 0; j + 1 < K; ++j) {
    w[static_cast<std::size_t>(j)] = v.values[j];
    rest -= v.values[j];
  }
  // Clamp float dust so a vector built from valid weights always round-trips.
  w.back() = rest < 0.0 && rest > -1e-12 ? 0.0 : rest;
  std::vector<Component> comps;
  comps.reserve(static_cast<std::size_t>(K));
  for (int j = 0; j < K; ++j) comps.push_back(component_from_params(family, dim, v.values.segment(K - 1 + j * p, p)));
  return {std::move(w), std::move(comps)};
}

Alignment align(const MixingDistribution& g, const MixingDistribution& reference) {
  const int K = g.order();
  if (reference.order() != K) throw std::invalid_argument("align: mixtures have different orders");
  if (reference.family() != g.family() || reference.dim() != g.dim())
    throw std::invalid_argument("align: mixtures differ in family or dimension");
  if (K > 10) throw UnsupportedError("align: exhaustive search supports K <= 10");

  // cost(j, k): contribution of placing g's component k at slot j.
  Matrix cost(K, K);
  for (int j = 0; j < K; ++j) {
    const Vector ref_theta = component_params(reference.component(j));
    for (int k = 0; k < K; ++k) {
      double c = (component_params(g.component(k)) - ref_theta).squaredNorm();
      if (j + 1 < K) c += (g.weight(k) - reference.weight(j)) * (g.weight(k) - reference.weight(j));
      cost(j, k) = c;
    }
  }
  std::vector<int> perm(static_cast<std::size_t>(K));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  double best_sq = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (int j = 0; j < K; ++j) s += cost(j, perm[static_cast<std::size_t>(j)]);
    if (s < best_sq) {
      best_sq = s;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  Alignment out;
  out.vector = vectorize(g, best);
  out.permutation = best;
  out.residual = (out.vector.values - vectorize(reference).values).norm();
  return out;
}

std::vector<Dataset> partition(const Dataset& data, int m, Rng& rng) {
  data.validate();
  const int n = data.size();
  if (m < 1) throw std::invalid_argument("partition: m must be >= 1");
  if (n % m != 0) throw std::invalid_argument("partition: row count is not divisible by m");
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  const int chunk = n / m;
  std::vector<Dataset> out(static_cast<std::size_t>(m));
  for (int c = 0; c < m; ++c) {
    auto& part = out[static_cast<std::size_t>(c)];
    part.rows.resize(chunk, data.dim());
    if (data.labels) part.labels.emplace(static_cast<std::size_t>(chunk));
    for (int r = 0; r < chunk; ++r) {
      const int src = idx[static_cast<std::size_t>(c * chunk + r)];
      part.rows.row(r) = data.rows.row(src);
      if (data.labels) (*part.labels)[static_cast<std::size_t>(r)] = (*data.labels)[static_cast<std::size_t>(src)];
    }
  }
  return out;
}

}  // namespace byzmix

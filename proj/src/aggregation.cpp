#include "byzmix/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace byzmix {

double LocalEstimateSet::lambda(int i) const {
  if (machine_weights.empty()) return 1.0 / size();
  return machine_weights.at(static_cast<std::size_t>(i));
}

void LocalEstimateSet::validate() const {
  if (estimates.empty()) throw std::invalid_argument("estimate set is empty");
  const auto& first = estimates.front();
  for (const auto& g : estimates) {
    if (g.family() != first.family() || g.order() != first.order() || g.dim() != first.dim())
      throw std::invalid_argument("local estimates must share family, order and dimension");
  }
  if (!machine_weights.empty()) {
    if (machine_weights.size() != estimates.size()) throw std::invalid_argument("machine weight count differs from m");
    double s = 0.0;
    for (double l : machine_weights) {
      if (!(l >= 0.0)) throw std::invalid_argument("machine weights must be >= 0");
      s += l;
    }
    if (std::abs(s - 1.0) > 1e-9) throw std::invalid_argument("machine weights must sum to 1");
  }
  if (failure_mask && failure_mask->size() != estimates.size())
    throw std::invalid_argument("failure mask length differs from m");
}

Matrix pairwise_distances(const LocalEstimateSet& set) {
  set.validate();
  const int m = set.size();
  if (m < 2) throw std::invalid_argument("pairwise_distances: need m >= 2");
  Matrix d = Matrix::Zero(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j)
      d(i, j) = d(j, i) = l2_distance(set.estimates[static_cast<std::size_t>(i)], set.estimates[static_cast<std::size_t>(j)]);
  return d;
}

CoatResult coat_from_distances(Matrix distances) {
  const auto m = distances.rows();
  if (m < 2 || distances.cols() != m) throw std::invalid_argument("coat: need a square matrix with m >= 2");
  CoatResult out;
  const auto rank = static_cast<std::size_t>((m + 1) / 2 - 1);
  out.medians.resize(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) {
    std::vector<double> row(static_cast<std::size_t>(m));
    for (Eigen::Index j = 0; j < m; ++j) row[static_cast<std::size_t>(j)] = distances(i, j);
    std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(rank), row.end());
    out.medians[static_cast<std::size_t>(i)] = row[rank];
  }
  out.index = static_cast<int>(std::min_element(out.medians.begin(), out.medians.end()) - out.medians.begin());
  out.radius = out.medians[static_cast<std::size_t>(out.index)];
  out.distances = std::move(distances);
  return out;
}

CoatResult coat(const LocalEstimateSet& set) { return coat_from_distances(pairwise_distances(set)); }

std::vector<int> filter(const CoatResult& coat, double rho) {
  if (!(rho >= 1.0)) throw std::invalid_argument("filter: rho must be >= 1");
  std::vector<int> out;
  const double bound = std::isinf(rho) ? rho : rho * coat.radius;
  for (Eigen::Index i = 0; i < coat.distances.rows(); ++i)
    if (i == coat.index || coat.distances(coat.index, i) <= bound) out.push_back(static_cast<int>(i));
  return out;
}

namespace {

// The only atom carrying mass, if there is exactly one; returned verbatim so
// that fixed points are exact.
const Atom* sole_atom(std::span<const Atom> items) {
  const Atom* found = nullptr;
  for (const auto& it : items) {
    if (!(it.mass > 0.0)) continue;
    if (found) return nullptr;
    found = &it;
  }
  return found;
}

}  // namespace

GaussianComponent kl_barycentre(std::span<const Atom> items) {
  if (items.empty()) throw std::invalid_argument("kl_barycentre: no items");
  for (const auto& it : items)
    if (!(it.mass >= 0.0)) throw std::invalid_argument("kl_barycentre: masses must be >= 0");
  if (const Atom* one = sole_atom(items)) return std::get<GaussianComponent>(one->component);
  double total = 0.0;
  const int d = dim_of(items.front().component);
  Vector mu = Vector::Zero(d);
  for (const auto& it : items) {
    if (!(it.mass >= 0.0)) throw std::invalid_argument("kl_barycentre: masses must be >= 0");
    const auto& g = std::get<GaussianComponent>(it.component);
    mu += it.mass * g.mean();
    total += it.mass;
  }
  if (!(total > 0.0)) throw std::invalid_argument("kl_barycentre: total mass is zero");
  mu /= total;
  Matrix cov = Matrix::Zero(d, d);
  for (const auto& it : items) {
    const auto& g = std::get<GaussianComponent>(it.component);
    const Vector diff = g.mean() - mu;
    cov += it.mass * (g.covariance() + diff * diff.transpose());
  }
  cov /= total;
  return {std::move(mu), std::move(cov)};
}

Component barycentre(CostKind kind, std::span<const Atom> items) {
  if (items.empty()) throw std::invalid_argument("barycentre: no items");
  if (kind == CostKind::KL) return kl_barycentre(items);
  if (kind != CostKind::SquaredEuclidean) throw std::invalid_argument("barycentre: unsupported cost kind");
  if (const Atom* one = sole_atom(items)) return one->component;
  const Family family = family_of(items.front().component);
  const int d = dim_of(items.front().component);
  Vector theta = Vector::Zero(params_per_component(family, d));
  double total = 0.0;
  for (const auto& it : items) {
    theta += it.mass * component_params(it.component);
    total += it.mass;
  }
  if (!(total > 0.0)) throw std::invalid_argument("barycentre: total mass is zero");
  return component_from_params(family, d, theta / total);
}

CostKind default_cost(Family family) noexcept {
  return family == Family::Gaussian ? CostKind::KL : CostKind::SquaredEuclidean;
}

std::vector<Atom> pool(const LocalEstimateSet& set, std::span<const int> indices) {
  double total = 0.0;
  for (int i : indices) total += set.lambda(i);
  if (!(total > 0.0)) throw std::invalid_argument("pool: selected machines carry no weight");
  std::vector<Atom> atoms;
  for (int i : indices) {
    const auto& g = set.estimates.at(static_cast<std::size_t>(i));
    const double scale = set.lambda(i) / total;
    for (int k = 0; k < g.order(); ++k) atoms.push_back({scale * g.weight(k), g.component(k)});
  }
  return atoms;
}

namespace {

struct Assignment {
  std::vector<int> label;
  std::vector<double> loss;
  double objective = 0.0;
};

Assignment assign(std::span<const Atom> atoms, const std::vector<Component>& centres, CostKind kind) {
  Assignment a;
  a.label.resize(atoms.size());
  a.loss.resize(atoms.size());
  for (std::size_t g = 0; g < atoms.size(); ++g) {
    double best = std::numeric_limits<double>::infinity();
    int arg = 0;
    for (std::size_t j = 0; j < centres.size(); ++j) {
      const double c = cost(kind, atoms[g].component, centres[j]);
      if (c < best) {
        best = c;
        arg = static_cast<int>(j);
      }
    }
    a.label[g] = arg;
    a.loss[g] = best;
    a.objective += atoms[g].mass * best;
  }
  return a;
}

// Moves each empty centre onto the worst-served atom not already used.
void reseed_empty(std::span<const Atom> atoms, std::vector<Component>& centres, Assignment& a) {
  const std::size_t K = centres.size();
  std::vector<int> count(K, 0);
  for (int l : a.label) ++count[static_cast<std::size_t>(l)];
  for (std::size_t j = 0; j < K; ++j) {
    if (count[j] > 0) continue;
    std::size_t worst = atoms.size();
    for (std::size_t g = 0; g < atoms.size(); ++g) {
      if (count[static_cast<std::size_t>(a.label[g])] <= 1) continue;
      if (worst == atoms.size() || a.loss[g] > a.loss[worst]) worst = g;
    }
    if (worst == atoms.size()) continue;
    --count[static_cast<std::size_t>(a.label[worst])];
    centres[j] = atoms[worst].component;
    a.objective -= atoms[worst].mass * a.loss[worst];
    a.label[worst] = static_cast<int>(j);
    a.loss[worst] = 0.0;
    ++count[j];
  }
}

std::vector<double> cluster_mass(std::span<const Atom> atoms, const Assignment& a, std::size_t K) {
  std::vector<double> w(K, 0.0);
  for (std::size_t g = 0; g < atoms.size(); ++g) w[static_cast<std::size_t>(a.label[g])] += atoms[g].mass;
  return w;
}

std::vector<double> normalised(std::vector<double> w) {
  const double s = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& x : w) x /= s;
  return w;
}

Reduction mm_single(std::span<const Atom> pooled, std::vector<Component> centres, const ReduceConfig& cfg) {
  const std::size_t K = centres.size();
  Assignment current = assign(pooled, centres, cfg.cost);
  Reduction out{MixingDistribution(std::vector<double>(K, 1.0 / static_cast<double>(K)), centres), 0, current.objective,
                false, {current.objective}};
  for (int it = 1; it <= cfg.max_iters; ++it) {
    reseed_empty(pooled, centres, current);
    std::vector<std::vector<Atom>> members(K);
    for (std::size_t g = 0; g < pooled.size(); ++g) members[static_cast<std::size_t>(current.label[g])].push_back(pooled[g]);
    for (std::size_t j = 0; j < K; ++j)
      if (!members[j].empty()) centres[j] = barycentre(cfg.cost, members[j]);
    Assignment next = assign(pooled, centres, cfg.cost);
    out.trace.push_back(next.objective);
    out.iterations = it;
    const bool stable = next.label == current.label;
    const double change = std::abs(next.objective - current.objective);
    current = std::move(next);
    if (stable || change < cfg.tol) {
      out.converged = true;
      break;
    }
  }
  out.objective = current.objective;
  out.estimate = MixingDistribution(normalised(cluster_mass(pooled, current, K)), std::move(centres));
  return out;
}

double total_mass(std::span<const Atom> atoms) {
  double s = 0.0;
  for (const auto& a : atoms) s += a.mass;
  return s;
}

}  // namespace

Reduction mm_reduce(std::span<const Atom> pooled, int K, const MixingDistribution& init, const ReduceConfig& cfg) {
  if (pooled.empty()) throw std::invalid_argument("mm_reduce: no atoms");
  if (init.order() != K) throw std::invalid_argument("mm_reduce: initial mixture order differs from K");
  if (std::abs(total_mass(pooled) - 1.0) > 1e-9) throw std::invalid_argument("mm_reduce: pooled masses must sum to 1");
  if (cfg.max_iters < 1 || cfg.restarts < 1 || !(cfg.tol >= 0.0)) throw std::invalid_argument("mm_reduce: bad config");

  Reduction best = mm_single(pooled, init.components(), cfg);
  if (cfg.restarts > 1 && static_cast<int>(pooled.size()) >= K) {
    Rng rng(cfg.seed);
    std::vector<std::size_t> idx(pooled.size());
    for (int r = 1; r < cfg.restarts; ++r) {
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      std::shuffle(idx.begin(), idx.end(), rng);
      std::vector<Component> start;
      for (int k = 0; k < K; ++k) start.push_back(pooled[idx[static_cast<std::size_t>(k)]].component);
      Reduction run = mm_single(pooled, std::move(start), cfg);
      if (run.objective < best.objective) best = std::move(run);
    }
  }
  return best;
}

DfmrResult dfmr(const LocalEstimateSet& set, double rho, int K, const ReduceConfig& cfg) {
  DfmrResult out{Reduction{set.estimates.at(0), 0, 0.0, false, {}}, coat(set), {}};
  out.selected = filter(out.coat, rho);
  const auto atoms = pool(set, out.selected);
  out.reduction = mm_reduce(atoms, K, set.estimates[static_cast<std::size_t>(out.coat.index)], cfg);
  return out;
}

std::vector<double> trim_masses(std::span<const double> losses, std::span<const double> masses, double eta) {
  if (losses.size() != masses.size()) throw std::invalid_argument("trim_masses: length mismatch");
  if (!(eta > 0.0 && eta < 1.0)) throw std::invalid_argument("trim: eta must lie in (0, 1)");
  std::vector<std::size_t> order(losses.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return losses[a] < losses[b]; });
  const double keep = 1.0 - eta;
  std::vector<double> kappa(losses.size(), 0.0);
  double cum = 0.0;
  for (std::size_t g : order) {
    if (cum + masses[g] <= keep) {
      kappa[g] = masses[g];
      cum += masses[g];
    } else {
      kappa[g] = std::max(0.0, keep - cum);
      break;
    }
  }
  return kappa;
}

Reduction trim(const LocalEstimateSet& set, double eta, int K, const MixingDistribution& init, const ReduceConfig& cfg) {
  set.validate();
  if (!(eta > 0.0 && eta < 1.0)) throw std::invalid_argument("trim: eta must lie in (0, 1)");
  if (init.order() != K) throw std::invalid_argument("trim: initial mixture order differs from K");
  std::vector<int> all(static_cast<std::size_t>(set.size()));
  std::iota(all.begin(), all.end(), 0);
  const auto atoms = pool(set, all);
  std::vector<double> masses;
  for (const auto& a : atoms) masses.push_back(a.mass);

  std::vector<Component> centres = init.components();
  std::vector<double> weights = init.weights();
  Assignment current = assign(atoms, centres, cfg.cost);
  auto trimmed_objective = [&](const Assignment& a, const std::vector<double>& kappa) {
    double s = 0.0;
    for (std::size_t g = 0; g < atoms.size(); ++g) s += kappa[g] * a.loss[g];
    return s;
  };
  std::vector<double> kappa = trim_masses(current.loss, masses, eta);
  Reduction out{init, 0, trimmed_objective(current, kappa), false, {trimmed_objective(current, kappa)}};
  for (int it = 1; it <= cfg.max_iters; ++it) {
    kappa = trim_masses(current.loss, masses, eta);
    std::vector<std::vector<Atom>> members(static_cast<std::size_t>(K));
    std::vector<double> kept(static_cast<std::size_t>(K), 0.0);
    for (std::size_t g = 0; g < atoms.size(); ++g) {
      if (kappa[g] <= 0.0) continue;
      const auto j = static_cast<std::size_t>(current.label[g]);
      members[j].push_back({kappa[g], atoms[g].component});
      kept[j] += kappa[g];
    }
    for (std::size_t j = 0; j < static_cast<std::size_t>(K); ++j) {
      if (!members[j].empty()) centres[j] = barycentre(cfg.cost, members[j]);
      weights[j] = kept[j] / (1.0 - eta);
    }
    Assignment next = assign(atoms, centres, cfg.cost);
    out.iterations = it;
    out.trace.push_back(trimmed_objective(next, trim_masses(next.loss, masses, eta)));
    const bool stable = next.label == current.label;
    current = std::move(next);
    if (stable) {
      out.converged = true;
      break;
    }
  }
  out.objective = out.trace.back();
  out.estimate = MixingDistribution(normalised(std::move(weights)), std::move(centres));
  return out;
}

}  // namespace byzmix

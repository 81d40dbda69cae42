#include <doctest.h>

#include <algorithm>
#include <numeric>

#include <boost/math/tools/minima.hpp>

#include "byzmix/aggregation.hpp"
#include "byzmix/byzantine.hpp"
#include "support.hpp"

using namespace byzmix;
using namespace byzmix::testing;

namespace {

LocalEstimateSet set_of(std::vector<MixingDistribution> estimates) {
  LocalEstimateSet s;
  s.estimates = std::move(estimates);
  return s;
}

std::vector<int> iota_vec(int n) {
  std::vector<int> v(static_cast<std::size_t>(n));
  std::iota(v.begin(), v.end(), 0);
  return v;
}

MixingDistribution single(double mu, double var) {
  return MixingDistribution({1.0}, std::vector<GaussianComponent>{gauss1(mu, var)});
}

}  // namespace

TEST_CASE("pairwise distances") {
  Rng rng(1);
  const auto g = random_gaussian_mixture(2, 2, rng);
  CHECK(pairwise_distances(set_of({g, g, g})).isZero(0.0));

  const auto h = random_gaussian_mixture(2, 2, rng);
  const Matrix d2 = pairwise_distances(set_of({g, h}));
  CHECK(d2(0, 1) == l2_distance(g, h));
  CHECK(d2(1, 0) == d2(0, 1));
  CHECK(d2(0, 0) == 0.0);

  const Matrix d3 = pairwise_distances(set_of({single(0, 1), single(1, 1), single(2, 1)}));
  CHECK(d3(0, 2) > d3(0, 1));
  CHECK(d3(0, 2) > d3(1, 2));
}

TEST_CASE("COAT selection") {
  SUBCASE("row statistics") {
    Matrix d(3, 3);
    d << 0.0, 0.1, 0.5, 0.1, 0.0, 0.2, 0.5, 0.2, 0.0;
    // ceil(3/2) = 2nd smallest per row: 0.1, 0.1, 0.2. Lowest index wins the tie.
    const auto c = coat_from_distances(d);
    CHECK(c.medians == std::vector<double>{0.1, 0.1, 0.2});
    CHECK(c.index == 0);
    CHECK(c.radius == 0.1);

    Matrix e(3, 3);
    e << 0.0, 0.1, 0.1, 0.1, 0.0, 0.3, 0.1, 0.3, 0.0;
    // Row medians 0.1, 0.3, 0.3 after the self-distance.
    CHECK(coat_from_distances(e).index == 0);
  }
  SUBCASE("identical estimates") {
    Rng rng(2);
    const auto g = random_gaussian_mixture(2, 1, rng);
    const auto c = coat(set_of({g, g, g, g}));
    CHECK(c.index == 0);
    CHECK(c.radius == 0.0);
    CHECK(filter(c, 1.0).size() == 4);
  }
  SUBCASE("an outlier is never selected") {
    std::vector<MixingDistribution> est;
    for (int i = 0; i < 4; ++i) est.push_back(single(0.05 * i, 1));
    est.insert(est.begin() + 2, single(50, 1));
    const auto c = coat(set_of(est));
    CHECK(c.index != 2);
  }
  SUBCASE("scaling the distances keeps the index") {
    Rng rng(3);
    for (int t = 0; t < 50; ++t) {
      const int m = 3 + t % 8;
      Matrix d = Matrix::Zero(m, m);
      for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j) d(i, j) = d(j, i) = uniform(rng, 0, 1);
      CHECK(coat_from_distances(d).index == coat_from_distances(d * uniform(rng, 0.01, 100)).index);
    }
  }
}

TEST_CASE("filter") {
  Rng rng(4);
  for (int t = 0; t < 30; ++t) {
    const int m = 4 + t % 7;
    std::vector<MixingDistribution> est;
    for (int i = 0; i < m; ++i) est.push_back(random_gaussian_mixture(2, 1, rng));
    const auto c = coat(set_of(est));
    const auto s1 = filter(c, 1.0);
    CHECK(static_cast<int>(s1.size()) >= (m + 1) / 2);
    CHECK(std::find(s1.begin(), s1.end(), c.index) != s1.end());
    std::vector<int> prev = s1;
    for (double rho : {1.3, 2.0, 6.0}) {
      const auto s = filter(c, rho);
      CHECK(std::includes(s.begin(), s.end(), prev.begin(), prev.end()));
      prev = s;
    }
    CHECK(filter(c, kRhoUnbounded) == iota_vec(m));
  }
}

TEST_CASE("KL barycentre") {
  const std::vector<Atom> one{{0.3, gauss1(1, 2)}};
  CHECK(kl_barycentre(one) == gauss1(1, 2));

  const std::vector<Atom> pair{{0.5, gauss1(0, 1)}, {0.5, gauss1(2, 1)}};
  const auto b = kl_barycentre(pair);
  CHECK(b.mean()(0) == doctest::Approx(1.0));
  CHECK(b.covariance()(0, 0) == doctest::Approx(2.0));

  // Direct minimisation of sum_g mass_g KL(f_g || N(mu, var)) for the variance
  // at the optimal mean.
  const auto objective = [&](double var) {
    double s = 0.0;
    for (const auto& a : pair) s += a.mass * kl_gaussian(std::get<GaussianComponent>(a.component), gauss1(1.0, var));
    return s;
  };
  const double best_var = boost::math::tools::brent_find_minima(objective, 0.1, 10.0, 40).first;
  CHECK(best_var == doctest::Approx(2.0).epsilon(1e-6));

  Rng rng(5);
  const auto c = random_gaussian(3, rng);
  const std::vector<Atom> same{{0.2, c}, {0.7, c}};
  const auto bs = kl_barycentre(same);
  CHECK((bs.mean() - c.mean()).norm() < 1e-12);
  CHECK((bs.covariance() - c.covariance()).norm() < 1e-12);

  const std::vector<Atom> empty{{0.0, gauss1(0, 1)}};
  CHECK_THROWS(kl_barycentre(empty));
}

TEST_CASE("squared Euclidean barycentre is the parameter mean") {
  const std::vector<Atom> atoms{{1.0, GammaComponent(2, 1)}, {3.0, GammaComponent(6, 5)}};
  const auto b = std::get<GammaComponent>(barycentre(CostKind::SquaredEuclidean, atoms));
  CHECK(b.shape() == doctest::Approx(5.0));
  CHECK(b.scale() == doctest::Approx(4.0));
}

TEST_CASE("mixture reduction fixed points") {
  Rng rng(6);
  const auto g = random_gaussian_mixture(3, 2, rng, 8.0);
  std::vector<Atom> atoms;
  for (int k = 0; k < 3; ++k) atoms.push_back({g.weight(k), g.component(k)});
  const auto r = mm_reduce(atoms, 3, g, ReduceConfig{});
  CHECK(r.objective == 0.0);
  CHECK(r.iterations == 1);
  CHECK(r.estimate == g);

  const auto copies = set_of({g, g, g, g, g});
  const auto pooled = pool(copies, iota_vec(5));
  const auto rc = mm_reduce(pooled, 3, g, ReduceConfig{});
  CHECK(l2_distance(rc.estimate, g) < 1e-7);
  for (int k = 0; k < 3; ++k) CHECK(rc.estimate.weight(k) == doctest::Approx(g.weight(k)).epsilon(1e-12));
}

TEST_CASE("four-atom reduction reaches the exhaustive optimum") {
  std::vector<Atom> atoms;
  for (double mu : {0.0, 0.1, 5.0, 5.1}) atoms.push_back({0.25, gauss1(mu, 1)});
  const MixingDistribution init({0.5, 0.5}, std::vector<GaussianComponent>{gauss1(0.2, 1), gauss1(4.8, 1)});
  const auto r = mm_reduce(atoms, 2, init, ReduceConfig{});
  CHECK(r.estimate.gaussian(0).mean()(0) == doctest::Approx(0.05));
  CHECK(r.estimate.gaussian(1).mean()(0) == doctest::Approx(5.05));

  // Every nonempty two-way split; the optimum puts {0, 0.1} and {5, 5.1} together.
  double best = std::numeric_limits<double>::infinity();
  int best_mask = -1;
  for (int mask = 1; mask < 15; ++mask) {
    std::vector<Atom> left;
    std::vector<Atom> right;
    for (int g = 0; g < 4; ++g) ((mask >> g) & 1 ? right : left).push_back(atoms[static_cast<std::size_t>(g)]);
    const auto bl = kl_barycentre(left);
    const auto br = kl_barycentre(right);
    double v = 0.0;
    for (const auto& a : left) v += a.mass * kl_gaussian(std::get<GaussianComponent>(a.component), bl);
    for (const auto& a : right) v += a.mass * kl_gaussian(std::get<GaussianComponent>(a.component), br);
    if (v < best) {
      best = v;
      best_mask = mask;
    }
  }
  CHECK((best_mask == 0b1100 || best_mask == 0b0011));
  CHECK(r.objective == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("MM objective never increases") {
  Rng rng(7);
  for (int t = 0; t < 40; ++t) {
    const bool gamma = t % 2 == 1;
    std::vector<MixingDistribution> est;
    for (int i = 0; i < 6; ++i) est.push_back(gamma ? random_gamma_mixture(3, rng) : random_gaussian_mixture(3, 2, rng));
    const auto set = set_of(est);
    ReduceConfig cfg;
    cfg.cost = gamma ? CostKind::SquaredEuclidean : CostKind::KL;
    const auto r = mm_reduce(pool(set, iota_vec(6)), 3, est.front(), cfg);
    for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i] <= r.trace[i - 1] + 1e-10);
    double s = 0.0;
    for (double w : r.estimate.weights()) s += w;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("restarts never do worse than the first run") {
  Rng rng(8);
  std::vector<MixingDistribution> est;
  for (int i = 0; i < 6; ++i) est.push_back(random_gaussian_mixture(3, 1, rng, 6.0));
  const auto atoms = pool(set_of(est), iota_vec(6));
  ReduceConfig once;
  ReduceConfig many;
  many.restarts = 8;
  CHECK(mm_reduce(atoms, 3, est[0], many).objective <= mm_reduce(atoms, 3, est[0], once).objective + 1e-12);
}

TEST_CASE("DFMR") {
  Rng rng(9);
  const auto g = random_gaussian_mixture(2, 2, rng);

  SUBCASE("identical estimates") {
    const auto r = dfmr(set_of({g, g, g, g}), 1.3, 2, ReduceConfig{});
    CHECK(l2_distance(r.reduction.estimate, g) < 1e-7);
  }
  SUBCASE("mean-failed estimates are filtered out") {
    std::vector<MixingDistribution> est;
    for (int i = 0; i < 10; ++i) {
      est.push_back(MixingDistribution(g.weights(), std::vector<GaussianComponent>{
          GaussianComponent(g.gaussian(0).mean() + Vector::Constant(2, uniform(rng, -0.05, 0.05)), g.gaussian(0).covariance()),
          GaussianComponent(g.gaussian(1).mean() + Vector::Constant(2, uniform(rng, -0.05, 0.05)), g.gaussian(1).covariance())}));
    }
    const std::vector<int> bad{1, 4, 7};
    for (int i : bad) {
      Rng noise(static_cast<std::uint64_t>(i));
      est[static_cast<std::size_t>(i)] = inject_mean_failure(est[static_cast<std::size_t>(i)], noise);
    }
    const auto set = set_of(est);
    const auto r = dfmr(set, 1.3, 2, ReduceConfig{});
    for (int i : bad) CHECK(std::find(r.selected.begin(), r.selected.end(), i) == r.selected.end());
    CHECK(l2_distance(r.reduction.estimate, g) < 0.05);
  }
  SUBCASE("unbounded radius equals vanilla reduction") {
    std::vector<MixingDistribution> est;
    for (int i = 0; i < 7; ++i) est.push_back(random_gaussian_mixture(2, 2, rng));
    const auto set = set_of(est);
    const auto r = dfmr(set, kRhoUnbounded, 2, ReduceConfig{});
    const auto c = coat(set);
    const auto v = mm_reduce(pool(set, iota_vec(7)), 2, est[static_cast<std::size_t>(c.index)], ReduceConfig{});
    CHECK(r.reduction.estimate == v.estimate);
  }
}

TEST_CASE("DFMR is label-switching robust") {
  Rng rng(10);
  std::vector<MixingDistribution> est;
  const auto g = random_gaussian_mixture(3, 2, rng, 6.0);
  for (int i = 0; i < 8; ++i) {
    std::vector<GaussianComponent> comps;
    for (int k = 0; k < 3; ++k)
      comps.emplace_back(g.gaussian(k).mean() + Vector::Constant(2, uniform(rng, -0.2, 0.2)), g.gaussian(k).covariance());
    est.emplace_back(g.weights(), comps);
  }
  const auto base = dfmr(set_of(est), 1.3, 3, ReduceConfig{}).reduction.estimate;
  auto shuffled = est;
  for (std::size_t i = 1; i < shuffled.size(); i += 2) {
    const std::vector<int> perm{2, 0, 1};
    shuffled[i] = shuffled[i].permuted(perm);
  }
  const auto other = dfmr(set_of(shuffled), 1.3, 3, ReduceConfig{}).reduction.estimate;
  CHECK(align(other, base).residual < 1e-8);
}

TEST_CASE("trimming rule") {
  const std::vector<double> losses{0.1, 0.2, 10.0};
  const std::vector<double> masses{0.4, 0.4, 0.2};
  const auto k = trim_masses(losses, masses, 0.2);
  CHECK(k[0] == 0.4);
  CHECK(k[1] == 0.4);
  CHECK(k[2] == 0.0);

  const auto split = trim_masses(losses, masses, 0.5);
  CHECK(split[0] == doctest::Approx(0.4));
  CHECK(split[1] == doctest::Approx(0.1));
  CHECK(split[2] == 0.0);

  // Sorting uses the losses, not the input order.
  const std::vector<double> shuffled_losses{10.0, 0.1, 0.2};
  const std::vector<double> shuffled_masses{0.2, 0.4, 0.4};
  const auto ks = trim_masses(shuffled_losses, shuffled_masses, 0.2);
  CHECK(ks[0] == 0.0);
}

TEST_CASE("TRIM") {
  Rng rng(11);
  const auto g = random_gaussian_mixture(2, 1, rng, 6.0);

  SUBCASE("identical atoms") {
    const MixingDistribution one({1.0}, std::vector<GaussianComponent>{gauss1(2, 3)});
    for (double eta : {0.1, 0.5, 0.9}) {
      const auto r = trim(set_of({one, one, one}), eta, 1, one, ReduceConfig{});
      CHECK(l2_distance(r.estimate, one) < 1e-7);
    }
  }
  SUBCASE("vanishing trimming level matches the untrimmed reduction") {
    std::vector<MixingDistribution> est;
    for (int i = 0; i < 6; ++i) est.push_back(random_gaussian_mixture(2, 1, rng, 6.0));
    const auto set = set_of(est);
    const auto t = trim(set, 1e-9, 2, est[0], ReduceConfig{});
    const auto m = mm_reduce(pool(set, iota_vec(6)), 2, est[0], ReduceConfig{});
    CHECK(l2_distance(t.estimate, m.estimate) < 1e-6);
  }
  SUBCASE("weights on the simplex") {
    std::vector<MixingDistribution> est;
    for (int i = 0; i < 6; ++i) est.push_back(random_gaussian_mixture(2, 1, rng, 6.0));
    const auto r = trim(set_of(est), 0.5, 2, est[0], ReduceConfig{});
    double s = 0.0;
    for (double w : r.estimate.weights()) s += w;
    CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
  }
  CHECK_THROWS(trim(set_of({g, g}), 0.0, 2, g, ReduceConfig{}));
}

TEST_CASE("estimate sets are validated") {
  Rng rng(12);
  const auto g = random_gaussian_mixture(2, 1, rng);
  const auto h = random_gaussian_mixture(3, 1, rng);
  CHECK_THROWS(coat(set_of({g, h})));
  CHECK_THROWS(coat(set_of({g})));
  LocalEstimateSet s = set_of({g, g});
  s.machine_weights = {0.3, 0.3};
  CHECK_THROWS(s.validate());
}

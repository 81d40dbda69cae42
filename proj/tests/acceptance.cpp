// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any FAIL.
// Tolerances and experiment sizes are fixed here.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "byzmix/aggregation.hpp"
#include "byzmix/config.hpp"
#include "byzmix/divergences.hpp"
#include "byzmix/harness.hpp"
#include "byzmix/local_em.hpp"
#include "byzmix/metrics.hpp"
#include "byzmix/rng.hpp"
#include "byzmix/transport.hpp"
#include "support.hpp"

using namespace byzmix;
using namespace byzmix::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "byzmix_acceptance" / name;
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// Median W1 for one (method, failure, rho) cell; -1 if the cell is missing or short.
double cell(const std::vector<SummaryRow>& rows, const std::string& method, const std::string& failure,
            std::optional<double> rho, int reps) {
  for (const auto& r : rows)
    if (r.method == method && r.failure == failure && r.rho == rho) return r.count == reps ? r.w1_median : -1.0;
  return -1.0;
}

// Separated two-component planar mixture shared by the scaling criteria.
MixingDistribution planar_truth() {
  Matrix s1(2, 2);
  s1 << 1.0, 0.0, 0.0, 0.5;
  Matrix s2(2, 2);
  s2 << 1.5, 0.3, 0.3, 0.8;
  Vector m1(2);
  m1 << -3.0, 0.0;
  Vector m2(2);
  m2 << 3.0, 1.0;
  return MixingDistribution({0.4, 0.6}, std::vector<GaussianComponent>{GaussianComponent(m1, s1), GaussianComponent(m2, s2)});
}

ExperimentConfig planar_config(int m, int n, std::uint64_t seed) {
  ExperimentConfig cfg;
  cfg.family = Family::Gaussian;
  cfg.K = 2;
  cfg.d = 2;
  cfg.m = m;
  cfg.n = n;
  cfg.failures = {FailureKind::Mean};
  cfg.methods = {Method::Vanilla};
  cfg.seed = seed;
  cfg.test_size = 2000;
  cfg.timings = false;
  cfg.validate();
  return cfg;
}

Outcome closed_form_fidelity() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const auto a = random_gaussian(1, rng);
    const auto b = random_gaussian(1, rng);
    const double ma = a.mean()(0), va = a.covariance()(0, 0);
    const double mb = b.mean()(0), vb = b.covariance()(0, 0);
    const double quad = integrate([&](double x) { return normal_pdf(x, ma, va) * normal_pdf(x, mb, vb); }, -60, 60,
                                  {std::min(ma, mb), std::max(ma, mb)});
    worst = std::max(worst, std::abs(l2_cross_integral(a, b) - quad));
  }
  for (int t = 0; t < 200; ++t) {
    const auto a = random_gamma(rng);
    const auto b = random_gamma(rng);
    const double quad = integrate_positive([&](double x) {
      return gamma_pdf(x, a.shape(), a.scale()) * gamma_pdf(x, b.shape(), b.scale());
    });
    worst = std::max(worst, std::abs(l2_cross_integral(a, b) - quad));
  }
  for (int t = 0; t < 100; ++t) {
    const bool gamma = t % 2 == 1;
    const auto g = gamma ? random_gamma_mixture(3, rng) : random_gaussian_mixture(3, 1, rng);
    const auto h = gamma ? random_gamma_mixture(2, rng) : random_gaussian_mixture(2, 1, rng);
    const auto sq = [&](double x) { return std::pow(mixture_pdf(g, x) - mixture_pdf(h, x), 2); };
    double quad = 0.0;
    if (gamma) {
      quad = integrate_positive(sq);
    } else {
      std::vector<double> cuts;
      for (const auto* mix : {&g, &h})
        for (const auto& c : mix->components()) cuts.push_back(std::get<GaussianComponent>(c).mean()(0));
      std::sort(cuts.begin(), cuts.end());
      quad = integrate(sq, -60, 60, cuts);
    }
    const double dist = l2_distance(g, h);
    worst = std::max({worst, std::abs(dist * dist - quad), std::abs(dist - std::sqrt(quad))});
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-6 && secs < 10.0, fmt("max abs error %.3g, %.2f s", worst, secs)};
}

Outcome transport_exactness() {
  Rng rng(202);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const int K = 2 + t % 2;
    const auto a = random_simplex(K, rng);
    const auto b = random_simplex(K, rng);
    Matrix c(K, K);
    for (int i = 0; i < K; ++i)
      for (int j = 0; j < K; ++j) c(i, j) = uniform(rng, 0, 10);
    worst = std::max(worst, std::abs(solve_transport(a, b, c).cost - vertex_enumeration(a, b, c)));
  }
  double self = 0.0;
  for (int t = 0; t < 50; ++t) {
    const int K = 2 + t % 4;
    const auto g = t % 2 ? random_gamma_mixture(K, rng) : random_gaussian_mixture(K, 3, rng);
    std::vector<int> perm(static_cast<std::size_t>(K));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    self = std::max(self, w1(g, g.permuted(perm)));
  }
  return {worst <= 1e-9 && self <= 1e-9, fmt("max cost gap %.3g, max self distance %.3g", worst, self)};
}

Outcome monotonicity() {
  Rng rng(303);
  int em_bad = 0;
  int mm_bad = 0;
  for (int t = 0; t < 100; ++t) {
    const bool gamma = t % 2 == 1;
    const int K = 2 + t % 3;
    const auto truth = gamma ? random_gamma_mixture(K, rng) : random_gaussian_mixture(K, 1 + t % 3, rng);
    const auto init = gamma ? random_gamma_mixture(K, rng) : random_gaussian_mixture(K, truth.dim(), rng);
    const auto data = sample(truth, 400, rng);
    EmConfig cfg;
    cfg.max_iters = 300;
    const auto res = fit(data, K, init, cfg);
    for (std::size_t i = 1; i < res.trace.size(); ++i) em_bad += res.trace[i] < res.trace[i - 1] - 1e-8;
  }
  for (int t = 0; t < 100; ++t) {
    const bool gamma = t % 2 == 1;
    const int K = 2 + t % 3;
    const int d = 1 + t % 3;
    LocalEstimateSet set;
    for (int i = 0; i < 8; ++i)
      set.estimates.push_back(gamma ? random_gamma_mixture(K, rng) : random_gaussian_mixture(K, d, rng));
    std::vector<int> all(8);
    std::iota(all.begin(), all.end(), 0);
    const auto pooled = pool(set, all);
    const auto init = gamma ? random_gamma_mixture(K, rng) : random_gaussian_mixture(K, d, rng);
    ReduceConfig rc;
    rc.cost = default_cost(gamma ? Family::Gamma : Family::Gaussian);
    const auto red = mm_reduce(pooled, K, init, rc);
    for (std::size_t i = 1; i < red.trace.size(); ++i) mm_bad += red.trace[i] > red.trace[i - 1] + 1e-10;
  }
  return {em_bad == 0 && mm_bad == 0, fmt("EM violations %d, MM violations %d", em_bad, mm_bad)};
}

Outcome sqrt_n_scaling() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto truth = planar_truth();
  const auto med = [&](int n) {
    const auto cfg = planar_config(10, n, 404);
    std::vector<double> w;
    for (int rep = 0; rep < 50; ++rep) {
      const auto rs = run_repetition(cfg, truth, rep);
      if (rs.size() != 1 || !rs[0].error.empty()) return -1.0;
      w.push_back(rs[0].w1);
    }
    return median(w);
  };
  const double small = med(4000);
  const double large = med(16000);
  const double ratio = small / large;
  const double secs = seconds_since(t0);
  const bool ok = small > 0 && large > 0 && ratio >= 1.4 && ratio <= 2.8 && secs < 300.0;
  return {ok, fmt("median W1 %.4g (N=4e4) / %.4g (N=1.6e5) = %.3f, %.1f s", small, large, ratio, secs)};
}

Outcome distance_concentration() {
  const auto truth = planar_truth();
  const auto med = [&](int n) {
    const auto cfg = planar_config(50, n, 505);
    std::vector<double> dist;
    for (int rep = 0; rep < 20; ++rep) {
      const auto fits = fit_local_estimates(cfg, truth, repetition_seed(cfg.seed, rep));
      for (const auto& e : fits.estimates) dist.push_back(l2_distance(e, truth));
    }
    return median(dist);
  };
  const double small = med(2000);
  const double large = med(8000);
  const double ratio = small / large;
  return {ratio >= 1.5 && ratio <= 2.7, fmt("median distance %.4g (n=2000) / %.4g (n=8000) = %.3f", small, large, ratio)};
}

constexpr int kByzReps = 50;

ExperimentConfig byzantine_config(const fs::path& out) {
  ExperimentConfig cfg;
  cfg.family = Family::Gaussian;
  cfg.K = 3;
  cfg.d = 5;
  cfg.m = 50;
  cfg.n = 2000;
  cfg.repetitions = kByzReps;
  cfg.alphas = {0.3};
  cfg.failures = {FailureKind::Mean, FailureKind::Weight};
  cfg.methods = {Method::Vanilla, Method::Dfmr, Method::Trim, Method::Oracle};
  cfg.rhos = {1.0, 1.3, 2.0, 3.0, 6.0};
  cfg.seed = 606;
  cfg.timings = false;
  cfg.output = out;
  cfg.validate();
  return cfg;
}

struct ByzantineRun {
  std::vector<SummaryRow> rows;
  double seconds = 0.0;
  fs::path csv;
};

ByzantineRun run_byzantine(const std::string& name) {
  const auto cfg = byzantine_config(scratch(name));
  std::ostringstream log;
  const auto t0 = std::chrono::steady_clock::now();
  const auto records = run_experiment(cfg, log);
  return {summarize(records), seconds_since(t0), cfg.output / "results.csv"};
}

Outcome byzantine_tolerance(const ByzantineRun& run) {
  const double van = cell(run.rows, "vanilla", "mean", std::nullopt, kByzReps);
  const double dfmr = cell(run.rows, "dfmr", "mean", 1.3, kByzReps);
  const double orc = cell(run.rows, "oracle", "mean", std::nullopt, kByzReps);
  const bool ok = van > 0 && dfmr > 0 && orc > 0 && van >= 5 * dfmr && dfmr <= 1.5 * orc && run.seconds < 900.0;
  return {ok, fmt("median W1 vanilla %.4g, dfmr(1.3) %.4g, oracle %.4g; %.1f s", van, dfmr, orc, run.seconds)};
}

Outcome trim_weakness(const ByzantineRun& run) {
  const double tr = cell(run.rows, "trim", "weight", std::nullopt, kByzReps);
  const double dfmr = cell(run.rows, "dfmr", "weight", 1.3, kByzReps);
  return {tr > 0 && dfmr > 0 && tr > dfmr, fmt("median W1 trim %.4g, dfmr(1.3) %.4g", tr, dfmr)};
}

Outcome rho_sweep(const ByzantineRun& run) {
  std::string detail = "median W1 by rho:";
  std::vector<double> w;
  for (double rho : {1.0, 1.3, 2.0, 3.0, 6.0}) {
    w.push_back(cell(run.rows, "dfmr", "weight", rho, kByzReps));
    detail += fmt(" %g->%.4g", rho, w.back());
  }
  const bool ok = std::all_of(w.begin(), w.end(), [](double x) { return x >= 0; }) && w[1] <= w[0] && w[1] <= w[4];
  return {ok, detail};
}

Outcome gamma_preset() {
  auto cfg = load_config(fs::path(BYZMIX_SOURCE_DIR) / "configs" / "gamma_preset.cfg");
  cfg.output = scratch("gamma");
  cfg.timings = false;
  std::ostringstream log;
  const auto rows = summarize(run_experiment(cfg, log));
  const double dfmr = cell(rows, "dfmr", "shape", 2.0, cfg.repetitions);
  const double orc = cell(rows, "oracle", "shape", std::nullopt, cfg.repetitions);
  const bool ok = cfg.m * cfg.n == (1 << 15) && dfmr > 0 && orc > 0 && dfmr <= 1.5 * orc;
  return {ok, fmt("median W1 dfmr(2.0) %.4g, oracle %.4g, ratio %.3f", dfmr, orc, dfmr / orc)};
}

Outcome determinism(const ByzantineRun& first) {
  const auto second = run_byzantine("byzantine_repeat");
  const std::string a = slurp(first.csv);
  const std::string b = slurp(second.csv);
  return {!a.empty() && a == b, fmt("%zu bytes vs %zu bytes, %s", a.size(), b.size(), a == b ? "identical" : "differ")};
}

}  // namespace

int main() {
  int failures = 0;
  const auto report = [&](int id, const char* name, const std::function<Outcome()>& body) {
    Outcome o;
    try {
      o = body();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s  %2d %-28s %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
  };

  report(1, "closed-form fidelity", closed_form_fidelity);
  report(2, "transport exactness", transport_exactness);
  report(3, "EM/MM monotonicity", monotonicity);
  report(4, "sqrt-N scaling", sqrt_n_scaling);
  report(5, "distance concentration", distance_concentration);

  std::optional<ByzantineRun> byz;
  std::string byz_error;
  try {
    byz = run_byzantine("byzantine");
  } catch (const std::exception& e) {
    byz_error = e.what();
  }
  const auto needs_byz = [&](auto f) {
    return [&, f]() -> Outcome {
      if (!byz) return {false, "shared run failed: " + byz_error};
      return f(*byz);
    };
  };
  report(6, "byzantine tolerance", needs_byz(byzantine_tolerance));
  report(7, "weight failure vs TRIM", needs_byz(trim_weakness));
  report(8, "rho sweep endpoints", needs_byz(rho_sweep));
  report(9, "gamma preset", gamma_preset);
  report(10, "determinism", needs_byz(determinism));

  std::printf("%d of 10 criteria failed\n", failures);
  fs::remove_all(fs::temp_directory_path() / "byzmix_acceptance");
  return failures == 0 ? 0 : 1;
}

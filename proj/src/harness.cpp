#include "byzmix/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <exception>
#include <fstream>
#include <map>
#include <ostream>
#include <thread>
#include <tuple>

#include <Eigen/QR>

#include "byzmix/aggregation.hpp"
#include "byzmix/byzantine.hpp"
#include "byzmix/local_em.hpp"
#include "byzmix/serialize.hpp"

namespace byzmix {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

std::uint64_t bits_of(double x) {
  std::uint64_t u = 0;
  std::memcpy(&u, &x, sizeof u);
  return u;
}

// Run body(i) for i in [0, count) on `threads` workers.
template <class Body>
void parallel_for(int count, int threads, Body body) {
  const int workers = std::max(1, std::min(threads, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = next++; i < count; i = next++) body(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
        next = count;
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::string format_double(const char* fmt, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, x);
  return buf;
}

double quantile(std::vector<double> xs, double q) {
  std::sort(xs.begin(), xs.end());
  const double pos = q * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

ReduceConfig reduce_config(const ExperimentConfig& cfg, std::uint64_t seed) {
  ReduceConfig rc;
  rc.cost = default_cost(cfg.family);
  rc.tol = cfg.mm_tol;
  rc.max_iters = cfg.mm_max_iters;
  rc.restarts = cfg.mm_restarts;
  rc.seed = seed;
  return rc;
}

std::filesystem::path scenario_dir(const ExperimentConfig& cfg, int rep, FailureKind kind, double alpha) {
  return cfg.output / "estimates" /
         ("rep" + std::to_string(rep) + "_" + std::string(failure_name(kind)) + "_a" + format_double("%g", alpha));
}

}  // namespace

GeneratedMixture generate_mixture(const MixtureSpec& spec, Rng& rng) {
  if (spec.K < 1 || spec.d < 1) throw std::invalid_argument("generate_mixture: K and d must be >= 1");
  if (!(spec.weight_floor >= 0.0) || spec.weight_floor * spec.K > 1.0)
    throw std::invalid_argument("generate_mixture: weight floor times K exceeds 1");
  if (!(spec.mean_box > 0.0)) throw std::invalid_argument("generate_mixture: mean box must be positive");
  if (!(spec.eig_min > 0.0) || !(spec.eig_max >= spec.eig_min))
    throw std::invalid_argument("generate_mixture: need 0 < eig_min <= eig_max");

  const auto raw = sample_dirichlet(std::vector<double>(static_cast<std::size_t>(spec.K), 1.0), rng);
  std::vector<double> weights(raw.size());
  const double free_mass = 1.0 - spec.K * spec.weight_floor;
  for (std::size_t k = 0; k < raw.size(); ++k) weights[k] = spec.weight_floor + free_mass * raw[k];
  double total = 0.0;
  for (double w : weights) total += w;
  for (double& w : weights) w /= total;

  std::uniform_real_distribution<double> box(-spec.mean_box, spec.mean_box);
  std::uniform_real_distribution<double> log_eig(std::log(spec.eig_min), std::log(spec.eig_max));
  std::normal_distribution<double> normal;
  std::vector<GaussianComponent> comps;
  for (int k = 0; k < spec.K; ++k) {
    Vector mean(spec.d);
    for (int j = 0; j < spec.d; ++j) mean(j) = box(rng);
    Matrix z(spec.d, spec.d);
    for (int i = 0; i < spec.d; ++i)
      for (int j = 0; j < spec.d; ++j) z(i, j) = normal(rng);
    Eigen::HouseholderQR<Matrix> qr(z);
    Matrix q = qr.householderQ();
    // Sign fix makes Q Haar distributed.
    const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < spec.d; ++j)
      if (r(j, j) < 0) q.col(j) *= -1.0;
    Vector eig(spec.d);
    for (int j = 0; j < spec.d; ++j) eig(j) = std::exp(log_eig(rng));
    Matrix cov = q * eig.asDiagonal() * q.transpose();
    cov = 0.5 * (cov + cov.transpose()).eval();
    comps.emplace_back(std::move(mean), std::move(cov));
  }
  GeneratedMixture out{MixingDistribution(std::move(weights), std::move(comps)), std::nullopt};
  if (spec.K >= 2 && spec.overlap_draws > 0) out.overlap = max_omega(out.mixture, spec.overlap_draws, rng);
  return out;
}

std::uint64_t repetition_seed(std::uint64_t master, int rep) noexcept {
  return derive_seed(master, {tag("repetition"), static_cast<std::uint64_t>(rep)});
}

MixingDistribution truth_for(const ExperimentConfig& cfg, int rep) {
  if (cfg.truth_file) return read_mixture(*cfg.truth_file);
  MixtureSpec spec{cfg.K, cfg.d, cfg.weight_floor, cfg.mean_box, cfg.eig_min, cfg.eig_max, 0};
  const std::uint64_t base = cfg.truth_per_repetition ? repetition_seed(cfg.seed, rep) : cfg.seed;
  Rng rng = make_rng(base, {tag("truth")});
  return generate_mixture(spec, rng).mixture;
}

LocalFits fit_local_estimates(const ExperimentConfig& cfg, const MixingDistribution& truth, std::uint64_t rep_seed) {
  if (truth.order() != cfg.K || truth.dim() != cfg.d || truth.family() != cfg.family)
    throw std::invalid_argument("ground truth does not match the configured family, K and d");
  const auto start = Clock::now();
  Rng data_rng = make_rng(rep_seed, {tag("data")});
  const Dataset pooled = sample(truth, cfg.n * cfg.m, data_rng);
  Rng part_rng = make_rng(rep_seed, {tag("partition")});
  const std::vector<Dataset> shards = partition(pooled, cfg.m, part_rng);

  std::vector<std::optional<MixingDistribution>> fits(static_cast<std::size_t>(cfg.m));
  parallel_for(cfg.m, cfg.threads, [&](int i) {
    const Dataset& shard = shards[static_cast<std::size_t>(i)];
    std::optional<MixingDistribution> init;
    if (cfg.init == InitPolicy::Truth) {
      init = truth;
    } else {
      Rng init_rng = make_rng(rep_seed, {tag("init"), static_cast<std::uint64_t>(i)});
      init = kmeanspp_init(shard, cfg.K, cfg.family, cfg.em, init_rng);
    }
    fits[static_cast<std::size_t>(i)] = fit(shard, cfg.K, *init, cfg.em).estimate;
  });

  LocalFits out;
  for (auto& f : fits) out.estimates.push_back(std::move(*f));
  out.fit_ms = elapsed_ms(start);
  return out;
}

std::vector<ResultRecord> run_repetition(const ExperimentConfig& cfg, const MixingDistribution& truth, int rep) {
  const std::uint64_t rep_seed = repetition_seed(cfg.seed, rep);
  std::vector<ResultRecord> out;
  try {
    const LocalFits local = fit_local_estimates(cfg, truth, rep_seed);
    Rng test_rng = make_rng(rep_seed, {tag("test")});
    const Dataset test = sample(truth, cfg.effective_test_size(), test_rng);
    const std::vector<int> truth_labels = cluster_assign(truth, test);
    const ReduceConfig rc = reduce_config(cfg, derive_seed(rep_seed, {tag("reduce")}));

    for (double alpha : cfg.alphas) {
      Rng select_rng = make_rng(rep_seed, {tag("failure-set"), bits_of(alpha)});
      const std::vector<int> failed = select_failure_set(cfg.m, alpha, select_rng);
      for (FailureKind kind : cfg.failures) {
        LocalEstimateSet set;
        set.estimates = local.estimates;
        set.failure_mask = std::vector<bool>(static_cast<std::size_t>(cfg.m), false);
        for (int i : failed) {
          Rng noise = make_rng(rep_seed, {tag("failure-noise"), static_cast<std::uint64_t>(kind),
                                          static_cast<std::uint64_t>(i)});
          set.estimates[static_cast<std::size_t>(i)] = inject_failure(local.estimates[static_cast<std::size_t>(i)], kind, noise);
          (*set.failure_mask)[static_cast<std::size_t>(i)] = true;
        }

        const auto coat_start = Clock::now();
        const CoatResult c = coat(set);
        const double coat_ms = elapsed_ms(coat_start);
        const MixingDistribution& coat_estimate = set.estimates[static_cast<std::size_t>(c.index)];

        std::vector<int> all(static_cast<std::size_t>(cfg.m));
        for (int i = 0; i < cfg.m; ++i) all[static_cast<std::size_t>(i)] = i;

        const auto emit = [&](Method method, std::optional<double> rho, const MixingDistribution& estimate,
                              double agg_ms) {
          ResultRecord r;
          r.rep = rep;
          r.method = std::string(method_name(method));
          r.failure = std::string(failure_name(kind));
          r.alpha = alpha;
          r.m = cfg.m;
          r.n = cfg.n;
          r.K = cfg.K;
          r.d = cfg.d;
          r.rho = rho;
          r.w1 = w1(estimate, truth);
          r.ari = ari(cluster_assign(estimate, test), truth_labels);
          r.fit_ms = cfg.timings ? local.fit_ms : 0.0;
          r.agg_ms = cfg.timings ? agg_ms : 0.0;
          out.push_back(std::move(r));
          if (cfg.dump_estimates) {
            std::string name(method_name(method));
            if (rho) name += "_rho" + format_double("%g", *rho);
            write_mixture(scenario_dir(cfg, rep, kind, alpha) / "aggregated" / (name + ".json"), estimate);
          }
        };

        if (cfg.dump_estimates) {
          const auto dir = scenario_dir(cfg, rep, kind, alpha) / "local";
          std::filesystem::create_directories(dir);
          std::filesystem::create_directories(dir.parent_path() / "aggregated");
          for (int i = 0; i < cfg.m; ++i) {
            char name[32];
            std::snprintf(name, sizeof name, "machine_%03d.json", i);
            write_mixture(dir / name, set.estimates[static_cast<std::size_t>(i)]);
          }
        }

        for (Method method : cfg.methods) {
          switch (method) {
            case Method::Vanilla: {
              const auto t = Clock::now();
              const auto atoms = pool(set, all);
              const auto red = mm_reduce(atoms, cfg.K, coat_estimate, rc);
              emit(method, std::nullopt, red.estimate, coat_ms + elapsed_ms(t));
              break;
            }
            case Method::Dfmr:
            case Method::Dfmr1: {
              const std::vector<double> rhos = method == Method::Dfmr ? cfg.rhos : std::vector<double>{1.0};
              for (double rho : rhos) {
                const auto t = Clock::now();
                const auto selected = filter(c, rho);
                const auto atoms = pool(set, selected);
                const auto red = mm_reduce(atoms, cfg.K, coat_estimate, rc);
                emit(method, rho, red.estimate, coat_ms + elapsed_ms(t));
              }
              break;
            }
            case Method::Trim: {
              const auto t = Clock::now();
              const auto red = trim(set, cfg.eta, cfg.K, coat_estimate, rc);
              emit(method, std::nullopt, red.estimate, coat_ms + elapsed_ms(t));
              break;
            }
            case Method::Coat:
              emit(method, std::nullopt, coat_estimate, coat_ms);
              break;
            case Method::Oracle: {
              const auto t = Clock::now();
              LocalEstimateSet honest;
              for (int i = 0; i < cfg.m; ++i)
                if (!(*set.failure_mask)[static_cast<std::size_t>(i)]) honest.estimates.push_back(set.estimates[static_cast<std::size_t>(i)]);
              std::vector<int> idx(honest.estimates.size());
              for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
              const MixingDistribution& start =
                  honest.size() >= 2 ? honest.estimates[static_cast<std::size_t>(coat(honest).index)] : honest.estimates.front();
              const auto red = mm_reduce(pool(honest, idx), cfg.K, start, rc);
              emit(method, std::nullopt, red.estimate, elapsed_ms(t));
              break;
            }
          }
        }
      }
    }
  } catch (const std::exception& e) {
    out.clear();
    ResultRecord r;
    r.rep = rep;
    r.method = "error";
    r.m = cfg.m;
    r.n = cfg.n;
    r.K = cfg.K;
    r.d = cfg.d;
    r.w1 = std::nan("");
    r.ari = std::nan("");
    r.error = e.what();
    out.push_back(std::move(r));
  }
  return out;
}

std::string csv_header() { return "rep,method,failure,alpha,m,n,K,d,rho,w1,ari,fit_ms,agg_ms"; }

std::string csv_row(const ResultRecord& r) {
  std::string s = std::to_string(r.rep) + "," + r.method + "," + r.failure + "," + format_double("%g", r.alpha) + "," +
                  std::to_string(r.m) + "," + std::to_string(r.n) + "," + std::to_string(r.K) + "," +
                  std::to_string(r.d) + ",";
  if (r.rho) s += format_double("%g", *r.rho);
  s += "," + format_double("%.17g", r.w1) + "," + format_double("%.17g", r.ari) + "," +
       format_double("%.3f", r.fit_ms) + "," + format_double("%.3f", r.agg_ms);
  return s;
}

std::vector<SummaryRow> summarize(const std::vector<ResultRecord>& records) {
  using Key = std::tuple<std::string, std::string, double, double>;
  std::map<Key, std::pair<std::vector<double>, std::vector<double>>> groups;
  std::vector<Key> order;
  for (const auto& r : records) {
    if (!r.error.empty()) continue;
    const Key key{r.method, r.failure, r.alpha, r.rho.value_or(-1.0)};
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.first.push_back(r.w1);
    it->second.second.push_back(r.ari);
  }
  std::vector<SummaryRow> rows;
  for (const auto& key : order) {
    const auto& [w1s, aris] = groups.at(key);
    SummaryRow row;
    row.method = std::get<0>(key);
    row.failure = std::get<1>(key);
    row.alpha = std::get<2>(key);
    if (std::get<3>(key) >= 0.0) row.rho = std::get<3>(key);
    row.count = static_cast<int>(w1s.size());
    row.w1_median = quantile(w1s, 0.5);
    row.w1_iqr = quantile(w1s, 0.75) - quantile(w1s, 0.25);
    row.ari_median = quantile(aris, 0.5);
    row.ari_iqr = quantile(aris, 0.75) - quantile(aris, 0.25);
    rows.push_back(std::move(row));
  }
  return rows;
}

void print_summary(std::ostream& out, const std::vector<SummaryRow>& rows) {
  char line[256];
  std::snprintf(line, sizeof line, "%-8s %-7s %6s %6s %5s %12s %12s %9s %9s\n", "method", "failure", "alpha", "rho",
                "reps", "w1_median", "w1_iqr", "ari_med", "ari_iqr");
  out << line;
  for (const auto& r : rows) {
    const std::string rho = r.rho ? format_double("%g", *r.rho) : "-";
    std::snprintf(line, sizeof line, "%-8s %-7s %6g %6s %5d %12.6g %12.6g %9.4f %9.4f\n", r.method.c_str(),
                  r.failure.c_str(), r.alpha, rho.c_str(), r.count, r.w1_median, r.w1_iqr, r.ari_median, r.ari_iqr);
    out << line;
  }
}

std::vector<ResultRecord> run_experiment(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  std::filesystem::create_directories(cfg.output);
  const auto csv_path = cfg.output / "results.csv";
  std::ofstream csv(csv_path, std::ios::trunc);
  if (!csv) throw std::runtime_error("cannot write to output directory " + cfg.output.string());

  csv << csv_header() << '\n';
  std::vector<ResultRecord> all;
  for (int rep = 0; rep < cfg.repetitions; ++rep) {
    const auto records = run_repetition(cfg, truth_for(cfg, rep), rep);
    for (const auto& r : records) {
      if (!r.error.empty()) log << "repetition " << rep << " failed: " << r.error << '\n';
      csv << csv_row(r) << '\n';
    }
    csv.flush();
    all.insert(all.end(), records.begin(), records.end());
  }
  if (!csv) throw std::runtime_error("error while writing " + csv_path.string());

  const auto rows = summarize(all);
  print_summary(log, rows);
  std::ofstream summary(cfg.output / "summary.txt", std::ios::trunc);
  print_summary(summary, rows);
  return all;
}

}  // namespace byzmix

// byzmix: simulation runner and inspection tools.
//
//   byzmix run <config> [--out DIR] [--seed S] [--threads N] [--methods a,b] [--alpha 0.1,0.2]
//   byzmix distances <estimates-dir>
//   byzmix reduce <estimates-dir> --k K [--method dfmr|vanilla|trim|coat] [--rho R] [--eta E] [-o out.json]
//   byzmix maxomega <mixture.json> [--draws N] [--seed S]

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "byzmix/aggregation.hpp"
#include "byzmix/config.hpp"
#include "byzmix/harness.hpp"
#include "byzmix/metrics.hpp"
#include "byzmix/serialize.hpp"

namespace fs = std::filesystem;
using namespace byzmix;

namespace {

LocalEstimateSet read_estimate_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::invalid_argument("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.size() < 2) throw std::invalid_argument("need at least two *.json estimates in " + dir.string());
  LocalEstimateSet set;
  for (const auto& f : files) set.estimates.push_back(read_mixture(f));
  set.validate();
  return set;
}

int cmd_run(const std::string& path, const std::string& out, const std::optional<std::uint64_t>& seed,
            const std::optional<int>& threads, const std::string& methods, const std::string& alpha) {
  ExperimentConfig cfg = load_config(path);
  if (!out.empty()) cfg.output = out;
  if (seed) cfg.seed = *seed;
  if (threads) cfg.threads = *threads;
  if (!methods.empty()) cfg.methods = parse_method_list("methods", methods);
  if (!alpha.empty()) cfg.alphas = parse_real_list("alpha", alpha);
  cfg.validate();
  const auto records = run_experiment(cfg, std::cout);
  const auto failed = std::count_if(records.begin(), records.end(), [](const auto& r) { return !r.error.empty(); });
  std::cout << "wrote " << (cfg.output / "results.csv").string() << " (" << records.size() << " rows";
  if (failed > 0) std::cout << ", " << failed << " failed repetitions";
  std::cout << ")\n";
  return 0;
}

int cmd_distances(const std::string& dir) {
  const auto set = read_estimate_dir(dir);
  const auto c = coat(set);
  for (int i = 0; i < set.size(); ++i) {
    for (int j = 0; j < set.size(); ++j) std::printf(j ? " %.10g" : "%.10g", c.distances(i, j));
    std::printf("\n");
  }
  std::printf("coat %d radius %.10g\n", c.index, c.radius);
  return 0;
}

int cmd_reduce(const std::string& dir, int K, const std::string& method, double rho, double eta,
               const std::string& out) {
  const auto set = read_estimate_dir(dir);
  ReduceConfig rc;
  rc.cost = default_cost(set.estimates.front().family());
  const auto c = coat(set);
  const MixingDistribution& start = set.estimates[static_cast<std::size_t>(c.index)];
  std::optional<MixingDistribution> result;
  if (method == "dfmr" || method == "vanilla") {
    const auto selected = filter(c, method == "dfmr" ? rho : kRhoUnbounded);
    result = mm_reduce(pool(set, selected), K, start, rc).estimate;
    std::cerr << "selected " << selected.size() << " of " << set.size() << " estimates\n";
  } else if (method == "trim") {
    result = trim(set, eta, K, start, rc).estimate;
  } else if (method == "coat") {
    result = start;
  } else {
    throw std::invalid_argument("unknown method '" + method + "'");
  }
  if (out.empty()) std::cout << to_json(*result).dump(2) << '\n';
  else write_mixture(out, *result);
  return 0;
}

int cmd_maxomega(const std::string& path, int draws, std::uint64_t seed) {
  const auto g = read_mixture(path);
  if (g.order() < 2) throw std::invalid_argument("overlap needs at least two components");
  Rng rng(seed);
  const auto est = max_omega(g, draws, rng);
  std::printf("max_omega %.6f se %.6f pair %d %d\n", est.max_omega, est.std_error, est.pair_i, est.pair_j);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Byzantine-tolerant split-and-conquer learning of finite mixtures"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run a simulation experiment");
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string methods;
  std::string alpha;
  run->add_option("config", config_path, "config file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--seed", seed, "master seed");
  run->add_option("--threads", threads, "worker threads");
  run->add_option("--methods", methods, "comma-separated methods");
  run->add_option("--alpha", alpha, "comma-separated failure fractions");

  auto* dist = app.add_subcommand("distances", "pairwise L2 distances and COAT of a directory of estimates");
  std::string dist_dir;
  dist->add_option("dir", dist_dir, "directory of mixture JSON files")->required();

  auto* reduce = app.add_subcommand("reduce", "aggregate a directory of estimates");
  std::string reduce_dir;
  int k = 0;
  std::string method = "dfmr";
  double rho = 1.3;
  double eta = 0.5;
  std::string reduce_out;
  reduce->add_option("dir", reduce_dir, "directory of mixture JSON files")->required();
  reduce->add_option("--k", k, "number of components")->required()->check(CLI::PositiveNumber);
  reduce->add_option("--method", method, "dfmr, vanilla, trim or coat")->capture_default_str();
  reduce->add_option("--rho", rho, "filter radius multiplier")->capture_default_str();
  reduce->add_option("--eta", eta, "trimmed fraction")->capture_default_str();
  reduce->add_option("-o,--output", reduce_out, "write the estimate here instead of stdout");

  auto* omega = app.add_subcommand("maxomega", "Monte-Carlo maximum pairwise overlap");
  std::string omega_path;
  int draws = 100000;
  std::uint64_t omega_seed = 0;
  omega->add_option("mixture", omega_path, "mixture JSON")->required()->check(CLI::ExistingFile);
  omega->add_option("--draws", draws, "draws per component")->capture_default_str();
  omega->add_option("--seed", omega_seed, "seed")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config_path, out_dir, seed, threads, methods, alpha);
    if (*dist) return cmd_distances(dist_dir);
    if (*reduce) return cmd_reduce(reduce_dir, k, method, rho, eta, reduce_out);
    if (*omega) return cmd_maxomega(omega_path, draws, omega_seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

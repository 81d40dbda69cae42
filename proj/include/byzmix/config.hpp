#pragma once

// Experiment configuration.
//
// File format: one `key = value` per line, `#` starts a comment, blank lines
// are ignored. Lists are comma separated. Unknown or repeated keys are
// rejected. Published schema (type, default):
//
//   family                gaussian|gamma            required
//   K                     int >= 1                  required
//   d                     int >= 1                  required for gaussian, 1 for gamma
//   m                     int >= 2                  required
//   n                     int >= 2 (per machine)    required
//   repetitions           int >= 1                  1
//   truth_file            path to mixture JSON      (none: generate, gaussian only)
//   truth_per_repetition  bool                      true
//   weight_floor          real in [0, 1/K]          0.05
//   mean_box              real > 0 (half width)     5.0
//   eig_min, eig_max      0 < eig_min <= eig_max    0.5, 2.0
//   alpha                 list of reals in [0,0.5)  0
//   failures              list of mean|cov|weight|shape|scale   mean (gaussian) / shape (gamma)
//   methods               list of vanilla|dfmr|dfmr1|trim|coat|oracle   required, non-empty
//   rho                   list of reals >= 1 or inf 1.3
//   eta                   real in (0,1)             0.5
//   init                  truth|kmeans++            truth
//   em_max_iters          int >= 1                  1000
//   em_tol                real > 0                  1e-6
//   em_penalty            real >= 0                 n^{-1/2}
//   mm_tol                real >= 0                 1e-9
//   mm_max_iters          int >= 1                  1000
//   mm_restarts           int >= 1                  1
//   test_size             int >= 2                  min(n*m, 100000)
//   seed                  u64                       0
//   threads               int >= 1                  1
//   output                directory                 results
//   timings               bool                      true
//   dump_estimates        bool                      false

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "byzmix/byzantine.hpp"
#include "byzmix/local_em.hpp"
#include "byzmix/mixture.hpp"

namespace byzmix {

enum class Method { Vanilla, Dfmr, Dfmr1, Trim, Coat, Oracle };
enum class InitPolicy { Truth, KMeansPP };

std::string_view method_name(Method m) noexcept;
Method parse_method(std::string_view name);

/// Rejected configuration; the message names the offending key.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ExperimentConfig {
  Family family = Family::Gaussian;
  int K = 0;
  int d = 0;
  int m = 0;
  int n = 0;
  int repetitions = 1;

  std::optional<std::filesystem::path> truth_file;
  bool truth_per_repetition = true;
  double weight_floor = 0.05;
  double mean_box = 5.0;
  double eig_min = 0.5;
  double eig_max = 2.0;

  std::vector<double> alphas{0.0};
  std::vector<FailureKind> failures;
  std::vector<Method> methods;
  std::vector<double> rhos{1.3};
  double eta = 0.5;

  InitPolicy init = InitPolicy::Truth;
  EmConfig em;
  double mm_tol = 1e-9;
  int mm_max_iters = 1000;
  int mm_restarts = 1;

  std::optional<int> test_size;
  std::uint64_t seed = 0;
  int threads = 1;
  std::filesystem::path output = "results";
  bool timings = true;
  bool dump_estimates = false;

  /// Throws ConfigError naming the first invalid field.
  void validate() const;
  [[nodiscard]] int effective_test_size() const;
};

/// Parse the key-value text. Relative paths resolve against `base_dir`.
[[nodiscard]] ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
[[nodiscard]] ExperimentConfig load_config(const std::filesystem::path& path);

/// Helpers shared with the CLI flag overrides.
[[nodiscard]] std::vector<double> parse_real_list(std::string_view key, std::string_view value);
[[nodiscard]] std::vector<Method> parse_method_list(std::string_view key, std::string_view value);

}  // namespace byzmix

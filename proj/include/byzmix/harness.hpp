#pragma once

// Simulation driver: ground-truth generation, local fitting, failure
// injection, aggregation and scoring, with CSV output.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "byzmix/config.hpp"
#include "byzmix/metrics.hpp"
#include "byzmix/mixture.hpp"

namespace byzmix {

struct MixtureSpec {
  int K = 2;
  int d = 2;
  double weight_floor = 0.05;
  double mean_box = 5.0;
  double eig_min = 0.5;
  double eig_max = 2.0;
  /// Draws used for the attached overlap estimate; 0 skips it.
  int overlap_draws = 10000;
};

struct GeneratedMixture {
  MixingDistribution mixture;
  std::optional<OverlapEstimate> overlap;
};

/// Gaussian truth: Dirichlet(1) weights lifted above the floor, means uniform
/// in [-box, box]^d, covariances Q diag(lambda) Q^T with Q Haar-orthogonal and
/// lambda log-uniform in [eig_min, eig_max].
[[nodiscard]] GeneratedMixture generate_mixture(const MixtureSpec& spec, Rng& rng);

struct LocalFits {
  std::vector<MixingDistribution> estimates;
  double fit_ms = 0.0;
};

/// Sample n*m points from the truth, partition them and fit every machine.
[[nodiscard]] LocalFits fit_local_estimates(const ExperimentConfig& cfg, const MixingDistribution& truth,
                                            std::uint64_t rep_seed);

struct ResultRecord {
  int rep = 0;
  std::string method;
  std::string failure;
  double alpha = 0.0;
  int m = 0;
  int n = 0;
  int K = 0;
  int d = 0;
  std::optional<double> rho;
  double w1 = 0.0;
  double ari = 0.0;
  double fit_ms = 0.0;
  double agg_ms = 0.0;
  /// Non-empty when the repetition aborted; the scores are then NaN.
  std::string error;
};

/// Seed of repetition `rep` under the master seed.
[[nodiscard]] std::uint64_t repetition_seed(std::uint64_t master, int rep) noexcept;

/// Ground truth for a repetition: the configured file, or a generated
/// mixture (redrawn per repetition unless truth_per_repetition is false).
[[nodiscard]] MixingDistribution truth_for(const ExperimentConfig& cfg, int rep);

/// One repetition over every (alpha, failure kind, method, rho). Errors
/// produce a single record with `error` set instead of throwing.
[[nodiscard]] std::vector<ResultRecord> run_repetition(const ExperimentConfig& cfg, const MixingDistribution& truth,
                                                       int rep);

[[nodiscard]] std::string csv_header();
[[nodiscard]] std::string csv_row(const ResultRecord& r);

struct SummaryRow {
  std::string method;
  std::string failure;
  double alpha = 0.0;
  std::optional<double> rho;
  int count = 0;
  double w1_median = 0.0;
  double w1_iqr = 0.0;
  double ari_median = 0.0;
  double ari_iqr = 0.0;
};

/// Median and interquartile range per (method, failure, alpha, rho), errors excluded.
[[nodiscard]] std::vector<SummaryRow> summarize(const std::vector<ResultRecord>& records);
void print_summary(std::ostream& out, const std::vector<SummaryRow>& rows);

/// Run every repetition, write results.csv and summary.txt into cfg.output.
/// The output directory is checked for writability before any fitting.
std::vector<ResultRecord> run_experiment(const ExperimentConfig& cfg, std::ostream& log);

}  // namespace byzmix

#pragma once

// Finite mixture models: component families, mixing distributions, datasets,
// sampling, parameter vectorisation and label alignment.

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "byzmix/rng.hpp"

namespace byzmix {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
/// Observations stored one per row; rows are contiguous.
using DataMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Raised when a numerical routine cannot produce a valid result
/// (non-PD matrix, total density underflow, ...).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for inputs outside the supported envelope (e.g. K > 10 in align).
class UnsupportedError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

enum class Family { Gaussian, Gamma };

std::string_view family_name(Family family) noexcept;
Family parse_family(std::string_view name);

/// Lower Cholesky factor of a symmetric PD matrix. On failure the diagonal is
/// bumped once by 1e-10 * trace / d and the factorisation retried. When the
/// retry is used, `adjusted` (if given) receives the jittered matrix.
Matrix cholesky_with_jitter(const Matrix& sym, Matrix* adjusted = nullptr);

/// Multivariate normal N(mean, covariance). The Cholesky factor is computed
/// at construction, so instances are immutable and safe to share.
class GaussianComponent {
 public:
  GaussianComponent(Vector mean, Matrix covariance);

  [[nodiscard]] int dim() const noexcept { return static_cast<int>(mean_.size()); }
  [[nodiscard]] const Vector& mean() const noexcept { return mean_; }
  [[nodiscard]] const Matrix& covariance() const noexcept { return covariance_; }
  /// Lower-triangular L with L L^T = covariance.
  [[nodiscard]] const Matrix& cholesky() const noexcept { return chol_; }
  [[nodiscard]] double log_det() const noexcept { return log_det_; }

  [[nodiscard]] double log_pdf(const Eigen::Ref<const Vector>& x) const;
  /// Log-density of every row of `x`.
  [[nodiscard]] Vector log_pdf_rows(const DataMatrix& x) const;

  friend bool operator==(const GaussianComponent& a, const GaussianComponent& b) {
    return a.mean_ == b.mean_ && a.covariance_ == b.covariance_;
  }

 private:
  Vector mean_;
  Matrix covariance_;
  Matrix chol_;
  double log_det_ = 0.0;
};

/// Two-parameter Gamma with density x^{r-1} e^{-x/s} / (s^r Gamma(r)) on x > 0.
class GammaComponent {
 public:
  /// Shapes at or below 0.5 are rejected: the L2 cross-integral and the
  /// penalised likelihood both need r > 0.5.
  GammaComponent(double shape, double scale);

  [[nodiscard]] double shape() const noexcept { return shape_; }
  [[nodiscard]] double scale() const noexcept { return scale_; }
  [[nodiscard]] double log_pdf(double x) const noexcept;

  friend bool operator==(const GammaComponent&, const GammaComponent&) = default;

 private:
  double shape_;
  double scale_;
};

using Component = std::variant<GaussianComponent, GammaComponent>;

[[nodiscard]] Family family_of(const Component& c) noexcept;
[[nodiscard]] int dim_of(const Component& c) noexcept;
/// Log-density of a single observation (length-1 vector for Gamma).
[[nodiscard]] double log_pdf(const Component& c, const Eigen::Ref<const Vector>& x);
[[nodiscard]] Vector log_pdf_rows(const Component& c, const DataMatrix& x);

/// G = sum_k w_k delta_{theta_k}: weights on the simplex plus K components of
/// one family and one dimension.
class MixingDistribution {
 public:
  MixingDistribution(std::vector<double> weights, std::vector<Component> components);
  MixingDistribution(std::vector<double> weights, const std::vector<GaussianComponent>& components);
  MixingDistribution(std::vector<double> weights, const std::vector<GammaComponent>& components);

  [[nodiscard]] Family family() const noexcept { return family_; }
  [[nodiscard]] int order() const noexcept { return static_cast<int>(weights_.size()); }
  [[nodiscard]] int dim() const noexcept { return dim_; }
  [[nodiscard]] const std::vector<double>& weights() const noexcept { return weights_; }
  [[nodiscard]] double weight(int k) const { return weights_.at(static_cast<std::size_t>(k)); }
  [[nodiscard]] const std::vector<Component>& components() const noexcept { return components_; }
  [[nodiscard]] const Component& component(int k) const {
    return components_.at(static_cast<std::size_t>(k));
  }
  [[nodiscard]] const GaussianComponent& gaussian(int k) const;
  [[nodiscard]] const GammaComponent& gamma(int k) const;

  /// Component j of the result is component perm[j] of this mixture.
  [[nodiscard]] MixingDistribution permuted(std::span<const int> perm) const;
  [[nodiscard]] MixingDistribution with_weights(std::vector<double> weights) const;

  friend bool operator==(const MixingDistribution&, const MixingDistribution&) = default;

 private:
  std::vector<double> weights_;
  std::vector<Component> components_;
  Family family_ = Family::Gaussian;
  int dim_ = 0;
};

struct Dataset {
  DataMatrix rows;
  /// True component index of each row when known.
  std::optional<std::vector<int>> labels;

  [[nodiscard]] int size() const noexcept { return static_cast<int>(rows.rows()); }
  [[nodiscard]] int dim() const noexcept { return static_cast<int>(rows.cols()); }
  /// Throws unless n >= 1, all rows finite and labels (if any) have length n.
  void validate() const;
};

/// f_G(x) and log f_G(x) (log-sum-exp over components).
[[nodiscard]] double log_density(const MixingDistribution& g, const Eigen::Ref<const Vector>& x);
[[nodiscard]] double density(const MixingDistribution& g, const Eigen::Ref<const Vector>& x);
[[nodiscard]] double density(const MixingDistribution& g, double x);
/// Per-row log f_G.
[[nodiscard]] Vector log_density_rows(const MixingDistribution& g, const DataMatrix& x);

/// n iid draws with component labels.
[[nodiscard]] Dataset sample(const MixingDistribution& g, int n, Rng& rng);

/// Parameter vector (w_1..w_{K-1}, theta_1..theta_K) where a Gaussian theta is
/// (mean, upper triangle of covariance row by row) and a Gamma theta is
/// (shape, scale).
struct ParamVector {
  Vector values;
  std::vector<int> permutation;
};

[[nodiscard]] int params_per_component(Family family, int dim) noexcept;
[[nodiscard]] Vector component_params(const Component& c);
[[nodiscard]] Component component_from_params(Family family, int dim,
                                              const Eigen::Ref<const Vector>& theta);

/// Vectorise G after reordering its components by `perm` (identity if empty).
[[nodiscard]] ParamVector vectorize(const MixingDistribution& g, std::span<const int> perm = {});
/// Inverse of vectorize: returns the mixture in the vector's component order.
[[nodiscard]] MixingDistribution devectorize(const ParamVector& v, Family family, int dim);

struct Alignment {
  ParamVector vector;
  std::vector<int> permutation;
  double residual = 0.0;
};

/// Permutation of G's components whose vectorisation is closest (Euclidean)
/// to that of `reference`, by exhaustive search. Ties go to the
/// lexicographically smallest permutation. K <= 10.
[[nodiscard]] Alignment align(const MixingDistribution& g, const MixingDistribution& reference);

/// Random split of `data` into m disjoint, equally sized chunks.
[[nodiscard]] std::vector<Dataset> partition(const Dataset& data, int m, Rng& rng);

}  // namespace byzmix

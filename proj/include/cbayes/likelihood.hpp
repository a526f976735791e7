#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cbayes/dataset.hpp"

namespace cbayes {

enum class Family { GaussianLinear, Logistic, HierarchicalGaussian };

std::string to_string(Family f);

/// A named block of consecutive entries in a parameter vector.
struct Slot {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 1;
  bool positive = false;
  /// Vector slots write columns as name.1..name.size even when size == 1.
  bool indexed = false;
};

class ParameterLayout {
 public:
  void add(std::string name, std::size_t size, bool positive, bool indexed = false);

  std::size_t size() const { return size_; }
  const std::vector<Slot>& slots() const { return slots_; }
  const Slot* find(const std::string& name) const;
  const Slot& at(const std::string& name) const;

  /// Column names in parameter-vector order.
  std::vector<std::string> column_names() const;
  /// Flags per parameter entry: true when the entry must be > 0.
  std::vector<bool> positivity() const;

  bool operator==(const ParameterLayout& other) const;

 private:
  std::vector<Slot> slots_;
  std::size_t size_ = 0;
};

enum class CoefficientPrior {
  Laplace,  ///< Laplace(0, b) per coefficient with b ~ Gamma(1, 1)
  Normal,   ///< Normal(0, normal_sd^2) per coefficient
};

/// Prior settings shared by the Gaussian linear and logistic families.
struct RegressionPrior {
  CoefficientPrior coefficients = CoefficientPrior::Laplace;
  double normal_sd = 1.0;
  bool intercept = true;
  /// Normal(0, sd^2) prior on the intercept; empty means flat.
  std::optional<double> intercept_sd;
  /// Half-normal scale c of the noise sd prior (Gaussian family).
  double tau_scale = 1.0;
  /// Known noise sd; removes tau from the parameter vector.
  std::optional<double> fixed_tau;
};

/// A model family with its pointwise log-likelihood and log-prior. Immutable
/// after construction and safe to share across threads.
class LikelihoodModel {
 public:
  static LikelihoodModel gaussian_linear(std::size_t dim, RegressionPrior prior = {});
  static LikelihoodModel logistic(std::size_t dim, RegressionPrior prior = {});
  /// Varying-intercept varying-slope model: theta_j ~ N(phi, s^2) per
  /// coordinate, theta0_j ~ N(phi0, s0^2), N(0,1) on phi/phi0 and Exp(1) on
  /// s, s0 and the shared residual sd tau.
  static LikelihoodModel hierarchical_gaussian(std::size_t dim, std::size_t groups);

  Family family() const { return family_; }
  std::size_t dim() const { return dim_; }
  std::size_t groups() const { return groups_; }
  const RegressionPrior& prior() const { return prior_; }
  const ParameterLayout& layout() const { return layout_; }
  OutcomeKind outcome_kind() const {
    return family_ == Family::Logistic ? OutcomeKind::Binary : OutcomeKind::Real;
  }

  /// log f_theta(y | x) with full argument validation.
  double log_likelihood(std::span<const double> params, const Datum& datum) const;

  /// log f_theta(y | x) for every y in `ys` at one covariate. Arguments are
  /// assumed validated; this is the hot path of the conformal engine.
  void log_likelihood_grid(std::span<const double> params, std::span<const double> x,
                           std::optional<int> group, std::span<const double> ys,
                           std::span<double> out) const;

  /// Sum of log-likelihoods over a dataset, without per-datum validation.
  double log_likelihood_sum(std::span<const double> params, const Dataset& data) const;

  /// Sum of log prior densities; -inf outside the support.
  double log_prior(std::span<const double> params) const;

  /// Closed-form conditional CDF P(Y <= y | x, theta) for the real-valued families.
  double conditional_cdf(std::span<const double> params, std::span<const double> x,
                         std::optional<int> group, double y) const;

  /// P(Y = 1 | x, theta) for the logistic family.
  double probability_one(std::span<const double> params, std::span<const double> x) const;

  void check_params(std::span<const double> params) const;
  void check_datum(const Datum& datum) const;
  void check_dataset(const Dataset& data) const;

 private:
  LikelihoodModel() = default;

  double linear_predictor(std::span<const double> params, std::span<const double> x,
                          std::optional<int> group) const;
  double noise_sd(std::span<const double> params) const;

  Family family_ = Family::GaussianLinear;
  std::size_t dim_ = 0;
  std::size_t groups_ = 0;
  RegressionPrior prior_;
  ParameterLayout layout_;
  // Cached offsets into the parameter vector; npos when absent.
  std::size_t theta_ = 0, theta0_ = npos, tau_ = npos, b_ = npos;
  std::size_t phi_ = npos, phi0_ = npos, s_ = npos, s0_ = npos;
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

namespace density {

inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double normal_log(double x, double mean, double sd);
double normal_cdf(double x, double mean, double sd);
/// log(1 / (1 + exp(-eta))) without overflow.
double log_sigmoid(double eta);

}  // namespace density

}  // namespace cbayes

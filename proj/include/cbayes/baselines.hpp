#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cbayes/conformal.hpp"

namespace cbayes {

/// Central credible interval on the grid scale.
struct CredibleInterval {
  double lo = 0.0;
  double hi = 0.0;
  double alpha = 0.0;
  /// Set when a quantile fell outside the grid and the endpoint was clamped.
  bool clamped_lo = false;
  bool clamped_hi = false;

  double length() const { return hi - lo; }
  bool contains(double y) const { return lo <= y && y <= hi; }
};

/// Monte Carlo posterior predictive CDF F(y) = mean_t F_{theta_t}(y | x) at one point.
double predictive_cdf(const LikelihoodModel& model, const PosteriorDraws& draws, const Datum& test, double y);

/// Narrowest pair of grid values [lo, hi] with F(lo) <= alpha/2 and
/// F(hi) >= 1 - alpha/2, using each draw's closed-form conditional CDF.
CredibleInterval bayes_interval(const LikelihoodModel& model, const PosteriorDraws& draws, const Datum& test,
                                const ConformalGrid& grid, double alpha);

struct ClassPredictionReport {
  std::vector<int> labels;
  /// Posterior predictive P(y = 1 | x).
  double p1 = 0.0;
  /// Conformal reports only: 1 - (smallest label p-value).
  std::optional<double> confidence;
  /// Conformal reports only: largest label p-value.
  std::optional<double> credibility;

  bool contains(int label) const;
};

/// Smallest of {0}, {1}, {0,1} holding at least 1 - alpha predictive mass.
ClassPredictionReport bayes_class_set(const LikelihoodModel& model, const PosteriorDraws& draws,
                                      const std::vector<double>& test_x, double alpha);

/// Report for a conformal label set built from its rank profile on {0, 1}.
ClassPredictionReport conformal_class_report(const RankProfile& profile, double alpha, double p1 = 0.0);

struct ClassOutcome {
  std::vector<int> labels;
  int truth = 0;
};

struct UninformativeSummary {
  std::size_t count = 0;
  std::size_t singletons = 0;
  /// Error rate among singleton predictions; empty when there are none.
  std::optional<double> misclassification;
  double both_rate = 0.0;
  double empty_rate = 0.0;
  double coverage = 0.0;
};

UninformativeSummary summarize_class_sets(std::span<const ClassOutcome> outcomes);

struct UninformativeDecomposition {
  UninformativeSummary bayes;
  UninformativeSummary cb;
};

UninformativeDecomposition uninformative_decomposition(std::span<const ClassOutcome> bayes,
                                                       std::span<const ClassOutcome> cb);

/// ceil((n2 + 1)(1 - alpha)), the rank of the calibration residual used by
/// split conformal prediction.
std::size_t split_quantile_rank(std::size_t n2, double alpha);

/// The split-conformal residual quantile; empty when the required rank
/// exceeds the number of residuals (unbounded interval).
std::optional<double> split_quantile(std::vector<double> residuals, double alpha);

struct SplitInterval {
  double center = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  bool bounded = true;

  double length() const;
  bool contains(double y) const { return !bounded || (lo <= y && y <= hi); }
};

/// Split conformal regression with a closed-form ridge point predictor.
/// The data are split at random in halves; the first half fits the ridge
/// (penalty 1e-6 * n2, unpenalized intercept), the second calibrates.
class SplitConformal {
 public:
  SplitConformal(const Dataset& data, double alpha, std::uint64_t seed);

  SplitInterval predict(const std::vector<double>& x) const;
  double point(const std::vector<double>& x) const;
  std::optional<double> quantile() const { return quantile_; }

 private:
  std::vector<double> beta_;
  double intercept_ = 0.0;
  std::optional<double> quantile_;
};

SplitInterval split_conformal(const Dataset& data, const std::vector<double>& test_x, double alpha,
                              std::uint64_t seed);

}  // namespace cbayes

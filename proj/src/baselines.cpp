#include "cbayes/baselines.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "cbayes/error.hpp"
#include "cbayes/rng.hpp"

namespace cbayes {

double predictive_cdf(const LikelihoodModel& model, const PosteriorDraws& draws, const Datum& test, double y) {
  double sum = 0.0;
  for (std::size_t t = 0; t < draws.size(); ++t) sum += model.conditional_cdf(draws.row(t), test.x, test.group, y);
  return sum / static_cast<double>(draws.size());
}

CredibleInterval bayes_interval(const LikelihoodModel& model, const PosteriorDraws& draws, const Datum& test,
                                const ConformalGrid& grid, double alpha) {
  check_alpha(alpha, "baselines");
  if (model.outcome_kind() != OutcomeKind::Real || grid.kind() != OutcomeKind::Real) {
    throw InputError("baselines", "credible intervals need a regression model and grid");
  }
  Datum probe = test;
  model.check_datum(probe);
  if (!(draws.layout() == model.layout())) {
    throw InputError("baselines", "posterior draws layout does not match the model parameters");
  }
  // F is non-decreasing on the grid, so each endpoint is found by bisection.
  std::vector<double> memo(grid.size(), std::numeric_limits<double>::quiet_NaN());
  auto cdf = [&](std::size_t g) {
    if (std::isnan(memo[g])) memo[g] = predictive_cdf(model, draws, test, grid[g]);
    return memo[g];
  };
  // Largest g with predicate(g) true for a predicate true on a prefix.
  auto last_true = [&](auto pred) -> std::optional<std::size_t> {
    if (!pred(0)) return std::nullopt;
    std::size_t lo = 0, hi = grid.size() - 1;
    if (pred(hi)) return hi;
    while (hi - lo > 1) {
      const std::size_t mid = lo + (hi - lo) / 2;
      (pred(mid) ? lo : hi) = mid;
    }
    return lo;
  };
  const double lower = alpha / 2.0;
  const double upper = 1.0 - alpha / 2.0;

  CredibleInterval ci;
  ci.alpha = alpha;
  auto lo = last_true([&](std::size_t g) { return cdf(g) <= lower; });
  if (lo) {
    ci.lo = grid[*lo];
  } else {
    ci.lo = grid.lo();
    ci.clamped_lo = true;
  }
  auto below_upper = last_true([&](std::size_t g) { return cdf(g) < upper; });
  if (!below_upper) {
    ci.hi = grid.lo();
  } else if (*below_upper + 1 < grid.size()) {
    ci.hi = grid[*below_upper + 1];
  } else {
    ci.hi = grid.hi();
    ci.clamped_hi = true;
  }
  if (ci.hi < ci.lo) ci.hi = ci.lo;
  return ci;
}

bool ClassPredictionReport::contains(int label) const {
  return std::find(labels.begin(), labels.end(), label) != labels.end();
}

ClassPredictionReport bayes_class_set(const LikelihoodModel& model, const PosteriorDraws& draws,
                                      const std::vector<double>& test_x, double alpha) {
  check_alpha(alpha, "baselines");
  if (model.family() != Family::Logistic) throw InputError("baselines", "class sets need the logistic family");
  if (test_x.size() != model.dim()) throw InputError("baselines", "test covariate dimension mismatch");
  double p = 0.0;
  for (std::size_t t = 0; t < draws.size(); ++t) p += model.probability_one(draws.row(t), test_x);
  p /= static_cast<double>(draws.size());

  ClassPredictionReport r;
  r.p1 = p;
  const double target = 1.0 - alpha;
  const bool zero_ok = 1.0 - p >= target;
  const bool one_ok = p >= target;
  if (zero_ok && one_ok) {
    // Only possible for alpha >= 1/2: keep the label with more mass.
    r.labels = {p > 0.5 ? 1 : 0};
  } else if (zero_ok) {
    r.labels = {0};
  } else if (one_ok) {
    r.labels = {1};
  } else {
    r.labels = {0, 1};
  }
  return r;
}

ClassPredictionReport conformal_class_report(const RankProfile& profile, double alpha, double p1) {
  if (profile.pi.size() != 2) throw InputError("baselines", "class report needs a profile on {0, 1}");
  ClassPredictionReport r;
  r.p1 = p1;
  for (int label = 0; label < 2; ++label) {
    if (profile.pi[static_cast<std::size_t>(label)] > alpha) r.labels.push_back(label);
  }
  r.confidence = 1.0 - std::min(profile.pi[0], profile.pi[1]);
  r.credibility = std::max(profile.pi[0], profile.pi[1]);
  return r;
}

UninformativeSummary summarize_class_sets(std::span<const ClassOutcome> outcomes) {
  UninformativeSummary s;
  s.count = outcomes.size();
  std::size_t errors = 0, both = 0, empty = 0, covered = 0;
  for (const auto& o : outcomes) {
    const bool hit = std::find(o.labels.begin(), o.labels.end(), o.truth) != o.labels.end();
    if (hit) ++covered;
    if (o.labels.empty()) {
      ++empty;
    } else if (o.labels.size() == 1) {
      ++s.singletons;
      if (!hit) ++errors;
    } else {
      ++both;
    }
  }
  if (s.count == 0) return s;
  const double n = static_cast<double>(s.count);
  if (s.singletons > 0) s.misclassification = static_cast<double>(errors) / static_cast<double>(s.singletons);
  s.both_rate = static_cast<double>(both) / n;
  s.empty_rate = static_cast<double>(empty) / n;
  s.coverage = static_cast<double>(covered) / n;
  return s;
}

UninformativeDecomposition uninformative_decomposition(std::span<const ClassOutcome> bayes,
                                                       std::span<const ClassOutcome> cb) {
  return {summarize_class_sets(bayes), summarize_class_sets(cb)};
}

// ---------------------------------------------------------------- split

std::size_t split_quantile_rank(std::size_t n2, double alpha) {
  check_alpha(alpha, "baselines");
  // The small offset absorbs representation error in (n2 + 1)(1 - alpha).
  const double r = static_cast<double>(n2 + 1) * (1.0 - alpha);
  return static_cast<std::size_t>(std::ceil(r - 1e-9));
}

std::optional<double> split_quantile(std::vector<double> residuals, double alpha) {
  const std::size_t k = split_quantile_rank(residuals.size(), alpha);
  if (k > residuals.size()) return std::nullopt;
  if (k == 0) return 0.0;
  std::nth_element(residuals.begin(), residuals.begin() + static_cast<std::ptrdiff_t>(k - 1), residuals.end());
  return residuals[k - 1];
}

double SplitInterval::length() const {
  return bounded ? hi - lo : std::numeric_limits<double>::infinity();
}

SplitConformal::SplitConformal(const Dataset& data, double alpha, std::uint64_t seed) {
  check_alpha(alpha, "baselines");
  if (data.size() < 4) throw InputError("baselines", "split conformal needs at least 4 data points");
  const std::size_t n = data.size();
  const std::size_t d = data.dim();
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(idx));
  const std::size_t n1 = n / 2;
  const std::size_t n2 = n - n1;

  Eigen::MatrixXd X(n1, d);
  Eigen::VectorXd y(n1);
  for (std::size_t r = 0; r < n1; ++r) {
    const Datum& z = data[idx[r]];
    for (std::size_t k = 0; k < d; ++k) X(r, k) = z.x[k];
    y[r] = z.y;
  }
  const Eigen::RowVectorXd x_mean = X.colwise().mean();
  const double y_mean = y.mean();
  const Eigen::MatrixXd Xc = X.rowwise() - x_mean;
  const Eigen::VectorXd yc = y.array() - y_mean;
  Eigen::MatrixXd gram = Xc.transpose() * Xc;
  gram.diagonal().array() += 1e-6 * static_cast<double>(n1);
  const Eigen::VectorXd beta = gram.ldlt().solve(Xc.transpose() * yc);
  beta_.assign(beta.data(), beta.data() + beta.size());
  intercept_ = y_mean - x_mean.dot(beta);

  std::vector<double> residuals;
  residuals.reserve(n2);
  for (std::size_t r = n1; r < n; ++r) {
    const Datum& z = data[idx[r]];
    residuals.push_back(std::abs(z.y - point(z.x)));
  }
  quantile_ = split_quantile(std::move(residuals), alpha);
}

double SplitConformal::point(const std::vector<double>& x) const {
  if (x.size() != beta_.size()) throw InputError("baselines", "test covariate dimension mismatch");
  double v = intercept_;
  for (std::size_t k = 0; k < x.size(); ++k) v += beta_[k] * x[k];
  return v;
}

SplitInterval SplitConformal::predict(const std::vector<double>& x) const {
  SplitInterval s;
  s.center = point(x);
  if (quantile_) {
    s.lo = s.center - *quantile_;
    s.hi = s.center + *quantile_;
  } else {
    s.bounded = false;
    s.lo = -std::numeric_limits<double>::infinity();
    s.hi = std::numeric_limits<double>::infinity();
  }
  return s;
}

SplitInterval split_conformal(const Dataset& data, const std::vector<double>& test_x, double alpha,
                              std::uint64_t seed) {
  return SplitConformal(data, alpha, seed).predict(test_x);
}

}  // namespace cbayes

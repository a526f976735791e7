#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "cbayes/dataset.hpp"
#include "cbayes/likelihood.hpp"
#include "cbayes/posterior.hpp"

namespace cbayes {

/// Candidate outcomes at which the rank function is evaluated.
class ConformalGrid {
 public:
  /// n equispaced points on [lo, hi]; n = 1 requires lo == hi and has spacing 0.
  static ConformalGrid regression(double lo, double hi, std::size_t n);
  /// The label grid {0, 1}.
  static ConformalGrid classification();

  OutcomeKind kind() const { return kind_; }
  const std::vector<double>& points() const { return points_; }
  std::size_t size() const { return points_.size(); }
  double operator[](std::size_t i) const { return points_[i]; }
  double lo() const { return points_.front(); }
  double hi() const { return points_.back(); }
  /// Grid resolution delta; 1 for the label grid.
  double spacing() const { return spacing_; }
  /// Index of the grid point closest to y (lower index on ties).
  std::size_t nearest(double y) const;

 private:
  OutcomeKind kind_ = OutcomeKind::Real;
  std::vector<double> points_;
  double spacing_ = 1.0;
};

/// Equispaced grid on [min y - 2 s, max y + 2 s] where s = 1 for a response
/// already in standardized units and the response's population sd otherwise.
ConformalGrid default_grid(const Dataset& data, std::size_t n_grid);
ConformalGrid default_grid(const Dataset& data, std::size_t n_grid, OutcomeKind kind);

/// Training log-likelihoods log f_{theta_t}(Y_i | X_i), stored per datum as
/// a row of T values together with exp(row - max(row)) for the weighted sums.
class TrainLikelihood {
 public:
  TrainLikelihood(const LikelihoodModel& model, const PosteriorDraws& draws, const Dataset& data);

  std::size_t size() const { return n_; }
  std::size_t draws() const { return T_; }
  std::span<const double> loglik(std::size_t i) const { return {loglik_.data() + i * T_, T_}; }
  std::span<const double> scaled(std::size_t i) const { return {scaled_.data() + i * T_, T_}; }
  double shift(std::size_t i) const { return shift_[i]; }

 private:
  std::size_t n_ = 0;
  std::size_t T_ = 0;
  std::vector<double> loglik_;
  std::vector<double> scaled_;
  std::vector<double> shift_;
};

/// Per-test-point likelihood cache: the shared training block plus
/// log f_{theta_t}(y | x_test) for every candidate y, stored per y.
struct LikelihoodCache {
  std::shared_ptr<const TrainLikelihood> train;
  std::vector<double> candidates;
  std::vector<double> grid_loglik;

  static LikelihoodCache build(const LikelihoodModel& model, const PosteriorDraws& draws,
                               std::shared_ptr<const TrainLikelihood> train, const Datum& test,
                               std::span<const double> candidates);

  std::size_t draws() const { return train->draws(); }
  std::span<const double> grid_column(std::size_t g) const {
    return {grid_loglik.data() + g * draws(), draws()};
  }
};

/// Add-one-in predictive scores at one candidate: log sigma_1..log sigma_n
/// for the training data followed by log sigma_{n+1} for the candidate.
struct AoiResult {
  std::vector<double> log_scores;
  double ess = 0.0;

  std::vector<double> scores() const;
};

/// Importance-weighted add-one-in predictives at candidate `grid_index`.
/// Throws DegenerateWeightError when every weight is zero.
AoiResult aoi_predictives(const LikelihoodCache& cache, std::size_t grid_index);

/// Self-normalized importance weights at a candidate.
std::vector<double> normalized_weights(const LikelihoodCache& cache, std::size_t grid_index);

/// Effective sample size 1 / sum w^2 of normalized weights.
double effective_sample_size(std::span<const double> normalized);

/// Fraction of scores (the last one included) that are <= the last score.
/// Any monotone transform of the scores gives the same value.
double rank(std::span<const double> scores);

struct RankProfile {
  std::vector<double> test_x;
  std::vector<double> grid;
  std::vector<double> pi;
  std::vector<double> ess;
  /// Grid indices whose weights were all zero (only under MinimalRank).
  std::vector<std::size_t> degenerate;
  std::size_t n_train = 0;
  std::size_t draws = 0;
};

struct Interval {
  double lo;
  double hi;
};

/// {y in grid : pi(y) > alpha}. Regression sets are reported as maximal runs
/// of consecutive grid points; measure = spacing * included count.
/// Classification sets list the included labels; measure = label count.
struct PredictionSet {
  OutcomeKind kind = OutcomeKind::Real;
  double alpha = 0.0;
  std::vector<bool> included;
  std::vector<Interval> intervals;
  std::vector<int> labels;
  double measure = 0.0;

  bool empty() const;
  std::size_t count() const;
};

PredictionSet threshold(const ConformalGrid& grid, std::span<const double> pi, double alpha);

enum class DegeneratePolicy {
  Error,       ///< raise DegenerateWeightError
  MinimalRank  ///< assign pi = 1/(n+1) and record the grid index
};

struct ConformalOptions {
  DegeneratePolicy degenerate = DegeneratePolicy::Error;
  std::size_t workers = 1;
};

struct ConformalResult {
  RankProfile profile;
  PredictionSet set;
};

struct CoverageFlags {
  bool covered_grid = false;
  bool covered_exact = false;
  double pi_exact = 0.0;
  std::size_t nearest_index = 0;
};

/// Conformal Bayes predictor over fixed draws and training data. The
/// training likelihood block is computed once and shared by all queries.
class ConformalPredictor {
 public:
  ConformalPredictor(const LikelihoodModel& model, const PosteriorDraws& draws, const Dataset& train,
                     ConformalOptions options = {});

  RankProfile rank_profile(const Datum& test, const ConformalGrid& grid) const;
  ConformalResult conformal_set(const Datum& test, const ConformalGrid& grid, double alpha) const;
  /// Grid coverage (nearest grid point in the set) and exact coverage
  /// (pi evaluated directly at the observed outcome) of a labelled test point.
  CoverageFlags exact_rank_coverage(const Datum& test, const ConformalGrid& grid, double alpha) const;
  /// Same as above, reusing an already computed profile for the grid part.
  CoverageFlags exact_rank_coverage(const Datum& test, const ConformalGrid& grid, double alpha,
                                    const RankProfile& profile) const;

  double rank_at(const Datum& test, double y) const;

  std::size_t train_size() const { return train_->size(); }
  const LikelihoodModel& model() const { return model_; }
  const PosteriorDraws& draws() const { return draws_; }

 private:
  void check_test(const Datum& test) const;

  const LikelihoodModel& model_;
  const PosteriorDraws& draws_;
  std::shared_ptr<const TrainLikelihood> train_;
  ConformalOptions options_;
};

ConformalResult conformal_set(const LikelihoodModel& model, const PosteriorDraws& draws,
                              const Dataset& train, const Datum& test, const ConformalGrid& grid,
                              double alpha, ConformalOptions options = {});

CoverageFlags exact_rank_coverage(const LikelihoodModel& model, const PosteriorDraws& draws,
                                  const Dataset& train, const Datum& test, const ConformalGrid& grid,
                                  double alpha, ConformalOptions options = {});

void check_alpha(double alpha, const char* module);

}  // namespace cbayes

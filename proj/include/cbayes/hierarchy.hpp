#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "cbayes/conformal.hpp"

namespace cbayes {

/// Grouped dataset with per-group member indices. Every group 1..J occurs.
struct GroupedView {
  const Dataset* dataset = nullptr;
  std::size_t groups = 0;
  std::vector<std::size_t> group_sizes;           // n_j, index j-1
  std::vector<std::vector<std::size_t>> members;  // row indices, index j-1

  std::size_t size(int j) const { return group_sizes.at(static_cast<std::size_t>(j) - 1); }
};

GroupedView make_grouped_view(const Dataset& data, std::size_t groups);

/// Column view of the group-j marginal (theta_j, theta0_j, tau) inside
/// hierarchical draws. Holds indices only.
class GroupMarginalView {
 public:
  GroupMarginalView(const PosteriorDraws& draws, const LikelihoodModel& model, int group);

  int group() const { return group_; }
  std::size_t size() const { return draws_->size(); }
  double theta(std::size_t t, std::size_t k) const { return (*draws_).matrix()(t, theta_cols_[k]); }
  double theta0(std::size_t t) const { return draws_->matrix()(t, theta0_col_); }
  double tau(std::size_t t) const { return draws_->matrix()(t, tau_col_); }
  std::vector<std::size_t> columns() const;

 private:
  const PosteriorDraws* draws_;
  int group_;
  std::vector<Eigen::Index> theta_cols_;
  Eigen::Index theta0_col_;
  Eigen::Index tau_col_;
};

/// Per-group miscoverage levels. `feasible[j-1]` is false when
/// alpha_j < 1/(n_j+1), in which case the set is the whole grid.
struct GroupAlphaPolicy {
  std::vector<double> alpha;
  std::vector<bool> feasible;

  double at(int j) const { return alpha.at(static_cast<std::size_t>(j) - 1); }
};

GroupAlphaPolicy uniform_alphas(const GroupedView& view, double alpha);
/// alpha_j = min(multiplier / (n_j + 1), 1 - 1e-9), multiplier > 1.
GroupAlphaPolicy feasible_alphas(const GroupedView& view, double multiplier);

struct GroupConformalResult {
  ConformalResult result;
  int group = 0;
  double alpha = 0.0;
  bool feasible = true;
  std::optional<std::string> warning;
};

/// Within-group conformal prediction for a hierarchical model: scores are
/// computed for the members of the test point's group plus the candidate,
/// with weights from the group marginal (theta_j, tau), and ranked within
/// the group.
class GroupConformalPredictor {
 public:
  GroupConformalPredictor(const LikelihoodModel& model, const PosteriorDraws& draws, const GroupedView& view,
                          ConformalOptions options = {});

  GroupConformalResult conformal_set(const Datum& test, const ConformalGrid& grid, double alpha_j) const;
  CoverageFlags exact_rank_coverage(const Datum& test, const ConformalGrid& grid, double alpha_j,
                                    const RankProfile& profile) const;
  const ConformalPredictor& group(int j) const;
  std::size_t groups() const { return predictors_.size(); }

 private:
  const ConformalPredictor& predictor_for(const Datum& test) const;

  std::vector<std::size_t> sizes_;
  std::vector<ConformalPredictor> predictors_;
};

GroupConformalResult group_conformal_set(const LikelihoodModel& model, const PosteriorDraws& draws,
                                         const GroupedView& view, const std::vector<double>& test_x, int group,
                                         const ConformalGrid& grid, double alpha_j, ConformalOptions options = {});

}  // namespace cbayes

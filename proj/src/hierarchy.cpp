#include "cbayes/hierarchy.hpp"

#include <algorithm>
#include <cmath>

#include "cbayes/error.hpp"

namespace cbayes {

GroupedView make_grouped_view(const Dataset& data, std::size_t groups) {
  if (!data.grouped()) throw InputError("hierarchy", "dataset has no group column");
  GroupedView view;
  view.dataset = &data;
  view.groups = groups;
  view.group_sizes.assign(groups, 0);
  view.members.assign(groups, {});
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int j = *data[i].group;
    if (static_cast<std::size_t>(j) > groups) {
      throw InputError("hierarchy", "row " + std::to_string(i) + " has group " + std::to_string(j) +
                                        " outside 1.." + std::to_string(groups));
    }
    view.members[static_cast<std::size_t>(j) - 1].push_back(i);
    ++view.group_sizes[static_cast<std::size_t>(j) - 1];
  }
  for (std::size_t j = 0; j < groups; ++j) {
    if (view.group_sizes[j] == 0) {
      throw InputError("hierarchy", "group " + std::to_string(j + 1) +
                                        " has no training data; prediction for unseen groups is not supported");
    }
  }
  return view;
}

GroupMarginalView::GroupMarginalView(const PosteriorDraws& draws, const LikelihoodModel& model, int group)
    : draws_(&draws), group_(group) {
  if (model.family() != Family::HierarchicalGaussian) {
    throw InputError("hierarchy", "group marginals require the hierarchical model");
  }
  if (group < 1 || static_cast<std::size_t>(group) > model.groups()) {
    throw InputError("hierarchy", "unknown group " + std::to_string(group));
  }
  const auto& layout = model.layout();
  const Slot& theta = layout.at("theta." + std::to_string(group));
  for (std::size_t k = 0; k < theta.size; ++k) theta_cols_.push_back(static_cast<Eigen::Index>(theta.offset + k));
  theta0_col_ = static_cast<Eigen::Index>(layout.at("theta0." + std::to_string(group)).offset);
  tau_col_ = static_cast<Eigen::Index>(layout.at("tau").offset);
}

std::vector<std::size_t> GroupMarginalView::columns() const {
  std::vector<std::size_t> cols(theta_cols_.begin(), theta_cols_.end());
  cols.push_back(static_cast<std::size_t>(theta0_col_));
  cols.push_back(static_cast<std::size_t>(tau_col_));
  return cols;
}

namespace {

void mark_feasibility(const GroupedView& view, GroupAlphaPolicy& policy) {
  policy.feasible.resize(view.groups);
  for (std::size_t j = 0; j < view.groups; ++j) {
    policy.feasible[j] = policy.alpha[j] >= 1.0 / static_cast<double>(view.group_sizes[j] + 1);
  }
}

GroupConformalResult annotate(ConformalResult result, int group, double alpha_j, std::size_t nj) {
  GroupConformalResult r;
  r.result = std::move(result);
  r.group = group;
  r.alpha = alpha_j;
  r.feasible = alpha_j >= 1.0 / static_cast<double>(nj + 1);
  if (!r.feasible) {
    r.warning = "alpha_j = " + std::to_string(alpha_j) + " is below 1/(n_j+1) = " +
                std::to_string(1.0 / static_cast<double>(nj + 1)) + " for group " + std::to_string(group) +
                "; the prediction set is the whole grid";
  }
  return r;
}

}  // namespace

GroupAlphaPolicy uniform_alphas(const GroupedView& view, double alpha) {
  check_alpha(alpha, "hierarchy");
  GroupAlphaPolicy policy;
  policy.alpha.assign(view.groups, alpha);
  mark_feasibility(view, policy);
  return policy;
}

GroupAlphaPolicy feasible_alphas(const GroupedView& view, double multiplier) {
  if (!(multiplier > 1.0)) {
    throw InputError("hierarchy", "alpha multiplier must exceed 1, got " + std::to_string(multiplier));
  }
  GroupAlphaPolicy policy;
  for (std::size_t j = 0; j < view.groups; ++j) {
    policy.alpha.push_back(std::min(multiplier / static_cast<double>(view.group_sizes[j] + 1), 1.0 - 1e-9));
  }
  mark_feasibility(view, policy);
  return policy;
}

GroupConformalPredictor::GroupConformalPredictor(const LikelihoodModel& model, const PosteriorDraws& draws,
                                                 const GroupedView& view, ConformalOptions options)
    : sizes_(view.group_sizes) {
  if (model.family() != Family::HierarchicalGaussian) {
    throw InputError("hierarchy", "group conformal prediction requires the hierarchical model");
  }
  if (view.groups != model.groups()) {
    throw InputError("hierarchy", "grouped view has " + std::to_string(view.groups) + " groups, model has " +
                                      std::to_string(model.groups()));
  }
  predictors_.reserve(view.groups);
  for (std::size_t j = 0; j < view.groups; ++j) {
    const Dataset members = view.dataset->subset(view.members[j]);
    predictors_.emplace_back(model, draws, members, options);
  }
}

const ConformalPredictor& GroupConformalPredictor::group(int j) const {
  if (j < 1 || static_cast<std::size_t>(j) > predictors_.size()) {
    throw InputError("hierarchy", "unknown group " + std::to_string(j));
  }
  return predictors_[static_cast<std::size_t>(j) - 1];
}

const ConformalPredictor& GroupConformalPredictor::predictor_for(const Datum& test) const {
  if (!test.group) throw InputError("hierarchy", "test point has no group index");
  return group(*test.group);
}

GroupConformalResult GroupConformalPredictor::conformal_set(const Datum& test, const ConformalGrid& grid,
                                                            double alpha_j) const {
  const ConformalPredictor& p = predictor_for(test);
  const int j = *test.group;
  return annotate(p.conformal_set(test, grid, alpha_j), j, alpha_j, sizes_[static_cast<std::size_t>(j) - 1]);
}

CoverageFlags GroupConformalPredictor::exact_rank_coverage(const Datum& test, const ConformalGrid& grid,
                                                           double alpha_j, const RankProfile& profile) const {
  return predictor_for(test).exact_rank_coverage(test, grid, alpha_j, profile);
}

GroupConformalResult group_conformal_set(const LikelihoodModel& model, const PosteriorDraws& draws,
                                         const GroupedView& view, const std::vector<double>& test_x, int group,
                                         const ConformalGrid& grid, double alpha_j, ConformalOptions options) {
  if (group < 1 || static_cast<std::size_t>(group) > view.groups) {
    throw InputError("hierarchy", "unknown group " + std::to_string(group));
  }
  if (model.family() != Family::HierarchicalGaussian) {
    throw InputError("hierarchy", "group conformal prediction requires the hierarchical model");
  }
  Datum test{test_x, 0.0, group};
  const Dataset members = view.dataset->subset(view.members[static_cast<std::size_t>(group) - 1]);
  const ConformalPredictor predictor(model, draws, members, options);
  return annotate(predictor.conformal_set(test, grid, alpha_j), group, alpha_j,
                  view.group_sizes[static_cast<std::size_t>(group) - 1]);
}

}  // namespace cbayes

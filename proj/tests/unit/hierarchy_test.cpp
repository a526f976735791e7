#include <cmath>
#include <numeric>

#include "doctest.h"

#include "cbayes/error.hpp"
#include "cbayes/hierarchy.hpp"
#include "cbayes/rng.hpp"

using namespace cbayes;

namespace {

Dataset grouped_data(const std::vector<std::size_t>& sizes, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Datum> rows;
  for (std::size_t j = 0; j < sizes.size(); ++j) {
    for (std::size_t i = 0; i < sizes[j]; ++i) {
      const double x = rng.normal();
      rows.push_back({{x}, (0.5 - double(j)) * x + rng.normal(), int(j + 1)});
    }
  }
  // Interleave groups so that membership is not contiguous.
  std::vector<std::size_t> idx(rows.size());
  std::iota(idx.begin(), idx.end(), 0);
  rng.shuffle(std::span<std::size_t>(idx));
  return Dataset(rows).subset(idx);
}

PosteriorDraws hier_draws(const LikelihoodModel& model, std::size_t T, std::uint64_t seed) {
  Rng rng(seed);
  const auto pos = model.layout().positivity();
  DrawMatrix m(Eigen::Index(T), Eigen::Index(pos.size()));
  for (Eigen::Index t = 0; t < m.rows(); ++t) {
    for (Eigen::Index k = 0; k < m.cols(); ++k) {
      m(t, k) = pos[std::size_t(k)] ? std::exp(0.3 * rng.normal()) : 0.5 * rng.normal();
    }
  }
  return PosteriorDraws(model.layout(), m, DrawSource::ExternalFile);
}

}  // namespace

TEST_CASE("grouped view counts members") {
  const Dataset d = grouped_data({3, 5, 2}, 1);
  const GroupedView v = make_grouped_view(d, 3);
  CHECK(v.group_sizes == std::vector<std::size_t>{3, 5, 2});
  CHECK(v.size(2) == 5);
  for (int j = 1; j <= 3; ++j) {
    for (auto i : v.members[std::size_t(j - 1)]) CHECK(*d[i].group == j);
  }
  CHECK_THROWS_AS(make_grouped_view(d, 4), InputError);
  const Dataset flat({{{1.0}, 1.0, std::nullopt}});
  CHECK_THROWS_AS(make_grouped_view(flat, 1), InputError);
}

TEST_CASE("feasible alphas") {
  const Dataset d = grouped_data({4, 52, 10, 1}, 2);
  const GroupAlphaPolicy p = feasible_alphas(make_grouped_view(d, 4), 1.1);
  CHECK(p.at(1) == doctest::Approx(0.22));
  CHECK(p.at(2) == doctest::Approx(1.1 / 53));
  CHECK(p.at(3) <= 0.1);
  CHECK(p.at(4) == doctest::Approx(0.55));
  for (bool f : p.feasible) CHECK(f);
  CHECK_THROWS_AS(feasible_alphas(make_grouped_view(d, 4), 1.0), InputError);
  const GroupAlphaPolicy u = uniform_alphas(make_grouped_view(d, 4), 0.05);
  CHECK(u.feasible == std::vector<bool>{false, true, false, false});
}

TEST_CASE("a single group reproduces the ungrouped engine bit for bit") {
  const auto model = LikelihoodModel::hierarchical_gaussian(1, 1);
  const Dataset d = grouped_data({23}, 3);
  const auto draws = hier_draws(model, 400, 4);
  const ConformalGrid grid = ConformalGrid::regression(-5, 5, 50);
  const Datum test{{0.7}, 0.0, 1};
  const GroupedView view = make_grouped_view(d, 1);
  const auto g = group_conformal_set(model, draws, view, test.x, 1, grid, 0.2);
  const auto f = conformal_set(model, draws, d, test, grid, 0.2);
  CHECK(g.result.profile.pi == f.profile.pi);
  CHECK(g.result.profile.ess == f.profile.ess);
  CHECK(g.result.set.included == f.set.included);
  CHECK(g.feasible);
  CHECK_FALSE(g.warning);
}

TEST_CASE("group ranks use only the group members") {
  const auto model = LikelihoodModel::hierarchical_gaussian(1, 3);
  const Dataset d = grouped_data({6, 9, 4}, 5);
  const auto draws = hier_draws(model, 300, 6);
  const GroupedView view = make_grouped_view(d, 3);
  const GroupConformalPredictor pred(model, draws, view);
  const ConformalGrid grid = ConformalGrid::regression(-6, 6, 40);
  for (int j = 1; j <= 3; ++j) {
    const auto r = pred.conformal_set({{0.1}, 0.0, j}, grid, 0.2);
    const double n1 = double(view.size(j) + 1);
    CHECK(r.result.profile.n_train == view.size(j));
    for (double v : r.result.profile.pi) {
      CHECK(v >= 1.0 / n1);
      CHECK(std::abs(v * n1 - std::round(v * n1)) < 1e-9);
    }
  }
  CHECK_THROWS_AS(pred.conformal_set({{0.1}, 0.0, 4}, grid, 0.2), InputError);
}

TEST_CASE("one member per group gives ranks in {1/2, 1}") {
  const auto model = LikelihoodModel::hierarchical_gaussian(1, 2);
  const Dataset d = grouped_data({1, 3}, 7);
  const auto draws = hier_draws(model, 200, 8);
  const GroupedView view = make_grouped_view(d, 2);
  const ConformalGrid grid = ConformalGrid::regression(-30, 30, 61);
  const auto low = group_conformal_set(model, draws, view, {0.0}, 1, grid, 0.4);
  for (double v : low.result.profile.pi) CHECK((v == 0.5 || v == 1.0));
  CHECK(low.result.set.count() == grid.size());
  const auto high = group_conformal_set(model, draws, view, {0.0}, 1, grid, 0.6);
  CHECK(high.result.set.count() < grid.size());
}

TEST_CASE("infeasible alpha returns the whole grid with a warning") {
  const auto model = LikelihoodModel::hierarchical_gaussian(1, 2);
  const Dataset d = grouped_data({4, 4}, 9);
  const auto draws = hier_draws(model, 100, 10);
  const GroupedView view = make_grouped_view(d, 2);
  const ConformalGrid grid = ConformalGrid::regression(-5, 5, 21);
  const auto r = group_conformal_set(model, draws, view, {0.0}, 2, grid, 0.1);
  CHECK_FALSE(r.feasible);
  CHECK(r.warning);
  CHECK(r.result.set.count() == grid.size());
  CHECK(r.alpha == 0.1);
  CHECK(r.group == 2);
}

TEST_CASE("permuting within groups leaves group ranks unchanged") {
  const auto model = LikelihoodModel::hierarchical_gaussian(1, 3);
  const Dataset d = grouped_data({8, 5, 7}, 11);
  const auto draws = hier_draws(model, 250, 12);
  std::vector<std::size_t> idx(d.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(13);
  rng.shuffle(std::span<std::size_t>(idx));
  const Dataset p = d.subset(idx);
  const ConformalGrid grid = ConformalGrid::regression(-6, 6, 45);
  for (int j = 1; j <= 3; ++j) {
    const auto a = group_conformal_set(model, draws, make_grouped_view(d, 3), {0.3}, j, grid, 0.2);
    const auto b = group_conformal_set(model, draws, make_grouped_view(p, 3), {0.3}, j, grid, 0.2);
    CHECK(a.result.profile.pi == b.result.profile.pi);
  }
}

TEST_CASE("other groups reach the scores only through the posterior") {
  // Same draws, other group's data perturbed: group-1 ranks are unchanged,
  // but refitting on the perturbed data changes the group-1 scores.
  const auto model = LikelihoodModel::hierarchical_gaussian(1, 2);
  const Dataset d = grouped_data({6, 6}, 14);
  std::vector<Datum> rows = d.data();
  for (auto& z : rows) {
    if (*z.group == 2) z.y += 3.0;
  }
  const Dataset shifted(rows);
  const ConformalGrid grid = ConformalGrid::regression(-6, 6, 30);
  const auto draws = hier_draws(model, 200, 15);
  const auto a = group_conformal_set(model, draws, make_grouped_view(d, 2), {0.2}, 1, grid, 0.2);
  const auto b = group_conformal_set(model, draws, make_grouped_view(shifted, 2), {0.2}, 1, grid, 0.2);
  CHECK(a.result.profile.pi == b.result.profile.pi);

  MetropolisOptions o;
  o.draws = 400;
  o.tune = 400;
  o.seed = 3;
  const auto fit_a = sample_metropolis(model, d, o);
  const auto fit_b = sample_metropolis(model, shifted, o);
  const auto view_a = make_grouped_view(d, 2);
  const Dataset g1 = d.subset(view_a.members[0]);
  auto ta = std::make_shared<TrainLikelihood>(model, fit_a, g1);
  auto tb = std::make_shared<TrainLikelihood>(model, fit_b, g1);
  const std::vector<double> ys = {0.0};
  const auto ca = LikelihoodCache::build(model, fit_a, ta, {{0.2}, 0.0, 1}, ys);
  const auto cb = LikelihoodCache::build(model, fit_b, tb, {{0.2}, 0.0, 1}, ys);
  CHECK(aoi_predictives(ca, 0).log_scores != aoi_predictives(cb, 0).log_scores);
}

TEST_CASE("group conformal needs the hierarchical family") {
  RegressionPrior prior;
  const auto model = LikelihoodModel::gaussian_linear(1, prior);
  const Dataset d = grouped_data({3, 3}, 16);
  DrawMatrix m = DrawMatrix::Ones(2, 4);
  const PosteriorDraws draws(model.layout(), m, DrawSource::ExternalFile);
  CHECK_THROWS_AS(GroupConformalPredictor(model, draws, make_grouped_view(d, 2)), InputError);
}

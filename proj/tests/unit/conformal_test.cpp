#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "doctest.h"
#include "oracles.hpp"

#include "cbayes/conformal.hpp"
#include "cbayes/error.hpp"
#include "cbayes/rng.hpp"

using namespace cbayes;

namespace {

LikelihoodModel linear1() {
  RegressionPrior p;
  p.coefficients = CoefficientPrior::Normal;
  return LikelihoodModel::gaussian_linear(1, p);
}

PosteriorDraws draws_from(const LikelihoodModel& model, const std::vector<std::vector<double>>& rows) {
  DrawMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t t = 0; t < rows.size(); ++t) {
    for (std::size_t k = 0; k < rows[t].size(); ++k) m(Eigen::Index(t), Eigen::Index(k)) = rows[t][k];
  }
  return PosteriorDraws(model.layout(), m, DrawSource::ExternalFile);
}

Dataset linear_data(std::size_t n, std::uint64_t seed, double slope = 1.0) {
  Rng rng(seed);
  std::vector<Datum> rows;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.normal();
    rows.push_back({{x}, slope * x + rng.normal(), std::nullopt});
  }
  return Dataset(rows);
}

PosteriorDraws random_linear_draws(std::size_t T, std::uint64_t seed, double spread = 1.0) {
  Rng rng(seed);
  std::vector<std::vector<double>> rows;
  for (std::size_t t = 0; t < T; ++t) {
    rows.push_back({1.0 + spread * rng.normal(), spread * rng.normal(), std::exp(0.5 * spread * rng.normal())});
  }
  return draws_from(linear1(), rows);
}

std::vector<oracle::Point> to_points(const Dataset& d) {
  std::vector<oracle::Point> out;
  for (const auto& z : d) out.push_back({Eigen::VectorXd::Constant(1, z.x[0]), z.y});
  return out;
}

}  // namespace

TEST_CASE("rank examples") {
  CHECK(rank(std::vector<double>{0.3, 0.3, 0.3, 0.3}) == 1.0);
  CHECK(rank(std::vector<double>{0.5, 0.6, 0.7, 0.1}) == 0.25);
  CHECK(rank(std::vector<double>{0.2, 0.5, 0.1, 0.4, 0.3}) == doctest::Approx(0.6));
  CHECK_THROWS_AS(rank(std::vector<double>{1.0}), InputError);
}

TEST_CASE("one draw collapses the importance weights") {
  const auto model = linear1();
  const auto draws = draws_from(model, {{0.5, -0.2, 1.3}});
  const Dataset data = linear_data(6, 1);
  auto train = std::make_shared<TrainLikelihood>(model, draws, data);
  const std::vector<double> ys = {-1.0, 0.0, 2.0};
  const auto cache = LikelihoodCache::build(model, draws, train, {{0.4}, 0.0, std::nullopt}, ys);
  for (std::size_t g = 0; g < ys.size(); ++g) {
    const AoiResult r = aoi_predictives(cache, g);
    CHECK(r.ess == 1.0);
    for (std::size_t i = 0; i < data.size(); ++i) {
      CHECK(r.log_scores[i] == doctest::Approx(model.log_likelihood(draws.row(0), data[i])).epsilon(1e-13));
    }
    CHECK(r.log_scores.back() ==
          doctest::Approx(model.log_likelihood(draws.row(0), {{0.4}, ys[g], std::nullopt})).epsilon(1e-13));
  }
}

TEST_CASE("constant candidate likelihood gives uniform weights") {
  // With x_test = 0 the candidate likelihood depends on theta0 and tau only,
  // which are shared by every draw.
  const auto model = linear1();
  std::vector<std::vector<double>> rows;
  for (int t = 0; t < 8; ++t) rows.push_back({-1.0 + 0.3 * t, 0.2, 0.9});
  const auto draws = draws_from(model, rows);
  const Dataset data = linear_data(5, 2);
  auto train = std::make_shared<TrainLikelihood>(model, draws, data);
  const std::vector<double> ys = {0.7};
  const auto cache = LikelihoodCache::build(model, draws, train, {{0.0}, 0.0, std::nullopt}, ys);
  const AoiResult r = aoi_predictives(cache, 0);
  CHECK(r.ess == doctest::Approx(8.0).epsilon(1e-12));
  for (double w : normalized_weights(cache, 0)) CHECK(w == doctest::Approx(1.0 / 8).epsilon(1e-14));
  for (std::size_t i = 0; i < data.size(); ++i) {
    double mean = 0;
    for (std::size_t t = 0; t < 8; ++t) mean += std::exp(model.log_likelihood(draws.row(t), data[i])) / 8;
    CHECK(std::exp(r.log_scores[i]) == doctest::Approx(mean).epsilon(1e-12));
  }
}

TEST_CASE("importance-sampled predictives match the conjugate closed form") {
  const double sigma = 1.0;
  const Dataset data = linear_data(5, 3);
  const oracle::Gaussian prior{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1)};
  const auto model = conjugate_model(1, sigma);
  const PosteriorDraws draws =
      sample_conjugate_oracle(prior.mean, prior.cov, sigma, data, 100000, 11);
  auto train = std::make_shared<TrainLikelihood>(model, draws, data);
  const double x_new = 0.6;
  const std::vector<double> ys = {-2.0, -0.5, 0.0, 1.0, 2.5};
  const auto cache = LikelihoodCache::build(model, draws, train, {{x_new}, 0.0, std::nullopt}, ys);
  for (std::size_t g = 0; g < ys.size(); ++g) {
    const auto expected = oracle::augmented_scores(prior, sigma, to_points(data), Eigen::VectorXd::Constant(1, x_new), ys[g]);
    const auto got = aoi_predictives(cache, g).scores();
    for (std::size_t i = 0; i < expected.size(); ++i) CHECK(std::abs(got[i] / expected[i] - 1.0) < 0.01);
  }
}

TEST_CASE("conformal set agrees with the analytic refit on a toy problem") {
  const double sigma = 1.0;
  const Dataset data({{{0.5}, 0.8, std::nullopt}, {{-1.0}, -0.4, std::nullopt}, {{1.5}, 2.1, std::nullopt}});
  const oracle::Gaussian prior{Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1)};
  const auto model = conjugate_model(1, sigma);
  const PosteriorDraws draws = sample_conjugate_oracle(prior.mean, prior.cov, sigma, data, 100000, 21);
  const ConformalGrid grid = ConformalGrid::regression(-4, 4, 41);
  const Datum test{{0.3}, 0.0, std::nullopt};
  const ConformalResult r = conformal_set(model, draws, data, test, grid, 0.2);
  const auto expected =
      oracle::brute_force_set(prior, sigma, to_points(data), Eigen::VectorXd::Constant(1, 0.3), grid.points(), 0.2);
  CHECK(r.set.included == expected);
}

TEST_CASE("tiny alpha includes every grid point") {
  const auto model = linear1();
  const auto draws = random_linear_draws(50, 4);
  const Dataset data = linear_data(12, 5);
  const ConformalGrid grid = ConformalGrid::regression(-6, 6, 30);
  const auto r = conformal_set(model, draws, data, {{0.1}, 0.0, std::nullopt}, grid, 1e-9);
  CHECK(r.set.count() == grid.size());
  REQUIRE(r.set.intervals.size() == 1);
  CHECK(r.set.intervals[0].lo == -6.0);
  CHECK(r.set.intervals[0].hi == 6.0);
  CHECK(r.set.measure == doctest::Approx(12.0 * 30 / 29));
}

TEST_CASE("threshold groups runs into intervals") {
  const ConformalGrid grid = ConformalGrid::regression(0, 9, 10);
  const std::vector<double> pi = {0.1, 0.5, 0.5, 0.1, 0.9, 0.2, 0.3, 0.3, 0.3, 0.05};
  const PredictionSet s = threshold(grid, pi, 0.2);
  REQUIRE(s.intervals.size() == 3);
  CHECK(s.intervals[0].lo == 1.0);
  CHECK(s.intervals[0].hi == 2.0);
  CHECK(s.intervals[1].lo == 4.0);
  CHECK(s.intervals[1].hi == 4.0);
  CHECK(s.intervals[2].lo == 6.0);
  CHECK(s.intervals[2].hi == 8.0);
  CHECK(s.count() == 6);
  CHECK(s.measure == doctest::Approx(6.0));
  const PredictionSet none = threshold(grid, pi, 0.95);
  CHECK(none.empty());
  CHECK(none.intervals.empty());
  CHECK(none.measure == 0.0);
}

TEST_CASE("grid construction") {
  const ConformalGrid g = ConformalGrid::regression(-1, 1, 2);
  CHECK(g.points() == std::vector<double>{-1, 1});
  const ConformalGrid h = ConformalGrid::regression(0, 1, 7);
  for (std::size_t i = 1; i < h.size(); ++i) CHECK(h[i] - h[i - 1] == doctest::Approx(1.0 / 6).epsilon(1e-12));
  CHECK(h.hi() == 1.0);
  CHECK(ConformalGrid::regression(2, 2, 1).size() == 1);
  CHECK_THROWS_AS(ConformalGrid::regression(1, 0, 10), InputError);
  CHECK_THROWS_AS(ConformalGrid::regression(0, 1, 1), InputError);
  CHECK(ConformalGrid::classification().points() == std::vector<double>{0, 1});
  CHECK(h.nearest(0.5 / 6) == 0);
  CHECK(h.nearest(-3) == 0);
  CHECK(h.nearest(3) == 6);
}

TEST_CASE("default grid pads by two response units") {
  std::vector<Datum> rows = {{{0.0}, -2.1, std::nullopt}, {{1.0}, 2.4, std::nullopt}, {{2.0}, 0.3, std::nullopt}};
  Dataset d(rows);
  Standardization s;
  s.x_mean = {0.0};
  s.x_scale = {1.0};
  s.y_mean = 5.0;
  s.y_scale = 3.0;
  d.set_standardization(s);
  const ConformalGrid g = default_grid(d, 100);
  CHECK(g.lo() == doctest::Approx(-4.1));
  CHECK(g.hi() == doctest::Approx(4.4));
  CHECK(g.spacing() == doctest::Approx(8.5 / 99));
  CHECK(default_grid(d, 2).size() == 2);
  CHECK_THROWS_AS(default_grid(d, 1), InputError);
  CHECK_THROWS_AS(default_grid(d, 100, OutcomeKind::Binary), InputError);

  // Unstandardized response: pad by two population sds of y.
  const Dataset raw({{{0.0}, 0.0, std::nullopt}, {{0.0}, 2.0, std::nullopt}});
  const ConformalGrid r = default_grid(raw, 10);
  CHECK(r.lo() == doctest::Approx(-2.0));
  CHECK(r.hi() == doctest::Approx(4.0));
}

TEST_CASE("degenerate weights raise or fall back to the minimal rank") {
  const auto model = linear1();
  const auto draws = random_linear_draws(20, 6);
  const Dataset data = linear_data(9, 7);
  const ConformalGrid grid = ConformalGrid::regression(-1e160, 1e160, 3);
  const Datum test{{0.0}, 0.0, std::nullopt};
  try {
    ConformalPredictor(model, draws, data).rank_profile(test, grid);
    FAIL("expected a degenerate-weight error");
  } catch (const DegenerateWeightError& e) {
    CHECK(std::abs(e.grid_value()) == 1e160);
  }
  ConformalOptions o;
  o.degenerate = DegeneratePolicy::MinimalRank;
  const RankProfile p = ConformalPredictor(model, draws, data, o).rank_profile(test, grid);
  CHECK(p.degenerate == std::vector<std::size_t>{0, 2});
  CHECK(p.pi[0] == doctest::Approx(0.1));
  CHECK(p.pi[1] > 0.1);
}

TEST_CASE("exact coverage on a grid point agrees with grid coverage") {
  const auto model = linear1();
  const auto draws = random_linear_draws(200, 8, 0.3);
  const Dataset data = linear_data(30, 9);
  const ConformalGrid grid = ConformalGrid::regression(-5, 5, 41);
  const ConformalPredictor pred(model, draws, data);
  for (std::size_t g = 0; g < grid.size(); g += 3) {
    const Datum test{{0.2}, grid[g], std::nullopt};
    const auto f = pred.exact_rank_coverage(test, grid, 0.2);
    CHECK(f.nearest_index == g);
    CHECK(f.covered_grid == f.covered_exact);
  }
}

TEST_CASE("classification profiles live on the label grid") {
  const auto model = LikelihoodModel::logistic(1);
  std::vector<std::vector<double>> rows;
  Rng rng(10);
  for (int t = 0; t < 100; ++t) rows.push_back({2.0 + 0.3 * rng.normal(), 0.1 * rng.normal(), 1.0});
  const auto draws = draws_from(model, rows);
  std::vector<Datum> data;
  for (int i = 0; i < 20; ++i) {
    const double x = rng.normal();
    data.push_back({{x}, rng.bernoulli(1 / (1 + std::exp(-2 * x))) ? 1.0 : 0.0, std::nullopt});
  }
  const auto r = conformal_set(model, draws, Dataset(data), {{3.0}, 0.0, std::nullopt},
                               ConformalGrid::classification(), 0.2);
  CHECK(r.set.kind == OutcomeKind::Binary);
  CHECK(r.profile.pi.size() == 2);
  CHECK(r.set.labels == std::vector<int>{1});
  CHECK_THROWS_AS(conformal_set(model, draws, Dataset(data), {{3.0}, 0.0, std::nullopt},
                                ConformalGrid::regression(0, 1, 3), 0.2),
                  InputError);
}

// ----------------------------------------------------------- properties

TEST_CASE("property: weights sum to one and ess stays in [1, T]") {
  const auto model = linear1();
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(seed);
    const std::size_t T = 1 + rng.index(300);
    const auto draws = random_linear_draws(T, seed + 100, 0.1 + 3 * rng.uniform());
    const Dataset data = linear_data(1 + rng.index(20), seed + 200);
    auto train = std::make_shared<TrainLikelihood>(model, draws, data);
    std::vector<double> ys;
    for (int g = 0; g < 15; ++g) ys.push_back(rng.normal(0, 20));
    const auto cache = LikelihoodCache::build(model, draws, train, {{rng.normal()}, 0.0, std::nullopt}, ys);
    for (std::size_t g = 0; g < ys.size(); ++g) {
      const auto w = normalized_weights(cache, g);
      const double sum = std::accumulate(w.begin(), w.end(), 0.0);
      CHECK(std::abs(sum - 1.0) <= 1e-12);
      const double ess = aoi_predictives(cache, g).ess;
      CHECK(ess >= 1.0);
      CHECK(ess <= double(T));
    }
  }
}

TEST_CASE("property: ess equality cases") {
  for (std::size_t T : {1u, 2u, 7u, 1000u}) {
    const std::vector<double> uniform(T, 1.0 / double(T));
    CHECK(effective_sample_size(uniform) == doctest::Approx(double(T)).epsilon(1e-12));
    std::vector<double> one_hot(T, 0.0);
    one_hot[T / 2] = 1.0;
    CHECK(effective_sample_size(one_hot) == 1.0);
  }
}

TEST_CASE("property: ranks are at least 1/(n+1) and sets shrink with alpha") {
  const auto model = linear1();
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    Rng rng(seed + 50);
    const Dataset data = linear_data(2 + rng.index(25), seed + 300);
    const auto draws = random_linear_draws(50 + rng.index(100), seed + 400, 0.5);
    const ConformalGrid grid = ConformalGrid::regression(-8, 8, 60);
    const ConformalPredictor pred(model, draws, data);
    const RankProfile p = pred.rank_profile({{rng.normal()}, 0.0, std::nullopt}, grid);
    const double floor = 1.0 / double(data.size() + 1);
    for (double v : p.pi) {
      CHECK(v >= floor);
      CHECK(v <= 1.0);
      const double k = v * double(data.size() + 1);
      CHECK(std::abs(k - std::round(k)) < 1e-9);
    }
    for (double e : p.ess) {
      CHECK(e >= 1.0);
      CHECK(e <= double(draws.size()));
    }
    double a1 = rng.uniform(), a2 = rng.uniform();
    if (a1 > a2) std::swap(a1, a2);
    if (a1 <= 0.0) a1 = 1e-6;
    const PredictionSet s1 = threshold(grid, p.pi, a1);
    const PredictionSet s2 = threshold(grid, p.pi, a2);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      if (s2.included[g]) CHECK(s1.included[g]);
    }
  }
}

TEST_CASE("property: permuting the training data leaves pi bit-identical") {
  const auto model = linear1();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed + 900);
    const Dataset data = linear_data(5 + rng.index(40), seed + 500);
    const auto draws = random_linear_draws(37 + rng.index(200), seed + 600, 0.7);
    std::vector<std::size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(std::span<std::size_t>(idx));
    const Dataset permuted = data.subset(idx);
    const ConformalGrid grid = ConformalGrid::regression(-6, 6, 80);
    const Datum test{{rng.normal()}, 0.0, std::nullopt};
    const RankProfile a = ConformalPredictor(model, draws, data).rank_profile(test, grid);
    const RankProfile b = ConformalPredictor(model, draws, permuted).rank_profile(test, grid);
    CHECK(a.pi == b.pi);
    CHECK(a.ess == b.ess);
  }
}

TEST_CASE("parallel grid evaluation matches serial evaluation") {
  const auto model = linear1();
  const Dataset data = linear_data(25, 77);
  const auto draws = random_linear_draws(300, 78, 0.5);
  const ConformalGrid grid = ConformalGrid::regression(-6, 6, 97);
  ConformalOptions par;
  par.workers = 4;
  const Datum test{{0.4}, 0.0, std::nullopt};
  const RankProfile a = ConformalPredictor(model, draws, data).rank_profile(test, grid);
  const RankProfile b = ConformalPredictor(model, draws, data, par).rank_profile(test, grid);
  CHECK(a.pi == b.pi);
  CHECK(a.ess == b.ess);
}

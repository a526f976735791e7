#include <cmath>
#include <sstream>

#include "doctest.h"

#include "cbayes/dataset.hpp"
#include "cbayes/error.hpp"
#include "cbayes/rng.hpp"

using namespace cbayes;

namespace {

Dataset column(std::initializer_list<double> xs) {
  std::vector<Datum> d;
  for (double x : xs) d.push_back({{x}, x, std::nullopt});
  return Dataset(std::move(d));
}

}  // namespace

TEST_CASE("dataset rejects inconsistent rows") {
  CHECK_THROWS_AS(Dataset({{{1.0}, 0.0, std::nullopt}, {{1.0, 2.0}, 0.0, std::nullopt}}), InputError);
  CHECK_THROWS_AS(Dataset({{{1.0}, 0.0, 1}, {{1.0}, 0.0, std::nullopt}}), InputError);
  CHECK_THROWS_AS(Dataset({{{1.0}, 0.0, 0}}), InputError);
}

TEST_CASE("standardize uses the population sd") {
  const Dataset s = standardize(column({1, 2, 3}), OutcomeKind::Real);
  const double v = std::sqrt(1.5);  // 1 / sqrt(2/3)
  CHECK(s[0].x[0] == doctest::Approx(-v).epsilon(1e-12));
  CHECK(s[1].x[0] == doctest::Approx(0.0));
  CHECK(s[2].x[0] == doctest::Approx(v).epsilon(1e-12));
  CHECK(s[0].y == doctest::Approx(-v).epsilon(1e-12));
  REQUIRE(s.standardization());
  CHECK(s.standardization()->x_scale[0] == doctest::Approx(std::sqrt(2.0 / 3.0)));
}

TEST_CASE("standardize passes constant columns with scale 1") {
  const Dataset s = standardize(column({5, 5, 5}), OutcomeKind::Real);
  for (const auto& z : s) CHECK(z.x[0] == 0.0);
  CHECK(s.standardization()->x_scale[0] == 1.0);
}

TEST_CASE("standardize is idempotent and leaves binary outcomes alone") {
  Rng rng(3);
  std::vector<Datum> rows;
  for (int i = 0; i < 40; ++i) rows.push_back({{rng.normal(3, 2), rng.normal(-1, 5)}, double(i % 2), std::nullopt});
  const Dataset once = standardize(Dataset(rows), OutcomeKind::Binary);
  for (std::size_t k = 0; k < 2; ++k) {
    double m = 0, s = 0;
    for (const auto& z : once) m += z.x[k];
    m /= once.size();
    for (const auto& z : once) s += (z.x[k] - m) * (z.x[k] - m);
    CHECK(std::abs(m) < 1e-9);
    CHECK(std::abs(std::sqrt(s / once.size()) - 1.0) < 1e-9);
  }
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(once[i].y == rows[i].y);
  const Dataset twice = standardize(once, OutcomeKind::Binary);
  for (std::size_t i = 0; i < once.size(); ++i) {
    CHECK(twice[i].x[0] == doctest::Approx(once[i].x[0]).epsilon(1e-12));
  }
}

TEST_CASE("csv parses columns in any order with groups") {
  std::istringstream in("# comment\ngroup,y,x2,x1\n1,0.5,2,1\n2,1.5,4,3\n");
  const Dataset d = parse_dataset_csv(in);
  REQUIRE(d.size() == 2);
  CHECK(d.dim() == 2);
  CHECK(d.grouped());
  CHECK(d[1].x[0] == 3.0);
  CHECK(d[1].x[1] == 4.0);
  CHECK(d[1].y == 1.5);
  CHECK(*d[1].group == 2);
}

TEST_CASE("csv rejects missing values and gaps") {
  std::istringstream missing("x1,y\n1,\n");
  CHECK_THROWS_AS(parse_dataset_csv(missing), InputError);
  std::istringstream na("x1,y\nNA,1\n");
  CHECK_THROWS_AS(parse_dataset_csv(na), InputError);
  std::istringstream gap("x1,x3,y\n1,2,3\n");
  CHECK_THROWS_AS(parse_dataset_csv(gap), InputError);
  std::istringstream no_y("x1\n1\n");
  CHECK_THROWS_AS(parse_dataset_csv(no_y), InputError);
  std::istringstream no_y_ok("x1\n1\n");
  CHECK(parse_dataset_csv(no_y_ok, false).size() == 1);
}

TEST_CASE("csv round trip is exact") {
  Rng rng(11);
  std::vector<Datum> rows;
  for (int i = 0; i < 25; ++i) rows.push_back({{rng.normal(), rng.normal() * 1e-7}, rng.normal() * 1e5, 1 + i % 3});
  const Dataset d(rows);
  std::stringstream buf;
  write_dataset_csv(d, buf);
  const Dataset back = parse_dataset_csv(buf);
  REQUIRE(back.size() == d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(back[i].x == d[i].x);
    CHECK(back[i].y == d[i].y);
    CHECK(back[i].group == d[i].group);
  }
}

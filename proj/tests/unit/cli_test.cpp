#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"

#include "cbayes/cli.hpp"
#include "cbayes/rng.hpp"

namespace fs = std::filesystem;
using cbayes::cli::run;

namespace {

fs::path tmp_dir() {
  const fs::path p = fs::path(CBAYES_TEST_TMP) / "cli";
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& s) {
  std::ofstream out(p);
  out << s;
}

// y = 1 + 2x + noise on 15 points, plus two labelled test rows.
struct Files {
  fs::path train, test, unlabelled, grouped, grouped_test;
};

Files make_files() {
  const fs::path d = tmp_dir();
  Files f{d / "train.csv", d / "test.csv", d / "test_x.csv", d / "grouped.csv", d / "grouped_test.csv"};
  cbayes::Rng rng(3);
  std::ostringstream train, grouped;
  train << "x1,y\n";
  grouped << "x1,y,group\n";
  for (int i = 0; i < 15; ++i) {
    const double x = rng.normal();
    train << x << "," << 1 + 2 * x + 0.5 * rng.normal() << "\n";
    grouped << x << "," << (i % 3 + 1) * x + rng.normal() << "," << (i % 3 + 1) << "\n";
  }
  write(f.train, train.str());
  write(f.test, "x1,y\n0.3,1.6\n-1.0,-1.2\n");
  write(f.unlabelled, "x1\n0.3\n");
  write(f.grouped, grouped.str());
  write(f.grouped_test, "x1,y,group\n0.5,0.4,1\n0.5,1.5,3\n");
  return f;
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

}  // namespace

TEST_CASE("sample then conformal from stored draws") {
  const Files f = make_files();
  const fs::path draws = tmp_dir() / "draws.csv";
  const fs::path out = tmp_dir() / "cb.json";
  const std::string train_before = slurp(f.train);
  REQUIRE(run({"sample", "--data", f.train, "-T", "500", "--tune", "500", "--seed", "1", "--out", draws, "-q"}) == 0);
  REQUIRE(run({"conformal", "--data", f.train, "--draws", draws, "--test", f.test, "--grid", "-6:8:57", "--alpha",
               "0.2", "--out", out, "-q"}) == 0);
  const auto j = read_json(out);
  CHECK(j["format_version"] == 1);
  REQUIRE(j["results"].size() == 2);
  const auto& r = j["results"][0];
  CHECK(r["method"] == "cb");
  CHECK(r["pi"].size() == 57);
  CHECK(r["measure"].get<double>() > 0.0);
  CHECK(r.contains("covered_exact"));
  CHECK(slurp(f.train) == train_before);

  // Same draws and inputs give byte-identical output.
  const fs::path again = tmp_dir() / "cb2.json";
  REQUIRE(run({"conformal", "--data", f.train, "--draws", draws, "--test", f.test, "--grid", "-6:8:57", "--out",
               again, "-q", "--workers", "2"}) == 0);
  CHECK(read_json(again)["results"] == j["results"]);
}

TEST_CASE("bayes, split and diagnose subcommands") {
  const Files f = make_files();
  const fs::path out = tmp_dir() / "bayes.json";
  REQUIRE(run({"bayes", "--data", f.train, "--sample-inline", "-T", "400", "--tune", "400", "--seed", "2", "--test",
               f.unlabelled, "--out", out, "-q"}) == 0);
  const auto b = read_json(out);
  CHECK(b["results"][0]["method"] == "bayes");
  CHECK_FALSE(b["results"][0].contains("covered_exact"));

  const fs::path split = tmp_dir() / "split.json";
  REQUIRE(run({"split", "--data", f.train, "--test", f.test, "--seed", "4", "--out", split, "-q"}) == 0);
  CHECK(read_json(split)["results"][0]["bounded"] == true);

  const fs::path diag = tmp_dir() / "diag.csv";
  REQUIRE(run({"diagnose", "--data", f.train, "--sample-inline", "-T", "300", "--tune", "300", "--seed", "2",
               "--test", f.unlabelled, "--grid", "0:0:1", "--out", diag, "-q"}) == 0);
  std::istringstream lines(slurp(diag));
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(lines, line)) {
    if (!line.empty() && line[0] != '#') rows.push_back(line);
  }
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == "test,y,ess,scaled_ess,pi");
}

TEST_CASE("group conformal with a min-feasible policy") {
  const Files f = make_files();
  const fs::path out = tmp_dir() / "group.json";
  REQUIRE(run({"group-conformal", "--family", "hierarchical", "--groups", "3", "--no-intercept", "--data", f.grouped,
               "--sample-inline", "-T", "400", "--tune", "400", "--seed", "5", "--test", f.grouped_test,
               "--grid", "-8:8:33", "--alpha-policy", "min-feasible:1.1", "--out", out, "-q"}) == 0);
  const auto j = read_json(out);
  REQUIRE(j["results"].size() == 2);
  CHECK(j["results"][0]["group"] == 1);
  CHECK(j["results"][0]["alpha_j"].get<double>() == doctest::Approx(1.1 / 6.0));
  CHECK(j["results"][1]["group"] == 3);
}

TEST_CASE("exit codes") {
  const Files f = make_files();
  const fs::path draws = tmp_dir() / "draws_exit.csv";
  REQUIRE(run({"sample", "--data", f.train, "-T", "200", "--tune", "200", "--seed", "1", "--out", draws, "-q"}) == 0);
  const fs::path out = tmp_dir() / "exit.json";

  CHECK(run({"conformal", "--data", f.train, "--draws", draws, "--sample-inline", "--test", f.test, "-q"}) == 2);
  CHECK(run({"conformal", "--data", f.train, "--test", f.test, "-q"}) == 2);
  CHECK(run({"bench", "--scenario", "linear-wellspec", "-q"}) == 2);
  CHECK(run({"conformal", "--data", f.train, "--draws", draws, "--test", f.test, "--alpha", "1.5", "-q"}) == 2);
  CHECK(run({"conformal", "--data", (tmp_dir() / "missing.csv").string(), "--draws", draws, "--test", f.test,
             "-q"}) == 2);
  CHECK(run({"frobnicate"}) == 2);

  CHECK(run({"conformal", "--data", f.train, "--draws", draws, "--test", f.test, "--grid", "-1e160:1e160:3",
             "--out", out, "-q"}) == 3);
  CHECK(run({"conformal", "--data", f.train, "--draws", draws, "--test", f.test, "--grid", "-1e160:1e160:3",
             "--degenerate", "minimal", "--out", out, "-q"}) == 0);
  CHECK(read_json(out)["results"][0].contains("degenerate"));

  const fs::path bad = tmp_dir() / "bad.csv";
  write(bad, "x1,y\n0,1e200\n1,1\n2,2\n");
  CHECK(run({"conformal", "--data", bad, "--sample-inline", "-T", "50", "--tune", "50", "--seed", "1", "--grid", "-5:5:11", "--test",
             f.unlabelled, "-q"}) == 4);
}

TEST_CASE("bench writes json, csv and a table") {
  const fs::path out = tmp_dir() / "bench.json";
  const fs::path csv = tmp_dir() / "bench.csv";
  REQUIRE(run({"bench", "--scenario", "linear-wellspec", "--n", "20", "--n-test", "3", "-R", "2", "-T", "200",
               "--tune", "200", "--n-grid", "30", "--methods", "bayes,cb,split", "--seed", "9", "--out", out,
               "--csv", csv, "-q"}) == 0);
  const auto j = read_json(out);
  CHECK(j["format_version"] == 1);
  CHECK(j["results"]["rows"].size() == 3);
  const std::string text = slurp(csv);
  CHECK(text.rfind("# config: ", 0) == 0);
  CHECK(text.find("repeat,method,group,coverage,length,time") != std::string::npos);
}

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cbayes/baselines.hpp"
#include "cbayes/conformal.hpp"
#include "cbayes/hierarchy.hpp"

namespace cbayes {

enum class ScenarioKind { HierScenario1, HierScenario2, LinearWellspec, LinearMisspecTau, LogisticSim };

std::string to_string(ScenarioKind k);

/// Group slopes and residual sds held fixed across repeats.
struct FixedGroupParams {
  std::vector<double> theta;
  std::vector<double> tau;
};

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::LinearWellspec;
  std::string name;
  std::size_t groups = 5;
  std::size_t group_size = 10;
  std::size_t n = 100;
  std::size_t dim = 3;
  /// Test points per repeat for the ungrouped scenarios.
  std::size_t n_test = 10;
  std::optional<FixedGroupParams> fixed;
  /// Half-normal scale of the model's noise prior relative to the true
  /// noise sd (misspecified scenario only).
  double tau_prior_factor = 0.1;
  std::uint64_t seed = 0;

  bool grouped() const { return kind == ScenarioKind::HierScenario1 || kind == ScenarioKind::HierScenario2; }
  OutcomeKind outcome() const { return kind == ScenarioKind::LogisticSim ? OutcomeKind::Binary : OutcomeKind::Real; }
  void validate() const;
};

/// Named presets: paper-hier-1, paper-hier-2 (alias paper-hier), hier-1,
/// hier-2, linear-wellspec, linear-misspec-tau, logistic-sim.
ScenarioSpec scenario_preset(const std::string& name);
std::vector<std::string> scenario_names();

struct SimulatedData {
  Dataset train;
  Dataset test;
};

/// Draws one train/test pair from the scenario's generative process using spec.seed.
SimulatedData simulate(const ScenarioSpec& spec);

/// The model fitted to a scenario's data.
LikelihoodModel scenario_model(const ScenarioSpec& spec);

/// [-10, 10] for grouped scenarios, default_grid for the linear ones and
/// the label grid for classification.
ConformalGrid scenario_grid(const ScenarioSpec& spec, const Dataset& train, std::size_t n_grid);

enum class Method { Bayes, CB, Split };

std::string to_string(Method m);
Method parse_method(const std::string& name);

enum class CoverageMode { Grid, Exact };

struct BenchOptions {
  std::vector<Method> methods = {Method::Bayes, Method::CB};
  double alpha = 0.2;
  std::size_t repeats = 50;
  std::size_t draws = 8000;
  std::size_t tune = 4000;
  std::uint64_t seed = 0;
  std::size_t n_grid = 100;
  CoverageMode coverage = CoverageMode::Grid;
  /// Grouped scenarios: alpha_j = multiplier / (n_j + 1) instead of alpha.
  std::optional<double> group_alpha_multiplier;
  std::size_t workers = 1;
  std::function<void(const std::string&)> log;
};

/// Per-repeat tallies for one method and one group (group 0 = all test points).
struct CellRecord {
  std::size_t count = 0;
  std::size_t covered_grid = 0;
  std::size_t covered_exact = 0;
  double length_sum = 0.0;
  std::size_t unbounded = 0;
  std::size_t empty = 0;
  std::size_t both = 0;
  std::size_t singletons = 0;
  std::size_t singleton_errors = 0;

  double coverage(CoverageMode mode) const;
  double length() const;
};

struct MethodRepeat {
  Method method = Method::CB;
  double seconds = 0.0;
  std::size_t degenerate = 0;
  std::vector<CellRecord> cells;
};

struct RepeatRecord {
  std::size_t repeat = 0;
  std::uint64_t data_seed = 0;
  std::uint64_t sampler_seed = 0;
  double sampling_seconds = 0.0;
  std::vector<MethodRepeat> methods;
};

struct FailedRepeat {
  std::size_t repeat = 0;
  std::uint64_t sampler_seed = 0;
  std::string message;
};

struct SummaryStat {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

/// Mean and sd / sqrt(n) of per-repeat values.
SummaryStat summarize(const std::vector<double>& values);

struct MethodGroupSummary {
  Method method = Method::CB;
  int group = 0;  ///< 0 for overall
  SummaryStat coverage;
  SummaryStat coverage_grid;
  SummaryStat coverage_exact;
  SummaryStat length;
  SummaryStat seconds;
  std::optional<SummaryStat> empty_rate;
  std::optional<SummaryStat> both_rate;
  std::optional<SummaryStat> misclassification;
};

struct CoverageReport {
  ScenarioSpec scenario;
  BenchOptions options;
  double target = 0.8;
  std::vector<MethodGroupSummary> rows;
  SummaryStat sampling_seconds;
  std::vector<RepeatRecord> repeats;
  std::vector<FailedRepeat> failures;

  /// |coverage - target| > 3 se.
  bool miss(const MethodGroupSummary& row) const;
  const MethodGroupSummary& row(Method method, int group = 0) const;
};

/// Builds the summary rows from repeat records.
void aggregate(CoverageReport& report);

/// Runs R independent repeats; repeat r uses data seed derive_seed(seed, 1, r),
/// sampler seed derive_seed(seed, 2, r) and split seed derive_seed(seed, 3, r).
CoverageReport run_benchmark(const ScenarioSpec& spec, const BenchOptions& options);

/// Evaluates all methods on one train/test pair with given draws.
MethodRepeat evaluate_method(Method method, const ScenarioSpec& spec, const LikelihoodModel& model,
                             const PosteriorDraws& draws, const SimulatedData& data, const ConformalGrid& grid,
                             const BenchOptions& options, std::uint64_t split_seed);

}  // namespace cbayes

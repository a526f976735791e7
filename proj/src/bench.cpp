#include "cbayes/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>

#include "cbayes/error.hpp"
#include "cbayes/parallel.hpp"
#include "cbayes/rng.hpp"

namespace cbayes {

namespace {

const std::vector<double> kFixedTheta = {1.33, -0.77, -0.32, -0.99, -1.07};
const std::vector<double> kFixedTau = {1.24, 2.30, 0.76, 0.28, 1.11};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::vector<double> normal_vector(Rng& rng, std::size_t d, double sd = 1.0) {
  std::vector<double> v(d);
  for (auto& e : v) e = rng.normal(0.0, sd);
  return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

SimulatedData simulate_grouped(const ScenarioSpec& spec, Rng& rng) {
  const std::size_t J = spec.groups;
  std::vector<std::vector<double>> theta(J);
  std::vector<double> tau(J, 1.0);
  for (std::size_t j = 0; j < J; ++j) {
    theta[j] = spec.fixed ? std::vector<double>{spec.fixed->theta[j]} : normal_vector(rng, spec.dim);
  }
  if (spec.kind == ScenarioKind::HierScenario2) {
    for (std::size_t j = 0; j < J; ++j) tau[j] = spec.fixed ? spec.fixed->tau[j] : rng.exponential(1.0);
  }
  auto draw = [&](std::vector<Datum>& out) {
    for (std::size_t j = 0; j < J; ++j) {
      for (std::size_t i = 0; i < spec.group_size; ++i) {
        Datum z;
        z.x = normal_vector(rng, spec.dim);
        z.y = dot(theta[j], z.x) + tau[j] * rng.normal();
        z.group = static_cast<int>(j + 1);
        out.push_back(std::move(z));
      }
    }
  };
  std::vector<Datum> train, test;
  draw(train);
  draw(test);
  return {Dataset(std::move(train)), Dataset(std::move(test))};
}

SimulatedData simulate_flat(const ScenarioSpec& spec, Rng& rng) {
  const bool logistic = spec.kind == ScenarioKind::LogisticSim;
  const std::vector<double> theta = normal_vector(rng, spec.dim, logistic ? 3.0 : 1.0);
  const double theta0 = logistic ? 0.0 : rng.normal();
  auto draw = [&](std::size_t count) {
    std::vector<Datum> out(count);
    for (auto& z : out) {
      z.x = normal_vector(rng, spec.dim);
      const double eta = theta0 + dot(theta, z.x);
      z.y = logistic ? (rng.bernoulli(1.0 / (1.0 + std::exp(-eta))) ? 1.0 : 0.0) : eta + rng.normal();
    }
    return Dataset(std::move(out));
  };
  Dataset train = draw(spec.n);
  Dataset test = draw(spec.n_test);
  return {std::move(train), std::move(test)};
}

struct Tally {
  std::vector<CellRecord> cells;

  explicit Tally(std::size_t groups) : cells(groups + 1) {}

  template <typename F>
  void add(const Datum& z, F&& f) {
    f(cells[0]);
    if (z.group) f(cells[static_cast<std::size_t>(*z.group)]);
  }
};

void tally_labels(CellRecord& c, const std::vector<int>& labels, int truth) {
  const bool hit = std::find(labels.begin(), labels.end(), truth) != labels.end();
  c.count += 1;
  c.covered_grid += hit;
  c.covered_exact += hit;
  c.length_sum += static_cast<double>(labels.size());
  if (labels.empty()) {
    c.empty += 1;
  } else if (labels.size() == 1) {
    c.singletons += 1;
    c.singleton_errors += !hit;
  } else {
    c.both += 1;
  }
}

}  // namespace

std::string to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::HierScenario1: return "hier_scenario1";
    case ScenarioKind::HierScenario2: return "hier_scenario2";
    case ScenarioKind::LinearWellspec: return "linear_wellspec";
    case ScenarioKind::LinearMisspecTau: return "linear_misspec_tau";
    case ScenarioKind::LogisticSim: return "logistic_sim";
  }
  return "unknown";
}

void ScenarioSpec::validate() const {
  if (grouped()) {
    if (groups == 0 || group_size == 0) throw InputError("bench", "grouped scenarios need J >= 1 and n_j >= 1");
    if (fixed) {
      if (dim != 1) throw InputError("bench", "fixed group parameters need d = 1");
      if (fixed->theta.size() != groups) {
        throw InputError("bench", "fixed theta has " + std::to_string(fixed->theta.size()) + " entries for J = " +
                                      std::to_string(groups));
      }
      if (kind == ScenarioKind::HierScenario2 && fixed->tau.size() != groups) {
        throw InputError("bench", "fixed tau has " + std::to_string(fixed->tau.size()) + " entries for J = " +
                                      std::to_string(groups));
      }
    }
  } else {
    if (n < 4) throw InputError("bench", "scenarios need n >= 4 training points");
    if (n_test == 0) throw InputError("bench", "scenarios need at least one test point");
  }
  if (dim == 0) throw InputError("bench", "scenarios need d >= 1");
  if (kind == ScenarioKind::LinearMisspecTau && !(tau_prior_factor > 0.0)) {
    throw InputError("bench", "tau prior factor must be positive");
  }
}

ScenarioSpec scenario_preset(const std::string& name) {
  ScenarioSpec s;
  s.name = name;
  if (name == "paper-hier-1" || name == "hier-1") {
    s.kind = ScenarioKind::HierScenario1;
    s.dim = 1;
    if (name == "paper-hier-1") s.fixed = FixedGroupParams{kFixedTheta, {}};
  } else if (name == "paper-hier-2" || name == "paper-hier" || name == "hier-2") {
    s.kind = ScenarioKind::HierScenario2;
    s.dim = 1;
    if (name != "hier-2") s.fixed = FixedGroupParams{kFixedTheta, kFixedTau};
  } else if (name == "linear-wellspec") {
    s.kind = ScenarioKind::LinearWellspec;
  } else if (name == "linear-misspec-tau") {
    s.kind = ScenarioKind::LinearMisspecTau;
    s.n = 50;
  } else if (name == "logistic-sim") {
    s.kind = ScenarioKind::LogisticSim;
    s.dim = 5;
  } else {
    std::string known;
    for (const auto& n : scenario_names()) known += (known.empty() ? "" : ", ") + n;
    throw InputError("bench", "unknown scenario '" + name + "'; expected one of " + known);
  }
  return s;
}

std::vector<std::string> scenario_names() {
  return {"paper-hier-1", "paper-hier-2", "paper-hier", "hier-1", "hier-2",
          "linear-wellspec", "linear-misspec-tau", "logistic-sim"};
}

SimulatedData simulate(const ScenarioSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  return spec.grouped() ? simulate_grouped(spec, rng) : simulate_flat(spec, rng);
}

LikelihoodModel scenario_model(const ScenarioSpec& spec) {
  switch (spec.kind) {
    case ScenarioKind::HierScenario1:
    case ScenarioKind::HierScenario2:
      return LikelihoodModel::hierarchical_gaussian(spec.dim, spec.groups);
    case ScenarioKind::LogisticSim:
      return LikelihoodModel::logistic(spec.dim);
    case ScenarioKind::LinearWellspec:
    case ScenarioKind::LinearMisspecTau: {
      RegressionPrior prior;
      prior.coefficients = CoefficientPrior::Normal;
      prior.normal_sd = 1.0;
      // The true noise sd is 1.
      prior.tau_scale = spec.kind == ScenarioKind::LinearMisspecTau ? spec.tau_prior_factor : 1.0;
      return LikelihoodModel::gaussian_linear(spec.dim, prior);
    }
  }
  throw InputError("bench", "unknown scenario kind");
}

ConformalGrid scenario_grid(const ScenarioSpec& spec, const Dataset& train, std::size_t n_grid) {
  if (spec.outcome() == OutcomeKind::Binary) return ConformalGrid::classification();
  if (spec.grouped()) return ConformalGrid::regression(-10.0, 10.0, n_grid);
  return default_grid(train, n_grid);
}

std::string to_string(Method m) {
  switch (m) {
    case Method::Bayes: return "bayes";
    case Method::CB: return "cb";
    case Method::Split: return "split";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  if (name == "bayes") return Method::Bayes;
  if (name == "cb") return Method::CB;
  if (name == "split") return Method::Split;
  throw InputError("bench", "unknown method '" + name + "'; expected bayes, cb or split");
}

double CellRecord::coverage(CoverageMode mode) const {
  if (count == 0) return std::numeric_limits<double>::quiet_NaN();
  return static_cast<double>(mode == CoverageMode::Grid ? covered_grid : covered_exact) / static_cast<double>(count);
}

double CellRecord::length() const {
  if (count == 0) return std::numeric_limits<double>::quiet_NaN();
  if (unbounded > 0) return std::numeric_limits<double>::infinity();
  return length_sum / static_cast<double>(count);
}

SummaryStat summarize(const std::vector<double>& values) {
  SummaryStat s;
  s.n = values.size();
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() < 2 || !std::isfinite(s.mean)) return s;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  return s;
}

bool CoverageReport::miss(const MethodGroupSummary& row) const {
  return std::abs(row.coverage.mean - target) > 3.0 * row.coverage.se;
}

const MethodGroupSummary& CoverageReport::row(Method method, int group) const {
  for (const auto& r : rows) {
    if (r.method == method && r.group == group) return r;
  }
  throw InputError("bench", "no report row for method " + to_string(method) + " group " + std::to_string(group));
}

MethodRepeat evaluate_method(Method method, const ScenarioSpec& spec, const LikelihoodModel& model,
                             const PosteriorDraws& draws, const SimulatedData& data, const ConformalGrid& grid,
                             const BenchOptions& options, std::uint64_t split_seed) {
  const std::size_t J = spec.grouped() ? spec.groups : 0;
  const bool binary = spec.outcome() == OutcomeKind::Binary;
  Tally tally(J);
  MethodRepeat out;
  out.method = method;
  const auto start = std::chrono::steady_clock::now();

  switch (method) {
    case Method::Bayes:
      for (const Datum& z : data.test) {
        if (binary) {
          const auto r = bayes_class_set(model, draws, z.x, options.alpha);
          tally.add(z, [&](CellRecord& c) { tally_labels(c, r.labels, static_cast<int>(z.y)); });
          continue;
        }
        const auto ci = bayes_interval(model, draws, z, grid, options.alpha);
        const bool on_grid = ci.contains(grid[grid.nearest(z.y)]);
        const bool exact = ci.contains(z.y);
        tally.add(z, [&](CellRecord& c) {
          c.count += 1;
          c.covered_grid += on_grid;
          c.covered_exact += exact;
          c.length_sum += ci.length();
        });
      }
      break;

    case Method::CB: {
      ConformalOptions copt;
      copt.degenerate = DegeneratePolicy::MinimalRank;
      copt.workers = 1;
      auto record = [&](const Datum& z, const ConformalResult& res, const CoverageFlags& flags) {
        out.degenerate += res.profile.degenerate.size();
        if (binary) {
          tally.add(z, [&](CellRecord& c) { tally_labels(c, res.set.labels, static_cast<int>(z.y)); });
          return;
        }
        tally.add(z, [&](CellRecord& c) {
          c.count += 1;
          c.covered_grid += flags.covered_grid;
          c.covered_exact += flags.covered_exact;
          c.length_sum += res.set.measure;
        });
      };
      if (spec.grouped()) {
        const GroupedView view = make_grouped_view(data.train, spec.groups);
        const GroupAlphaPolicy policy = options.group_alpha_multiplier
                                            ? feasible_alphas(view, *options.group_alpha_multiplier)
                                            : uniform_alphas(view, options.alpha);
        const GroupConformalPredictor predictor(model, draws, view, copt);
        for (const Datum& z : data.test) {
          const double aj = policy.at(*z.group);
          const auto res = predictor.conformal_set(z, grid, aj);
          record(z, res.result, predictor.exact_rank_coverage(z, grid, aj, res.result.profile));
        }
      } else {
        const ConformalPredictor predictor(model, draws, data.train, copt);
        for (const Datum& z : data.test) {
          const auto res = predictor.conformal_set(z, grid, options.alpha);
          record(z, res, predictor.exact_rank_coverage(z, grid, options.alpha, res.profile));
        }
      }
      break;
    }

    case Method::Split: {
      if (binary) throw InputError("bench", "the split baseline is defined for regression scenarios only");
      const SplitConformal split(data.train, options.alpha, split_seed);
      for (const Datum& z : data.test) {
        const auto s = split.predict(z.x);
        const bool hit = s.contains(z.y);
        tally.add(z, [&](CellRecord& c) {
          c.count += 1;
          c.covered_grid += hit;
          c.covered_exact += hit;
          if (s.bounded) {
            c.length_sum += s.length();
          } else {
            c.unbounded += 1;
          }
        });
      }
      break;
    }
  }
  out.seconds = seconds_since(start);
  out.cells = std::move(tally.cells);
  return out;
}

void aggregate(CoverageReport& report) {
  report.rows.clear();
  report.target = 1.0 - report.options.alpha;
  const std::size_t J = report.scenario.grouped() ? report.scenario.groups : 0;
  const bool binary = report.scenario.outcome() == OutcomeKind::Binary;

  std::vector<double> sampling;
  for (const auto& r : report.repeats) sampling.push_back(r.sampling_seconds);
  report.sampling_seconds = summarize(sampling);

  for (std::size_t m = 0; m < report.options.methods.size(); ++m) {
    for (std::size_t g = 0; g <= J; ++g) {
      MethodGroupSummary row;
      row.method = report.options.methods[m];
      row.group = static_cast<int>(g);
      std::vector<double> cov, cov_grid, cov_exact, len, secs, empty, both, mis;
      for (const auto& r : report.repeats) {
        const MethodRepeat& mr = r.methods[m];
        const CellRecord& c = mr.cells[g];
        if (c.count == 0) continue;
        cov.push_back(c.coverage(report.options.coverage));
        cov_grid.push_back(c.coverage(CoverageMode::Grid));
        cov_exact.push_back(c.coverage(CoverageMode::Exact));
        len.push_back(c.length());
        secs.push_back(mr.seconds);
        const double n = static_cast<double>(c.count);
        empty.push_back(static_cast<double>(c.empty) / n);
        both.push_back(static_cast<double>(c.both) / n);
        if (c.singletons > 0) {
          mis.push_back(static_cast<double>(c.singleton_errors) / static_cast<double>(c.singletons));
        }
      }
      row.coverage = summarize(cov);
      row.coverage_grid = summarize(cov_grid);
      row.coverage_exact = summarize(cov_exact);
      row.length = summarize(len);
      row.seconds = summarize(secs);
      if (binary) {
        row.empty_rate = summarize(empty);
        row.both_rate = summarize(both);
        if (!mis.empty()) row.misclassification = summarize(mis);
      }
      report.rows.push_back(row);
    }
  }
}

CoverageReport run_benchmark(const ScenarioSpec& spec, const BenchOptions& options) {
  spec.validate();
  check_alpha(options.alpha, "bench");
  if (options.repeats < 2) throw InputError("bench", "the benchmark needs R >= 2 repeats");
  if (options.methods.empty()) throw InputError("bench", "no methods requested");
  if (options.draws == 0) throw InputError("bench", "T must be positive");
  if (options.group_alpha_multiplier && !spec.grouped()) {
    throw InputError("bench", "a per-group alpha policy needs a grouped scenario");
  }
  for (Method m : options.methods) {
    if (m == Method::Split && spec.outcome() == OutcomeKind::Binary) {
      throw InputError("bench", "the split baseline is defined for regression scenarios only");
    }
  }
  const LikelihoodModel model = scenario_model(spec);

  std::vector<std::optional<RepeatRecord>> slots(options.repeats);
  std::vector<std::optional<FailedRepeat>> failed(options.repeats);
  std::mutex log_mutex;
  auto log = [&](const std::string& msg) {
    if (!options.log) return;
    std::lock_guard<std::mutex> lock(log_mutex);
    options.log(msg);
  };

  parallel_for(options.repeats, std::max<std::size_t>(options.workers, 1), [&](std::size_t r) {
    RepeatRecord rec;
    rec.repeat = r;
    rec.data_seed = derive_seed(options.seed, 1, r);
    rec.sampler_seed = derive_seed(options.seed, 2, r);
    const std::uint64_t split_seed = derive_seed(options.seed, 3, r);

    ScenarioSpec s = spec;
    s.seed = rec.data_seed;
    const SimulatedData data = simulate(s);
    const ConformalGrid grid = scenario_grid(spec, data.train, options.n_grid);

    MetropolisOptions mo;
    mo.draws = options.draws;
    mo.tune = options.tune;
    mo.seed = rec.sampler_seed;
    const auto start = std::chrono::steady_clock::now();
    std::optional<PosteriorDraws> draws;
    try {
      draws.emplace(sample_metropolis(model, data.train, mo));
    } catch (const SamplerError& e) {
      failed[r] = FailedRepeat{r, rec.sampler_seed, e.what()};
      log("repeat " + std::to_string(r) + " aborted (sampler seed " + std::to_string(rec.sampler_seed) +
          "): " + e.what());
      return;
    }
    rec.sampling_seconds = seconds_since(start);
    for (Method m : options.methods) {
      rec.methods.push_back(evaluate_method(m, spec, model, *draws, data, grid, options, split_seed));
    }
    slots[r] = std::move(rec);
    log("repeat " + std::to_string(r + 1) + "/" + std::to_string(options.repeats) + " done");
  });

  CoverageReport report;
  report.scenario = spec;
  report.options = options;
  report.options.log = nullptr;
  for (std::size_t r = 0; r < options.repeats; ++r) {
    if (slots[r]) report.repeats.push_back(std::move(*slots[r]));
    if (failed[r]) report.failures.push_back(std::move(*failed[r]));
  }
  if (report.repeats.size() < 2) {
    throw SamplerError("bench", "fewer than 2 repeats completed; " + std::to_string(report.failures.size()) +
                       " sampler failures");
  }
  aggregate(report);
  return report;
}

}  // namespace cbayes

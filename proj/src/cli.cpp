#include "cbayes/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "cbayes/baselines.hpp"
#include "cbayes/bench.hpp"
#include "cbayes/conformal.hpp"
#include "cbayes/error.hpp"
#include "cbayes/hierarchy.hpp"
#include "cbayes/parallel.hpp"
#include "cbayes/posterior.hpp"
#include "cbayes/report.hpp"

namespace cbayes::cli {

namespace {

using report::json;

struct RunConfig {
  std::string subcommand;

  std::string family = "gaussian";
  std::string prior = "laplace";
  double prior_sd = 1.0;
  bool no_intercept = false;
  std::optional<double> intercept_sd;
  double tau_scale = 1.0;
  std::optional<double> fixed_tau;
  std::optional<std::size_t> groups;
  bool standardize = false;

  std::string data;
  std::string draws;
  bool sample_inline = false;
  std::string test;
  std::string out;
  std::string dump_rank;
  std::string csv;

  double alpha = 0.2;
  std::string alpha_policy;
  std::string grid = "auto";
  std::size_t n_grid = 100;
  std::string degenerate = "error";

  std::size_t num_draws = 8000;
  std::size_t tune = 4000;
  std::optional<std::uint64_t> seed;
  std::size_t chains = 1;
  std::size_t workers = default_workers();

  std::string scenario;
  std::size_t repeats = 50;
  std::string methods = "bayes,cb";
  std::string coverage = "grid";
  std::optional<std::size_t> n;
  std::optional<std::size_t> dim;
  std::optional<std::size_t> n_test;
  bool quiet = false;
};

template <class T>
json opt_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

json config_json(const RunConfig& c) {
  json j;
  j["subcommand"] = c.subcommand;
  if (c.subcommand == "bench") {
    j["scenario"] = c.scenario;
    j["repeats"] = c.repeats;
    j["methods"] = c.methods;
    j["coverage"] = c.coverage;
    j["alpha"] = c.alpha;
    j["alpha_policy"] = c.alpha_policy;
    j["n_grid"] = c.n_grid;
    j["T"] = c.num_draws;
    j["tune"] = c.tune;
    j["seed"] = opt_json(c.seed);
    j["n"] = opt_json(c.n);
    j["dim"] = opt_json(c.dim);
    j["n_test"] = opt_json(c.n_test);
    j["workers"] = c.workers;
    return j;
  }
  j["model"] = {{"family", c.family},         {"prior", c.prior},
                {"prior_sd", c.prior_sd},     {"intercept", !c.no_intercept},
                {"intercept_sd", opt_json(c.intercept_sd)}, {"tau_scale", c.tau_scale},
                {"fixed_tau", opt_json(c.fixed_tau)},       {"groups", opt_json(c.groups)}};
  j["data"] = c.data;
  j["standardize"] = c.standardize;
  j["draws"] = c.draws.empty() ? json(nullptr) : json(c.draws);
  j["sample_inline"] = c.sample_inline;
  j["test"] = c.test.empty() ? json(nullptr) : json(c.test);
  j["alpha"] = c.alpha;
  j["alpha_policy"] = c.alpha_policy;
  j["grid"] = c.grid;
  j["n_grid"] = c.n_grid;
  j["degenerate"] = c.degenerate;
  j["T"] = c.num_draws;
  j["tune"] = c.tune;
  j["seed"] = opt_json(c.seed);
  j["chains"] = c.chains;
  j["workers"] = c.workers;
  return j;
}

std::string config_comment(const RunConfig& c) { return "# config: " + config_json(c).dump() + "\n"; }

void emit(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    std::cout.flush();
  } else {
    report::write_atomic(path, content);
  }
}

bool file_has_column(const std::string& path, const std::string& name) {
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
      field.erase(0, field.find_first_not_of(" \t\r"));
      field.erase(field.find_last_not_of(" \t\r") + 1);
      if (field == name) return true;
    }
    return false;
  }
  return false;
}

OutcomeKind outcome_kind(const RunConfig& c) {
  return c.family == "logistic" ? OutcomeKind::Binary : OutcomeKind::Real;
}

Dataset load_train(const RunConfig& c) {
  Dataset raw = read_dataset_csv(c.data);
  return c.standardize ? standardize(raw, outcome_kind(c)) : raw;
}

struct TestSet {
  Dataset data;
  bool labelled = false;
};

TestSet load_test(const RunConfig& c, const Dataset& train) {
  TestSet t;
  t.labelled = file_has_column(c.test, "y");
  Dataset raw = read_dataset_csv(c.test, false);
  if (raw.dim() != train.dim()) {
    throw InputError("likelihoods", "test covariates have dimension " + std::to_string(raw.dim()) +
                                        " but the training data have " + std::to_string(train.dim()));
  }
  if (!train.standardization()) {
    t.data = std::move(raw);
    return t;
  }
  std::vector<Datum> rows;
  for (const Datum& z : raw) rows.push_back(train.standardization()->apply(z));
  t.data = Dataset(std::move(rows));
  return t;
}

LikelihoodModel build_model(const RunConfig& c, const Dataset& train) {
  if (c.family == "hierarchical") {
    const std::size_t J = c.groups ? *c.groups : static_cast<std::size_t>(std::max(train.max_group(), 0));
    if (J == 0) throw InputError("likelihoods", "the hierarchical family needs a 'group' column or --groups");
    return LikelihoodModel::hierarchical_gaussian(train.dim(), J);
  }
  RegressionPrior p;
  p.coefficients = c.prior == "normal" ? CoefficientPrior::Normal : CoefficientPrior::Laplace;
  p.normal_sd = c.prior_sd;
  p.intercept = !c.no_intercept;
  p.intercept_sd = c.intercept_sd;
  p.tau_scale = c.tau_scale;
  p.fixed_tau = c.fixed_tau;
  if (c.family == "logistic") return LikelihoodModel::logistic(train.dim(), p);
  return LikelihoodModel::gaussian_linear(train.dim(), p);
}

PosteriorDraws obtain_draws(const RunConfig& c, const LikelihoodModel& model, const Dataset& train) {
  if (!c.draws.empty()) return ingest_draws(c.draws, model);
  MetropolisOptions mo;
  mo.draws = c.num_draws;
  mo.tune = c.tune;
  mo.seed = c.seed.value_or(0);
  mo.chains = c.chains;
  mo.workers = c.workers;
  return sample_metropolis(model, train, mo);
}

ConformalGrid make_grid(const RunConfig& c, const LikelihoodModel& model, const Dataset& train) {
  if (model.outcome_kind() == OutcomeKind::Binary) return ConformalGrid::classification();
  if (c.grid == "auto") return default_grid(train, c.n_grid);
  std::vector<std::string> parts;
  std::stringstream ss(c.grid);
  std::string part;
  while (std::getline(ss, part, ':')) parts.push_back(part);
  try {
    if (parts.size() != 3) throw std::invalid_argument("parts");
    std::size_t used = 0;
    const double lo = std::stod(parts[0], &used);
    if (used != parts[0].size()) throw std::invalid_argument("lo");
    const double hi = std::stod(parts[1], &used);
    if (used != parts[1].size()) throw std::invalid_argument("hi");
    const long n = std::stol(parts[2], &used);
    if (used != parts[2].size() || n < 1) throw std::invalid_argument("n");
    return ConformalGrid::regression(lo, hi, static_cast<std::size_t>(n));
  } catch (const std::logic_error&) {
    throw InputError("cli", "--grid '" + c.grid + "' is not 'auto' or lo:hi:n");
  }
}

ConformalOptions conformal_options(const RunConfig& c) {
  ConformalOptions o;
  o.degenerate = c.degenerate == "minimal" ? DegeneratePolicy::MinimalRank : DegeneratePolicy::Error;
  o.workers = c.workers;
  return o;
}

GroupAlphaPolicy parse_alpha_policy(const RunConfig& c, const GroupedView& view) {
  if (c.alpha_policy.empty()) return uniform_alphas(view, c.alpha);
  const auto colon = c.alpha_policy.find(':');
  const std::string kind = c.alpha_policy.substr(0, colon);
  double value = 0.0;
  try {
    if (colon == std::string::npos) throw std::invalid_argument("value");
    std::size_t used = 0;
    const std::string rest = c.alpha_policy.substr(colon + 1);
    value = std::stod(rest, &used);
    if (used != rest.size()) throw std::invalid_argument("value");
  } catch (const std::logic_error&) {
    throw InputError("cli", "--alpha-policy '" + c.alpha_policy + "' is not uniform:a or min-feasible:m");
  }
  if (kind == "uniform") return uniform_alphas(view, value);
  if (kind == "min-feasible") return feasible_alphas(view, value);
  throw InputError("cli", "--alpha-policy '" + c.alpha_policy + "' is not uniform:a or min-feasible:m");
}

void add_labels(json& j, const Datum& z, bool labelled) {
  if (labelled) j["y"] = z.y;
}

std::string rank_dump_header(const RunConfig& c) { return config_comment(c) + "test,y,pi,ess\n"; }

void append_rank_rows(std::ostringstream& os, std::size_t test, const RankProfile& p) {
  for (std::size_t g = 0; g < p.grid.size(); ++g) {
    os << test << ',' << p.grid[g] << ',' << p.pi[g] << ',' << p.ess[g] << '\n';
  }
}

// ------------------------------------------------------------- subcommands

int cmd_sample(const RunConfig& c) {
  const Dataset train = load_train(c);
  const LikelihoodModel model = build_model(c, train);
  RunConfig inline_cfg = c;
  inline_cfg.draws.clear();
  const PosteriorDraws draws = obtain_draws(inline_cfg, model, train);
  std::ostringstream os;
  os << config_comment(c);
  write_draws(draws, os);
  emit(c.out, os.str());
  if (!c.quiet && draws.diagnostics()) {
    const auto& d = *draws.diagnostics();
    const auto names = model.layout().column_names();
    std::cerr << "acceptance:";
    for (std::size_t k = 0; k < names.size(); ++k) std::cerr << ' ' << names[k] << '=' << d.acceptance[k];
    std::cerr << " block=" << d.block_acceptance << '\n';
  }
  return kOk;
}

int cmd_conformal(const RunConfig& c) {
  const Dataset train = load_train(c);
  const LikelihoodModel model = build_model(c, train);
  const TestSet test = load_test(c, train);
  const ConformalGrid grid = make_grid(c, model, train);
  const PosteriorDraws draws = obtain_draws(c, model, train);
  const ConformalPredictor predictor(model, draws, train, conformal_options(c));

  json results = json::array();
  std::ostringstream dump;
  dump << std::setprecision(17) << rank_dump_header(c);
  for (std::size_t i = 0; i < test.data.size(); ++i) {
    const Datum& z = test.data[i];
    const ConformalResult res = predictor.conformal_set(z, grid, c.alpha);
    json j = report::conformal_json(z, grid, res);
    if (model.outcome_kind() == OutcomeKind::Binary) {
      const auto r = conformal_class_report(res.profile, c.alpha);
      j["confidence"] = *r.confidence;
      j["credibility"] = *r.credibility;
    }
    add_labels(j, z, test.labelled);
    if (test.labelled) {
      const CoverageFlags f = predictor.exact_rank_coverage(z, grid, c.alpha, res.profile);
      j["covered_grid"] = f.covered_grid;
      j["covered_exact"] = f.covered_exact;
      j["pi_exact"] = f.pi_exact;
    }
    results.push_back(j);
    append_rank_rows(dump, i, res.profile);
  }
  emit(c.out, report::envelope(config_json(c), results).dump(2) + "\n");
  if (!c.dump_rank.empty()) emit(c.dump_rank, dump.str());
  return kOk;
}

int cmd_group_conformal(const RunConfig& c) {
  if (c.family != "hierarchical") throw InputError("cli", "group-conformal needs --family hierarchical");
  const Dataset train = load_train(c);
  const LikelihoodModel model = build_model(c, train);
  const TestSet test = load_test(c, train);
  if (!test.data.grouped()) throw InputError("hierarchy", "test rows need a 'group' column");
  const ConformalGrid grid = make_grid(c, model, train);
  const GroupedView view = make_grouped_view(train, model.groups());
  const GroupAlphaPolicy policy = parse_alpha_policy(c, view);
  const PosteriorDraws draws = obtain_draws(c, model, train);
  const GroupConformalPredictor predictor(model, draws, view, conformal_options(c));

  json results = json::array();
  std::ostringstream dump;
  dump << std::setprecision(17) << rank_dump_header(c);
  for (std::size_t i = 0; i < test.data.size(); ++i) {
    const Datum& z = test.data[i];
    const double aj = policy.at(*z.group);
    const GroupConformalResult res = predictor.conformal_set(z, grid, aj);
    if (res.warning && !c.quiet) std::cerr << "warning: " << *res.warning << '\n';
    json j = report::group_json(z, grid, res);
    add_labels(j, z, test.labelled);
    if (test.labelled) {
      const CoverageFlags f = predictor.exact_rank_coverage(z, grid, aj, res.result.profile);
      j["covered_grid"] = f.covered_grid;
      j["covered_exact"] = f.covered_exact;
      j["pi_exact"] = f.pi_exact;
    }
    results.push_back(j);
    append_rank_rows(dump, i, res.result.profile);
  }
  emit(c.out, report::envelope(config_json(c), results).dump(2) + "\n");
  if (!c.dump_rank.empty()) emit(c.dump_rank, dump.str());
  return kOk;
}

int cmd_bayes(const RunConfig& c) {
  const Dataset train = load_train(c);
  const LikelihoodModel model = build_model(c, train);
  const TestSet test = load_test(c, train);
  const ConformalGrid grid = make_grid(c, model, train);
  const PosteriorDraws draws = obtain_draws(c, model, train);

  json results = json::array();
  for (const Datum& z : test.data) {
    json j;
    if (model.outcome_kind() == OutcomeKind::Binary) {
      const auto r = bayes_class_set(model, draws, z.x, c.alpha);
      j = report::class_json(z, c.alpha, r, "bayes");
      if (test.labelled) j["covered"] = r.contains(static_cast<int>(z.y));
    } else {
      const auto ci = bayes_interval(model, draws, z, grid, c.alpha);
      if ((ci.clamped_lo || ci.clamped_hi) && !c.quiet) {
        std::cerr << "warning: predictive quantile outside the grid; interval endpoint clamped\n";
      }
      j = report::bayes_json(z, grid, ci);
      if (test.labelled) {
        j["covered_grid"] = ci.contains(grid[grid.nearest(z.y)]);
        j["covered_exact"] = ci.contains(z.y);
      }
    }
    add_labels(j, z, test.labelled);
    results.push_back(j);
  }
  emit(c.out, report::envelope(config_json(c), results).dump(2) + "\n");
  return kOk;
}

int cmd_split(const RunConfig& c) {
  if (c.family == "logistic") throw InputError("cli", "split is defined for regression data only");
  const Dataset train = load_train(c);
  const TestSet test = load_test(c, train);
  const SplitConformal split(train, c.alpha, c.seed.value_or(0));
  json results = json::array();
  for (const Datum& z : test.data) {
    const auto s = split.predict(z.x);
    json j = report::split_json(z, c.alpha, s);
    add_labels(j, z, test.labelled);
    if (test.labelled) j["covered"] = s.contains(z.y);
    results.push_back(j);
  }
  emit(c.out, report::envelope(config_json(c), results).dump(2) + "\n");
  return kOk;
}

int cmd_diagnose(const RunConfig& c) {
  const Dataset train = load_train(c);
  const LikelihoodModel model = build_model(c, train);
  const TestSet test = load_test(c, train);
  const ConformalGrid grid = make_grid(c, model, train);
  const PosteriorDraws draws = obtain_draws(c, model, train);
  const ConformalPredictor predictor(model, draws, train, conformal_options(c));

  const auto mcmc_ess = autocorrelation_ess(draws);
  const double min_ess = *std::min_element(mcmc_ess.begin(), mcmc_ess.end());
  const double scale = min_ess / static_cast<double>(draws.size());

  std::ostringstream os;
  os << std::setprecision(17) << config_comment(c);
  os << "test,y,ess,scaled_ess,pi\n";
  for (std::size_t i = 0; i < test.data.size(); ++i) {
    const RankProfile p = predictor.rank_profile(test.data[i], grid);
    for (std::size_t g = 0; g < p.grid.size(); ++g) {
      os << i << ',' << p.grid[g] << ',' << p.ess[g] << ',' << p.ess[g] * scale << ',' << p.pi[g] << '\n';
    }
  }
  emit(c.out, os.str());
  return kOk;
}

int cmd_bench(const RunConfig& c) {
  ScenarioSpec spec = scenario_preset(c.scenario);
  if (c.n) spec.n = *c.n;
  if (c.dim) {
    spec.dim = *c.dim;
    if (spec.grouped() && spec.dim != 1) spec.fixed.reset();
  }
  if (c.n_test) spec.n_test = *c.n_test;

  BenchOptions o;
  o.methods.clear();
  std::stringstream ss(c.methods);
  std::string m;
  while (std::getline(ss, m, ',')) {
    if (!m.empty()) o.methods.push_back(parse_method(m));
  }
  o.alpha = c.alpha;
  o.repeats = c.repeats;
  o.draws = c.num_draws;
  o.tune = c.tune;
  o.seed = *c.seed;
  o.n_grid = c.n_grid;
  if (c.coverage == "exact") o.coverage = CoverageMode::Exact;
  if (!c.alpha_policy.empty()) {
    const std::string prefix = "min-feasible:";
    if (c.alpha_policy.rfind(prefix, 0) != 0) {
      throw InputError("cli", "bench accepts only --alpha-policy min-feasible:m (use --alpha for uniform)");
    }
    try {
      o.group_alpha_multiplier = std::stod(c.alpha_policy.substr(prefix.size()));
    } catch (const std::logic_error&) {
      throw InputError("cli", "--alpha-policy '" + c.alpha_policy + "' has no numeric multiplier");
    }
  }
  o.workers = c.workers;
  if (!c.quiet) o.log = [](const std::string& msg) { std::cerr << "bench: " << msg << '\n'; };

  const CoverageReport rep = run_benchmark(spec, o);
  std::cout << report::coverage_table(rep);
  std::cout.flush();
  if (!c.out.empty()) {
    emit(c.out, report::envelope(config_json(c), report::coverage_json(rep)).dump(2) + "\n");
  }
  if (!c.csv.empty()) emit(c.csv, config_comment(c) + report::coverage_csv(rep));
  return kOk;
}

// ------------------------------------------------------------- wiring

void add_model_options(CLI::App* sub, RunConfig& c) {
  sub->add_option("--family", c.family, "Likelihood family")
      ->check(CLI::IsMember({"gaussian", "logistic", "hierarchical"}))
      ->capture_default_str();
  sub->add_option("--prior", c.prior, "Coefficient prior")
      ->check(CLI::IsMember({"laplace", "normal"}))
      ->capture_default_str();
  sub->add_option("--prior-sd", c.prior_sd, "Sd of the normal coefficient prior")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_flag("--no-intercept", c.no_intercept, "Drop the intercept");
  sub->add_option("--intercept-sd", c.intercept_sd, "Normal prior sd on the intercept (default flat)")
      ->check(CLI::PositiveNumber);
  sub->add_option("--tau-scale", c.tau_scale, "Half-normal scale of the noise sd prior")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--fixed-tau", c.fixed_tau, "Known noise sd")->check(CLI::PositiveNumber);
  sub->add_option("--groups", c.groups, "Number of groups J for the hierarchical family");
  sub->add_option("--data", c.data, "Training CSV")->required()->check(CLI::ExistingFile);
  sub->add_flag("--standardize", c.standardize, "Standardize covariates (and a real response)");
}

void add_sampler_options(CLI::App* sub, RunConfig& c) {
  sub->add_option("-T,--num-draws", c.num_draws, "Posterior draws kept")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--tune", c.tune, "Adaptation iterations")->capture_default_str();
  sub->add_option("--chains", c.chains, "Independent chains")->check(CLI::PositiveNumber)->capture_default_str();
}

void add_draws_source(CLI::App* sub, RunConfig& c) {
  auto* d = sub->add_option("--draws", c.draws, "Posterior draws CSV")->check(CLI::ExistingFile);
  auto* s = sub->add_flag("--sample-inline", c.sample_inline, "Run the built-in sampler instead of reading draws");
  d->excludes(s);
  s->excludes(d);
  sub->callback([sub, d, s] {
    if (d->count() == 0 && s->count() == 0) {
      throw CLI::ValidationError("--draws/--sample-inline", "exactly one of --draws or --sample-inline is required");
    }
    (void)sub;
  });
}

void add_common(CLI::App* sub, RunConfig& c) {
  sub->add_option("--out,-o", c.out, "Output path (default stdout)");
  sub->add_option("--seed", c.seed, "Random seed");
  sub->add_option("--workers", c.workers, "Worker threads (default from CBAYES_WORKERS)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_flag("--quiet,-q", c.quiet, "Suppress diagnostics on stderr");
}

void add_alpha(CLI::App* sub, RunConfig& c) {
  sub->add_option("--alpha", c.alpha, "Miscoverage level")->check(CLI::Range(0.0, 1.0))->capture_default_str();
}

void add_grid(CLI::App* sub, RunConfig& c) {
  sub->add_option("--grid", c.grid, "'auto' or lo:hi:n")->capture_default_str();
  sub->add_option("--n-grid", c.n_grid, "Points of the automatic grid")->check(CLI::PositiveNumber)->capture_default_str();
}

int dispatch(const RunConfig& c) {
  if (c.subcommand == "sample") return cmd_sample(c);
  if (c.subcommand == "conformal") return cmd_conformal(c);
  if (c.subcommand == "group-conformal") return cmd_group_conformal(c);
  if (c.subcommand == "bayes") return cmd_bayes(c);
  if (c.subcommand == "split") return cmd_split(c);
  if (c.subcommand == "diagnose") return cmd_diagnose(c);
  if (c.subcommand == "bench") return cmd_bench(c);
  throw InputError("cli", "unknown subcommand '" + c.subcommand + "'");
}

std::string hint(const std::exception& e) {
  if (dynamic_cast<const DegenerateWeightError*>(&e)) {
    return "narrow the grid toward the data range, supply more draws, or pass --degenerate minimal";
  }
  if (dynamic_cast<const SamplerError*>(&e)) return "check the model against the data, or try another --seed or a longer --tune";
  if (dynamic_cast<const InputError*>(&e)) return "check the input files and flags; see --help";
  return "";
}

int run_app(CLI::App& app, RunConfig& c, int argc, const char* const* argv) {
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }
  try {
    return dispatch(c);
  } catch (const std::exception& e) {
    std::cerr << "cbayes: error: " << e.what() << '\n';
    if (const auto* d = dynamic_cast<const DegenerateWeightError*>(&e)) {
      std::cerr << "offending grid value: " << d->grid_value() << '\n';
    }
    const std::string h = hint(e);
    if (!h.empty()) std::cerr << "hint: " << h << '\n';
    return exit_code(e);
  }
}

}  // namespace

int exit_code(const std::exception& e) {
  if (dynamic_cast<const DegenerateWeightError*>(&e)) return kDegenerateWeights;
  if (dynamic_cast<const SamplerError*>(&e)) return kSamplerFailure;
  if (dynamic_cast<const InputError*>(&e)) return kInputError;
  return kOther;
}

int run(int argc, char** argv) {
  RunConfig c;
  CLI::App app{"Conformal Bayes prediction sets from posterior draws"};
  app.require_subcommand(1);

  auto* sample = app.add_subcommand("sample", "Draw from the posterior with the built-in sampler");
  add_model_options(sample, c);
  add_sampler_options(sample, c);
  add_common(sample, c);

  auto* conformal = app.add_subcommand("conformal", "Conformal Bayes sets for test rows");
  auto* group = app.add_subcommand("group-conformal", "Within-group conformal Bayes sets");
  auto* bayes = app.add_subcommand("bayes", "Bayes credible intervals or class sets");
  auto* diagnose = app.add_subcommand("diagnose", "Importance-weight ESS and rank profiles over the grid");
  for (auto* sub : {conformal, group, bayes, diagnose}) {
    add_model_options(sub, c);
    add_sampler_options(sub, c);
    add_draws_source(sub, c);
    add_common(sub, c);
    add_grid(sub, c);
    sub->add_option("--test", c.test, "Test CSV (x1..xd, optional y, group)")->required()->check(CLI::ExistingFile);
    if (sub != diagnose) add_alpha(sub, c);
    if (sub != bayes) {
      sub->add_option("--degenerate", c.degenerate, "Policy when every weight vanishes")
          ->check(CLI::IsMember({"error", "minimal"}))
          ->capture_default_str();
    }
  }
  for (auto* sub : {conformal, group}) sub->add_option("--dump-rank", c.dump_rank, "CSV dump of the rank profiles");
  group->add_option("--alpha-policy", c.alpha_policy, "uniform:a or min-feasible:m");

  auto* split = app.add_subcommand("split", "Split conformal intervals with a ridge predictor");
  split->add_option("--data", c.data, "Training CSV")->required()->check(CLI::ExistingFile);
  split->add_option("--test", c.test, "Test CSV")->required()->check(CLI::ExistingFile);
  split->add_flag("--standardize", c.standardize, "Standardize covariates and response");
  add_alpha(split, c);
  add_common(split, c);

  auto* bench = app.add_subcommand("bench", "Repeated simulation coverage benchmark");
  std::string names;
  for (const auto& n : scenario_names()) names += (names.empty() ? "" : ", ") + n;
  bench->add_option("--scenario", c.scenario, "One of: " + names)->required();
  bench->add_option("--repeats,-R", c.repeats, "Repeats")->check(CLI::Range(2, 1000000))->capture_default_str();
  bench->add_option("--methods", c.methods, "Comma-separated subset of bayes,cb,split")->capture_default_str();
  bench->add_option("--coverage", c.coverage, "Reported coverage convention")
      ->check(CLI::IsMember({"grid", "exact"}))
      ->capture_default_str();
  bench->add_option("--alpha-policy", c.alpha_policy, "min-feasible:m for grouped scenarios");
  bench->add_option("--n", c.n, "Training size override");
  bench->add_option("--dim", c.dim, "Covariate dimension override");
  bench->add_option("--n-test", c.n_test, "Test points per repeat override");
  bench->add_option("--csv", c.csv, "Long-format per-repeat CSV output");
  bench->add_option("--n-grid", c.n_grid, "Grid size")->check(CLI::PositiveNumber)->capture_default_str();
  add_alpha(bench, c);
  add_sampler_options(bench, c);
  add_common(bench, c);
  bench->get_option("--seed")->required();

  for (auto* sub : app.get_subcommands({})) {
    sub->parse_complete_callback([&c, sub] { c.subcommand = sub->get_name(); });
  }
  return run_app(app, c, argc, argv);
}

int run(const std::vector<std::string>& args) {
  std::vector<std::string> storage;
  storage.reserve(args.size() + 1);
  storage.push_back("cbayes");
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace cbayes::cli

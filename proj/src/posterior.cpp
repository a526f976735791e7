#include "cbayes/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "cbayes/error.hpp"
#include "cbayes/parallel.hpp"
#include "cbayes/rng.hpp"
#include "csv.hpp"

namespace cbayes {

std::string to_string(DrawSource s) {
  switch (s) {
    case DrawSource::ExternalFile: return "external-file";
    case DrawSource::Metropolis: return "metropolis";
    case DrawSource::ConjugateExact: return "conjugate-exact";
  }
  return "unknown";
}

PosteriorDraws::PosteriorDraws(ParameterLayout layout, DrawMatrix matrix, DrawSource source)
    : layout_(std::move(layout)), matrix_(std::move(matrix)), source_(source) {
  if (matrix_.rows() < 1) throw InputError("posterior", "posterior draws need at least one row");
  if (static_cast<std::size_t>(matrix_.cols()) != layout_.size()) {
    throw InputError("posterior", "draw matrix has " + std::to_string(matrix_.cols()) +
                                      " columns, layout expects " + std::to_string(layout_.size()));
  }
  const auto positive = layout_.positivity();
  const auto names = layout_.column_names();
  for (Eigen::Index t = 0; t < matrix_.rows(); ++t) {
    for (Eigen::Index k = 0; k < matrix_.cols(); ++k) {
      const double v = matrix_(t, k);
      if (!std::isfinite(v)) {
        throw InputError("posterior", "non-finite value in row " + std::to_string(t + 1) +
                                          ", column '" + names[k] + "'");
      }
      if (positive[k] && !(v > 0.0)) {
        throw InputError("posterior", "positivity constraint violated in row " + std::to_string(t + 1) +
                                          ": " + names[k] + " = " + csv::format_number(v));
      }
    }
  }
}

bool PosteriorDraws::operator==(const PosteriorDraws& other) const {
  return layout_ == other.layout_ && matrix_.rows() == other.matrix_.rows() &&
         matrix_.cols() == other.matrix_.cols() && matrix_ == other.matrix_;
}

// ---------------------------------------------------------------- MCMC ESS

namespace {

double column_ess(const DrawMatrix& m, Eigen::Index k) {
  const Eigen::Index n = m.rows();
  if (n < 4) return static_cast<double>(n);
  const Eigen::VectorXd x = m.col(k);
  const double mean = x.mean();
  const Eigen::VectorXd c = x.array() - mean;
  const double var0 = c.squaredNorm() / static_cast<double>(n);
  if (!(var0 > 0.0)) return static_cast<double>(n);
  auto rho = [&](Eigen::Index lag) {
    return c.head(n - lag).dot(c.tail(n - lag)) / static_cast<double>(n) / var0;
  };
  // Geyer: sum consecutive pairs while positive, enforcing monotone decrease.
  double sum = 0.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (Eigen::Index lag = 0; lag + 1 < n; lag += 2) {
    double pair = rho(lag) + rho(lag + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, prev_pair);
    prev_pair = pair;
    sum += pair;
  }
  const double tau = std::max(2.0 * sum - 1.0, 1.0 / std::log10(static_cast<double>(n)));
  return std::min(static_cast<double>(n) / tau, static_cast<double>(n) * std::log10(static_cast<double>(n)));
}

}  // namespace

std::vector<double> autocorrelation_ess(const PosteriorDraws& draws) {
  std::vector<double> ess;
  for (Eigen::Index k = 0; k < draws.matrix().cols(); ++k) ess.push_back(column_ess(draws.matrix(), k));
  return ess;
}

// ---------------------------------------------------------------- CSV

PosteriorDraws read_draws(std::istream& in, const LikelihoodModel& model) {
  csv::Table table = csv::read(in, "posterior");
  const auto expected = model.layout().column_names();
  std::vector<std::size_t> source_col(expected.size(), static_cast<std::size_t>(-1));
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    auto it = std::find(expected.begin(), expected.end(), table.header[c]);
    if (it == expected.end()) {
      throw InputError("posterior", "unexpected draws column '" + table.header[c] + "' for the " +
                                        to_string(model.family()) + " model");
    }
    std::size_t k = static_cast<std::size_t>(it - expected.begin());
    if (source_col[k] != static_cast<std::size_t>(-1)) {
      throw InputError("posterior", "duplicate draws column '" + table.header[c] + "'");
    }
    source_col[k] = c;
  }
  for (std::size_t k = 0; k < expected.size(); ++k) {
    if (source_col[k] == static_cast<std::size_t>(-1)) {
      throw InputError("posterior", "draws file is missing column '" + expected[k] + "'");
    }
  }
  if (table.rows.empty()) throw InputError("posterior", "draws file has no rows");
  DrawMatrix m(table.rows.size(), expected.size());
  for (std::size_t t = 0; t < table.rows.size(); ++t) {
    for (std::size_t k = 0; k < expected.size(); ++k) {
      const std::string& field = table.rows[t][source_col[k]];
      m(t, k) = csv::parse_number(field, "posterior", t + 2, expected[k]);
    }
  }
  return PosteriorDraws(model.layout(), std::move(m), DrawSource::ExternalFile);
}

PosteriorDraws ingest_draws(const std::filesystem::path& path, const LikelihoodModel& model) {
  std::ifstream in(path);
  if (!in) throw InputError("posterior", "cannot open draws file '" + path.string() + "'");
  return read_draws(in, model);
}

void write_draws(const PosteriorDraws& draws, std::ostream& out) {
  const auto names = draws.layout().column_names();
  for (std::size_t k = 0; k < names.size(); ++k) out << (k ? "," : "") << names[k];
  out << '\n';
  for (std::size_t t = 0; t < draws.size(); ++t) {
    auto row = draws.row(t);
    for (std::size_t k = 0; k < row.size(); ++k) out << (k ? "," : "") << csv::format_number(row[k]);
    out << '\n';
  }
}

// ---------------------------------------------------------------- Metropolis

namespace {

class Target {
 public:
  Target(const LikelihoodModel& model, const Dataset& data)
      : model_(model), data_(data), positive_(model.layout().positivity()), natural_(positive_.size()) {}

  std::size_t dim() const { return positive_.size(); }

  /// Log density in the unconstrained coordinates, Jacobian included.
  double operator()(const Eigen::VectorXd& u) {
    double jacobian = 0.0;
    for (std::size_t k = 0; k < positive_.size(); ++k) {
      if (positive_[k]) {
        natural_[k] = std::exp(u[k]);
        jacobian += u[k];
      } else {
        natural_[k] = u[k];
      }
    }
    const double lp = model_.log_prior(natural_);
    if (!std::isfinite(lp)) return -std::numeric_limits<double>::infinity();
    const double value = lp + model_.log_likelihood_sum(natural_, data_) + jacobian;
    return std::isnan(value) ? -std::numeric_limits<double>::infinity() : value;
  }

  void to_natural(const Eigen::VectorXd& u, double* out) const {
    for (std::size_t k = 0; k < positive_.size(); ++k) out[k] = positive_[k] ? std::exp(u[k]) : u[k];
  }

 private:
  const LikelihoodModel& model_;
  const Dataset& data_;
  std::vector<bool> positive_;
  std::vector<double> natural_;
};

struct ChainResult {
  DrawMatrix draws;
  std::vector<double> accepted;
  double block_accepted = 0.0;
};

// Running mean/covariance (Welford).
struct CovarianceAccumulator {
  explicit CovarianceAccumulator(std::size_t p) : mean(Eigen::VectorXd::Zero(p)), m2(Eigen::MatrixXd::Zero(p, p)) {}
  void add(const Eigen::VectorXd& x) {
    ++n;
    const Eigen::VectorXd delta = x - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta * (x - mean).transpose();
  }
  // Shrunk toward a small diagonal while few samples are available.
  Eigen::MatrixXd estimate() const {
    const std::size_t p = static_cast<std::size_t>(mean.size());
    const double nn = static_cast<double>(n);
    Eigen::MatrixXd cov = m2 / std::max(nn - 1.0, 1.0);
    return (nn / (nn + 5.0)) * cov + 1e-3 * (5.0 / (nn + 5.0)) * Eigen::MatrixXd::Identity(p, p);
  }
  void reset() {
    n = 0;
    mean.setZero();
    m2.setZero();
  }
  std::size_t n = 0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd m2;
};

ChainResult run_chain(const LikelihoodModel& model, const Dataset& data, const MetropolisOptions& opt,
                      std::uint64_t seed) {
  Target target(model, data);
  const std::size_t p = target.dim();
  Rng rng(seed);

  Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  double current = target(u);
  if (!std::isfinite(current)) {
    throw SamplerError("posterior", "log posterior is not finite at the initial point "
                                    "(locations 0, scales 1); check the data for extreme values");
  }

  std::vector<double> log_scale(p, std::log(0.5));
  double log_lambda = std::log(2.38 / std::sqrt(static_cast<double>(std::max<std::size_t>(p, 1))));
  Eigen::MatrixXd chol = Eigen::MatrixXd::Identity(p, p) * 0.5;
  CovarianceAccumulator acc(p);
  const std::size_t window_start = opt.tune / 4;
  const std::size_t window_mid = opt.tune / 2;

  auto refresh_chol = [&] {
    Eigen::LLT<Eigen::MatrixXd> llt(acc.estimate());
    if (llt.info() == Eigen::Success) chol = llt.matrixL();
  };

  ChainResult result;
  result.draws.resize(static_cast<Eigen::Index>(opt.draws), static_cast<Eigen::Index>(p));
  result.accepted.assign(p, 0.0);

  Eigen::VectorXd proposal(p);
  Eigen::VectorXd z(p);
  const std::size_t total = opt.tune + opt.draws;
  for (std::size_t it = 0; it < total; ++it) {
    const bool tuning = it < opt.tune;
    const double gain = std::pow(static_cast<double>(it) + 1.0, -0.6);

    for (std::size_t k = 0; k < p; ++k) {
      const double old = u[k];
      u[k] = old + std::exp(log_scale[k]) * rng.normal();
      const double cand = target(u);
      const bool accept = std::log(rng.uniform_open()) < cand - current;
      if (accept) {
        current = cand;
      } else {
        u[k] = old;
      }
      if (tuning) {
        log_scale[k] += gain * ((accept ? 1.0 : 0.0) - opt.target_acceptance);
      } else if (accept) {
        result.accepted[k] += 1.0;
      }
    }

    if (p > 1) {
      for (std::size_t k = 0; k < p; ++k) z[k] = rng.normal();
      proposal = u + std::exp(log_lambda) * (chol * z);
      const double cand = target(proposal);
      const bool accept = std::log(rng.uniform_open()) < cand - current;
      if (accept) {
        u = proposal;
        current = cand;
      }
      if (tuning) {
        log_lambda += gain * ((accept ? 1.0 : 0.0) - opt.target_acceptance);
      } else if (accept) {
        result.block_accepted += 1.0;
      }
    }

    if (tuning && it >= window_start) {
      acc.add(u);
      if (it + 1 == window_mid || it + 1 == opt.tune || (acc.n % 200 == 0)) refresh_chol();
      if (it + 1 == window_mid) acc.reset();
    }

    if (!tuning) target.to_natural(u, result.draws.row(static_cast<Eigen::Index>(it - opt.tune)).data());
  }
  return result;
}

}  // namespace

PosteriorDraws sample_metropolis(const LikelihoodModel& model, const Dataset& data,
                                 const MetropolisOptions& options) {
  if (options.draws < 1) throw InputError("posterior", "number of draws T must be at least 1");
  if (options.chains < 1) throw InputError("posterior", "number of chains must be at least 1");
  model.check_dataset(data);

  std::vector<ChainResult> chains(options.chains);
  parallel_for(options.chains, options.workers, [&](std::size_t c) {
    chains[c] = run_chain(model, data, options, derive_seed(options.seed, 0x5A3, c));
  });

  const std::size_t p = model.layout().size();
  DrawMatrix all(static_cast<Eigen::Index>(options.draws * options.chains), static_cast<Eigen::Index>(p));
  SamplerDiagnostics diag;
  diag.acceptance.assign(p, 0.0);
  for (std::size_t c = 0; c < chains.size(); ++c) {
    all.middleRows(static_cast<Eigen::Index>(c * options.draws), static_cast<Eigen::Index>(options.draws)) =
        chains[c].draws;
    for (std::size_t k = 0; k < p; ++k) diag.acceptance[k] += chains[c].accepted[k];
    diag.block_acceptance += chains[c].block_accepted;
  }
  const double kept = static_cast<double>(options.draws * options.chains);
  for (double& a : diag.acceptance) a /= kept;
  diag.block_acceptance /= kept;

  PosteriorDraws draws(model.layout(), std::move(all), DrawSource::Metropolis);
  draws.set_diagnostics(std::move(diag));
  return draws;
}

// ---------------------------------------------------------------- conjugate

LikelihoodModel conjugate_model(std::size_t dim, double noise_sd) {
  RegressionPrior prior;
  prior.coefficients = CoefficientPrior::Normal;
  prior.intercept = false;
  prior.fixed_tau = noise_sd;
  return LikelihoodModel::gaussian_linear(dim, prior);
}

PosteriorDraws sample_conjugate_oracle(const Eigen::VectorXd& prior_mean, const Eigen::MatrixXd& prior_cov,
                                       double noise_sd, const Dataset& data, std::size_t draws,
                                       std::uint64_t seed) {
  const Eigen::Index d = prior_mean.size();
  if (prior_cov.rows() != d || prior_cov.cols() != d) {
    throw InputError("posterior", "prior covariance must be " + std::to_string(d) + "x" + std::to_string(d));
  }
  if (!(noise_sd > 0.0)) throw InputError("posterior", "noise sd must be positive");
  if (draws < 1) throw InputError("posterior", "number of draws T must be at least 1");
  if (!data.empty() && data.dim() != static_cast<std::size_t>(d)) {
    throw InputError("posterior", "data dimension does not match the prior mean");
  }
  Eigen::LLT<Eigen::MatrixXd> prior_llt(prior_cov);
  if (prior_llt.info() != Eigen::Success) {
    throw InputError("posterior", "prior covariance is singular or not positive definite");
  }
  const Eigen::MatrixXd prior_prec = prior_llt.solve(Eigen::MatrixXd::Identity(d, d));
  const double inv_var = 1.0 / (noise_sd * noise_sd);
  Eigen::MatrixXd prec = prior_prec;
  Eigen::VectorXd rhs = prior_prec * prior_mean;
  for (const auto& datum : data) {
    const Eigen::Map<const Eigen::VectorXd> x(datum.x.data(), d);
    prec.noalias() += inv_var * x * x.transpose();
    rhs += inv_var * datum.y * x;
  }
  Eigen::LLT<Eigen::MatrixXd> post_llt(prec);
  const Eigen::MatrixXd cov = post_llt.solve(Eigen::MatrixXd::Identity(d, d));
  const Eigen::VectorXd mean = cov * rhs;
  const Eigen::MatrixXd chol = Eigen::LLT<Eigen::MatrixXd>(cov).matrixL();

  Rng rng(seed);
  DrawMatrix m(static_cast<Eigen::Index>(draws), d);
  Eigen::VectorXd z(d);
  for (std::size_t t = 0; t < draws; ++t) {
    for (Eigen::Index k = 0; k < d; ++k) z[k] = rng.normal();
    m.row(static_cast<Eigen::Index>(t)) = (mean + chol * z).transpose();
  }
  return PosteriorDraws(conjugate_model(static_cast<std::size_t>(d), noise_sd).layout(), std::move(m),
                        DrawSource::ConjugateExact);
}

}  // namespace cbayes

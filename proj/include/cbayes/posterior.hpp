#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "cbayes/dataset.hpp"
#include "cbayes/likelihood.hpp"

namespace cbayes {

enum class DrawSource { ExternalFile, Metropolis, ConjugateExact };

std::string to_string(DrawSource s);

using DrawMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct SamplerDiagnostics {
  /// Acceptance rate of the componentwise updates, per parameter.
  std::vector<double> acceptance;
  /// Acceptance rate of the blocked joint update.
  double block_acceptance = 0.0;
};

/// T posterior draws (rows) over a model's parameter layout (columns).
class PosteriorDraws {
 public:
  PosteriorDraws(ParameterLayout layout, DrawMatrix matrix, DrawSource source);

  std::size_t size() const { return static_cast<std::size_t>(matrix_.rows()); }
  std::size_t params() const { return static_cast<std::size_t>(matrix_.cols()); }
  std::span<const double> row(std::size_t t) const {
    return {matrix_.data() + t * params(), params()};
  }
  const DrawMatrix& matrix() const { return matrix_; }
  const ParameterLayout& layout() const { return layout_; }
  DrawSource source() const { return source_; }

  const std::optional<SamplerDiagnostics>& diagnostics() const { return diagnostics_; }
  void set_diagnostics(SamplerDiagnostics d) { diagnostics_ = std::move(d); }

  bool operator==(const PosteriorDraws& other) const;

 private:
  ParameterLayout layout_;
  DrawMatrix matrix_;
  DrawSource source_;
  std::optional<SamplerDiagnostics> diagnostics_;
};

/// Autocorrelation-based effective sample size per column, using Geyer's
/// initial monotone sequence estimator.
std::vector<double> autocorrelation_ess(const PosteriorDraws& draws);

/// Reads draws whose header names exactly the model's parameter columns
/// (any order). Rejects missing or extra columns, non-finite entries and
/// positivity violations, naming the offending row.
PosteriorDraws read_draws(std::istream& in, const LikelihoodModel& model);
PosteriorDraws ingest_draws(const std::filesystem::path& path, const LikelihoodModel& model);
/// Writes draws at 17 significant digits so that reading them back is exact.
void write_draws(const PosteriorDraws& draws, std::ostream& out);

struct MetropolisOptions {
  std::size_t draws = 8000;
  std::size_t tune = 4000;
  std::uint64_t seed = 0;
  double target_acceptance = 0.234;
  /// Independent chains, each with `draws` kept iterations, concatenated.
  std::size_t chains = 1;
  std::size_t workers = 1;
};

/// Adaptive random-walk Metropolis targeting exp(log_prior + sum log_lik),
/// run on log-transformed positive parameters. Each iteration performs a
/// componentwise sweep and one blocked move; proposal scales and the block
/// covariance adapt during the tune phase only. Deterministic given the seed.
PosteriorDraws sample_metropolis(const LikelihoodModel& model, const Dataset& data,
                                 const MetropolisOptions& options);

/// Gaussian linear model without intercept and known noise sd whose
/// coefficient vector is exactly sampled by sample_conjugate_oracle.
LikelihoodModel conjugate_model(std::size_t dim, double noise_sd);

/// I.i.d. draws from the closed-form posterior N(mu_n, Sigma_n) of a
/// Gaussian linear model with prior N(prior_mean, prior_cov) on the
/// coefficients and known noise sd.
PosteriorDraws sample_conjugate_oracle(const Eigen::VectorXd& prior_mean,
                                       const Eigen::MatrixXd& prior_cov, double noise_sd,
                                       const Dataset& data, std::size_t draws, std::uint64_t seed);

}  // namespace cbayes

#include "cbayes/likelihood.hpp"

#include <cmath>
#include <limits>

#include "cbayes/error.hpp"

namespace cbayes {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLogHalfNormalConst = -0.22579135264472743236;  // log(sqrt(2/pi))
}  // namespace

std::string to_string(Family f) {
  switch (f) {
    case Family::GaussianLinear: return "gaussian";
    case Family::Logistic: return "logistic";
    case Family::HierarchicalGaussian: return "hierarchical";
  }
  return "unknown";
}

// ---------------------------------------------------------------- layout

void ParameterLayout::add(std::string name, std::size_t size, bool positive, bool indexed) {
  slots_.push_back(Slot{std::move(name), size_, size, positive, indexed});
  size_ += size;
}

const Slot* ParameterLayout::find(const std::string& name) const {
  for (const auto& s : slots_) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

const Slot& ParameterLayout::at(const std::string& name) const {
  if (const Slot* s = find(name)) return *s;
  throw InputError("likelihoods", "parameter layout has no slot '" + name + "'");
}

std::vector<std::string> ParameterLayout::column_names() const {
  std::vector<std::string> names;
  names.reserve(size_);
  for (const auto& s : slots_) {
    if (s.size == 1 && !s.indexed) {
      names.push_back(s.name);
    } else {
      for (std::size_t k = 1; k <= s.size; ++k) names.push_back(s.name + "." + std::to_string(k));
    }
  }
  return names;
}

std::vector<bool> ParameterLayout::positivity() const {
  std::vector<bool> flags;
  flags.reserve(size_);
  for (const auto& s : slots_) flags.insert(flags.end(), s.size, s.positive);
  return flags;
}

bool ParameterLayout::operator==(const ParameterLayout& other) const {
  return column_names() == other.column_names() && positivity() == other.positivity();
}

// ---------------------------------------------------------------- densities

namespace density {

double normal_log(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -kLogSqrt2Pi - std::log(sd) - 0.5 * z * z;
}

double normal_cdf(double x, double mean, double sd) {
  return 0.5 * std::erfc(-(x - mean) / (sd * 1.41421356237309504880));
}

double log_sigmoid(double eta) {
  if (eta >= 0.0) return -std::log1p(std::exp(-eta));
  return eta - std::log1p(std::exp(eta));
}

}  // namespace density

namespace {

double half_normal_log(double x, double scale) {
  if (!(x > 0.0)) return -kInf;
  const double z = x / scale;
  return kLogHalfNormalConst - std::log(scale) - 0.5 * z * z;
}

double exponential_log(double x) { return x > 0.0 ? -x : -kInf; }

}  // namespace

// ---------------------------------------------------------------- construction

LikelihoodModel LikelihoodModel::gaussian_linear(std::size_t dim, RegressionPrior prior) {
  if (prior.fixed_tau && !(*prior.fixed_tau > 0.0)) {
    throw InputError("likelihoods", "fixed noise sd must be positive");
  }
  if (!(prior.tau_scale > 0.0) || !(prior.normal_sd > 0.0)) {
    throw InputError("likelihoods", "prior scales must be positive");
  }
  LikelihoodModel m;
  m.family_ = Family::GaussianLinear;
  m.dim_ = dim;
  m.prior_ = prior;
  m.layout_.add("theta", dim, false, true);
  m.theta_ = 0;
  if (prior.intercept) {
    m.theta0_ = m.layout_.size();
    m.layout_.add("theta0", 1, false);
  }
  if (!prior.fixed_tau) {
    m.tau_ = m.layout_.size();
    m.layout_.add("tau", 1, true);
  }
  if (prior.coefficients == CoefficientPrior::Laplace) {
    m.b_ = m.layout_.size();
    m.layout_.add("b", 1, true);
  }
  return m;
}

LikelihoodModel LikelihoodModel::logistic(std::size_t dim, RegressionPrior prior) {
  if (!(prior.normal_sd > 0.0)) throw InputError("likelihoods", "prior scales must be positive");
  LikelihoodModel m;
  m.family_ = Family::Logistic;
  m.dim_ = dim;
  prior.fixed_tau.reset();
  m.prior_ = prior;
  m.layout_.add("theta", dim, false, true);
  m.theta_ = 0;
  if (prior.intercept) {
    m.theta0_ = m.layout_.size();
    m.layout_.add("theta0", 1, false);
  }
  if (prior.coefficients == CoefficientPrior::Laplace) {
    m.b_ = m.layout_.size();
    m.layout_.add("b", 1, true);
  }
  return m;
}

LikelihoodModel LikelihoodModel::hierarchical_gaussian(std::size_t dim, std::size_t groups) {
  if (groups < 1) throw InputError("likelihoods", "hierarchical model needs at least one group");
  LikelihoodModel m;
  m.family_ = Family::HierarchicalGaussian;
  m.dim_ = dim;
  m.groups_ = groups;
  const bool vec = dim != 1;
  m.theta_ = 0;
  for (std::size_t j = 1; j <= groups; ++j) m.layout_.add("theta." + std::to_string(j), dim, false, vec);
  m.theta0_ = m.layout_.size();
  for (std::size_t j = 1; j <= groups; ++j) m.layout_.add("theta0." + std::to_string(j), 1, false);
  m.phi_ = m.layout_.size();
  m.layout_.add("phi", dim, false, vec);
  m.phi0_ = m.layout_.size();
  m.layout_.add("phi0", 1, false);
  m.s_ = m.layout_.size();
  m.layout_.add("s", dim, true, vec);
  m.s0_ = m.layout_.size();
  m.layout_.add("s0", 1, true);
  m.tau_ = m.layout_.size();
  m.layout_.add("tau", 1, true);
  return m;
}

// ---------------------------------------------------------------- validation

void LikelihoodModel::check_params(std::span<const double> params) const {
  if (params.size() != layout_.size()) {
    throw InputError("likelihoods", "parameter vector has " + std::to_string(params.size()) +
                                        " entries, layout expects " + std::to_string(layout_.size()));
  }
}

void LikelihoodModel::check_datum(const Datum& datum) const {
  if (datum.x.size() != dim_) {
    throw InputError("likelihoods", "datum has " + std::to_string(datum.x.size()) +
                                        " covariates, model expects " + std::to_string(dim_));
  }
  if (family_ == Family::HierarchicalGaussian) {
    if (!datum.group) throw InputError("likelihoods", "hierarchical model requires a group index");
    if (*datum.group < 1 || static_cast<std::size_t>(*datum.group) > groups_) {
      throw InputError("likelihoods", "group " + std::to_string(*datum.group) +
                                          " outside 1.." + std::to_string(groups_));
    }
  }
  if (family_ == Family::Logistic && datum.y != 0.0 && datum.y != 1.0) {
    throw InputError("likelihoods", "logistic outcome must be 0 or 1, got " + std::to_string(datum.y));
  }
}

void LikelihoodModel::check_dataset(const Dataset& data) const {
  for (const auto& d : data) check_datum(d);
}

// ---------------------------------------------------------------- evaluation

double LikelihoodModel::linear_predictor(std::span<const double> params, std::span<const double> x,
                                         std::optional<int> group) const {
  double eta = 0.0;
  if (family_ == Family::HierarchicalGaussian) {
    const std::size_t j = static_cast<std::size_t>(*group) - 1;
    const double* theta = params.data() + theta_ + j * dim_;
    for (std::size_t k = 0; k < dim_; ++k) eta += theta[k] * x[k];
    return eta + params[theta0_ + j];
  }
  const double* theta = params.data() + theta_;
  for (std::size_t k = 0; k < dim_; ++k) eta += theta[k] * x[k];
  if (theta0_ != npos) eta += params[theta0_];
  return eta;
}

double LikelihoodModel::noise_sd(std::span<const double> params) const {
  return tau_ != npos ? params[tau_] : *prior_.fixed_tau;
}

double LikelihoodModel::log_likelihood(std::span<const double> params, const Datum& datum) const {
  check_params(params);
  check_datum(datum);
  double out;
  if (family_ != Family::Logistic) {
    const double tau = noise_sd(params);
    if (!(tau > 0.0)) {
      throw InputError("likelihoods", "noise sd tau must be positive, got " + std::to_string(tau));
    }
  }
  log_likelihood_grid(params, datum.x, datum.group, std::span<const double>(&datum.y, 1),
                      std::span<double>(&out, 1));
  return out;
}

void LikelihoodModel::log_likelihood_grid(std::span<const double> params, std::span<const double> x,
                                          std::optional<int> group, std::span<const double> ys,
                                          std::span<double> out) const {
  const double eta = linear_predictor(params, x, group);
  if (family_ == Family::Logistic) {
    const double l1 = density::log_sigmoid(eta);
    const double l0 = density::log_sigmoid(-eta);
    for (std::size_t g = 0; g < ys.size(); ++g) out[g] = ys[g] * l1 + (1.0 - ys[g]) * l0;
    return;
  }
  const double tau = noise_sd(params);
  for (std::size_t g = 0; g < ys.size(); ++g) out[g] = density::normal_log(ys[g], eta, tau);
}

double LikelihoodModel::log_likelihood_sum(std::span<const double> params, const Dataset& data) const {
  double total = 0.0;
  if (family_ == Family::Logistic) {
    for (const auto& d : data) {
      const double eta = linear_predictor(params, d.x, d.group);
      total += d.y != 0.0 ? density::log_sigmoid(eta) : density::log_sigmoid(-eta);
    }
    return total;
  }
  const double tau = noise_sd(params);
  for (const auto& d : data) total += density::normal_log(d.y, linear_predictor(params, d.x, d.group), tau);
  return total;
}

double LikelihoodModel::log_prior(std::span<const double> params) const {
  check_params(params);
  for (const auto& slot : layout_.slots()) {
    if (!slot.positive) continue;
    for (std::size_t k = 0; k < slot.size; ++k) {
      if (!(params[slot.offset + k] > 0.0)) return -kInf;
    }
  }

  double lp = 0.0;
  if (family_ == Family::HierarchicalGaussian) {
    for (std::size_t j = 0; j < groups_; ++j) {
      for (std::size_t k = 0; k < dim_; ++k) {
        lp += density::normal_log(params[theta_ + j * dim_ + k], params[phi_ + k], params[s_ + k]);
      }
      lp += density::normal_log(params[theta0_ + j], params[phi0_], params[s0_]);
    }
    for (std::size_t k = 0; k < dim_; ++k) {
      lp += density::normal_log(params[phi_ + k], 0.0, 1.0);
      lp += exponential_log(params[s_ + k]);
    }
    lp += density::normal_log(params[phi0_], 0.0, 1.0);
    lp += exponential_log(params[s0_]);
    lp += exponential_log(params[tau_]);
    return lp;
  }

  if (prior_.coefficients == CoefficientPrior::Laplace) {
    const double b = params[b_];
    const double log2b = std::log(2.0 * b);
    for (std::size_t k = 0; k < dim_; ++k) lp += -log2b - std::abs(params[theta_ + k]) / b;
    lp += exponential_log(b);  // Gamma(1, 1)
  } else {
    for (std::size_t k = 0; k < dim_; ++k) lp += density::normal_log(params[theta_ + k], 0.0, prior_.normal_sd);
  }
  if (theta0_ != npos && prior_.intercept_sd) {
    lp += density::normal_log(params[theta0_], 0.0, *prior_.intercept_sd);
  }
  if (tau_ != npos) lp += half_normal_log(params[tau_], prior_.tau_scale);
  return lp;
}

double LikelihoodModel::conditional_cdf(std::span<const double> params, std::span<const double> x,
                                        std::optional<int> group, double y) const {
  if (family_ == Family::Logistic) {
    throw InputError("baselines", "conditional CDF requested for the logistic family");
  }
  return density::normal_cdf(y, linear_predictor(params, x, group), noise_sd(params));
}

double LikelihoodModel::probability_one(std::span<const double> params, std::span<const double> x) const {
  if (family_ != Family::Logistic) {
    throw InputError("baselines", "label probability requested for a regression family");
  }
  return std::exp(density::log_sigmoid(linear_predictor(params, x, std::nullopt)));
}

}  // namespace cbayes

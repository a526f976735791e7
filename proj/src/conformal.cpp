#include "cbayes/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cbayes/error.hpp"
#include "cbayes/parallel.hpp"

namespace cbayes {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Dot product with a fixed 4-way accumulation order. Every training datum
// goes through the same arithmetic, so scores do not depend on data order.
double weighted_dot(const double* a, const double* w, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t t = 0;
  for (; t + 4 <= n; t += 4) {
    s0 += a[t] * w[t];
    s1 += a[t + 1] * w[t + 1];
    s2 += a[t + 2] * w[t + 2];
    s3 += a[t + 3] * w[t + 3];
  }
  for (; t < n; ++t) s0 += a[t] * w[t];
  return (s0 + s1) + (s2 + s3);
}

struct CandidateStats {
  double max = kNegInf;   // max_t log w_t
  double sum1 = 0.0;      // sum_t exp(log w_t - max)
  double sum2 = 0.0;      // sum_t exp(2 (log w_t - max))
};

// Fills e_t = exp(log w_t - max) and returns the normalizing sums.
CandidateStats unnormalized_weights(std::span<const double> ll, std::vector<double>& e) {
  CandidateStats st;
  for (double v : ll) st.max = std::max(st.max, v);
  e.resize(ll.size());
  if (st.max == kNegInf) return st;
  for (std::size_t t = 0; t < ll.size(); ++t) {
    const double v = std::exp(ll[t] - st.max);
    e[t] = v;
    st.sum1 += v;
    st.sum2 += v * v;
  }
  return st;
}

double clamp_ess(double ess, std::size_t T) {
  return std::clamp(ess, 1.0, static_cast<double>(T));
}

[[noreturn]] void throw_degenerate(double y) {
  throw DegenerateWeightError(
      y, "all importance weights are zero at grid value y = " + std::to_string(y) +
             "; narrow the grid or enable the minimal-rank fallback for degenerate points");
}

// log sigma_i for training datum i given unnormalized weights e with sum1.
double train_log_score(const TrainLikelihood& train, std::size_t i, const std::vector<double>& e,
                       double sum1) {
  const double shift = train.shift(i);
  if (shift == kNegInf) return kNegInf;
  const double dot = weighted_dot(train.scaled(i).data(), e.data(), e.size());
  if (!(dot > 0.0)) return kNegInf;
  return shift + std::log(dot / sum1);
}

// Rank of the candidate and IS ESS. Returns false when weights are degenerate.
bool rank_candidate(const TrainLikelihood& train, std::span<const double> ll, std::vector<double>& e,
                    double& pi, double& ess) {
  const CandidateStats st = unnormalized_weights(ll, e);
  if (st.max == kNegInf) return false;
  const double candidate = st.max + std::log(st.sum2 / st.sum1);
  std::size_t count = 1;  // the candidate itself
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (train_log_score(train, i, e, st.sum1) <= candidate) ++count;
  }
  pi = static_cast<double>(count) / static_cast<double>(train.size() + 1);
  ess = clamp_ess(st.sum1 * st.sum1 / st.sum2, ll.size());
  return true;
}

}  // namespace

void check_alpha(double alpha, const char* module) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw InputError(module, "alpha must lie in (0, 1), got " + std::to_string(alpha));
  }
}

// ---------------------------------------------------------------- grid

ConformalGrid ConformalGrid::regression(double lo, double hi, std::size_t n) {
  if (n == 0) throw InputError("conformal", "grid needs at least 1 point");
  if (n == 1) {
    if (!(lo == hi) || !std::isfinite(lo)) {
      throw InputError("conformal", "a single-point grid needs lo == hi");
    }
    ConformalGrid g;
    g.kind_ = OutcomeKind::Real;
    g.spacing_ = 0.0;
    g.points_ = {lo};
    return g;
  }
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw InputError("conformal", "grid bounds must be finite with lo < hi");
  }
  ConformalGrid g;
  g.kind_ = OutcomeKind::Real;
  g.spacing_ = (hi - lo) / static_cast<double>(n - 1);
  g.points_.resize(n);
  for (std::size_t i = 0; i + 1 < n; ++i) g.points_[i] = lo + static_cast<double>(i) * g.spacing_;
  g.points_[n - 1] = hi;
  return g;
}

ConformalGrid ConformalGrid::classification() {
  ConformalGrid g;
  g.kind_ = OutcomeKind::Binary;
  g.points_ = {0.0, 1.0};
  g.spacing_ = 1.0;
  return g;
}

std::size_t ConformalGrid::nearest(double y) const {
  auto it = std::lower_bound(points_.begin(), points_.end(), y);
  if (it == points_.begin()) return 0;
  if (it == points_.end()) return points_.size() - 1;
  const std::size_t hi = static_cast<std::size_t>(it - points_.begin());
  return (y - points_[hi - 1] <= points_[hi] - y) ? hi - 1 : hi;
}

ConformalGrid default_grid(const Dataset& data, std::size_t n_grid) {
  return default_grid(data, n_grid, OutcomeKind::Real);
}

ConformalGrid default_grid(const Dataset& data, std::size_t n_grid, OutcomeKind kind) {
  if (kind == OutcomeKind::Binary) {
    throw InputError("conformal", "classification uses the fixed label grid {0, 1}; "
                                  "use ConformalGrid::classification()");
  }
  if (data.empty()) throw InputError("conformal", "default grid needs a nonempty dataset");
  if (n_grid < 2) throw InputError("conformal", "grid needs at least 2 points");
  const auto y = data.outcomes();
  const auto [mn, mx] = std::minmax_element(y.begin(), y.end());
  double scale = 1.0;
  const auto& rec = data.standardization();
  if (!(rec && rec->y_scale)) {
    const double n = static_cast<double>(y.size());
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : y) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / n);
    if (sd > 0.0) scale = sd;
  }
  return ConformalGrid::regression(*mn - 2.0 * scale, *mx + 2.0 * scale, n_grid);
}

// ---------------------------------------------------------------- caches

TrainLikelihood::TrainLikelihood(const LikelihoodModel& model, const PosteriorDraws& draws,
                                 const Dataset& data)
    : n_(data.size()), T_(draws.size()) {
  if (!(draws.layout() == model.layout())) {
    throw InputError("conformal", "posterior draws layout does not match the model parameters");
  }
  model.check_dataset(data);
  loglik_.resize(n_ * T_);
  scaled_.resize(n_ * T_);
  shift_.assign(n_, kNegInf);
  for (std::size_t t = 0; t < T_; ++t) {
    const auto row = draws.row(t);
    for (std::size_t i = 0; i < n_; ++i) {
      const Datum& d = data[i];
      double v;
      model.log_likelihood_grid(row, d.x, d.group, std::span<const double>(&d.y, 1), std::span<double>(&v, 1));
      if (std::isnan(v)) v = kNegInf;
      loglik_[i * T_ + t] = v;
    }
  }
  for (std::size_t i = 0; i < n_; ++i) {
    const double* row = loglik_.data() + i * T_;
    double mx = kNegInf;
    for (std::size_t t = 0; t < T_; ++t) mx = std::max(mx, row[t]);
    shift_[i] = mx;
    double* out = scaled_.data() + i * T_;
    for (std::size_t t = 0; t < T_; ++t) out[t] = mx == kNegInf ? 0.0 : std::exp(row[t] - mx);
  }
}

LikelihoodCache LikelihoodCache::build(const LikelihoodModel& model, const PosteriorDraws& draws,
                                       std::shared_ptr<const TrainLikelihood> train, const Datum& test,
                                       std::span<const double> candidates) {
  LikelihoodCache cache;
  cache.train = std::move(train);
  cache.candidates.assign(candidates.begin(), candidates.end());
  const std::size_t T = draws.size();
  const std::size_t G = candidates.size();
  cache.grid_loglik.resize(G * T);
  std::vector<double> column(G);
  for (std::size_t t = 0; t < T; ++t) {
    model.log_likelihood_grid(draws.row(t), test.x, test.group, candidates, column);
    for (std::size_t g = 0; g < G; ++g) {
      cache.grid_loglik[g * T + t] = std::isnan(column[g]) ? kNegInf : column[g];
    }
  }
  return cache;
}

// ---------------------------------------------------------------- AOI

std::vector<double> AoiResult::scores() const {
  std::vector<double> out(log_scores.size());
  std::transform(log_scores.begin(), log_scores.end(), out.begin(), [](double v) { return std::exp(v); });
  return out;
}

AoiResult aoi_predictives(const LikelihoodCache& cache, std::size_t grid_index) {
  if (grid_index >= cache.candidates.size()) throw InputError("conformal", "grid index out of range");
  const auto ll = cache.grid_column(grid_index);
  std::vector<double> e;
  const CandidateStats st = unnormalized_weights(ll, e);
  if (st.max == kNegInf) throw_degenerate(cache.candidates[grid_index]);
  const TrainLikelihood& train = *cache.train;
  AoiResult r;
  r.log_scores.reserve(train.size() + 1);
  for (std::size_t i = 0; i < train.size(); ++i) r.log_scores.push_back(train_log_score(train, i, e, st.sum1));
  r.log_scores.push_back(st.max + std::log(st.sum2 / st.sum1));
  r.ess = clamp_ess(st.sum1 * st.sum1 / st.sum2, ll.size());
  return r;
}

std::vector<double> normalized_weights(const LikelihoodCache& cache, std::size_t grid_index) {
  const auto ll = cache.grid_column(grid_index);
  std::vector<double> e;
  const CandidateStats st = unnormalized_weights(ll, e);
  if (st.max == kNegInf) throw_degenerate(cache.candidates[grid_index]);
  for (double& v : e) v /= st.sum1;
  return e;
}

double effective_sample_size(std::span<const double> normalized) {
  double s = 0.0;
  for (double w : normalized) s += w * w;
  return 1.0 / s;
}

double rank(std::span<const double> scores) {
  if (scores.size() < 2) throw InputError("conformal", "rank needs at least one training score");
  const double candidate = scores.back();
  std::size_t count = 0;
  for (double s : scores) {
    if (s <= candidate) ++count;
  }
  return static_cast<double>(count) / static_cast<double>(scores.size());
}

// ---------------------------------------------------------------- sets

bool PredictionSet::empty() const { return count() == 0; }

std::size_t PredictionSet::count() const {
  return static_cast<std::size_t>(std::count(included.begin(), included.end(), true));
}

PredictionSet threshold(const ConformalGrid& grid, std::span<const double> pi, double alpha) {
  PredictionSet set;
  set.kind = grid.kind();
  set.alpha = alpha;
  set.included.resize(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) set.included[g] = pi[g] > alpha;
  if (grid.kind() == OutcomeKind::Binary) {
    for (std::size_t g = 0; g < grid.size(); ++g) {
      if (set.included[g]) set.labels.push_back(static_cast<int>(grid[g]));
    }
    set.measure = static_cast<double>(set.labels.size());
    return set;
  }
  std::size_t g = 0;
  while (g < grid.size()) {
    if (!set.included[g]) {
      ++g;
      continue;
    }
    std::size_t end = g;
    while (end + 1 < grid.size() && set.included[end + 1]) ++end;
    set.intervals.push_back({grid[g], grid[end]});
    g = end + 1;
  }
  set.measure = grid.spacing() * static_cast<double>(set.count());
  return set;
}

// ---------------------------------------------------------------- predictor

ConformalPredictor::ConformalPredictor(const LikelihoodModel& model, const PosteriorDraws& draws,
                                       const Dataset& train, ConformalOptions options)
    : model_(model),
      draws_(draws),
      train_(std::make_shared<TrainLikelihood>(model, draws, train)),
      options_(options) {
  if (train.empty()) throw InputError("conformal", "conformal prediction needs at least one training datum");
}

void ConformalPredictor::check_test(const Datum& test) const {
  Datum probe = test;
  if (model_.outcome_kind() == OutcomeKind::Binary) probe.y = 0.0;
  model_.check_datum(probe);
}

RankProfile ConformalPredictor::rank_profile(const Datum& test, const ConformalGrid& grid) const {
  check_test(test);
  if (grid.kind() != model_.outcome_kind()) {
    throw InputError("conformal", "grid kind does not match the model's outcome type");
  }
  const LikelihoodCache cache = LikelihoodCache::build(model_, draws_, train_, test, grid.points());
  RankProfile profile;
  profile.test_x = test.x;
  profile.grid = grid.points();
  profile.pi.assign(grid.size(), 0.0);
  profile.ess.assign(grid.size(), 0.0);
  profile.n_train = train_->size();
  profile.draws = draws_.size();
  std::vector<char> degenerate(grid.size(), 0);

  const std::size_t workers = std::min(options_.workers, grid.size());
  std::vector<std::vector<double>> scratch(std::max<std::size_t>(workers, 1));
  // Contiguous grid blocks per worker; each grid point is computed independently.
  const std::size_t blocks = std::max<std::size_t>(workers, 1);
  parallel_for(blocks, workers, [&](std::size_t b) {
    const std::size_t begin = grid.size() * b / blocks;
    const std::size_t end = grid.size() * (b + 1) / blocks;
    for (std::size_t g = begin; g < end; ++g) {
      if (!rank_candidate(*train_, cache.grid_column(g), scratch[b], profile.pi[g], profile.ess[g])) {
        if (options_.degenerate == DegeneratePolicy::Error) throw_degenerate(grid[g]);
        degenerate[g] = 1;
        profile.pi[g] = 1.0 / static_cast<double>(train_->size() + 1);
        profile.ess[g] = 0.0;
      }
    }
  });
  for (std::size_t g = 0; g < grid.size(); ++g) {
    if (degenerate[g]) profile.degenerate.push_back(g);
  }
  return profile;
}

ConformalResult ConformalPredictor::conformal_set(const Datum& test, const ConformalGrid& grid,
                                                  double alpha) const {
  check_alpha(alpha, "conformal");
  ConformalResult r;
  r.profile = rank_profile(test, grid);
  r.set = threshold(grid, r.profile.pi, alpha);
  return r;
}

double ConformalPredictor::rank_at(const Datum& test, double y) const {
  check_test(test);
  const LikelihoodCache cache = LikelihoodCache::build(model_, draws_, train_, test, std::span<const double>(&y, 1));
  std::vector<double> e;
  double pi = 0.0, ess = 0.0;
  if (!rank_candidate(*train_, cache.grid_column(0), e, pi, ess)) {
    if (options_.degenerate == DegeneratePolicy::Error) throw_degenerate(y);
    pi = 1.0 / static_cast<double>(train_->size() + 1);
  }
  return pi;
}

CoverageFlags ConformalPredictor::exact_rank_coverage(const Datum& test, const ConformalGrid& grid,
                                                      double alpha) const {
  return exact_rank_coverage(test, grid, alpha, rank_profile(test, grid));
}

CoverageFlags ConformalPredictor::exact_rank_coverage(const Datum& test, const ConformalGrid& grid,
                                                      double alpha, const RankProfile& profile) const {
  check_alpha(alpha, "conformal");
  CoverageFlags flags;
  flags.nearest_index = grid.nearest(test.y);
  flags.covered_grid = profile.pi[flags.nearest_index] > alpha;
  flags.pi_exact = rank_at(test, test.y);
  flags.covered_exact = flags.pi_exact > alpha;
  return flags;
}

ConformalResult conformal_set(const LikelihoodModel& model, const PosteriorDraws& draws, const Dataset& train,
                              const Datum& test, const ConformalGrid& grid, double alpha,
                              ConformalOptions options) {
  return ConformalPredictor(model, draws, train, options).conformal_set(test, grid, alpha);
}

CoverageFlags exact_rank_coverage(const LikelihoodModel& model, const PosteriorDraws& draws,
                                  const Dataset& train, const Datum& test, const ConformalGrid& grid,
                                  double alpha, ConformalOptions options) {
  return ConformalPredictor(model, draws, train, options).exact_rank_coverage(test, grid, alpha);
}

}  // namespace cbayes

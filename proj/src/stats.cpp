#include "cuq/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cuq/errors.hpp"
#include "cuq/rng.hpp"

namespace cuq {

double mean(std::span<const double> xs) {
  if (xs.empty()) throw DataError("mean of empty series");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_std(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

double sample_cov(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw DataError("covariance of unequal series");
  if (xs.size() < 2) return 0.0;
  const double mx = mean(xs);
  const double my = mean(ys);
  double s = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (xs[i] - mx) * (ys[i] - my);
  return s / static_cast<double>(xs.size() - 1);
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  const double sx = sample_std(xs);
  const double sy = sample_std(ys);
  if (sx == 0.0 || sy == 0.0) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  const double r = sample_cov(xs, ys) / (sx * sy);
  return std::clamp(r, -1.0, 1.0);
}

std::size_t nearest_rank(double q, std::size_t n) {
  if (n == 0) throw DataError("nearest rank on empty list");
  const double target = q * static_cast<double>(n);
  auto rank = static_cast<std::size_t>(std::ceil(target - 1e-9));
  return std::clamp<std::size_t>(rank, 1, n);
}

BootstrapResult bootstrap(std::span<const double> deviations, std::size_t B,
                          std::uint64_t seed) {
  const std::size_t n = deviations.size();
  if (n == 0) throw DataError("bootstrap on empty series");
  if (B == 0) throw ConfigError("bootstrap needs at least one resample");

  std::vector<double> abs_devs(n);
  for (std::size_t i = 0; i < n; ++i) abs_devs[i] = std::abs(deviations[i]);

  BootstrapResult out;
  out.seed = seed;
  out.B = B;
  out.n = n;
  out.point_estimate = mean(abs_devs);
  out.signed_point = mean(deviations);
  out.resample_means.resize(B);
  out.signed_means.resize(B);

  // One substream per resample: the draw order of resamples cannot affect
  // the outcome, so the loop may be parallelized or reordered freely.
  for (std::size_t z = 0; z < B; ++z) {
    rng::Engine eng = rng::Engine::for_stream(seed, z);
    double sum_abs = 0.0;
    double sum_signed = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t idx = eng.below(n);
      sum_abs += abs_devs[idx];
      sum_signed += deviations[idx];
    }
    out.resample_means[z] = sum_abs / static_cast<double>(n);
    out.signed_means[z] = sum_signed / static_cast<double>(n);
  }
  std::sort(out.resample_means.begin(), out.resample_means.end());
  std::sort(out.signed_means.begin(), out.signed_means.end());
  out.standard_error = sample_std(out.resample_means);
  return out;
}

BootstrapResult bootstrap(const DeviationSeries& series, std::size_t B,
                          std::uint64_t seed) {
  return bootstrap(std::span<const double>(series.values), B, seed);
}

UncertaintyEstimate uncertainty_at(const BootstrapResult& result,
                                   double confidence,
                                   std::optional<double> range) {
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw ConfigError("confidence must lie in (0,1)");
  }
  const auto& means = result.resample_means;
  if (means.empty()) throw DataError("uncertainty from empty bootstrap");

  UncertaintyEstimate est;
  est.confidence = confidence;
  est.u = means[nearest_rank(confidence, means.size()) - 1];
  est.lo = means[nearest_rank((1.0 - confidence) / 2.0, means.size()) - 1];
  est.hi = means[nearest_rank((1.0 + confidence) / 2.0, means.size()) - 1];
  est.point_estimate = result.point_estimate;
  est.signed_mean = result.signed_point;
  est.standard_error = result.standard_error;
  est.n = result.n;
  if (range) {
    if (!(*range > 0.0)) throw ConfigError("operating range must be positive");
    est.relative = est.u / *range;
  }
  return est;
}

namespace {

const std::vector<double>& covariate_series(const DeviationSeries& series,
                                            const std::string& name) {
  const auto it = series.covariates.find(name);
  if (it == series.covariates.end()) {
    throw DataError(series.spec_id + ": unknown covariate '" + name + "'");
  }
  if (it->second.size() != series.values.size()) {
    throw DataError(series.spec_id + ": covariate '" + name + "' not aligned");
  }
  return it->second;
}

}  // namespace

HypothesisResult test_dependency(const DeviationSeries& series,
                                 const std::string& covariate, double alpha,
                                 std::uint64_t seed,
                                 const HypothesisOptions& options) {
  const auto& xi = covariate_series(series, covariate);
  const std::size_t n = series.values.size();
  if (n < 5) throw DataError(series.spec_id + ": too few samples for the test");
  if (options.n_perm == 0) throw ConfigError("permutation count must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0,1)");

  std::vector<double> abs_devs(n);
  for (std::size_t i = 0; i < n; ++i) abs_devs[i] = std::abs(series.values[i]);

  HypothesisResult out;
  out.alpha = alpha;
  out.covariate = covariate;
  out.n = n;

  if (sample_std(xi) == 0.0) {
    throw DataError(series.spec_id + ": degenerate covariate '" + covariate +
                    "' (zero variance)");
  }
  if (sample_std(abs_devs) == 0.0) {
    // No dispersion means no detectable association; report the neutral
    // outcome instead of an undefined statistic.
    out.degenerate_deviations = true;
    out.statistic = 0.0;
    out.p_value = 1.0;
    out.rejected = false;
    return out;
  }

  const double observed = pearson(abs_devs, xi);
  out.statistic = observed;

  // Only the cross moment changes under permutation; precompute the rest.
  const double mx = mean(abs_devs);
  const double my = mean(xi);
  const double sx = sample_std(abs_devs);
  const double sy = sample_std(xi);
  const double denom = sx * sy * static_cast<double>(n - 1);

  std::vector<double> permuted(xi.begin(), xi.end());
  std::size_t at_least_as_extreme = 0;
  for (std::size_t p = 0; p < options.n_perm; ++p) {
    rng::Engine eng = rng::Engine::for_stream(seed, p);
    for (std::size_t i = n - 1; i > 0; --i) {
      const std::size_t j = eng.below(i + 1);
      std::swap(permuted[i], permuted[j]);
    }
    double cross = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      cross += (abs_devs[i] - mx) * (permuted[i] - my);
    }
    const double r = std::clamp(cross / denom, -1.0, 1.0);
    if (r >= observed) ++at_least_as_extreme;
  }
  out.p_value = static_cast<double>(at_least_as_extreme) /
                static_cast<double>(options.n_perm);
  out.rejected = out.p_value < alpha;
  return out;
}

DependencyReport dependency_report(const DeviationSeries& series,
                                   const std::string& covariate) {
  const auto& xi = covariate_series(series, covariate);
  const std::size_t n = series.values.size();
  if (n < 5) throw DataError(series.spec_id + ": too few samples for the report");

  std::vector<double> abs_devs(n);
  for (std::size_t i = 0; i < n; ++i) abs_devs[i] = std::abs(series.values[i]);
  if (sample_std(xi) == 0.0) {
    throw DataError(series.spec_id + ": degenerate covariate '" + covariate + "'");
  }

  DependencyReport out;
  out.covariate = covariate;
  out.n = n;
  out.covariance = sample_cov(abs_devs, xi);
  const double r = pearson(abs_devs, xi);
  out.pearson_r = std::isnan(r) ? 0.0 : r;
  return out;
}

}  // namespace cuq

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cuq/conservation.hpp"

namespace cuq {

/// Small numeric helpers shared by the statistics routines. Sample variants
/// use the n-1 denominator.
double mean(std::span<const double> xs);
double sample_std(std::span<const double> xs);
double sample_cov(std::span<const double> xs, std::span<const double> ys);
/// Pearson correlation, clamped to [-1, 1]. NaN when either side has zero
/// variance.
double pearson(std::span<const double> xs, std::span<const double> ys);

/// Nearest-rank quantile rank (1-based): smallest r with r >= q * n.
/// A 1e-9 slack absorbs floating-point noise when q * n is an integer.
std::size_t nearest_rank(double q, std::size_t n);

/// Outcome of resampling one deviation series B times with replacement.
///
/// Two statistics are bootstrapped side by side: the mean of absolute
/// deviations (the dispersion functional the uncertainty is read from) and
/// the signed mean (a bias telltale meaningful under ground-truth
/// referencing). Both resample-mean lists are sorted ascending, the
/// canonical form for determinism checks.
struct BootstrapResult {
  std::vector<double> resample_means;  // sorted; means of |deviation|
  double point_estimate = 0.0;         // mean |deviation| of the original series
  double standard_error = 0.0;         // sample std of resample_means
  std::uint64_t seed = 0;
  std::size_t B = 0;
  std::size_t n = 0;                  // original series length
  std::vector<double> signed_means;   // sorted; means of signed deviations
  double signed_point = 0.0;          // signed mean of the original series
};

/// Uniform resampling with replacement, B resamples of size n. Resample z
/// draws from substream rng::stream_seed(seed, z), so the result is
/// independent of evaluation order. Throws DataError for an empty series or
/// B == 0.
BootstrapResult bootstrap(std::span<const double> deviations, std::size_t B,
                          std::uint64_t seed);
BootstrapResult bootstrap(const DeviationSeries& series, std::size_t B,
                          std::uint64_t seed);

struct UncertaintyEstimate {
  double u = 0.0;          // deviation units; upper confidence-quantile
  double confidence = 0.95;
  double lo = 0.0;         // central percentile interval
  double hi = 0.0;
  std::optional<double> relative;  // u / operating range, when range known
  double point_estimate = 0.0;
  double signed_mean = 0.0;
  double standard_error = 0.0;
  std::size_t n = 0;
  std::int64_t window_id = 0;
  std::string spec_id;
  bool self_referenced = false;
};

/// Reads the uncertainty off a bootstrap distribution: u is the one-sided
/// upper `confidence`-quantile of the resampled mean-absolute-deviation,
/// nearest-rank rule; the interval is the central percentile interval at the
/// same confidence. Throws ConfigError unless 0 < confidence < 1.
UncertaintyEstimate uncertainty_at(const BootstrapResult& result,
                                   double confidence,
                                   std::optional<double> range = std::nullopt);

struct HypothesisResult {
  double statistic = 0.0;  // Pearson r of (|deviation|, covariate)
  double p_value = 1.0;
  double alpha = 0.05;
  bool rejected = false;
  std::string covariate;
  std::size_t n = 0;
  /// True when the deviation magnitudes had zero variance, in which case no
  /// association is detectable and the test reports statistic 0, p 1.
  bool degenerate_deviations = false;
};

struct HypothesisOptions {
  std::size_t n_perm = 2000;
};

/// One-sided permutation test of positive association between |deviation|
/// and the covariate. p_value is the fraction of the N_perm seeded
/// permutations whose statistic is >= the observed one. Throws DataError
/// for unknown covariate, n < 5, or a constant covariate.
HypothesisResult test_dependency(const DeviationSeries& series,
                                 const std::string& covariate, double alpha,
                                 std::uint64_t seed,
                                 const HypothesisOptions& options = {});

struct DependencyReport {
  double covariance = 0.0;  // sample covariance of (|deviation|, covariate)
  double pearson_r = 0.0;
  std::size_t n = 0;
  std::string covariate;
};

/// Covariance/correlation summary emitted when a dependency was indicated.
/// Same preconditions as test_dependency.
DependencyReport dependency_report(const DeviationSeries& series,
                                   const std::string& covariate);

}  // namespace cuq

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "nse/distributions.hpp"
#include "nse/optimize.hpp"
#include "nse/ranked_quotients.hpp"
#include "nse/rng.hpp"

namespace nse {

/// Per-parameter box. Infinite entries are allowed.
struct Bounds {
  std::vector<double> lo;
  std::vector<double> hi;

  bool contains(std::span<const double> theta) const noexcept;
};

/// Default search box for a family: positive parameters bounded away from 0,
/// shape parameters of GEV/GPD in [-5, 5], stable alpha in [0.02, 0.98].
Bounds default_bounds(Family family);

struct EstimationProblem {
  Family family = Family::Exponential;
  Sample data;
  IndexSet lambda = IndexSet::middle(0.1, 0.9);
  OptimizerConfig optimizer;
  std::size_t n_reference = 10;
  /// Empty means default_bounds(family).
  std::optional<Bounds> theta_bounds;
  /// Empty means a data-driven starting point (see default_start).
  std::optional<std::vector<double>> start;

  /// Throws on fewer than two observations, n_reference == 0, bad bounds or
  /// a bad optimizer configuration.
  void validate() const;
  Bounds bounds() const;
};

struct EstimateResult {
  std::vector<double> theta_hat;
  double loss_value = 0.0;
  /// Which simulated reference sequence gave the minimum (0 for ks_fit / MLE).
  std::size_t reference_index = 0;
  std::size_t iterations = 0;
  bool converged = false;
};

struct ConfidenceSet {
  std::vector<double> lo;
  std::vector<double> hi;
  std::size_t m = 0;
  double alpha = 0.05;
  /// Row j holds the estimate from replicate j; dropped replicates are absent.
  std::vector<std::vector<double>> replicate_estimates;
  std::size_t dropped = 0;
  std::size_t lo_rank = 0;  // 1-based
  std::size_t hi_rank = 0;
};

/// Ranks ceil(alpha m / 2) and floor((1 - alpha/2) m), clamped to [1, m].
std::pair<std::size_t, std::size_t> confidence_ranks(std::size_t m, double alpha);

/// Starting point from moments / quantiles of the data. Always inside the
/// support constraints of the family for the given data where possible.
std::vector<double> default_start(Family family, std::span<const double> data);

/// g(max_k X_(k) / G^-1(F(Y_(k))), max_k G^-1(F(Y_(k))) / X_(k)) over k in lambda.
/// `data_sorted` is on the original scale and ascending; `x_ref` holds ordered
/// unit-exponential draws of the same length. Throws DomainError for a theta
/// outside the family's domain and SupportError for data outside the support.
double nse_loss(std::span<const double> theta, std::span<const double> data_sorted, const OrderedSample& x_ref,
                const IndexSet& lambda, Family family);

/// Ordered unit-exponential reference sequence of length n drawn from `seed`.
OrderedSample reference_sequence(std::size_t n, RngSeed seed);

/// Streams used by fit: reference r is drawn from stream seed.stream_id + 1 + r
/// and restart points from seed.stream_id + 0xffff. Callers that replicate
/// should space stream ids with stream_for().
EstimateResult fit(const EstimationProblem& problem, RngSeed seed);

/// m fits, each against one fresh reference sequence; replicate j fits with
/// stream_for(j, 0) under derive_seed(seed, ...). Replicates whose optimizer
/// did not converge are dropped; more than 10% dropped raises NumericError.
ConfidenceSet confidence_set(const EstimationProblem& problem, std::size_t m, double alpha, RngSeed seed);

/// sup_i max(i/n - F(x_(i)), F(x_(i)) - (i-1)/n) for sorted data.
double ks_objective(std::span<const double> theta, std::span<const double> data_sorted, Family family);

/// Minimises ks_objective with the same multi-start optimizer. Restart points
/// are drawn from `seed`.
EstimateResult ks_fit(const EstimationProblem& problem, RngSeed seed = {});

/// Multi-start Nelder-Mead shared by the estimators: the first start is used
/// as given, further restarts perturb it by initial_scale-sized uniform noise
/// (relative to max(|x|,1)) and are clipped into the box. The objective is
/// treated as +inf outside the box.
EstimateResult multistart_minimize(const Objective& f, const std::vector<double>& start, const Bounds& box,
                                   const OptimizerConfig& config, Rng& rng);

}  // namespace nse

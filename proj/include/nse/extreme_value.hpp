#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>

#include "nse/distributions.hpp"
#include "nse/nse_estimator.hpp"
#include "nse/optimize.hpp"
#include "nse/rng.hpp"

namespace nse {

struct BlockSpec {
  std::size_t block_size = 2;   // m
  std::size_t block_count = 1;  // k
};

struct BlockMaxima {
  Sample maxima;
  /// Observations after the last full block, ignored.
  std::size_t discarded = 0;
};

/// Maximum of each of the first k consecutive blocks of length m.
/// Throws RangeError when the series has fewer than m k observations.
BlockMaxima block_maxima(std::span<const double> series, const BlockSpec& spec);

/// Either a fixed threshold or an empirical quantile level in (0,1).
struct ThresholdSpec {
  std::optional<double> threshold;
  std::optional<double> quantile;
  std::size_t min_exceedances = 30;

  static ThresholdSpec at(double u) { return {u, std::nullopt}; }
  static ThresholdSpec at_quantile(double q) { return {std::nullopt, q}; }
};

double resolve_threshold(std::span<const double> series, const ThresholdSpec& spec);

/// x - u for every x > u, in series order. Throws RangeError (message carries
/// the count) when fewer than min_exceedances values exceed u.
Sample excesses(std::span<const double> series, const ThresholdSpec& spec);

enum class Regime { Regular, Nonstandard, Unreliable };

/// regular: xi > -0.5; nonstandard: -1 < xi <= -0.5; unreliable: xi <= -1.
Regime classify_regime(double xi) noexcept;
std::string_view regime_name(Regime r);

struct EvtFit {
  EstimateResult result;
  Regime regime = Regime::Regular;
};

struct EvtOptions {
  OptimizerConfig optimizer;
  IndexSet lambda = IndexSet::middle(0.1, 0.9);
  std::size_t n_reference = 10;
};

/// Negative log-likelihoods; +inf when any point violates the support.
double gev_negloglik(std::span<const double> theta, std::span<const double> sample) noexcept;
double gpd_negloglik(std::span<const double> theta, std::span<const double> excesses) noexcept;

/// GEV (mu, sigma, xi) by maximum likelihood, xi restricted to [-5, 5].
/// Needs n >= 30.
EvtFit gev_mle(std::span<const double> sample, const EvtOptions& options = {}, RngSeed seed = {});
EvtFit gev_nse(std::span<const double> sample, RngSeed seed, const EvtOptions& options = {});

/// GPD (sigma, xi) for strictly positive excesses.
EvtFit gpd_mle(std::span<const double> excesses, const EvtOptions& options = {}, RngSeed seed = {});
EvtFit gpd_nse(std::span<const double> excesses, RngSeed seed, const EvtOptions& options = {});

}  // namespace nse

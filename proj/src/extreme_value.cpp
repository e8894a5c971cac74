#include "nse/extreme_value.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "nse/error.hpp"

namespace nse {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_sample(std::span<const double> x, std::size_t min_n) {
  if (x.size() < min_n) throw RangeError("need at least " + std::to_string(min_n) + " observations");
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!std::isfinite(x[i])) throw DataError("non-finite observation", i);
}

EvtFit with_regime(EstimateResult r, std::size_t xi_index) {
  const Regime g = classify_regime(r.theta_hat[xi_index]);
  return {std::move(r), g};
}

}  // namespace

BlockMaxima block_maxima(std::span<const double> series, const BlockSpec& spec) {
  if (spec.block_size == 0 || spec.block_count == 0) throw ConfigError("block size and count must be positive");
  const std::size_t need = spec.block_size * spec.block_count;
  if (series.size() < need)
    throw RangeError("series has " + std::to_string(series.size()) + " values, blocks need " + std::to_string(need));
  BlockMaxima out;
  out.maxima.reserve(spec.block_count);
  for (std::size_t b = 0; b < spec.block_count; ++b) {
    const auto first = series.begin() + static_cast<std::ptrdiff_t>(b * spec.block_size);
    out.maxima.push_back(*std::max_element(first, first + static_cast<std::ptrdiff_t>(spec.block_size)));
  }
  out.discarded = series.size() - need;
  return out;
}

double resolve_threshold(std::span<const double> series, const ThresholdSpec& spec) {
  if (spec.threshold.has_value() == spec.quantile.has_value())
    throw ConfigError("give exactly one of threshold or quantile");
  if (spec.threshold) {
    if (!std::isfinite(*spec.threshold)) throw ConfigError("threshold must be finite");
    return *spec.threshold;
  }
  const double q = *spec.quantile;
  if (!(q > 0.0 && q < 1.0)) throw ConfigError("threshold quantile must lie in (0,1)");
  if (series.empty()) throw RangeError("empty series");
  std::vector<double> s(series.begin(), series.end());
  std::sort(s.begin(), s.end());
  const double pos = q * static_cast<double>(s.size() - 1);
  const auto i = static_cast<std::size_t>(pos);
  if (i + 1 >= s.size()) return s.back();
  return s[i] + (pos - static_cast<double>(i)) * (s[i + 1] - s[i]);
}

Sample excesses(std::span<const double> series, const ThresholdSpec& spec) {
  const double u = resolve_threshold(series, spec);
  Sample out;
  for (double x : series)
    if (x > u) out.push_back(x - u);
  if (out.size() < spec.min_exceedances)
    throw RangeError("only " + std::to_string(out.size()) + " exceedances above the threshold, need " +
                     std::to_string(spec.min_exceedances));
  return out;
}

Regime classify_regime(double xi) noexcept {
  if (xi > -0.5) return Regime::Regular;
  if (xi > -1.0) return Regime::Nonstandard;
  return Regime::Unreliable;
}

std::string_view regime_name(Regime r) {
  switch (r) {
    case Regime::Regular:
      return "regular";
    case Regime::Nonstandard:
      return "nonstandard";
    case Regime::Unreliable:
      return "unreliable";
  }
  return "?";
}

double gev_negloglik(std::span<const double> th, std::span<const double> x) noexcept {
  const double mu = th[0], sigma = th[1], xi = th[2];
  if (!(sigma > 0.0) || !std::isfinite(mu) || !std::isfinite(xi)) return kInf;
  const double n = static_cast<double>(x.size());
  double s = n * std::log(sigma);
  if (std::abs(xi) < kShapeZeroTolerance) {
    for (double v : x) {
      const double z = (v - mu) / sigma;
      s += z + std::exp(-z);
    }
    return s;
  }
  for (double v : x) {
    const double w = 1.0 + xi * (v - mu) / sigma;
    if (!(w > 0.0)) return kInf;
    const double lw = std::log(w);
    s += (1.0 + 1.0 / xi) * lw + std::exp(-lw / xi);
  }
  return std::isnan(s) ? kInf : s;
}

double gpd_negloglik(std::span<const double> th, std::span<const double> y) noexcept {
  const double sigma = th[0], xi = th[1];
  if (!(sigma > 0.0) || !std::isfinite(xi)) return kInf;
  const double n = static_cast<double>(y.size());
  double s = n * std::log(sigma);
  if (std::abs(xi) < kShapeZeroTolerance) {
    for (double v : y) s += v / sigma;
    return s;
  }
  for (double v : y) {
    const double w = 1.0 + xi * v / sigma;
    if (!(w > 0.0)) return kInf;
    s += (1.0 + 1.0 / xi) * std::log(w);
  }
  return std::isnan(s) ? kInf : s;
}

EvtFit gev_mle(std::span<const double> sample, const EvtOptions& opt, RngSeed seed) {
  check_sample(sample, 30);
  validate(opt.optimizer);
  const std::vector<double> data(sample.begin(), sample.end());
  Rng rng(seed);
  auto f = [&](const std::vector<double>& th) { return gev_negloglik(th, data); };
  auto r = multistart_minimize(f, default_start(Family::GEV, data), default_bounds(Family::GEV), opt.optimizer, rng);
  return with_regime(std::move(r), 2);
}

EvtFit gev_nse(std::span<const double> sample, RngSeed seed, const EvtOptions& opt) {
  check_sample(sample, 30);
  EstimationProblem p;
  p.family = Family::GEV;
  p.data.assign(sample.begin(), sample.end());
  p.lambda = opt.lambda;
  p.optimizer = opt.optimizer;
  p.n_reference = opt.n_reference;
  return with_regime(fit(p, seed), 2);
}

EvtFit gpd_mle(std::span<const double> y, const EvtOptions& opt, RngSeed seed) {
  check_sample(y, 2);
  for (std::size_t i = 0; i < y.size(); ++i)
    if (!(y[i] > 0.0)) throw DataError("excesses must be positive", i);
  validate(opt.optimizer);
  const std::vector<double> data(y.begin(), y.end());
  Rng rng(seed);
  auto f = [&](const std::vector<double>& th) { return gpd_negloglik(th, data); };
  auto r = multistart_minimize(f, default_start(Family::GPD, data), default_bounds(Family::GPD), opt.optimizer, rng);
  return with_regime(std::move(r), 1);
}

EvtFit gpd_nse(std::span<const double> y, RngSeed seed, const EvtOptions& opt) {
  check_sample(y, 2);
  for (std::size_t i = 0; i < y.size(); ++i)
    if (!(y[i] > 0.0)) throw DataError("excesses must be positive", i);
  EstimationProblem p;
  p.family = Family::GPD;
  p.data.assign(y.begin(), y.end());
  p.lambda = opt.lambda;
  p.optimizer = opt.optimizer;
  p.n_reference = opt.n_reference;
  return with_regime(fit(p, seed), 1);
}

}  // namespace nse

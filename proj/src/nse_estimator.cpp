#include "nse/nse_estimator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <numeric>
#include <tuple>

#include "nse/error.hpp"
#include "nse/parallel.hpp"

namespace nse {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTiny = 1e-10;
// Restart points are drawn uniformly within this relative distance of the start.
constexpr double kRestartSpread = 0.5;
constexpr std::uint64_t kRestartStream = 0xffff;

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd_of(std::span<const double> v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() > 1 ? v.size() - 1 : 1));
}

double sorted_quantile(std::span<const double> s, double p) {
  const double pos = p * static_cast<double>(s.size() - 1);
  const auto i = static_cast<std::size_t>(pos);
  if (i + 1 >= s.size()) return s.back();
  return s[i] + (pos - static_cast<double>(i)) * (s[i + 1] - s[i]);
}

// Probability-weighted moments b_r = mean of x_(i) * C(i-1, r) / C(n-1, r).
std::array<double, 3> pwm(std::span<const double> s) {
  const double n = static_cast<double>(s.size());
  std::array<double, 3> b{0.0, 0.0, 0.0};
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double i = static_cast<double>(k);
    b[0] += s[k];
    b[1] += s[k] * i / (n - 1.0);
    b[2] += s[k] * i * (i - 1.0) / ((n - 1.0) * (n - 2.0));
  }
  for (double& x : b) x /= n;
  return b;
}

// Sorted transformed values at `positions`; returns +inf when something is
// outside the support. Ratios are taken against the reference at the same rank.
double loss_at(std::span<const double> theta, std::span<const double> data_sorted, std::span<const double> xref,
               std::span<const std::size_t> positions, Family family) {
  DistributionSpec spec{family, std::vector<double>(theta.begin(), theta.end())};
  if (!is_valid(spec)) return kInf;
  double q1 = 0.0, q2 = 0.0;
  for (std::size_t k : positions) {
    const double z = to_unit_exponential_unchecked(spec, data_sorted[k]);
    if (!(z > 0.0) || !std::isfinite(z)) return kInf;
    q1 = std::max(q1, xref[k] / z);
    q2 = std::max(q2, z / xref[k]);
  }
  return std::max({q1, q2, 1.0 / q1, 1.0 / q2});
}

}  // namespace

bool Bounds::contains(std::span<const double> theta) const noexcept {
  if (theta.size() != lo.size() || theta.size() != hi.size()) return false;
  for (std::size_t i = 0; i < theta.size(); ++i)
    if (!(theta[i] >= lo[i] && theta[i] <= hi[i])) return false;
  return true;
}

Bounds default_bounds(Family family) {
  switch (family) {
    case Family::UnitExponential:
    case Family::UnitFrechet:
      return {{}, {}};
    case Family::Exponential:
      return {{kTiny}, {1e10}};
    case Family::Normal:
      return {{-kInf, kTiny}, {kInf, kInf}};
    case Family::StudentT:
      return {{0.05, -kInf, kTiny}, {1e3, kInf, kInf}};
    case Family::GEV:
      return {{-kInf, kTiny, -5.0}, {kInf, kInf, 5.0}};
    case Family::GPD:
      return {{kTiny, -5.0}, {kInf, 5.0}};
    case Family::PositiveStable:
      return {{0.02, -kInf, kTiny}, {0.98, kInf, kInf}};
  }
  return {};
}

void EstimationProblem::validate() const {
  if (data.size() < 2) throw ConfigError("estimation needs at least two observations");
  for (std::size_t i = 0; i < data.size(); ++i)
    if (!std::isfinite(data[i])) throw DataError("non-finite observation", i);
  if (n_reference == 0) throw ConfigError("n_reference must be at least 1");
  nse::validate(optimizer);
  const Bounds b = bounds();
  const std::size_t p = parameter_count(family);
  if (b.lo.size() != p || b.hi.size() != p) throw ConfigError("bounds have the wrong dimension");
  for (std::size_t i = 0; i < p; ++i)
    if (!(b.lo[i] < b.hi[i])) throw ConfigError("bounds must satisfy lo < hi");
  if (start && start->size() != p) throw ConfigError("start has the wrong dimension");
  (void)lambda.resolve(data.size());
}

Bounds EstimationProblem::bounds() const { return theta_bounds ? *theta_bounds : default_bounds(family); }

std::pair<std::size_t, std::size_t> confidence_ranks(std::size_t m, double alpha) {
  if (m == 0) throw ConfigError("confidence set needs m >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("confidence level alpha must lie in (0,1)");
  const double md = static_cast<double>(m);
  auto lo = static_cast<std::size_t>(std::ceil(alpha * md / 2.0 - 1e-9));
  auto hi = static_cast<std::size_t>(std::floor((1.0 - alpha / 2.0) * md + 1e-9));
  lo = std::clamp<std::size_t>(lo, 1, m);
  hi = std::clamp<std::size_t>(hi, lo, m);
  return {lo, hi};
}

std::vector<double> default_start(Family family, std::span<const double> data) {
  std::vector<double> s(data.begin(), data.end());
  std::sort(s.begin(), s.end());
  const double m = mean_of(s);
  const double sd = std::max(sd_of(s), 1e-8);
  const double lo = s.front();
  const double hi = s.back();
  const double med = sorted_quantile(s, 0.5);
  switch (family) {
    case Family::UnitExponential:
    case Family::UnitFrechet:
      return {};
    case Family::Exponential:
      return {m > 0.0 ? 1.0 / m : 1.0};
    case Family::Normal:
      return {m, sd};
    case Family::StudentT: {
      const double iqr = sorted_quantile(s, 0.75) - sorted_quantile(s, 0.25);
      return {5.0, med, std::max(iqr / 1.5, 1e-8)};
    }
    case Family::GEV: {
      // Hosking's PWM approximation, k = -xi.
      const auto b = pwm(s);
      double xi = 0.1, sigma = sd * std::sqrt(6.0) / std::numbers::pi, mu = m - 0.5772 * sigma;
      const double den = 3.0 * b[2] - b[0];
      if (s.size() > 2 && std::abs(den) > 1e-300) {
        const double c = (2.0 * b[1] - b[0]) / den - std::log(2.0) / std::log(3.0);
        const double k = std::clamp(7.859 * c + 2.9554 * c * c, -0.9, 4.5);
        if (std::abs(k) > 1e-6) {
          const double g = std::tgamma(1.0 + k);
          const double sg = (2.0 * b[1] - b[0]) * k / (g * (1.0 - std::pow(2.0, -k)));
          if (sg > 0.0 && std::isfinite(sg)) {
            xi = -k;
            sigma = sg;
            mu = b[0] + sigma * (g - 1.0) / k;
          }
        }
      }
      // Push the start inside the support of every observation.
      if (xi < 0.0 && !(hi < mu - sigma / xi)) sigma = -xi * (hi - mu) * 1.05 + 1e-8 * sd;
      if (xi > 0.0 && !(lo > mu - sigma / xi)) sigma = xi * (mu - lo) * 1.05 + 1e-8 * sd;
      return {mu, std::max(sigma, 1e-8), xi};
    }
    case Family::GPD: {
      // a0 = E X, a1 = E X (1 - F).
      const double n = static_cast<double>(s.size());
      double a0 = 0.0, a1 = 0.0;
      for (std::size_t k = 0; k < s.size(); ++k) {
        a0 += s[k];
        a1 += s[k] * (n - 1.0 - static_cast<double>(k)) / (n - 1.0);
      }
      a0 /= n;
      a1 /= n;
      double xi = 0.0, sigma = std::max(m, 1e-8);
      if (a0 - 2.0 * a1 > 0.0) {
        xi = std::clamp(2.0 - a0 / (a0 - 2.0 * a1), -4.5, 4.5);
        sigma = 2.0 * a0 * a1 / (a0 - 2.0 * a1);
      }
      if (xi < 0.0 && !(hi < sigma / -xi)) sigma = -xi * hi * 1.05;
      return {std::max(sigma, 1e-8), xi};
    }
    case Family::PositiveStable: {
      const double loc = lo - 0.05 * std::max(med - lo, 1e-8);
      // Median of the standard alpha = 1/2 law is 1 / (4 erfc^-1(1/2)^2) ~ 2.198.
      return {0.5, loc, std::max((med - loc) / 2.198, 1e-8)};
    }
  }
  return {};
}

double nse_loss(std::span<const double> theta, std::span<const double> data_sorted, const OrderedSample& x_ref,
                const IndexSet& lambda, Family family) {
  validate(DistributionSpec{family, std::vector<double>(theta.begin(), theta.end())});
  if (x_ref.size() != data_sorted.size()) throw ConfigError("reference and data lengths differ");
  for (std::size_t i = 1; i < data_sorted.size(); ++i)
    if (data_sorted[i] < data_sorted[i - 1]) throw DataError("data must be sorted ascending", i);
  const DistributionSpec spec{family, std::vector<double>(theta.begin(), theta.end())};
  const auto z = to_unit_exponential(spec, data_sorted);
  const auto positions = lambda.resolve(data_sorted.size());
  const auto q = mrq(x_ref.values(), z, positions);
  return g_loss(q.q1, q.q2);
}

OrderedSample reference_sequence(std::size_t n, RngSeed seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.exponential();
  return OrderedSample::from_sample(v);
}

EstimateResult multistart_minimize(const Objective& f, const std::vector<double>& start, const Bounds& box,
                                   const OptimizerConfig& config, Rng& rng) {
  auto boxed = [&](const std::vector<double>& x) { return box.contains(x) ? f(x) : kInf; };
  auto clip = [&](std::vector<double> x) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], box.lo[i], box.hi[i]);
    return x;
  };
  auto perturb = [&](const std::vector<double>& x) {
    std::vector<double> y(x);
    for (std::size_t i = 0; i < y.size(); ++i)
      y[i] += kRestartSpread * std::max(std::abs(x[i]), 1.0) * (2.0 * rng.uniform() - 1.0);
    return clip(std::move(y));
  };

  EstimateResult best;
  best.loss_value = kInf;
  best.theta_hat = start;
  for (std::size_t r = 0; r < config.restarts; ++r) {
    std::vector<double> x0 = r == 0 ? clip(start) : perturb(start);
    // An infeasible start would leave the simplex with nothing to compare.
    for (int tries = 0; tries < 50 && !std::isfinite(boxed(x0)); ++tries) x0 = perturb(start);
    if (!std::isfinite(boxed(x0))) continue;
    auto res = nelder_mead(boxed, x0, config.initial_scale, config.max_iterations, config.simplex_tolerance);
    best.iterations += res.iterations;
    if (res.value < best.loss_value) {
      best.theta_hat = std::move(res.x);
      best.loss_value = res.value;
    }
    best.converged = best.converged || res.converged;
  }
  if (!std::isfinite(best.loss_value))
    throw NumericError("no restart reached a finite objective value", best.loss_value);
  return best;
}

EstimateResult fit(const EstimationProblem& problem, RngSeed seed) {
  problem.validate();
  std::vector<double> data(problem.data);
  std::sort(data.begin(), data.end());
  const std::size_t n = data.size();
  const auto positions = problem.lambda.resolve(n);
  const Bounds box = problem.bounds();
  const std::vector<double> start = problem.start ? *problem.start : default_start(problem.family, data);

  std::vector<std::optional<EstimateResult>> results(problem.n_reference);
  std::vector<std::exception_ptr> errors(problem.n_reference);
  parallel_for(problem.n_reference, [&](std::size_t r) {
    const auto ref = reference_sequence(n, with_stream(seed, seed.stream_id + 1 + r));
    Rng rng(with_stream(seed, seed.stream_id + kRestartStream));
    rng.seek(r * 1024);
    auto objective = [&](const std::vector<double>& th) {
      return loss_at(th, data, ref.values(), positions, problem.family);
    };
    try {
      auto res = multistart_minimize(objective, start, box, problem.optimizer, rng);
      res.reference_index = r;
      results[r] = std::move(res);
    } catch (const NumericError&) {
      errors[r] = std::current_exception();
    }
  });

  std::optional<EstimateResult> best;
  std::size_t iterations = 0;
  for (auto& r : results) {
    if (!r) continue;
    iterations += r->iterations;
    if (!best || r->loss_value < best->loss_value) best = r;
  }
  if (!best) std::rethrow_exception(errors.front());
  best->iterations = iterations;
  return *best;
}

ConfidenceSet confidence_set(const EstimationProblem& problem, std::size_t m, double alpha, RngSeed seed) {
  if (m < 20) throw ConfigError("confidence sets need m >= 20 replicates");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("confidence level alpha must lie in (0,1)");
  problem.validate();
  EstimationProblem single = problem;
  single.n_reference = 1;

  const RngSeed base = derive_seed(seed, 0xc5);
  std::vector<std::optional<std::vector<double>>> est(m);
  parallel_for(m, [&](std::size_t j) {
    try {
      const auto res = fit(single, with_stream(base, stream_for(j, 0)));
      if (res.converged) est[j] = res.theta_hat;
    } catch (const NumericError&) {
    }
  });

  ConfidenceSet cs;
  cs.m = m;
  cs.alpha = alpha;
  for (auto& e : est) {
    if (e)
      cs.replicate_estimates.push_back(std::move(*e));
    else
      ++cs.dropped;
  }
  if (cs.dropped * 10 > m)
    throw NumericError("too many non-convergent replicates in confidence set", static_cast<double>(cs.dropped));
  const std::size_t kept = cs.replicate_estimates.size();
  std::tie(cs.lo_rank, cs.hi_rank) = confidence_ranks(kept, alpha);
  const std::size_t p = parameter_count(problem.family);
  for (std::size_t i = 0; i < p; ++i) {
    std::vector<double> col(kept);
    for (std::size_t j = 0; j < kept; ++j) col[j] = cs.replicate_estimates[j][i];
    std::sort(col.begin(), col.end());
    cs.lo.push_back(col[cs.lo_rank - 1]);
    cs.hi.push_back(col[cs.hi_rank - 1]);
  }
  return cs;
}

double ks_objective(std::span<const double> theta, std::span<const double> data_sorted, Family family) {
  const DistributionSpec spec{family, std::vector<double>(theta.begin(), theta.end())};
  validate(spec);
  const double n = static_cast<double>(data_sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < data_sorted.size(); ++i) {
    const double f = cdf(spec, data_sorted[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

EstimateResult ks_fit(const EstimationProblem& problem, RngSeed seed) {
  problem.validate();
  std::vector<double> data(problem.data);
  std::sort(data.begin(), data.end());
  const std::vector<double> start = problem.start ? *problem.start : default_start(problem.family, data);
  Rng rng(seed);
  auto objective = [&](const std::vector<double>& th) {
    if (!is_valid(DistributionSpec{problem.family, th})) return kInf;
    return ks_objective(th, data, problem.family);
  };
  return multistart_minimize(objective, start, problem.bounds(), problem.optimizer, rng);
}

}  // namespace nse

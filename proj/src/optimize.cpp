#include "nse/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "nse/error.hpp"

namespace nse {

void validate(const OptimizerConfig& c) {
  if (c.restarts == 0) throw ConfigError("optimizer restarts must be positive");
  if (c.max_iterations == 0) throw ConfigError("optimizer max_iterations must be positive");
  if (!(c.simplex_tolerance > 0.0)) throw ConfigError("optimizer simplex_tolerance must be positive");
  if (!(c.initial_scale > 0.0)) throw ConfigError("optimizer initial_scale must be positive");
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double safe_eval(const Objective& f, const std::vector<double>& x) {
  const double v = f(x);
  return std::isnan(v) ? kInf : v;
}

}  // namespace

MinimizeResult nelder_mead(const Objective& f, std::vector<double> start, double initial_scale,
                           std::size_t max_iterations, double tolerance) {
  const std::size_t d = start.size();
  if (d == 0) return {start, safe_eval(f, start), 0, true};
  const double dd = static_cast<double>(d);
  const double rho = 1.0;
  const double chi = 1.0 + 2.0 / dd;
  const double gamma = 0.75 - 1.0 / (2.0 * dd);
  const double sigma = 1.0 - 1.0 / dd;

  std::vector<std::vector<double>> pts(d + 1, start);
  std::vector<double> vals(d + 1);
  for (std::size_t i = 0; i < d; ++i) {
    const double step = initial_scale * std::max(std::abs(start[i]), 1.0);
    pts[i + 1][i] += step;
  }
  for (std::size_t i = 0; i <= d; ++i) vals[i] = safe_eval(f, pts[i]);

  std::vector<std::size_t> order(d + 1);
  std::vector<double> centroid(d), trial(d), trial2(d);
  auto point_at = [&](double t, std::vector<double>& out, const std::vector<double>& worst) {
    for (std::size_t j = 0; j < d; ++j) out[j] = centroid[j] + t * (worst[j] - centroid[j]);
  };

  std::size_t it = 0;
  bool converged = false;
  for (; it < max_iterations; ++it) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    {
      std::vector<std::vector<double>> p2(d + 1);
      std::vector<double> v2(d + 1);
      for (std::size_t i = 0; i <= d; ++i) {
        p2[i] = std::move(pts[order[i]]);
        v2[i] = vals[order[i]];
      }
      pts = std::move(p2);
      vals = std::move(v2);
    }

    if (std::isfinite(vals[d])) {
      double diam = 0.0;
      for (std::size_t i = 1; i <= d; ++i)
        for (std::size_t j = 0; j < d; ++j)
          diam = std::max(diam, std::abs(pts[i][j] - pts[0][j]) / std::max(std::abs(pts[0][j]), 1.0));
      const double spread = vals[d] - vals[0];
      if (diam <= tolerance && spread <= tolerance * std::max(std::abs(vals[0]), 1.0)) {
        converged = true;
        break;
      }
    }

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) centroid[j] += pts[i][j] / dd;

    const auto& worst = pts[d];
    point_at(-rho, trial, worst);
    const double fr = safe_eval(f, trial);
    if (fr < vals[0]) {
      point_at(-rho * chi, trial2, worst);
      const double fe = safe_eval(f, trial2);
      if (fe < fr) {
        pts[d] = trial2;
        vals[d] = fe;
      } else {
        pts[d] = trial;
        vals[d] = fr;
      }
      continue;
    }
    if (fr < vals[d - 1]) {
      pts[d] = trial;
      vals[d] = fr;
      continue;
    }
    if (fr < vals[d]) {
      point_at(-rho * gamma, trial2, worst);
      const double fc = safe_eval(f, trial2);
      if (fc <= fr) {
        pts[d] = trial2;
        vals[d] = fc;
        continue;
      }
    } else {
      point_at(gamma, trial2, worst);
      const double fc = safe_eval(f, trial2);
      if (fc < vals[d]) {
        pts[d] = trial2;
        vals[d] = fc;
        continue;
      }
    }
    // Shrink towards the best vertex.
    for (std::size_t i = 1; i <= d; ++i) {
      for (std::size_t j = 0; j < d; ++j) pts[i][j] = pts[0][j] + sigma * (pts[i][j] - pts[0][j]);
      vals[i] = safe_eval(f, pts[i]);
    }
  }
  const auto best = static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
  return {pts[best], vals[best], it, converged};
}

}  // namespace nse

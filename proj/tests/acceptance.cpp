// Acceptance checks 1-13. Prints one PASS/FAIL line per criterion; exit code 1
// when any fails. Every criterion is run twice, with one worker and with
// several, and criterion 13 compares the two runs byte for byte.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "nse/distributions.hpp"
#include "nse/exact_combinatorics.hpp"
#include "nse/extreme_value.hpp"
#include "nse/harness.hpp"
#include "nse/nse_estimator.hpp"
#include "nse/parallel.hpp"
#include "nse/ranked_quotients.hpp"

using namespace nse;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
  std::string fingerprint;  // every number the verdict depends on
};

std::string g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string g4(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Counts of {q <= t} for each t over `reps` draws of q, split into fixed chunks
// with one stream each so the total does not depend on scheduling.
std::vector<std::uint64_t> mc_counts(std::uint64_t reps, std::uint64_t seed, const std::vector<double>& ts,
                                     const std::function<double(Rng&)>& draw) {
  constexpr std::size_t chunks = 128;
  std::vector<std::vector<std::uint64_t>> part(chunks, std::vector<std::uint64_t>(ts.size(), 0));
  parallel_for(chunks, [&](std::size_t c) {
    Rng rng({seed, stream_for(c, 0)});
    const std::uint64_t lo = reps * c / chunks, hi = reps * (c + 1) / chunks;
    for (std::uint64_t r = lo; r < hi; ++r) {
      const double q = draw(rng);
      for (std::size_t k = 0; k < ts.size(); ++k) part[c][k] += q <= ts[k];
    }
  });
  std::vector<std::uint64_t> total(ts.size(), 0);
  for (const auto& p : part)
    for (std::size_t k = 0; k < ts.size(); ++k) total[k] += p[k];
  return total;
}

// max_i X_(i)/Y_(i) over the first m ranks of two unit-exponential samples of size n.
double left_quotient(Rng& rng, std::size_t n, std::size_t m) {
  std::vector<double> x(n), y(n);
  for (auto& v : x) v = rng.exponential();
  for (auto& v : y) v = rng.exponential();
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  double q = 0.0;
  for (std::size_t i = 0; i < m; ++i) q = std::max(q, x[i] / y[i]);
  return q;
}

Outcome c1() {
  const std::vector<std::vector<int>> rows = {{1}, {2, 1}, {5, 6, 2}, {14, 28, 20, 5}};
  Outcome o{true, "", ""};
  for (std::size_t m = 0; m < rows.size(); ++m)
    for (std::size_t j = 0; j < rows[m].size(); ++j) {
      const BigInt b = borel(static_cast<long long>(m), static_cast<long long>(j));
      o.fingerprint += b.str() + ",";
      o.pass = o.pass && b == rows[m][j];
    }
  o.detail = "rows 0..3 = " + o.fingerprint;
  return o;
}

Outcome c2() {
  // oracle: printed polynomials in exact rational arithmetic at t = i/2
  double worst = 0.0;
  Outcome o;
  for (int i = 1; i <= 20; ++i) {
    const Rational t(i, 2);
    const Rational k = 1 + 1 / t;
    const Rational k2 = k * k, k3 = k2 * k;
    const Rational exact[4] = {1 / k, (2 * k - 1) / k3, (5 * k2 - 6 * k + 2) / (k3 * k2),
                               (14 * k3 - 28 * k2 + 20 * k - 5) / (k3 * k3 * k)};
    for (std::size_t ell = 1; ell <= 4; ++ell) {
      const double ref = exact[ell - 1].convert_to<double>();
      const double v = limit_left_cdf(ell, t.convert_to<double>());
      worst = std::max(worst, std::abs(v - ref) / ref);
      o.fingerprint += g17(v) + ",";
    }
  }
  o.pass = worst < 1e-12;
  o.detail = "max relative error " + g4(worst) + " over 80 points";
  return o;
}

Outcome c3() {
  const std::uint64_t reps = 200000;
  const std::size_t n = 10;
  const auto cnt = mc_counts(reps, 3003, {1.0}, [&](Rng& r) { return left_quotient(r, n, n); });
  const double p = 1.0 / 11.0, phat = static_cast<double>(cnt[0]) / reps;
  const double se = std::sqrt(p * (1 - p) / reps);
  return {std::abs(phat - p) <= 3 * se,
          "P(q<=1) = " + g4(phat) + " vs 1/11 = " + g4(p) + ", |z| = " + g4(std::abs(phat - p) / se),
          std::to_string(cnt[0])};
}

Outcome c4() {
  Outcome o{true, "", ""};
  for (std::size_t n = 1; n <= 6; ++n) {
    const Rational v = exact_full_mrq_cdf(n, Rational(1));
    o.pass = o.pass && v == Rational(1, static_cast<long long>(n + 1));
    o.fingerprint += v.str() + ",";
  }
  if (!o.pass) o.detail = "F(1,n) != 1/(n+1); ";
  const std::vector<double> ts = {0.5, 1.0, 2.0};
  const std::uint64_t reps = 1000000;
  double worst = 0.0;
  for (std::size_t n = 2; n <= 5; ++n) {
    const auto cnt = mc_counts(reps, 4000 + n, ts, [&](Rng& r) { return left_quotient(r, n, n); });
    for (std::size_t k = 0; k < ts.size(); ++k) {
      const double f = exact_full_mrq_cdf(n, ts[k]);
      const double phat = static_cast<double>(cnt[k]) / reps;
      const double z = std::abs(phat - f) / std::sqrt(f * (1 - f) / reps);
      worst = std::max(worst, z);
      o.fingerprint += std::to_string(cnt[k]) + ",";
    }
  }
  o.pass = o.pass && worst <= 3.0;
  o.detail += "F(1,n)=1/(n+1) exact for n=1..6; max |z| vs 1e6-rep MC = " + g4(worst);
  return o;
}

Outcome c5() {
  const std::size_t n = 1000, reps = 100000, chunks = 100;
  std::vector<double> q(reps);
  parallel_for(chunks, [&](std::size_t c) {
    Rng rng({5005, stream_for(c, 0)});
    std::vector<double> a(n), b(n);
    for (std::size_t r = c * reps / chunks; r < (c + 1) * reps / chunks; ++r) {
      for (auto& v : a) v = rng.exponential();
      for (auto& v : b) v = rng.exponential();
      q[r] = mrq(order_stats(a), order_stats(b), IndexSet::left(1)).q1;
    }
  });
  std::string fp = sha256_hex(std::string_view(reinterpret_cast<const char*>(q.data()), q.size() * sizeof(double)));
  std::sort(q.begin(), q.end());
  double d = 0.0;
  for (std::size_t i = 0; i < reps; ++i) {
    const double f = q[i] / (1 + q[i]);
    d = std::max({d, static_cast<double>(i + 1) / reps - f, f - static_cast<double>(i) / reps});
  }
  return {d < 0.01, "KS distance to t/(1+t) = " + g4(d), fp};
}

Outcome c6() {
  Outcome o{true, "", ""};
  double worst1 = 0.0;
  for (std::size_t n : {1u, 2u, 5u, 10u, 50u})
    for (double t : {0.1, 0.5, 1.0, 2.0, 7.0}) {
      if (n == 1) continue;  // m = n = 1 goes through the composition sum
      const double v = finite_left_cdf(n, 1, t).value;
      worst1 = std::max(worst1, std::abs(v - static_cast<double>(1.0L / (1.0L + 1.0L / t))));
      o.fingerprint += g17(v) + ",";
    }
  o.pass = worst1 == 0.0;
  const std::vector<double> ts = {0.5, 1.0, 2.0};
  const std::uint64_t reps = 1000000;
  double worst = 0.0;
  for (std::size_t n : {5u, 10u}) {
    const auto cnt = mc_counts(reps, 6000 + n, ts, [&](Rng& r) { return left_quotient(r, n, 2); });
    for (std::size_t k = 0; k < ts.size(); ++k) {
      const double f = finite_left_cdf(n, 2, ts[k]).value;
      const double phat = static_cast<double>(cnt[k]) / reps;
      worst = std::max(worst, std::abs(phat - f) / std::sqrt(f * (1 - f) / reps));
      o.fingerprint += std::to_string(cnt[k]) + ",";
    }
  }
  const double gap = std::abs(finite_left_cdf(50, 3, 1.0).value - 5.0 / 16.0);
  o.pass = o.pass && worst <= 3.0 && gap < 0.02;
  o.detail = "R_{n,1}=1/k exact: " + std::string(worst1 == 0.0 ? "yes" : "no, off by " + g4(worst1)) +
             "; R_{5,2},R_{10,2} max |z| = " + g4(worst) + "; |R_{50,3}(1)-5/16| = " + g4(gap);
  return o;
}

Outcome c7() {
  const std::size_t n = 100000, reps = 100;
  std::vector<double> mid1(reps), mid2(reps), right1(reps), right2(reps), shift(reps);
  const auto pos_mid = IndexSet::middle(0.1, 0.9).resolve(n);
  const auto pos_right = IndexSet::right(5).resolve(n);
  parallel_for(reps, [&](std::size_t r) {
    Rng rng({7007, stream_for(r, 0)});
    std::vector<double> x(n), y(n), x2(n);
    for (auto& v : x) v = rng.exponential();
    for (auto& v : y) v = rng.exponential();
    for (auto& v : x2) v = rng.exponential() / 2.0;
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    std::sort(x2.begin(), x2.end());
    auto q = mrq(x, y, pos_mid);
    mid1[r] = q.q1;
    mid2[r] = q.q2;
    q = mrq(x, y, pos_right);
    right1[r] = q.q1;
    right2[r] = q.q2;
    shift[r] = mrq(x2, y, pos_mid).q1;
  });
  int ok_mid = 0, ok_right = 0, ok_shift = 0;
  std::string fp;
  for (std::size_t r = 0; r < reps; ++r) {
    ok_mid += std::abs(mid1[r] - 1) < 0.05 && std::abs(mid2[r] - 1) < 0.05;
    // right end: q1 = max X/Y over the top k
    ok_right += std::abs(right1[r] - 1) < 0.1;
    ok_shift += std::abs(shift[r] - 0.5) < 0.03;
    fp += g17(mid1[r]) + g17(mid2[r]) + g17(right1[r]) + g17(right2[r]) + g17(shift[r]);
  }
  return {ok_mid >= 95 && ok_right >= 95 && ok_shift >= 95,
          "middle " + std::to_string(ok_mid) + "/100, right:5 " + std::to_string(ok_right) + "/100, Exp(2) vs Exp(1) " +
              std::to_string(ok_shift) + "/100",
          sha256_hex(fp)};
}

Outcome c8(const std::filesystem::path& scratch) {
  ExperimentConfig c;
  c.scenario = ScenarioType::Table1_2;
  c.n = 300;
  c.replications = 20;
  c.seed = 8008;
  c.params = {{"errors", "exp,t2,t4"}};
  c.output_dir = scratch / "table";
  const auto m = run(c);
  std::ifstream in(c.output_dir / "summary.csv");
  std::string line;
  std::map<std::string, int> ols, nse;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() == 5 && f[2] == "lilliefors") (f[1] == "ols" ? ols : nse)[f[0]] = std::stoi(f[3]);
  }
  std::filesystem::remove_all(c.output_dir);
  bool pass = ols["exp"] <= 1;
  std::string detail = "Lilliefors passes (OLS vs NSE):";
  for (const std::string e : {"exp", "t2", "t4"}) {
    pass = pass && nse[e] > ols[e];
    detail += " " + e + " " + std::to_string(ols[e]) + " vs " + std::to_string(nse[e]) + ";";
  }
  std::string fp;
  for (const auto& f : m.outputs) fp += f.sha256;
  return {pass, detail, fp};
}

Outcome c9() {
  const std::size_t reps = 20;
  std::vector<double> nse_err(reps), mle_err(reps);
  std::vector<int> mle_bad(reps);
  parallel_for(reps, [&](std::size_t r) {
    const auto x = sample({Family::GEV, {0, 1, -2}}, 500, {9009, stream_for(r, 0)});
    const auto a = gev_nse(x, {9010, stream_for(r, 0)});
    const auto b = gev_mle(x, {}, {9011, stream_for(r, 0)});
    nse_err[r] = std::abs(a.result.theta_hat[2] + 2);
    mle_err[r] = std::abs(b.result.theta_hat[2] + 2);
    mle_bad[r] = b.regime == Regime::Unreliable || mle_err[r] > nse_err[r];
  });
  const double med = median(nse_err);
  int bad = 0;
  std::string fp;
  for (std::size_t r = 0; r < reps; ++r) {
    bad += mle_bad[r];
    fp += g17(nse_err[r]) + g17(mle_err[r]);
  }
  return {med < 0.3 && bad > static_cast<int>(reps / 2),
          "NSE median |xi+2| = " + g4(med) + " (MLE " + g4(median(mle_err)) + "); MLE unreliable or worse in " +
              std::to_string(bad) + "/20",
          fp};
}

Outcome c10() {
  Outcome o;
  double worst_cdf = 0.0;
  for (int i = 0; i <= 400; ++i) {
    const double x = std::pow(10.0, -2.0 + 4.0 * i / 400);
    const double v = stable_cdf(0.5, x);
    worst_cdf = std::max(worst_cdf, std::abs(v - std::erfc(1.0 / (2.0 * std::sqrt(x)))));
    o.fingerprint += g17(v);
  }
  double worst_z = 0.0;
  for (double lambda : {0.5, 1.0, 2.0}) {
    const auto res = stable_laplace_residual(0.5, lambda, 100000, {10010, 0});
    worst_z = std::max(worst_z, std::abs(res.residual) / res.standard_error);
    o.fingerprint += g17(res.residual);
  }
  const std::vector<double> alphas = {0.375, 0.5, 0.625, 0.75};
  const std::size_t reps = 20;
  std::vector<double> err(alphas.size() * reps);
  parallel_for(err.size(), [&](std::size_t i) {
    const std::size_t a = i / reps, r = i % reps;
    EstimationProblem p;
    p.family = Family::PositiveStable;
    p.data = sample({Family::PositiveStable, {alphas[a], 0.0, 1.0}}, 300, {10011, stream_for(a * reps + r, 0)});
    p.n_reference = 3;
    p.optimizer.restarts = 2;
    err[i] = std::abs(fit(p, {10012, stream_for(a * reps + r, 0)}).theta_hat[0] - alphas[a]);
  });
  bool fits_ok = true;
  std::string medians;
  for (std::size_t a = 0; a < alphas.size(); ++a) {
    const double m = median(std::vector<double>(err.begin() + a * reps, err.begin() + (a + 1) * reps));
    fits_ok = fits_ok && m < 0.15;
    medians += " " + g4(alphas[a]) + ":" + g4(m);
  }
  for (double e : err) o.fingerprint += g17(e);
  o.pass = worst_cdf < 1e-6 && worst_z <= 3.0 && fits_ok;
  o.detail = "cdf max error " + g4(worst_cdf) + "; Laplace max |z| " + g4(worst_z) + "; median |alpha error|" + medians;
  o.fingerprint = sha256_hex(o.fingerprint);
  return o;
}

Outcome c11() {
  const std::size_t reps = 100000, chunks = 100;
  std::vector<int> bad(chunks, 0);
  std::vector<double> minimum(chunks, 1e300);
  parallel_for(chunks, [&](std::size_t c) {
    Rng rng({11011, stream_for(c, 0)});
    for (std::size_t i = 0; i < reps / chunks; ++i) {
      // log-uniform over (1e-3, 1e3), with a few exact ones mixed in
      double a = std::exp(std::log(1e3) * (2 * rng.uniform() - 1));
      double b = std::exp(std::log(1e3) * (2 * rng.uniform() - 1));
      if (i % 1000 == 0) a = 1.0;
      if (i % 1000 == 1) b = 1.0;
      const double g = g_loss(a, b);
      minimum[c] = std::min(minimum[c], g);
      bad[c] += g < 1.0 || (g == 1.0) != (a == 1.0 && b == 1.0);
    }
  });
  int total_bad = 0;
  for (int b : bad) total_bad += b;
  const bool exact = g_loss(1.0, 1.0) == 1.0;
  const double mn = *std::min_element(minimum.begin(), minimum.end());
  return {total_bad == 0 && exact,
          std::to_string(reps) + " pairs, violations " + std::to_string(total_bad) + ", min g " + g17(mn) +
              ", g(1,1) = " + g17(g_loss(1.0, 1.0)),
          std::to_string(total_bad) + g17(mn)};
}

Outcome c12() {
  const std::size_t reps = 50;
  std::vector<int> covered(reps);
  std::vector<double> lo(reps), hi(reps);
  parallel_for(reps, [&](std::size_t r) {
    EstimationProblem p;
    p.family = Family::Exponential;
    p.data = sample({Family::Exponential, {2.0}}, 300, {12012, stream_for(r, 0)});
    const auto cs = confidence_set(p, 200, 0.05, {12013, stream_for(r, 0)});
    lo[r] = cs.lo[0];
    hi[r] = cs.hi[0];
    covered[r] = lo[r] <= 2.0 && 2.0 <= hi[r];
  });
  int cov = 0;
  std::string fp;
  for (std::size_t r = 0; r < reps; ++r) {
    cov += covered[r];
    fp += g17(lo[r]) + g17(hi[r]);
  }
  return {cov >= 42, "true rate covered in " + std::to_string(cov) + "/50", fp};
}

struct Criterion {
  int id;
  std::string name;
  std::function<Outcome()> body;
};

}  // namespace

int main() {
  const auto scratch = std::filesystem::temp_directory_path() / "nse_acceptance";
  std::filesystem::create_directories(scratch);
  const std::vector<Criterion> criteria = {
      {1, "Borel triangle rows", c1},
      {2, "limit law polynomials", c2},
      {3, "P(q<=1) = 1/(n+1) by simulation", c3},
      {4, "exact full-set distribution", c4},
      {5, "left-end limit law", c5},
      {6, "finite left recursion", c6},
      {7, "middle/right degeneracy and rate shift", c7},
      {8, "regression residual normality direction", [&] { return c8(scratch); }},
      {9, "GEV xi = -2", c9},
      {10, "positive stable law", c10},
      {11, "g_loss fuzz", c11},
      {12, "confidence set coverage", c12},
  };
  const std::size_t many = std::max<std::size_t>(4, std::thread::hardware_concurrency());

  bool all = true;
  std::vector<std::string> first(criteria.size());
  set_worker_count(1);
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].body();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what(), "error"};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    first[i] = o.fingerprint;
    all = all && o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << criteria[i].id << " (" << criteria[i].name
              << "): " << o.detail << " [" << g4(secs) << " s]" << std::endl;
  }

  // 13: rerun everything with several workers and compare fingerprints
  const auto t0 = std::chrono::steady_clock::now();
  set_worker_count(many);
  std::vector<int> differ;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    std::string fp;
    try {
      fp = criteria[i].body().fingerprint;
    } catch (const std::exception&) {
      fp = "error";
    }
    if (fp != first[i] || fp == "error") differ.push_back(criteria[i].id);
  }
  set_worker_count(0);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::string list;
  for (int d : differ) list += " " + std::to_string(d);
  const bool det = differ.empty();
  all = all && det;
  std::cout << (det ? "PASS" : "FAIL") << " criterion 13 (determinism across worker counts): 1 vs " << many
            << " workers, " << (det ? "all 12 criteria identical" : "differ in" + list) << " [" << g4(secs) << " s]"
            << std::endl;
  std::filesystem::remove_all(scratch);
  return all ? 0 : 1;
}

#include "nse/gof_tests.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>
#include <string>
#include <tuple>

#include "nse/error.hpp"
#include "nse/parallel.hpp"

namespace nse {

namespace {

double phi(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

std::pair<double, double> mean_sd(std::span<const double> x) {
  const double n = static_cast<double>(x.size());
  double m = 0.0;
  for (double v : x) m += v;
  m /= n;
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return {m, std::sqrt(ss / (n - 1.0))};
}

std::vector<double> standardized_sorted(std::span<const double> x) {
  const auto [m, sd] = mean_sd(x);
  if (!(sd > 0.0)) throw DataError("sample has zero variance", 0);
  std::vector<double> z(x.begin(), x.end());
  for (double& v : z) v = (v - m) / sd;
  std::sort(z.begin(), z.end());
  return z;
}

double nse_standard_loss(std::span<const double> z_sorted, std::span<const double> ref,
                         std::span<const std::size_t> positions) {
  double q1 = 0.0, q2 = 0.0;
  for (std::size_t k : positions) {
    const double sf = std::clamp(0.5 * std::erfc(z_sorted[k] / std::numbers::sqrt2), kCdfClip, 1.0 - kCdfClip);
    const double e = -std::log(sf);
    q1 = std::max(q1, ref[k] / e);
    q2 = std::max(q2, e / ref[k]);
  }
  return g_loss(q1, q2);
}

std::vector<double> sorted_exponentials(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.exponential();
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

std::string_view test_method_name(TestMethod m) {
  switch (m) {
    case TestMethod::JarqueBera:
      return "jarque_bera";
    case TestMethod::Lilliefors:
      return "lilliefors";
    case TestMethod::NseMonteCarlo:
      return "nse";
  }
  return "?";
}

double NullTable::upper_tail(double s) const {
  const auto it = std::lower_bound(stats.begin(), stats.end(), s);
  return static_cast<double>(stats.end() - it) / static_cast<double>(stats.size());
}

double NullTable::lower_tail(double s) const {
  const auto it = std::upper_bound(stats.begin(), stats.end(), s);
  return static_cast<double>(it - stats.begin()) / static_cast<double>(stats.size());
}

double NullTable::quantile(double p) const {
  if (stats.empty()) throw ConfigError("empty null table");
  const double pos = std::clamp(p, 0.0, 1.0) * static_cast<double>(stats.size() - 1);
  const auto i = static_cast<std::size_t>(pos);
  if (i + 1 >= stats.size()) return stats.back();
  return stats[i] + (pos - static_cast<double>(i)) * (stats[i + 1] - stats[i]);
}

void NullTable::save(std::ostream& out) const {
  out << "n,reps,seed,stream\n" << n << ',' << reps << ',' << seed.seed << ',' << seed.stream_id << '\n';
  out.precision(17);
  for (double s : stats) out << s << '\n';
}

NullTable NullTable::load(std::istream& in) {
  std::string line;
  NullTable t;
  if (!std::getline(in, line) || line != "n,reps,seed,stream") throw ConfigError("bad null table header");
  char c1, c2, c3;
  if (!std::getline(in, line)) throw ConfigError("truncated null table");
  std::istringstream hs(line);
  if (!(hs >> t.n >> c1 >> t.reps >> c2 >> t.seed.seed >> c3 >> t.seed.stream_id)) throw ConfigError("bad null table header");
  while (std::getline(in, line))
    if (!line.empty()) t.stats.push_back(std::stod(line));
  if (t.stats.size() != t.reps || !std::is_sorted(t.stats.begin(), t.stats.end()))
    throw ConfigError("null table is truncated or unsorted");
  return t;
}

TestResult jarque_bera(std::span<const double> x) {
  if (x.size() < 8) throw ConfigError("Jarque-Bera needs at least 8 observations");
  const double n = static_cast<double>(x.size());
  double m = 0.0;
  for (double v : x) m += v;
  m /= n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double d = v - m;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  if (!(m2 > 0.0)) throw DataError("sample has zero variance", 0);
  const double s = m3 / std::pow(m2, 1.5);
  const double k = m4 / (m2 * m2);
  const double jb = n / 6.0 * (s * s + (k - 3.0) * (k - 3.0) / 4.0);
  const double p = std::exp(-jb / 2.0);
  return {jb, p, p < 0.05, TestMethod::JarqueBera, std::nullopt};
}

double lilliefors_statistic(std::span<const double> x) {
  const auto z = standardized_sorted(x);
  const double n = static_cast<double>(z.size());
  double d = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double f = phi(z[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

NullTable lilliefors_null_table(std::size_t n, std::size_t reps, RngSeed seed) {
  if (n < 5) throw ConfigError("Lilliefors needs n >= 5");
  if (reps < 2) throw ConfigError("null table needs at least two replicates");
  NullTable t{n, reps, seed, std::vector<double>(reps)};
  parallel_for(reps, [&](std::size_t b) {
    Rng rng(with_stream(seed, seed.stream_id + b));
    std::vector<double> x(n);
    for (double& v : x) v = rng.normal();
    t.stats[b] = lilliefors_statistic(x);
  });
  std::sort(t.stats.begin(), t.stats.end());
  return t;
}

const NullTable& cached_lilliefors_table(std::size_t n, std::size_t reps, RngSeed seed,
                                         const std::filesystem::path& cache_dir) {
  using Key = std::tuple<std::size_t, std::size_t, std::uint64_t, std::uint64_t>;
  static std::mutex mu;
  static std::map<Key, std::unique_ptr<NullTable>> cache;
  const Key key{n, reps, seed.seed, seed.stream_id};
  std::lock_guard lock(mu);
  if (auto it = cache.find(key); it != cache.end()) return *it->second;
  std::unique_ptr<NullTable> t;
  std::filesystem::path file;
  if (!cache_dir.empty()) {
    file = cache_dir / ("lilliefors_n" + std::to_string(n) + "_r" + std::to_string(reps) + "_s" +
                        std::to_string(seed.seed) + "_" + std::to_string(seed.stream_id) + ".csv");
    if (std::ifstream in(file); in) {
      try {
        t = std::make_unique<NullTable>(NullTable::load(in));
      } catch (const ConfigError&) {
        t.reset();
      }
    }
  }
  if (!t) {
    t = std::make_unique<NullTable>(lilliefors_null_table(n, reps, seed));
    if (!file.empty()) {
      std::filesystem::create_directories(cache_dir);
      std::ofstream out(file);
      t->save(out);
    }
  }
  return *cache.emplace(key, std::move(t)).first->second;
}

TestResult lilliefors(std::span<const double> x, const NullTable& table) {
  if (x.size() < 5) throw ConfigError("Lilliefors needs n >= 5");
  if (table.n != x.size()) throw ConfigError("null table was built for n = " + std::to_string(table.n));
  const double d = lilliefors_statistic(x);
  const double p = table.upper_tail(d);
  return {d, p, p < 0.05, TestMethod::Lilliefors, std::nullopt};
}

NullTable nse_null_table(std::size_t n, const NseTestConfig& c) {
  if (n < 30) throw ConfigError("the NSE test needs n >= 30");
  if (c.null_reps < 2) throw ConfigError("null table needs at least two replicates");
  const auto positions = c.lambda.resolve(n);
  NullTable t{n, c.null_reps, c.null_seed, std::vector<double>(c.null_reps)};
  parallel_for(c.null_reps, [&](std::size_t b) {
    Rng rng(with_stream(c.null_seed, c.null_seed.stream_id + b));
    std::vector<double> x(n);
    for (double& v : x) v = rng.normal();
    const auto ref = sorted_exponentials(n, rng);
    t.stats[b] = nse_standard_loss(standardized_sorted(x), ref, positions);
  });
  std::sort(t.stats.begin(), t.stats.end());
  return t;
}

const NullTable& cached_nse_null_table(std::size_t n, const NseTestConfig& c) {
  using Key = std::tuple<std::size_t, std::size_t, std::uint64_t, std::uint64_t, std::string>;
  static std::mutex mu;
  static std::map<Key, std::unique_ptr<NullTable>> cache;
  const Key key{n, c.null_reps, c.null_seed.seed, c.null_seed.stream_id, c.lambda.to_string()};
  std::lock_guard lock(mu);
  if (auto it = cache.find(key); it != cache.end()) return *it->second;
  return *cache.emplace(key, std::make_unique<NullTable>(nse_null_table(n, c))).first->second;
}

TestResult nse_normality_test(std::span<const double> residuals, const NseTestConfig& c, RngSeed seed) {
  const std::size_t n = residuals.size();
  const NullTable& table = cached_nse_null_table(n, c);
  Rng rng(seed);
  const auto ref = sorted_exponentials(n, rng);
  const double loss = nse_standard_loss(standardized_sorted(residuals), ref, c.lambda.resolve(n));
  TestResult r;
  r.method = TestMethod::NseMonteCarlo;
  r.statistic = loss;
  if (c.two_sided) {
    r.interval = std::pair{table.quantile(0.025), table.quantile(0.975)};
    r.p_value = std::min(1.0, 2.0 * std::min(table.upper_tail(loss), table.lower_tail(loss)));
  } else {
    r.interval = std::pair{table.stats.front(), table.quantile(0.95)};
    r.p_value = table.upper_tail(loss);
  }
  r.reject_at_05 = loss < r.interval->first || loss > r.interval->second;
  return r;
}

double ks_statistic(std::span<const double> sample, const DistributionSpec& spec) {
  validate(spec);
  std::vector<double> x(sample.begin(), sample.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(spec, x[i]);
    d = std::max({d, std::abs((static_cast<double>(i) + 1.0) / n - f), std::abs(static_cast<double>(i) / n - f)});
  }
  return d;
}

}  // namespace nse

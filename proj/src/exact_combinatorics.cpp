#include "nse/exact_combinatorics.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <string>

#include "nse/error.hpp"

namespace nse {

namespace {

BigInt factorial(long long n) {
  BigInt r = 1;
  for (long long i = 2; i <= n; ++i) r *= i;
  return r;
}

// Streams the compositions of n (parts >= 1) in lexicographic order.
void for_each_composition(std::size_t n, const std::function<void(const std::vector<std::size_t>&)>& visit) {
  std::vector<std::size_t> parts;
  std::function<void(std::size_t)> rec = [&](std::size_t remaining) {
    if (remaining == 0) {
      visit(parts);
      return;
    }
    for (std::size_t j = 1; j <= remaining; ++j) {
      parts.push_back(j);
      rec(remaining - j);
      parts.pop_back();
    }
  };
  rec(n);
}

template <class Num>
Num bracket_impl(std::span<const Num> c) {
  Num suffix = 0;
  Num denom = 1;
  for (std::size_t i = c.size(); i-- > 0;) {
    suffix += c[i];
    denom *= suffix;
  }
  return Num(1) / denom;
}

// (n!)^2 sum over compositions of (-1)^k / prod j_r! * ([t j_1 + 1, ...] - [1, ...]).
template <class Num>
Num full_mrq_cdf_impl(std::size_t n, const Num& t) {
  std::vector<Num> fact(n + 1);
  fact[0] = 1;
  for (std::size_t i = 1; i <= n; ++i) fact[i] = fact[i - 1] * Num(static_cast<long long>(i));
  Num total = 0;
  std::vector<Num> c(n);
  for_each_composition(n, [&](const std::vector<std::size_t>& parts) {
    std::fill(c.begin(), c.end(), Num(1));
    Num weight = 1;
    std::size_t pos = 0;
    for (std::size_t j : parts) {
      c[pos] = t * Num(static_cast<long long>(j)) + Num(1);
      weight *= fact[j];
      pos += j;
    }
    const Num first = bracket_impl<Num>(c);
    c[0] = 1;
    const Num second = bracket_impl<Num>(c);
    const Num term = (first - second) / weight;
    if (parts.size() % 2 == 1)
      total -= term;
    else
      total += term;
  });
  return fact[n] * fact[n] * total;
}

void check_exact_range(std::size_t n) {
  if (n < 1 || n > kExactFullMaxN)
    throw RangeError("exact full-MRQ CDF supports 1 <= n <= " + std::to_string(kExactFullMaxN) + ", got " +
                     std::to_string(n));
}

}  // namespace

BigInt binomial(long long n, long long k) {
  if (n < 0 || k < 0 || k > n) return 0;
  if (k > n - k) k = n - k;
  BigInt r = 1;
  for (long long i = 1; i <= k; ++i) {
    r *= n - k + i;
    r /= i;
  }
  return r;
}

BigInt catalan(long long n, long long k) {
  if (n < 0 || k < 0 || k > n) throw DomainError("catalan(n,k) requires 0 <= k <= n");
  const BigInt num = factorial(n + k) * (n - k + 1);
  const BigInt den = factorial(k) * factorial(n + 1);
  if (num % den != 0) throw std::logic_error("Catalan triangle entry not integral");
  return num / den;
}

BigInt catalan_trapezoid(long long m, long long n, long long x) {
  if (m < 1 || n < 0 || x < 0) throw DomainError("catalan_trapezoid requires m >= 1, n >= 0, x >= 0");
  if (x < m) return binomial(n + x, x);
  if (x <= n + m - 1) return binomial(n + x, x) - binomial(n + x, x - m);
  return 0;
}

BigInt borel(long long m, long long j) {
  if (m < 0 || j < 0 || j > m) throw DomainError("borel(m,j) requires 0 <= j <= m");
  const BigInt num = binomial(2 * m + 2, m - j) * binomial(m + j, m);
  if (num % (m + 1) != 0) throw std::logic_error("Borel triangle entry not integral");
  return num / (m + 1);
}

TriangleCache::TriangleCache(std::size_t rows) : catalan_(rows), borel_(rows) {
  for (std::size_t n = 0; n < rows; ++n) {
    for (std::size_t k = 0; k <= n; ++k) {
      catalan_[n].push_back(nse::catalan(static_cast<long long>(n), static_cast<long long>(k)));
      borel_[n].push_back(nse::borel(static_cast<long long>(n), static_cast<long long>(k)));
    }
  }
}

namespace {
const TriangleCache& shared_triangles() {
  static const TriangleCache cache(32);
  return cache;
}
}  // namespace

double limit_left_cdf(std::size_t ell, double t) {
  if (ell < 1) throw DomainError("limit_left_cdf requires ell >= 1");
  if (!(t > 0.0)) throw DomainError("limit_left_cdf requires t > 0");
  if (std::isinf(t)) return 1.0;
  if (ell > shared_triangles().rows()) throw RangeError("limit_left_cdf supports ell <= 32");
  const long double k = 1.0L + 1.0L / static_cast<long double>(t);
  const auto row = shared_triangles().borel_row(ell - 1);
  // Horner in k over coefficients (-1)^j B(ell-1, j), highest power first.
  long double poly = 0.0L;
  for (std::size_t j = 0; j < row.size(); ++j) {
    const long double b = row[j].convert_to<long double>();
    poly = poly * k + ((j % 2 == 0) ? b : -b);
  }
  return static_cast<double>(poly / std::pow(k, static_cast<long double>(2 * ell - 1)));
}

Rational limit_left_cdf_exact(std::size_t ell, const Rational& t) {
  if (ell < 1) throw DomainError("limit_left_cdf requires ell >= 1");
  if (t <= 0) throw DomainError("limit_left_cdf requires t > 0");
  const Rational k = Rational(1) + Rational(1) / t;
  Rational poly = 0;
  for (std::size_t j = 0; j < ell; ++j) {
    const BigInt b = borel(static_cast<long long>(ell - 1), static_cast<long long>(j));
    poly = poly * k + ((j % 2 == 0) ? Rational(b) : Rational(-b));
  }
  Rational denom = 1;
  for (std::size_t i = 0; i < 2 * ell - 1; ++i) denom *= k;
  return poly / denom;
}

FiniteLeftCdf finite_left_cdf(std::size_t n, std::size_t m, double t) {
  if (m < 1 || m > n || n > kFiniteLeftMaxN || m > kFiniteLeftMaxM)
    throw RangeError("finite_left_cdf validated for 1 <= m <= n <= " + std::to_string(kFiniteLeftMaxN) +
                     ", m <= " + std::to_string(kFiniteLeftMaxM));
  if (!(t > 0.0)) throw DomainError("finite_left_cdf requires t > 0");
  if (m == n) {
    const double v = exact_full_mrq_cdf(n, t);
    return {v, v < -1e-9 || v > 1.0 + 1e-9};
  }
  const long double k = 1.0L + 1.0L / static_cast<long double>(t);
  std::map<std::pair<std::size_t, std::size_t>, long double> memo;
  // prod_{i=0}^{j-1} (nn - i) / (nn k - i)
  auto falling_ratio = [&](std::size_t nn, std::size_t j) {
    long double p = 1.0L;
    for (std::size_t i = 0; i < j; ++i) {
      const auto ni = static_cast<long double>(nn) - static_cast<long double>(i);
      p *= ni / (static_cast<long double>(nn) * k - static_cast<long double>(i));
    }
    return p;
  };
  std::function<long double(std::size_t, std::size_t)> rec = [&](std::size_t nn, std::size_t mm) -> long double {
    if (mm == 1) return 1.0L / k;
    const auto key = std::make_pair(nn, mm);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    long double sum = 0.0L;
    for (std::size_t j = 1; j + 1 <= mm; ++j) {
      const long double term = binomial(static_cast<long long>(nn), static_cast<long long>(j)).convert_to<long double>() *
                               rec(nn - j, mm - j) * falling_ratio(nn, j);
      sum += (j % 2 == 1) ? term : -term;
    }
    const long double last =
        binomial(static_cast<long long>(nn - 1), static_cast<long long>(mm - 1)).convert_to<long double>() *
        falling_ratio(nn, mm);
    sum += (mm % 2 == 1) ? last : -last;
    memo[key] = sum;
    return sum;
  };
  const double v = static_cast<double>(rec(n, m));
  return {v, v < -1e-9 || v > 1.0 + 1e-9};
}

double bracket_integral(std::span<const double> c) {
  for (std::size_t i = 0; i < c.size(); ++i)
    if (!(c[i] > 0.0)) throw DomainError("bracket integral entries must be positive");
  if (c.empty()) throw DomainError("bracket integral needs at least one entry");
  return bracket_impl<double>(c);
}

Rational bracket_integral(std::span<const Rational> c) {
  for (const auto& v : c)
    if (v <= 0) throw DomainError("bracket integral entries must be positive");
  if (c.empty()) throw DomainError("bracket integral needs at least one entry");
  return bracket_impl<Rational>(c);
}

double exact_full_mrq_cdf(std::size_t n, double t) {
  check_exact_range(n);
  if (!(t > 0.0)) throw DomainError("exact_full_mrq_cdf requires t > 0");
  return static_cast<double>(full_mrq_cdf_impl<long double>(n, static_cast<long double>(t)));
}

Rational exact_full_mrq_cdf(std::size_t n, const Rational& t) {
  check_exact_range(n);
  if (t <= 0) throw DomainError("exact_full_mrq_cdf requires t > 0");
  return full_mrq_cdf_impl<Rational>(n, t);
}

}  // namespace nse

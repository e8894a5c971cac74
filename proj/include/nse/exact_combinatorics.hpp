#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace nse {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

/// binom(n, k); zero when k < 0 or k > n.
BigInt binomial(long long n, long long k);

/// Catalan's triangle C(n, k) = (n+k)! (n-k+1) / (k! (n+1)!), 0 <= k <= n.
BigInt catalan(long long n, long long k);

/// Catalan trapezoid C_m(n, x):
///   binom(n+x, x)                       for x < m
///   binom(n+x, x) - binom(n+x, x-m)     for m <= x <= n+m-1
///   0                                   for x > n+m-1
BigInt catalan_trapezoid(long long m, long long n, long long x);

/// Borel's triangle B(m, j) = binom(2m+2, m-j) binom(m+j, m) / (m+1).
BigInt borel(long long m, long long j);

/// Exact triangle rows, built once and read-only afterwards.
class TriangleCache {
 public:
  explicit TriangleCache(std::size_t rows);

  std::size_t rows() const noexcept { return catalan_.size(); }
  const BigInt& catalan(std::size_t n, std::size_t k) const { return catalan_.at(n).at(k); }
  const BigInt& borel(std::size_t m, std::size_t j) const { return borel_.at(m).at(j); }
  std::span<const BigInt> borel_row(std::size_t m) const { return borel_.at(m); }

 private:
  std::vector<std::vector<BigInt>> catalan_;
  std::vector<std::vector<BigInt>> borel_;
};

/// Limit law of the left-end quotient max_{i <= ell} X_(i)/Y_(i) for two
/// independent unit-exponential samples:
///   R_ell(t) = sum_j (-1)^j B(ell-1, j) k^(ell-1-j) / k^(2 ell - 1),  k = 1 + 1/t.
double limit_left_cdf(std::size_t ell, double t);
/// Same closed form in exact rational arithmetic.
Rational limit_left_cdf_exact(std::size_t ell, const Rational& t);

/// Validated range of the finite-n recursion.
inline constexpr std::size_t kFiniteLeftMaxN = 60;
inline constexpr std::size_t kFiniteLeftMaxM = 8;

struct FiniteLeftCdf {
  double value = 0.0;
  /// Raised when the alternating recursion drifted outside [0,1] by more than
  /// 1e-9; the value is reported unclamped.
  bool out_of_bounds = false;
};

/// P(max_{i <= m} X_(i)/Y_(i) <= t) for samples of size n, via the alternating
/// recursion with base case 1/k. m == n falls back to the composition sum.
FiniteLeftCdf finite_left_cdf(std::size_t n, std::size_t m, double t);

/// [c_1, ..., c_n] = 1 / (c_n (c_n + c_{n-1}) ... (c_n + ... + c_1)).
double bracket_integral(std::span<const double> c);
Rational bracket_integral(std::span<const Rational> c);

inline constexpr std::size_t kExactFullMaxN = 9;

/// P(max_i X_(i)/Y_(i) <= t) over all n ranks, by summing bracket integrals
/// over the 2^(n-1) compositions of n. Evaluated in extended precision.
double exact_full_mrq_cdf(std::size_t n, double t);
/// Exact rational evaluation for rational t.
Rational exact_full_mrq_cdf(std::size_t n, const Rational& t);

}  // namespace nse

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "nse/distributions.hpp"

namespace nse {

/// Ascending, strictly positive order statistics. Construction validates; the
/// raw constructor is for values already known to be sorted and positive.
class OrderedSample {
 public:
  /// Smallest admissible entry; anything below is rejected so quotients stay finite.
  static constexpr double kMinValue = 1e-300;

  OrderedSample() = default;
  /// Sorts (stably) and validates. Throws DataError with the offending index.
  static OrderedSample from_sample(std::span<const double> values);
  /// Validates that the input is already sorted and positive.
  static OrderedSample from_sorted(std::vector<double> values);

  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  std::span<const double> values() const noexcept { return values_; }

  /// Every entry multiplied by c > 0.
  OrderedSample scaled(double c) const;

 private:
  explicit OrderedSample(std::vector<double> v) : values_(std::move(v)) {}
  std::vector<double> values_;
};

/// Sorted copy of a sample; entries must be finite and > 0.
OrderedSample order_stats(std::span<const double> sample);

/// Which ranks enter the quotient maxima. Ranks are 1-based as in the usual
/// order-statistic notation; `resolve` converts to 0-based positions.
struct IndexSet {
  struct Full {};
  struct Left {
    std::size_t ell;
  };
  struct Right {
    std::size_t k;
  };
  /// {i : alpha n < i < beta n}, strict on both sides.
  struct Middle {
    double alpha;
    double beta;
  };
  struct Explicit {
    std::vector<std::size_t> ranks;  // 1-based
  };

  std::variant<Full, Left, Right, Middle, Explicit> kind = Full{};

  static IndexSet full() { return {Full{}}; }
  static IndexSet left(std::size_t ell) { return {Left{ell}}; }
  static IndexSet right(std::size_t k) { return {Right{k}}; }
  static IndexSet middle(double alpha, double beta) { return {Middle{alpha, beta}}; }
  static IndexSet ranks(std::vector<std::size_t> r) { return {Explicit{std::move(r)}}; }

  /// 0-based positions for a sample of size n; throws on an invalid or empty set.
  std::vector<std::size_t> resolve(std::size_t n) const;

  /// Parses `full`, `left:5`, `right:5`, `mid:0.1:0.9`, `ranks:1,2,7`.
  static IndexSet parse(std::string_view text);
  std::string to_string() const;
};

struct QuotientPair {
  double q1 = 1.0;  ///< max x_(i) / y_(i)
  double q2 = 1.0;  ///< max y_(i) / x_(i)
};

QuotientPair mrq(const OrderedSample& x, const OrderedSample& y, const IndexSet& lambda);

/// Same maxima over pre-resolved 0-based positions; no validation beyond sizes.
QuotientPair mrq(std::span<const double> x, std::span<const double> y, std::span<const std::size_t> positions);

/// Quotients after clamping both samples into [u, v] (0 < u < v), over all ranks.
QuotientPair thresholded_mrq(const OrderedSample& x, const OrderedSample& y, double u, double v);

/// g(a, b) = max{a, b, 1/a, 1/b}.
double g_loss(double a, double b);

/// q1 - 1, i.e. the largest relative error (x_(i) - y_(i)) / y_(i) over the set.
double max_relative_error(const OrderedSample& x, const OrderedSample& y, const IndexSet& lambda);

}  // namespace nse

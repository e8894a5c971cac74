#include "nse/ranked_quotients.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nse/error.hpp"

namespace nse {

namespace {

void check_entries(std::span<const double> v) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) throw DataError("non-finite entry at index " + std::to_string(i), i);
    if (!(v[i] >= OrderedSample::kMinValue))
      throw DataError("entry at index " + std::to_string(i) + " is not strictly positive", i);
  }
}

std::size_t parse_count(const std::string& s) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::logic_error&) {
    throw ConfigError("bad count '" + s + "' in index set");
  }
  if (used != s.size() || v < 1) throw ConfigError("bad count '" + s + "' in index set");
  return static_cast<std::size_t>(v);
}

double parse_fraction(const std::string& s) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::logic_error&) {
    throw ConfigError("bad fraction '" + s + "' in index set");
  }
  if (used != s.size()) throw ConfigError("bad fraction '" + s + "' in index set");
  return v;
}

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

OrderedSample OrderedSample::from_sample(std::span<const double> values) {
  check_entries(values);
  std::vector<double> v(values.begin(), values.end());
  std::stable_sort(v.begin(), v.end());
  return OrderedSample(std::move(v));
}

OrderedSample OrderedSample::from_sorted(std::vector<double> values) {
  check_entries(values);
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] < values[i - 1]) throw DataError("entries not sorted at index " + std::to_string(i), i);
  return OrderedSample(std::move(values));
}

OrderedSample OrderedSample::scaled(double c) const {
  if (!(c > 0.0) || !std::isfinite(c)) throw DomainError("scale factor must be positive");
  std::vector<double> v(values_);
  for (auto& e : v) e *= c;
  return from_sorted(std::move(v));
}

OrderedSample order_stats(std::span<const double> sample) { return OrderedSample::from_sample(sample); }

std::vector<std::size_t> IndexSet::resolve(std::size_t n) const {
  std::vector<std::size_t> out;
  std::visit(
      [&](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, Full>) {
          out.resize(n);
          for (std::size_t i = 0; i < n; ++i) out[i] = i;
        } else if constexpr (std::is_same_v<T, Left>) {
          if (k.ell < 1 || k.ell > n) throw EmptyIndexSetError("left:" + std::to_string(k.ell) + " invalid for n=" + std::to_string(n));
          for (std::size_t i = 0; i < k.ell; ++i) out.push_back(i);
        } else if constexpr (std::is_same_v<T, Right>) {
          if (k.k < 1 || k.k > n) throw EmptyIndexSetError("right:" + std::to_string(k.k) + " invalid for n=" + std::to_string(n));
          for (std::size_t i = n - k.k; i < n; ++i) out.push_back(i);
        } else if constexpr (std::is_same_v<T, Middle>) {
          if (!(k.alpha > 0.0 && k.alpha < k.beta && k.beta < 1.0))
            throw ConfigError("middle index set requires 0 < alpha < beta < 1");
          const double lo = k.alpha * static_cast<double>(n);
          const double hi = k.beta * static_cast<double>(n);
          for (std::size_t r = 1; r <= n; ++r) {
            const double rr = static_cast<double>(r);
            if (lo < rr && rr < hi) out.push_back(r - 1);
          }
        } else {
          for (std::size_t r : k.ranks) {
            if (r < 1 || r > n) throw EmptyIndexSetError("rank " + std::to_string(r) + " outside 1.." + std::to_string(n));
            out.push_back(r - 1);
          }
          std::sort(out.begin(), out.end());
          out.erase(std::unique(out.begin(), out.end()), out.end());
        }
      },
      kind);
  if (out.empty()) throw EmptyIndexSetError("index set " + to_string() + " is empty for n=" + std::to_string(n));
  return out;
}

IndexSet IndexSet::parse(std::string_view text) {
  const auto parts = split(text, ':');
  const std::string& head = parts[0];
  if (head == "full" && parts.size() == 1) return full();
  if (head == "left" && parts.size() == 2) return left(parse_count(parts[1]));
  if (head == "right" && parts.size() == 2) return right(parse_count(parts[1]));
  if ((head == "mid" || head == "middle") && parts.size() == 3) {
    const double a = parse_fraction(parts[1]);
    const double b = parse_fraction(parts[2]);
    if (!(a > 0.0 && a < b && b < 1.0)) throw ConfigError("mid:a:b requires 0 < a < b < 1");
    return middle(a, b);
  }
  if (head == "ranks" && parts.size() == 2) {
    std::vector<std::size_t> r;
    for (const auto& s : split(parts[1], ',')) r.push_back(parse_count(s));
    return ranks(std::move(r));
  }
  throw ConfigError("cannot parse index set '" + std::string(text) + "'");
}

std::string IndexSet::to_string() const {
  std::ostringstream os;
  std::visit(
      [&](const auto& k) {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, Full>) {
          os << "full";
        } else if constexpr (std::is_same_v<T, Left>) {
          os << "left:" << k.ell;
        } else if constexpr (std::is_same_v<T, Right>) {
          os << "right:" << k.k;
        } else if constexpr (std::is_same_v<T, Middle>) {
          os << "mid:" << k.alpha << ':' << k.beta;
        } else {
          os << "ranks:";
          for (std::size_t i = 0; i < k.ranks.size(); ++i) os << (i ? "," : "") << k.ranks[i];
        }
      },
      kind);
  return os.str();
}

QuotientPair mrq(std::span<const double> x, std::span<const double> y, std::span<const std::size_t> positions) {
  QuotientPair q{0.0, 0.0};
  for (std::size_t i : positions) {
    q.q1 = std::max(q.q1, x[i] / y[i]);
    q.q2 = std::max(q.q2, y[i] / x[i]);
  }
  return q;
}

QuotientPair mrq(const OrderedSample& x, const OrderedSample& y, const IndexSet& lambda) {
  if (x.size() != y.size())
    throw ConfigError("ranked quotients need equal sample sizes (" + std::to_string(x.size()) + " vs " +
                      std::to_string(y.size()) + ")");
  const auto pos = lambda.resolve(x.size());
  return mrq(x.values(), y.values(), pos);
}

QuotientPair thresholded_mrq(const OrderedSample& x, const OrderedSample& y, double u, double v) {
  if (!(u > 0.0 && u < v)) throw DomainError("thresholds require 0 < u < v");
  if (x.size() != y.size()) throw ConfigError("ranked quotients need equal sample sizes");
  if (x.empty()) throw EmptyIndexSetError("empty samples");
  auto clamp = [&](double z) { return std::max(std::min(v, z), u); };
  QuotientPair q{0.0, 0.0};
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = clamp(x[i]);
    const double b = clamp(y[i]);
    q.q1 = std::max(q.q1, a / b);
    q.q2 = std::max(q.q2, b / a);
  }
  return q;
}

double g_loss(double a, double b) {
  if (!(a > 0.0 && b > 0.0)) throw DomainError("g requires positive arguments");
  return std::max({a, b, 1.0 / a, 1.0 / b});
}

double max_relative_error(const OrderedSample& x, const OrderedSample& y, const IndexSet& lambda) {
  return mrq(x, y, lambda).q1 - 1.0;
}

}  // namespace nse

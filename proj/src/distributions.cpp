#include "nse/distributions.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/tools/roots.hpp>

#include "nse/error.hpp"

namespace nse {

namespace {

using std::numbers::pi;

struct FamilyInfo {
  Family family;
  std::string_view name;
  std::vector<std::string> params;
};

const std::array<FamilyInfo, 8>& family_table() {
  static const std::array<FamilyInfo, 8> table{{
      {Family::UnitExponential, "unit_exponential", {}},
      {Family::Exponential, "exponential", {"rate"}},
      {Family::UnitFrechet, "unit_frechet", {}},
      {Family::Normal, "normal", {"mean", "sd"}},
      {Family::StudentT, "student_t", {"df", "location", "scale"}},
      {Family::GEV, "gev", {"mu", "sigma", "xi"}},
      {Family::GPD, "gpd", {"sigma", "xi"}},
      {Family::PositiveStable, "stable", {"alpha", "location", "scale"}},
  }};
  return table;
}

const FamilyInfo& info(Family f) {
  for (const auto& e : family_table())
    if (e.family == f) return e;
  throw DomainError("unknown distribution family");
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }
double normal_sf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

// log A(theta) for the Zolotarev / Kanter function
// A(theta) = [sin(a th)^a sin((1-a) th)^(1-a) / sin(th)]^(1/(1-a)).
// `comp` is pi - theta, passed separately so the sines stay accurate near pi.
double log_kanter(double alpha, double theta, double comp) {
  double s_a, s_b, s_t;
  if (theta <= pi / 2) {
    s_a = std::sin(alpha * theta);
    s_b = std::sin((1.0 - alpha) * theta);
    s_t = std::sin(theta);
  } else {
    s_a = std::sin(alpha * pi - alpha * comp);
    s_b = std::sin(alpha * pi + (1.0 - alpha) * comp);
    s_t = std::sin(comp);
  }
  return (alpha * std::log(s_a) + (1.0 - alpha) * std::log(s_b) - std::log(s_t)) / (1.0 - alpha);
}

double log_kanter(double alpha, double theta) { return log_kanter(alpha, theta, pi - theta); }

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("stable alpha must lie in (0,1)");
}

// Standardised argument and a flag for points left of the support boundary.
struct Standardised {
  double z;
  bool below;  // at or below the lower support boundary
  bool above;  // at or above the upper support boundary
};

Standardised standardise_gev(const std::vector<double>& p, double x) {
  const double z = (x - p[0]) / p[1];
  const double xi = p[2];
  if (std::abs(xi) < kShapeZeroTolerance) return {z, false, false};
  const double w = 1.0 + xi * z;
  if (w > 0.0) return {z, false, false};
  return {z, xi > 0.0, xi < 0.0};
}

}  // namespace

std::string_view family_name(Family f) { return info(f).name; }

Family family_from_name(std::string_view name) {
  const std::string n = trim(name);
  for (const auto& e : family_table())
    if (e.name == n) return e.family;
  if (n == "positive_stable") return Family::PositiveStable;
  if (n == "t") return Family::StudentT;
  throw DomainError("unknown distribution family '" + n + "'");
}

std::size_t parameter_count(Family f) { return info(f).params.size(); }

const std::vector<std::string>& parameter_names(Family f) { return info(f).params; }

bool is_valid(const DistributionSpec& s) noexcept {
  const auto& p = s.params;
  if (p.size() != parameter_count(s.family)) return false;
  for (double v : p)
    if (!std::isfinite(v)) return false;
  switch (s.family) {
    case Family::UnitExponential:
    case Family::UnitFrechet:
      return true;
    case Family::Exponential:
      return p[0] > 0.0;
    case Family::Normal:
      return p[1] > 0.0;
    case Family::StudentT:
      return p[0] > 0.0 && p[2] > 0.0;
    case Family::GEV:
      return p[1] > 0.0;
    case Family::GPD:
      return p[0] > 0.0;
    case Family::PositiveStable:
      return p[0] > 0.0 && p[0] < 1.0 && p[2] > 0.0;
  }
  return false;
}

void validate(const DistributionSpec& s) {
  if (s.params.size() != parameter_count(s.family)) {
    std::ostringstream os;
    os << family_name(s.family) << " expects " << parameter_count(s.family) << " parameters, got "
       << s.params.size();
    throw DomainError(os.str());
  }
  if (!is_valid(s)) throw DomainError("parameters outside the domain of " + format_spec(s));
}

DistributionSpec parse_spec(std::string_view text) {
  const std::string t = trim(text);
  const auto open = t.find('(');
  DistributionSpec spec;
  if (open == std::string::npos) {
    spec.family = family_from_name(t);
    return spec;
  }
  if (t.back() != ')') throw DomainError("malformed distribution spec '" + t + "'");
  spec.family = family_from_name(t.substr(0, open));
  const auto& names = parameter_names(spec.family);
  const std::string body = t.substr(open + 1, t.size() - open - 2);
  if (trim(body).empty()) return spec;

  std::vector<double> values(names.size(), std::nan(""));
  std::stringstream ss(body);
  std::string item;
  std::size_t positional = 0;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    std::size_t slot;
    std::string value;
    if (eq == std::string::npos) {
      slot = positional++;
      value = trim(item);
    } else {
      const std::string key = trim(item.substr(0, eq));
      const auto it = std::find(names.begin(), names.end(), key);
      if (it == names.end())
        throw DomainError("unknown parameter '" + key + "' for " + std::string(family_name(spec.family)));
      slot = static_cast<std::size_t>(it - names.begin());
      value = trim(item.substr(eq + 1));
    }
    if (slot >= names.size()) throw DomainError("too many parameters in '" + t + "'");
    try {
      std::size_t used = 0;
      values[slot] = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::logic_error&) {
      throw DomainError("bad numeric value '" + value + "' in '" + t + "'");
    }
  }
  for (std::size_t i = 0; i < values.size(); ++i)
    if (std::isnan(values[i]))
      throw DomainError("missing parameter '" + names[i] + "' in '" + t + "'");
  spec.params = std::move(values);
  return spec;
}

std::string format_spec(const DistributionSpec& s) {
  std::ostringstream os;
  os.precision(17);
  os << family_name(s.family) << '(';
  const auto& names = parameter_names(s.family);
  for (std::size_t i = 0; i < s.params.size(); ++i) {
    if (i) os << ',';
    os << (i < names.size() ? names[i] : "p" + std::to_string(i)) << '=' << s.params[i];
  }
  os << ')';
  return os.str();
}

// ---------------------------------------------------------------------------

double stable_cdf_adaptive(double alpha, double z) {
  check_alpha(alpha);
  if (!(z > 0.0)) return 0.0;
  if (std::isinf(z)) return 1.0;
  const double c = std::pow(z, -alpha / (1.0 - alpha));
  // A(theta) is increasing on (0, pi); once c*A(0+) is large the integrand is
  // negligible everywhere.
  const double log_a0 = std::log(alpha) * alpha / (1.0 - alpha) + std::log1p(-alpha);
  if (std::log(c) + log_a0 > std::log(745.0)) return 0.0;
  auto integrand = [&](double theta) {
    if (theta <= 0.0) return std::exp(-c * std::exp(log_a0));
    if (theta >= pi) return 0.0;
    return std::exp(-c * std::exp(log_kanter(alpha, theta)));
  };
  double err = 0.0;
  const double v =
      boost::math::quadrature::gauss_kronrod<double, 21>::integrate(integrand, 0.0, pi, 15, 1e-12, &err);
  if (!(err <= 1e-8 * pi)) throw NumericError("stable CDF quadrature did not converge", err / pi);
  return std::clamp(v / pi, 0.0, 1.0);
}

StableCdf::StableCdf(double alpha) : alpha_(alpha) {
  check_alpha(alpha);
  // Tanh-sinh rule on (0, pi): theta = pi / (1 + exp(-2u)), u = (pi/2) sinh(t).
  constexpr double h = 1.0 / 32.0;
  constexpr int half = 136;
  for (int k = -half; k <= half; ++k) {
    const double t = k * h;
    const double u = pi / 2 * std::sinh(t);
    const double theta = pi / (1.0 + std::exp(-2.0 * u));
    const double comp = pi / (1.0 + std::exp(2.0 * u));
    const double sech = 1.0 / std::cosh(u);
    const double w = h * (pi / 2) * sech * sech * (pi / 2) * std::cosh(t) / pi;
    if (!(w > 1e-300) || theta <= 0.0 || comp <= 0.0) continue;
    const double la = log_kanter(alpha, theta, comp);
    if (!std::isfinite(la)) continue;
    weights_.push_back(w);
    kanter_.push_back(std::exp(la));
  }
  // 1 - F(z) = sum_k (-1)^{k+1} z^{-alpha k} / (k! Gamma(1 - alpha k)), with the
  // reciprocal gamma rewritten through reflection.
  for (int k = 1; k <= kSeriesTerms; ++k) {
    const double a = alpha * k;
    const double mag = std::exp(std::lgamma(a) - std::lgamma(k + 1.0)) * std::sin(pi * a) / pi;
    series_.push_back(k % 2 == 1 ? mag : -mag);
  }
  series_bound_.assign(series_.size() + 1, 0.0);
  for (std::size_t k = series_.size(); k-- > 0;) series_bound_[k] = std::max(series_bound_[k + 1], std::abs(series_[k]));
  // A(theta) increases on (0, pi), so nodes with c A beyond the underflow
  // cut-off form a suffix whose weights can be summed once.
  monotone_ = std::is_sorted(kanter_.begin(), kanter_.end());
  weight_suffix_.assign(weights_.size() + 1, 0.0);
  for (std::size_t k = weights_.size(); k-- > 0;) weight_suffix_[k] = weight_suffix_[k + 1] + weights_[k];
}

double StableCdf::tail_series(double x) const {
  double sum = 0.0;
  double xk = x;
  for (std::size_t k = 0; k < series_.size(); ++k, xk *= x) {
    if (series_bound_[k] * xk < 1e-18 * std::abs(sum)) break;
    sum += series_[k] * xk;
  }
  return sum;
}

std::size_t StableCdf::cutoff(double c) const {
  if (!monotone_) return kanter_.size();
  constexpr double kNegligible = 40.0;
  return static_cast<std::size_t>(std::upper_bound(kanter_.begin(), kanter_.end(), kNegligible / c) - kanter_.begin());
}

double StableCdf::cdf(double z) const {
  if (!(z > 0.0)) return 0.0;
  if (std::isinf(z)) return 1.0;
  if (z >= 1.0) return std::clamp(1.0 - tail_series(std::pow(z, -alpha_)), 0.0, 1.0);
  const double c = std::pow(z, -alpha_ / (1.0 - alpha_));
  const std::size_t end = cutoff(c);
  double sum = 0.0;
  for (std::size_t k = 0; k < end; ++k) sum += weights_[k] * std::exp(-c * kanter_[k]);
  return std::clamp(sum, 0.0, 1.0);
}

double StableCdf::survival(double z) const {
  if (!(z > 0.0)) return 1.0;
  if (std::isinf(z)) return 0.0;
  if (z >= 1.0) return std::clamp(tail_series(std::pow(z, -alpha_)), 0.0, 1.0);
  const double c = std::pow(z, -alpha_ / (1.0 - alpha_));
  const std::size_t end = cutoff(c);
  double sum = weight_suffix_[end];
  for (std::size_t k = 0; k < end; ++k) sum -= weights_[k] * std::expm1(-c * kanter_[k]);
  return std::clamp(sum, 0.0, 1.0);
}

namespace {

// Most callers evaluate many points at one alpha; keep the last table per thread.
const StableCdf& cached_stable(double alpha) {
  thread_local std::optional<StableCdf> table;
  if (!table || table->alpha() != alpha) table.emplace(alpha);
  return *table;
}

}  // namespace

double stable_cdf(double alpha, double z) { return cached_stable(alpha).cdf(z); }

double stable_survival(double alpha, double z) { return cached_stable(alpha).survival(z); }

double stable_cdf_inversion(double alpha, double z) {
  check_alpha(alpha);
  if (!(z > 0.0)) return 0.0;
  // With u = v^(1/alpha) the Gil-Pelaez integrand becomes
  // exp(-c v) sin(s v - z v^(1/alpha)) / (alpha v),  c = cos(pi a/2), s = sin(pi a/2).
  const double c = std::cos(pi * alpha / 2.0);
  const double s = std::sin(pi * alpha / 2.0);
  const double upper = 45.0 / c;
  const double max_rate = s + z / alpha * std::pow(upper, 1.0 / alpha - 1.0);
  const double h = std::min(upper, pi / max_rate);
  const auto pieces = static_cast<std::size_t>(std::ceil(upper / h));
  auto integrand = [&](double v) {
    if (v <= 0.0) return (s - (alpha == 1.0 ? z : 0.0)) / alpha;
    return std::exp(-c * v) * std::sin(s * v - z * std::pow(v, 1.0 / alpha)) / (alpha * v);
  };
  double total = 0.0;
  double total_err = 0.0;
  for (std::size_t i = 0; i < pieces; ++i) {
    const double a = upper * static_cast<double>(i) / static_cast<double>(pieces);
    const double b = upper * static_cast<double>(i + 1) / static_cast<double>(pieces);
    double err = 0.0;
    total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, a, b, 5, 1e-13, &err);
    total_err += err;
  }
  if (!(total_err <= 1e-7)) throw NumericError("characteristic-function inversion did not converge", total_err);
  return std::clamp(0.5 - total / pi, 0.0, 1.0);
}

double stable_draw(double alpha, Rng& rng) {
  const double theta = pi * rng.uniform();
  const double e = rng.exponential();
  return std::exp((log_kanter(alpha, theta) - std::log(e)) * (1.0 - alpha) / alpha);
}

LaplaceResidual stable_laplace_residual(double alpha, double lambda, std::size_t n, RngSeed seed) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("stable alpha must lie in (0,1)");
  if (!(lambda > 0.0)) throw DomainError("Laplace argument must be positive");
  if (n < 2) throw DomainError("need at least two draws");
  Rng rng(seed);
  double mean = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = std::exp(-lambda * stable_draw(alpha, rng));
    const double d = v - mean;
    mean += d / static_cast<double>(i + 1);
    m2 += d * (v - mean);
  }
  const double sd = std::sqrt(m2 / static_cast<double>(n - 1));
  return {mean - std::exp(-std::pow(lambda, alpha)), sd / std::sqrt(static_cast<double>(n))};
}

// ---------------------------------------------------------------------------

double cdf(const DistributionSpec& s, double x) {
  validate(s);
  if (std::isnan(x)) throw DomainError("cdf argument is NaN");
  const auto& p = s.params;
  switch (s.family) {
    case Family::UnitExponential:
      return x <= 0.0 ? 0.0 : -std::expm1(-x);
    case Family::Exponential:
      return x <= 0.0 ? 0.0 : -std::expm1(-p[0] * x);
    case Family::UnitFrechet:
      return x <= 0.0 ? 0.0 : std::exp(-1.0 / x);
    case Family::Normal:
      return normal_cdf((x - p[0]) / p[1]);
    case Family::StudentT:
      return boost::math::cdf(boost::math::students_t_distribution<double>(p[0]), (x - p[1]) / p[2]);
    case Family::GEV: {
      const auto st = standardise_gev(p, x);
      if (st.below) return 0.0;
      if (st.above) return 1.0;
      if (std::abs(p[2]) < kShapeZeroTolerance) return std::exp(-std::exp(-st.z));
      return std::exp(-std::exp(-std::log1p(p[2] * st.z) / p[2]));
    }
    case Family::GPD: {
      if (x <= 0.0) return 0.0;
      if (std::abs(p[1]) < kShapeZeroTolerance) return -std::expm1(-x / p[0]);
      const double w = p[1] * x / p[0];
      if (w <= -1.0) return 1.0;
      return -std::expm1(-std::log1p(w) / p[1]);
    }
    case Family::PositiveStable:
      return stable_cdf(p[0], (x - p[1]) / p[2]);
  }
  return 0.0;
}

double survival(const DistributionSpec& s, double x) {
  validate(s);
  const auto& p = s.params;
  switch (s.family) {
    case Family::UnitExponential:
      return x <= 0.0 ? 1.0 : std::exp(-x);
    case Family::Exponential:
      return x <= 0.0 ? 1.0 : std::exp(-p[0] * x);
    case Family::Normal:
      return normal_sf((x - p[0]) / p[1]);
    case Family::StudentT:
      return boost::math::cdf(boost::math::complement(boost::math::students_t_distribution<double>(p[0]),
                                                      (x - p[1]) / p[2]));
    case Family::GEV: {
      const auto st = standardise_gev(p, x);
      if (st.below) return 1.0;
      if (st.above) return 0.0;
      const double h = std::abs(p[2]) < kShapeZeroTolerance ? std::exp(-st.z)
                                                             : std::exp(-std::log1p(p[2] * st.z) / p[2]);
      return -std::expm1(-h);
    }
    case Family::GPD: {
      if (x <= 0.0) return 1.0;
      if (std::abs(p[1]) < kShapeZeroTolerance) return std::exp(-x / p[0]);
      const double w = p[1] * x / p[0];
      if (w <= -1.0) return 0.0;
      return std::exp(-std::log1p(w) / p[1]);
    }
    case Family::UnitFrechet:
      return x <= 0.0 ? 1.0 : -std::expm1(-1.0 / x);
    case Family::PositiveStable:
      return x <= p[1] ? 1.0 : stable_survival(p[0], (x - p[1]) / p[2]);
  }
  return 0.0;
}

double quantile(const DistributionSpec& s, double prob) {
  validate(s);
  if (!(prob > 0.0 && prob < 1.0)) throw DomainError("quantile probability must lie in (0,1)");
  const auto& p = s.params;
  switch (s.family) {
    case Family::UnitExponential:
      return -std::log1p(-prob);
    case Family::Exponential:
      return -std::log1p(-prob) / p[0];
    case Family::UnitFrechet:
      return -1.0 / std::log(prob);
    case Family::Normal:
      return p[0] - p[1] * std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * prob);
    case Family::StudentT:
      return p[1] + p[2] * boost::math::quantile(boost::math::students_t_distribution<double>(p[0]), prob);
    case Family::GEV: {
      const double l = -std::log(prob);
      if (std::abs(p[2]) < kShapeZeroTolerance) return p[0] - p[1] * std::log(l);
      return p[0] + p[1] * std::expm1(-p[2] * std::log(l)) / p[2];
    }
    case Family::GPD: {
      const double l = -std::log1p(-prob);
      if (std::abs(p[1]) < kShapeZeroTolerance) return p[0] * l;
      return p[0] * std::expm1(p[1] * l) / p[1];
    }
    case Family::PositiveStable: {
      const double alpha = p[0];
      auto f = [&](double log_z) { return stable_cdf(alpha, std::exp(log_z)) - prob; };
      double lo = -1.0, hi = 1.0;
      while (f(lo) > 0.0) {
        lo -= 2.0;
        if (lo < -700.0) throw NumericError("stable quantile bracket failed");
      }
      while (f(hi) < 0.0) {
        hi += 2.0;
        if (hi > 700.0) throw NumericError("stable quantile bracket failed");
      }
      std::uintmax_t iters = 200;
      const auto r = boost::math::tools::toms748_solve(
          f, lo, hi, [](double a, double b) { return std::abs(b - a) < 1e-13; }, iters);
      return p[1] + p[2] * std::exp(0.5 * (r.first + r.second));
    }
  }
  return 0.0;
}

double draw(const DistributionSpec& s, Rng& rng) {
  const auto& p = s.params;
  switch (s.family) {
    case Family::UnitExponential:
      return rng.exponential();
    case Family::Exponential:
      return rng.exponential() / p[0];
    case Family::UnitFrechet:
      return 1.0 / rng.exponential();
    case Family::Normal:
      return p[0] + p[1] * rng.normal();
    case Family::PositiveStable:
      return p[1] + p[2] * stable_draw(p[0], rng);
    case Family::StudentT:
    case Family::GEV:
    case Family::GPD:
      return quantile(s, rng.uniform());
  }
  return 0.0;
}

Sample sample(const DistributionSpec& s, std::size_t n, RngSeed seed) {
  validate(s);
  if (n == 0) throw DomainError("sample size must be at least 1");
  Rng rng(seed);
  Sample out(n);
  for (auto& v : out) v = draw(s, rng);
  return out;
}

bool in_support(const DistributionSpec& s, double y) noexcept {
  if (!std::isfinite(y)) return false;
  const auto& p = s.params;
  switch (s.family) {
    case Family::UnitExponential:
    case Family::Exponential:
      return y >= 0.0;
    case Family::UnitFrechet:
      return y > 0.0;
    case Family::Normal:
    case Family::StudentT:
      return true;
    case Family::GEV:
      return std::abs(p[2]) < kShapeZeroTolerance || 1.0 + p[2] * (y - p[0]) / p[1] > 0.0;
    case Family::GPD:
      return y >= 0.0 && (std::abs(p[1]) < kShapeZeroTolerance || 1.0 + p[1] * y / p[0] > 0.0);
    case Family::PositiveStable:
      return y > p[1];
  }
  return false;
}

double to_unit_exponential_unchecked(const DistributionSpec& s, double y) noexcept {
  if (!in_support(s, y)) return std::nan("");
  const auto& p = s.params;
  double sf;
  switch (s.family) {
    case Family::UnitExponential:
      sf = std::exp(-y);
      break;
    case Family::Exponential:
      sf = std::exp(-p[0] * y);
      break;
    case Family::UnitFrechet:
      sf = -std::expm1(-1.0 / y);
      break;
    case Family::Normal:
      sf = normal_sf((y - p[0]) / p[1]);
      break;
    case Family::StudentT:
      sf = boost::math::cdf(
          boost::math::complement(boost::math::students_t_distribution<double>(p[0]), (y - p[1]) / p[2]));
      break;
    case Family::GEV: {
      const double z = (y - p[0]) / p[1];
      const double h = std::abs(p[2]) < kShapeZeroTolerance ? std::exp(-z) : std::exp(-std::log1p(p[2] * z) / p[2]);
      sf = -std::expm1(-h);
      break;
    }
    case Family::GPD:
      sf = std::abs(p[1]) < kShapeZeroTolerance ? std::exp(-y / p[0]) : std::exp(-std::log1p(p[1] * y / p[0]) / p[1]);
      break;
    case Family::PositiveStable:
      sf = stable_survival(p[0], (y - p[1]) / p[2]);
      break;
    default:
      return std::nan("");
  }
  sf = std::clamp(sf, kCdfClip, 1.0 - kCdfClip);
  return -std::log(sf);
}

double to_unit_exponential(const DistributionSpec& s, double y) {
  validate(s);
  if (!in_support(s, y)) {
    std::ostringstream os;
    os.precision(17);
    os << "value " << y << " outside the support of " << format_spec(s);
    throw SupportError(os.str(), 0);
  }
  return to_unit_exponential_unchecked(s, y);
}

std::vector<double> to_unit_exponential(const DistributionSpec& s, std::span<const double> ys) {
  validate(s);
  std::vector<double> out(ys.size());
  for (std::size_t i = 0; i < ys.size(); ++i) {
    out[i] = to_unit_exponential_unchecked(s, ys[i]);
    if (std::isnan(out[i])) {
      std::ostringstream os;
      os.precision(17);
      os << "data point " << i << " (" << ys[i] << ") outside the support of " << format_spec(s);
      throw SupportError(os.str(), i);
    }
  }
  return out;
}

}  // namespace nse

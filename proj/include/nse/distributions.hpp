#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nse/rng.hpp"

namespace nse {

/// Unordered observations. Entries must be finite.
using Sample = std::vector<double>;

enum class Family {
  UnitExponential,
  Exponential,     // {rate}
  UnitFrechet,
  Normal,          // {mean, sd}
  StudentT,        // {df, location, scale}
  GEV,             // {mu, sigma, xi}
  GPD,             // {sigma, xi}   (sigma is the threshold-adjusted scale)
  PositiveStable,  // {alpha, location, scale}
};

/// A parametric family together with its parameter vector.
struct DistributionSpec {
  Family family = Family::UnitExponential;
  std::vector<double> params;

  friend bool operator==(const DistributionSpec&, const DistributionSpec&) = default;
};

/// Below this |xi| the GEV and GPD use their exponential-type limit forms.
inline constexpr double kShapeZeroTolerance = 1e-9;
/// CDF values are clipped to [eps, 1-eps] before the exponential-scale log.
inline constexpr double kCdfClip = 1e-12;

std::string_view family_name(Family f);
Family family_from_name(std::string_view name);
std::size_t parameter_count(Family f);
const std::vector<std::string>& parameter_names(Family f);

/// True when the parameters satisfy the family's domain constraints.
bool is_valid(const DistributionSpec& spec) noexcept;
/// Throws DomainError naming the violated constraint.
void validate(const DistributionSpec& spec);

/// Parses `family(p1=...,p2=...)`. A bare family name (or empty parentheses
/// for a parametrised family) yields a template with no parameters.
DistributionSpec parse_spec(std::string_view text);
std::string format_spec(const DistributionSpec& spec);

double cdf(const DistributionSpec& spec, double x);
/// Upper tail 1 - F(x), computed directly where a closed form exists.
double survival(const DistributionSpec& spec, double x);
double quantile(const DistributionSpec& spec, double p);
Sample sample(const DistributionSpec& spec, std::size_t n, RngSeed seed);
/// Draws into an existing generator; used where several families share a stream.
double draw(const DistributionSpec& spec, Rng& rng);

/// True when y lies in the (open) support of the distribution.
bool in_support(const DistributionSpec& spec, double y) noexcept;

/// -log(1 - F(y)) with F clipped to [kCdfClip, 1 - kCdfClip]. Throws
/// SupportError when y is outside the support.
double to_unit_exponential(const DistributionSpec& spec, double y);

/// Non-throwing variant for inner loops: returns NaN outside the support and
/// assumes the spec has already been validated.
double to_unit_exponential_unchecked(const DistributionSpec& spec, double y) noexcept;

/// Transforms every entry; throws SupportError carrying the offending index.
std::vector<double> to_unit_exponential(const DistributionSpec& spec, std::span<const double> ys);

// ---------------------------------------------------------------------------
// Positive alpha-stable law with Laplace transform E exp(-lambda Z) = exp(-lambda^alpha).

/// Standard positive-stable CDF (location 0, scale 1) via the integral
/// representation (1/pi) int_0^pi exp(-z^{-a/(1-a)} A(theta)) dtheta for
/// z < 1 and the convergent series in z^-alpha above. The StableCdf table for
/// the most recent alpha is kept per thread.
double stable_cdf(double alpha, double z);
/// 1 - stable_cdf, summed directly.
double stable_survival(double alpha, double z);

/// Same integral by adaptive Gauss-Kronrod to absolute error 1e-10. Slower;
/// used to validate the node table.
double stable_cdf_adaptive(double alpha, double z);

/// Tanh-sinh node table for the stable CDF integral at a fixed alpha, plus
/// the coefficients of 1 - F(z) = sum_k (-1)^{k+1} z^{-alpha k} / (k! Gamma(1 - alpha k))
/// used for z >= 1 where the integrand develops a sharp layer near pi.
class StableCdf {
 public:
  explicit StableCdf(double alpha);

  double alpha() const noexcept { return alpha_; }
  double cdf(double z) const;
  /// 1 - F(z) summed directly, accurate in the upper tail.
  double survival(double z) const;

 private:
  static constexpr int kSeriesTerms = 160;
  double tail_series(double x) const;
  std::size_t cutoff(double c) const;

  double alpha_;
  std::vector<double> weights_;  // already divided by pi
  std::vector<double> kanter_;   // A(theta_k)
  std::vector<double> series_;   // tail expansion in z^-alpha, used for z >= 1
  std::vector<double> series_bound_;
  std::vector<double> weight_suffix_;
  bool monotone_ = false;
};

/// Same quantity by Gil-Pelaez inversion of the characteristic function
/// exp(-(-it)^alpha). Slower and only reliable for moderate z; kept as an
/// independent numerical route.
double stable_cdf_inversion(double alpha, double z);

/// Kanter's representation: (A(pi U) / E)^{(1-alpha)/alpha}.
double stable_draw(double alpha, Rng& rng);

struct LaplaceResidual {
  double residual = 0.0;        ///< mean(exp(-lambda Z)) - exp(-lambda^alpha)
  double standard_error = 0.0;  ///< sample sd of exp(-lambda Z) over sqrt(n)
};

/// Monte Carlo self-test of the sampler against the closed-form transform.
LaplaceResidual stable_laplace_residual(double alpha, double lambda, std::size_t n, RngSeed seed);

}  // namespace nse

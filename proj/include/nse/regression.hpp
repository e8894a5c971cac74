#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "nse/distributions.hpp"
#include "nse/optimize.hpp"
#include "nse/ranked_quotients.hpp"
#include "nse/rng.hpp"

namespace nse {

struct RegressionData {
  Eigen::MatrixXd design;    // n x p, no intercept column
  Eigen::VectorXd response;  // n
  bool intercept = true;

  std::size_t n() const noexcept { return static_cast<std::size_t>(response.size()); }
  std::size_t p() const noexcept { return static_cast<std::size_t>(design.cols()); }

  /// n >= coefficients + extra, finite entries, full column rank (smallest
  /// singular value above 1e-10 times the largest, intercept included).
  /// OLS passes extra = 0.
  void validate(Eigen::Index extra = 2) const;
};

enum class RegressionMethod { OLS, NSE };

struct RegressionFit {
  double mu_hat = 0.0;
  Eigen::VectorXd beta_hat;
  double sigma_hat = 1.0;
  Eigen::VectorXd residuals;  // y - mu - X beta
  RegressionMethod method = RegressionMethod::OLS;
  /// NSE only.
  double loss_value = 0.0;
  /// NSE loss of the OLS starting point against the selected reference.
  double initial_loss = 0.0;
  std::size_t reference_index = 0;
  DistributionSpec error_family;
  /// Zero-noise data: the NSE loss has no interior minimum, OLS is returned.
  bool degenerate = false;
};

RegressionFit ols_fit(const RegressionData& data);

struct NseRegressionOptions {
  /// Family of the standardised error; the location parameter (if any) is
  /// pinned to 0 and the remaining parameters are fitted jointly with (mu, beta).
  DistributionSpec error_family{Family::Normal, {}};
  IndexSet lambda = IndexSet::full();
  OptimizerConfig optimizer{4, 4000, 1e-8, 0.1};
  std::size_t n_reference = 5;
  /// Independent repeated fits averaged componentwise.
  std::size_t repeats = 1;
  /// Keep the error scale at this value instead of fitting it.
  std::optional<double> fixed_scale;
};

/// Parameter vector is (mu, beta, free error parameters). Each reference
/// sequence gets a multi-start search from the OLS solution; the fit with the
/// smallest loss is kept. With repeats > 1 the kept fits are averaged and
/// loss_value holds the loss of the averaged coefficients against the best
/// reference of the first repeat.
RegressionFit nse_regression_fit(const RegressionData& data, const NseRegressionOptions& options, RngSeed seed);

/// The NSE regression loss g(...) of given coefficients and error parameters
/// against an ordered unit-exponential reference. Returns +inf for invalid
/// error parameters or residuals outside the error support.
double nse_regression_loss(const RegressionData& data, double mu, const Eigen::VectorXd& beta,
                           const DistributionSpec& error_spec, const OrderedSample& reference,
                           const IndexSet& lambda);

enum class ScenarioKind { StandardLinear, Quadratic, MissingCovariate };

struct Scenario {
  RegressionData data;
  double mu = 0.0;
  Eigen::VectorXd beta;
  double sigma = 0.0;
};

/// StandardLinear: p = 5, beta = (1,3,5,3,1), mu = 0, sigma = 0.5, x ~ N(0,1),
///   errors drawn from `error` (ignored for the other kinds).
/// Quadratic: n x 5 design with x1, x2 correlated (0.6, 0.8) with hidden z1, z2,
///   x3..x5 ~ Exp(1); y = x beta1 + 0.1 (z1 + z2)^2 + N(0, 0.3^2).
/// MissingCovariate: x2..x5 ~ Exp(1), (x1, z) correlated 0.6;
///   y = x beta1 - 0.1 z + N(0, 0.3^2).
Scenario make_scenario(ScenarioKind kind, std::size_t n, RngSeed seed,
                       const DistributionSpec& error = {Family::Normal, {0.0, 1.0}});

ScenarioKind scenario_from_name(const std::string& name);

/// Header row, then numeric rows; `response` names the y column and every
/// other column becomes a covariate. Missing or non-numeric cells raise
/// DataError with the 0-based data row index.
RegressionData read_regression_csv(std::istream& in, const std::string& response);

}  // namespace nse

#include <doctest.h>

#include <cmath>
#include <sstream>

#include "nse/error.hpp"
#include "nse/regression.hpp"

using namespace nse;
using doctest::Approx;

TEST_CASE("ols two-point line") {
  RegressionData d;
  d.design = Eigen::MatrixXd(2, 1);
  d.design << 0, 1;
  d.response = Eigen::VectorXd(2);
  d.response << 1, 3;
  // exactly determined, sigma_hat is 0
  const auto f = ols_fit(d);
  CHECK(f.mu_hat == Approx(1.0));
  CHECK(f.beta_hat[0] == Approx(2.0));
  CHECK(f.sigma_hat == 0.0);
}

TEST_CASE("ols interpolates exact data and constants") {
  const auto sc = make_scenario(ScenarioKind::StandardLinear, 50, {1, 0});
  RegressionData d = sc.data;
  d.response = d.design * sc.beta;
  auto f = ols_fit(d);
  CHECK((f.beta_hat - sc.beta).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(f.residuals.cwiseAbs().maxCoeff() < 1e-10);
  d.response.setConstant(4.2);
  f = ols_fit(d);
  CHECK(f.mu_hat == Approx(4.2).epsilon(1e-12));
  CHECK(f.beta_hat.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("rank deficiency is rejected") {
  auto sc = make_scenario(ScenarioKind::StandardLinear, 50, {2, 0});
  sc.data.design.col(2) = sc.data.design.col(1) * 2.0;
  CHECK_THROWS_AS(sc.data.validate(), Error);
  CHECK_THROWS_AS(ols_fit(sc.data), Error);
}

TEST_CASE("scenario is deterministic and ols recovers beta") {
  const auto a = make_scenario(ScenarioKind::StandardLinear, 300, {3, 4});
  const auto b = make_scenario(ScenarioKind::StandardLinear, 300, {3, 4});
  CHECK(a.data.response == b.data.response);
  Eigen::VectorXd beta(5);
  beta << 1, 3, 5, 3, 1;
  CHECK(a.beta == beta);
  int good = 0;
  for (std::uint64_t r = 0; r < 100; ++r) {
    const auto sc = make_scenario(ScenarioKind::StandardLinear, 300, {5, stream_for(r, 0)});
    good += (ols_fit(sc.data).beta_hat - beta).cwiseAbs().maxCoeff() < 0.2;
  }
  CHECK(good >= 95);
}

TEST_CASE("nse regression stays near ols for normal errors") {
  int close = 0;
  const int runs = 100;
  for (std::uint64_t r = 0; r < runs; ++r) {
    const auto sc = make_scenario(ScenarioKind::StandardLinear, 300, {6, stream_for(r, 0)});
    const auto o = ols_fit(sc.data);
    const auto f = nse_regression_fit(sc.data, {}, {7, stream_for(r, 0)});
    REQUIRE(f.loss_value >= 1.0);
    REQUIRE(f.loss_value <= f.initial_loss + 1e-12);
    close += (f.beta_hat - o.beta_hat).cwiseAbs().maxCoeff() < 0.15;
  }
  CHECK(close >= 90);
}

TEST_CASE("zero-noise data is flagged degenerate") {
  auto sc = make_scenario(ScenarioKind::StandardLinear, 60, {8, 0});
  sc.data.response = sc.data.design * sc.beta;
  const auto f = nse_regression_fit(sc.data, {}, {9, 0});
  CHECK(f.degenerate);
  CHECK((f.beta_hat - sc.beta).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("exponential errors: nse residuals look exponential, not ols ones") {
  // shifted exponential errors; nse with an exponential family fixes mu at the
  // lower edge of the residual cloud
  const auto sc = make_scenario(ScenarioKind::StandardLinear, 300, {10, 0}, {Family::UnitExponential, {}});
  NseRegressionOptions opt;
  opt.error_family = {Family::Exponential, {}};
  const auto f = nse_regression_fit(sc.data, opt, {11, 0});
  CHECK(f.residuals.minCoeff() > 0.0);
  CHECK((f.beta_hat - sc.beta).cwiseAbs().maxCoeff() < 0.3);
}

TEST_CASE("misspecified scenarios have the documented shape") {
  for (auto k : {ScenarioKind::Quadratic, ScenarioKind::MissingCovariate}) {
    const auto sc = make_scenario(k, 200, {12, 0});
    CHECK(sc.data.p() == 5);
    CHECK(sc.data.n() == 200);
    CHECK_NOTHROW(sc.data.validate());
  }
  CHECK(scenario_from_name("quadratic") == ScenarioKind::Quadratic);
  CHECK_THROWS(scenario_from_name("cubic"));
}

TEST_CASE("csv ingestion") {
  std::istringstream ok("x1,y,x2\n1,2,3\n2,4,1\n3,5,0\n4,9,2\n5,9,1\n");
  const auto d = read_regression_csv(ok, "y");
  CHECK(d.n() == 5);
  CHECK(d.p() == 2);
  CHECK(d.response[3] == 9);
  CHECK(d.design(0, 1) == 3);
  std::istringstream missing("x,y\n1,2\n2,\n3,4\n");
  try {
    (void)read_regression_csv(missing, "y");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(e.index() == 1);
  }
  std::istringstream nocol("x,z\n1,2\n");
  CHECK_THROWS(read_regression_csv(nocol, "y"));
}

#include "nse/regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "nse/error.hpp"
#include "nse/nse_estimator.hpp"
#include "nse/parallel.hpp"

namespace nse {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::uint64_t kRestartStream = 0xffff;

std::optional<std::size_t> location_index(Family f) {
  switch (f) {
    case Family::Normal:
    case Family::GEV:
      return 0;
    case Family::StudentT:
    case Family::PositiveStable:
      return 1;
    default:
      return std::nullopt;
  }
}

std::optional<std::size_t> scale_index(Family f) {
  switch (f) {
    case Family::Normal:
    case Family::GEV:
      return 1;
    case Family::StudentT:
    case Family::PositiveStable:
      return 2;
    case Family::GPD:
      return 0;
    default:
      return std::nullopt;
  }
}

double sd_of(const Eigen::VectorXd& v) {
  if (v.size() < 2) return 0.0;
  const double m = v.mean();
  return std::sqrt((v.array() - m).square().sum() / static_cast<double>(v.size() - 1));
}

Eigen::MatrixXd with_intercept(const RegressionData& d) {
  Eigen::MatrixXd a(d.design.rows(), d.design.cols() + (d.intercept ? 1 : 0));
  if (d.intercept) {
    a.col(0).setOnes();
    a.rightCols(d.design.cols()) = d.design;
  } else {
    a = d.design;
  }
  return a;
}

// Maps the optimizer vector (mu, beta, free error params) to pieces.
struct Layout {
  Family family;
  std::size_t p;
  std::vector<double> base;           // full error parameter vector with fixed entries set
  std::vector<std::size_t> free_idx;  // positions of base that are optimised

  std::size_t dim() const { return 1 + p + free_idx.size(); }
  DistributionSpec spec(const std::vector<double>& x) const {
    DistributionSpec s{family, base};
    for (std::size_t i = 0; i < free_idx.size(); ++i) s.params[free_idx[i]] = x[1 + p + i];
    return s;
  }
};

double loss_with(const RegressionData& data, double mu, const Eigen::VectorXd& beta, const DistributionSpec& spec,
                 std::span<const double> ref, std::span<const std::size_t> positions, std::vector<double>& work) {
  if (!is_valid(spec)) return kInf;
  const Eigen::VectorXd r = data.response - data.design * beta;
  work.assign(r.data(), r.data() + r.size());
  for (double& v : work) v -= mu;
  std::sort(work.begin(), work.end());
  double q1 = 0.0, q2 = 0.0;
  for (std::size_t k : positions) {
    const double z = to_unit_exponential_unchecked(spec, work[k]);
    if (!(z > 0.0) || !std::isfinite(z)) return kInf;
    q1 = std::max(q1, ref[k] / z);
    q2 = std::max(q2, z / ref[k]);
  }
  return std::max({q1, q2, 1.0 / q1, 1.0 / q2});
}

struct SingleFit {
  std::vector<double> x;
  double loss = kInf;
  double initial_loss = kInf;
  std::size_t reference = 0;
};

SingleFit fit_once(const RegressionData& data, const Layout& layout, const std::vector<double>& start,
                   const Bounds& box, const NseRegressionOptions& opt, RngSeed seed) {
  const std::size_t n = data.n();
  const auto positions = opt.lambda.resolve(n);
  std::vector<SingleFit> fits(opt.n_reference);
  parallel_for(opt.n_reference, [&](std::size_t r) {
    const auto ref = reference_sequence(n, with_stream(seed, seed.stream_id + 1 + r));
    std::vector<double> work;
    auto objective = [&](const std::vector<double>& x) {
      const Eigen::Map<const Eigen::VectorXd> beta(x.data() + 1, static_cast<Eigen::Index>(layout.p));
      return loss_with(data, x[0], beta, layout.spec(x), ref.values(), positions, work);
    };
    Rng rng(with_stream(seed, seed.stream_id + kRestartStream));
    rng.seek(r * 1024);
    SingleFit f;
    f.reference = r;
    f.initial_loss = objective(start);
    try {
      const auto res = multistart_minimize(objective, start, box, opt.optimizer, rng);
      f.x = res.theta_hat;
      f.loss = res.loss_value;
    } catch (const NumericError&) {
      f.x = start;
    }
    fits[r] = std::move(f);
  });
  std::size_t best = 0;
  for (std::size_t r = 1; r < fits.size(); ++r)
    if (fits[r].loss < fits[best].loss) best = r;
  if (!std::isfinite(fits[best].loss))
    throw NumericError("regression loss is infinite at every restart", fits[best].loss);
  return fits[best];
}

}  // namespace

void RegressionData::validate(Eigen::Index extra) const {
  const auto n = response.size();
  if (design.rows() != n) throw ConfigError("design and response lengths differ");
  if (n < design.cols() + (intercept ? 1 : 0) + extra)
    throw ConfigError("regression needs more observations than coefficients");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(response[i])) throw DataError("non-finite response", static_cast<std::size_t>(i));
    for (Eigen::Index j = 0; j < design.cols(); ++j)
      if (!std::isfinite(design(i, j))) throw DataError("non-finite covariate", static_cast<std::size_t>(i));
  }
  const Eigen::MatrixXd a = with_intercept(*this);
  if (a.cols() == 0) return;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& s = svd.singularValues();
  if (!(s(s.size() - 1) > 1e-10 * s(0))) throw DomainError("singular design matrix");
}

RegressionFit ols_fit(const RegressionData& data) {
  data.validate(0);
  const Eigen::MatrixXd a = with_intercept(data);
  const Eigen::VectorXd coef = a.colPivHouseholderQr().solve(data.response);
  RegressionFit f;
  f.method = RegressionMethod::OLS;
  f.mu_hat = data.intercept ? coef(0) : 0.0;
  f.beta_hat = data.intercept ? Eigen::VectorXd(coef.tail(data.design.cols())) : coef;
  f.residuals = data.response - data.design * f.beta_hat;
  f.residuals.array() -= f.mu_hat;
  const double dof = static_cast<double>(data.n()) - static_cast<double>(a.cols());
  f.sigma_hat = dof > 0 ? std::sqrt(f.residuals.squaredNorm() / dof) : 0.0;
  return f;
}

double nse_regression_loss(const RegressionData& data, double mu, const Eigen::VectorXd& beta,
                           const DistributionSpec& error_spec, const OrderedSample& reference,
                           const IndexSet& lambda) {
  if (reference.size() != data.n()) throw ConfigError("reference and data lengths differ");
  std::vector<double> work;
  const auto positions = lambda.resolve(data.n());
  return loss_with(data, mu, beta, error_spec, reference.values(), positions, work);
}

RegressionFit nse_regression_fit(const RegressionData& data, const NseRegressionOptions& opt, RngSeed seed) {
  data.validate();
  validate(opt.optimizer);
  if (opt.n_reference == 0 || opt.repeats == 0) throw ConfigError("n_reference and repeats must be positive");
  const Family family = opt.error_family.family;
  const std::size_t np = parameter_count(family);
  const auto loc = location_index(family);
  const auto scl = scale_index(family);
  if (opt.fixed_scale && !scl) throw ConfigError("error family has no scale parameter to fix");
  if (opt.fixed_scale && !(*opt.fixed_scale > 0.0)) throw ConfigError("fixed scale must be positive");

  RegressionFit ols = ols_fit(data);
  const double sdy = sd_of(data.response);
  const double size = std::max({sdy, data.response.cwiseAbs().maxCoeff(), 1e-300});
  RegressionFit out = ols;
  out.method = RegressionMethod::NSE;
  if (sd_of(ols.residuals) <= 1e-10 * size) {
    out.degenerate = true;
    out.sigma_hat = std::max(1e-6 * sdy, 1e-300);
    out.error_family = opt.error_family;
    return out;
  }

  // Starting point: OLS coefficients plus error parameters fitted to the OLS residuals.
  const std::size_t p = data.p();
  double mu0 = ols.mu_hat;
  std::vector<double> resid(ols.residuals.data(), ols.residuals.data() + ols.residuals.size());
  std::vector<double> base;
  if (loc) {
    base = default_start(family, resid);
    mu0 += base[*loc];
    base[*loc] = 0.0;
  } else {
    const double shift = *std::min_element(resid.begin(), resid.end()) - 0.01 * sd_of(ols.residuals);
    mu0 += shift;
    for (double& r : resid) r -= shift;
    base = default_start(family, resid);
  }
  if (!opt.error_family.params.empty()) {
    if (opt.error_family.params.size() != np) throw ConfigError("error family template has the wrong parameter count");
  }
  if (opt.fixed_scale) base[*scl] = *opt.fixed_scale;

  Layout layout{family, p, base, {}};
  for (std::size_t i = 0; i < np; ++i)
    if (i != loc && !(opt.fixed_scale && i == scl)) layout.free_idx.push_back(i);

  const Bounds fam = default_bounds(family);
  Bounds box;
  box.lo.assign(1 + p, -kInf);
  box.hi.assign(1 + p, kInf);
  for (std::size_t i : layout.free_idx) {
    double lo = fam.lo[i];
    if (scl && i == *scl) lo = std::max(lo, 1e-6 * sdy);
    box.lo.push_back(lo);
    box.hi.push_back(fam.hi[i]);
  }
  std::vector<double> start;
  start.push_back(mu0);
  for (std::size_t j = 0; j < p; ++j) start.push_back(ols.beta_hat[static_cast<Eigen::Index>(j)]);
  for (std::size_t i : layout.free_idx) start.push_back(std::clamp(base[i], box.lo[start.size()], box.hi[start.size()]));

  std::vector<double> avg(start.size(), 0.0);
  SingleFit first;
  for (std::size_t k = 0; k < opt.repeats; ++k) {
    const RngSeed s = k == 0 ? seed : derive_seed(seed, k);
    const auto f = fit_once(data, layout, start, box, opt, s);
    if (k == 0) first = f;
    for (std::size_t i = 0; i < avg.size(); ++i) avg[i] += f.x[i] / static_cast<double>(opt.repeats);
  }

  out.mu_hat = avg[0];
  out.beta_hat = Eigen::Map<const Eigen::VectorXd>(avg.data() + 1, static_cast<Eigen::Index>(p));
  out.residuals = data.response - data.design * out.beta_hat;
  out.residuals.array() -= out.mu_hat;
  out.error_family = layout.spec(avg);
  out.sigma_hat = scl ? out.error_family.params[*scl] : sd_of(out.residuals);
  out.reference_index = first.reference;
  out.initial_loss = first.initial_loss;
  if (opt.repeats == 1) {
    out.loss_value = first.loss;
  } else {
    const auto ref = reference_sequence(data.n(), with_stream(seed, seed.stream_id + 1 + first.reference));
    out.loss_value = nse_regression_loss(data, out.mu_hat, out.beta_hat, out.error_family, ref, opt.lambda);
  }
  return out;
}

Scenario make_scenario(ScenarioKind kind, std::size_t n, RngSeed seed, const DistributionSpec& error) {
  if (n < 50) throw ConfigError("scenarios need n >= 50");
  Rng rng(seed);
  const auto rows = static_cast<Eigen::Index>(n);
  Scenario sc;
  sc.data.design.resize(rows, 5);
  sc.data.response.resize(rows);
  sc.data.intercept = true;
  switch (kind) {
    case ScenarioKind::StandardLinear: {
      validate(error);
      sc.beta = Eigen::VectorXd{{1.0, 3.0, 5.0, 3.0, 1.0}};
      sc.sigma = 0.5;
      for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < 5; ++j) sc.data.design(i, j) = rng.normal();
      for (Eigen::Index i = 0; i < rows; ++i)
        sc.data.response[i] = sc.data.design.row(i).dot(sc.beta) + sc.sigma * draw(error, rng);
      break;
    }
    case ScenarioKind::Quadratic: {
      sc.beta = Eigen::VectorXd{{0.3, 0.5, 0.5, 0.3, 0.3}};
      sc.sigma = 0.3;
      const double r1 = 0.6, r2 = 0.8;
      for (Eigen::Index i = 0; i < rows; ++i) {
        const double a = rng.normal(), b = rng.normal(), c = rng.normal(), d = rng.normal();
        const double z1 = r1 * a + std::sqrt(1.0 - r1 * r1) * b;
        const double z2 = r2 * c + std::sqrt(1.0 - r2 * r2) * d;
        sc.data.design(i, 0) = a;
        sc.data.design(i, 1) = c;
        for (Eigen::Index j = 2; j < 5; ++j) sc.data.design(i, j) = rng.exponential();
        const double zs = z1 + z2;
        sc.data.response[i] = sc.data.design.row(i).dot(sc.beta) + 0.1 * zs * zs + sc.sigma * rng.normal();
      }
      break;
    }
    case ScenarioKind::MissingCovariate: {
      sc.beta = Eigen::VectorXd{{0.3, 0.5, 0.5, 0.3, 0.3}};
      sc.sigma = 0.3;
      const double rho = 0.6;
      for (Eigen::Index i = 0; i < rows; ++i) {
        const double a = rng.normal(), b = rng.normal();
        const double z = rho * a + std::sqrt(1.0 - rho * rho) * b;
        sc.data.design(i, 0) = a;
        for (Eigen::Index j = 1; j < 5; ++j) sc.data.design(i, j) = rng.exponential();
        sc.data.response[i] = sc.data.design.row(i).dot(sc.beta) - 0.1 * z + sc.sigma * rng.normal();
      }
      break;
    }
  }
  return sc;
}

ScenarioKind scenario_from_name(const std::string& name) {
  if (name == "standard" || name == "linear") return ScenarioKind::StandardLinear;
  if (name == "quadratic") return ScenarioKind::Quadratic;
  if (name == "missing" || name == "missing_covariate") return ScenarioKind::MissingCovariate;
  throw ConfigError("unknown regression scenario '" + name + "'");
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r\"");
    const auto e = cell.find_last_not_of(" \t\r\"");
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

RegressionData read_regression_csv(std::istream& in, const std::string& response) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("CSV input is empty");
  const auto header = split_csv_line(line);
  const auto it = std::find(header.begin(), header.end(), response);
  if (it == header.end()) throw ConfigError("response column '" + response + "' not found");
  const auto ycol = static_cast<std::size_t>(it - header.begin());
  std::vector<std::vector<double>> rows;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) throw DataError("wrong number of columns", row);
    std::vector<double> v(cells.size());
    for (std::size_t j = 0; j < cells.size(); ++j) {
      std::size_t used = 0;
      try {
        v[j] = std::stod(cells[j], &used);
      } catch (const std::exception&) {
        throw DataError("missing or non-numeric value in column '" + header[j] + "'", row);
      }
      if (used != cells[j].size()) throw DataError("non-numeric value in column '" + header[j] + "'", row);
    }
    rows.push_back(std::move(v));
    ++row;
  }
  RegressionData d;
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto p = static_cast<Eigen::Index>(header.size() - 1);
  d.design.resize(n, p);
  d.response.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index c = 0;
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (j == ycol)
        d.response[i] = rows[static_cast<std::size_t>(i)][j];
      else
        d.design(i, c++) = rows[static_cast<std::size_t>(i)][j];
    }
  }
  return d;
}

}  // namespace nse

#include "nse/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>

#include <openssl/evp.h>

#include "nse/distributions.hpp"
#include "nse/error.hpp"
#include "nse/exact_combinatorics.hpp"
#include "nse/extreme_value.hpp"
#include "nse/gof_tests.hpp"
#include "nse/nse_estimator.hpp"
#include "nse/parallel.hpp"
#include "nse/ranked_quotients.hpp"
#include "nse/regression.hpp"

namespace nse {

namespace {

struct ScenarioInfo {
  ScenarioType type;
  std::string_view name;
  std::map<std::string, std::string> defaults;
};

const std::vector<ScenarioInfo>& scenarios() {
  static const std::vector<ScenarioInfo> table = {
      {ScenarioType::Table1_2,
       "Table1_2",
       {{"errors", "normal,exp,t2,t4,t8"},
        {"methods", "ols,nse"},
        {"n_reference", "5"},
        {"restarts", "4"},
        {"null_reps", "2000"}}},
      {ScenarioType::GEVSweep,
       "GEVSweep",
       {{"xi", "-2,-1.5,-1,-0.5,0,0.5,1,1.5"}, {"methods", "mle,nse"}, {"n_reference", "10"}, {"restarts", "5"}}},
      {ScenarioType::BlockMaxima,
       "BlockMaxima",
       {{"parents", "normal,exp,frechet,uniform"},
        {"block_size", "100"},
        {"methods", "mle,nse"},
        {"n_reference", "10"},
        {"restarts", "5"}}},
      {ScenarioType::POT,
       "POT",
       {{"parents", "normal,exp,frechet,uniform"},
        {"quantile", "0.95"},
        {"methods", "mle,nse"},
        {"n_reference", "10"},
        {"restarts", "5"}}},
      {ScenarioType::StableSweep,
       "StableSweep",
       {{"alpha", "0.375,0.5,0.625,0.75"}, {"n_reference", "3"}, {"restarts", "2"}}},
      {ScenarioType::QuadraticReg, "QuadraticReg", {{"n_reference", "5"}, {"restarts", "4"}, {"null_reps", "2000"}}},
      {ScenarioType::MissingCovariateReg,
       "MissingCovariateReg",
       {{"n_reference", "5"}, {"restarts", "4"}, {"null_reps", "2000"}}},
      {ScenarioType::MRQAsymptotics, "MRQAsymptotics", {{"lambda", "full"}, {"rate", "1"}}},
      {ScenarioType::LimitDistGrid,
       "LimitDistGrid",
       {{"ell", "1,2,3,4"}, {"t_min", "0.1"}, {"t_max", "10"}, {"points", "100"}, {"finite_n", "0"}}},
  };
  return table;
}

const ScenarioInfo& info(ScenarioType s) {
  for (const auto& i : scenarios())
    if (i.type == s) return i;
  throw ConfigError("unknown scenario");
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(s);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    throw ConfigError("param '" + key + "' expects a number, got '" + v + "'");
  }
  if (used != v.size() || !std::isfinite(x)) throw ConfigError("param '" + key + "' expects a number, got '" + v + "'");
  return x;
}

std::size_t to_count(const std::string& key, const std::string& v) {
  const double x = to_double(key, v);
  if (x < 0.0 || x != std::floor(x)) throw ConfigError("param '" + key + "' expects a non-negative integer");
  return static_cast<std::size_t>(x);
}

std::vector<double> to_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& s : split_list(v)) out.push_back(to_double(key, s));
  if (out.empty()) throw ConfigError("param '" + key + "' is empty");
  return out;
}

class Params {
 public:
  Params(const ExperimentConfig& c) : defaults_(scenario_defaults(c.scenario)), given_(c.params) {}
  std::string str(const std::string& k) const {
    if (auto it = given_.find(k); it != given_.end()) return it->second;
    return defaults_.at(k);
  }
  double num(const std::string& k) const { return to_double(k, str(k)); }
  std::size_t count(const std::string& k) const { return to_count(k, str(k)); }
  std::vector<double> nums(const std::string& k) const { return to_doubles(k, str(k)); }
  std::vector<std::string> list(const std::string& k) const { return split_list(str(k)); }
  bool has_method(const std::string& m) const {
    const auto l = list("methods");
    return std::find(l.begin(), l.end(), m) != l.end();
  }

 private:
  const std::map<std::string, std::string>& defaults_;
  const std::map<std::string, std::string>& given_;
};

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

std::string fmt_seed(RngSeed s) { return std::to_string(s.seed) + "," + std::to_string(s.stream_id); }

double quantile_of(std::vector<double> v, double p) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto i = static_cast<std::size_t>(pos);
  if (i + 1 >= v.size()) return v.back();
  return v[i] + (pos - static_cast<double>(i)) * (v[i + 1] - v[i]);
}

DistributionSpec error_spec(const std::string& name) {
  if (name == "normal") return {Family::Normal, {0.0, 1.0}};
  if (name == "exp") return {Family::UnitExponential, {}};
  if (name.size() > 1 && name[0] == 't' && std::isdigit(static_cast<unsigned char>(name[1])))
    return {Family::StudentT, {to_double("errors", name.substr(1)), 0.0, 1.0}};
  auto s = parse_spec(name);
  validate(s);
  return s;
}

// Parent series for block maxima / POT. `uniform` is U(0,1).
Sample parent_series(const std::string& name, std::size_t n, RngSeed seed) {
  if (name == "uniform") {
    Rng rng(seed);
    Sample x(n);
    for (double& v : x) v = rng.uniform();
    return x;
  }
  if (name == "normal") return sample({Family::Normal, {0.0, 1.0}}, n, seed);
  if (name == "exp") return sample({Family::UnitExponential, {}}, n, seed);
  if (name == "frechet") return sample({Family::UnitFrechet, {}}, n, seed);
  auto s = parse_spec(name);
  validate(s);
  return sample(s, n, seed);
}

void check_parent(const std::string& name) {
  if (name == "uniform" || name == "normal" || name == "exp" || name == "frechet") return;
  const auto s = parse_spec(name);
  validate(s);
}

OptimizerConfig optimizer_from(const Params& p) {
  OptimizerConfig o;
  o.restarts = p.count("restarts");
  return o;
}

struct Csv {
  std::string name;
  std::string text;
};

struct ScenarioOutput {
  std::vector<Csv> files;
  std::vector<CheckResult> checks;
  std::vector<RngSeed> seeds;
};

RngSeed rep_seed(const ExperimentConfig& c, std::size_t cell, std::size_t rep) {
  return {c.seed, stream_for(cell * c.replications + rep, 0)};
}

// Rethrows a module error with the replication index prepended; the error
// kind (and so the exit code) is kept.
template <class F>
auto at_replication(std::size_t rep, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    const std::string msg = "replication " + std::to_string(rep) + ": " + e.what();
    if (e.kind() == Error::Kind::Numeric) throw NumericError(msg);
    throw ConfigError(msg);
  }
}

// Rows of one replication, produced in parallel and joined in index order.
std::string run_reps(std::size_t count, const std::function<std::string(std::size_t)>& body) {
  std::vector<std::string> rows(count);
  parallel_for(count, [&](std::size_t i) { rows[i] = at_replication(i, [&] { return body(i); }); });
  std::string out;
  for (auto& r : rows) out += r;
  return out;
}

// Long-format estimate rows: cell label, rep, seed, method, parameter, estimate.
struct EstimateRow {
  std::string cell;
  std::string method;
  std::string parameter;
  double estimate;
};

std::vector<EstimateRow> parse_estimates(const std::string& text) {
  std::vector<EstimateRow> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() < 8) continue;
    out.push_back({f[0], f[4], f[5], std::stod(f[6])});
  }
  return out;
}

std::string boxplot_summary(const std::string& cell_column, const std::vector<EstimateRow>& rows,
                            const std::map<std::pair<std::string, std::string>, double>& truth) {
  std::map<std::tuple<std::string, std::string, std::string>, std::vector<double>> groups;
  std::vector<std::tuple<std::string, std::string, std::string>> order;
  for (const auto& r : rows) {
    auto key = std::tuple{r.cell, r.method, r.parameter};
    if (!groups.contains(key)) order.push_back(key);
    groups[key].push_back(r.estimate);
  }
  std::string out = cell_column + ",method,parameter,count,q1,median,q3,true_value,median_abs_error\n";
  for (const auto& key : order) {
    const auto& v = groups[key];
    const auto& [cell, method, param] = key;
    double tv = std::nan("");
    if (auto it = truth.find({cell, param}); it != truth.end()) tv = it->second;
    std::vector<double> err;
    if (!std::isnan(tv))
      for (double x : v) err.push_back(std::abs(x - tv));
    out += cell + "," + method + "," + param + "," + std::to_string(v.size()) + "," + fmt(quantile_of(v, 0.25)) + "," +
           fmt(quantile_of(v, 0.5)) + "," + fmt(quantile_of(v, 0.75)) + "," + fmt(tv) + "," +
           fmt(err.empty() ? std::nan("") : quantile_of(err, 0.5)) + "\n";
  }
  return out;
}

const std::string kEstimateHeader = ",rep,seed,stream,method,parameter,estimate,loss,regime,converged\n";

std::string estimate_rows(const std::string& cell, std::size_t rep, RngSeed seed, const std::string& method,
                          const std::vector<std::string>& names, const EvtFit& f) {
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i)
    out += cell + "," + std::to_string(rep) + "," + fmt_seed(seed) + "," + method + "," + names[i] + "," +
           fmt(f.result.theta_hat[i]) + "," + fmt(f.result.loss_value) + "," + std::string(regime_name(f.regime)) +
           "," + (f.result.converged ? "1" : "0") + "\n";
  return out;
}

// ---------------------------------------------------------------------------

ScenarioOutput table1_2(const ExperimentConfig& c) {
  const Params p(c);
  const auto errors = p.list("errors");
  const bool do_ols = p.has_method("ols"), do_nse = p.has_method("nse");
  NseRegressionOptions opt;
  opt.n_reference = p.count("n_reference");
  opt.optimizer.restarts = p.count("restarts");
  NseTestConfig tc;
  tc.null_reps = p.count("null_reps");
  const auto& ltab = cached_lilliefors_table(c.n, p.count("null_reps"));

  ScenarioOutput out;
  std::string rows = "error,rep,seed,stream,method,test,statistic,p_value,pass\n";
  // passes[error][method][test]
  std::map<std::string, std::map<std::string, std::map<std::string, int>>> passes;
  for (std::size_t e = 0; e < errors.size(); ++e) {
    const auto spec = error_spec(errors[e]);
    for (std::size_t r = 0; r < c.replications; ++r) out.seeds.push_back(rep_seed(c, e, r));
    rows += run_reps(c.replications, [&](std::size_t r) {
      const RngSeed s = rep_seed(c, e, r);
      const auto sc = make_scenario(ScenarioKind::StandardLinear, c.n, s, spec);
      std::string text;
      auto emit = [&](const std::string& method, const Eigen::VectorXd& res) {
        const std::vector<double> v(res.data(), res.data() + res.size());
        const std::vector<TestResult> tests = {nse_normality_test(v, tc, derive_seed(s, 2)), lilliefors(v, ltab),
                                               jarque_bera(v)};
        for (const auto& t : tests)
          text += errors[e] + "," + std::to_string(r) + "," + fmt_seed(s) + "," + method + "," +
                  std::string(test_method_name(t.method)) + "," + fmt(t.statistic) + "," + fmt(t.p_value) + "," +
                  (t.reject_at_05 ? "0" : "1") + "\n";
      };
      if (do_ols) emit("ols", ols_fit(sc.data).residuals);
      if (do_nse) emit("nse", nse_regression_fit(sc.data, opt, derive_seed(s, 1)).residuals);
      return text;
    });
  }
  std::istringstream in(rows);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    passes[f[0]][f[4]][f[5]] += f[8] == "1";
  }
  std::string summary = "error,method,test,passes,replications\n";
  for (const auto& e : errors)
    for (const std::string m : {"ols", "nse"})
      for (const std::string t : {"nse", "lilliefors", "jarque_bera"})
        if (passes[e].contains(m))
          summary += e + "," + m + "," + t + "," + std::to_string(passes[e][m][t]) + "," +
                     std::to_string(c.replications) + "\n";
  out.files = {{"results.csv", rows}, {"summary.csv", summary}};
  if (do_ols && do_nse) {
    for (const auto& e : errors) {
      if (e != "exp" && e != "t2" && e != "t4") continue;
      const int po = passes[e]["ols"]["lilliefors"], pn = passes[e]["nse"]["lilliefors"];
      out.checks.push_back({"lilliefors_nse_beats_ols_" + e, pn > po,
                            "nse " + std::to_string(pn) + " vs ols " + std::to_string(po)});
    }
  }
  return out;
}

ScenarioOutput gev_sweep(const ExperimentConfig& c) {
  const Params p(c);
  const auto xis = p.nums("xi");
  EvtOptions opt;
  opt.optimizer = optimizer_from(p);
  opt.n_reference = p.count("n_reference");
  const std::vector<std::string> names = {"mu", "sigma", "xi"};
  ScenarioOutput out;
  std::string rows = "xi_true" + kEstimateHeader;
  std::map<std::pair<std::string, std::string>, double> truth;
  for (std::size_t k = 0; k < xis.size(); ++k) {
    const std::string cell = fmt(xis[k]);
    truth[{cell, "mu"}] = 0.0;
    truth[{cell, "sigma"}] = 1.0;
    truth[{cell, "xi"}] = xis[k];
    for (std::size_t r = 0; r < c.replications; ++r) out.seeds.push_back(rep_seed(c, k, r));
    rows += run_reps(c.replications, [&](std::size_t r) {
      const RngSeed s = rep_seed(c, k, r);
      const auto x = sample({Family::GEV, {0.0, 1.0, xis[k]}}, c.n, s);
      std::string text;
      if (p.has_method("mle")) text += estimate_rows(cell, r, s, "mle", names, gev_mle(x, opt, derive_seed(s, 1)));
      if (p.has_method("nse")) text += estimate_rows(cell, r, s, "nse", names, gev_nse(x, derive_seed(s, 2), opt));
      return text;
    });
  }
  const auto est = parse_estimates(rows.substr(rows.find('\n') + 1));
  const auto summary = boxplot_summary("xi_true", est, truth);
  out.files = {{"estimates.csv", rows}, {"summary.csv", summary}};
  for (double xi : xis) {
    if (xi != -2.0 || !p.has_method("nse")) continue;
    std::vector<double> err;
    for (const auto& e : est)
      if (e.cell == fmt(xi) && e.method == "nse" && e.parameter == "xi") err.push_back(std::abs(e.estimate - xi));
    const double med = quantile_of(err, 0.5);
    out.checks.push_back({"nse_xi_minus2_median_error", med < 0.3, "median |xi_hat + 2| = " + fmt(med)});
  }
  return out;
}

ScenarioOutput evt_parents(const ExperimentConfig& c, bool blocks) {
  const Params p(c);
  const auto parents = p.list("parents");
  for (const auto& name : parents) check_parent(name);
  EvtOptions opt;
  opt.optimizer = optimizer_from(p);
  opt.n_reference = p.count("n_reference");
  const std::vector<std::string> gev_names = {"mu", "sigma", "xi"};
  const std::vector<std::string> gpd_names = {"sigma", "xi"};
  ScenarioOutput out;
  std::string rows = "parent" + kEstimateHeader;
  for (std::size_t k = 0; k < parents.size(); ++k) {
    for (std::size_t r = 0; r < c.replications; ++r) out.seeds.push_back(rep_seed(c, k, r));
    rows += run_reps(c.replications, [&](std::size_t r) {
      const RngSeed s = rep_seed(c, k, r);
      std::string text;
      if (blocks) {
        const std::size_t m = p.count("block_size");
        const auto series = parent_series(parents[k], m * c.n, s);
        const auto bm = block_maxima(series, {m, c.n}).maxima;
        if (p.has_method("mle"))
          text += estimate_rows(parents[k], r, s, "mle", gev_names, gev_mle(bm, opt, derive_seed(s, 1)));
        if (p.has_method("nse"))
          text += estimate_rows(parents[k], r, s, "nse", gev_names, gev_nse(bm, derive_seed(s, 2), opt));
      } else {
        const auto series = parent_series(parents[k], c.n, s);
        const auto y = excesses(series, ThresholdSpec::at_quantile(p.num("quantile")));
        if (p.has_method("mle"))
          text += estimate_rows(parents[k], r, s, "mle", gpd_names, gpd_mle(y, opt, derive_seed(s, 1)));
        if (p.has_method("nse"))
          text += estimate_rows(parents[k], r, s, "nse", gpd_names, gpd_nse(y, derive_seed(s, 2), opt));
      }
      return text;
    });
  }
  // Limiting shapes: normal and exp are Gumbel-type, uniform has xi = -1, unit Frechet xi = 1.
  std::map<std::pair<std::string, std::string>, double> truth;
  const std::map<std::string, double> xi_limit = {{"normal", 0.0}, {"exp", 0.0}, {"uniform", -1.0}, {"frechet", 1.0}};
  for (const auto& [name, xi] : xi_limit) truth[{name, "xi"}] = xi;
  const auto est = parse_estimates(rows.substr(rows.find('\n') + 1));
  out.files = {{"estimates.csv", rows}, {"summary.csv", boxplot_summary("parent", est, truth)}};
  return out;
}

ScenarioOutput stable_sweep(const ExperimentConfig& c) {
  const Params p(c);
  const auto alphas = p.nums("alpha");
  for (double a : alphas)
    if (!(a > 0.0 && a < 1.0)) throw ConfigError("stable alpha must lie in (0,1)");
  const std::vector<std::string> names = {"alpha", "location", "scale"};
  ScenarioOutput out;
  std::string rows = "alpha_true" + kEstimateHeader;
  std::map<std::pair<std::string, std::string>, double> truth;
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    const std::string cell = fmt(alphas[k]);
    truth[{cell, "alpha"}] = alphas[k];
    truth[{cell, "location"}] = 0.0;
    truth[{cell, "scale"}] = 1.0;
    for (std::size_t r = 0; r < c.replications; ++r) out.seeds.push_back(rep_seed(c, k, r));
    rows += run_reps(c.replications, [&](std::size_t r) {
      const RngSeed s = rep_seed(c, k, r);
      EstimationProblem prob;
      prob.family = Family::PositiveStable;
      prob.data = sample({Family::PositiveStable, {alphas[k], 0.0, 1.0}}, c.n, s);
      prob.n_reference = p.count("n_reference");
      prob.optimizer.restarts = p.count("restarts");
      const auto res = fit(prob, derive_seed(s, 2));
      return estimate_rows(cell, r, s, "nse", names, {res, Regime::Regular});
    });
  }
  const auto est = parse_estimates(rows.substr(rows.find('\n') + 1));
  out.files = {{"estimates.csv", rows}, {"summary.csv", boxplot_summary("alpha_true", est, truth)}};
  for (double a : alphas) {
    std::vector<double> err;
    for (const auto& e : est)
      if (e.cell == fmt(a) && e.parameter == "alpha") err.push_back(std::abs(e.estimate - a));
    const double med = quantile_of(err, 0.5);
    out.checks.push_back({"alpha_" + fmt(a) + "_median_error", med < 0.15, "median |alpha_hat - alpha| = " + fmt(med)});
  }
  return out;
}

ScenarioOutput misspecified_regression(const ExperimentConfig& c, ScenarioKind kind) {
  const Params p(c);
  NseRegressionOptions opt;
  opt.n_reference = p.count("n_reference");
  opt.optimizer.restarts = p.count("restarts");
  const auto& ltab = cached_lilliefors_table(c.n, p.count("null_reps"));
  ScenarioOutput out;
  std::string est = "rep,seed,stream,method,parameter,estimate\n";
  std::string tests = "rep,seed,stream,method,lilliefors_p,jarque_bera_p\n";
  std::vector<std::pair<std::string, std::string>> parts(c.replications);
  for (std::size_t r = 0; r < c.replications; ++r) out.seeds.push_back(rep_seed(c, 0, r));
  parallel_for(c.replications, [&](std::size_t r) { at_replication(r, [&] {
    const RngSeed s = rep_seed(c, 0, r);
    const auto sc = make_scenario(kind, c.n, s);
    const auto fits = {ols_fit(sc.data), nse_regression_fit(sc.data, opt, derive_seed(s, 1))};
    for (const auto& f : fits) {
      const std::string m = f.method == RegressionMethod::OLS ? "ols" : "nse";
      const std::string head = std::to_string(r) + "," + fmt_seed(s) + "," + m + ",";
      parts[r].first += head + "mu," + fmt(f.mu_hat) + "\n";
      for (Eigen::Index j = 0; j < f.beta_hat.size(); ++j)
        parts[r].first += head + "beta" + std::to_string(j + 1) + "," + fmt(f.beta_hat[j]) + "\n";
      parts[r].first += head + "sigma," + fmt(f.sigma_hat) + "\n";
      const std::vector<double> v(f.residuals.data(), f.residuals.data() + f.residuals.size());
      parts[r].second += head + fmt(lilliefors(v, ltab).p_value) + "," + fmt(jarque_bera(v).p_value) + "\n";
    }
  }); });
  for (auto& [a, b] : parts) {
    est += a;
    tests += b;
  }
  // Boxplot summary over replications.
  std::vector<EstimateRow> rows;
  std::istringstream in(est);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    rows.push_back({"all", f[3], f[4], std::stod(f[5])});
  }
  std::map<std::pair<std::string, std::string>, double> truth;
  const double b[] = {0.3, 0.5, 0.5, 0.3, 0.3};
  for (int j = 0; j < 5; ++j) truth[{"all", "beta" + std::to_string(j + 1)}] = b[j];
  truth[{"all", "mu"}] = 0.0;
  out.files = {{"estimates.csv", est}, {"tests.csv", tests}, {"summary.csv", boxplot_summary("set", rows, truth)}};
  return out;
}

ScenarioOutput mrq_asymptotics(const ExperimentConfig& c) {
  const Params p(c);
  const auto lambda = IndexSet::parse(p.str("lambda"));
  const double rate = p.num("rate");
  if (!(rate > 0.0)) throw ConfigError("rate must be positive");
  const auto positions = lambda.resolve(c.n);
  ScenarioOutput out;
  std::vector<double> q1s(c.replications), q2s(c.replications);
  for (std::size_t r = 0; r < c.replications; ++r) out.seeds.push_back(rep_seed(c, 0, r));
  std::string rows = "rep,seed,stream,q1,q2\n";
  rows += run_reps(c.replications, [&](std::size_t r) {
    const RngSeed s = rep_seed(c, 0, r);
    Rng rng(s);
    std::vector<double> x(c.n), y(c.n);
    for (double& v : x) v = rng.exponential();
    for (double& v : y) v = rng.exponential() / rate;
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    const auto q = mrq(x, y, positions);
    q1s[r] = q.q1;
    q2s[r] = q.q2;
    return std::to_string(r) + "," + fmt_seed(s) + "," + fmt(q.q1) + "," + fmt(q.q2) + "\n";
  });
  const double reps = static_cast<double>(c.replications);
  const double below = static_cast<double>(std::count_if(q1s.begin(), q1s.end(), [](double q) { return q <= 1.0; }));
  const double phat = below / reps;
  const bool full = std::holds_alternative<IndexSet::Full>(lambda.kind) && rate == 1.0;
  const double ref = full ? 1.0 / (static_cast<double>(c.n) + 1.0) : std::nan("");
  const double se = full ? std::sqrt(ref * (1.0 - ref) / reps) : std::sqrt(phat * (1.0 - phat) / reps);
  std::string summary = "n,replications,lambda,rate,p_q1_le_1,se,reference,median_q1,median_q2\n";
  summary += std::to_string(c.n) + "," + std::to_string(c.replications) + "," + lambda.to_string() + "," + fmt(rate) +
             "," + fmt(phat) + "," + fmt(se) + "," + fmt(ref) + "," + fmt(quantile_of(q1s, 0.5)) + "," +
             fmt(quantile_of(q2s, 0.5)) + "\n";
  out.files = {{"quotients.csv", rows}, {"summary.csv", summary}};
  if (full)
    out.checks.push_back({"p_q1_le_1_matches_1_over_n_plus_1", std::abs(phat - ref) <= 3.0 * se,
                          "empirical " + fmt(phat) + " vs " + fmt(ref) + ", se " + fmt(se)});
  return out;
}

ScenarioOutput limit_grid(const ExperimentConfig& c) {
  const Params p(c);
  std::vector<std::size_t> ells;
  for (double e : p.nums("ell")) {
    if (e < 1.0 || e != std::floor(e)) throw ConfigError("ell values must be positive integers");
    ells.push_back(static_cast<std::size_t>(e));
  }
  const double t0 = p.num("t_min"), t1 = p.num("t_max");
  const std::size_t pts = p.count("points");
  const std::size_t fn = p.count("finite_n");
  if (!(t0 > 0.0 && t1 >= t0) || pts == 0) throw ConfigError("need 0 < t_min <= t_max and points >= 1");
  std::vector<double> ts;
  for (std::size_t i = 0; i < pts; ++i)
    ts.push_back(pts == 1 ? t0 : t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(pts - 1));
  if (std::find(ts.begin(), ts.end(), 1.0) == ts.end()) {
    ts.push_back(1.0);
    std::sort(ts.begin(), ts.end());
  }
  ScenarioOutput out;
  std::string rows = fn ? "ell,t,limit,finite\n" : "ell,t,limit\n";
  double at_21 = std::nan("");
  for (std::size_t ell : ells)
    for (double t : ts) {
      const double v = limit_left_cdf(ell, t);
      if (ell == 2 && t == 1.0) at_21 = v;
      rows += std::to_string(ell) + "," + fmt(t) + "," + fmt(v);
      if (fn) {
        const auto f = finite_left_cdf(fn, ell, t);
        rows += "," + (f.out_of_bounds ? std::string("nan") : fmt(f.value));
      }
      rows += "\n";
    }
  out.files = {{"grid.csv", rows}};
  if (!std::isnan(at_21))
    out.checks.push_back({"ell2_t1_equals_0.375", std::abs(at_21 - 0.375) < 1e-12, "value " + fmt(at_21)});
  return out;
}

ScenarioOutput dispatch(const ExperimentConfig& c) {
  switch (c.scenario) {
    case ScenarioType::Table1_2:
      return table1_2(c);
    case ScenarioType::GEVSweep:
      return gev_sweep(c);
    case ScenarioType::BlockMaxima:
      return evt_parents(c, true);
    case ScenarioType::POT:
      return evt_parents(c, false);
    case ScenarioType::StableSweep:
      return stable_sweep(c);
    case ScenarioType::QuadraticReg:
      return misspecified_regression(c, ScenarioKind::Quadratic);
    case ScenarioType::MissingCovariateReg:
      return misspecified_regression(c, ScenarioKind::MissingCovariate);
    case ScenarioType::MRQAsymptotics:
      return mrq_asymptotics(c);
    case ScenarioType::LimitDistGrid:
      return limit_grid(c);
  }
  throw ConfigError("unknown scenario");
}

struct Preset {
  std::string name;
  ScenarioType scenario;
  std::size_t n;
  std::size_t full_reps;
  std::map<std::string, std::string> params;
};

const std::vector<Preset>& presets() {
  static const std::vector<Preset> list = {
      {"table1", ScenarioType::Table1_2, 300, 100, {}},
      {"table2", ScenarioType::Table1_2, 300, 100, {}},
      {"fig-gev", ScenarioType::GEVSweep, 500, 100, {}},
      {"fig-stable", ScenarioType::StableSweep, 300, 1000, {}},
      {"block-maxima", ScenarioType::BlockMaxima, 500, 100, {}},
      {"pot", ScenarioType::POT, 10000, 100, {}},
      {"quadratic", ScenarioType::QuadraticReg, 500, 500, {}},
      {"missing", ScenarioType::MissingCovariateReg, 500, 500, {}},
      {"mrq", ScenarioType::MRQAsymptotics, 1000, 10000, {}},
      {"limit-dist", ScenarioType::LimitDistGrid, 1, 1, {}},
  };
  return list;
}

void remove_files(const std::vector<std::filesystem::path>& files) {
  std::error_code ec;
  for (const auto& f : files) std::filesystem::remove(f, ec);
}

}  // namespace

std::string_view scenario_name(ScenarioType s) { return info(s).name; }

ScenarioType scenario_from_string(std::string_view name) {
  for (const auto& i : scenarios())
    if (i.name == name) return i.type;
  std::string valid;
  for (const auto& i : scenarios()) valid += (valid.empty() ? "" : ", ") + std::string(i.name);
  throw ConfigError("unknown scenario '" + std::string(name) + "' (valid: " + valid + ")");
}

const std::map<std::string, std::string>& scenario_defaults(ScenarioType s) { return info(s).defaults; }

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig c;
  bool in_params = false, have_scenario = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    if (line == "[params]") {
      in_params = true;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (in_params) {
      c.params[key] = value;
      continue;
    }
    if (key == "scenario") {
      c.scenario = scenario_from_string(value);
      have_scenario = true;
    } else if (key == "n") {
      c.n = to_count(key, value);
    } else if (key == "replications") {
      c.replications = to_count(key, value);
    } else if (key == "seed") {
      try {
        std::size_t used = 0;
        c.seed = std::stoull(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
      } catch (const std::exception&) {
        throw ConfigError("seed must be an unsigned 64-bit integer");
      }
    } else if (key == "output_dir") {
      c.output_dir = value;
    } else {
      throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  if (!have_scenario) throw ConfigError("config has no scenario");
  return c;
}

std::string format_config(const ExperimentConfig& c) {
  std::string s = "scenario = " + std::string(scenario_name(c.scenario)) + "\n";
  s += "n = " + std::to_string(c.n) + "\n";
  s += "replications = " + std::to_string(c.replications) + "\n";
  s += "seed = " + std::to_string(c.seed) + "\n";
  s += "output_dir = " + c.output_dir.string() + "\n";
  if (!c.params.empty()) {
    s += "[params]\n";
    for (const auto& [k, v] : c.params) s += k + " = " + v + "\n";
  }
  return s;
}

void validate(const ExperimentConfig& c) {
  if (c.replications == 0) throw ConfigError("replications must be at least 1");
  const auto& defaults = scenario_defaults(c.scenario);
  for (const auto& [k, v] : c.params)
    if (!defaults.contains(k)) {
      std::string valid;
      for (const auto& [dk, dv] : defaults) valid += (valid.empty() ? "" : ", ") + dk;
      throw ConfigError("scenario " + std::string(scenario_name(c.scenario)) + " has no param '" + k +
                        "' (valid: " + valid + ")");
    }
  const Params p(c);
  for (const auto& [k, dv] : defaults) {
    const std::string v = p.str(k);
    if (k == "errors") {
      for (const auto& e : split_list(v)) (void)error_spec(e);
    } else if (k == "methods") {
      for (const auto& m : split_list(v))
        if (m != "ols" && m != "nse" && m != "mle") throw ConfigError("unknown method '" + m + "'");
    } else if (k == "parents") {
      for (const auto& name : split_list(v)) check_parent(name);
    } else if (k == "lambda") {
      (void)IndexSet::parse(v).resolve(c.n);
    } else if (k == "xi" || k == "alpha" || k == "ell") {
      (void)to_doubles(k, v);
    } else {
      (void)to_double(k, v);
    }
  }
  for (const std::string k : {"n_reference", "restarts", "null_reps", "block_size", "points"})
    if (defaults.contains(k) && p.count(k) == 0) throw ConfigError("param '" + k + "' must be positive");
  if (defaults.contains("null_reps") && p.count("null_reps") < 2000)
    throw ConfigError("null_reps must be at least 2000");
  if (defaults.contains("quantile")) {
    const double q = p.num("quantile");
    if (!(q > 0.0 && q < 1.0)) throw ConfigError("quantile must lie in (0,1)");
  }
  switch (c.scenario) {
    case ScenarioType::Table1_2:
      if (c.n < 50) throw ConfigError("Table1_2 needs n >= 50");
      break;
    case ScenarioType::QuadraticReg:
    case ScenarioType::MissingCovariateReg:
      if (c.n < 50) throw ConfigError("regression scenarios need n >= 50");
      break;
    case ScenarioType::GEVSweep:
    case ScenarioType::BlockMaxima:
    case ScenarioType::POT:
      if (c.n < 30) throw ConfigError("extreme value scenarios need n >= 30");
      break;
    case ScenarioType::StableSweep:
    case ScenarioType::MRQAsymptotics:
      if (c.n < 2) throw ConfigError("n must be at least 2");
      break;
    case ScenarioType::LimitDistGrid:
      break;
  }
}

bool RunManifest::all_checks_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

nlohmann::json RunManifest::to_json() const {
  nlohmann::json j;
  j["version"] = version;
  j["csv_schema_version"] = kCsvSchemaVersion;
  j["config"] = {{"scenario", std::string(scenario_name(config.scenario))},
                 {"n", config.n},
                 {"replications", config.replications},
                 {"seed", config.seed},
                 {"output_dir", config.output_dir.string()},
                 {"params", config.params}};
  nlohmann::json eff = nlohmann::json::object();
  const Params p(config);
  for (const auto& [k, v] : scenario_defaults(config.scenario)) eff[k] = p.str(k);
  j["config"]["effective_params"] = eff;
  j["wall_seconds"] = wall_seconds;
  j["worker_count"] = worker_count();
  auto seeds = nlohmann::json::array();
  for (const auto& s : replication_seeds) seeds.push_back({s.seed, s.stream_id});
  j["replication_seeds"] = seeds;
  auto files = nlohmann::json::array();
  for (const auto& f : outputs) files.push_back({{"name", f.name}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  j["outputs"] = files;
  auto cs = nlohmann::json::array();
  for (const auto& c : checks) cs.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  j["checks"] = cs;
  return j;
}

RunManifest run(const ExperimentConfig& config) {
  validate(config);
  const auto t0 = std::chrono::steady_clock::now();
  ScenarioOutput res = dispatch(config);
  RunManifest m;
  m.config = config;
  m.replication_seeds = std::move(res.seeds);
  m.checks = std::move(res.checks);

  std::vector<std::filesystem::path> written;
  try {
    std::filesystem::create_directories(config.output_dir);
    for (const auto& f : res.files) {
      const auto path = config.output_dir / f.name;
      std::ofstream out(path, std::ios::binary);
      written.push_back(path);
      out << f.text;
      if (!out) throw ConfigError("cannot write " + path.string());
      m.outputs.push_back({f.name, sha256_hex(f.text), f.text.size()});
    }
    m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto path = config.output_dir / "manifest.json";
    std::ofstream out(path);
    written.push_back(path);
    out << m.to_json().dump(2) << "\n";
    if (!out) throw ConfigError("cannot write " + path.string());
  } catch (...) {
    remove_files(written);
    throw;
  }
  return m;
}

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& p : presets()) out.push_back(p.name);
  return out;
}

ExperimentConfig preset(std::string_view name, double scale, std::uint64_t seed, const std::filesystem::path& out) {
  if (!(scale > 0.0)) throw ConfigError("scale must be positive");
  for (const auto& p : presets()) {
    if (p.name != name) continue;
    ExperimentConfig c;
    c.scenario = p.scenario;
    c.n = p.n;
    c.replications = p.scenario == ScenarioType::LimitDistGrid
                         ? 1
                         : std::max<std::size_t>(10, static_cast<std::size_t>(std::floor(
                                                         static_cast<double>(p.full_reps) * scale + 1e-9)));
    c.seed = seed;
    c.params = p.params;
    c.output_dir = out;
    return c;
  }
  std::string valid;
  for (const auto& n : preset_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw ConfigError("unknown preset '" + std::string(name) + "' (valid: " + valid + ")");
}

RunManifest reproduce(std::string_view name, double scale, std::uint64_t seed, const std::filesystem::path& out) {
  return run(preset(name, scale, seed, out));
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw NumericError("SHA-256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string s;
  for (unsigned int i = 0; i < len; ++i) {
    s += hex[md[i] >> 4];
    s += hex[md[i] & 15];
  }
  return s;
}

std::string sha256_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

}  // namespace nse

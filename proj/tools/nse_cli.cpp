#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "nse/distributions.hpp"
#include "nse/error.hpp"
#include "nse/exact_combinatorics.hpp"
#include "nse/extreme_value.hpp"
#include "nse/gof_tests.hpp"
#include "nse/harness.hpp"
#include "nse/nse_estimator.hpp"
#include "nse/parallel.hpp"
#include "nse/ranked_quotients.hpp"
#include "nse/regression.hpp"

using nlohmann::json;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitCheck = 4;

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.15g", x);
  return buf;
}

// One numeric column from a CSV. A non-numeric first line is a header; `column`
// picks by name, otherwise the first column is used.
std::vector<double> read_column(const std::string& path, const std::string& column) {
  std::ifstream in(path);
  if (!in) throw nse::ConfigError("cannot open " + path);
  auto fields = [](const std::string& line) {
    std::vector<std::string> f;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    return f;
  };
  auto parse = [](const std::string& s, double& out) {
    try {
      std::size_t used = 0;
      out = std::stod(s, &used);
      while (used < s.size() && std::isspace(static_cast<unsigned char>(s[used]))) ++used;
      return used == s.size();
    } catch (const std::exception&) {
      return false;
    }
  };
  std::vector<double> data;
  std::string line;
  std::size_t col = 0, row = 0;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = fields(line);
    double v = 0.0;
    if (first) {
      first = false;
      if (!parse(f[0], v) || !column.empty()) {
        if (column.empty()) continue;
        const auto it = std::find(f.begin(), f.end(), column);
        if (it == f.end()) throw nse::ConfigError("column '" + column + "' not found in " + path);
        col = static_cast<std::size_t>(it - f.begin());
        continue;
      }
    }
    if (col >= f.size() || !parse(f[col], v) || !std::isfinite(v))
      throw nse::DataError("row " + std::to_string(row) + ": missing or non-numeric value", row);
    data.push_back(v);
    ++row;
  }
  if (data.empty()) throw nse::DataError("no data rows in " + path, 0);
  return data;
}

json theta_json(nse::Family family, const std::vector<double>& theta) {
  json j = json::object();
  const auto& names = nse::parameter_names(family);
  for (std::size_t i = 0; i < theta.size(); ++i) j[names[i]] = theta[i];
  return j;
}

std::pair<std::size_t, double> parse_ci(const std::string& text) {
  std::size_t m = 200;
  double alpha = 0.05;
  std::istringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw nse::ConfigError("--ci expects m=<count>,alpha=<level>");
    const std::string k = item.substr(0, eq), v = item.substr(eq + 1);
    try {
      if (k == "m")
        m = std::stoul(v);
      else if (k == "alpha")
        alpha = std::stod(v);
      else
        throw nse::ConfigError("--ci: unknown key '" + k + "'");
    } catch (const std::logic_error&) {
      throw nse::ConfigError("--ci: bad value for '" + k + "'");
    }
  }
  return {m, alpha};
}

std::vector<double> grid(double lo, double hi, std::size_t points) {
  if (!(lo > 0.0 && hi >= lo) || points == 0) throw nse::ConfigError("need 0 < t-min <= t-max and points >= 1");
  std::vector<double> t;
  for (std::size_t i = 0; i < points; ++i)
    t.push_back(points == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1));
  return t;
}

int print_manifest(const nse::RunManifest& m, bool check) {
  std::cout << m.to_json().dump(2) << "\n";
  for (const auto& c : m.checks)
    std::cerr << (c.passed ? "check ok: " : "check FAILED: ") << c.name << " (" << c.detail << ")\n";
  return check && !m.all_checks_passed() ? kExitCheck : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ranked-quotient estimation and simulation toolkit"};
  app.require_subcommand(1);
  std::size_t workers = 0;
  app.add_option("--workers", workers, "Worker threads (0 = hardware concurrency)");
  app.set_version_flag("--version", std::string(nse::kVersion));

  std::function<int()> action;

  // fit
  auto* fit = app.add_subcommand("fit", "Fit a distribution family to one data column");
  std::string family, data_path, column, lambda = "mid:0.1:0.9", ci, method = "nse";
  std::uint64_t seed = 1;
  std::size_t n_ref = 10;
  fit->add_option("--family", family, "Family template, e.g. gev or normal()")->required();
  fit->add_option("--data", data_path, "CSV file")->required();
  fit->add_option("--column", column, "Column name (default: first)");
  fit->add_option("--lambda", lambda, "Index set: full, left:k, right:k, mid:a:b")->capture_default_str();
  fit->add_option("--seed", seed)->capture_default_str();
  fit->add_option("--method", method, "nse or ks")->check(CLI::IsMember({"nse", "ks"}))->capture_default_str();
  fit->add_option("--n-reference", n_ref)->capture_default_str();
  fit->add_option("--ci", ci, "Confidence set, e.g. m=200,alpha=0.05");
  fit->callback([&] {
    action = [&] {
      nse::EstimationProblem p;
      p.family = nse::parse_spec(family).family;
      p.data = read_column(data_path, column);
      p.lambda = nse::IndexSet::parse(lambda);
      p.n_reference = n_ref;
      const auto r = method == "ks" ? nse::ks_fit(p, {seed, 0}) : nse::fit(p, {seed, 0});
      json out = {{"family", std::string(nse::family_name(p.family))},
                  {"method", method},
                  {"theta_hat", theta_json(p.family, r.theta_hat)},
                  {"loss", r.loss_value},
                  {"converged", r.converged},
                  {"ci", nullptr}};
      if (!ci.empty()) {
        const auto [m, alpha] = parse_ci(ci);
        const auto cs = nse::confidence_set(p, m, alpha, {seed, 0});
        out["ci"] = {{"lo", theta_json(p.family, cs.lo)},
                     {"hi", theta_json(p.family, cs.hi)},
                     {"m", cs.m},
                     {"alpha", cs.alpha},
                     {"dropped", cs.dropped},
                     {"ranks", {cs.lo_rank, cs.hi_rank}}};
      }
      std::cout << out.dump(2) << "\n";
      return 0;
    };
  });

  // test
  auto* test = app.add_subcommand("test", "Normality test on one data column");
  std::string test_method = "nse";
  std::size_t null_reps = 2000;
  test->add_option("--method", test_method)->check(CLI::IsMember({"jb", "lilliefors", "nse"}))->capture_default_str();
  test->add_option("--data", data_path)->required();
  test->add_option("--column", column);
  test->add_option("--seed", seed)->capture_default_str();
  test->add_option("--null-reps", null_reps)->capture_default_str();
  test->callback([&] {
    action = [&] {
      const auto x = read_column(data_path, column);
      nse::TestResult r;
      if (test_method == "jb") {
        r = nse::jarque_bera(x);
      } else if (test_method == "lilliefors") {
        r = nse::lilliefors(x, nse::cached_lilliefors_table(x.size(), null_reps));
      } else {
        nse::NseTestConfig cfg;
        cfg.null_reps = null_reps;
        r = nse::nse_normality_test(x, cfg, {seed, 0});
      }
      json out = {{"method", std::string(nse::test_method_name(r.method))},
                  {"statistic", r.statistic},
                  {"p_value", r.p_value},
                  {"reject_at_05", r.reject_at_05}};
      if (r.interval) out["acceptance_interval"] = {r.interval->first, r.interval->second};
      std::cout << out.dump(2) << "\n";
      return 0;
    };
  });

  // mrq
  auto* mrq = app.add_subcommand("mrq", "Ranked quotients between two samples");
  std::string x_path, y_path;
  mrq->add_option("--x", x_path, "CSV with the first sample")->required();
  mrq->add_option("--y", y_path, "CSV with the second sample")->required();
  mrq->add_option("--lambda", lambda)->capture_default_str();
  mrq->callback([&] {
    action = [&] {
      const auto x = nse::order_stats(read_column(x_path, ""));
      const auto y = nse::order_stats(read_column(y_path, ""));
      const auto q = nse::mrq(x, y, nse::IndexSet::parse(lambda));
      std::cout << json{{"q1", q.q1}, {"q2", q.q2}, {"g", nse::g_loss(q.q1, q.q2)}}.dump(2) << "\n";
      return 0;
    };
  });

  // limit-dist / exact-cdf
  double t_min = 0.1, t_max = 10.0;
  std::size_t points = 100, ell = 1, n = 0;
  auto* limit = app.add_subcommand("limit-dist", "Left-end limit CDF grid as CSV");
  limit->add_option("--ell", ell)->capture_default_str();
  limit->add_option("--n", n, "Also emit the finite-n CDF for this sample size");
  limit->add_option("--t-min", t_min)->capture_default_str();
  limit->add_option("--t-max", t_max)->capture_default_str();
  limit->add_option("--points", points)->capture_default_str();
  limit->callback([&] {
    action = [&] {
      const auto ts = grid(t_min, t_max, points);
      std::cout << (n ? "t,limit,finite\n" : "t,limit\n");
      for (double t : ts) {
        std::cout << num(t) << "," << num(nse::limit_left_cdf(ell, t));
        if (n) {
          const auto f = nse::finite_left_cdf(n, ell, t);
          std::cout << "," << (f.out_of_bounds ? std::string("nan") : num(f.value));
        }
        std::cout << "\n";
      }
      return 0;
    };
  });
  auto* exact = app.add_subcommand("exact-cdf", "Exact full-set quotient CDF grid as CSV");
  exact->add_option("--n", n)->required();
  exact->add_option("--t-min", t_min)->capture_default_str();
  exact->add_option("--t-max", t_max)->capture_default_str();
  exact->add_option("--points", points)->capture_default_str();
  exact->callback([&] {
    action = [&] {
      const auto ts = grid(t_min, t_max, points);
      std::cout << "t,cdf\n";
      for (double t : ts) std::cout << num(t) << "," << num(nse::exact_full_mrq_cdf(n, t)) << "\n";
      return 0;
    };
  });

  // evt
  auto* evt = app.add_subcommand("evt", "GEV or GPD fit");
  std::string model, evt_method = "nse";
  std::optional<double> threshold, quantile_level;
  std::size_t block = 0;
  evt->add_option("model", model, "gev or gpd")->required()->check(CLI::IsMember({"gev", "gpd"}));
  evt->add_option("--method", evt_method)->check(CLI::IsMember({"mle", "nse"}))->capture_default_str();
  evt->add_option("--data", data_path)->required();
  evt->add_option("--column", column);
  evt->add_option("--seed", seed)->capture_default_str();
  evt->add_option("--block-size", block, "gev: take maxima over blocks of this size first");
  evt->add_option("--threshold", threshold, "gpd: fixed threshold");
  evt->add_option("--quantile", quantile_level, "gpd: threshold at this sample quantile");
  evt->callback([&] {
    action = [&] {
      auto x = read_column(data_path, column);
      nse::EvtFit f;
      std::vector<std::string> names;
      const nse::RngSeed s{seed, 0};
      if (model == "gev") {
        if (block) x = nse::block_maxima(x, {block, x.size() / block}).maxima;
        f = evt_method == "mle" ? nse::gev_mle(x, {}, s) : nse::gev_nse(x, s);
        names = {"mu", "sigma", "xi"};
      } else {
        if (threshold || quantile_level) {
          nse::ThresholdSpec spec;
          spec.threshold = threshold;
          spec.quantile = quantile_level;
          x = nse::excesses(x, spec);
        }
        f = evt_method == "mle" ? nse::gpd_mle(x, {}, s) : nse::gpd_nse(x, s);
        names = {"sigma", "xi"};
      }
      json theta = json::object();
      for (std::size_t i = 0; i < names.size(); ++i) theta[names[i]] = f.result.theta_hat[i];
      std::cout << json{{"model", model},
                        {"method", evt_method},
                        {"n", x.size()},
                        {"theta_hat", theta},
                        {"loss", f.result.loss_value},
                        {"converged", f.result.converged},
                        {"regime", std::string(nse::regime_name(f.regime))}}
                       .dump(2)
                << "\n";
      return 0;
    };
  });

  // regress
  auto* regress = app.add_subcommand("regress", "Linear regression by OLS or ranked-quotient fit");
  std::string response, reg_method = "nse", error_family = "normal";
  regress->add_option("--data", data_path)->required();
  regress->add_option("--response", response)->required();
  regress->add_option("--method", reg_method)->check(CLI::IsMember({"ols", "nse"}))->capture_default_str();
  regress->add_option("--error-family", error_family)->capture_default_str();
  regress->add_option("--seed", seed)->capture_default_str();
  regress->callback([&] {
    action = [&] {
      std::ifstream in(data_path);
      if (!in) throw nse::ConfigError("cannot open " + data_path);
      const auto data = nse::read_regression_csv(in, response);
      nse::RegressionFit f;
      if (reg_method == "ols") {
        f = nse::ols_fit(data);
      } else {
        nse::NseRegressionOptions opt;
        opt.error_family = {nse::parse_spec(error_family).family, {}};
        f = nse::nse_regression_fit(data, opt, {seed, 0});
      }
      std::vector<double> beta(f.beta_hat.data(), f.beta_hat.data() + f.beta_hat.size());
      std::cout << json{{"method", reg_method},
                        {"mu", f.mu_hat},
                        {"beta", beta},
                        {"sigma", f.sigma_hat},
                        {"loss", f.loss_value},
                        {"degenerate", f.degenerate}}
                       .dump(2)
                << "\n";
      return 0;
    };
  });

  // run / reproduce
  auto* run = app.add_subcommand("run", "Run an experiment config file");
  std::string config_path;
  bool check = true;
  run->add_option("config", config_path)->required();
  run->add_flag("--check,!--no-check", check, "Exit 4 when a scenario check fails")->capture_default_str();
  run->callback([&] {
    action = [&] {
      std::ifstream in(config_path);
      if (!in) throw nse::ConfigError("cannot open " + config_path);
      return print_manifest(nse::run(nse::parse_config(in)), check);
    };
  });
  auto* rep = app.add_subcommand("reproduce", "Run a named preset at reduced scale");
  std::string preset, out_dir = "out";
  double scale = 0.2;
  std::uint64_t rep_seed = 20240501;
  bool list = false;
  rep->add_option("name", preset);
  rep->add_option("--scale", scale)->capture_default_str();
  rep->add_option("--seed", rep_seed)->capture_default_str();
  rep->add_option("--out", out_dir)->capture_default_str();
  rep->add_flag("--list", list, "List preset names");
  rep->add_flag("--check,!--no-check", check)->capture_default_str();
  rep->callback([&] {
    action = [&] {
      if (list || preset.empty()) {
        for (const auto& p : nse::preset_names()) std::cout << p << "\n";
        return preset.empty() && !list ? kExitValidation : 0;
      }
      const auto cfg = nse::preset(preset, scale, rep_seed, std::filesystem::path(out_dir) / preset);
      return print_manifest(nse::run(cfg), check);
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }
  try {
    if (workers) nse::set_worker_count(workers);
    return action();
  } catch (const nse::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == nse::Error::Kind::Numeric ? kExitNumeric : kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
}

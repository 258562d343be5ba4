// Acceptance suite: one PASS/FAIL line per criterion, exit code 1 if any
// criterion fails. Run outputs (config.json, results.json, table.csv,
// plot.svg) are written under --out.

#include "eol/experiment.hpp"
#include "eol/network_simplex.hpp"
#include "eol/sinkhorn.hpp"
#include "eol/wasserstein1d.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace {

using nlohmann::json;
constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string out_dir;

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

eol::ResultRecord run(const json& config, const std::string& name, int threads = 0) {
  const auto c = eol::parse_config(config);
  const auto record = eol::run_experiment(c, {.threads = threads});
  eol::write_outputs(record, out_dir + "/" + name);
  return record;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

eol::RateReport slope_of(const std::vector<eol::ResultRow>& rows) {
  std::vector<double> t, v, se;
  for (const auto& r : rows) {
    t.push_back(r.t);
    v.push_back(r.mean);
    se.push_back(r.stderr_);
  }
  return eol::fit_rate(t, v, se);
}

json ou_bracket_config() {
  return {{"name", "ou1d-bracket"}, {"model", "ou-1d"}, {"horizons", {25, 50, 100, 200}}, {"h", 0.01},
          {"replicas", 200}, {"seed", 2024}, {"statistics", {"w2sq"}}, {"bounds", {"bracket", "upper"}},
          {"tolerance", 0.12}};
}

json xi_config() {
  return {{"name", "xi-variance"}, {"model", "ou-1d"}, {"horizons", {10}}, {"h", 0.01}, {"replicas", 1000},
          {"seed", 77}, {"statistics", {"xi_sq"}}, {"modes", {1, 2, 3}}};
}

// Scaled value t E[W_2^2] at the largest horizon inside [S2 (1 - tol), S8 (1 + tol)]
// and slope -1 +- 0.12.
Outcome bracket_and_slope(const eol::ResultRecord& rec, const eol::DiffusionModel& model) {
  const auto rows = rec.rows_for("w2sq");
  const double scaled = rows.back().t * rows.back().mean;
  const double s2 = eol::spectral_sum(model, 2.0).value, s8 = eol::spectral_sum(model, 8.0).value;
  const double lo = 0.8 * s2, hi = 1.2 * s8;
  const auto fit = slope_of(rows);
  const bool ok = scaled >= lo && scaled <= hi && std::abs(fit.slope + 1.0) <= 0.12;
  return {ok, fmt("t*E[W2^2](t=%g) = %.4f in [%.3f, %.3f]; slope %.4f (CI [%.3f, %.3f]), target -1 +- 0.12",
                  rows.back().t, scaled, lo, hi, fit.slope, fit.ci_low, fit.ci_high)};
}

Outcome ac1() {
  const auto rec = run(ou_bracket_config(), "ac1_ou1d");
  return bracket_and_slope(rec, eol::ou_model(1));
}

Outcome ac2() {
  json d1 = ou_bracket_config();
  d1["name"] = "torus1d-bracket";
  d1["model"] = "torus-1d";
  d1["bounds"] = {"bracket"};
  const auto r1 = run(d1, "ac2_torus1d");
  const Outcome one = bracket_and_slope(r1, eol::torus_model(1));

  const json d3 = {{"name", "torus3d-rate"}, {"model", "torus-3d"}, {"horizons", {25, 50, 100, 200}},
                   {"h", 0.01}, {"replicas", 40}, {"seed", 303}, {"statistics", {"w2sq"}},
                   {"distance", {{"m", 2048}, {"solver", "lp"}}}, {"tolerance", 0.2}};
  const auto r3 = run(d3, "ac2_torus3d");
  const auto fit = slope_of(r3.rows_for("w2sq"));
  const bool three = std::abs(fit.slope + 1.0) <= 0.2;

  // Sinkhorn against the exact LP on path measures thinned to 1024 atoms.
  const auto model = eol::torus_model(3);
  double worst = 0.0;
  for (std::uint64_t r = 0; r < 3; ++r) {
    const auto traj = eol::simulate_path(model, eol::InitialDistribution::stationary(), 50.0, 0.01, 303, r);
    const auto emp = eol::empirical_measure(traj, 50.0);
    Eigen::MatrixXd atoms(3, 1024);
    for (int i = 0; i < 1024; ++i) atoms.col(i) = emp.atoms.col(i * (emp.size() / 1024));
    const auto a = eol::EmpiricalMeasure::uniform(atoms);
    const auto b = eol::EmpiricalMeasure::uniform(model.sample_mu(1024, 303, r));
    const auto cost = eol::CostSpec::rho_power(2.0);
    const double lp = eol::wp_discrete(a, b, model.domain(), cost).cost;
    const double sk = eol::wp_sinkhorn(a, b, model.domain(), cost).cost;
    worst = std::max(worst, std::abs(sk - lp) / lp);
  }
  const bool cross = worst <= 1e-3;
  return {one.pass && three && cross,
          "d=1: " + one.detail +
              fmt(" | d=3: slope %.4f (CI [%.3f, %.3f]), target -1 +- 0.2 | Sinkhorn/LP worst gap %.2e (<= 1e-3)",
                  fit.slope, fit.ci_low, fit.ci_high, worst)};
}

// Torus d = 5 shares one run between the W_2 slope and the truncated-cost slope.
eol::ResultRecord torus5_record() {
  static const eol::ResultRecord rec = [] {
    const json c = {{"name", "torus5d-rate"}, {"model", "torus-5d"}, {"horizons", {25, 50, 100, 200}},
                    {"h", 0.01}, {"replicas", 50}, {"seed", 505}, {"statistics", {"w2sq", "w1tilde"}},
                    {"distance", {{"m", 2048}, {"solver", "lp"}}}, {"tolerance", 0.2}};
    return run(c, "ac3_ac8_torus5d");
  }();
  return rec;
}

Outcome ac3() {
  const auto fit = slope_of(torus5_record().rows_for("w2sq"));
  const double target = -2.0 / 3.0;
  return {std::abs(fit.slope - target) <= 0.2,
          fmt("slope %.4f (CI [%.3f, %.3f]), target %.4f +- 0.2", fit.slope, fit.ci_low, fit.ci_high, target)};
}

Outcome ac4() {
  const auto rec = run(xi_config(), "ac4_xi");
  std::string detail;
  bool ok = true;
  for (int i = 1; i <= 3; ++i) {
    const auto row = rec.rows_for("xi" + std::to_string(i) + "_sq").front();
    const double exact = eol::xi_variance_exact(i, 10.0);
    const double z = (row.mean - exact) / row.stderr_;
    ok = ok && std::abs(z) <= 4.0;
    detail += fmt("i=%d MC %.5f exact %.5f z=%+.2f; ", i, row.mean, exact, z);
  }
  int grid_violations = 0;
  for (int a = 0; a < 100; ++a)
    for (int b = 0; b < 100; ++b) {
      const double lambda = std::pow(10.0, -3.0 + 6.0 * a / 99.0), t = std::pow(10.0, -3.0 + 7.0 * b / 99.0);
      if (eol::xi_variance_exact(lambda, t) > 2.0 / (lambda * t)) ++grid_violations;
    }
  ok = ok && grid_violations == 0;
  return {ok, detail + fmt("grid violations %d / 10000", grid_violations)};
}

Outcome ac5() {
  eol::SuiteOptions opts;
  opts.trials = 200;
  const auto res = eol::appendix_check(opts);
  const bool ok = res.violations == 0 && res.cases == 600 && res.max_check_error <= 1e-8;
  return {ok, fmt("%d violations / %d cases (p in {1.5, 2, 3}); min bound/cost %.4f; log-mean form vs "
                  "quadrature max error %.2e (<= 1e-8)",
                  res.violations, res.cases, res.min_ratio, res.max_check_error)};
}

Outcome ac6() {
  eol::SuiteOptions opts;
  opts.trials = 200;
  const auto res = eol::ledoux_check(opts);
  return {res.violations == 0 && res.cases == 200,
          fmt("%d violations / %d; min bound/W2^2 %.4f", res.violations, res.cases, res.min_ratio)};
}

Outcome ac7() {
  struct Case {
    int d;
    double p;
  };
  std::string detail;
  bool ok = true;
  for (const Case c : {Case{3, 2.0}, Case{1, 2.0}, Case{2, 3.0}, Case{2, 2.0}}) {
    const auto pred = eol::rate_exponent_prediction(c.d, c.p);
    const eol::PowerLaw gt{1.0, pred.gamma_tilde};
    const eol::RateFunction alpha = [](double e) { return e; };
    const eol::RateFunction beta = [&](double e) { return eol::beta_fn(gt, e); };
    std::vector<double> ts, vs;
    for (int k = 0; k <= 8; ++k) {
      const double t = std::pow(10.0, 2.0 + 0.5 * k);
      ts.push_back(t);
      vs.push_back(eol::upper_bound_opt(alpha, beta, t, 1.0, 1.0, 1e-14).value);
    }
    eol::FitOptions fo;
    fo.log_correction = pred.log_factor;
    const auto fit = eol::fit_rate(ts, vs, {}, fo);
    const double rel = std::abs(-fit.slope - pred.upper) / pred.upper;
    // The log factor is detected when the uncorrected fit falls short of the
    // exponent by more than the tolerance while the corrected one does not.
    bool log_ok = true;
    if (pred.log_factor) {
      const auto plain = eol::fit_rate(ts, vs);
      log_ok = std::abs(-plain.slope - pred.upper) / pred.upper > 0.02;
    }
    ok = ok && rel <= 0.02 && log_ok;
    detail += fmt("(d=%d,p=%g) slope %.5f vs -%.4f%s rel %.2e; ", c.d, c.p, fit.slope, pred.upper,
                  pred.log_factor ? " (log-corrected)" : "", rel);
  }
  return {ok, detail};
}

Outcome ac8() {
  const json c = {{"name", "ou1d-lower"}, {"model", "ou-1d"}, {"horizons", {50, 100, 200}}, {"h", 0.01},
                  {"replicas", 100}, {"seed", 808}, {"statistics", {"w1tilde_sq"}}};
  const auto rec = run(c, "ac8_ou1d_lower");
  const auto rows = rec.rows_for("w1tilde_sq");
  double lo = INFINITY;
  for (const auto& r : rows) lo = std::min(lo, r.t * r.mean);
  const double first = rows.front().t * rows.front().mean;
  const bool plateau = lo > 0.25 * first;

  const auto fit = slope_of(torus5_record().rows_for("w1tilde"));
  const double floor = -1.0 / 3.0 - 0.1;
  const bool slope_ok = fit.slope >= floor;
  return {plateau && slope_ok,
          fmt("(i) min t*E[W1t^2] = %.4f vs 25%% of %.4f; (ii) torus d=5 slope of E[W1t] %.4f (CI [%.3f, %.3f]) "
              ">= %.4f",
              lo, first, fit.slope, fit.ci_low, fit.ci_high, floor)};
}

Outcome ac9() {
  eol::RngCursor rng(eol::CounterRng(909, 0, eol::Stream::synthetic));
  const auto plane = eol::DomainSpec::euclidean(2);
  const auto cost2 = eol::CostSpec::rho_power(2.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::MatrixXd x(2, 64), y(2, 64);
    for (int i = 0; i < 64; ++i) {
      x.col(i) << rng.normal(), rng.normal();
      y.col(i) << 1.0 + 1.5 * rng.normal(), rng.normal();
    }
    const auto a = eol::EmpiricalMeasure::uniform(x), b = eol::EmpiricalMeasure::uniform(y);
    const double lp = eol::wp_discrete(a, b, plane, cost2).cost;
    const double sk = eol::wp_sinkhorn(a, b, plane, cost2).cost;
    worst = std::max(worst, std::abs(sk - lp) / lp);
  }

  const auto line = eol::DomainSpec::euclidean(1);
  double worst_1d = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 64, m = 64 - trial % 50;
    Eigen::MatrixXd x(1, n), y(1, m);
    for (int i = 0; i < n; ++i) x(0, i) = rng.normal();
    for (int i = 0; i < m; ++i) y(0, i) = 0.5 + 2.0 * rng.normal();
    auto a = eol::EmpiricalMeasure::uniform(x), b = eol::EmpiricalMeasure::uniform(y);
    for (int i = 0; i < n; ++i) a.weights[i] = 0.2 + rng.uniform();
    a.weights /= a.weights.sum();
    const double q = eol::w2_exact_1d(a, b);
    const double lp = eol::wp_discrete(a, b, line, cost2).value;
    worst_1d = std::max(worst_1d, std::abs(q - lp) / lp);
  }

  int sym = 0, tri = 0;
  const auto torus = eol::DomainSpec::torus(2);
  for (int trial = 0; trial < 200; ++trial) {
    const auto& dom = trial % 2 ? plane : torus;
    std::vector<eol::EmpiricalMeasure> ms;
    for (int k = 0; k < 3; ++k) {
      const int n = 4 + (trial + k) % 7;
      Eigen::MatrixXd x(2, n);
      for (int i = 0; i < n; ++i) x.col(i) << 3.0 * rng.uniform(), 3.0 * rng.uniform();
      auto m = eol::EmpiricalMeasure::uniform(x);
      for (int i = 0; i < n; ++i) m.weights[i] = 0.1 + rng.uniform();
      m.weights /= m.weights.sum();
      ms.push_back(m);
    }
    for (const auto& cost : {cost2, eol::CostSpec::rho_power(1.0), eol::CostSpec::truncated()}) {
      const double ab = eol::wp_discrete(ms[0], ms[1], dom, cost).value;
      const double ba = eol::wp_discrete(ms[1], ms[0], dom, cost).value;
      const double ac = eol::wp_discrete(ms[0], ms[2], dom, cost).value;
      const double cb = eol::wp_discrete(ms[2], ms[1], dom, cost).value;
      if (std::abs(ab - ba) > 1e-10) ++sym;
      if (ab > ac + cb + 1e-12) ++tri;
    }
  }
  const bool ok = worst <= 1e-3 && worst_1d <= 1e-8 && sym == 0 && tri == 0;
  return {ok, fmt("Sinkhorn/LP worst gap %.2e (<= 1e-3); quantile/LP worst %.2e (<= 1e-8); symmetry "
                  "violations %d, triangle violations %d over 600 checks",
                  worst, worst_1d, sym, tri)};
}

Outcome ac10() {
  std::string detail;
  bool ok = true;
  for (const auto& [config, name] : {std::pair{ou_bracket_config(), std::string("ac1_ou1d")},
                                     std::pair{xi_config(), std::string("ac4_xi")}}) {
    const std::string reference = out_dir + "/" + name + "/table.csv";
    if (!std::filesystem::exists(reference)) run(config, name);
    for (int threads : {1, 4}) {
      const std::string rerun = name + "_threads" + std::to_string(threads);
      run(config, rerun, threads);
      const bool same = read_file(reference) == read_file(out_dir + "/" + rerun + "/table.csv");
      ok = ok && same;
      detail += fmt("%s threads=%d %s; ", name.c_str(), threads, same ? "identical" : "DIFFERENT");
    }
  }
  return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  out_dir = "acceptance_runs";
  std::vector<std::string> only;
  app.add_option("--out", out_dir, "Directory for run outputs");
  app.add_option("--only", only, "Run only these criteria (e.g. AC4 AC7)");
  CLI11_PARSE(app, argc, argv);
  std::filesystem::create_directories(out_dir);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"AC1", ac1}, {"AC2", ac2}, {"AC3", ac3}, {"AC4", ac4}, {"AC5", ac5},
      {"AC6", ac6}, {"AC7", ac7}, {"AC8", ac8}, {"AC9", ac9}, {"AC10", ac10}};
  const std::set<std::string> selected(only.begin(), only.end());
  int failed = 0;
  for (const auto& [id, fn] : criteria) {
    if (!selected.empty() && !selected.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failed;
    std::printf("%s %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}

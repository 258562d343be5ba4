#include "eol/experiment.hpp"
#include "eol/rates.hpp"
#include "eol/transport.hpp"
#include "eol/wasserstein1d.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

enum Exit { kOk = 0, kUsage = 1, kNumerical = 2, kVerdict = 3 };

std::atomic<bool> g_cancel{false};

extern "C" void on_sigint(int) { g_cancel.store(true); }

struct Common {
  std::string config;
  std::uint64_t seed = 1;
  int threads = 0;
  std::string out;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw UsageError("cannot open " + path);
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw UsageError(path + ": " + e.what());
  }
}

std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw eol::Error("cannot write " + path.string());
  f << text;
}

std::string fmt(double x, int digits = 12) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

// Atoms from CSV. "weight,x1,..." gives weighted atoms; a trajectory file
// ("t,x1,...") gives uniform weights on every state but the last.
eol::EmpiricalMeasure read_measure(const std::string& path) {
  std::istringstream is(read_text(path));
  std::string line, header;
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header.empty()) {
      header = line;
      continue;
    }
    std::vector<double> row;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  const bool trajectory = header.rfind("t,", 0) == 0;
  if (!trajectory && header.rfind("weight,", 0) != 0)
    throw UsageError(path + ": header must start with 'weight,' or 't,'");
  if (trajectory && rows.size() > 1) rows.pop_back();
  if (rows.empty()) throw UsageError(path + ": no atoms");
  const auto d = static_cast<Eigen::Index>(rows[0].size()) - 1;
  eol::EmpiricalMeasure m;
  m.atoms.resize(d, static_cast<Eigen::Index>(rows.size()));
  m.weights.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != d + 1) throw UsageError(path + ": ragged rows");
    m.weights[i] = trajectory ? 1.0 : rows[i][0];
    for (Eigen::Index k = 0; k < d; ++k) m.atoms(k, i) = rows[i][k + 1];
  }
  m.weights /= m.weights.sum();
  m.validate(1e-9);
  return m;
}

std::string header_line(const std::string& hash, std::uint64_t seed) {
  return "# config_hash=" + hash + " seed=" + std::to_string(seed) + "\n";
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string model = "ou-1d";
  double t = 10.0;
  double h = 0.01;
  std::uint64_t replica = 0;
  std::vector<double> x0;
};

int cmd_simulate(const Common& common, SimulateArgs a) {
  json cfg{{"command", "simulate"}, {"model", a.model}, {"t", a.t}, {"h", a.h},
           {"replica", a.replica},  {"seed", common.seed}};
  if (!a.x0.empty()) cfg["x0"] = a.x0;
  const eol::DiffusionModel model = eol::model_from_id(a.model);
  const auto init = a.x0.empty()
                        ? eol::InitialDistribution::stationary()
                        : eol::InitialDistribution::dirac(
                              Eigen::Map<const Eigen::VectorXd>(a.x0.data(), static_cast<Eigen::Index>(a.x0.size())));
  const eol::Trajectory path = eol::simulate_path(model, init, a.t, a.h, common.seed, a.replica);
  const std::string hash = eol::config_hash(cfg);
  std::ostringstream os;
  os << header_line(hash, common.seed) << "t";
  for (int k = 0; k < model.dim(); ++k) os << ",x" << k + 1;
  os << '\n';
  for (Eigen::Index j = 0; j <= path.steps(); ++j) {
    os << fmt(path.time(j), 17);
    for (int k = 0; k < model.dim(); ++k) os << ',' << fmt(path.states(k, j), 17);
    os << '\n';
  }
  const fs::path dir = common.out.empty() ? "." : common.out;
  write_text(dir / "trajectory.csv", os.str());
  json res{{"config_hash", hash}, {"seed", common.seed}, {"version", eol::kVersion},
           {"config", cfg},       {"steps", path.steps()}, {"file", "trajectory.csv"}};
  write_text(dir / "results.json", res.dump(2) + "\n");
  std::cout << "wrote " << (dir / "trajectory.csv").string() << " (" << path.steps() + 1 << " states)\n";
  return kOk;
}

// ---------------------------------------------------------------- distance

struct DistanceArgs {
  std::string a, b;
  std::string model = "ou-1d";
  std::string cost = "w2";  // w2 | wp | w1t
  double p = 2.0;
  std::string solver = "auto";  // auto | lp | sinkhorn | quantile
  Eigen::Index m = 2048;
};

int cmd_distance(const Common& common, const DistanceArgs& a) {
  const eol::DiffusionModel model = eol::model_from_id(a.model);
  const eol::CostSpec cost = a.cost == "w1t" ? eol::CostSpec::truncated()
                                             : eol::CostSpec::rho_power(a.cost == "w2" ? 2.0 : a.p);
  const eol::EmpiricalMeasure ma = read_measure(a.a);
  json res{{"model", a.model}, {"cost", cost.name()}, {"seed", common.seed}};
  if (!a.b.empty()) {
    const eol::EmpiricalMeasure mb = read_measure(a.b);
    if (a.solver == "quantile") {
      if (model.dim() != 1 || model.kind() == eol::ModelKind::torus || cost.kind != eol::CostKind::rho_power)
        throw UsageError("quantile solver: one-dimensional line models and rho^p costs only");
      const double c = eol::wp_power_1d(ma, mb, cost.p);
      res["cost_value"] = c;
      res["distance"] = cost.distance_from_cost(c);
      res["solver"] = "quantile";
    } else {
      const eol::DistanceResult r = a.solver == "sinkhorn" ? eol::wp_sinkhorn(ma, mb, model.domain(), cost)
                                                           : eol::wp_discrete(ma, mb, model.domain(), cost);
      res["cost_value"] = r.cost;
      res["distance"] = r.value;
      res["solver"] = r.solver;
    }
  } else {
    eol::MuDistanceOptions o;
    o.m = a.m;
    o.solver = a.solver == "lp" ? eol::OtSolver::network_simplex
             : a.solver == "sinkhorn" ? eol::OtSolver::sinkhorn
                                      : eol::OtSolver::automatic;
    const eol::MuDistance r = eol::distance_to_mu(ma, model, cost, o, common.seed);
    res["cost_value"] = r.estimate;
    res["raw"] = r.raw;
    res["control"] = r.control;
    res["solver"] = r.solver;
    res["m"] = r.m;
    res["n"] = r.n;
  }
  res["config_hash"] = eol::config_hash(json{{"a", a.a}, {"b", a.b}, {"model", a.model},
                                             {"cost", cost.name()}, {"solver", a.solver},
                                             {"m", a.m}, {"seed", common.seed}});
  std::cout << res.dump(2) << '\n';
  if (!common.out.empty()) write_text(fs::path(common.out) / "results.json", res.dump(2) + "\n");
  return kOk;
}

// ---------------------------------------------------------------- bounds

int cmd_bounds(const Common& common, const std::string& density_file, const std::vector<double>& ps) {
  const json j = read_json_file(density_file);
  const eol::DiffusionModel model = eol::model_from_id(j.value("model", "ou-1d"));
  const auto c1 = j.at("c1").get<std::vector<double>>();
  const Eigen::Index n = static_cast<Eigen::Index>(c1.size());
  Eigen::Index size = n;
  std::vector<double> c2;
  if (j.contains("c2")) {
    c2 = j.at("c2").get<std::vector<double>>();
    size = std::max<Eigen::Index>(size, static_cast<Eigen::Index>(c2.size()));
  }
  auto basis = std::make_shared<const eol::SpectralBasis>(eol::eigen_pairs(model, size));
  const auto pad = [size](const std::vector<double>& c) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(size);
    for (std::size_t i = 0; i < c.size(); ++i) v[static_cast<Eigen::Index>(i)] = c[i];
    return v;
  };
  json res{{"model", model.id()}, {"seed", common.seed}};
  res["ledoux_f1"] = eol::ledoux_bound(pad(c1), *basis);
  if (!c2.empty()) {
    res["ledoux_f2"] = eol::ledoux_bound(pad(c2), *basis);
    const eol::DensityPair pair{basis, pad(c1), pad(c2)};
    json per_p = json::object();
    for (double p : ps) {
      const eol::WpBounds b = eol::wp_density_bounds(pair, p);
      json e{{"bound_sym", b.bound_sym}, {"bound_f1", b.bound_f1}, {"bound_Mp", b.bound_Mp},
             {"min", b.min}, {"reciprocal_Mp", b.reciprocal_Mp}};
      if (model.kind() == eol::ModelKind::ou) {
        const auto l1 = eol::spectral_density_distribution(*basis, pair.c1);
        const auto l2 = eol::spectral_density_distribution(*basis, pair.c2);
        e["wp_power_quantile"] = eol::wp_power_1d(*l1, *l2, p);
      }
      per_p[fmt(p, 6)] = e;
    }
    res["theorem_a1"] = per_p;
  }
  res["config_hash"] = eol::config_hash(json{{"density", j}, {"p", ps}});
  std::cout << res.dump(2) << '\n';
  if (!common.out.empty()) write_text(fs::path(common.out) / "results.json", res.dump(2) + "\n");
  return kOk;
}

// ---------------------------------------------------------------- rates

struct RatesArgs {
  std::string model = "ou-1d";
  std::vector<double> t, eps, upper;
  std::vector<double> sum;
  std::vector<double> predict;  // d p
};

int cmd_rates(const Common& common, const RatesArgs& a) {
  const eol::DiffusionModel model = eol::model_from_id(a.model);
  json res{{"model", model.id()}, {"seed", common.seed}};
  for (double c : a.sum) {
    const eol::SpectralSum s = eol::spectral_sum(model, c);
    std::cout << "sum_i " << fmt(c, 6) << "/lambda_i^2 = " << fmt(s.value, 6) << "  (value "
              << fmt(s.value, 15) << ", certified error " << fmt(s.error, 2) << ")\n";
    res["spectral_sum"][fmt(c, 6)] = {{"value", s.value}, {"error", s.error}};
  }
  for (double t : a.t) {
    const eol::GammaTilde gt = eol::gamma_tilde(model, std::min(t, 1.0), {4000, 2000, common.seed});
    json e{{"gamma_tilde", gt.value}, {"gamma_tilde_stderr", gt.stderr_}, {"gamma_tilde_method", gt.method}};
    std::cout << "t=" << fmt(t, 6);
    if (model.has_spectrum()) {
      e["gamma"] = eol::heat_trace(model, t);
      std::cout << "  gamma=" << fmt(e["gamma"].get<double>());
    }
    std::cout << "  gamma~(" << fmt(std::min(t, 1.0), 6) << ")=" << fmt(gt.value) << " (" << gt.method << ")\n";
    res["t"][fmt(t, 6)] = e;
  }
  for (double eps : a.eps) {
    json e;
    std::cout << "eps=" << fmt(eps, 6);
    if (model.has_spectrum()) {
      e["beta"] = eol::beta_fn(eol::gamma_function(model), eps);
      std::cout << "  beta=" << fmt(e["beta"].get<double>());
    }
    eol::AlphaOptions ao;
    ao.seed = common.seed;
    ao.threads = common.threads;
    const eol::Estimate al = eol::alpha_fn(model, eps, ao);
    e["alpha"] = al.value;
    e["alpha_stderr"] = al.stderr_;
    std::cout << "  alpha=" << fmt(al.value) << " +- " << fmt(al.stderr_, 3) << '\n';
    res["eps"][fmt(eps, 6)] = e;
  }
  if (!a.upper.empty()) {
    if (!model.has_spectrum()) throw UsageError("--upper needs a model with a closed-form heat trace");
    const eol::RateFunction gamma = eol::gamma_function(model);
    const eol::RateFunction alpha = [&](double e) {
      return eol::alpha_fn(model, e, {eol::AlphaMethod::analytic}).value;
    };
    const eol::RateFunction beta = [&](double e) { return eol::beta_fn(gamma, e); };
    for (double t : a.upper) {
      const eol::UpperBound ub = eol::upper_bound_opt(alpha, beta, t);
      std::cout << "t=" << fmt(t, 6) << "  inf_eps {alpha + beta/t} = " << fmt(ub.value) << " at eps="
                << fmt(ub.eps, 6) << '\n';
      res["upper"][fmt(t, 6)] = {{"value", ub.value}, {"eps", ub.eps}};
    }
  }
  if (!a.predict.empty()) {
    if (a.predict.size() != 2) throw UsageError("--predict takes d and p");
    const eol::RateExponents e = eol::rate_exponent_prediction(static_cast<int>(a.predict[0]), a.predict[1]);
    std::cout << "d=" << a.predict[0] << " p=" << a.predict[1] << ": upper t^-" << fmt(e.upper, 8)
              << (e.log_factor ? " log(1+t)" : "") << ", lower t^-" << fmt(e.lower, 8) << '\n';
    res["prediction"] = {{"upper", e.upper}, {"log_factor", e.log_factor}, {"lower", e.lower}};
  }
  if (!common.out.empty()) write_text(fs::path(common.out) / "results.json", res.dump(2) + "\n");
  return kOk;
}

// ---------------------------------------------------------------- appendix-check

int cmd_appendix(const Common& common, eol::SuiteOptions o) {
  o.seed = common.seed;
  const eol::SuiteResult r = eol::appendix_check(o);
  for (const auto& f : r.failures) std::cout << "violation: " << f << '\n';
  std::cout << r.violations << " violations / " << r.cases << '\n';
  if (!common.out.empty()) {
    json res{{"cases", r.cases}, {"violations", r.violations}, {"min_ratio", r.min_ratio},
             {"max_check_error", r.max_check_error}, {"failures", r.failures}, {"seed", o.seed}};
    write_text(fs::path(common.out) / "results.json", res.dump(2) + "\n");
  }
  return r.violations == 0 ? kOk : kVerdict;
}

// ---------------------------------------------------------------- report

int cmd_report(const Common& common, const std::string& in) {
  const fs::path dir = in.empty() ? (common.out.empty() ? fs::path(".") : fs::path(common.out)) : fs::path(in);
  const fs::path table = dir / "table.csv";
  if (!fs::exists(table)) {
    std::cerr << "report: no result set at " << table.string() << '\n';
    return kUsage;
  }
  const auto rows = eol::parse_table_csv(read_text(table.string()));
  if (rows.empty()) {
    std::cerr << "report: " << table.string() << " has no rows\n";
    return kUsage;
  }
  std::map<std::string, double> predicted;
  std::string caption = table.string();
  if (fs::exists(dir / "results.json")) {
    const json res = read_json_file((dir / "results.json").string());
    if (res.contains("fits"))
      for (const auto& item : res.at("fits").items())
        if (!item.value().at("predicted_slope").is_null())
          predicted[item.key()] = item.value().at("predicted_slope").get<double>();
    caption = res.value("config", json::object()).value("name", std::string("experiment")) + " (hash " +
              res.value("config_hash", std::string("?")) + ", seed " +
              std::to_string(res.value("seed", 0ull)) + ")";
  }
  const fs::path out = common.out.empty() ? dir : fs::path(common.out);
  write_text(out / "plot.svg", eol::render_plot_svg(rows, predicted, caption));
  std::cout << "wrote " << (out / "plot.svg").string() << '\n';
  return kOk;
}

// ---------------------------------------------------------------- run

int cmd_run(const Common& common, bool seed_given) {
  if (common.config.empty()) throw UsageError("run needs --config FILE");
  json j = read_json_file(common.config);
  if (seed_given) j["seed"] = common.seed;
  if (!common.out.empty()) j["output"] = common.out;
  eol::ExperimentConfig cfg;
  try {
    cfg = eol::parse_config(j);
  } catch (const eol::InvalidArgument& e) {
    throw UsageError(e.what());
  }
  const std::string dir = cfg.output.empty() ? "results/" + cfg.name : cfg.output;
  std::signal(SIGINT, on_sigint);
  eol::ResultRecord rec;
  try {
    rec = eol::run_experiment(cfg, {common.threads, &g_cancel});
  } catch (const eol::ExperimentError& e) {
    rec.config_hash = eol::config_hash(cfg.canonical);
    rec.seed = cfg.seed;
    rec.config = cfg.canonical;
    rec.complete = false;
    rec.error = e.what();
    eol::write_outputs(rec, dir);
    std::cerr << "error: " << e.what() << " (partial outputs in " << dir << ")\n";
    return kNumerical;
  }
  eol::write_outputs(rec, dir);
  for (const auto& [name, rep] : rec.fits) {
    std::cout << name << ": slope " << fmt(rep.slope, 4) << " CI [" << fmt(rep.ci_low, 4) << ", "
              << fmt(rep.ci_high, 4) << "]";
    if (!std::isnan(rep.predicted_slope)) std::cout << " predicted " << fmt(rep.predicted_slope, 4);
    std::cout << " -> " << rep.verdict << '\n';
  }
  std::cout << "wrote " << dir << " (hash " << rec.config_hash << ")\n";
  if (!rec.complete) {
    std::cerr << "interrupted: partial results (" << (rec.rows.empty() ? 0 : rec.rows.front().replicas)
              << " replicas) written and marked incomplete\n";
    return kNumerical;
  }
  return rec.pass() ? kOk : kVerdict;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Empirical-measure convergence experiments for Langevin diffusions"};
  app.require_subcommand(1);
  Common common;
  auto* opt_config = app.add_option("--config", common.config, "Experiment config (JSON)");
  auto* opt_seed = app.add_option("--seed", common.seed, "Master seed");
  auto* opt_threads = app.add_option("--threads", common.threads, "Worker threads (default: EOL_THREADS or all cores)");
  app.add_option("--out", common.out, "Output directory");
  (void)opt_config;

  auto* sim = app.add_subcommand("simulate", "Simulate one trajectory");
  SimulateArgs sa;
  sim->set_help_flag("--help", "Print this help message and exit");
  sim->add_option("--model", sa.model, "Model id (ou-1d, torus-3d, box-2d, power-d1-k1-p4, ...)");
  sim->add_option("--t", sa.t, "Final time");
  sim->add_option("--h", sa.h, "Step size");
  sim->add_option("--replica", sa.replica, "Replica index");
  sim->add_option("--x0", sa.x0, "Initial point (default: stationary start)");

  auto* dist = app.add_subcommand("distance", "Transport distance between stored measures or to mu");
  DistanceArgs da;
  dist->add_option("--a", da.a, "Measure CSV (weight,x1,... or a trajectory)")->required();
  dist->add_option("--b", da.b, "Second measure (omit to compare with mu)");
  dist->add_option("--model", da.model, "Model id (sets the metric and mu)");
  dist->add_option("--cost", da.cost, "w2, wp or w1t (truncated)")->check(CLI::IsMember({"w2", "wp", "w1t"}));
  dist->add_option("--p", da.p, "Exponent for --cost wp");
  dist->add_option("--solver", da.solver, "auto, lp, sinkhorn or quantile")
      ->check(CLI::IsMember({"auto", "lp", "sinkhorn", "quantile"}));
  dist->add_option("--m", da.m, "mu-sample size");

  auto* bnd = app.add_subcommand("bounds", "Ledoux and two-density bounds for stored densities");
  std::string density_file;
  std::vector<double> bound_ps{1.5, 2.0, 3.0};
  bnd->add_option("--density", density_file, "JSON with model, c1 and optional c2")->required();
  bnd->add_option("--p", bound_ps, "Exponents");

  auto* rates = app.add_subcommand("rates", "Rate functionals and exponent predictions");
  RatesArgs ra;
  rates->add_option("--model", ra.model, "Model id");
  rates->add_option("--t", ra.t, "Times for gamma and gamma~");
  rates->add_option("--eps", ra.eps, "Scales for alpha and beta");
  rates->add_option("--upper", ra.upper, "Horizons for inf_eps {alpha + beta/t}");
  rates->add_option("--sum", ra.sum, "Coefficients c of sum_i c/lambda_i^2");
  rates->add_option("--predict", ra.predict, "d p for the power-model exponent table")->expected(2);

  auto* app_check = app.add_subcommand("appendix-check", "Randomized two-density domination suite");
  eol::SuiteOptions so;
  so.p = {2.0};
  app_check->add_option("--n", so.trials, "Number of density pairs");
  app_check->add_option("--p", so.p, "Exponents");
  app_check->add_option("--k", so.k, "Modes in the random combination");
  app_check->add_option("--floor", so.floor, "Positivity floor");
  app_check->add_option("--atoms", so.atoms, "Quantile atoms for the exact LP");

  auto* rep = app.add_subcommand("report", "Render table.csv into plot.svg");
  std::string report_in;
  rep->add_option("--in", report_in, "Result directory (default: --out or .)");

  app.add_subcommand("run", "Run the experiment described by --config");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  if (!*opt_threads) {
    if (const char* env = std::getenv("EOL_THREADS")) common.threads = std::atoi(env);
  }
  try {
    if (*sim) return cmd_simulate(common, sa);
    if (*dist) return cmd_distance(common, da);
    if (*bnd) return cmd_bounds(common, density_file, bound_ps);
    if (*rates) return cmd_rates(common, ra);
    if (*app_check) return cmd_appendix(common, so);
    if (*rep) return cmd_report(common, report_in);
    return cmd_run(common, static_cast<bool>(*opt_seed));
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n' << app.help();
    return kUsage;
  } catch (const eol::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumerical;
  }
}

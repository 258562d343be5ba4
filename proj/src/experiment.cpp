#include "eol/experiment.hpp"

#include "eol/wasserstein1d.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace eol {

using nlohmann::json;

namespace {

const std::set<std::string> kKnownKeys{"name",       "model",     "init",      "horizons",
                                       "h",          "burn_in",   "replicas",  "seed",
                                       "statistics", "modes",     "distance",  "bounds",
                                       "predictions", "tolerance", "output"};

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

std::string round_trip(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

bool is_line_1d(const DiffusionModel& model) {
  return model.dim() == 1 && model.kind() != ModelKind::torus;
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) throw InvalidArgument("config: expected a JSON object");
  for (const auto& item : j.items())
    if (!kKnownKeys.count(item.key())) throw InvalidArgument("config: unknown key '" + item.key() + "'");
  ExperimentConfig c;
  try {
    c.name = get_or<std::string>(j, "name", "experiment");
    if (!j.contains("model")) throw InvalidArgument("config: 'model' is required");
    c.model = j.at("model").get<std::string>();
    model_from_id(c.model);  // throws on unknown ids
    if (j.contains("init")) c.init = j.at("init");
    const std::string kind = c.init.value("kind", "stationary");
    if (kind != "stationary" && kind != "dirac") throw InvalidArgument("config: init.kind must be stationary or dirac");
    if (kind == "dirac" && !c.init.contains("x0")) throw InvalidArgument("config: dirac init needs x0");
    if (!j.contains("horizons")) throw InvalidArgument("config: 'horizons' is required");
    c.horizons = j.at("horizons").get<std::vector<double>>();
    if (c.horizons.empty()) throw InvalidArgument("config: horizons must not be empty");
    for (std::size_t k = 0; k < c.horizons.size(); ++k) {
      if (!(c.horizons[k] > 0.0)) throw InvalidArgument("config: horizons must be positive");
      if (k > 0 && !(c.horizons[k] > c.horizons[k - 1]))
        throw InvalidArgument("config: horizons must be strictly increasing");
    }
    c.h = get_or<double>(j, "h", c.h);
    c.burn_in = get_or<double>(j, "burn_in", c.burn_in);
    c.replicas = get_or<int>(j, "replicas", c.replicas);
    c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
    if (!(c.h > 0.0)) throw InvalidArgument("config: h must be positive");
    if (c.burn_in < 0.0) throw InvalidArgument("config: burn_in must be nonnegative");
    if (c.replicas < 2) throw InvalidArgument("config: replicas must be at least 2");
    if (j.contains("statistics")) c.statistics = j.at("statistics").get<std::vector<std::string>>();
    for (const auto& s : c.statistics)
      if (s != "w2sq" && s != "w1tilde" && s != "w1tilde_sq" && s != "xi_sq")
        throw InvalidArgument("config: unknown statistic '" + s + "'");
    if (j.contains("modes")) c.modes = j.at("modes").get<std::vector<int>>();
    for (int m : c.modes)
      if (m < 1) throw InvalidArgument("config: modes are 1-based");
    if (j.contains("distance")) {
      const json& d = j.at("distance");
      c.distance.method = get_or<std::string>(d, "method", c.distance.method);
      c.distance.m = get_or<Eigen::Index>(d, "m", c.distance.m);
      c.distance.n = get_or<Eigen::Index>(d, "n", c.distance.n);
      c.distance.resamples = get_or<int>(d, "resamples", c.distance.resamples);
      c.distance.control = get_or<bool>(d, "control", c.distance.control);
      c.distance.solver = get_or<std::string>(d, "solver", c.distance.solver);
      c.distance.compress = get_or<Eigen::Index>(d, "compress", c.distance.compress);
      if (c.distance.method != "auto" && c.distance.method != "sample")
        throw InvalidArgument("config: distance.method must be auto or sample");
      if (c.distance.solver != "auto" && c.distance.solver != "lp" && c.distance.solver != "sinkhorn")
        throw InvalidArgument("config: distance.solver must be auto, lp or sinkhorn");
      if (c.distance.m < 2 || c.distance.n < 0 || c.distance.resamples < 1 || c.distance.compress < 2)
        throw InvalidArgument("config: bad distance sizes");
    }
    if (j.contains("bounds")) c.bounds = j.at("bounds").get<std::vector<std::string>>();
    for (const auto& b : c.bounds)
      if (b != "bracket" && b != "upper") throw InvalidArgument("config: unknown bound '" + b + "'");
    if (j.contains("predictions")) {
      for (const auto& item : j.at("predictions").items()) {
        Prediction p;
        p.exponent = item.value().at("exponent").get<double>();
        p.log_factor = item.value().value("log_factor", false);
        c.predictions[item.key()] = p;
      }
    }
    c.tolerance = get_or<double>(j, "tolerance", c.tolerance);
    c.output = get_or<std::string>(j, "output", "");
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
  c.canonical = j;
  return c;
}

std::string config_hash(const json& j) {
  json copy = j;
  if (copy.is_object()) copy.erase("output");
  const std::string text = copy.dump();  // object keys are sorted
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

bool ResultRecord::pass() const {
  return std::all_of(fits.begin(), fits.end(), [](const auto& kv) {
    return kv.second.verdict != "fail" && kv.second.verdict.rfind("invalid", 0) != 0;
  });
}

std::vector<ResultRow> ResultRecord::rows_for(const std::string& statistic) const {
  std::vector<ResultRow> out;
  for (const auto& r : rows)
    if (r.statistic == statistic) out.push_back(r);
  return out;
}

std::vector<std::string> statistic_columns(const ExperimentConfig& config) {
  std::vector<std::string> out;
  for (const auto& s : config.statistics) {
    if (s == "xi_sq") {
      for (int m : config.modes) out.push_back("xi" + std::to_string(m) + "_sq");
    } else {
      out.push_back(s);
    }
  }
  return out;
}

std::optional<Prediction> default_prediction(const std::string& statistic, const DiffusionModel& model) {
  if (statistic.rfind("xi", 0) == 0) return Prediction{1.0, false};
  if (statistic != "w2sq") return std::nullopt;
  RateExponents e;
  switch (model.kind()) {
    case ModelKind::torus:
    case ModelKind::box: e = compact_rate_prediction(model.dim()); break;
    case ModelKind::ou: e = rate_exponent_prediction(model.dim(), 2.0); break;
    case ModelKind::power: e = rate_exponent_prediction(model.dim(), model.exponent()); break;
  }
  return Prediction{e.upper, e.log_factor};
}

namespace {

struct Plan {
  DiffusionModel model;
  std::vector<std::string> columns;
  std::shared_ptr<const SpectralBasis> basis;  // xi_sq only
  std::vector<int> modes;
  EmpiricalMeasure mu_centroids;               // 1-D truncated cost
  bool need_w1 = false;
  bool need_w2 = false;
  bool need_xi = false;
};

MuDistanceOptions mu_options(const DistanceConfig& d) {
  MuDistanceOptions o;
  o.m = d.m;
  o.n = d.n;
  o.resamples = d.resamples;
  o.control = d.control;
  o.solver = d.solver == "lp" ? OtSolver::network_simplex
           : d.solver == "sinkhorn" ? OtSolver::sinkhorn
                                    : OtSolver::automatic;
  return o;
}

double w2_squared(const EmpiricalMeasure& emp, const Plan& plan, const ExperimentConfig& c,
                  std::uint64_t replica) {
  const DiffusionModel& model = plan.model;
  if (c.distance.method == "auto" && model.dim() == 1) {
    if (model.kind() == ModelKind::torus) return w2_squared_circle_uniform(emp, model.domain().period);
    const double w = w2_exact_1d(emp, model);
    return w * w;
  }
  return distance_to_mu(emp, model, CostSpec::rho_power(2.0), mu_options(c.distance), c.seed, replica)
      .estimate;
}

double w1_truncated(const EmpiricalMeasure& emp, const Plan& plan, const ExperimentConfig& c,
                    std::uint64_t replica) {
  const DiffusionModel& model = plan.model;
  if (c.distance.method == "auto" && is_line_1d(model)) {
    const EmpiricalMeasure compressed = compress_quantiles(emp, c.distance.compress);
    return wp_discrete(compressed, plan.mu_centroids, model.domain(), CostSpec::truncated()).value;
  }
  return distance_to_mu(emp, model, CostSpec::truncated(), mu_options(c.distance), c.seed, replica)
      .estimate;
}

InitialDistribution initial_distribution(const ExperimentConfig& c, int d) {
  if (c.init.value("kind", "stationary") == "stationary") return InitialDistribution::stationary();
  const auto x0 = c.init.at("x0").get<std::vector<double>>();
  if (static_cast<int>(x0.size()) != d) throw InvalidArgument("config: x0 has the wrong dimension");
  return InitialDistribution::dirac(Eigen::Map<const Eigen::VectorXd>(x0.data(), d));
}

}  // namespace

ResultRecord run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  Plan plan{model_from_id(config.model), statistic_columns(config), nullptr, config.modes, {}};
  for (const auto& s : config.statistics) {
    plan.need_w2 = plan.need_w2 || s == "w2sq";
    plan.need_w1 = plan.need_w1 || s == "w1tilde" || s == "w1tilde_sq";
    plan.need_xi = plan.need_xi || s == "xi_sq";
  }
  try {
    if (plan.need_xi) {
      const int top = *std::max_element(config.modes.begin(), config.modes.end());
      plan.basis = std::make_shared<const SpectralBasis>(eigen_pairs(plan.model, top));
    }
    if (plan.need_w1 && config.distance.method == "auto" && is_line_1d(plan.model))
      plan.mu_centroids = quantile_centroids(*model_distribution_1d(plan.model), config.distance.compress);
  } catch (const Error& e) {
    throw ExperimentError("setup", -1, e.what());
  }
  const InitialDistribution init = initial_distribution(config, plan.model.dim());
  const std::size_t H = config.horizons.size();
  const std::size_t S = plan.columns.size();
  const double t_end = config.burn_in + config.horizons.back();

  const auto replica = [&](std::uint64_t r) -> Eigen::VectorXd {
    std::string stage = "simulate";
    try {
      const Trajectory path = simulate_path(plan.model, init, t_end, config.h, config.seed, r);
      Eigen::VectorXd out(H * S);
      for (std::size_t k = 0; k < H; ++k) {
        const double t = config.horizons[k];
        stage = "empirical";
        const EmpiricalMeasure emp = empirical_measure(path, t, config.burn_in);
        double w1 = 0.0;
        Eigen::VectorXd xi;
        if (plan.need_w1) {
          stage = "distance";
          w1 = w1_truncated(emp, plan, config, r);
        }
        if (plan.need_xi) {
          stage = "coefficients";
          xi = xi_coefficients(path, *plan.basis, t, config.burn_in);
        }
        std::size_t col = 0;
        for (const auto& s : config.statistics) {
          if (s == "w2sq") {
            stage = "distance";
            out[k * S + col++] = w2_squared(emp, plan, config, r);
          } else if (s == "w1tilde") {
            out[k * S + col++] = w1;
          } else if (s == "w1tilde_sq") {
            out[k * S + col++] = w1 * w1;
          } else {
            for (int m : config.modes) out[k * S + col++] = xi[m - 1] * xi[m - 1];
          }
        }
      }
      return out;
    } catch (const Error& e) {
      throw ExperimentError(stage, static_cast<std::int64_t>(r), e.what());
    }
  };

  MonteCarloResult mc;
  try {
    mc = monte_carlo(std::function<Eigen::VectorXd(std::uint64_t)>(replica), config.replicas,
                     {options.threads, options.cancel});
  } catch (const ReplicaFailure& e) {
    throw ExperimentError("replica", e.replica(), e.what());
  }

  ResultRecord rec;
  rec.config_hash = config_hash(config.canonical);
  rec.seed = config.seed;
  rec.config = config.canonical;
  rec.complete = mc.complete;
  if (mc.completed == 0) {
    rec.complete = false;
    rec.wall_clock = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rec;
  }
  for (std::size_t k = 0; k < H; ++k)
    for (std::size_t s = 0; s < S; ++s)
      rec.rows.push_back({config.horizons[k], plan.columns[s], mc.mean[k * S + s],
                          mc.stderr_[k * S + s], mc.completed});

  try {
    for (const auto& b : config.bounds) {
      if (b == "bracket") {
        const double sum = spectral_sum(plan.model, 1.0).value;
        for (double t : config.horizons) {
          rec.bounds["bracket_low"].push_back(2.0 * sum / t);
          rec.bounds["bracket_high"].push_back(8.0 * sum / t);
        }
      } else {
        const RateFunction gamma = gamma_function(plan.model);
        const DiffusionModel& model = plan.model;
        const RateFunction alpha = [&](double e) {
          return alpha_fn(model, e, {AlphaMethod::analytic}).value;
        };
        const RateFunction beta = [&](double e) { return beta_fn(gamma, e); };
        for (double t : config.horizons) rec.bounds["upper"].push_back(upper_bound_opt(alpha, beta, t).value);
      }
    }
  } catch (const Error& e) {
    throw ExperimentError("bounds", -1, e.what());
  }

  if (H >= 3) {
    for (const auto& s : plan.columns) {
      std::vector<double> v, se;
      for (const auto& row : rec.rows_for(s)) {
        v.push_back(row.mean);
        se.push_back(row.stderr_);
      }
      std::optional<Prediction> pred = default_prediction(s, plan.model);
      if (auto it = config.predictions.find(s); it != config.predictions.end()) pred = it->second;
      FitOptions fo;
      fo.tolerance = config.tolerance;
      if (pred) {
        fo.predicted_exponent = pred->exponent;
        fo.log_factor = pred->log_factor;
        fo.log_correction = pred->log_factor;
      }
      if (std::any_of(v.begin(), v.end(), [](double x) { return !(x > 0.0); })) {
        RateReport bad;
        bad.horizons = config.horizons;
        bad.values = v;
        bad.stderrs = se;
        bad.verdict = "invalid: nonpositive mean";
        rec.fits[s] = bad;
        continue;
      }
      rec.fits[s] = fit_rate(config.horizons, v, se, fo);
    }
  }
  rec.wall_clock = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

json to_json(const RateReport& r) {
  json j{{"horizons", r.horizons}, {"values", r.values},   {"stderrs", r.stderrs},
         {"slope", r.slope},       {"intercept", r.intercept}, {"slope_stderr", r.slope_stderr},
         {"ci", {r.ci_low, r.ci_high}}, {"log_factor", r.log_factor},
         {"log_corrected", r.log_corrected}, {"tolerance", r.tolerance}, {"verdict", r.verdict}};
  j["predicted_slope"] = std::isnan(r.predicted_slope) ? json(nullptr) : json(r.predicted_slope);
  return j;
}

json to_json(const ResultRecord& rec) {
  json rows = json::array();
  for (const auto& r : rec.rows)
    rows.push_back({{"t", r.t}, {"statistic", r.statistic}, {"mean", r.mean}, {"stderr", r.stderr_},
                    {"R", r.replicas}});
  json fits = json::object();
  for (const auto& [name, rep] : rec.fits) fits[name] = to_json(rep);
  json j{{"config_hash", rec.config_hash}, {"seed", rec.seed},         {"version", rec.version},
         {"wall_clock", rec.wall_clock},   {"complete", rec.complete}, {"config", rec.config},
         {"rows", rows},                   {"bounds", rec.bounds},     {"fits", fits},
         {"pass", rec.pass()}};
  if (!rec.error.empty()) j["error"] = rec.error;
  return j;
}

std::string table_csv(const ResultRecord& rec) {
  std::ostringstream os;
  os << "# config_hash=" << rec.config_hash << " seed=" << rec.seed
     << (rec.complete ? "" : " incomplete") << "\n";
  os << "t,statistic,mean,stderr,R\n";
  for (const auto& r : rec.rows)
    os << round_trip(r.t) << ',' << r.statistic << ',' << round_trip(r.mean) << ','
       << round_trip(r.stderr_) << ',' << r.replicas << '\n';
  return os.str();
}

std::vector<ResultRow> parse_table_csv(const std::string& text) {
  std::vector<ResultRow> rows;
  std::istringstream is(text);
  std::string line;
  bool header = false;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line.rfind("t,statistic,mean,stderr,R", 0) != 0) throw InvalidArgument("table: bad header");
      header = true;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 5) throw InvalidArgument("table: expected 5 columns in '" + line + "'");
    try {
      rows.push_back({std::stod(f[0]), f[1], std::stod(f[2]), std::stod(f[3]), std::stoi(f[4])});
    } catch (const std::exception&) {
      throw InvalidArgument("table: bad number in '" + line + "'");
    }
  }
  return rows;
}

std::string render_plot_svg(const std::vector<ResultRow>& rows,
                            const std::map<std::string, double>& predicted,
                            const std::string& caption) {
  std::vector<std::string> names;
  double tmin = INFINITY, tmax = -INFINITY, vmin = INFINITY, vmax = -INFINITY;
  for (const auto& r : rows) {
    if (std::find(names.begin(), names.end(), r.statistic) == names.end()) names.push_back(r.statistic);
    if (!(r.mean > 0.0) || !(r.t > 0.0)) continue;
    tmin = std::min(tmin, r.t);
    tmax = std::max(tmax, r.t);
    vmin = std::min(vmin, std::max(r.mean - r.stderr_, r.mean / 4.0));
    vmax = std::max(vmax, r.mean + r.stderr_);
  }
  if (!std::isfinite(tmin)) throw InvalidArgument("plot: no positive values to draw");
  const double lx0 = std::floor(std::log10(tmin) - 0.05), lx1 = std::ceil(std::log10(tmax) + 0.05);
  const double ly0 = std::floor(std::log10(vmin)), ly1 = std::ceil(std::log10(vmax));
  constexpr double W = 640, Hh = 440, L = 70, R = 160, T = 30, B = 50;
  const auto px = [&](double t) { return L + (std::log10(t) - lx0) / (lx1 - lx0) * (W - L - R); };
  const auto py = [&](double v) { return Hh - B - (std::log10(v) - ly0) / (ly1 - ly0) * (Hh - T - B); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << Hh
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << L << "\" y=\"18\">" << caption << "</text>\n";
  os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\""
     << Hh - T - B << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double e = lx0; e <= lx1 + 1e-9; e += 1.0) {
    const double x = px(std::pow(10.0, e));
    os << "<line x1=\"" << x << "\" y1=\"" << Hh - B << "\" x2=\"" << x << "\" y2=\"" << Hh - B + 5
       << "\" stroke=\"black\"/><text x=\"" << x - 12 << "\" y=\"" << Hh - B + 20 << "\">1e" << e
       << "</text>\n";
  }
  for (double e = ly0; e <= ly1 + 1e-9; e += 1.0) {
    const double y = py(std::pow(10.0, e));
    os << "<line x1=\"" << L - 5 << "\" y1=\"" << y << "\" x2=\"" << L << "\" y2=\"" << y
       << "\" stroke=\"black\"/><text x=\"" << L - 45 << "\" y=\"" << y + 4 << "\">1e" << e
       << "</text>\n";
  }
  os << "<text x=\"" << (W - R + L) / 2 << "\" y=\"" << Hh - 10 << "\">t</text>\n";
  for (std::size_t s = 0; s < names.size(); ++s) {
    const char* color = colors[s % 6];
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : rows) {
      if (r.statistic != names[s] || !(r.mean > 0.0)) continue;
      pts.emplace_back(r.t, r.mean);
      const double lo = std::max(r.mean - r.stderr_, r.mean / 4.0);
      os << "<line x1=\"" << px(r.t) << "\" y1=\"" << py(lo) << "\" x2=\"" << px(r.t) << "\" y2=\""
         << py(r.mean + r.stderr_) << "\" stroke=\"" << color << "\"/>\n";
      os << "<circle cx=\"" << px(r.t) << "\" cy=\"" << py(r.mean) << "\" r=\"3\" fill=\"" << color
         << "\"/>\n";
    }
    const double ly = T + 18.0 * (s + 1);
    os << "<text x=\"" << W - R + 10 << "\" y=\"" << ly << "\" fill=\"" << color << "\">" << names[s]
       << "</text>\n";
    auto it = predicted.find(names[s]);
    if (it == predicted.end() || pts.empty() || std::isnan(it->second)) continue;
    // Reference line through the geometric centre of the points.
    double cx = 0.0, cy = 0.0;
    for (const auto& [t, v] : pts) {
      cx += std::log(t);
      cy += std::log(v);
    }
    cx /= pts.size();
    cy /= pts.size();
    const auto ref = [&](double t) { return std::exp(cy + it->second * (std::log(t) - cx)); };
    const double ta = pts.front().first, tb = pts.back().first;
    os << "<line x1=\"" << px(ta) << "\" y1=\"" << py(ref(ta)) << "\" x2=\"" << px(tb) << "\" y2=\""
       << py(ref(tb)) << "\" stroke=\"" << color << "\" stroke-dasharray=\"6,4\"/>\n";
    os << "<text x=\"" << W - R + 10 << "\" y=\"" << ly + 9 << "\" font-size=\"10\" fill=\"" << color
       << "\">slope " << round_trip(std::round(it->second * 1000.0) / 1000.0) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

SuiteResult appendix_check(const SuiteOptions& o) {
  if (o.trials < 1 || o.k < 1 || o.atoms < 2) throw InvalidArgument("appendix_check: bad options");
  const DiffusionModel model = ou_model(1);
  const auto basis = std::make_shared<const SpectralBasis>(eigen_pairs(model, 2 * o.k));
  RngCursor rng(CounterRng(o.seed, 0, Stream::synthetic));
  SuiteResult out;
  for (int trial = 0; trial < o.trials; ++trial) {
    DensityPair pair{basis, random_density_coefficients(*basis, o.k, o.floor, rng),
                     random_density_coefficients(*basis, o.k, o.floor, rng)};
    const auto law1 = spectral_density_distribution(*basis, pair.c1);
    const auto law2 = spectral_density_distribution(*basis, pair.c2);
    const EmpiricalMeasure e1 = quantile_centroids(*law1, o.atoms);
    const EmpiricalMeasure e2 = quantile_centroids(*law2, o.atoms);
    for (double p : o.p) {
      const WpBounds b = wp_density_bounds(pair, p);
      const double cost = wp_discrete(e1, e2, model.domain(), CostSpec::rho_power(p)).cost;
      ++out.cases;
      out.min_ratio = std::min(out.min_ratio, b.min / cost);
      if (cost > b.min + 1e-9) {
        ++out.violations;
        out.failures.push_back("trial " + std::to_string(trial) + " p=" + round_trip(p) + ": W_p^p " +
                               round_trip(cost) + " > bound " + round_trip(b.min));
      }
      if (p == 2.0) {
        const double check = mp_bound_by_interpolation(pair, p);
        out.max_check_error = std::max(out.max_check_error, std::abs(check - b.bound_Mp));
      }
    }
  }
  return out;
}

SuiteResult ledoux_check(const SuiteOptions& o) {
  if (o.trials < 1 || o.k < 1) throw InvalidArgument("ledoux_check: bad options");
  const DiffusionModel model = ou_model(1);
  const SpectralBasis basis = eigen_pairs(model, 2 * o.k);
  const auto mu = model_distribution_1d(model);
  RngCursor rng(CounterRng(o.seed, 1, Stream::synthetic));
  SuiteResult out;
  for (int trial = 0; trial < o.trials; ++trial) {
    const Eigen::VectorXd c = random_density_coefficients(basis, o.k, 0.0, rng);
    const double w2sq = wp_power_1d(*spectral_density_distribution(basis, c), *mu, 2.0);
    const double bound = ledoux_bound(c, basis);
    ++out.cases;
    out.min_ratio = std::min(out.min_ratio, bound / w2sq);
    if (w2sq > bound * (1.0 + 1e-9)) {
      ++out.violations;
      out.failures.push_back("trial " + std::to_string(trial) + ": W_2^2 " + round_trip(w2sq) +
                             " > bound " + round_trip(bound));
    }
  }
  return out;
}

void write_outputs(const ResultRecord& rec, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream f(fs::path(dir) / name, std::ios::binary);
    if (!f) throw Error("cannot write " + (fs::path(dir) / name).string());
    f << text;
  };
  json cfg = rec.config;
  cfg["_config_hash"] = rec.config_hash;
  cfg["_seed"] = rec.seed;
  write("config.json", cfg.dump(2) + "\n");
  write("results.json", to_json(rec).dump(2) + "\n");
  write("table.csv", table_csv(rec));
  std::map<std::string, double> predicted;
  for (const auto& [name, rep] : rec.fits) predicted[name] = rep.predicted_slope;
  std::string svg;
  try {
    svg = render_plot_svg(rec.rows, predicted,
                          rec.config.value("name", "experiment") + " (hash " + rec.config_hash +
                              ", seed " + std::to_string(rec.seed) + ")");
  } catch (const InvalidArgument&) {
    svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"40\"><text x=\"10\" y=\"25\">"
          "no positive values (hash " + rec.config_hash + ", seed " + std::to_string(rec.seed) +
          ")</text></svg>\n";
  }
  write("plot.svg", svg);
}

}  // namespace eol

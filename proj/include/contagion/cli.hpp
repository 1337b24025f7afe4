#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cascade.hpp"
#include "clt.hpp"
#include "ensemble.hpp"
#include "errors.hpp"
#include "format.hpp"
#include "intervene.hpp"
#include "limits.hpp"
#include "model.hpp"
#include "netgen.hpp"
#include "risk.hpp"
#include "spec_io.hpp"

namespace contagion {

inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr std::uint64_t kDefaultSeed = 20240601;

// Config file: one `key = value` per line, '#' starts a comment. Relative
// paths resolve against the config file's directory.
struct RunConfig {
  std::string subcommand;
  std::string spec_path, risk_path, network_path;
  std::string output_dir = "out";
  std::uint64_t seed = kDefaultSeed;
  double tol = 1e-12;
  int zstar_grid = 10000;
  double quad_tol = 1e-10;
  int z_points = 101;
  int y_points = 21;
  std::size_t n = 1000;
  std::size_t replications = 100;
  unsigned threads = 0;
  TimeMode time_mode = TimeMode::exponential;
  bool record_cells = false;
  LossMode loss_mode = LossMode::deterministic;
  std::map<std::string, double> alpha, costs;
  double budget = 0.0;
  int grid_k = 20;
  double min_step = 1e-4;
  std::vector<std::string> observables{"D"};
  int time_points = 0;
  double time_max = 0.0; // 0: up to the limiting stopping time
  std::uint64_t config_hash = 0;

  RootOptions root() const { return {tol, zstar_grid}; }
  QuadratureOptions quad() const {
    QuadratureOptions q;
    q.rel_tol = quad_tol;
    return q;
  }
};

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> s{"validate", "generate", "cascade",   "limits",
                                          "clt",      "risk",     "intervene", "simulate"};
  return s;
}

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::map<std::string, double> parse_class_map(const std::string& key, const std::string& v, int line) {
  std::map<std::string, double> m;
  for (const auto& item : split(v, ',')) {
    auto kv = split(item, ':');
    double d;
    if (kv.size() != 2 || kv[0].empty() || !parse_double(trim(kv[1]), d))
      throw ConfigError("line " + std::to_string(line) + ": '" + key + "' expects class:value pairs");
    m[std::string(trim(kv[0]))] = d;
  }
  return m;
}

} // namespace detail

inline RunConfig parse_config_text(const std::string& text, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  cfg.config_hash = fnv1a(text);
  std::istringstream is(text);
  std::string raw;
  int line = 0;
  std::map<std::string, int> seen;
  auto err = [&](const std::string& m) { throw ConfigError("line " + std::to_string(line) + ": " + m); };
  auto path_of = [&](const std::string& v) {
    std::filesystem::path p(v);
    return (p.is_absolute() ? p : base_dir / p).lexically_normal().string();
  };
  while (std::getline(is, raw)) {
    ++line;
    auto hash = raw.find('#');
    if (hash != std::string::npos) raw.resize(hash);
    const std::string_view l = trim(raw);
    if (l.empty()) continue;
    const auto eq = l.find('=');
    if (eq == std::string_view::npos) err("expected 'key = value'");
    const std::string key(trim(l.substr(0, eq)));
    const std::string val(trim(l.substr(eq + 1)));
    if (seen[key]++) err("duplicate key '" + key + "'");
    auto real = [&]() {
      double d;
      if (!parse_double(val, d)) err("key '" + key + "' expects a number");
      return d;
    };
    auto integer = [&]() {
      long long d;
      if (!parse_int(val, d) || d < 0) err("key '" + key + "' expects a nonnegative integer");
      return d;
    };
    if (key == "subcommand") cfg.subcommand = val;
    else if (key == "spec") cfg.spec_path = path_of(val);
    else if (key == "risk") cfg.risk_path = path_of(val);
    else if (key == "network") cfg.network_path = path_of(val);
    else if (key == "output_dir") cfg.output_dir = path_of(val);
    else if (key == "seed") {
      if (!parse_int(val, cfg.seed)) err("key 'seed' expects an unsigned 64-bit integer");
    } else if (key == "tol") cfg.tol = real();
    else if (key == "zstar_grid") cfg.zstar_grid = static_cast<int>(integer());
    else if (key == "quad_tol") cfg.quad_tol = real();
    else if (key == "z_points") cfg.z_points = static_cast<int>(integer());
    else if (key == "y_points") cfg.y_points = static_cast<int>(integer());
    else if (key == "n") cfg.n = static_cast<std::size_t>(integer());
    else if (key == "replications") cfg.replications = static_cast<std::size_t>(integer());
    else if (key == "threads") cfg.threads = static_cast<unsigned>(integer());
    else if (key == "time_mode") {
      if (val == "exponential") cfg.time_mode = TimeMode::exponential;
      else if (val == "sequential") cfg.time_mode = TimeMode::sequential;
      else err("time_mode must be 'exponential' or 'sequential'");
    } else if (key == "record_cells") {
      if (val != "true" && val != "false") err("record_cells must be 'true' or 'false'");
      cfg.record_cells = val == "true";
    } else if (key == "loss_mode") {
      if (val == "deterministic") cfg.loss_mode = LossMode::deterministic;
      else if (val == "random") cfg.loss_mode = LossMode::random;
      else err("loss_mode must be 'deterministic' or 'random'");
    } else if (key == "alpha") cfg.alpha = detail::parse_class_map(key, val, line);
    else if (key == "costs") cfg.costs = detail::parse_class_map(key, val, line);
    else if (key == "budget") cfg.budget = real();
    else if (key == "grid_k") cfg.grid_k = static_cast<int>(integer());
    else if (key == "min_step") cfg.min_step = real();
    else if (key == "observables") {
      cfg.observables.clear();
      for (const auto& o : split(val, ',')) cfg.observables.emplace_back(trim(o));
    } else if (key == "time_points") cfg.time_points = static_cast<int>(integer());
    else if (key == "time_max") cfg.time_max = real();
    else err("unknown key '" + key + "'");
  }
  if (cfg.subcommand.empty()) throw ConfigError("missing required key 'subcommand'");
  bool known = false;
  for (const auto& s : subcommands()) known = known || s == cfg.subcommand;
  if (!known) throw ConfigError("unknown subcommand '" + cfg.subcommand + "'");
  const bool needs_spec = !(cfg.subcommand == "cascade" && !cfg.network_path.empty());
  if (needs_spec && cfg.spec_path.empty()) throw ConfigError("missing required key 'spec'");
  if (cfg.subcommand == "risk" && cfg.risk_path.empty()) throw ConfigError("missing required key 'risk'");
  if (!(cfg.tol > 0.0) || !(cfg.quad_tol > 0.0)) throw ConfigError("tolerances must be positive");
  if (cfg.zstar_grid < 2 || cfg.z_points < 2 || cfg.y_points < 2) throw ConfigError("grids need at least 2 points");
  for (const auto* p : {&cfg.spec_path, &cfg.risk_path, &cfg.network_path})
    if (!p->empty() && !std::filesystem::is_regular_file(*p)) throw ConfigError("referenced file does not exist: " + *p);
  return cfg;
}

inline RunConfig parse_config(const std::string& path) {
  const std::string text = detail::read_file(path);
  return parse_config_text(text, std::filesystem::path(path).parent_path());
}

// CONTAGION_OUTPUT_DIR and CONTAGION_THREADS override the config file.
inline void apply_environment(RunConfig& cfg) {
  if (const char* d = std::getenv("CONTAGION_OUTPUT_DIR"); d && *d) cfg.output_dir = d;
  if (const char* t = std::getenv("CONTAGION_THREADS"); t && *t) {
    unsigned v;
    if (!parse_int(std::string_view(t), v)) throw ConfigError("CONTAGION_THREADS must be a nonnegative integer");
    cfg.threads = v;
  }
}

// Files produced by one pipeline run, keyed by name inside the output directory.
using OutputSet = std::map<std::string, std::string>;

namespace detail {

inline std::string header_line(const RunConfig& cfg) {
  return "# contagion " + std::string(kToolVersion) + " config_hash=" + hex64(cfg.config_hash) +
         " seed=" + std::to_string(cfg.seed) + "\n";
}

inline nlohmann::ordered_json meta(const RunConfig& cfg) {
  return {{"tool", "contagion"},
          {"version", kToolVersion},
          {"config_hash", hex64(cfg.config_hash)},
          {"seed", cfg.seed},
          {"subcommand", cfg.subcommand}};
}

inline std::string dump(const RunConfig& cfg, nlohmann::ordered_json body) {
  nlohmann::ordered_json j;
  j["meta"] = meta(cfg);
  for (auto it = body.begin(); it != body.end(); ++it) j[it.key()] = it.value();
  return j.dump(2) + "\n";
}

inline NetworkSpec load_spec(const RunConfig& cfg) {
  return validate_spec(parse_network_spec(read_file(cfg.spec_path)));
}

inline RiskSpec load_risk(const RunConfig& cfg, const NetworkSpec& spec) {
  return validate_risk(parse_risk_spec(read_file(cfg.risk_path)), spec);
}

inline ObservableKind kind_of(const std::string& s) {
  if (s == "S") return ObservableKind::S;
  if (s == "D") return ObservableKind::D;
  if (s == "Hplus") return ObservableKind::Hplus;
  if (s == "Iplus") return ObservableKind::Iplus;
  if (s == "W") return ObservableKind::W;
  if (s == "diamond") return ObservableKind::Diamond;
  throw ConfigError("unknown observable '" + s + "' (S, D, Hplus, Iplus, W, diamond)");
}

inline nlohmann::ordered_json law_json(const GaussianLaw& l) {
  return {{"observable", l.observable}, {"available", l.available}, {"z_star", l.z_star},
          {"zhat_n", l.zhat_n},         {"alpha", l.alpha},         {"limit", l.limit},
          {"centering", l.centering},   {"delta", l.delta},         {"variance", l.variance},
          {"diagnostics", l.diagnostics}};
}

inline nlohmann::ordered_json fixed_point_json(const FixedPoint& fp) {
  return {{"z_star", fp.z_star},
          {"alpha", fp.alpha},
          {"stable", fp.stable},
          {"regime", regime_name(fp.regime)},
          {"diagnostic", fp.diagnostic}};
}

inline RealizedNetwork network_for(const RunConfig& cfg) {
  if (!cfg.network_path.empty()) return read_network(read_file(cfg.network_path));
  const NetworkSpec spec = load_spec(cfg);
  const NodePopulation pop = sample_nodes(spec, cfg.n, derive_seed(cfg.seed, "population"));
  return wire_configuration(pop, derive_seed(cfg.seed, "graph"));
}

inline OutputSet run_validate(const RunConfig& cfg) {
  const NetworkSpec spec = load_spec(cfg);
  nlohmann::ordered_json body{{"valid", true}, {"classes", spec.classes.size()}, {"lambda", spec.lambda()}};
  OutputSet out{{"validated_spec.txt", header_line(cfg) + write_network_spec(spec)}};
  if (!cfg.risk_path.empty()) {
    const RiskSpec risk = load_risk(cfg, spec);
    body["risk_valid"] = true;
    out["validated_risk.txt"] = header_line(cfg) + write_risk_spec(risk);
  }
  out["validate.json"] = dump(cfg, body);
  return out;
}

inline OutputSet run_generate(const RunConfig& cfg) {
  return {{"network.txt", header_line(cfg) + write_network(network_for(cfg))}};
}

inline OutputSet run_cascade(const RunConfig& cfg) {
  const RealizedNetwork net = network_for(cfg);
  const CascadeResult disc = run_discrete(net);
  const CascadeTrajectory tr =
      run_death_process(net, derive_seed(cfg.seed, "clock"), {cfg.time_mode, cfg.record_cells});
  nlohmann::ordered_json body{{"n", net.pop.size()},
                              {"edges", net.edges.size()},
                              {"discrete_defaults", disc.default_count()},
                              {"rounds", disc.rounds},
                              {"death_process_defaults", tr.records.back().D},
                              {"tau_star", tr.tau_star},
                              {"final_sets_equal", disc.defaulted == tr.defaulted}};
  OutputSet out{{"cascade.json", dump(cfg, body)}, {"trajectory.csv", header_line(cfg) + trajectory_csv(tr)}};
  if (cfg.record_cells) out["cells.csv"] = header_line(cfg) + cell_changes_csv(tr, net.pop.class_ids);
  return out;
}

inline OutputSet run_limits(const RunConfig& cfg) {
  const NetworkSpec spec = load_spec(cfg);
  std::string csv = header_line(cfg) + "z,f_S,f_D,f_Hplus,f_Iplus,f_W\n";
  for (int k = 0; k < cfg.z_points; ++k) {
    const double z = static_cast<double>(k) / (cfg.z_points - 1);
    const LimitReport r = eval_limit_functions(spec, z);
    csv += fmt17(z) + "," + fmt17(r.f_S) + "," + fmt17(r.f_D) + "," + fmt17(r.f_Hplus) + "," + fmt17(r.f_Iplus) +
           "," + fmt17(r.f_W) + "\n";
  }
  const FixedPoint fp = solve_zstar(spec, cfg.root());
  const LimitReport at = eval_limit_functions(spec, fp.z_star);
  auto j = fixed_point_json(fp);
  j["lambda"] = spec.lambda();
  j["f_D"] = at.f_D;
  j["f_S"] = at.f_S;
  j["f_Hplus"] = at.f_Hplus;
  j["f_Iplus"] = at.f_Iplus;
  return {{"limits.csv", csv}, {"fixed_point.json", dump(cfg, j)}};
}

inline OutputSet run_clt(const RunConfig& cfg) {
  const KernelContext ctx(load_spec(cfg), cfg.quad());
  const std::vector<std::pair<const char*, ObservableKind>> obs{{"S", ObservableKind::S},
                                                                 {"Hplus", ObservableKind::Hplus},
                                                                 {"Iplus", ObservableKind::Iplus},
                                                                 {"W", ObservableKind::W}};
  std::string csv = header_line(cfg) + "y";
  for (std::size_t a = 0; a < obs.size(); ++a)
    for (std::size_t b = a; b < obs.size(); ++b) csv += std::string(",") + obs[a].first + "_" + obs[b].first;
  csv += "\n";
  for (int k = 0; k < cfg.y_points; ++k) {
    const double y = static_cast<double>(k) / (cfg.y_points - 1);
    CovarianceEvaluator cov(ctx, y);
    csv += fmt17(y);
    for (std::size_t a = 0; a < obs.size(); ++a)
      for (std::size_t b = a; b < obs.size(); ++b)
        csv += "," + fmt17(cov(observable_functional(ctx.spec, Observable::of(obs[a].second)),
                               observable_functional(ctx.spec, Observable::of(obs[b].second))));
    csv += "\n";
  }
  nlohmann::ordered_json laws = nlohmann::ordered_json::array();
  for (auto k : {ObservableKind::S, ObservableKind::D, ObservableKind::Hplus, ObservableKind::Iplus, ObservableKind::W})
    laws.push_back(law_json(final_state_law(ctx, Observable::of(k), cfg.root())));
  return {{"covariance.csv", csv}, {"laws.json", dump(cfg, {{"laws", laws}})}};
}

inline OutputSet run_risk(const RunConfig& cfg) {
  const KernelContext ctx(load_spec(cfg), cfg.quad());
  const RiskSpec risk = load_risk(cfg, ctx.spec);
  std::string csv = header_line(cfg) + "z,f_diamond,f_diamond_prime\n";
  for (int k = 0; k < cfg.z_points; ++k) {
    const double z = static_cast<double>(k) / (cfg.z_points - 1);
    const auto v = f_diamond(ctx.spec, risk, z);
    csv += fmt17(z) + "," + fmt17(v.value) + "," + fmt17(v.derivative) + "\n";
  }
  const DiamondLaw dl = diamond_limit_and_variance(ctx, risk, cfg.root());
  nlohmann::ordered_json body{{"diamond", law_json(dl.law)},
                              {"sigma_11", dl.sigma_11},
                              {"sigma_22", dl.sigma_22},
                              {"sigma_12", dl.sigma_12},
                              {"sigma_diamond_W", dl.sigma_diamond_W},
                              {"sigma_WW", dl.sigma_WW}};
  if (risk.has_random()) body["diamond_random"] = law_json(random_loss_final_law(ctx, risk, cfg.root()));
  return {{"risk.json", dump(cfg, body)}, {"f_diamond.csv", csv}};
}

inline OutputSet run_intervene(const RunConfig& cfg) {
  const NetworkSpec spec = load_spec(cfg);
  const auto ids = class_ids(spec);
  const Observable dia = cfg.risk_path.empty()
                             ? Observable::diamond(0.0, std::vector<double>(ids.size(), 1.0),
                                                   std::vector<double>(ids.size(), 0.0))
                             : diamond_observable(spec, load_risk(cfg, spec));
  const auto costs = per_class(cfg.costs, ids, "costs", 0.0, std::numeric_limits<double>::infinity());
  OptimizerOptions opt;
  opt.K = cfg.grid_k;
  opt.min_step = cfg.min_step;
  opt.root = cfg.root();
  const OptimizationResult res = optimize_plan(spec, dia, costs, cfg.budget, opt);
  const InterventionLimits best = eval_intervened_limits(spec, res.alpha, dia, costs, cfg.root());
  nlohmann::ordered_json alpha;
  for (std::size_t i = 0; i < ids.size(); ++i) alpha[ids[i]] = res.alpha[i];
  nlohmann::ordered_json body{{"budget", cfg.budget},
                              {"alpha", alpha},
                              {"value", res.value},
                              {"cost", res.cost},
                              {"f_D", best.f_D},
                              {"fixed_point", fixed_point_json(best.fixed_point)},
                              {"unstable_points", res.unstable_count},
                              {"refinement_evaluations", res.refinement_evaluations}};
  if (!cfg.alpha.empty()) {
    const auto a = per_class(cfg.alpha, ids, "alpha", 0.0, 1.0);
    const InterventionLimits lim = eval_intervened_limits(spec, a, dia, costs, cfg.root());
    body["configured_plan"] = {{"f_D", lim.f_D},
                               {"value", lim.f_diamond},
                               {"cost", lim.cost},
                               {"fixed_point", fixed_point_json(lim.fixed_point)},
                               {"warning", lim.warning}};
  }
  std::string csv = header_line(cfg);
  for (const auto& id : ids) csv += "alpha_" + id + ",";
  csv += "value,cost,stable,feasible\n";
  for (const auto& g : res.grid) {
    for (double a : g.alpha) csv += fmt17(a) + ",";
    csv += fmt17(g.value) + "," + fmt17(g.cost) + "," + (g.stable ? "1" : "0") + "," + (g.feasible ? "1" : "0") + "\n";
  }
  return {{"plan.json", dump(cfg, body)}, {"grid.csv", csv}};
}

inline OutputSet run_simulate(const RunConfig& cfg) {
  EnsembleConfig ec;
  ec.spec = load_spec(cfg);
  ec.n = cfg.n;
  ec.m = cfg.replications;
  ec.master_seed = cfg.seed;
  ec.threads = cfg.threads;
  ec.root = cfg.root();
  ec.loss_mode = cfg.loss_mode;
  if (!cfg.risk_path.empty()) ec.risk = load_risk(cfg, ec.spec);
  if (!cfg.alpha.empty()) {
    InterventionPlan p;
    p.alpha = cfg.alpha;
    ec.plan = p;
  }
  ec.observables.clear();
  for (const auto& name : cfg.observables) {
    const ObservableKind k = kind_of(name);
    if (k == ObservableKind::Diamond) {
      if (!ec.risk) throw ConfigError("observable 'diamond' needs a risk spec");
      ec.observables.push_back(diamond_observable(ec.spec, *ec.risk));
    } else {
      ec.observables.push_back(Observable::of(k));
    }
  }
  const FixedPoint fp = solve_zstar(ec.spec, cfg.root());
  if (cfg.time_points > 0) {
    const double tmax = cfg.time_max > 0.0 ? cfg.time_max : (fp.z_star > 0.0 ? -std::log(fp.z_star) : 5.0);
    for (int k = 0; k < cfg.time_points; ++k) ec.time_grid.push_back(tmax * k / cfg.time_points);
  }
  const EnsembleStats st = run_ensemble(ec);

  std::vector<AnalyticTarget> targets;
  if (!ec.plan) {
    const KernelContext ctx(ec.spec, cfg.quad());
    for (const auto& o : ec.observables) {
      const GaussianLaw law = (o.kind == ObservableKind::Diamond && ec.loss_mode == LossMode::random &&
                               ec.risk->has_random())
                                  ? random_loss_final_law(ctx, *ec.risk, cfg.root())
                                  : final_state_law(ctx, o, cfg.root());
      if (law.available) targets.push_back({o.name(), law.limit, law.variance});
    }
  }
  const auto rows = compare_report(st, targets);

  std::string stats = header_line(cfg) + "observable,mean_fraction,mean_center,standardized_variance\n";
  std::string samples = header_line(cfg) + "replication";
  for (const auto& o : st.observables) {
    stats += o.name + "," + fmt17(o.mean_fraction) + "," + fmt17(o.mean_center) + "," + fmt17(o.variance) + "\n";
    samples += "," + o.name;
  }
  samples += "\n";
  for (std::size_t i = 0; i < st.m; ++i) {
    samples += std::to_string(i);
    for (const auto& o : st.observables) samples += "," + fmt17(o.standardized[i]);
    samples += "\n";
  }
  nlohmann::ordered_json report = nlohmann::ordered_json::array();
  bool all = true;
  for (const auto& r : rows) {
    all = all && r.pass();
    report.push_back({{"observable", r.name},
                      {"empirical_mean", r.empirical_mean},
                      {"limit", r.limit},
                      {"gap", r.gap},
                      {"standard_error", r.standard_error},
                      {"empirical_variance", r.empirical_variance},
                      {"analytic_variance", r.analytic_variance},
                      {"ratio", r.ratio},
                      {"ks_statistic", r.ks_statistic},
                      {"ks_p", r.ks_p},
                      {"mean_pass", r.mean_pass},
                      {"variance_pass", r.variance_pass},
                      {"ks_pass", r.ks_pass}});
  }
  OutputSet out{{"stats.csv", stats},
                {"standardized.csv", samples},
                {"report.json", dump(cfg, {{"n", st.n},
                                           {"replications", st.m},
                                           {"fixed_point", fixed_point_json(fp)},
                                           {"rows", report},
                                           {"all_pass", all}})}};
  if (!st.time_grid.empty()) {
    std::string tr = header_line(cfg) + "t,S,D,W,Hplus,Iplus,f_S,f_D,f_W,f_Hplus,f_Iplus\n";
    for (std::size_t g = 0; g < st.time_grid.size(); ++g) {
      const auto& p = st.trajectory_means[g];
      const LimitReport lim = trajectory_limits(ec.spec, st.time_grid[g]);
      tr += fmt17(st.time_grid[g]);
      for (double v : p) tr += "," + fmt17(v);
      tr += "," + fmt17(lim.f_S) + "," + fmt17(lim.f_D) + "," + fmt17(lim.f_W) + "," + fmt17(lim.f_Hplus) + "," +
            fmt17(lim.f_Iplus) + "\n";
    }
    out["trajectory.csv"] = tr;
  }
  return out;
}

} // namespace detail

inline OutputSet run_pipeline(const RunConfig& cfg) {
  const std::string& s = cfg.subcommand;
  if (s == "validate") return detail::run_validate(cfg);
  if (s == "generate") return detail::run_generate(cfg);
  if (s == "cascade") return detail::run_cascade(cfg);
  if (s == "limits") return detail::run_limits(cfg);
  if (s == "clt") return detail::run_clt(cfg);
  if (s == "risk") return detail::run_risk(cfg);
  if (s == "intervene") return detail::run_intervene(cfg);
  if (s == "simulate") return detail::run_simulate(cfg);
  throw ConfigError("unknown subcommand '" + s + "'");
}

// Writes every file to a temporary name first and renames only once all
// writes have succeeded.
inline void write_outputs(const std::string& dir, const OutputSet& files) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
  std::vector<fs::path> tmps;
  auto cleanup = [&] {
    for (const auto& t : tmps) fs::remove(t, ec);
  };
  for (const auto& [name, content] : files) {
    const fs::path tmp = fs::path(dir) / (name + ".tmp");
    std::ofstream out(tmp, std::ios::binary);
    tmps.push_back(tmp);
    if (!(out << content) || !out.flush()) {
      cleanup();
      throw IoError("cannot write '" + tmp.string() + "'");
    }
  }
  for (const auto& [name, content] : files) {
    fs::rename(fs::path(dir) / (name + ".tmp"), fs::path(dir) / name, ec);
    if (ec) {
      cleanup();
      throw IoError("cannot finalize '" + name + "': " + ec.message());
    }
  }
}

// Exit status: 0 success, otherwise the error category code.
inline int dispatch(const RunConfig& cfg, std::ostream& err = std::cerr) {
  try {
    const OutputSet files = run_pipeline(cfg);
    write_outputs(cfg.output_dir, files);
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(e.category());
  } catch (const std::bad_alloc&) {
    err << "error: out of memory\n";
    return static_cast<int>(ErrorCategory::numeric);
  }
}

} // namespace contagion

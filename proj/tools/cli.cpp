#include "hallci/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

#include "hallci/direction_geometry.hpp"
#include "hallci/iteration_driver.hpp"
#include "hallci/mikado_blocks.hpp"
#include "hallci/parallel.hpp"
#include "hallci/stress_assembler.hpp"

namespace hallci::cli {

using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::map<std::string, std::string> read_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config not found: " + path);
  std::map<std::string, std::string> out;
  std::string line;
  int n = 0;
  while (std::getline(f, line)) {
    ++n;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(path + ":" + std::to_string(n) + ": expected key=value");
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

std::string RunConfig::str(const std::string& key) const {
  auto it = values.find(key);
  if (it == values.end()) throw ConfigError("missing config key: " + key);
  return it->second;
}

double RunConfig::num(const std::string& key) const {
  std::string s = str(key);
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + ": not a number: " + s);
  }
}

int RunConfig::integer(const std::string& key) const {
  double v = num(key);
  if (v != std::floor(v)) throw ConfigError("config key " + key + ": not an integer: " + str(key));
  return static_cast<int>(v);
}

std::vector<double> RunConfig::list(const std::string& key) const {
  std::vector<double> out;
  std::stringstream ss(str(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("config key " + key + ": not a number list: " + str(key));
    }
  }
  return out;
}

std::string RunConfig::resolved_text() const {
  std::string s = "subcommand=" + subcommand + "\n";
  for (const auto& [k, v] : values) s += k + "=" + v + "\n";
  s += "output_dir=" + output_dir + "\n";
  return s;
}

Check check_le(const std::string& name, double value, double tol) {
  return {name, "<=", tol, value, value <= tol};
}
Check check_ge(const std::string& name, double value, double tol) {
  return {name, ">=", tol, value, value >= tol};
}
Check check_true(const std::string& name, bool ok) { return {name, "true", 1.0, ok ? 1.0 : 0.0, ok}; }

namespace {

// ---- shared helpers ----------------------------------------------------------------------------

const std::map<std::string, std::map<std::string, std::string>>& defaults() {
  static const std::map<std::string, std::map<std::string, std::string>> d = {
      {"verify-blocks", {{"mu", "8"}, {"sigma", "2"}, {"family", "1"}, {"grid", "1024"}, {"mode", "per_family"}}},
      {"helicity", {{"m", "1"}, {"grid", "256"}, {"t", "0.55"}}},
      {"calibrate-delta", {{"samples", "10000"}, {"seed", "12345"}}},
      {"residual", {{"m", "1"}, {"grid", "64"}, {"nt", "65"}, {"tests", "4"}, {"seed", "12345"}}},
      {"mollify-limit", {{"m", "1"}, {"grid", "128"}, {"nt", "129"}, {"lambdas", "4,8,16"}}},
  };
  return d;
}

std::map<std::string, std::string> iterate_defaults() {
  return {{"m", "1"},     {"grid", "256"},     {"nt", "65"}, {"mu", "8"},  {"sigma", "2"},     {"l", "0.0625"},
          {"mode", "common"}, {"delta", "0"}, {"beta", "0"}, {"b", "2"}, {"M", "1"}, {"keep_stresses", "1"}};
}

struct Outcome {
  json report = json::object();
  std::vector<Check> checks;
};

json checks_json(const std::vector<Check>& cs) {
  json a = json::array();
  for (const auto& c : cs)
    a.push_back({{"name", c.name}, {"relation", c.relation}, {"tolerance", c.tolerance}, {"value", c.value},
                 {"pass", c.pass}});
  return a;
}

GridSpec grid_of(const RunConfig& c, bool timed) {
  return make_grid(c.integer("grid"), timed ? c.integer("nt") : 1);
}

// ---- subcommands ------------------------------------------------------------------------------

Outcome verify_blocks_cmd(const RunConfig& c) {
  Outcome o;
  double mu = c.num("mu");
  int sigma = c.integer("sigma");
  NLambdaMode mode = n_lambda_mode_from_string(c.str("mode"));
  int n = c.integer("grid");
  std::string fam = c.str("family");
  if (fam != "1" && fam != "2" && fam != "all") throw ConfigError("family must be 1, 2 or all");
  ShiftPlan plan = assign_shifts(mu, sigma, mode);
  json blocks = json::array();
  std::vector<MikadoBlock> built;
  for (const auto& d : lambda_sets()) {
    built.emplace_back(d, mu, sigma, block_n_lambda(d, mode), plan.shift[direction_id(d)], n);
    if (fam != "all" && std::to_string(d.family) != fam) continue;
    BlockChecks b = verify_block(built.back());
    std::string id = d.label();
    blocks.push_back({{"direction", id},
                      {"div_W", b.div_W},
                      {"div_Omega_minus_W", b.div_Omega_minus_W},
                      {"div_WW", b.div_WW},
                      {"mean_WW_minus_kk", b.mean_WW_minus_kk},
                      {"mean_phi2_minus_1", b.mean_phi2_minus_1},
                      {"phi_minus_lap_Phi", b.phi_minus_lap_Phi},
                      {"omega_skew", b.omega_skew},
                      {"period_shift", b.period_shift},
                      {"spectral_lap_defect", b.spectral_lap_defect}});
    o.checks.push_back(check_le(id + " identities", b.max_defect(), 1e-10));
  }
  for (const auto& p : plan.pairs) {
    const Direction& a = lambda_sets()[p.a];
    const Direction& b = lambda_sets()[p.b];
    if (fam != "all" && std::to_string(a.family) != fam && std::to_string(b.family) != fam) continue;
    o.checks.push_back(check_le("overlap " + a.label() + " " + b.label(),
                                static_cast<double>(mask_overlap(built[p.a], built[p.b])), 0.0));
  }
  o.report["blocks"] = blocks;
  o.report["shift_margin"] = plan.min_margin();
  return o;
}

Outcome helicity_cmd(const RunConfig& c) {
  Outcome o;
  int m = c.integer("m");
  double t = c.num("t");
  if (t < 0.0 || t > 1.0) throw ConfigError("t must lie in [0,1]");
  GridSpec g = grid_of(c, false);
  TorusField b = sample(g, Rank::vector3, [m, t](double, double x1, double x2, double* out) {
    double a = m * psi(t);
    out[0] = a * std::sin(x2);
    out[1] = a * std::cos(x1);
    out[2] = -a * (std::sin(x1) + std::cos(x2));
  });
  double h = helicity(b).front();
  double expected = 8.0 * std::numbers::pi * std::numbers::pi * m * m * psi(t) * psi(t);
  double err = expected != 0.0 ? std::abs(h - expected) / expected : std::abs(h);
  o.report["value"] = h;
  o.report["closed_form"] = expected;
  o.report["psi"] = psi(t);
  o.checks.push_back(check_le("closed-form helicity", err, 1e-6));
  return o;
}

Outcome calibrate_cmd(const RunConfig& c) {
  Outcome o;
  int n = c.integer("samples");
  auto seed = static_cast<std::uint64_t>(c.num("seed"));
  for (int f : {1, 2}) {
    DeltaCalibration d = calibrate_delta(f, n, seed);
    o.report["family" + std::to_string(f)] = {{"bisected", d.bisected}, {"delta", d.delta}, {"analytic", d.analytic},
                                                {"samples", d.n_samples}, {"seed", d.seed}};
    o.checks.push_back(check_le("family " + std::to_string(f) + " delta within analytic bound", d.delta, d.analytic));
  }
  return o;
}

Outcome residual_cmd(const RunConfig& c) {
  Outcome o;
  GridSpec g = grid_of(c, true);
  EquationParams eq;
  auto [u, b] = background_fields(c.integer("m"), g);
  TorusField p;
  StressPair s = initial_stresses(u, b, eq, &p);
  ResidualReport r = residual(u, b, s.R_u, s.R_B, eq);
  auto tests = default_test_family(g, c.integer("tests"), static_cast<std::uint64_t>(c.num("seed")));
  double weak = weak_form_check(u, b, tests, eq, &s.R_u, &s.R_B);
  o.report["velocity_relative"] = r.velocity_relative();
  o.report["magnetic_relative"] = r.magnetic_relative();
  o.report["velocity_l1"] = r.velocity_l1;
  o.report["magnetic_l1"] = r.magnetic_l1;
  o.report["weak_form_defect"] = weak;
  json terms = json::array();
  for (const auto& t : r.terms) terms.push_back({{"equation", t.equation}, {"term", t.term}, {"l2", t.l2}});
  o.report["terms"] = terms;
  o.checks.push_back(check_le("velocity residual", r.velocity_relative(), 1e-6));
  o.checks.push_back(check_le("magnetic residual", r.magnetic_relative(), 1e-6));
  o.checks.push_back(check_le("weak form defect", weak, 1e-6));
  return o;
}

Outcome mollify_cmd(const RunConfig& c) {
  Outcome o;
  GridSpec g = grid_of(c, true);
  auto [u, b] = background_fields(c.integer("m"), g);
  EquationParams eq;
  std::vector<double> lambdas = c.list("lambdas"), nu_l1, nb_l1;
  json rows = json::array();
  for (double lam : lambdas) {
    MollificationStresses ms = mollification_stresses(u, b, lam, eq.alpha1, eq.alpha2);
    double ru = norm(ms.stresses.R_u, NormKind::Lp(1.0), TimeReduce::sup);
    double rb = norm(ms.stresses.R_B, NormKind::Lp(1.0), TimeReduce::sup);
    nu_l1.push_back(ru);
    nb_l1.push_back(rb);
    rows.push_back({{"lambda_n", lam}, {"nu1_n", ms.nu1_n}, {"nu2_n", ms.nu2_n}, {"R_u_l1", ru}, {"R_B_l1", rb}});
  }
  o.report["runs"] = rows;
  bool dec_u = true, dec_b = true;
  for (std::size_t i = 1; i < lambdas.size(); ++i) {
    dec_u = dec_u && nu_l1[i] < nu_l1[i - 1];
    dec_b = dec_b && nb_l1[i] < nb_l1[i - 1];
  }
  o.checks.push_back(check_true("R_u L1 strictly decreasing", dec_u));
  o.checks.push_back(check_true("R_B L1 strictly decreasing", dec_b));
  if (lambdas.size() >= 2) {
    double eu = fit_exponent(lambdas, nu_l1), eb = fit_exponent(lambdas, nb_l1);
    o.report["exponent_u"] = eu;
    o.report["exponent_B"] = eb;
    o.checks.push_back(check_le("R_u decay exponent", eu, -0.5));
    o.checks.push_back(check_le("R_B decay exponent", eb, -0.5));
  }
  return o;
}

struct IterateRun {
  IterationState start;
  IterationResult result;
};

IterateRun run_iteration(const RunConfig& c) {
  GridSpec g = grid_of(c, true);
  DeskOverrides d;
  d.mu = c.num("mu");
  d.sigma = c.integer("sigma");
  d.l = c.num("l");
  d.beta = c.num("beta");
  d.b = c.integer("b");
  d.mode = n_lambda_mode_from_string(c.str("mode"));
  ParamSchedule s = desk_schedule(d);
  EquationParams eq;
  IterateRun r{background_state(c.integer("m"), g, s, eq), {}};
  IterateOptions opt;
  opt.eq = eq;
  opt.delta = c.num("delta");
  opt.keep_stresses = c.integer("keep_stresses") != 0;
  r.result = iterate_once(r.start, opt);
  return r;
}

void iteration_checks(const IterationChecks& k, Outcome& o) {
  o.checks.push_back(check_le("magnetic reconstruction", k.reconstruction_magnetic, 1e-10));
  o.checks.push_back(check_le("velocity reconstruction", k.reconstruction_velocity, 1e-10));
  o.checks.push_back(check_le("magnetic expansion", k.expansion_magnetic, 1e-10));
  o.checks.push_back(check_le("velocity expansion", k.expansion_velocity, 1e-10));
  o.checks.push_back(check_le("perturbation divergence", k.perturbation_divergence, 1e-10));
  o.checks.push_back(check_le("idempotence", k.idempotence, 1e-8));
  o.checks.push_back(check_le("stress asymmetry", k.stress_asymmetry, 1e-10));
  o.checks.push_back(check_le("stress trace", k.stress_trace, 1e-10));
  o.checks.push_back(check_le("field divergence", k.field_divergence, 1e-10));
  o.checks.push_back(check_le("field mean", k.field_mean, 1e-12));
  o.checks.push_back(check_le("velocity residual", k.residual.velocity_relative(), 1e-5));
  o.checks.push_back(check_le("magnetic residual", k.residual.magnetic_relative(), 1e-5));
  o.checks.push_back(check_le("velocity ledger completeness", k.ledger_defect_u, 1e-8));
  o.checks.push_back(check_le("magnetic ledger completeness", k.ledger_defect_B, 1e-8));
  o.checks.push_back(check_true("support inclusion", k.support_inclusion));
  o.report["r0"] = k.r0;
  o.report["delta"] = k.delta;
  o.report["aliasing_defect"] = k.aliasing_defect;
  o.report["corrector_ratio"] = k.corrector_ratio;
  o.report["collar"] = k.collar;
  o.report["collar_bound"] = k.collar_bound;
}

json intervals(const std::vector<TimeInterval>& v) {
  json a = json::array();
  for (const auto& i : v) a.push_back({i.a, i.b});
  return a;
}

Outcome decompose_cmd(const RunConfig& c) {
  Outcome o;
  IterateRun r = run_iteration(c);
  write_ledger_csv(r.result.ledger, c.output_dir + "/ledger.csv");
  iteration_checks(r.result.checks, o);
  json parts = json::object();
  for (const auto& row : r.result.ledger) parts[row.part][row.norm_kind] = row.value;
  o.report["parts"] = parts;
  return o;
}

Outcome iterate_cmd(const RunConfig& c) {
  Outcome o;
  IterateRun r = run_iteration(c);
  write_ledger_csv(r.result.ledger, c.output_dir + "/ledger.csv");
  iteration_checks(r.result.checks, o);
  const IterationState& s = r.result.state;
  write_snapshot(s.u.materialize(), c.output_dir + "/u_next");
  write_snapshot(s.b.materialize(), c.output_dir + "/B_next");
  o.report["q"] = s.q;
  o.report["old_support"] = intervals(r.result.checks.old_support);
  o.report["new_support"] = intervals(r.result.checks.new_support);
  return o;
}

Outcome report_cmd(const RunConfig& c) {
  Outcome o;
  IterateRun r = run_iteration(c);
  write_ledger_csv(r.result.ledger, c.output_dir + "/ledger.csv");
  iteration_checks(r.result.checks, o);
  InductiveReport ir = inductive_report(r.start, r.result.state, c.num("M"));
  json e = json::array();
  for (const auto& x : ir.entries) e.push_back({{"name", x.name}, {"lhs", x.lhs}, {"rhs", x.rhs}, {"ratio", x.ratio()}});
  o.report["inductive"] = {{"entries", e},
                           {"verdict", ir.verdict},
                           {"collar", ir.collar},
                           {"support_within_delta", ir.support_within_delta},
                           {"support_within_3l", ir.support_within_3l},
                           {"empirical_M", std::isnan(ir.empirical_M) ? json(nullptr) : json(ir.empirical_M)}};
  o.checks.push_back(check_true("support within 3l collar", ir.support_within_3l));
  return o;
}

}  // namespace

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Convex-integration step engine for 2.5D Hall-MHD"};
  app.require_subcommand(1);
  const std::vector<std::string> subs = {"verify-blocks", "decompose",       "iterate", "residual",
                                         "helicity",      "mollify-limit",   "calibrate-delta", "report"};
  const std::vector<std::string> keys = {"grid", "nt",    "m",      "t",     "mu",      "sigma", "family",
                                         "l",    "mode",  "delta",  "beta",  "b",       "M",     "seed",
                                         "samples", "lambdas", "tests", "keep_stresses"};
  std::map<std::string, std::map<std::string, std::string>> flags;
  std::map<std::string, std::string> config_path, output, threads;
  for (const auto& s : subs) {
    CLI::App* sc = app.add_subcommand(s);
    sc->add_option("--config", config_path[s], "key=value run configuration");
    sc->add_option("--output", output[s], "output directory");
    sc->add_option("--threads", threads[s], "worker threads");
    for (const auto& k : keys) sc->add_option("--" + k, flags[s][k]);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }
  std::string sub;
  for (const auto& s : subs)
    if (app.got_subcommand(s)) sub = s;

  RunConfig cfg;
  cfg.subcommand = sub;
  try {
    bool iterative = sub == "decompose" || sub == "iterate" || sub == "report";
    cfg.values = iterative ? iterate_defaults() : defaults().at(sub);
    if (!config_path[sub].empty())
      for (const auto& [k, v] : read_config(config_path[sub])) cfg.values[k] = v;
    for (const auto& [k, v] : flags[sub])
      if (!v.empty()) cfg.values[k] = v;
    std::string outdir = output[sub];
    if (outdir.empty() && cfg.values.count("output_dir")) outdir = cfg.values["output_dir"];
    if (outdir.empty()) {
      const char* env = std::getenv("HALLCI_OUTPUT_DIR");
      outdir = env ? env : "hallci_out";
    }
    cfg.values.erase("output_dir");
    cfg.output_dir = outdir;
    std::string th = threads[sub].empty() ? (cfg.values.count("threads") ? cfg.values["threads"] : "") : threads[sub];
    if (!th.empty()) set_thread_count(std::stoi(th));
    std::filesystem::create_directories(outdir);
    std::ofstream(outdir + "/" + sub + ".cfg") << cfg.resolved_text();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  Outcome o;
  try {
    if (sub == "verify-blocks") o = verify_blocks_cmd(cfg);
    else if (sub == "helicity") o = helicity_cmd(cfg);
    else if (sub == "calibrate-delta") o = calibrate_cmd(cfg);
    else if (sub == "residual") o = residual_cmd(cfg);
    else if (sub == "mollify-limit") o = mollify_cmd(cfg);
    else if (sub == "decompose") o = decompose_cmd(cfg);
    else if (sub == "iterate") o = iterate_cmd(cfg);
    else o = report_cmd(cfg);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }

  bool all = true;
  for (const auto& c : o.checks) all = all && c.pass;
  json doc = o.report;
  doc["subcommand"] = sub;
  doc["config"] = cfg.values;
  doc["checks"] = checks_json(o.checks);
  doc["pass"] = all;
  std::ofstream(cfg.output_dir + "/" + sub + ".json") << doc.dump(2) << "\n";
  out << doc.dump(2) << "\n";
  for (const auto& c : o.checks)
    if (!c.pass) err << "check failed: " << c.name << " (" << full(c.value) << " " << c.relation << " " << full(c.tolerance) << ")\n";
  return all ? 0 : 1;
}

}  // namespace hallci::cli

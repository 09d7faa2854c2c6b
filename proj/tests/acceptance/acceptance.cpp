// Acceptance suite: one PASS/FAIL line per criterion. Optional arguments pick
// a subset by number, e.g. `acceptance 1 2 10`.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "generators.hpp"
#include "hallci/direction_geometry.hpp"
#include "hallci/iteration_driver.hpp"
#include "hallci/mikado_blocks.hpp"
#include "hallci/parallel.hpp"
#include "hallci/perturbation_builder.hpp"
#include "hallci/spectral_calculus.hpp"
#include "hallci/stress_assembler.hpp"

using namespace hallci;
using std::numbers::pi;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    if (!detail.empty()) detail += "; ";
    detail += what;
    if (!ok) detail += " [fail]";
  }
  void le(const std::string& name, double v, double tol) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s=%.3g<=%.0e", name.c_str(), v, tol);
    require(v <= tol, buf);
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

double rel_l2(const TorusField& a, const TorusField& b) {
  double d = norm(a - b, NormKind::Lp(2.0));
  double s = std::max(norm(a, NormKind::Lp(2.0)), norm(b, NormKind::Lp(2.0)));
  return s > 0.0 ? d / s : d;
}

const Direction& find(int family, std::array<int, 3> k) {
  for (const auto& d : lambda_sets())
    if (d.family == family && d.k_num == k) return d;
  throw std::logic_error("direction not in table");
}

MikadoBlock block_for(const Direction& d, double mu, int sigma, NLambdaMode mode, int n) {
  ShiftPlan plan = assign_shifts(mu, sigma, mode);
  return MikadoBlock(d, mu, sigma, block_n_lambda(d, mode), plan.shift[direction_id(d)], n);
}

ParamSchedule desk(double mu, double l) {
  DeskOverrides d;
  d.mu = mu;
  d.sigma = 2;
  d.l = l;
  return desk_schedule(d);
}

Outcome geometric_lemma() {
  Outcome o;
  auto t0 = std::chrono::steady_clock::now();
  double frame = 0.0;
  for (int fam : {1, 2}) {
    Mat3 s{};
    for (const auto& d : family_directions(fam)) {
      Mat3 kk = d.k_outer_k();
      for (int e = 0; e < 9; ++e) s[e] += 0.5 * kk[e];
    }
    for (int e = 0; e < 9; ++e) frame = std::max(frame, std::abs(s[e] - (e % 4 == 0 ? 1.0 : 0.0)));
  }
  o.le("frame_sum", frame, 1e-15);

  double delta = global_delta();
  Mat3 id{1, 0, 0, 0, 1, 0, 0, 0, 1};
  double half = 0.0;
  for (int fam : {1, 2})
    for (double g : solve_gamma(id, fam, delta)) half = std::max(half, std::abs(g - 0.5));
  o.le("gamma_id", half, 1e-12);

  std::mt19937_64 rng(7);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    Mat3 p{};
    for (int a = 0; a < 3; ++a)
      for (int b = a; b < 3; ++b) p[3 * a + b] = p[3 * b + a] = gauss(rng);
    double pn = 0.0;
    for (double x : p) pn += x * x;
    double r = delta * unit(rng) / std::sqrt(pn);
    Mat3 m{};
    for (int e = 0; e < 9; ++e) m[e] = (e % 4 == 0 ? 1.0 : 0.0) + r * p[e];
    int fam = 1 + i % 2;
    Mat3 rec = reconstruct(solve_gamma(m, fam, delta), fam);
    double err = 0.0;
    for (int e = 0; e < 9; ++e) err += (rec[e] - m[e]) * (rec[e] - m[e]);
    worst = std::max(worst, std::sqrt(err));
  }
  o.le("reconstruction", worst, 1e-12);
  double t = seconds_since(t0);
  o.require(t < 1.0, fmt("runtime=%.2fs<1s", t));
  return o;
}

Outcome block_identities() {
  Outcome o;
  auto t0 = std::chrono::steady_clock::now();
  ShiftPlan plan = assign_shifts(8.0, 2, NLambdaMode::per_family);
  BlockChecks worst;
  for (const auto& d : lambda_sets()) {
    MikadoBlock b(d, 8.0, 2, block_n_lambda(d, NLambdaMode::per_family), plan.shift[direction_id(d)], 1024);
    BlockChecks c = verify_block(b);
    worst.div_W = std::max(worst.div_W, c.div_W);
    worst.div_Omega_minus_W = std::max(worst.div_Omega_minus_W, c.div_Omega_minus_W);
    worst.div_WW = std::max(worst.div_WW, c.div_WW);
    worst.mean_WW_minus_kk = std::max(worst.mean_WW_minus_kk, c.mean_WW_minus_kk);
    worst.mean_phi2_minus_1 = std::max(worst.mean_phi2_minus_1, c.mean_phi2_minus_1);
    worst.phi_minus_lap_Phi = std::max(worst.phi_minus_lap_Phi, c.phi_minus_lap_Phi);
  }
  o.le("div_W", worst.div_W, 1e-10);
  o.le("div_Omega-W", worst.div_Omega_minus_W, 1e-10);
  o.le("div_WW", worst.div_WW, 1e-10);
  o.le("mean_WW-kk", worst.mean_WW_minus_kk, 1e-10);
  o.le("mean_phi2-1", worst.mean_phi2_minus_1, 1e-10);
  o.le("phi-lap_Phi", worst.phi_minus_lap_Phi, 1e-10);
  double t = seconds_since(t0);
  o.require(t < 60.0, fmt("runtime=%.1fs<60s", t));
  return o;
}

Outcome shift_disjointness() {
  Outcome o;
  const int n = 1024;
  for (double mu : {8.0, 16.0}) {
    BlockSet set = build_blocks(mu, 2, NLambdaMode::per_family, n);
    std::int64_t overlap = 0;
    int cross = 0;
    for (const auto& p : set.plan.pairs) {
      overlap += mask_overlap(set.blocks[p.a], set.blocks[p.b]);
      if (lambda_sets()[p.a].family != lambda_sets()[p.b].family) ++cross;
    }
    o.require(overlap == 0 && cross > 0, fmt("mu=%g: %g shared pairs", mu, static_cast<double>(set.plan.pairs.size())) +
                                             ", " + std::to_string(cross) + " cross-family, overlap " +
                                             std::to_string(overlap));
  }
  return o;
}

Outcome intersection_scaling() {
  Outcome o;
  const Direction& a = find(1, {3, 4, 0});
  const Direction& b = find(1, {4, 0, 3});
  std::vector<double> mus = {8, 16, 32}, meas;
  for (double mu : mus)
    meas.push_back(intersection_report(block_for(a, mu, 2, NLambdaMode::per_family, 1024),
                                       block_for(b, mu, 2, NLambdaMode::per_family, 1024))
                       .support_measure);
  double e = fit_exponent(mus, meas);
  o.require(e <= -1.8, fmt("exponent=%.3f<=-1.8", e));
  return o;
}

Outcome intermittency_scaling() {
  Outcome o;
  const Direction& d = find(1, {3, 4, 0});
  std::vector<double> mus = {8, 16, 32, 64}, l1;
  for (double mu : mus) {
    MikadoBlock b(d, mu, 2, 5, {0.0, 0.0}, 16384);
    l1.push_back(b.grid_mean([](double v) { return std::abs(v); }));
  }
  double e = fit_exponent(mus, l1);
  o.require(std::abs(e + 0.5) <= 0.1, fmt("exponent=%.3f in -0.5+-0.1", e));
  return o;
}

Outcome decorrelation() {
  Outcome o;
  GridSpec g = make_grid(1024, 1);
  TorusField a = sample(g, Rank::scalar, [](double, double x1, double, double* v) { v[0] = std::sin(x1); });
  DecorrelationResult l2 = decorrelation_check(a, {4, 8, 16, 32}, 2.0);
  DecorrelationResult l1 = decorrelation_check(a, {4, 8, 16, 32}, 1.0);
  o.require(l2.exponent <= -0.4, fmt("L2 exponent=%.3f<=-0.4", l2.exponent) + (l2.exact ? " (exact)" : ""));
  o.require(l1.exponent <= -0.8, fmt("L1 exponent=%.3f<=-0.8", l1.exponent));
  return o;
}

struct BackgroundRun {
  bool done = false;
  double initial_u = 0.0, initial_B = 0.0, seconds = 0.0;
  IterationChecks checks;
};

BackgroundRun& background_run() {
  static BackgroundRun r;
  if (r.done) return r;
  auto t0 = std::chrono::steady_clock::now();
  GridSpec g = make_grid(512, 65);
  EquationParams eq;
  IterationState st = background_state(1, g, desk(16.0, 1.0 / 16.0), eq);
  ResidualReport init = residual(st.u, st.b, st.R_u, st.R_B, eq);
  r.initial_u = init.velocity_relative();
  r.initial_B = init.magnetic_relative();
  IterateOptions opt{eq};
  opt.keep_stresses = false;
  r.checks = iterate_once(st, opt).checks;
  r.seconds = seconds_since(t0);
  r.done = true;
  return r;
}

Outcome cancellation_identities() {
  Outcome o;
  const IterationChecks& c = background_run().checks;
  o.le("magnetic_cancellation", c.expansion_magnetic, 1e-10);
  o.le("velocity_cancellation", c.expansion_velocity, 1e-10);
  o.le("magnetic_ledger", c.ledger_defect_B, 1e-10);
  o.le("velocity_ledger", c.ledger_defect_u, 1e-10);
  return o;
}

Outcome end_to_end() {
  Outcome o;
  const BackgroundRun& r = background_run();
  o.le("initial_u", r.initial_u, 1e-6);
  o.le("initial_B", r.initial_B, 1e-6);
  o.le("residual_u", r.checks.residual.velocity_relative(), 1e-5);
  o.le("residual_B", r.checks.residual.magnetic_relative(), 1e-5);
  o.le("idempotence", r.checks.idempotence, 1e-8);
  o.require(r.checks.support_inclusion,
            fmt("support collar=%.4f<=%.4f", r.checks.collar, r.checks.collar_bound));
  o.require(r.seconds < 600.0, fmt("runtime=%.0fs<600s", r.seconds));
  return o;
}

Outcome operator_suite() {
  Outcome o;
  using namespace hallci::testing;
  std::mt19937_64 rng(99);
  GridSpec g = make_grid(64, 1);
  double div_r = 0, curl_inv = 0, curl_curl = 0, proj = 0, sym = 0, tr = 0;
  for (int trial = 0; trial < 100; ++trial) {
    int K = 1 + trial % 10;
    TorusField v = random_field(g, Rank::vector3, rng, K);
    TorusField r = inverse_divergence(v);
    div_r = std::max(div_r, rel_l2(differential(r, DiffOp::tensor_divergence), zero_mean(v)));
    sym = std::max(sym, asymmetry(r));
    tr = std::max(tr, trace_defect(r));

    TorusField b = random_div_free(g, rng, K);
    curl_inv = std::max(curl_inv, rel_l2(differential(inverse_curl(b), DiffOp::curl), b));
    TorusField cc = differential(differential(b, DiffOp::curl), DiffOp::curl);
    curl_curl = std::max(curl_curl, rel_l2(cc, apply_multiplier(b, MultiplierSymbol::fractional_laplacian(1.0))));

    TorusField f = random_field(g, Rank::scalar, rng, K);
    TorusField grad = differential(f, DiffOp::gradient);
    proj = std::max(proj, norm(helmholtz_project(grad), NormKind::Lp(2.0)) / norm(grad, NormKind::Lp(2.0)));
  }
  o.le("div_R-P", div_r, 1e-10);
  o.le("curl_curlinv-Id", curl_inv, 1e-10);
  o.le("curl_curl+lap", curl_curl, 1e-10);
  o.le("PH_grad", proj, 1e-10);
  o.le("R_asym", sym, 1e-10);
  o.le("R_trace", tr, 1e-10);
  return o;
}

Outcome closed_form_values() {
  Outcome o;
  GridSpec g = make_grid(256, 21);  // t₁₁ = 0.55 lies on the plateau
  auto [u, b] = background_fields(1, g);
  double l1 = norm_slice(u, 11, NormKind::Lp(1.0, 8));
  o.le("L1_u-8pi", std::abs(l1 - 8.0 * pi) / (8.0 * pi), 1e-6);
  std::vector<double> h = helicity(b);
  double worst = 0.0;
  for (int j = 0; j < g.n_t; ++j)
    if (psi(g.t(j)) == 1.0) worst = std::max(worst, std::abs(h[j] - 8.0 * pi * pi) / (8.0 * pi * pi));
  o.le("helicity-8pi2", worst, 1e-6);
  bool zero = true;
  for (int m : {1, 2, 3}) zero = zero && helicity(background_fields(m, g).second)[0] == 0.0;
  o.require(zero, "helicity(0)==0 for m=1,2,3");
  return o;
}

Outcome mollification_decay() {
  Outcome o;
  GridSpec g = make_grid(128, 129);
  auto [u, b] = background_fields(1, g);
  std::vector<double> lam = {4, 8, 16}, lu, lb;
  for (double l : lam) {
    MollificationStresses m = mollification_stresses(u, b, l, 0.5, 1.0);
    lu.push_back(norm(m.stresses.R_u, NormKind::Lp(1.0)));
    lb.push_back(norm(m.stresses.R_B, NormKind::Lp(1.0)));
  }
  o.require(lu[1] < lu[0] && lu[2] < lu[1], "R_u decreasing");
  o.require(lb[1] < lb[0] && lb[2] < lb[1], "R_B decreasing");
  double eu = fit_exponent(lam, lu), eb = fit_exponent(lam, lb);
  o.require(eu <= -0.5, fmt("R_u exponent=%.3f<=-0.5", eu));
  o.require(eb <= -0.5, fmt("R_B exponent=%.3f<=-0.5", eb));
  return o;
}

Outcome determinism() {
  Outcome o;
  GridSpec g = make_grid(128, 33);
  EquationParams eq;
  IterationState st = background_state(1, g, desk(4.0, 1.0 / 16.0), eq);
  int saved = thread_count();
  std::vector<std::string> csv;
  for (int threads : {1, 2, 4}) {
    set_thread_count(threads);
    IterateOptions opt{eq};
    opt.check_identities = false;
    csv.push_back(ledger_csv(iterate_once(st, opt).ledger));
  }
  set_thread_count(saved);
  o.require(csv[0] == csv[1] && csv[0] == csv[2], "ledger CSV identical for 1, 2, 4 threads");
  o.require(csv[0].size() > 100, std::to_string(csv[0].size()) + " bytes");
  return o;
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<Criterion> all = {
      {1, "geometric lemma", geometric_lemma},
      {2, "block identities", block_identities},
      {3, "shift disjointness", shift_disjointness},
      {4, "intersection scaling", intersection_scaling},
      {5, "intermittency scaling", intermittency_scaling},
      {6, "decorrelation", decorrelation},
      {7, "cancellation identities", cancellation_identities},
      {8, "operator suite", operator_suite},
      {9, "end-to-end consistency", end_to_end},
      {10, "closed-form background values", closed_form_values},
      {11, "vanishing-viscosity mollification", mollification_decay},
      {12, "determinism", determinism},
  };
  std::set<int> pick;
  for (int i = 1; i < argc; ++i) pick.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!pick.empty() && !pick.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    if (!o.pass) ++failed;
    std::printf("%s  %2d %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}

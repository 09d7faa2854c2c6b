#include <cmath>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "generators.hpp"
#include "hallci/iteration_driver.hpp"
#include "hallci/spectral_calculus.hpp"
#include "hallci/stress_assembler.hpp"

using namespace hallci;
using namespace hallci::testing;

namespace {

TorusField constant_vector(const GridSpec& g, double a, double b, double c) {
  return sample(g, Rank::vector3, [=](double, double, double, double* v) {
    v[0] = a;
    v[1] = b;
    v[2] = c;
  });
}

TorusField zero_tensor(const GridSpec& g) { return TorusField(g, Rank::tensor3x3, Symmetry::symmetric_traceless); }

// max |tr M| over all samples.
double abs_trace(const TorusField& m) {
  double w = 0.0;
  for (int j = 0; j < m.grid().n_t; ++j)
    for (std::size_t i = 0; i < m.grid().plane(); ++i)
      w = std::max(w, std::abs(m.plane(j, 0)[i] + m.plane(j, 4)[i] + m.plane(j, 8)[i]));
  return w;
}

}  // namespace

TEST_CASE("commutators: constants and vanishing magnetic field") {
  GridSpec g = make_grid(64, 33);
  TorusField u = constant_vector(g, 1.0, -2.0, 0.5);
  TorusField b = constant_vector(g, 0.3, 0.0, 1.0);
  CommutatorStresses c = commutator_stresses(u, b, 0.2);
  CHECK(max_abs(c.R_u) <= 1e-13);
  CHECK(max_abs(c.R_B1) <= 1e-13);
  CHECK(max_abs(c.R_B2) <= 1e-13);

  auto [ub, bb] = background_fields(1, g);
  TorusField zero(g, Rank::vector3);
  CommutatorStresses d = commutator_stresses(ub, zero, 0.2);
  CHECK(max_abs(d.R_u) > 0.0);
  CHECK(max_abs(d.R_B1) == 0.0);
  CHECK(max_abs(d.R_B2) == 0.0);
}

TEST_CASE("commutators: symmetry and decay in l on the background pair") {
  GridSpec g = make_grid(256, 65);
  auto [u, b] = background_fields(1, g);
  std::vector<double> ls = {0.2, 0.1, 0.05, 0.025}, c0;
  for (double l : ls) {
    CommutatorStresses c = commutator_stresses(u, b, l);
    double scale = max_abs(c.R_u);
    CHECK(asymmetry(c.R_u) == 0.0);
    CHECK(abs_trace(c.R_u) <= 1e-12 * scale);
    CHECK(abs_trace(c.R_B1) <= 1e-12 * max_abs(c.R_B1));
    CHECK(skew_defect(c.R_B2) <= 1e-12);
    c0.push_back(std::max({max_abs(c.R_u), max_abs(c.R_B1), max_abs(c.R_B2)}));
  }
  for (std::size_t i = 1; i < c0.size(); ++i) CHECK(c0[i] < c0[i - 1]);
  // l = 0.2 exceeds the plateau of ψ, so the rate is fitted on the three finer values.
  CHECK(fit_exponent({ls[1], ls[2], ls[3]}, {c0[1], c0[2], c0[3]}) >= 0.9);
  CHECK_THROWS(commutator_stresses(u, b, 0.01));
}

TEST_CASE("initial stresses: zero fields") {
  GridSpec g = make_grid(32, 9);
  TorusField z(g, Rank::vector3);
  TorusField p;
  StressPair s = initial_stresses(z, z, EquationParams{}, &p);
  CHECK(max_abs(s.R_u) == 0.0);
  CHECK(max_abs(s.R_B) == 0.0);
  CHECK(max_abs(p) == 0.0);
  ResidualReport r = residual(z, z, s.R_u, s.R_B, EquationParams{});
  CHECK(r.velocity_l2 == 0.0);
  CHECK(r.magnetic_l2 == 0.0);
}

TEST_CASE("initial stresses solve the relaxed system on the background pair") {
  GridSpec g = make_grid(64, 65);
  auto [u, b] = background_fields(1, g);
  EquationParams eq;
  TorusField p;
  StressPair s = initial_stresses(u, b, eq, &p);
  CHECK(asymmetry(s.R_u) <= 1e-12 * max_abs(s.R_u));
  CHECK(trace_defect(s.R_u) <= 1e-12 * max_abs(s.R_u));
  CHECK(asymmetry(s.R_B) <= 1e-12 * max_abs(s.R_B));
  CHECK(trace_defect(s.R_B) <= 1e-12 * max_abs(s.R_B));

  // p₀ = (|u|² − |B|²)/3 pointwise.
  TorusField expect = (1.0 / 3.0) * (dot(u, u) - dot(b, b));
  CHECK(max_abs_diff(p, expect) <= 1e-13 * max_abs(expect));

  ResidualReport r = residual(u, b, s.R_u, s.R_B, eq);
  CHECK(r.velocity_relative() <= 1e-6);
  CHECK(r.magnetic_relative() <= 1e-6);
  CHECK(r.pressure_free);
  for (const auto& t : r.terms) CHECK(std::isfinite(t.l2));

  // Ablation: dropping the magnetic stress breaks the induction equation.
  ResidualReport ablated = residual(u, b, s.R_u, zero_tensor(g), eq);
  CHECK(ablated.magnetic_relative() >= 1e3 * std::max(r.magnetic_relative(), 1e-300));
  CHECK(ablated.magnetic_relative() >= 1e-2);
  CHECK(ablated.velocity_relative() == doctest::Approx(r.velocity_relative()));

  // Velocity-only background.
  TorusField zero(g, Rank::vector3);
  StressPair su = initial_stresses(u, zero, eq);
  ResidualReport ru = residual(u, zero, su.R_u, su.R_B, eq);
  CHECK(ru.magnetic_relative() <= 1e-6);
  CHECK(ru.velocity_relative() <= 1e-6);

  TorusField not_div_free = sample(g, Rank::vector3, [](double, double x1, double, double* v) { v[0] = std::sin(x1); });
  CHECK_THROWS(initial_stresses(not_div_free, zero, eq));
}

TEST_CASE("error parts: trivial inputs give zero parts") {
  GridSpec g = make_grid(256, 1);
  BlockSet blocks = build_blocks(8.0, 2, NLambdaMode::per_family, 256);
  PerturbationSlice zero;
  zero.principal = TorusField(g, Rank::vector3);
  zero.corrector = TorusField(g, Rank::vector3);
  zero.total = TorusField(g, Rank::vector3);
  zero.potential = TorusField(g, Rank::tensor3x3, Symmetry::skew);
  TorusField zv(g, Rank::vector3);

  LinearInputs in{&zero, &zero, &zv, &zv, &zv, &zv};
  PartPair lin = linear_errors(in, EquationParams{});
  CHECK(max_abs(lin.u) == 0.0);
  CHECK(max_abs(lin.B) == 0.0);

  // Stationary, inviscid, no background: every linear term vanishes.
  CoefficientSlice c;
  c.family = 2;
  c.theta = 1.0;
  c.rho = TorusField(g, Rank::scalar);
  for (int k = 0; k < 6; ++k)
    c.a[k] = sample(g, Rank::scalar, [k](double, double, double, double* v) { v[0] = 0.4 + 0.05 * k; });
  PerturbationSlice d = assemble_slice(c, blocks);
  LinearInputs in2{&zero, &d, &zv, &zv, &zv, &zv};
  PartPair lin2 = linear_errors(in2, EquationParams{0.0, 0.0, 0.5, 1.0});
  CHECK(max_abs(lin2.u) == 0.0);
  CHECK(max_abs(lin2.B) <= 1e-12 * max_abs(d.principal));

  PartPair cor = corrector_errors(zero, zero);
  CHECK(max_abs(cor.u) == 0.0);
  CHECK(max_abs(cor.B) == 0.0);

  CoefficientSlice v = c;
  v.family = 1;
  PerturbationSlice w = assemble_slice(v, blocks);
  // With ∇a² = 0 only the grid divergence of the sampled P≠0(W⊗W) is left,
  // rebuilt here from the materialized blocks.
  OscillationErrors osc = oscillation_errors(v, c, w.principal, d.principal, blocks);
  TorusField self(g, Rank::tensor3x3, Symmetry::symmetric);
  for (int k = 0; k < 6; ++k) {
    const MikadoBlock& blk = blocks.block(2, k);
    double a = 0.4 + 0.05 * k;
    axpy(a * a, zero_mean(outer(blk.W(), blk.W())), self);
  }
  TorusField x_B = inverse_divergence(differential(self, DiffOp::tensor_divergence));
  CHECK(max_abs_diff(osc.x_B, x_B) <= 1e-10 * max_abs(x_B));

  StressParts parts;
  parts.lin = lin;
  parts.cor = cor;
  parts.com = PartPair{zero_tensor(g), zero_tensor(g)};
  parts.osc = OscillationErrors{zero_tensor(g), zero_tensor(g), zero_tensor(g), zero_tensor(g)};
  StressPair s = assemble_new_stresses(parts);
  CHECK(max_abs(s.R_u) == 0.0);
  CHECK(max_abs(s.R_B) == 0.0);

  StressParts missing = parts;
  missing.cor.u = TorusField();
  CHECK_THROWS(assemble_new_stresses(missing));
}

TEST_CASE("commutator errors route the skew part through curl inverse") {
  std::mt19937_64 rng(3);
  GridSpec g = make_grid(32, 1);
  TorusField ru = random_symmetric_traceless(g, rng);
  TorusField rb1 = random_symmetric_traceless(g, rng);
  TorusField rb2 = random_skew(g, rng);
  PartPair c = commutator_errors(ru, rb1, rb2);
  double s = max_abs(c.u);
  CHECK(asymmetry(c.u) <= 1e-12 * s);
  CHECK(trace_defect(c.u) <= 1e-12 * s);
  CHECK(asymmetry(c.B) <= 1e-12 * max_abs(c.B));
  // curl div of the assembled part matches curl div R_B1 + div R_B2.
  TorusField lhs = differential(differential(c.B, DiffOp::tensor_divergence), DiffOp::curl);
  TorusField rhs = differential(differential(rb1, DiffOp::tensor_divergence), DiffOp::curl) +
                   differential(rb2, DiffOp::tensor_divergence);
  CHECK(max_abs_diff(lhs, rhs) <= 1e-10 * max_abs(rhs));
}

TEST_CASE("idempotence of R P_H div on stresses") {
  std::mt19937_64 rng(17);
  GridSpec g = make_grid(32, 1);
  for (int i = 0; i < 20; ++i) {
    TorusField v = random_div_free(g, rng);
    TorusField r = inverse_divergence(zero_mean(v));
    CHECK(idempotence_defect(r) <= 1e-10);
  }
  // A symmetric-traceless field outside the range of R is not a fixed point.
  TorusField m = random_symmetric_traceless(g, rng);
  CHECK(idempotence_defect(m) >= 1e-3);
}

TEST_CASE("weak formulation pairings") {
  GridSpec g = make_grid(32, 33);
  auto tests = default_test_family(g, 4);
  TorusField z(g, Rank::vector3);
  CHECK(weak_form_check(z, z, tests, EquationParams{}) == 0.0);

  GridSpec gb = make_grid(64, 65);
  auto [u, b] = background_fields(1, gb);
  StressPair s = initial_stresses(u, b, EquationParams{});
  auto tb = default_test_family(gb, 4);
  CHECK(weak_form_check(u, b, tb, EquationParams{}, &s.R_u, &s.R_B) <= 1e-6);
  // Without the stresses the background is not a weak solution.
  CHECK(weak_form_check(u, b, tb, EquationParams{}) >= 1e-2);

  std::mt19937_64 rng(8);
  TorusField ru = random_div_free(gb, rng), rb = random_div_free(gb, rng);
  CHECK(weak_form_check(ru, rb, tb, EquationParams{}) >= 1e-2);
}

TEST_CASE("mollification stresses") {
  GridSpec g = make_grid(64, 33);
  TorusField u = constant_vector(g, 1.0, 0.5, -1.0);
  TorusField b = constant_vector(g, 0.0, 2.0, 1.0);
  MollificationStresses c = mollification_stresses(u, b, 4.0, 0.5, 1.0);
  CHECK(max_abs(c.stresses.R_u) <= 1e-13);
  CHECK(max_abs(c.stresses.R_B) <= 1e-13);
  CHECK(c.nu1_n == doctest::Approx(0.25));
  CHECK(c.nu2_n == doctest::Approx(1.0 / 16.0));

  GridSpec gb = make_grid(128, 129);
  auto [ub, bb] = background_fields(1, gb);
  std::vector<double> lam = {4.0, 8.0, 16.0}, lu, lb;
  for (double l : lam) {
    MollificationStresses m = mollification_stresses(ub, bb, l, 0.5, 1.0);
    lu.push_back(norm(m.stresses.R_u, NormKind::Lp(1.0)));
    lb.push_back(norm(m.stresses.R_B, NormKind::Lp(1.0)));
  }
  CHECK(lu[1] < lu[0]);
  CHECK(lu[2] < lu[1]);
  CHECK(lb[1] < lb[0]);
  CHECK(lb[2] < lb[1]);
  CHECK(fit_exponent(lam, lu) <= -0.5);
  CHECK(fit_exponent(lam, lb) <= -0.5);

  TorusField zero(gb, Rank::vector3);
  MollificationStresses nob = mollification_stresses(ub, zero, 8.0, 0.5, 1.0);
  CHECK(max_abs(nob.stresses.R_B) == 0.0);
  CHECK(max_abs(nob.stresses.R_u) > 0.0);
}

TEST_CASE("ledger csv") {
  std::vector<LedgerRow> rows = {{"lin_u", "L1_x sup_t", 1.5, part_bound_formula("lin_u"), "mu=8"}};
  std::string csv = ledger_csv(rows);
  CHECK(csv.rfind("part,norm_kind,value,paper_bound_formula,parameters\n", 0) == 0);
  CHECK(csv.find("lin_u,L1_x sup_t,") != std::string::npos);
  CHECK(!part_bound_formula("osc_far_B").empty());
}

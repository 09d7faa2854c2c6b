#include <cmath>
#include <numbers>
#include <stdexcept>

#include "doctest.h"
#include "hallci/mikado_blocks.hpp"
#include "hallci/spectral_calculus.hpp"

using namespace hallci;
using std::numbers::pi;

namespace {

const Direction& find(int family, std::array<int, 3> k) {
  for (const auto& d : lambda_sets())
    if (d.family == family && d.k_num == k) return d;
  throw std::logic_error("direction not in table");
}

MikadoBlock block_for(const Direction& d, double mu, int sigma, NLambdaMode mode, int n) {
  ShiftPlan plan = assign_shifts(mu, sigma, mode);
  return MikadoBlock(d, mu, sigma, block_n_lambda(d, mode), plan.shift[direction_id(d)], n);
}

// Normalized L^p norm of φ_(k) from the residue tables.
double phi_lp(const MikadoBlock& b, double p) {
  return std::pow(b.grid_mean([p](double v) { return std::pow(std::abs(v), p); }), 1.0 / p);
}

}  // namespace

TEST_CASE("profile pair") {
  const ProfilePair& p = ProfilePair::get();
  CHECK(std::abs(p.normalization_quadrature(1 << 16) - 1.0) <= 1e-12);
  CHECK(std::abs(p.mean_quadrature(1 << 16)) <= 1e-12);
  for (int order = 0; order <= 3; ++order) {
    CHECK(p.Phi(1.0, order) == 0.0);
    CHECK(p.Phi(-1.0, order) == 0.0);
    CHECK(std::abs(p.Phi(0.999, order)) <= 1e-12 * p.c());
    CHECK(p.Phi(1.5, order) == 0.0);
  }
  CHECK(p.Phi(0.0) == doctest::Approx(p.c() * std::exp(-1.0)));
  // φ = Φ″ against a central difference of Φ′.
  for (double x : {-0.7, -0.2, 0.0, 0.35, 0.8}) {
    double h = 1e-6;
    CHECK(p.phi(x) == doctest::Approx((p.Phi(x + h, 1) - p.Phi(x - h, 1)) / (2 * h)).epsilon(1e-6));
  }
  CHECK_THROWS(p.Phi(0.0, 4));
}

TEST_CASE("shift assignment") {
  ShiftPlan plan = assign_shifts(8.0, 2, NLambdaMode::per_family);
  CHECK(plan.min_margin() > 0.0);
  const Direction& unique = find(1, {3, 4, 0});
  CHECK(plan.shift[direction_id(unique)] == Vec2{0.0, 0.0});

  // The group sharing Ã = (0, 1) inside family 1.
  const Direction& a = find(1, {4, 0, 3});
  const Direction& b = find(1, {4, 0, -3});
  CHECK(a.A_tilde == b.A_tilde);
  MikadoBlock ba = block_for(a, 8.0, 2, NLambdaMode::per_family, 256);
  MikadoBlock bb = block_for(b, 8.0, 2, NLambdaMode::per_family, 256);
  CHECK(mask_overlap(ba, bb) == 0);

  // Every shared pair, in both N_Λ modes.
  for (NLambdaMode mode : {NLambdaMode::per_family, NLambdaMode::common})
    for (double mu : {8.0, 16.0}) {
      ShiftPlan p = assign_shifts(mu, 2, mode);
      CHECK(p.pairs.size() >= 6);
      CHECK(p.min_margin() > 0.0);
    }
  CHECK_THROWS_AS(assign_shifts(1.0, 2, NLambdaMode::per_family), std::domain_error);
  CHECK_THROWS(assign_shifts(0.0, 2, NLambdaMode::common));
  CHECK(assign_shifts(8.0, 2, NLambdaMode::common).shift == assign_shifts(8.0, 2, NLambdaMode::common).shift);
}

TEST_CASE("block identities for every direction") {
  ShiftPlan plan = assign_shifts(8.0, 2, NLambdaMode::per_family);
  for (const auto& d : lambda_sets()) {
    MikadoBlock b(d, 8.0, 2, block_n_lambda(d, NLambdaMode::per_family), plan.shift[direction_id(d)], 256);
    BlockChecks c = verify_block(b);
    CAPTURE(d.label());
    CHECK(c.div_W <= 1e-10);
    CHECK(c.div_Omega_minus_W <= 1e-10);
    CHECK(c.div_WW <= 1e-10);
    CHECK(c.mean_WW_minus_kk <= 1e-10);
    CHECK(c.mean_phi2_minus_1 <= 1e-10);
    CHECK(c.phi_minus_lap_Phi <= 1e-10);
    CHECK(c.omega_skew == 0.0);
    CHECK(c.period_shift <= 1e-12);
    CHECK(c.max_defect() <= 1e-10);
    // Normalized L² norm of φ_(k) is one.
    double l2 = norm(b.phi(), NormKind::Lp(2.0)) / (2.0 * pi);
    CHECK(l2 == doctest::Approx(1.0).epsilon(1e-10));
    // Mean of W ⊗ W is k ⊗ k.
    TorusField w = b.W();
    TorusField ww = outer(w, w);
    Mat3 kk = d.k_outer_k();
    for (int e = 0; e < 9; ++e) CHECK(std::abs(component_means(ww, 0)[e] - kk[e]) <= 1e-10);
  }
}

TEST_CASE("block preconditions") {
  const Direction& d = find(1, {3, 4, 0});
  CHECK_THROWS_AS(MikadoBlock(d, 8.0, 2, 5, {0.0, 0.0}, 128), std::domain_error);  // 2.5 samples across
  CHECK_NOTHROW(MikadoBlock(d, 8.0, 2, 5, {0.0, 0.0}, 256));
  CHECK_THROWS_AS(MikadoBlock(d, 8.0, 2, 13, {0.0, 0.0}, 256), std::invalid_argument);  // σNÃ not integral
  CHECK_THROWS(MikadoBlock(d, 1.0, 2, 5, {0.0, 0.0}, 256));
  MikadoBlock b(d, 8.0, 2, 5, {0.0, 0.0}, 256);
  CHECK_FALSE(b.meets_resolution_rule());  // 8μσN = 640
  CHECK(MikadoBlock(d, 8.0, 2, 5, {0.0, 0.0}, 1024).meets_resolution_rule());
}

TEST_CASE("intermittency scaling of block norms") {
  // Grid means come from residue counts, so a 16384² grid costs O(16384); it keeps
  // about 40 samples across the support at μ = 64.
  const Direction& d = find(1, {3, 4, 0});
  const int n = 16384;
  std::vector<double> mus = {8, 16, 32, 64}, l1, ratio;
  for (double p : {1.0, 2.0, 4.0}) {
    double lo = INFINITY, hi = 0.0;
    for (double mu : mus) {
      MikadoBlock b(d, mu, 2, 5, {0.0, 0.0}, n);
      double r = phi_lp(b, p) / std::pow(mu, 0.5 - 1.0 / p);
      lo = std::min(lo, r);
      hi = std::max(hi, r);
      if (p == 1.0) {
        l1.push_back(phi_lp(b, 1.0));
        ratio.push_back(phi_lp(b, 1.0) / phi_lp(b, 2.0));
      }
    }
    CAPTURE(p);
    CHECK(hi / lo <= 1.05);
  }
  CHECK(std::abs(fit_exponent(mus, l1) + 0.5) <= 0.1);
  for (std::size_t i = 1; i < ratio.size(); ++i) CHECK(ratio[i] < ratio[i - 1]);

  // Residue means agree with the materialized grid.
  MikadoBlock b(d, 8.0, 2, 5, {0.0, 0.0}, 512);
  double cell = 4.0 * pi * pi;
  CHECK(norm(b.phi(), NormKind::Lp(1.0)) / cell == doctest::Approx(phi_lp(b, 1.0)).epsilon(1e-12));
}

TEST_CASE("intersection reports") {
  ShiftPlan plan = assign_shifts(8.0, 2, NLambdaMode::per_family);
  auto make = [&](const Direction& d, double mu, int n) {
    ShiftPlan p = assign_shifts(mu, 2, NLambdaMode::per_family);
    return MikadoBlock(d, mu, 2, block_n_lambda(d, NLambdaMode::per_family), p.shift[direction_id(d)], n);
  };
  const Direction& a = find(1, {4, 0, 3});
  const Direction& b = find(1, {4, 0, -3});
  IntersectionReport shared = intersection_report(make(a, 8.0, 256), make(b, 8.0, 256));
  CHECK(shared.support_measure == 0.0);
  CHECK(shared.l1 == 0.0);
  CHECK(shared.linf == 0.0);

  MikadoBlock one = make(a, 8.0, 256);
  IntersectionReport self = intersection_report(one, one);
  auto mask = one.support_mask();
  std::int64_t count = 0;
  for (auto m : mask) count += m;
  CHECK(self.count == count);
  double cell = std::pow(2.0 * pi / 256, 2);
  CHECK(self.support_measure == doctest::Approx(count * cell));

  // Distinct planar directions: support measure shrinks like μ⁻².
  const Direction& c = find(1, {3, 4, 0});
  std::vector<double> mus = {8, 16, 32}, meas;
  for (double mu : mus) meas.push_back(intersection_report(make(c, mu, 1024), make(a, mu, 1024)).support_measure);
  CHECK(fit_exponent(mus, meas) <= -1.8);
}

TEST_CASE("power-law fit") {
  std::vector<double> x = {1, 2, 4, 8}, y;
  for (double v : x) y.push_back(3.0 * std::pow(v, -1.25));
  CHECK(fit_exponent(x, y) == doctest::Approx(-1.25).epsilon(1e-12));
  CHECK_THROWS(fit_exponent({1.0}, {2.0}));
}

TEST_CASE("N_lambda modes") {
  CHECK(block_n_lambda(find(1, {3, 4, 0}), NLambdaMode::per_family) == 5);
  CHECK(block_n_lambda(find(2, {5, 12, 0}), NLambdaMode::per_family) == 13);
  CHECK(block_n_lambda(find(2, {5, 12, 0}), NLambdaMode::common) == 65);
  CHECK(n_lambda_mode_from_string(to_string(NLambdaMode::per_family)) == NLambdaMode::per_family);
  CHECK_THROWS(n_lambda_mode_from_string("bogus"));
}

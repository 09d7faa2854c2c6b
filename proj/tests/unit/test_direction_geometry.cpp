#include <cmath>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "generators.hpp"
#include "hallci/direction_geometry.hpp"

using namespace hallci;
using namespace hallci::testing;

namespace {

// Determinant of an integer matrix by fraction-free (Bareiss) elimination.
__int128 bareiss(std::vector<std::vector<__int128>> a) {
  int n = static_cast<int>(a.size());
  __int128 prev = 1;
  int sign = 1;
  for (int k = 0; k < n - 1; ++k) {
    if (a[k][k] == 0) {
      int p = k + 1;
      while (p < n && a[p][k] == 0) ++p;
      if (p == n) return 0;
      std::swap(a[k], a[p]);
      sign = -sign;
    }
    for (int i = k + 1; i < n; ++i)
      for (int j = k + 1; j < n; ++j) a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
    prev = a[k][k];
  }
  return sign * a[n - 1][n - 1];
}

// Column j holds the numerators of sym_vec(k_j ⊗ k_j) over d².
std::vector<std::vector<__int128>> integer_map(int family) {
  auto dirs = family_directions(family);
  std::vector<std::vector<__int128>> m(6, std::vector<__int128>(6));
  const int pairs[6][2] = {{0, 0}, {1, 1}, {2, 2}, {0, 1}, {0, 2}, {1, 2}};
  for (int j = 0; j < 6; ++j)
    for (int i = 0; i < 6; ++i) m[i][j] = dirs[j].k_num[pairs[i][0]] * dirs[j].k_num[pairs[i][1]];
  return m;
}

// Gaussian elimination with partial pivoting on the 6×6 system.
Sym6 dense_solve(const Mat3& r, int family) {
  auto dirs = family_directions(family);
  double a[6][7];
  for (int j = 0; j < 6; ++j) {
    Sym6 col = sym_vec(dirs[j].k_outer_k());
    for (int i = 0; i < 6; ++i) a[i][j] = col[i];
  }
  Sym6 rhs = sym_vec(r);
  for (int i = 0; i < 6; ++i) a[i][6] = rhs[i];
  for (int k = 0; k < 6; ++k) {
    int p = k;
    for (int i = k + 1; i < 6; ++i)
      if (std::abs(a[i][k]) > std::abs(a[p][k])) p = i;
    for (int j = 0; j < 7; ++j) std::swap(a[k][j], a[p][j]);
    for (int i = k + 1; i < 6; ++i) {
      double f = a[i][k] / a[k][k];
      for (int j = k; j < 7; ++j) a[i][j] -= f * a[k][j];
    }
  }
  Sym6 x{};
  for (int i = 5; i >= 0; --i) {
    double s = a[i][6];
    for (int j = i + 1; j < 6; ++j) s -= a[i][j] * x[j];
    x[i] = s / a[i][i];
  }
  return x;
}

double mat_diff(const Mat3& a, const Mat3& b) {
  double m = 0.0;
  for (int c = 0; c < 9; ++c) m = std::max(m, std::abs(a[c] - b[c]));
  return m;
}

const Mat3 kId = {1, 0, 0, 0, 1, 0, 0, 0, 1};

}  // namespace

TEST_CASE("direction tables") {
  const auto& all = lambda_sets();
  REQUIRE(all.size() == 12);
  bool found = false;
  for (const auto& d : family_directions(1))
    if (d.k_num == std::array<int, 3>{3, 4, 0}) {
      found = true;
      CHECK(d.denom == 5);
      CHECK(d.A_tilde_num == std::array<int, 2>{4, -3});
      CHECK(d.A_tilde[0] == 0.8);
      CHECK(d.A_tilde[1] == -0.6);
    }
  CHECK(found);
  CHECK(common_n_lambda() == 65);

  for (const auto& d : all) {
    int dd = d.denom * d.denom;
    auto dot3 = [](const std::array<int, 3>& a, const std::array<int, 3>& b) {
      return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    };
    CAPTURE(d.label());
    CHECK(dot3(d.k_num, d.k_num) == dd);
    CHECK(dot3(d.A_num, d.A_num) == dd);
    CHECK(dot3(d.kxA_num, d.kxA_num) == dd);
    CHECK(dot3(d.k_num, d.A_num) == 0);
    CHECK(dot3(d.k_num, d.kxA_num) == 0);
    CHECK(dot3(d.A_num, d.kxA_num) == 0);
    // k·(Ã, 0) = 0 exactly.
    CHECK(d.k_num[0] * d.A_tilde_num[0] + d.k_num[1] * d.A_tilde_num[1] == 0);
    CHECK(d.A_tilde_num[0] * d.A_tilde_num[0] + d.A_tilde_num[1] * d.A_tilde_num[1] == dd);
    CHECK(d.k_tilde_num[0] * d.k_tilde_num[0] + d.k_tilde_num[1] * d.k_tilde_num[1] == dd);
    // Planar pair is orthogonal.
    CHECK(d.k_tilde_num[0] * d.A_tilde_num[0] + d.k_tilde_num[1] * d.A_tilde_num[1] == 0);
  }
  for (int i = 0; i < 6; ++i)
    for (int j = 6; j < 12; ++j) CHECK(all[i].k != all[j].k);
}

TEST_CASE("half frame sums are the identity") {
  for (int f : {1, 2}) {
    Mat3 s{};
    for (const auto& d : family_directions(f)) {
      Mat3 kk = d.k_outer_k();
      for (int c = 0; c < 9; ++c) s[c] += 0.5 * kk[c];
    }
    CHECK(mat_diff(s, kId) <= 1e-15);
  }
}

TEST_CASE("coefficient map determinants match exact integer elimination") {
  // det over rationals = det(numerators) / d^12.
  __int128 d1 = bareiss(integer_map(1));
  __int128 d2 = bareiss(integer_map(2));
  CHECK(static_cast<double>(d1) == -2668032.0 * std::pow(5.0, 2));
  CHECK(static_cast<double>(d2) == -30691008000.0 * std::pow(13.0, 2));
  CHECK(gamma_map_determinant(1) == doctest::Approx(static_cast<double>(d1) / std::pow(5.0, 12)).epsilon(1e-13));
  CHECK(gamma_map_determinant(2) == doctest::Approx(static_cast<double>(d2) / std::pow(13.0, 12)).epsilon(1e-13));
  // Diagonal block of one member per ± pair: det [[9,16,0],[16,0,9],[0,9,16]] = −4825.
  CHECK(bareiss({{9, 16, 0}, {16, 0, 9}, {0, 9, 16}}) == -4825);
  CHECK(std::isfinite(gamma_map_condition(1)));
  CHECK(std::isfinite(gamma_map_condition(2)));
}

TEST_CASE("solve_gamma") {
  double delta = 0.1;
  for (int f : {1, 2}) {
    Sym6 g = solve_gamma(kId, f, delta);
    for (double v : g) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));

    Mat3 r = kId;
    r[tc(0, 0)] += 0.01;
    r[tc(1, 1)] -= 0.01;
    Sym6 s = solve_gamma(r, f, delta);
    Sym6 o = dense_solve(r, f);
    for (int i = 0; i < 6; ++i) {
      CHECK(s[i] == doctest::Approx(o[i]).epsilon(1e-12));
      CHECK(s[i] > 0.0);
    }
    CHECK(mat_diff(reconstruct(s, f), r) <= 1e-12);

    Mat3 two = {2, 0, 0, 0, 2, 0, 0, 0, 2};
    CHECK_THROWS_AS(solve_gamma(two, f, delta), std::domain_error);
    Mat3 asym = kId;
    asym[tc(0, 1)] = 0.01;
    CHECK_THROWS_AS(solve_gamma(asym, f, delta), std::invalid_argument);
  }
}

TEST_CASE("solve after reconstruct is the identity on coefficients") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.01, 3.0);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    int f = 1 + trial % 2;
    Sym6 g;
    for (double& v : g) v = u(rng);
    Sym6 back = solve_gamma_unchecked(reconstruct(g, f), f);
    for (int i = 0; i < 6; ++i) worst = std::max(worst, std::abs(back[i] - g[i]) / g[i]);
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("delta calibration") {
  CHECK_THROWS_WITH(calibrate_delta(1, 10), "insufficient samples");
  DeltaCalibration c1 = calibrate_delta(1, 10000);
  DeltaCalibration c2 = calibrate_delta(2, 10000);
  CHECK(c1.delta > 0.0);
  CHECK(c2.delta > 0.0);
  CHECK(c1.delta != c2.delta);
  CHECK(c1.delta == doctest::Approx(kDeltaSafety * c1.bisected).epsilon(1e-15));
  // Sampling can only find a radius at or above the exact positivity radius.
  CHECK(c1.bisected >= c1.analytic * (1.0 - 1e-12));
  CHECK(c2.bisected >= c2.analytic * (1.0 - 1e-12));
  CHECK(global_delta() == std::min(c1.delta, c2.delta));
  CHECK(calibrate_delta(1, 10000).delta == c1.delta);  // deterministic

  // Every matrix in the exact positivity ball yields positive coefficients.
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int f : {1, 2}) {
    double rad = analytic_delta(f) * (1.0 - 1e-9);
    for (int s = 0; s < 2000; ++s) {
      Mat3 e{};
      for (int a = 0; a < 3; ++a)
        for (int b = a; b < 3; ++b) e[tc(a, b)] = e[tc(b, a)] = n(rng);
      double nrm = frobenius_distance_to_identity({e[0] + 1, e[1], e[2], e[3], e[4] + 1, e[5], e[6], e[7], e[8] + 1});
      Mat3 r = kId;
      for (int c = 0; c < 9; ++c) r[c] += rad * e[c] / nrm;
      Sym6 g = solve_gamma(r, f, rad * (1.0 + 1e-12));
      for (double v : g) CHECK(v > 0.0);
    }
  }
}

TEST_CASE("amplitude function") {
  AmplitudeSpec sp{2.0, 0.1};
  CHECK(chi_value(0.0, sp) == doctest::Approx(2.0 * 2.0 / 0.1));
  CHECK(chi_value(1.5, sp) == doctest::Approx(2.0 * 2.0 / 0.1));
  CHECK(chi_value(6.0, sp) == doctest::Approx(12.0 * 2.0 / 0.1));
  // Monotone, C¹ and C² across the blend.
  double prev = chi_value(0.0, sp);
  for (int i = 1; i <= 800; ++i) {
    double x = 6.0 * i / 800.0;
    double v = chi_value(x, sp);
    CHECK(v >= prev);
    prev = v;
    double h = 1e-5;
    double fd = (chi_value(x + h, sp) - chi_value(x - h, sp)) / (2 * h);
    CHECK(std::abs(fd - chi_derivative(x, sp)) < 1e-5 * std::max(1.0, std::abs(fd)));
  }
  for (double x : {2.0, 4.0}) {
    double h = 1e-6;
    double d2l = (chi_derivative(x, sp) - chi_derivative(x - h, sp)) / h;
    double d2r = (chi_derivative(x + h, sp) - chi_derivative(x, sp)) / h;
    CHECK(std::abs(d2l - d2r) < 1e-3);
  }

  GridSpec g = make_grid(16, 1);
  TorusField zero(g, Rank::tensor3x3);
  CHECK(max_abs(chi(zero, AmplitudeSpec{0.0, 0.1})) == 0.0);

  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    TorusField r = random_symmetric_traceless(g, rng, 3);
    double r0 = norm(r, NormKind::Lp(1.0)) * (trial % 2 ? 1.0 : 1e-3);
    AmplitudeSpec a{r0, 0.07};
    TorusField rho = chi(r, a);
    TorusField fr = frobenius(r);
    double worst = 0.0;
    for (std::size_t i = 0; i < rho.size(); ++i) worst = std::max(worst, fr.samples()[i] / rho.samples()[i]);
    CHECK(worst <= a.delta);
    TorusField sq = rho;
    for (double& v : sq.samples()) v = std::sqrt(v);
    double l2 = norm(sq, NormKind::Lp(2.0));
    CHECK(l2 * l2 == doctest::Approx(norm(rho, NormKind::Lp(1.0))).epsilon(1e-13));
  }
  CHECK_THROWS(chi(random_symmetric_traceless(g, rng, 2), AmplitudeSpec{0.0, 0.1}));
}

#include "hallci/direction_geometry.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "hallci/parallel.hpp"

namespace hallci {

namespace {

using Mat6 = Eigen::Matrix<double, 6, 6>;
using V6 = Eigen::Matrix<double, 6, 1>;

std::array<int, 3> cross_num(const std::array<int, 3>& a, const std::array<int, 3>& b, int d) {
  std::array<int, 3> c = {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
  for (int& v : c) {
    if (v % d != 0) throw std::logic_error("direction table: frame is not rational over the denominator");
    v /= d;
  }
  return c;
}

// Rows follow the tabulated pattern: (p e1 ± q e2), (q e1 ± p e3), (p e2 ± q e3)
// with (p, q, d) = (3, 4, 5) or (5, 12, 13).
std::vector<Direction> build_family(int family, int p, int q, int d) {
  struct Row {
    std::array<int, 3> k, A;
    std::array<int, 2> kt, At;
  };
  std::vector<Row> rows;
  for (int s : {1, -1}) rows.push_back({{p, s * q, 0}, {q, -s * p, 0}, {p, s * q}, {q, -s * p}});
  for (int s : {1, -1}) rows.push_back({{q, 0, s * p}, {0, d, 0}, {d, 0}, {0, d}});
  for (int s : {1, -1}) rows.push_back({{0, p, s * q}, {d, 0, 0}, {0, d}, {d, 0}});
  std::vector<Direction> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Direction dir;
    dir.family = family;
    dir.index = static_cast<int>(i);
    dir.denom = d;
    dir.k_num = rows[i].k;
    dir.A_num = rows[i].A;
    dir.kxA_num = cross_num(rows[i].k, rows[i].A, d);
    dir.k_tilde_num = rows[i].kt;
    dir.A_tilde_num = rows[i].At;
    for (int c = 0; c < 3; ++c) {
      dir.k[c] = static_cast<double>(dir.k_num[c]) / d;
      dir.A[c] = static_cast<double>(dir.A_num[c]) / d;
      dir.kxA[c] = static_cast<double>(dir.kxA_num[c]) / d;
    }
    for (int c = 0; c < 2; ++c) {
      dir.k_tilde[c] = static_cast<double>(dir.k_tilde_num[c]) / d;
      dir.A_tilde[c] = static_cast<double>(dir.A_tilde_num[c]) / d;
    }
    out.push_back(dir);
  }
  return out;
}

Mat6 map_matrix(int family) {
  if (family != 1 && family != 2) throw std::invalid_argument("family must be 1 or 2");
  Mat6 m;
  auto dirs = family_directions(family);
  for (int j = 0; j < 6; ++j) {
    Sym6 v = sym_vec(dirs[j].k_outer_k());
    for (int i = 0; i < 6; ++i) m(i, j) = v[i];
  }
  return m;
}

const Mat6& map_inverse(int family) {
  static const Mat6 inv1 = map_matrix(1).fullPivLu().inverse();
  static const Mat6 inv2 = map_matrix(2).fullPivLu().inverse();
  return family == 1 ? inv1 : inv2;
}

V6 to_v6(const Sym6& s) {
  V6 v;
  for (int i = 0; i < 6; ++i) v(i) = s[i];
  return v;
}

Sym6 from_v6(const V6& v) {
  Sym6 s;
  for (int i = 0; i < 6; ++i) s[i] = v(i);
  return s;
}

}  // namespace

std::string Direction::label() const {
  std::string s = "(";
  for (int c = 0; c < 3; ++c) {
    if (c) s += ",";
    s += k_num[c] == 0 ? "0" : std::to_string(k_num[c]) + "/" + std::to_string(denom);
  }
  return s + ")";
}

Mat3 Direction::k_outer_k() const {
  Mat3 m;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) m[tc(a, b)] = k[a] * k[b];
  return m;
}

const std::vector<Direction>& lambda_sets() {
  static const std::vector<Direction> all = [] {
    std::vector<Direction> v = build_family(1, 3, 4, 5);
    std::vector<Direction> w = build_family(2, 5, 12, 13);
    v.insert(v.end(), w.begin(), w.end());
    return v;
  }();
  return all;
}

std::vector<Direction> family_directions(int family) {
  if (family != 1 && family != 2) throw std::invalid_argument("family must be 1 or 2");
  const auto& all = lambda_sets();
  return std::vector<Direction>(all.begin() + (family - 1) * 6, all.begin() + family * 6);
}

int common_n_lambda() {
  int n = 1;
  for (const auto& d : lambda_sets()) n = std::lcm(n, d.denom);
  return n;
}

Sym6 sym_vec(const Mat3& m) { return {m[tc(0, 0)], m[tc(1, 1)], m[tc(2, 2)], m[tc(0, 1)], m[tc(0, 2)], m[tc(1, 2)]}; }

Mat3 sym_mat(const Sym6& v) {
  return {v[0], v[3], v[4], v[3], v[1], v[5], v[4], v[5], v[2]};
}

double frobenius_distance_to_identity(const Mat3& r) {
  double s = 0.0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      double e = r[tc(a, b)] - (a == b ? 1.0 : 0.0);
      s += e * e;
    }
  return std::sqrt(s);
}

std::array<double, 36> gamma_map(int family) {
  Mat6 m = map_matrix(family);
  std::array<double, 36> out;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) out[6 * i + j] = m(i, j);
  return out;
}

double gamma_map_determinant(int family) { return map_matrix(family).determinant(); }

double gamma_map_condition(int family) {
  Eigen::JacobiSVD<Mat6> svd(map_matrix(family));
  const auto& s = svd.singularValues();
  return s(0) / s(5);
}

Sym6 solve_gamma(const Mat3& r, int family, double delta) {
  for (int a = 0; a < 3; ++a)
    for (int b = a + 1; b < 3; ++b)
      if (std::abs(r[tc(a, b)] - r[tc(b, a)]) > 1e-12 * (1.0 + std::abs(r[tc(a, b)])))
        throw std::invalid_argument("solve_gamma: matrix is not symmetric");
  double dist = frobenius_distance_to_identity(r);
  if (dist > delta)
    throw std::domain_error("solve_gamma: matrix outside the delta-ball (|R - Id|_F = " + std::to_string(dist) +
                            " > " + std::to_string(delta) + ")");
  V6 g = map_matrix(family).fullPivLu().solve(to_v6(sym_vec(r)));
  for (int i = 0; i < 6; ++i)
    if (!(g(i) > 0.0)) throw std::domain_error("solve_gamma: nonpositive coefficient (delta miscalibrated)");
  return from_v6(g);
}

Sym6 solve_gamma_unchecked(const Mat3& r, int family) {
  return from_v6(map_inverse(family) * to_v6(sym_vec(r)));
}

Mat3 reconstruct(const Sym6& gamma_sq, int family) {
  Mat3 out{};
  auto dirs = family_directions(family);
  for (int j = 0; j < 6; ++j) {
    Mat3 kk = dirs[j].k_outer_k();
    for (int c = 0; c < 9; ++c) out[c] += gamma_sq[j] * kk[c];
  }
  return out;
}

double analytic_delta(int family) {
  const Mat6& inv = map_inverse(family);
  double best = INFINITY;
  for (int i = 0; i < 6; ++i) {
    // sup of row·sym_vec(E) over |E|_F ≤ 1; off-diagonal entries appear twice in |E|_F.
    double s = 0.0;
    for (int j = 0; j < 3; ++j) s += inv(i, j) * inv(i, j);
    for (int j = 3; j < 6; ++j) s += 0.5 * inv(i, j) * inv(i, j);
    V6 id = to_v6(sym_vec(sym_mat({1, 1, 1, 0, 0, 0})));
    double g0 = (inv.row(i) * id)(0);
    best = std::min(best, g0 / std::sqrt(s));
  }
  return best;
}

DeltaCalibration calibrate_delta(int family, int n_samples, std::uint64_t seed) {
  if (family != 1 && family != 2) throw std::invalid_argument("family must be 1 or 2");
  if (n_samples < kMinCalibrationSamples) throw std::invalid_argument("insufficient samples");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Mat6& inv = map_inverse(family);
  V6 base = inv * to_v6(sym_vec(sym_mat({1, 1, 1, 0, 0, 0})));
  // Each sample stores the change of γ² per unit radius along a random
  // Frobenius-unit symmetric direction.
  std::vector<V6> slope(n_samples);
  for (int s = 0; s < n_samples; ++s) {
    Mat3 e{};
    for (int a = 0; a < 3; ++a)
      for (int b = a; b < 3; ++b) {
        double v = normal(rng);
        e[tc(a, b)] = v;
        e[tc(b, a)] = v;
      }
    double nrm = std::sqrt(std::inner_product(e.begin(), e.end(), e.begin(), 0.0));
    for (double& v : e) v /= nrm;
    slope[s] = inv * to_v6(sym_vec(e));
  }
  auto all_positive = [&](double r) {
    for (const V6& sl : slope)
      for (int i = 0; i < 6; ++i)
        if (!(base(i) + r * sl(i) > 0.0)) return false;
    return true;
  };
  double lo = 0.0, hi = 1.0;
  while (all_positive(hi)) hi *= 2.0;
  for (int it = 0; it < 60; ++it) {
    double mid = 0.5 * (lo + hi);
    (all_positive(mid) ? lo : hi) = mid;
  }
  DeltaCalibration c;
  c.family = family;
  c.n_samples = n_samples;
  c.seed = seed;
  c.bisected = lo;
  c.delta = kDeltaSafety * lo;
  c.analytic = analytic_delta(family);
  return c;
}

double global_delta(int n_samples, std::uint64_t seed) {
  return std::min(calibrate_delta(1, n_samples, seed).delta, calibrate_delta(2, n_samples, seed).delta);
}

// ---- amplitude function --------------------------------------------------------

double smoothstep5(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
}

double chi_value(double x, const AmplitudeSpec& spec) {
  double r0 = spec.r0;
  double ax = std::abs(x);
  if (r0 <= 0.0) return ax == 0.0 ? 0.0 : 4.0 * ax / spec.delta;
  double lo = 2.0 * r0 / spec.delta;
  if (ax <= r0) return lo;
  double hi = 4.0 * ax / spec.delta;
  if (ax >= 2.0 * r0) return hi;
  double s = smoothstep5((ax - r0) / r0);
  return (1.0 - s) * lo + s * hi;
}

double chi_derivative(double x, const AmplitudeSpec& spec) {
  double r0 = spec.r0;
  double ax = std::abs(x);
  if (r0 <= 0.0 || ax >= 2.0 * r0) return 4.0 / spec.delta;
  if (ax <= r0) return 0.0;
  double t = (ax - r0) / r0;
  double s = smoothstep5(t);
  double ds = 30.0 * t * t * (1.0 - t) * (1.0 - t) / r0;
  return ds * (4.0 * ax - 2.0 * r0) / spec.delta + s * 4.0 / spec.delta;
}

TorusField chi(const TorusField& r, const AmplitudeSpec& spec) {
  if (r.rank() != Rank::tensor3x3) throw std::invalid_argument("chi: tensor field expected");
  if (!(spec.delta > 0.0)) throw std::invalid_argument("chi: delta must be positive");
  if (spec.r0 < 0.0) throw std::invalid_argument("chi: r0 must be non-negative");
  TorusField mag = frobenius(r);
  if (spec.r0 == 0.0 && max_abs(mag) > 0.0)
    throw std::invalid_argument("chi: r0 = 0 but the stress is not identically zero");
  for (double& v : mag.samples()) v = chi_value(v, spec);
  return mag;
}

}  // namespace hallci

#include "hallci/mikado_blocks.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "hallci/parallel.hpp"
#include "hallci/spectral_calculus.hpp"

namespace hallci {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kProfileIntervals = 1 << 16;

double wrap_pi(double s) {
  s = std::fmod(s + std::numbers::pi, kTwoPi);
  if (s < 0.0) s += kTwoPi;
  return s - std::numbers::pi;
}

double trapezoid(const std::function<double(double)>& f, int intervals) {
  double h = 2.0 / intervals;
  std::vector<double> v(intervals + 1);
  for (int i = 0; i <= intervals; ++i) v[i] = f(-1.0 + i * h);
  v.front() *= 0.5;
  v.back() *= 0.5;
  return h * pairwise_sum(v.data(), v.size());
}

}  // namespace

// ---- profile ------------------------------------------------------------------

ProfilePair::ProfilePair() {
  c_ = 1.0;
  double raw = trapezoid([this](double x) { return phi(x) * phi(x); }, kProfileIntervals);
  c_ = std::sqrt(kTwoPi / raw);
}

const ProfilePair& ProfilePair::get() {
  static const ProfilePair p;
  return p;
}

double ProfilePair::Phi(double x, int order) const {
  double u = 1.0 - x * x;
  if (u <= 1.0 / 700.0) return 0.0;
  double g = -1.0 / u;
  double e = c_ * std::exp(g);
  double u2 = u * u, u3 = u2 * u, u4 = u3 * u;
  double g1 = -2.0 * x / u2;
  double g2 = -2.0 / u2 - 8.0 * x * x / u3;
  double g3 = -24.0 * x / u3 - 48.0 * x * x * x / u4;
  switch (order) {
    case 0: return e;
    case 1: return g1 * e;
    case 2: return (g2 + g1 * g1) * e;
    case 3: return (g3 + 3.0 * g1 * g2 + g1 * g1 * g1) * e;
  }
  throw std::invalid_argument("ProfilePair: derivative order must be 0..3");
}

double ProfilePair::normalization_quadrature(int intervals) const {
  return trapezoid([this](double x) { return phi(x) * phi(x); }, intervals) / kTwoPi;
}

double ProfilePair::mean_quadrature(int intervals) const {
  return trapezoid([this](double x) { return phi(x); }, intervals);
}

// ---- N_Λ and shifts ---------------------------------------------------------------

int block_n_lambda(const Direction& d, NLambdaMode mode) {
  return mode == NLambdaMode::common ? common_n_lambda() : d.denom;
}

NLambdaMode n_lambda_mode_from_string(const std::string& s) {
  if (s == "common") return NLambdaMode::common;
  if (s == "per-family" || s == "per_family") return NLambdaMode::per_family;
  throw std::invalid_argument("unknown N_lambda mode: " + s);
}

std::string to_string(NLambdaMode m) { return m == NLambdaMode::common ? "common" : "per-family"; }

double ShiftPlan::min_margin() const {
  double m = INFINITY;
  for (const auto& p : pairs) m = std::min(m, p.separation - p.required);
  return m;
}

ShiftPlan assign_shifts(double mu, int sigma, NLambdaMode mode) {
  if (!(mu > 0.0)) throw std::invalid_argument("assign_shifts: mu must be positive");
  if (sigma < 1) throw std::invalid_argument("assign_shifts: sigma must be a positive integer");
  ShiftPlan plan;
  plan.mu = mu;
  plan.sigma = sigma;
  plan.mode = mode;
  const auto& dirs = lambda_sets();
  std::map<std::pair<int, int>, std::vector<int>> groups;  // keyed by Ã scaled to integers
  for (const auto& d : dirs) {
    int key1 = static_cast<int>(std::lround(d.A_tilde[0] * 1000000));
    int key2 = static_cast<int>(std::lround(d.A_tilde[1] * 1000000));
    groups[{key1, key2}].push_back(direction_id(d));
  }
  std::array<double, 12> offset{};
  std::array<long, 12> period_count{};  // M = σN per direction
  for (const auto& d : dirs) period_count[direction_id(d)] = static_cast<long>(sigma) * block_n_lambda(d, mode);

  for (const auto& [key, ids] : groups) {
    if (ids.size() < 2) continue;
    long L = 1;
    for (int id : ids) L = std::lcm(L, period_count[id]);
    double cell = kTwoPi / static_cast<double>(L);
    bool both = false;
    std::map<int, std::vector<int>> by_family;
    for (int id : ids) by_family[dirs[id].family].push_back(id);
    both = by_family.size() > 1;
    for (const auto& [fam, members] : by_family) {
      long g = static_cast<long>(members.size());
      long nf = L / period_count[members.front()];
      double spacing = nf >= g ? static_cast<double>(nf / g) * cell : cell / (2.0 * g);
      double base = (both && fam == 2) ? 0.5 * cell : 0.0;
      for (std::size_t j = 0; j < members.size(); ++j) offset[members[j]] = base + static_cast<double>(j) * spacing;
    }
    for (std::size_t x = 0; x < ids.size(); ++x)
      for (std::size_t y = x + 1; y < ids.size(); ++y) {
        int a = ids[x], b = ids[y];
        double lat = kTwoPi / static_cast<double>(std::lcm(period_count[a], period_count[b]));
        double diff = offset[a] - offset[b];
        double r = std::fmod(std::abs(diff), lat);
        ShiftPair p;
        p.a = a;
        p.b = b;
        p.separation = std::min(r, lat - r);
        p.required = 1.0 / (mu * period_count[a]) + 1.0 / (mu * period_count[b]);
        plan.pairs.push_back(p);
      }
  }
  for (const auto& d : dirs) {
    int id = direction_id(d);
    plan.shift[id] = {offset[id] * d.A_tilde[0], offset[id] * d.A_tilde[1]};
  }
  double margin = plan.min_margin();
  if (!(margin > 0.0))
    throw std::domain_error("mu too small for disjoint shifts (overlap " + std::to_string(-margin) + ")");
  return plan;
}

// ---- blocks -----------------------------------------------------------------------

MikadoBlock::MikadoBlock(const Direction& dir, double mu, int sigma, int n_lambda, const Vec2& shift, int n_x)
    : dir_(dir), mu_(mu), sigma_(sigma), n_lambda_(n_lambda), shift_(shift), n_(n_x) {
  if (!(mu > 1.0)) throw std::invalid_argument("MikadoBlock: mu must exceed 1");
  if (sigma < 1) throw std::invalid_argument("MikadoBlock: sigma must be a positive integer");
  if (n_lambda % dir.denom != 0)
    throw std::invalid_argument("periodicity violation: sigma*N_lambda*A_tilde is not an integer vector");
  make_grid(n_x, 1);
  long M = static_cast<long>(sigma) * n_lambda;
  for (int c = 0; c < 2; ++c) m_[c] = static_cast<int>(M / dir.denom * dir.A_tilde_num[c]);
  g_ = std::gcd(std::gcd(std::abs(m_[0]), std::abs(m_[1])), n_);
  if (samples_across_support() < 4.0)
    throw std::domain_error("grid under-resolves the block: " + std::to_string(samples_across_support()) +
                            " samples across the support (need 4)");
  s0_ = static_cast<double>(M) * (shift[0] * dir.A_tilde[0] + shift[1] * dir.A_tilde[1]);

  const ProfilePair& prof = ProfilePair::get();
  double sN = static_cast<double>(M);
  Phi_.assign(n_, 0.0);
  dPhi_.assign(n_, 0.0);
  hess_.assign(n_, 0.0);
  phi_.assign(n_, 0.0);
  dphi_.assign(n_, 0.0);
  double smu = std::sqrt(mu);
  for (int r = 0; r < n_; ++r) {
    double y = mu * wrap_pi(kTwoPi * r / n_ - s0_);
    if (std::abs(y) >= 1.0) continue;
    Phi_[r] = prof.Phi(y, 0) / (mu * smu) / (sN * sN);
    dPhi_[r] = prof.Phi(y, 1) / smu / sN;
    hess_[r] = prof.Phi(y, 2) * smu;
    phi_[r] = prof.phi(y) * smu;
    dphi_[r] = prof.Phi(y, 3) * mu * smu * sN;
  }
  std::vector<double> sq;
  for (int r = 0; r < n_; r += g_) sq.push_back(phi_[r] * phi_[r]);
  double mean = pairwise_sum(sq.data(), sq.size()) / static_cast<double>(sq.size());
  eta_ = 1.0 / std::sqrt(mean);
  for (auto* t : {&Phi_, &dPhi_, &hess_, &phi_, &dphi_})
    for (double& v : *t) v *= eta_;
}

double MikadoBlock::samples_across_support() const { return (2.0 / mu_) / (kTwoPi * g_ / n_); }

int MikadoBlock::residue(int i1, int i2) const {
  long r = (static_cast<long>(m_[0]) * i1 + static_cast<long>(m_[1]) * i2) % n_;
  return static_cast<int>(r < 0 ? r + n_ : r);
}

TorusField MikadoBlock::from_table(const std::vector<double>& t) const {
  TorusField f(GridSpec{n_, 1}, Rank::scalar);
  double* p = f.plane(0, 0);
  for (int i2 = 0; i2 < n_; ++i2)
    for (int i1 = 0; i1 < n_; ++i1) p[static_cast<std::size_t>(i2) * n_ + i1] = t[residue(i1, i2)];
  return f;
}

TorusField MikadoBlock::Phi() const { return from_table(Phi_); }
TorusField MikadoBlock::phi() const { return from_table(phi_); }

namespace {

TorusField planar_vector(const TorusField& s, const Vec2& a) {
  TorusField v(s.grid(), Rank::vector3);
  std::size_t np = s.grid().plane();
  for (int c = 0; c < 2; ++c) {
    double* o = v.plane(0, c);
    const double* p = s.plane(0, 0);
    for (std::size_t i = 0; i < np; ++i) o[i] = a[c] * p[i];
  }
  return v;
}

}  // namespace

TorusField MikadoBlock::grad_Phi() const { return planar_vector(from_table(dPhi_), dir_.A_tilde); }
TorusField MikadoBlock::grad_phi() const { return planar_vector(from_table(dphi_), dir_.A_tilde); }

TorusField MikadoBlock::hess_Phi() const {
  TorusField s = from_table(hess_);
  TorusField h(s.grid(), Rank::tensor3x3, Symmetry::symmetric);
  std::size_t np = s.grid().plane();
  const double* p = s.plane(0, 0);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      double w = dir_.A_tilde[a] * dir_.A_tilde[b];
      double* o = h.plane(0, tc(a, b));
      for (std::size_t i = 0; i < np; ++i) o[i] = w * p[i];
    }
  return h;
}

TorusField MikadoBlock::W() const {
  TorusField s = from_table(phi_);
  TorusField v(s.grid(), Rank::vector3);
  std::size_t np = s.grid().plane();
  for (int c = 0; c < 3; ++c) {
    double* o = v.plane(0, c);
    const double* p = s.plane(0, 0);
    for (std::size_t i = 0; i < np; ++i) o[i] = dir_.k[c] * p[i];
  }
  return v;
}

TorusField MikadoBlock::Omega() const {
  TorusField s = from_table(dPhi_);
  TorusField o(s.grid(), Rank::tensor3x3, Symmetry::skew);
  std::size_t np = s.grid().plane();
  const double* p = s.plane(0, 0);
  Vec3 a = {dir_.A_tilde[0], dir_.A_tilde[1], 0.0};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double w = dir_.k[i] * a[j] - a[i] * dir_.k[j];
      double* q = o.plane(0, tc(i, j));
      for (std::size_t x = 0; x < np; ++x) q[x] = w * p[x];
    }
  return o;
}

std::vector<std::uint8_t> MikadoBlock::support_mask() const {
  double mx = 0.0;
  for (double v : phi_) mx = std::max(mx, std::abs(v));
  std::vector<std::uint8_t> on(n_);
  for (int r = 0; r < n_; ++r) on[r] = std::abs(phi_[r]) > 1e-14 * mx;
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(n_) * n_);
  for (int i2 = 0; i2 < n_; ++i2)
    for (int i1 = 0; i1 < n_; ++i1) mask[static_cast<std::size_t>(i2) * n_ + i1] = on[residue(i1, i2)];
  return mask;
}

double MikadoBlock::grid_mean(const std::function<double(double)>& f) const {
  std::vector<double> v;
  v.reserve(n_ / g_);
  for (int r = 0; r < n_; r += g_) v.push_back(f(phi_[r]));
  return pairwise_sum(v.data(), v.size()) / static_cast<double>(v.size());
}

// ---- verification ---------------------------------------------------------------------

double BlockChecks::max_defect() const {
  return std::max({div_W, div_Omega_minus_W, div_WW, mean_WW_minus_kk, mean_phi2_minus_1, phi_minus_lap_Phi,
                   omega_skew, period_shift});
}

BlockChecks verify_block(const MikadoBlock& b) {
  BlockChecks out;
  const Direction& d = b.direction();
  const Vec2& a = d.A_tilde;
  const auto& phi = b.phi_table();
  const auto& dphi = b.dphi_table();
  const auto& hess = b.hess_table();
  int n = b.n_x();
  int g = b.lattice_gcd();
  double max_phi = 0.0, max_dphi = 0.0, max_phidphi = 0.0;
  for (int r = 0; r < n; r += g) {
    max_phi = std::max(max_phi, std::abs(phi[r]));
    max_dphi = std::max(max_dphi, std::abs(dphi[r]));
    max_phidphi = std::max(max_phidphi, std::abs(phi[r] * dphi[r]));
  }
  double kA = d.k[0] * a[0] + d.k[1] * a[1];
  double AA = a[0] * a[0] + a[1] * a[1];
  Vec3 a3 = {a[0], a[1], 0.0};
  for (int r = 0; r < n; r += g) {
    // div W = k·∇φ with ∇φ = dφ·Ã.
    out.div_W = std::max(out.div_W, std::abs(dphi[r] * kA) / max_dphi);
    // (div Ω)^i = Σ_j ∂_j(k_i ∂_jΦ − ∂_iΦ k_j) = k_i ΔΦ − Σ_j ∂_i∂_jΦ k_j.
    for (int i = 0; i < 3; ++i) {
      double lap = hess[r] * AA;
      double mixed = hess[r] * a3[i] * kA;
      double div_omega = d.k[i] * lap - mixed;
      out.div_Omega_minus_W = std::max(out.div_Omega_minus_W, std::abs(div_omega - d.k[i] * phi[r]) / max_phi);
      double div_ww = 2.0 * phi[r] * d.k[i] * (dphi[r] * kA);
      out.div_WW = std::max(out.div_WW, std::abs(div_ww) / max_phidphi);
    }
    out.phi_minus_lap_Phi = std::max(out.phi_minus_lap_Phi, std::abs(phi[r] - hess[r] * AA) / max_phi);
  }
  double m2 = b.grid_mean([](double v) { return v * v; });
  out.mean_phi2_minus_1 = std::abs(m2 - 1.0);
  Mat3 kk = d.k_outer_k();
  for (double v : kk) out.mean_WW_minus_kk = std::max(out.mean_WW_minus_kk, std::abs(m2 * v - v));
  out.omega_skew = skew_defect(b.Omega());
  if (n % b.sigma() == 0) {
    int step = n / b.sigma();
    for (int c = 0; c < 2; ++c) {
      long shift = (static_cast<long>(b.m()[c]) * step) % n;
      for (int r = 0; r < n; ++r) {
        int rs = static_cast<int>((r + shift + n) % n);
        out.period_shift = std::max(out.period_shift, std::abs(phi[rs] - phi[r]) / max_phi);
      }
    }
  } else {
    out.period_shift = INFINITY;
  }
  TorusField lap = apply_multiplier(b.Phi(), MultiplierSymbol::fractional_laplacian(1.0));
  TorusField ph = b.phi();
  out.spectral_lap_defect = max_abs_diff(-1.0 * lap, ph) / max_abs(ph);
  return out;
}

std::int64_t mask_overlap(const MikadoBlock& a, const MikadoBlock& b) {
  if (a.n_x() != b.n_x()) throw std::invalid_argument("mask_overlap: grid mismatch");
  int n = a.n_x();
  auto on = [](const MikadoBlock& blk) {
    double mx = 0.0;
    for (double v : blk.phi_table()) mx = std::max(mx, std::abs(v));
    std::vector<std::uint8_t> o(blk.n_x());
    for (int r = 0; r < blk.n_x(); ++r) o[r] = std::abs(blk.phi_table()[r]) > 1e-14 * mx;
    return o;
  };
  auto ma = on(a), mb = on(b);
  std::int64_t count = 0;
  for (int i2 = 0; i2 < n; ++i2)
    for (int i1 = 0; i1 < n; ++i1) count += (ma[a.residue(i1, i2)] && mb[b.residue(i1, i2)]) ? 1 : 0;
  return count;
}

IntersectionReport intersection_report(const MikadoBlock& a, const MikadoBlock& b) {
  if (a.n_x() != b.n_x()) throw std::invalid_argument("intersection_report: grid mismatch");
  int n = a.n_x();
  double h = kTwoPi / n;
  IntersectionReport rep;
  rep.count = mask_overlap(a, b);
  rep.support_measure = static_cast<double>(rep.count) * h * h;
  double sum_abs_ka = 0.0, sum_abs_kb = 0.0, max_ka = 0.0, max_kb = 0.0;
  for (int c = 0; c < 3; ++c) {
    sum_abs_ka += std::abs(a.direction().k[c]);
    sum_abs_kb += std::abs(b.direction().k[c]);
    max_ka = std::max(max_ka, std::abs(a.direction().k[c]));
    max_kb = std::max(max_kb, std::abs(b.direction().k[c]));
  }
  std::vector<double> row1(n), row2(n);
  std::vector<double> s1(n), s2(n);
  double mx = 0.0;
  const auto& pa = a.phi_table();
  const auto& pb = b.phi_table();
  for (int i2 = 0; i2 < n; ++i2) {
    for (int i1 = 0; i1 < n; ++i1) {
      double p = pa[a.residue(i1, i2)] * pb[b.residue(i1, i2)];
      row1[i1] = std::abs(p);
      row2[i1] = p * p;
      mx = std::max(mx, std::abs(p));
    }
    s1[i2] = pairwise_sum(row1.data(), n);
    s2[i2] = pairwise_sum(row2.data(), n);
  }
  double i1 = pairwise_sum(s1.data(), n) * h * h;
  double i2 = pairwise_sum(s2.data(), n) * h * h;
  rep.l1 = sum_abs_ka * sum_abs_kb * i1;
  rep.l2 = std::sqrt(i2);  // |k||k′| = 1 for unit vectors
  rep.linf = max_ka * max_kb * mx;
  return rep;
}

double fit_exponent(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_exponent: need at least two points");
  double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace hallci

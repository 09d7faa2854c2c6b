#include "hallci/perturbation_builder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "hallci/parallel.hpp"
#include "hallci/spectral_calculus.hpp"

namespace hallci {

namespace {

void require_stationary(const TorusField& f, Rank r, const char* what) {
  if (f.rank() != r) throw std::invalid_argument(std::string(what) + ": rank mismatch");
  if (f.grid().n_t != 1) throw std::invalid_argument(std::string(what) + ": stationary slice expected");
}

// Row-parallel loop over the points of an n×n plane.
template <class Fn>
void for_points(int n, Fn fn) {
  parallel_for(n, [&](int i2) {
    for (int i1 = 0; i1 < n; ++i1) fn(static_cast<std::size_t>(i2) * n + i1, i1, i2);
  });
}

double max_entry(const TorusField& f) { return max_abs(f); }

}  // namespace

// ---- temporal supports ------------------------------------------------------------------

std::vector<bool> support_nodes(const std::vector<double>& profile, double rel) {
  double mx = 0.0;
  for (double v : profile) mx = std::max(mx, v);
  std::vector<bool> on(profile.size(), false);
  if (mx == 0.0) return on;
  for (std::size_t j = 0; j < profile.size(); ++j) on[j] = profile[j] > rel * mx;
  return on;
}

std::vector<TimeInterval> support_intervals(const std::vector<bool>& nodes, const GridSpec& grid) {
  std::vector<TimeInterval> out;
  int n = static_cast<int>(nodes.size());
  for (int j = 0; j < n;) {
    if (!nodes[j]) {
      ++j;
      continue;
    }
    int k = j;
    while (k + 1 < n && nodes[k + 1]) ++k;
    out.push_back({grid.t(j), grid.t(k)});
    j = k + 1;
  }
  return out;
}

std::vector<TimeInterval> support_intervals(const std::vector<double>& profile, const GridSpec& grid, double rel) {
  return support_intervals(support_nodes(profile, rel), grid);
}

std::vector<TimeInterval> merge_intervals(std::vector<TimeInterval> a, const std::vector<TimeInterval>& b) {
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end(), [](const TimeInterval& x, const TimeInterval& y) { return x.a < y.a; });
  std::vector<TimeInterval> out;
  for (const auto& iv : a) {
    if (!out.empty() && iv.a <= out.back().b)
      out.back().b = std::max(out.back().b, iv.b);
    else
      out.push_back(iv);
  }
  return out;
}

double distance_to(const std::vector<TimeInterval>& set, double t) {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& iv : set) {
    if (t >= iv.a && t <= iv.b) return 0.0;
    d = std::min(d, t < iv.a ? iv.a - t : t - iv.b);
  }
  return d;
}

double collar_width(const std::vector<bool>& inner, const std::vector<TimeInterval>& outer, const GridSpec& grid) {
  double w = 0.0;
  for (std::size_t j = 0; j < inner.size(); ++j)
    if (inner[j]) w = std::max(w, distance_to(outer, grid.t(static_cast<int>(j))));
  return w;
}

TemporalCutoff::TemporalCutoff(std::vector<TimeInterval> support, double l)
    : support_(merge_intervals(std::move(support), {})), l_(l) {
  if (!(l > 0.0)) throw std::invalid_argument("temporal cutoff: l must be positive");
}

double TemporalCutoff::operator()(double t) const {
  if (support_.empty()) return 0.0;
  double d = distance_to(support_, t);
  if (d == 0.0) return 1.0;
  if (d >= l_) return 0.0;
  return smoothstep5(1.0 - d / l_);
}

double TemporalCutoff::derivative(double t) const {
  double d = std::numeric_limits<double>::infinity();
  double side = 0.0;  // +1 left of the nearest interval, −1 right of it
  for (const auto& iv : support_) {
    if (t >= iv.a && t <= iv.b) return 0.0;
    double di = t < iv.a ? iv.a - t : t - iv.b;
    if (di < d) {
      d = di;
      side = t < iv.a ? 1.0 : -1.0;
    }
  }
  if (d >= l_) return 0.0;
  double tau = 1.0 - d / l_;
  return side * 30.0 * tau * tau * (tau - 1.0) * (tau - 1.0) / l_;
}

TemporalCutoff temporal_cutoff(const std::vector<TimeInterval>& support, double l, double dt) {
  if (dt > 0.0 && !(l > dt)) throw std::invalid_argument("temporal cutoff under-resolved: l must exceed the time spacing");
  for (const auto& iv : support)
    if (iv.a < 0.0 || iv.b > 1.0 || iv.a > iv.b) throw std::invalid_argument("temporal cutoff: intervals must lie in [0,1]");
  if (support.empty()) return TemporalCutoff();
  return TemporalCutoff(support, l);
}

// ---- coefficients ------------------------------------------------------------------------

CoefficientSlice coefficient_slice(const TorusField& s, double theta, const AmplitudeSpec& amp, int family) {
  require_stationary(s, Rank::tensor3x3, "coefficient_slice");
  if (family != 1 && family != 2) throw std::invalid_argument("family must be 1 or 2");
  CoefficientSlice c;
  c.family = family;
  c.theta = theta;
  c.rho = chi(s, amp);
  GridSpec g = s.grid();
  for (auto& a : c.a) a = TorusField(g, Rank::scalar);
  if (theta == 0.0) return c;
  int n = g.n_x;
  std::vector<double> worst(n, 0.0);
  std::vector<int> negative(n, 0);
  const double* rho = c.rho.plane(0, 0);
  std::array<double*, 6> out{};
  for (int k = 0; k < 6; ++k) out[k] = c.a[k].plane(0, 0);
  std::array<const double*, 9> sp{};
  for (int e = 0; e < 9; ++e) sp[e] = s.plane(0, e);
  for_points(n, [&](std::size_t i, int, int i2) {
    double r = rho[i];
    if (r == 0.0) return;
    Mat3 m{};
    double f2 = 0.0;
    for (int e = 0; e < 9; ++e) {
      double v = sp[e][i] / r;
      f2 += v * v;
      m[e] = (e % 4 == 0 ? 1.0 : 0.0) - v;
    }
    worst[i2] = std::max(worst[i2], std::sqrt(f2));
    Sym6 g2 = solve_gamma_unchecked(m, family);
    for (int k = 0; k < 6; ++k) {
      if (!(g2[k] > 0.0)) {
        negative[i2] = 1;
        continue;
      }
      out[k][i] = theta * std::sqrt(r * g2[k]);
    }
  });
  double w = *std::max_element(worst.begin(), worst.end());
  if (w > amp.delta)
    throw std::domain_error("coefficients: Id - S/rho outside the delta-ball (|S/rho|_F = " + std::to_string(w) +
                            " > " + std::to_string(amp.delta) + ")");
  if (*std::max_element(negative.begin(), negative.end()))
    throw std::domain_error("coefficients: nonpositive gamma^2 (delta miscalibrated)");
  return c;
}

TorusField frame_sum(const CoefficientSlice& c) {
  GridSpec g = c.a[0].grid();
  TorusField out(g, Rank::tensor3x3, Symmetry::symmetric);
  const auto& dirs = lambda_sets();
  std::size_t np = g.plane();
  for (int k = 0; k < 6; ++k) {
    const Direction& d = dirs[(c.family - 1) * 6 + k];
    const double* a = c.a[k].plane(0, 0);
    for (int e = 0; e < 9; ++e) {
      double kk = d.k[e / 3] * d.k[e % 3];
      if (kk == 0.0) continue;
      double* o = out.plane(0, e);
      for (std::size_t i = 0; i < np; ++i) o[i] += a[i] * a[i] * kk;
    }
  }
  return out;
}

namespace {

// θ²ρ Id − θ²S
TorusField reconstruction_target(const CoefficientSlice& c, const TorusField& s) {
  double t2 = c.theta * c.theta;
  TorusField target = (-t2) * s;
  std::size_t np = s.grid().plane();
  const double* rho = c.rho.plane(0, 0);
  for (int d = 0; d < 3; ++d) {
    double* o = target.plane(0, tc(d, d));
    for (std::size_t i = 0; i < np; ++i) o[i] += t2 * rho[i];
  }
  return target;
}

}  // namespace

double reconstruction_defect(const CoefficientSlice& c, const TorusField& s) {
  TorusField target = reconstruction_target(c, s);
  double scale = max_entry(target);
  if (scale == 0.0) return max_entry(frame_sum(c));
  return max_abs_diff(frame_sum(c), target) / scale;
}

CoefficientSlice CoefficientSet::slice(int j) const {
  CoefficientSlice c;
  c.family = family;
  c.theta = theta(source.grid().t(j));
  c.rho = rho.slice(j);
  for (int k = 0; k < 6; ++k) c.a[k] = a[k].slice(j);
  return c;
}

namespace {

CoefficientSet build_set(int family, const TorusField& s, const TemporalCutoff& theta, const AmplitudeSpec& amp) {
  if (s.rank() != Rank::tensor3x3) throw std::invalid_argument("coefficients: tensor stress expected");
  const GridSpec& g = s.grid();
  CoefficientSet set;
  set.family = family;
  set.theta = theta;
  set.source = s;
  set.rho = TorusField(g, Rank::scalar);
  for (auto& a : set.a) a = TorusField(g, Rank::scalar);
  for (int j = 0; j < g.n_t; ++j) {
    CoefficientSlice c = coefficient_slice(s.slice(j), theta(g.t(j)), amp, family);
    set.rho.assign_slice(j, c.rho);
    for (int k = 0; k < 6; ++k) set.a[k].assign_slice(j, c.a[k]);
  }
  return set;
}

}  // namespace

CoefficientSet magnetic_coefficients(const TorusField& r_b_l, const TemporalCutoff& theta_b, const AmplitudeSpec& amp) {
  return build_set(2, r_b_l, theta_b, amp);
}

CoefficientSet velocity_coefficients(const TorusField& r_u_l, const TorusField& g_b, const TemporalCutoff& theta_u,
                                     const AmplitudeSpec& amp) {
  if (!(r_u_l.grid() == g_b.grid())) throw std::invalid_argument("velocity_coefficients: grid mismatch");
  TorusField s = r_u_l - g_b;
  s.set_symmetry(Symmetry::symmetric);
  return build_set(1, s, theta_u, amp);
}

TorusField interaction_tensor(const CoefficientSet& magnetic) {
  if (magnetic.family != 2) throw std::invalid_argument("interaction_tensor: magnetic coefficient set expected");
  const GridSpec& g = magnetic.source.grid();
  TorusField out(g, Rank::tensor3x3, Symmetry::symmetric);
  for (int j = 0; j < g.n_t; ++j) out.assign_slice(j, frame_sum(magnetic.slice(j)));
  return out;
}

double reconstruction_defect(const CoefficientSet& c) {
  double w = 0.0;
  for (int j = 0; j < c.source.grid().n_t; ++j)
    w = std::max(w, reconstruction_defect(c.slice(j), c.source.slice(j)));
  return w;
}

// ---- blocks and perturbations -----------------------------------------------------------------

BlockSet build_blocks(double mu, int sigma, NLambdaMode mode, int n_x) {
  BlockSet set;
  set.plan = assign_shifts(mu, sigma, mode);
  for (const auto& d : lambda_sets())
    set.blocks.emplace_back(d, mu, sigma, block_n_lambda(d, mode), set.plan.shift[direction_id(d)], n_x);
  return set;
}

namespace {

void require_grid(const CoefficientSlice& c, const BlockSet& b) {
  if (c.a[0].grid().n_x != b.n_x() || c.a[0].grid().n_t != 1)
    throw std::invalid_argument("perturbation: coefficient grid does not match the blocks");
}

Vec3 planar(const Vec2& v) { return {v[0], v[1], 0.0}; }

}  // namespace

PerturbationSlice assemble_slice(const CoefficientSlice& c, const BlockSet& blocks) {
  require_grid(c, blocks);
  int n = blocks.n_x();
  GridSpec g{n, 1};
  PerturbationSlice p;
  p.principal = TorusField(g, Rank::vector3);
  p.potential = TorusField(g, Rank::tensor3x3, Symmetry::skew);
  std::array<const MikadoBlock*, 6> blk{};
  std::array<Mat3, 6> omega{};
  for (int k = 0; k < 6; ++k) {
    blk[k] = &blocks.block(c.family, k);
    const Direction& d = blk[k]->direction();
    Vec3 a = planar(d.A_tilde);
    for (int e = 0; e < 9; ++e) omega[k][e] = d.k[e / 3] * a[e % 3] - a[e / 3] * d.k[e % 3];
  }
  std::array<double*, 3> prin{};
  std::array<double*, 9> pot{};
  for (int cc = 0; cc < 3; ++cc) prin[cc] = p.principal.plane(0, cc);
  for (int e = 0; e < 9; ++e) pot[e] = p.potential.plane(0, e);
  std::array<const double*, 6> coef{};
  for (int k = 0; k < 6; ++k) coef[k] = c.a[k].plane(0, 0);
  for_points(n, [&](std::size_t i, int i1, int i2) {
    for (int k = 0; k < 6; ++k) {
      double a = coef[k][i];
      if (a == 0.0) continue;
      int r = blk[k]->residue(i1, i2);
      double ph = a * blk[k]->phi_table()[r];
      double dp = a * blk[k]->dPhi_table()[r];
      const Vec3& kv = blk[k]->direction().k;
      for (int cc = 0; cc < 3; ++cc) prin[cc][i] += ph * kv[cc];
      for (int e = 0; e < 9; ++e)
        if (omega[k][e] != 0.0) pot[e][i] += dp * omega[k][e];
    }
  });
  p.total = to_field(spec::tensor_divergence(to_spectrum(p.potential)), Rank::vector3);
  p.corrector = p.total - p.principal;
  return p;
}

Perturbation assemble(const CoefficientSet& c, const BlockSet& blocks) {
  const GridSpec& g = c.source.grid();
  Perturbation p;
  p.principal = TorusField(g, Rank::vector3);
  p.corrector = TorusField(g, Rank::vector3);
  p.total = TorusField(g, Rank::vector3);
  p.potential = TorusField(g, Rank::tensor3x3, Symmetry::skew);
  for (int j = 0; j < g.n_t; ++j) {
    PerturbationSlice s = assemble_slice(c.slice(j), blocks);
    p.principal.assign_slice(j, s.principal);
    p.corrector.assign_slice(j, s.corrector);
    p.total.assign_slice(j, s.total);
    p.potential.assign_slice(j, s.potential);
  }
  return p;
}

TorusField closed_form_corrector(const CoefficientSlice& c, const BlockSet& blocks) {
  require_grid(c, blocks);
  int n = blocks.n_x();
  TorusField out(GridSpec{n, 1}, Rank::vector3);
  for (int k = 0; k < 6; ++k) {
    const MikadoBlock& b = blocks.block(c.family, k);
    if (max_abs(c.a[k]) == 0.0) continue;
    TorusField grad = differential(c.a[k], DiffOp::gradient);
    const Direction& d = b.direction();
    Vec3 a = planar(d.A_tilde);
    const double* gx = grad.plane(0, 0);
    const double* gy = grad.plane(0, 1);
    std::array<double*, 3> o{out.plane(0, 0), out.plane(0, 1), out.plane(0, 2)};
    std::array<double, 3> o1{}, o2{};
    for (int row = 0; row < 3; ++row) {
      o1[row] = d.k[row] * a[0] - a[row] * d.k[0];
      o2[row] = d.k[row] * a[1] - a[row] * d.k[1];
    }
    for_points(n, [&](std::size_t i, int i1, int i2) {
      double dp = b.dPhi_table()[b.residue(i1, i2)];
      if (dp == 0.0) return;
      for (int row = 0; row < 3; ++row) o[row][i] += dp * (o1[row] * gx[i] + o2[row] * gy[i]);
    });
  }
  return out;
}

PerturbationChecks check_perturbation(const PerturbationSlice& p, const CoefficientSlice& c, const BlockSet& blocks) {
  PerturbationChecks out;
  TorusField div_pot = to_field(spec::tensor_divergence(to_spectrum(p.potential)), Rank::vector3);
  double scale = std::max(max_abs(p.total), std::numeric_limits<double>::min());
  out.potential_defect = max_abs_diff(p.total, div_pot) / scale;
  out.divergence = spec::relative_divergence(to_spectrum(p.total));
  TorusField cf = closed_form_corrector(c, blocks);
  double l2p = norm_slice(p.principal, 0, NormKind::Lp(2.0));
  if (l2p > 0.0) {
    out.aliasing_defect = norm_slice(p.corrector - cf, 0, NormKind::Lp(2.0)) / l2p;
    out.corrector_ratio = norm_slice(cf, 0, NormKind::Lp(2.0)) / l2p;
  }
  return out;
}

TorusField self_interaction(const CoefficientSlice& c, const BlockSet& blocks) {
  require_grid(c, blocks);
  int n = blocks.n_x();
  TorusField out(GridSpec{n, 1}, Rank::tensor3x3, Symmetry::symmetric);
  std::array<double*, 9> o{};
  for (int e = 0; e < 9; ++e) o[e] = out.plane(0, e);
  for (int k = 0; k < 6; ++k) {
    const MikadoBlock& b = blocks.block(c.family, k);
    double mean = b.grid_mean([](double v) { return v * v; });
    const Vec3& kv = b.direction().k;
    const double* a = c.a[k].plane(0, 0);
    std::array<double, 9> kk{};
    for (int e = 0; e < 9; ++e) kk[e] = kv[e / 3] * kv[e % 3];
    for_points(n, [&](std::size_t i, int i1, int i2) {
      if (a[i] == 0.0) return;
      double ph = b.phi_table()[b.residue(i1, i2)];
      double v = a[i] * a[i] * (ph * ph - mean);
      for (int e = 0; e < 9; ++e) o[e][i] += v * kk[e];
    });
  }
  return out;
}

TorusField pair_interaction(const CoefficientSlice& c, const BlockSet& blocks) {
  require_grid(c, blocks);
  int n = blocks.n_x();
  TorusField out(GridSpec{n, 1}, Rank::tensor3x3, Symmetry::symmetric);
  std::array<const MikadoBlock*, 6> blk{};
  std::array<const double*, 6> coef{};
  for (int k = 0; k < 6; ++k) {
    blk[k] = &blocks.block(c.family, k);
    coef[k] = c.a[k].plane(0, 0);
  }
  // Symmetrized k⊗k′ + k′⊗k for each unordered pair.
  std::array<std::array<double, 9>, 36> sym{};
  for (int k = 0; k < 6; ++k)
    for (int kp = k + 1; kp < 6; ++kp) {
      const Vec3& x = blk[k]->direction().k;
      const Vec3& y = blk[kp]->direction().k;
      for (int e = 0; e < 9; ++e) sym[6 * k + kp][e] = x[e / 3] * y[e % 3] + y[e / 3] * x[e % 3];
    }
  std::array<double*, 9> o{};
  for (int e = 0; e < 9; ++e) o[e] = out.plane(0, e);
  for_points(n, [&](std::size_t i, int i1, int i2) {
    std::array<double, 6> v{};
    int nonzero = 0;
    for (int k = 0; k < 6; ++k) {
      double a = coef[k][i];
      v[k] = a == 0.0 ? 0.0 : a * blk[k]->phi_table()[blk[k]->residue(i1, i2)];
      nonzero += v[k] != 0.0;
    }
    if (nonzero < 2) return;
    for (int k = 0; k < 6; ++k) {
      if (v[k] == 0.0) continue;
      for (int kp = k + 1; kp < 6; ++kp) {
        if (v[kp] == 0.0) continue;
        double w = v[k] * v[kp];
        const auto& m = sym[6 * k + kp];
        for (int e = 0; e < 9; ++e) o[e][i] += w * m[e];
      }
    }
  });
  return out;
}

namespace {

TorusField theta_rho_identity(const CoefficientSlice& c) {
  TorusField s = c.rho;
  for (double& v : s.samples()) v *= c.theta * c.theta;
  return identity_times(s);
}

}  // namespace

double magnetic_expansion_defect(const TorusField& d_p, const TorusField& r_b_l, const CoefficientSlice& mag,
                                 const BlockSet& blocks) {
  TorusField lhs = outer(d_p, d_p) + r_b_l;
  TorusField rhs = theta_rho_identity(mag) + self_interaction(mag, blocks) + pair_interaction(mag, blocks);
  double scale = std::max({max_abs(outer(d_p, d_p)), max_abs(r_b_l), std::numeric_limits<double>::min()});
  return max_abs_diff(lhs, rhs) / scale;
}

double velocity_expansion_defect(const TorusField& w_p, const TorusField& d_p, const TorusField& r_u_l,
                                 const CoefficientSlice& vel, const CoefficientSlice& mag, const BlockSet& blocks) {
  TorusField ww = outer(w_p, w_p);
  TorusField dd = outer(d_p, d_p);
  TorusField lhs = ww - dd + r_u_l;
  TorusField rhs = theta_rho_identity(vel) + self_interaction(vel, blocks) - self_interaction(mag, blocks) +
                   pair_interaction(vel, blocks) - pair_interaction(mag, blocks);
  double scale = std::max({max_abs(ww), max_abs(dd), max_abs(r_u_l), std::numeric_limits<double>::min()});
  return max_abs_diff(lhs, rhs) / scale;
}

// ---- decorrelation ------------------------------------------------------------------------

DecorrelationResult decorrelation_check(const TorusField& a, const std::vector<int>& sigmas, double p, double mu,
                                       int direction_id) {
  require_stationary(a, Rank::scalar, "decorrelation_check");
  if (sigmas.size() < 3) throw std::invalid_argument("decorrelation_check: need at least 3 sigma values");
  for (int s : sigmas)
    if (s < 1 || (s & (s - 1)) != 0) throw std::invalid_argument("decorrelation_check: sigma values must be powers of two");
  if (!(p >= 1.0)) throw std::invalid_argument("decorrelation_check: p must be >= 1");
  const Direction& d = lambda_sets().at(direction_id);
  int n = a.grid().n_x;
  std::size_t np = a.grid().plane();
  auto mean_p = [&](const std::vector<double>& v) {
    std::vector<double> w(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) w[i] = std::pow(std::abs(v[i]), p);
    return std::pow(pairwise_sum(w.data(), w.size()) / static_cast<double>(w.size()), 1.0 / p);
  };
  std::vector<double> av(a.plane(0, 0), a.plane(0, 0) + np);
  double norm_a = mean_p(av);
  DecorrelationResult out;
  out.p = p;
  out.sigmas = sigmas;
  double scale = 0.0;
  for (int s : sigmas) {
    MikadoBlock b(d, mu, s, d.denom, {0.0, 0.0}, n);
    std::vector<double> ph(np), prod(np);
    for (int i2 = 0; i2 < n; ++i2)
      for (int i1 = 0; i1 < n; ++i1) {
        std::size_t i = static_cast<std::size_t>(i2) * n + i1;
        ph[i] = b.phi_table()[b.residue(i1, i2)];
        prod[i] = av[i] * ph[i];
      }
    double lhs = mean_p(prod);
    double rhs = norm_a * mean_p(ph);
    scale = std::max(scale, std::abs(rhs));
    out.differences.push_back(std::abs(lhs - rhs));
  }
  double floor = 1e-13 * std::max(scale, 1.0);
  bool all_tiny = std::all_of(out.differences.begin(), out.differences.end(), [&](double v) { return v <= floor; });
  if (all_tiny) {
    out.exact = true;
    out.exponent = -std::numeric_limits<double>::infinity();
    return out;
  }
  std::vector<double> x, y;
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    x.push_back(sigmas[i]);
    y.push_back(std::max(out.differences[i], floor));
  }
  out.exponent = fit_exponent(x, y);
  return out;
}

}  // namespace hallci

#include "hallci/stress_assembler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include "hallci/parallel.hpp"
#include "hallci/spectral_calculus.hpp"
#include "hallci/time_grid.hpp"

namespace hallci {

namespace {

// ---- slice-level operator shorthands -----------------------------------------------------

Spectrum sp(const TorusField& f) { return to_spectrum(f); }

TorusField inv_div(const Spectrum& v) {
  return to_field(spec::inverse_divergence(v), Rank::tensor3x3, Symmetry::symmetric_traceless);
}

Spectrum div_of(const TorusField& t) { return spec::tensor_divergence(to_spectrum(t)); }

Spectrum lap(const Spectrum& s, double alpha) { return spec::multiplier(s, MultiplierSymbol::fractional_laplacian(alpha)); }

Spectrum curl_inv(const Spectrum& v, const char* where) {
  double rel = spec::relative_divergence(v);
  if (rel > kInverseCurlDivTol)
    throw std::domain_error(std::string(where) + ": curl^-1 input not divergence-free (relative divergence " +
                            std::to_string(rel) + ")");
  return spec::inverse_curl(v);
}

Spectrum scaled(Spectrum s, double c) {
  s *= c;
  return s;
}

TorusField sym_sum(const TorusField& a, const TorusField& b) {  // a⊗b + b⊗a
  TorusField t = outer(a, b) + outer(b, a);
  t.set_symmetry(Symmetry::symmetric);
  return t;
}

TorusField skew_diff(const TorusField& a, const TorusField& b) {  // a⊗b − b⊗a
  TorusField t = outer(a, b) - outer(b, a);
  t.set_symmetry(Symmetry::skew);
  return t;
}

TorusField traceless_sq(const TorusField& a) {
  TorusField t = traceless_outer(a, a);
  t.set_symmetry(Symmetry::symmetric_traceless);
  return t;
}

// ∫|f|² over the torus from a half spectrum.
double spectral_l2_sq(const Spectrum& s) {
  int n = s.n();
  int nh = n / 2 + 1;
  std::vector<double> acc(s.plane_size(), 0.0);
  for (int c = 0; c < s.ncomp(); ++c) {
    const cplx* p = s.comp(c);
    for (std::size_t i = 0; i < s.plane_size(); ++i) {
      int k1 = static_cast<int>(i % nh);
      double w = (k1 == 0 || 2 * k1 == n) ? 1.0 : 2.0;
      acc[i] += w * std::norm(p[i]);
    }
  }
  double h = 2.0 * std::numbers::pi / n;
  double nn = static_cast<double>(n) * n;
  return pairwise_sum(acc.data(), acc.size()) * h * h / nn;
}

void require_divergence_free(const TorusField& v, const char* what) {
  double scale = max_abs(v);
  if (scale == 0.0) return;
  if (spec::relative_divergence(to_spectrum(v)) > 1e-10)
    throw std::invalid_argument(std::string(what) + ": input not divergence-free");
  for (double m : component_means(v, 0))
    if (std::abs(m) > 1e-12 * std::max(1.0, scale)) throw std::invalid_argument(std::string(what) + ": input not mean-free");
}

}  // namespace

// ---- commutators --------------------------------------------------------------------------------

CommutatorSeries commutator_stresses(const FieldSeries& u, const FieldSeries& b, double l) {
  if (!(u.grid() == b.grid())) throw std::invalid_argument("commutator_stresses: grid mismatch");
  const GridSpec g = u.grid();
  FieldSeries ul = series_mollify(u, l);
  FieldSeries bl = series_mollify(b, l);
  FieldSeries uu_bb(g, Rank::tensor3x3, Symmetry::symmetric_traceless, [u, b](int j) {
    TorusField t = traceless_sq(*u.at(j)) - traceless_sq(*b.at(j));
    t.set_symmetry(Symmetry::symmetric_traceless);
    return t;
  }, 2);
  FieldSeries bb(g, Rank::tensor3x3, Symmetry::symmetric_traceless, [b](int j) { return traceless_sq(*b.at(j)); }, 2);
  FieldSeries bu(g, Rank::tensor3x3, Symmetry::skew, [u, b](int j) { return skew_diff(*b.at(j), *u.at(j)); }, 2);
  FieldSeries m_uu_bb = series_mollify(uu_bb, l, 2);
  FieldSeries m_bb = series_mollify(bb, l, 2);
  FieldSeries m_bu = series_mollify(bu, l, 2);
  CommutatorSeries out;
  out.R_u = FieldSeries(g, Rank::tensor3x3, Symmetry::symmetric_traceless, [ul, bl, m_uu_bb](int j) {
    TorusField t = traceless_sq(*ul.at(j)) - traceless_sq(*bl.at(j)) - *m_uu_bb.at(j);
    t.set_symmetry(Symmetry::symmetric_traceless);
    return t;
  }, 2);
  out.R_B1 = FieldSeries(g, Rank::tensor3x3, Symmetry::symmetric_traceless, [bl, m_bb](int j) {
    TorusField t = traceless_sq(*bl.at(j)) - *m_bb.at(j);
    t.set_symmetry(Symmetry::symmetric_traceless);
    return t;
  }, 2);
  out.R_B2 = FieldSeries(g, Rank::tensor3x3, Symmetry::skew, [ul, bl, m_bu](int j) {
    TorusField t = skew_diff(*bl.at(j), *ul.at(j)) - *m_bu.at(j);
    t.set_symmetry(Symmetry::skew);
    return t;
  }, 2);
  return out;
}

CommutatorStresses commutator_stresses(const TorusField& u, const TorusField& b, double l) {
  CommutatorSeries s = commutator_stresses(FieldSeries::wrap(u), FieldSeries::wrap(b), l);
  return {s.R_u.materialize(), s.R_B1.materialize(), s.R_B2.materialize()};
}

// ---- initial and mollification stresses ----------------------------------------------------------

InitialSeries initial_stresses(const FieldSeries& u0, const FieldSeries& b0, const EquationParams& eq) {
  if (!(u0.grid() == b0.grid())) throw std::invalid_argument("initial_stresses: grid mismatch");
  const GridSpec g = u0.grid();
  FieldSeries dtu = series_time_derivative(u0);
  FieldSeries dtb = series_time_derivative(b0);
  InitialSeries out;
  out.R_u = FieldSeries(g, Rank::tensor3x3, Symmetry::symmetric_traceless, [u0, b0, dtu, eq](int j) {
    const TorusField& u = *u0.at(j);
    const TorusField& b = *b0.at(j);
    require_divergence_free(u, "initial_stresses");
    require_divergence_free(b, "initial_stresses");
    Spectrum v = sp(*dtu.at(j));
    v += scaled(lap(sp(u), eq.alpha1), eq.nu1);
    TorusField r = inv_div(v) + traceless_sq(u) - traceless_sq(b);
    r.set_symmetry(Symmetry::symmetric_traceless);
    return r;
  }, 3);
  out.R_B = FieldSeries(g, Rank::tensor3x3, Symmetry::symmetric_traceless, [u0, b0, dtb, eq](int j) {
    const TorusField& u = *u0.at(j);
    const TorusField& b = *b0.at(j);
    Spectrum v = sp(*dtb.at(j));
    v += scaled(lap(sp(b), eq.alpha2), eq.nu2);
    v += div_of(skew_diff(b, u));
    TorusField r = inv_div(curl_inv(v, "initial_stresses")) + traceless_sq(b);
    r.set_symmetry(Symmetry::symmetric_traceless);
    return r;
  }, 3);
  out.pressure = FieldSeries(g, Rank::scalar, Symmetry::none, [u0, b0](int j) {
    TorusField p = dot(*u0.at(j), *u0.at(j)) - dot(*b0.at(j), *b0.at(j));
    return (1.0 / 3.0) * p;
  });
  return out;
}

StressPair initial_stresses(const TorusField& u0, const TorusField& b0, const EquationParams& eq, TorusField* pressure) {
  InitialSeries s = initial_stresses(FieldSeries::wrap(u0), FieldSeries::wrap(b0), eq);
  StressPair out;
  out.R_u = s.R_u.materialize();
  out.R_B = s.R_B.materialize();
  out.provenance = "initial";
  std::vector<double> prof(u0.grid().n_t);
  for (int j = 0; j < u0.grid().n_t; ++j)
    prof[j] = norm_slice(out.R_u, j, NormKind::Lp(1.0)) + norm_slice(out.R_B, j, NormKind::Lp(1.0));
  out.support = support_intervals(prof, u0.grid());
  if (pressure) *pressure = s.pressure.materialize();
  return out;
}

MollificationStresses mollification_stresses(const TorusField& u, const TorusField& b, double lambda_n, double alpha1,
                                             double alpha2) {
  if (!(lambda_n > 0.0)) throw std::invalid_argument("mollification_stresses: lambda_n must be positive");
  if (!(u.grid() == b.grid())) throw std::invalid_argument("mollification_stresses: grid mismatch");
  double l = 1.0 / lambda_n;
  MollifierSpec ms{l, u.grid().n_t > 1 ? MollifyAxes::both : MollifyAxes::space};
  MollificationStresses out;
  out.nu1_n = std::pow(lambda_n, -2.0 * alpha1);
  out.nu2_n = std::pow(lambda_n, -2.0 * alpha2);
  out.u_n = mollify(u, ms);
  out.B_n = mollify(b, ms);
  const GridSpec& g = u.grid();
  TorusField uu_bb(g, Rank::tensor3x3, Symmetry::symmetric_traceless);
  TorusField bb(g, Rank::tensor3x3, Symmetry::symmetric_traceless);
  TorusField bu(g, Rank::tensor3x3, Symmetry::skew);
  for (int j = 0; j < g.n_t; ++j) {
    TorusField us = u.slice(j), bs = b.slice(j);
    uu_bb.assign_slice(j, traceless_sq(us) - traceless_sq(bs));
    bb.assign_slice(j, traceless_sq(bs));
    bu.assign_slice(j, skew_diff(bs, us));
  }
  TorusField m_uu_bb = mollify(uu_bb, ms), m_bb = mollify(bb, ms), m_bu = mollify(bu, ms);
  out.stresses.R_u = TorusField(g, Rank::tensor3x3, Symmetry::symmetric_traceless);
  out.stresses.R_B = TorusField(g, Rank::tensor3x3, Symmetry::symmetric_traceless);
  parallel_for(g.n_t, [&](int j) {
    TorusField un = out.u_n.slice(j), bn = out.B_n.slice(j);
    TorusField ru = traceless_sq(un) - traceless_sq(bn) - m_uu_bb.slice(j) +
                    inv_div(scaled(lap(sp(un), alpha1), out.nu1_n));
    Spectrum v = scaled(lap(sp(bn), alpha2), out.nu2_n);
    TorusField skew = skew_diff(bn, un) - m_bu.slice(j);
    skew.set_symmetry(Symmetry::skew);
    v += div_of(skew);
    TorusField rb = traceless_sq(bn) - m_bb.slice(j) + inv_div(curl_inv(v, "mollification_stresses"));
    out.stresses.R_u.assign_slice(j, ru);
    out.stresses.R_B.assign_slice(j, rb);
  });
  out.stresses.provenance = "mollified";
  std::vector<double> prof(g.n_t);
  for (int j = 0; j < g.n_t; ++j)
    prof[j] = norm_slice(out.stresses.R_u, j, NormKind::Lp(1.0)) + norm_slice(out.stresses.R_B, j, NormKind::Lp(1.0));
  out.stresses.support = support_intervals(prof, g);
  return out;
}

// ---- error parts ------------------------------------------------------------------------------

PartPair linear_errors(const LinearInputs& in, const EquationParams& eq) {
  if (!in.w || !in.d || !in.dt_w || !in.dt_d || !in.u_l || !in.B_l)
    throw std::invalid_argument("linear_errors: missing input");
  const TorusField& w = in.w->total;
  const TorusField& d = in.d->total;
  int n = w.grid().n_x;
  for (const TorusField* f : {&d, in.dt_w, in.dt_d, in.u_l, in.B_l})
    if (f->grid().n_x != n) throw std::invalid_argument("linear_errors: grid mismatch");
  PartPair out;
  Spectrum vu = sp(*in.dt_w);
  vu += scaled(lap(sp(w), eq.alpha1), eq.nu1);
  TorusField nl = sym_sum(*in.u_l, w) - sym_sum(*in.B_l, d);
  nl.set_symmetry(Symmetry::symmetric);
  vu += spec::helmholtz(div_of(nl));
  out.u = inv_div(vu);

  Spectrum vb = sp(*in.dt_d);
  vb += scaled(lap(sp(d), eq.alpha2), eq.nu2);
  TorusField sk = skew_diff(*in.B_l, w) + skew_diff(d, *in.u_l);
  sk.set_symmetry(Symmetry::skew);
  vb += div_of(sk);
  Spectrum hb = curl_inv(vb, "linear_errors");
  hb += div_of(sym_sum(*in.B_l, d));
  out.B = inv_div(hb);
  return out;
}

PartPair corrector_errors(const PerturbationSlice& w, const PerturbationSlice& d) {
  PartPair out;
  TorusField tu = outer(w.principal, w.corrector) + outer(w.corrector, w.total) - outer(d.principal, d.corrector) -
                  outer(d.corrector, d.total);
  out.u = inv_div(spec::helmholtz(div_of(tu)));
  TorusField sk = skew_diff(d.principal, w.corrector) + skew_diff(d.corrector, w.total);
  sk.set_symmetry(Symmetry::skew);
  Spectrum vb = curl_inv(div_of(sk), "corrector_errors");
  vb += div_of(outer(d.principal, d.corrector) + outer(d.corrector, d.total));
  out.B = inv_div(vb);
  return out;
}

OscillationErrors oscillation_errors(const CoefficientSlice& vel, const CoefficientSlice& mag, const TorusField& w_p,
                                     const TorusField& d_p, const BlockSet& blocks) {
  if (vel.family != 1 || mag.family != 2) throw std::invalid_argument("oscillation_errors: family mismatch");
  OscillationErrors out;
  TorusField self_b = self_interaction(mag, blocks);
  TorusField pair_b = pair_interaction(mag, blocks);
  TorusField self_u = self_interaction(vel, blocks) - self_b;
  TorusField pair_u = pair_interaction(vel, blocks) - pair_b;
  self_u.set_symmetry(Symmetry::symmetric);
  pair_u.set_symmetry(Symmetry::symmetric);
  out.x_B = inv_div(div_of(self_b));
  Spectrum far = div_of(pair_b);
  far += curl_inv(div_of(skew_diff(d_p, w_p)), "oscillation_errors");
  out.far_B = inv_div(far);
  out.x_u = inv_div(spec::helmholtz(div_of(self_u)));
  out.far_u = inv_div(spec::helmholtz(div_of(pair_u)));
  return out;
}

PartPair commutator_errors(const TorusField& R_u_com, const TorusField& R_B1, const TorusField& R_B2) {
  PartPair out;
  out.u = inv_div(spec::helmholtz(div_of(R_u_com)));
  out.B = R_B1 + inv_div(curl_inv(div_of(R_B2), "commutator_errors"));
  out.B.set_symmetry(Symmetry::symmetric_traceless);
  return out;
}

StressPair assemble_new_stresses(const StressParts& p) {
  for (const TorusField* f : {&p.lin.u, &p.lin.B, &p.cor.u, &p.cor.B, &p.com.u, &p.com.B, &p.osc.x_u, &p.osc.far_u,
                              &p.osc.x_B, &p.osc.far_B})
    if (f->empty()) throw std::invalid_argument("assemble_new_stresses: missing part");
  StressPair out;
  out.R_u = p.lin.u + p.cor.u + p.osc.x_u + p.osc.far_u + p.com.u;
  out.R_B = p.lin.B + p.cor.B + p.osc.x_B + p.osc.far_B + p.com.B;
  out.R_u.set_symmetry(Symmetry::symmetric_traceless);
  out.R_B.set_symmetry(Symmetry::symmetric_traceless);
  out.provenance = "iterated";
  return out;
}

double idempotence_defect(const TorusField& R_u) {
  double scale = max_abs(R_u);
  if (scale == 0.0) return 0.0;
  TorusField back = inv_div(spec::helmholtz(div_of(R_u)));
  return max_abs_diff(back, R_u) / scale;
}

// ---- residuals ----------------------------------------------------------------------------------

namespace {
const char* kVelTerms[] = {"dt_u", "dissipation", "nonlinear", "stress"};
const char* kMagTerms[] = {"dt_B", "dissipation", "transport", "hall", "stress"};
}  // namespace

ResidualAccumulator::ResidualAccumulator(const GridSpec& grid, const EquationParams& eq)
    : grid_(grid), eq_(eq), w_(trapezoid_weights(grid.n_t)), vel_sq_(4, 0.0), mag_sq_(5, 0.0) {}

void ResidualAccumulator::add(int j, const TorusField& u, const TorusField& b, const TorusField& dt_u,
                              const TorusField& dt_b, const TorusField& R_u, const TorusField& R_B) {
  double w = w_[j];
  std::array<Spectrum, 4> vt = {spec::helmholtz(sp(dt_u)), spec::helmholtz(scaled(lap(sp(u), eq_.alpha1), eq_.nu1)),
                                Spectrum(), spec::helmholtz(div_of(R_u))};
  TorusField nl = outer(u, u) - outer(b, b);
  nl.set_symmetry(Symmetry::symmetric);
  vt[2] = spec::helmholtz(div_of(nl));
  Spectrum rv = vt[0];
  rv += vt[1];
  rv += vt[2];
  rv -= vt[3];
  for (int k = 0; k < 4; ++k) vel_sq_[k] += w * spectral_l2_sq(vt[k]);
  vel_res_sq_ += w * spectral_l2_sq(rv);
  vel_res_l1_ += w * norm_slice(to_field(rv, Rank::vector3), 0, NormKind::Lp(1.0));

  TorusField bb = outer(b, b);
  bb.set_symmetry(Symmetry::symmetric);
  std::array<Spectrum, 5> mt = {sp(dt_b), scaled(lap(sp(b), eq_.alpha2), eq_.nu2), div_of(skew_diff(b, u)),
                                spec::curl(div_of(bb)), spec::curl(div_of(R_B))};
  Spectrum rm = mt[0];
  rm += mt[1];
  rm += mt[2];
  rm += mt[3];
  rm -= mt[4];
  for (int k = 0; k < 5; ++k) mag_sq_[k] += w * spectral_l2_sq(mt[k]);
  mag_res_sq_ += w * spectral_l2_sq(rm);
  mag_res_l1_ += w * norm_slice(to_field(rm, Rank::vector3), 0, NormKind::Lp(1.0));
}

ResidualReport ResidualAccumulator::report() const {
  ResidualReport r;
  r.velocity_l2 = std::sqrt(vel_res_sq_);
  r.magnetic_l2 = std::sqrt(mag_res_sq_);
  r.velocity_l1 = vel_res_l1_;
  r.magnetic_l1 = mag_res_l1_;
  for (int k = 0; k < 4; ++k) {
    double v = std::sqrt(vel_sq_[k]);
    r.velocity_scale = std::max(r.velocity_scale, v);
    r.terms.push_back({"velocity", kVelTerms[k], v});
  }
  for (int k = 0; k < 5; ++k) {
    double v = std::sqrt(mag_sq_[k]);
    r.magnetic_scale = std::max(r.magnetic_scale, v);
    r.terms.push_back({"magnetic", kMagTerms[k], v});
  }
  return r;
}

ResidualReport residual(const FieldSeries& u, const FieldSeries& b, const FieldSeries& R_u, const FieldSeries& R_B,
                        const EquationParams& eq) {
  const GridSpec g = u.grid();
  for (const FieldSeries* s : {&b, &R_u, &R_B})
    if (!(s->grid() == g)) throw std::invalid_argument("residual: grid mismatch");
  FieldSeries dtu = series_time_derivative(u);
  FieldSeries dtb = series_time_derivative(b);
  ResidualAccumulator acc(g, eq);
  for (int j = 0; j < g.n_t; ++j) acc.add(j, *u.at(j), *b.at(j), *dtu.at(j), *dtb.at(j), *R_u.at(j), *R_B.at(j));
  return acc.report();
}

ResidualReport residual(const TorusField& u, const TorusField& b, const TorusField& R_u, const TorusField& R_B,
                        const EquationParams& eq) {
  return residual(FieldSeries::wrap(u), FieldSeries::wrap(b), FieldSeries::wrap(R_u), FieldSeries::wrap(R_B), eq);
}

// ---- weak formulation ------------------------------------------------------------------------------

std::vector<TestFunction> default_test_family(const GridSpec& grid, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  std::vector<TestFunction> out;
  for (int c = 0; c < count; ++c) {
    // ψ and ζ are random trigonometric polynomials with modes |k|∞ ≤ 2.
    std::vector<std::array<double, 4>> psi, zeta;
    for (int k1 = -2; k1 <= 2; ++k1)
      for (int k2 = -2; k2 <= 2; ++k2) {
        if (k1 == 0 && k2 == 0) continue;
        psi.push_back({double(k1), double(k2), coef(rng), coef(rng)});
        zeta.push_back({double(k1), double(k2), coef(rng), coef(rng)});
      }
    double shift = 0.3 * coef(rng);
    TestFunction tf;
    tf.phi = sample(grid, Rank::vector3, [&](double t, double x1, double x2, double* o) {
      double eta = (1.0 - t) * (1.0 - t) * (1.0 + shift * std::sin(2.0 * std::numbers::pi * t));
      double d1 = 0.0, d2 = 0.0, z = 0.0;
      for (const auto& m : psi) {
        double ph = m[0] * x1 + m[1] * x2;
        double dv = -m[2] * std::sin(ph) + m[3] * std::cos(ph);  // derivative of a cos + b sin along the phase
        d1 += m[0] * dv;
        d2 += m[1] * dv;
      }
      for (const auto& m : zeta) {
        double ph = m[0] * x1 + m[1] * x2;
        z += m[2] * std::cos(ph) + m[3] * std::sin(ph);
      }
      o[0] = eta * d2;
      o[1] = -eta * d1;
      o[2] = eta * z;
    });
    out.push_back(std::move(tf));
  }
  return out;
}

namespace {

double inner_slice(const TorusField& a, const TorusField& b) {
  double h = a.grid().h();
  std::size_t np = a.grid().plane();
  std::vector<double> acc(static_cast<std::size_t>(a.ncomp()));
  for (int c = 0; c < a.ncomp(); ++c) {
    std::vector<double> prod(np);
    const double* x = a.plane(0, c);
    const double* y = b.plane(0, c);
    for (std::size_t i = 0; i < np; ++i) prod[i] = x[i] * y[i];
    acc[c] = pairwise_sum(prod.data(), np);
  }
  return pairwise_sum(acc.data(), acc.size()) * h * h;
}

// (∇φ)^{kℓ} = ∂_ℓ φ^k
TorusField grad_vector(const TorusField& phi) {
  Spectrum s = to_spectrum(phi);
  Spectrum out(s.n(), 9);
  for (int k = 0; k < 3; ++k) {
    Spectrum one(s.n(), 1);
    std::copy(s.comp(k), s.comp(k) + s.plane_size(), one.comp(0));
    Spectrum g = spec::gradient(one);
    std::copy(g.comp(0), g.comp(0) + s.plane_size(), out.comp(tc(k, 0)));
    std::copy(g.comp(1), g.comp(1) + s.plane_size(), out.comp(tc(k, 1)));
  }
  return to_field(out, Rank::tensor3x3);
}

}  // namespace

double weak_form_check(const TorusField& u, const TorusField& b, const std::vector<TestFunction>& tests,
                       const EquationParams& eq, const TorusField* R_u, const TorusField* R_B) {
  const GridSpec& g = u.grid();
  if (!(b.grid() == g)) throw std::invalid_argument("weak_form_check: grid mismatch");
  if (g.n_t < 5) throw std::invalid_argument("weak_form_check: at least 5 time samples required");
  TorusField dtu = time_derivative(u), dtb = time_derivative(b);
  std::vector<double> w = trapezoid_weights(g.n_t);
  double worst = 0.0;
  for (const auto& tf : tests) {
    if (!(tf.phi.grid() == g)) throw std::invalid_argument("weak_form_check: test function grid mismatch");
    std::array<double, 4> tu{};
    std::array<double, 5> tb{};
    for (int j = 0; j < g.n_t; ++j) {
      TorusField phi = tf.phi.slice(j);
      if (max_abs(phi) > 0.0 && spec::relative_divergence(to_spectrum(phi)) > 1e-10)
        throw std::invalid_argument("weak_form_check: test function not divergence-free");
      TorusField us = u.slice(j), bs = b.slice(j);
      TorusField gphi = grad_vector(phi);
      TorusField gcurl = grad_vector(differential(phi, DiffOp::curl));
      tu[0] -= w[j] * inner_slice(dtu.slice(j), phi);
      tu[1] -= w[j] * eq.nu1 * inner_slice(us, apply_multiplier(phi, MultiplierSymbol::fractional_laplacian(eq.alpha1)));
      tu[2] += w[j] * inner_slice(outer(us, us) - outer(bs, bs), gphi);
      if (R_u) tu[3] -= w[j] * inner_slice(R_u->slice(j), gphi);
      tb[0] -= w[j] * inner_slice(dtb.slice(j), phi);
      tb[1] -= w[j] * eq.nu2 * inner_slice(bs, apply_multiplier(phi, MultiplierSymbol::fractional_laplacian(eq.alpha2)));
      tb[2] += w[j] * inner_slice(outer(bs, us) - outer(us, bs), gphi);
      tb[3] += w[j] * inner_slice(outer(bs, bs), gcurl);
      if (R_B) tb[4] -= w[j] * inner_slice(R_B->slice(j), gcurl);
    }
    auto defect = [](const auto& terms) {
      double sum = 0.0, scale = 0.0;
      for (double v : terms) {
        sum += v;
        scale = std::max(scale, std::abs(v));
      }
      return scale > 0.0 ? std::abs(sum) / scale : 0.0;
    };
    worst = std::max({worst, defect(tu), defect(tb)});
  }
  return worst;
}

// ---- ledger ------------------------------------------------------------------------------------------

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string ledger_csv(const std::vector<LedgerRow>& rows) {
  std::ostringstream os;
  os << "part,norm_kind,value,paper_bound_formula,parameters\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g", r.value);
    os << csv_field(r.part) << ',' << csv_field(r.norm_kind) << ',' << buf << ',' << csv_field(r.paper_bound_formula)
       << ',' << csv_field(r.parameters) << '\n';
  }
  return os.str();
}

void write_ledger_csv(const std::vector<LedgerRow>& rows, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write ledger: " + path);
  f << ledger_csv(rows);
}

std::string part_bound_formula(const std::string& part) {
  if (part.rfind("lin", 0) == 0 || part.rfind("cor", 0) == 0) return "lambda_{q+1}^(-eps/4)";
  if (part.rfind("osc_x", 0) == 0) return "sigma^(-1) l^(-13) mu^(1-1/p)";
  if (part.rfind("osc_far", 0) == 0) return "l^(-2) mu^(1-2/p)";
  if (part.rfind("com", 0) == 0) return "lambda_q^(-6)";
  if (part.rfind("total", 0) == 0) return "delta_{q+2}";
  return "";
}

}  // namespace hallci

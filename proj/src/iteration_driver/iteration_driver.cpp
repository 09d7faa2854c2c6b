#include "hallci/iteration_driver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <numbers>

#include <boost/multiprecision/cpp_int.hpp>

#include "hallci/direction_geometry.hpp"
#include "hallci/parallel.hpp"
#include "hallci/spectral_calculus.hpp"
#include "hallci/time_grid.hpp"

namespace hallci {

// ---- schedules ------------------------------------------------------------------------------

namespace {

BigPower big_power(long a, double exponent) {
  BigPower p;
  p.log10 = exponent * std::log10(static_cast<double>(a));
  double bits = exponent * std::log2(static_cast<double>(a));
  if (bits <= kMaxMaterializedBits && exponent == std::floor(exponent)) {
    boost::multiprecision::cpp_int v = boost::multiprecision::pow(boost::multiprecision::cpp_int(a),
                                                                   static_cast<unsigned>(exponent));
    p.materialized = true;
    p.decimal = v.str();
  }
  return p;
}

BigPower from_log10(double lg) {
  BigPower p;
  p.log10 = lg;
  return p;
}

double from_log(double lg) { return lg > 308.0 ? std::numeric_limits<double>::infinity() : std::pow(10.0, lg); }

void fill_working(ParamSchedule& s, double epsilon) {
  s.log10_mu = s.lambda_q1.log10;
  s.log10_sigma = epsilon * s.lambda_q1.log10;
  s.log10_l = -20.0 * s.lambda_q.log10;
  s.mu = from_log(s.log10_mu);
  double sig = std::floor(from_log(s.log10_sigma));
  s.sigma = sig < 2.0 ? 2 : (sig > 1e9 ? 0 : static_cast<int>(sig));
  s.l = std::pow(10.0, s.log10_l);
  s.required_n_x = 8.0 * from_log(s.log10_mu + s.log10_sigma) * common_n_lambda();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

double BigPower::value() const {
  if (materialized && decimal.size() < 300) return std::stod(decimal);
  return from_log(log10);
}

std::string BigPower::str() const {
  if (materialized) return decimal;
  char buf[64];
  std::snprintf(buf, sizeof buf, "10^%.9g", log10);
  return buf;
}

double ParamSchedule::delta_q1() const { return std::pow(10.0, log10_delta_q1); }
double ParamSchedule::delta_q2() const { return std::pow(10.0, log10_delta_q2); }

ParamSchedule schedule_formulas(long a, long b, double beta, int q) {
  if (a < 2 || b < 2) throw std::invalid_argument("schedule: a >= 2 and b >= 2 required");
  if (q < 0) throw std::invalid_argument("schedule: q must be non-negative");
  ParamSchedule s;
  s.a = a;
  s.b = b;
  s.beta = beta;
  s.q = q;
  double bq = std::pow(static_cast<double>(b), q);
  s.lambda_q = big_power(a, bq);
  s.lambda_q1 = big_power(a, bq * b);
  s.lambda_q2 = big_power(a, bq * b * b);
  s.log10_delta_q1 = -2.0 * beta * s.lambda_q1.log10;
  s.log10_delta_q2 = -2.0 * beta * s.lambda_q2.log10;
  return s;
}

ParamSchedule paper_schedule(long a, long b, double beta, double epsilon, int q, double alpha1, double alpha2) {
  ParamSchedule s = schedule_formulas(a, b, beta, q);
  s.epsilon = epsilon;
  double eps_max = 0.25 * std::min({0.5, 0.75 - alpha1, 1.25 - alpha2});
  s.constraints = {
      {"b > 1000/ε", epsilon > 0.0 && static_cast<double>(b) > 1000.0 / epsilon,
       "b = " + std::to_string(b) + ", 1000/ε = " + fmt(epsilon > 0.0 ? 1000.0 / epsilon : INFINITY)},
      {"0 < β < 1/(100b²)", beta > 0.0 && beta < 1.0 / (100.0 * double(b) * double(b)),
       "β = " + fmt(beta) + ", 1/(100b²) = " + fmt(1.0 / (100.0 * double(b) * double(b)))},
      {"0 < ε ≤ min{1/2, 3/4 − α₁, 5/4 − α₂}/4", epsilon > 0.0 && epsilon <= eps_max,
       "ε = " + fmt(epsilon) + ", bound = " + fmt(eps_max)},
      {"b ∈ 2ℕ", b % 2 == 0, "b = " + std::to_string(b)},
      {"a ∈ 5ℕ", a % 5 == 0, "a = " + std::to_string(a)},
  };
  std::string violated;
  for (const auto& c : s.constraints)
    if (!c.holds) violated += (violated.empty() ? "" : "; ") + c.inequality + " violated (" + c.detail + ")";
  if (!violated.empty()) throw std::invalid_argument("schedule: " + violated);
  fill_working(s, epsilon);
  return s;
}

ParamSchedule desk_schedule(const DeskOverrides& d) {
  std::string violated;
  auto need = [&](bool ok, const std::string& what) {
    if (!ok) violated += (violated.empty() ? "" : "; ") + what + " violated";
  };
  need(d.sigma >= 2, "σ ≥ 2");
  need(d.mu >= 4.0, "μ ≥ 4");
  need(d.l > 0.0, "l > 0");
  need(d.b >= 2, "b ≥ 2");
  need(d.beta >= 0.0, "β ≥ 0");
  need(d.q >= 0, "q ≥ 0");
  if (!violated.empty()) throw std::invalid_argument("desk schedule: " + violated);
  ParamSchedule s;
  s.desk = true;
  s.b = d.b;
  s.beta = d.beta;
  s.q = d.q;
  double lg = std::log10(d.mu);
  s.lambda_q = from_log10(lg / d.b);
  s.lambda_q1 = from_log10(lg);
  s.lambda_q2 = from_log10(lg * d.b);
  s.log10_delta_q1 = -2.0 * d.beta * s.lambda_q1.log10;
  s.log10_delta_q2 = -2.0 * d.beta * s.lambda_q2.log10;
  s.mu = d.mu;
  s.sigma = d.sigma;
  s.l = d.l;
  s.log10_mu = lg;
  s.log10_sigma = std::log10(double(d.sigma));
  s.log10_l = std::log10(d.l);
  s.mode = d.mode;
  int n_lambda = 0;
  for (const auto& dir : lambda_sets()) n_lambda = std::max(n_lambda, block_n_lambda(dir, d.mode));
  s.required_n_x = 8.0 * d.mu * d.sigma * n_lambda;
  return s;
}

// ---- background fields and helicity -------------------------------------------------------------

double psi(double t) {
  if (t <= 0.25 || t >= 0.75) return 0.0;
  if (t < 0.5) return smoothstep5((t - 0.25) / 0.25);
  if (t <= 0.625) return 1.0;
  return smoothstep5((0.75 - t) / 0.125);
}

namespace {

void background_u(int m, double t, double, double x2, double* o) {
  double a = m * psi(t);
  o[0] = a * std::sin(x2);
  o[1] = 0.0;
  o[2] = 0.0;
}

void background_b(int m, double t, double x1, double x2, double* o) {
  double a = m * psi(t);
  o[0] = a * std::sin(x2);
  o[1] = a * std::cos(x1);
  o[2] = -a * (std::sin(x1) + std::cos(x2));
}

}  // namespace

std::pair<TorusField, TorusField> background_fields(int m, const GridSpec& grid) {
  if (m < 1) throw std::invalid_argument("background_fields: m must be a positive integer");
  TorusField u = sample(grid, Rank::vector3, [m](double t, double x1, double x2, double* o) { background_u(m, t, x1, x2, o); });
  TorusField b = sample(grid, Rank::vector3, [m](double t, double x1, double x2, double* o) { background_b(m, t, x1, x2, o); });
  return {std::move(u), std::move(b)};
}

std::pair<FieldSeries, FieldSeries> background_series(int m, const GridSpec& grid) {
  if (m < 1) throw std::invalid_argument("background_fields: m must be a positive integer");
  GridSpec sp = grid.spatial();
  auto make = [&](void (*gen)(int, double, double, double, double*)) {
    return FieldSeries(grid, Rank::vector3, Symmetry::none, [m, sp, grid, gen](int j) {
      double t = grid.t(j);
      return sample(sp, Rank::vector3, [m, t, gen](double, double x1, double x2, double* o) { gen(m, t, x1, x2, o); });
    });
  };
  return {make(background_u), make(background_b)};
}

namespace {

double integrate_plane(const TorusField& s) {
  double h = s.grid().h();
  return pairwise_sum(s.plane(0, 0), s.grid().plane()) * h * h;
}

double helicity_slice(const TorusField& b) {
  if (max_abs(b) == 0.0) return 0.0;
  Spectrum s = to_spectrum(b);
  if (spec::relative_divergence(s) > 1e-10) throw std::invalid_argument("helicity: B not divergence-free");
  TorusField a = to_field(spec::inverse_curl(s), Rank::vector3);
  return integrate_plane(dot(a, b));
}

}  // namespace

std::vector<double> helicity(const TorusField& b) {
  if (b.rank() != Rank::vector3) throw std::invalid_argument("helicity: vector field expected");
  std::vector<double> out(b.grid().n_t);
  for (int j = 0; j < b.grid().n_t; ++j) out[j] = helicity_slice(b.slice(j));
  return out;
}

std::vector<double> helicity(const FieldSeries& b) {
  if (b.rank() != Rank::vector3) throw std::invalid_argument("helicity: vector field expected");
  std::vector<double> out(b.n_t());
  for (int j = 0; j < b.n_t(); ++j) out[j] = helicity_slice(*b.at(j));
  return out;
}

// ---- states -----------------------------------------------------------------------------------

std::optional<double> IterationState::logged(const std::string& key) const {
  for (auto it = log.rbegin(); it != log.rend(); ++it)
    if (it->first == key) return it->second;
  return std::nullopt;
}

IterationState make_state(FieldSeries u, FieldSeries b, FieldSeries R_u, FieldSeries R_B, const ParamSchedule& s,
                          int q) {
  if (!u.valid() || !b.valid()) throw std::invalid_argument("make_state: fields required");
  if (!(u.grid() == b.grid())) throw std::invalid_argument("make_state: grid mismatch");
  IterationState st;
  st.q = q;
  st.schedule = s;
  st.u = std::move(u);
  st.b = std::move(b);
  const GridSpec g = st.u.grid();
  st.R_u = R_u.valid() ? std::move(R_u) : FieldSeries::zero(g, Rank::tensor3x3, Symmetry::symmetric_traceless);
  st.R_B = R_B.valid() ? std::move(R_B) : FieldSeries::zero(g, Rank::tensor3x3, Symmetry::symmetric_traceless);
  if (!(st.R_u.grid() == g) || !(st.R_B.grid() == g)) throw std::invalid_argument("make_state: grid mismatch");
  return st;
}

IterationState background_state(int m, const GridSpec& grid, const ParamSchedule& schedule, const EquationParams& eq) {
  auto [u, b] = background_series(m, grid);
  InitialSeries init = initial_stresses(u, b, eq);
  IterationState st = make_state(u, b, init.R_u, init.R_B, schedule, 0);
  st.log.emplace_back("m", m);
  return st;
}

namespace {

double field_mean_defect(const TorusField& f) {
  double scale = std::max(1.0, max_abs(f));
  double worst = 0.0;
  for (double m : component_means(f, 0)) worst = std::max(worst, std::abs(m) / scale);
  return worst;
}

double field_divergence(const TorusField& f) {
  if (max_abs(f) == 0.0) return 0.0;
  return spec::relative_divergence(to_spectrum(f));
}

}  // namespace

StateChecks check_state(const IterationState& s) {
  StateChecks c;
  for (int j = 0; j < s.grid().n_t; ++j) {
    auto u = s.u.at(j), b = s.b.at(j), ru = s.R_u.at(j), rb = s.R_B.at(j);
    c.divergence = std::max({c.divergence, field_divergence(*u), field_divergence(*b)});
    c.mean = std::max({c.mean, field_mean_defect(*u), field_mean_defect(*b)});
    c.asymmetry = std::max({c.asymmetry, asymmetry(*ru), asymmetry(*rb)});
    c.trace = std::max({c.trace, trace_defect(*ru), trace_defect(*rb)});
  }
  return c;
}

// ---- one iteration step -------------------------------------------------------------------------

namespace {

template <class F>
auto staged(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const IterationError&) {
    throw;
  } catch (const std::exception& e) {
    throw IterationError(stage, e.what());
  }
}

double calibrated_delta() {
  static const double d = global_delta();
  return d;
}

using SlicePtr = std::shared_ptr<const TorusField>;

TorusField stencil_derivative(int j, int n_t, const std::function<SlicePtr(int)>& at) {
  TimeStencil s = time_stencil(j, n_t);
  TorusField out;
  for (int k = 0; k < 5; ++k) {
    if (s.weight[k] == 0.0) continue;
    SlicePtr f = at(j + s.offset[k]);
    if (out.empty()) out = TorusField(f->grid(), f->rank(), Symmetry::none);
    axpy(s.weight[k], *f, out);
  }
  return out;
}

struct CoeffPair {
  CoefficientSlice mag, vel;
};

struct PertPair {
  PerturbationSlice w, d;
  PerturbationChecks cw, cd;
};

struct SliceStress {
  StressParts parts;
  StressPair total;
};

PerturbationSlice zero_perturbation(const GridSpec& g) {
  PerturbationSlice p;
  p.principal = TorusField(g, Rank::vector3);
  p.corrector = TorusField(g, Rank::vector3);
  p.total = TorusField(g, Rank::vector3);
  return p;
}

struct Pipeline {
  GridSpec g;
  EquationParams eq;
  bool check = true;
  FieldSeries u_l, b_l, R_u_l, R_B_l;
  CommutatorSeries com;
  AmplitudeSpec amp;
  TemporalCutoff theta_b, theta_u;
  BlockSet blocks;
  LazySlices<CoeffPair> coeffs;
  LazySlices<PertPair> perts;
  LazySlices<TorusField> u_new, b_new;
  LazySlices<SliceStress> stresses;

  CoeffPair make_coeffs(int j) const {
    return staged("coefficients", [&] {
      double t = g.t(j);
      CoeffPair c;
      c.mag = coefficient_slice(*R_B_l.at(j), theta_b(t), amp, 2);
      TorusField s = *R_u_l.at(j) - frame_sum(c.mag);
      s.set_symmetry(Symmetry::symmetric);
      c.vel = coefficient_slice(s, theta_u(t), amp, 1);
      return c;
    });
  }

  PertPair make_perts(int j) const {
    return staged("perturbations", [&] {
      auto c = coeffs.at(j);
      PertPair p;
      GridSpec sg = g.spatial();
      p.w = c->vel.theta != 0.0 ? assemble_slice(c->vel, blocks) : zero_perturbation(sg);
      p.d = c->mag.theta != 0.0 ? assemble_slice(c->mag, blocks) : zero_perturbation(sg);
      if (check && c->vel.theta != 0.0) p.cw = check_perturbation(p.w, c->vel, blocks);
      if (check && c->mag.theta != 0.0) p.cd = check_perturbation(p.d, c->mag, blocks);
      p.w.potential = TorusField();
      p.d.potential = TorusField();
      return p;
    });
  }

  SliceStress make_stress(int j) const {
    return staged("error parts", [&] {
      auto c = coeffs.at(j);
      auto p = perts.at(j);
      int n_t = g.n_t;
      TorusField dtw = stencil_derivative(j, n_t, [&](int k) {
        auto pp = perts.at(k);
        return SlicePtr(pp, &pp->w.total);
      });
      TorusField dtd = stencil_derivative(j, n_t, [&](int k) {
        auto pp = perts.at(k);
        return SlicePtr(pp, &pp->d.total);
      });
      SlicePtr ul = u_l.at(j), bl = b_l.at(j);
      SliceStress s;
      LinearInputs in{&p->w, &p->d, &dtw, &dtd, ul.get(), bl.get()};
      s.parts.lin = linear_errors(in, eq);
      s.parts.cor = corrector_errors(p->w, p->d);
      s.parts.osc = oscillation_errors(c->vel, c->mag, p->w.principal, p->d.principal, blocks);
      s.parts.com = commutator_errors(*com.R_u.at(j), *com.R_B1.at(j), *com.R_B2.at(j));
      s.total = assemble_new_stresses(s.parts);
      return s;
    });
  }
};

struct PartProfile {
  std::string name;
  std::vector<double> l1, l2;
};

}  // namespace

IterationResult iterate_once(const IterationState& s, const IterateOptions& opt) {
  const GridSpec g = s.grid();
  const ParamSchedule& sch = s.schedule;
  staged("input", [&] {
    if (!sch.desk) throw std::invalid_argument("paper-mode schedules are not executable on a grid; use desk mode");
    if (g.n_t < 5) throw std::invalid_argument("at least 5 time samples required");
    if (!(sch.l > g.dt())) throw std::invalid_argument("mollification scale l must exceed the time spacing");
    return 0;
  });
  auto pl = std::make_shared<Pipeline>();
  Pipeline& P = *pl;
  P.g = g;
  P.eq = opt.eq;
  P.check = opt.check_identities;
  const double l = sch.l;

  staged("mollification", [&] {
    P.u_l = series_mollify(s.u, l);
    P.b_l = series_mollify(s.b, l);
    P.R_u_l = series_mollify(s.R_u, l, 4);
    P.R_B_l = series_mollify(s.R_B, l, 4);
    P.com = commutator_stresses(s.u, s.b, l);
    return 0;
  });

  // Pass over level q: input invariants, supports and the amplitude scale r0.
  std::vector<double> old_profile(g.n_t), ru_l(g.n_t), rb_l(g.n_t);
  staged("supports", [&] {
    const NormKind L1 = NormKind::Lp(1.0);
    for (int j = 0; j < g.n_t; ++j) {
      auto u = s.u.at(j), b = s.b.at(j);
      if (field_divergence(*u) > 1e-10 || field_divergence(*b) > 1e-10)
        throw std::invalid_argument("level-q fields not divergence-free at t = " + fmt(g.t(j)));
      old_profile[j] = norm_slice(*u, 0, L1) + norm_slice(*b, 0, L1) + norm_slice(*s.R_u.at(j), 0, L1) +
                       norm_slice(*s.R_B.at(j), 0, L1);
      ru_l[j] = norm_slice(*P.R_u_l.at(j), 0, L1);
      rb_l[j] = norm_slice(*P.R_B_l.at(j), 0, L1);
    }
    return 0;
  });
  IterationResult res;
  IterationChecks& ck = res.checks;
  for (int j = 0; j < g.n_t; ++j) ck.r0 = std::max(ck.r0, ru_l[j] + rb_l[j]);
  ck.delta = opt.delta > 0.0 ? opt.delta : calibrated_delta();
  P.amp = AmplitudeSpec{ck.r0, ck.delta};

  staged("cutoffs", [&] {
    P.theta_b = temporal_cutoff(support_intervals(rb_l, g), l, g.dt());
    std::vector<double> gb(g.n_t, 0.0);
    for (int j = 0; j < g.n_t; ++j) {
      double th = P.theta_b(g.t(j));
      if (th == 0.0) continue;
      CoefficientSlice mag = staged("coefficients", [&] { return coefficient_slice(*P.R_B_l.at(j), th, P.amp, 2); });
      gb[j] = norm_slice(frame_sum(mag), 0, NormKind::Lp(1.0));
    }
    P.theta_u = temporal_cutoff(merge_intervals(support_intervals(ru_l, g), support_intervals(gb, g)), l, g.dt());
    return 0;
  });
  ck.theta_b_support = P.theta_b.support();
  ck.theta_u_support = P.theta_u.support();

  staged("blocks", [&] {
    P.blocks = build_blocks(sch.mu, sch.sigma, sch.mode, g.n_x);
    return 0;
  });

  Pipeline* raw = pl.get();
  P.coeffs = LazySlices<CoeffPair>(g.n_t, [raw](int j) { return raw->make_coeffs(j); }, 6);
  P.perts = LazySlices<PertPair>(g.n_t, [raw](int j) { return raw->make_perts(j); }, 6);
  P.u_new = LazySlices<TorusField>(g.n_t, [raw](int j) { return *raw->u_l.at(j) + raw->perts.at(j)->w.total; }, 6);
  P.b_new = LazySlices<TorusField>(g.n_t, [raw](int j) { return *raw->b_l.at(j) + raw->perts.at(j)->d.total; }, 6);
  P.stresses = LazySlices<SliceStress>(g.n_t, [raw](int j) { return raw->make_stress(j); }, 1);

  // Sequential sweep over time slices.
  std::vector<PartProfile> parts = {{"lin_u", {}, {}},     {"lin_B", {}, {}},     {"cor_u", {}, {}},
                                    {"cor_B", {}, {}},     {"osc_x_u", {}, {}},   {"osc_far_u", {}, {}},
                                    {"osc_x_B", {}, {}},   {"osc_far_B", {}, {}}, {"com_u", {}, {}},
                                    {"com_B", {}, {}},     {"total_u", {}, {}},   {"total_B", {}, {}}};
  for (auto& p : parts) {
    p.l1.assign(g.n_t, 0.0);
    p.l2.assign(g.n_t, 0.0);
  }
  std::vector<double> new_profile(g.n_t, 0.0);
  double pert_l2 = 0.0;
  ResidualAccumulator acc(g, opt.eq);
  std::vector<SlicePtr> kept_u, kept_b, kept_ru, kept_rb;
  if (opt.keep_fields) {
    kept_u.resize(g.n_t);
    kept_b.resize(g.n_t);
  }
  if (opt.keep_stresses) {
    kept_ru.resize(g.n_t);
    kept_rb.resize(g.n_t);
  }
  const NormKind L1 = NormKind::Lp(1.0), L2 = NormKind::Lp(2.0);
  for (int j = 0; j < g.n_t; ++j) {
    auto st = P.stresses.at(j);
    auto c = P.coeffs.at(j);
    auto p = P.perts.at(j);
    const StressParts& sp = st->parts;
    const TorusField* fields[12] = {&sp.lin.u,     &sp.lin.B,       &sp.cor.u,     &sp.cor.B,
                                    &sp.osc.x_u,   &sp.osc.far_u,   &sp.osc.x_B,   &sp.osc.far_B,
                                    &sp.com.u,     &sp.com.B,       &st->total.R_u, &st->total.R_B};
    for (int k = 0; k < 12; ++k) {
      parts[k].l1[j] = norm_slice(*fields[k], 0, L1);
      parts[k].l2[j] = norm_slice(*fields[k], 0, L2);
    }
    staged("identities", [&] {
      if (!opt.check_identities) return 0;
      if (c->mag.theta != 0.0) {
        SlicePtr rb = P.R_B_l.at(j);
        ck.reconstruction_magnetic = std::max(ck.reconstruction_magnetic, reconstruction_defect(c->mag, *rb));
        ck.expansion_magnetic =
            std::max(ck.expansion_magnetic, magnetic_expansion_defect(p->d.principal, *rb, c->mag, P.blocks));
      }
      if (c->vel.theta != 0.0) {
        SlicePtr ru = P.R_u_l.at(j);
        TorusField src = *ru - frame_sum(c->mag);
        ck.reconstruction_velocity = std::max(ck.reconstruction_velocity, reconstruction_defect(c->vel, src));
        ck.expansion_velocity = std::max(ck.expansion_velocity, velocity_expansion_defect(p->w.principal, p->d.principal,
                                                                                          *ru, c->vel, c->mag, P.blocks));
      }
      for (const PerturbationChecks* pc : {&p->cw, &p->cd}) {
        ck.potential_defect = std::max(ck.potential_defect, pc->potential_defect);
        ck.perturbation_divergence = std::max(ck.perturbation_divergence, pc->divergence);
        ck.aliasing_defect = std::max(ck.aliasing_defect, pc->aliasing_defect);
        ck.corrector_ratio = std::max(ck.corrector_ratio, pc->corrector_ratio);
      }
      ck.idempotence = std::max(ck.idempotence, idempotence_defect(st->total.R_u));
      return 0;
    });
    ck.stress_asymmetry = std::max({ck.stress_asymmetry, asymmetry(st->total.R_u), asymmetry(st->total.R_B)});
    ck.stress_trace = std::max({ck.stress_trace, trace_defect(st->total.R_u), trace_defect(st->total.R_B)});
    pert_l2 = std::max(pert_l2, norm_slice(p->w.total, 0, L2) + norm_slice(p->d.total, 0, L2));

    staged("residual", [&] {
      auto un = P.u_new.at(j), bn = P.b_new.at(j);
      ck.field_divergence = std::max({ck.field_divergence, field_divergence(*un), field_divergence(*bn)});
      ck.field_mean = std::max({ck.field_mean, field_mean_defect(*un), field_mean_defect(*bn)});
      TorusField dtu = stencil_derivative(j, g.n_t, [&](int k) { return P.u_new.at(k); });
      TorusField dtb = stencil_derivative(j, g.n_t, [&](int k) { return P.b_new.at(k); });
      acc.add(j, *un, *bn, dtu, dtb, st->total.R_u, st->total.R_B);
      new_profile[j] = norm_slice(*un, 0, L1) + norm_slice(*bn, 0, L1) + parts[10].l1[j] + parts[11].l1[j];
      if (opt.keep_fields) {
        kept_u[j] = un;
        kept_b[j] = bn;
      }
      return 0;
    });
    if (opt.keep_stresses) {
      kept_ru[j] = SlicePtr(st, &st->total.R_u);
      kept_rb[j] = SlicePtr(st, &st->total.R_B);
    }
  }

  ck.residual = acc.report();
  for (const auto& t : ck.residual.terms) {
    if (t.term != "stress") continue;
    double v = t.equation == "velocity" ? ck.residual.velocity_l2 : ck.residual.magnetic_l2;
    double r = t.l2 > 0.0 ? v / t.l2 : v;
    (t.equation == "velocity" ? ck.ledger_defect_u : ck.ledger_defect_B) = r;
  }
  std::vector<bool> old_nodes = support_nodes(old_profile), new_nodes = support_nodes(new_profile);
  ck.old_support = support_intervals(old_nodes, g);
  ck.new_support = support_intervals(new_nodes, g);
  ck.collar = collar_width(new_nodes, ck.old_support, g);
  ck.collar_bound = 3.0 * l;
  ck.support_inclusion = ck.collar <= ck.collar_bound + 1e-12;

  // Ledger.
  char params[256];
  std::snprintf(params, sizeof params, "q=%d;mu=%.17g;sigma=%d;l=%.17g;n_x=%d;n_t=%d;mode=%s", s.q, sch.mu, sch.sigma,
                l, g.n_x, g.n_t, to_string(sch.mode).c_str());
  for (const auto& p : parts) {
    std::string formula = part_bound_formula(p.name);
    res.ledger.push_back({p.name, "L1_x sup_t", reduce_in_time(p.l1, g, TimeReduce::sup), formula, params});
    res.ledger.push_back({p.name, "L1_t L1_x", reduce_in_time(p.l1, g, TimeReduce::l1), formula, params});
    res.ledger.push_back({p.name, "L2_x sup_t", reduce_in_time(p.l2, g, TimeReduce::sup), formula, params});
  }

  // New state.
  IterationState& ns = res.state;
  ns.q = s.q + 1;
  ns.schedule = sch;
  ns.schedule.q = sch.q + 1;
  ns.log = s.log;
  ns.log.emplace_back("l", l);
  ns.log.emplace_back("r0", ck.r0);
  ns.log.emplace_back("delta", ck.delta);
  ns.log.emplace_back("perturbation_l2_sup", pert_l2);
  ns.log.emplace_back("mollified_stress_l1_sup", ck.r0);
  for (const auto& row : res.ledger)
    if (row.norm_kind == "L1_x sup_t") ns.log.emplace_back(row.part + "_l1_sup", row.value);
  auto stored = [g](std::vector<SlicePtr> v, Rank r, Symmetry sym) {
    auto data = std::make_shared<std::vector<SlicePtr>>(std::move(v));
    return FieldSeries(g, r, sym, [data](int j) { return *(*data)[j]; }, 1);
  };
  const Symmetry stl = Symmetry::symmetric_traceless;
  if (opt.keep_fields) {
    ns.u = stored(std::move(kept_u), Rank::vector3, Symmetry::none);
    ns.b = stored(std::move(kept_b), Rank::vector3, Symmetry::none);
  } else {
    ns.u = FieldSeries(g, Rank::vector3, Symmetry::none, [pl](int j) { return *pl->u_new.at(j); });
    ns.b = FieldSeries(g, Rank::vector3, Symmetry::none, [pl](int j) { return *pl->b_new.at(j); });
  }
  if (opt.keep_stresses) {
    ns.R_u = stored(std::move(kept_ru), Rank::tensor3x3, stl);
    ns.R_B = stored(std::move(kept_rb), Rank::tensor3x3, stl);
  } else {
    ns.R_u = FieldSeries(g, Rank::tensor3x3, stl, [pl](int j) { return pl->stresses.at(j)->total.R_u; }, 2);
    ns.R_B = FieldSeries(g, Rank::tensor3x3, stl, [pl](int j) { return pl->stresses.at(j)->total.R_B; }, 2);
  }
  return res;
}

// ---- inductive report -----------------------------------------------------------------------

double series_c1_tx(const FieldSeries& f) {
  double worst = 0.0;
  FieldSeries dt = series_time_derivative(f);
  for (int j = 0; j < f.n_t(); ++j) {
    worst = std::max(worst, norm_slice(*f.at(j), 0, NormKind::CN(1)));
    if (f.n_t() >= 5) worst = std::max(worst, norm_slice(*dt.at(j), 0, NormKind::C0()));
  }
  return worst;
}

InductiveReport inductive_report(const IterationState& old_state, const IterationState& new_state, double M) {
  const GridSpec g = old_state.grid();
  if (!(new_state.grid() == g)) throw std::invalid_argument("inductive_report: grid mismatch");
  const ParamSchedule& sch = old_state.schedule;
  InductiveReport r;
  r.paper_mode = !sch.desk;
  r.verdict = r.paper_mode ? "paper parameters: infeasible at scale, ratios reported without pass/fail"
                           : "desk mode: ratios reported";
  const NormKind L1 = NormKind::Lp(1.0), L2 = NormKind::Lp(2.0);
  std::vector<double> old_p(g.n_t), new_p(g.n_t);
  double inc_l2 = 0.0, inc_l1 = 0.0, stress_l1 = 0.0;
  for (int j = 0; j < g.n_t; ++j) {
    auto u0 = old_state.u.at(j), b0 = old_state.b.at(j), u1 = new_state.u.at(j), b1 = new_state.b.at(j);
    double r1u = norm_slice(*new_state.R_u.at(j), 0, L1), r1b = norm_slice(*new_state.R_B.at(j), 0, L1);
    old_p[j] = norm_slice(*u0, 0, L1) + norm_slice(*b0, 0, L1) + norm_slice(*old_state.R_u.at(j), 0, L1) +
               norm_slice(*old_state.R_B.at(j), 0, L1);
    new_p[j] = norm_slice(*u1, 0, L1) + norm_slice(*b1, 0, L1) + r1u + r1b;
    TorusField du = *u1 - *u0, db = *b1 - *b0;
    inc_l2 = std::max(inc_l2, norm_slice(du, 0, L2) + norm_slice(db, 0, L2));
    inc_l1 = std::max(inc_l1, norm_slice(du, 0, L1) + norm_slice(db, 0, L1));
    stress_l1 = std::max(stress_l1, r1u + r1b);
  }
  std::vector<bool> old_nodes = support_nodes(old_p), new_nodes = support_nodes(new_p);
  r.old_support = support_intervals(old_nodes, g);
  r.new_support = support_intervals(new_nodes, g);
  r.collar = collar_width(new_nodes, r.old_support, g);
  double lam1 = sch.lambda_q1.value();
  double d1 = sch.delta_q1(), d2 = sch.delta_q2();
  r.entries.push_back({"fields_C1", series_c1_tx(new_state.u) + series_c1_tx(new_state.b), std::pow(lam1, 4.0)});
  r.entries.push_back({"stresses_C1", series_c1_tx(new_state.R_u) + series_c1_tx(new_state.R_B), std::pow(lam1, 8.0)});
  r.entries.push_back({"stresses_L1", stress_l1, d2});
  r.entries.push_back({"increment_L2", inc_l2, M * std::sqrt(d1)});
  r.entries.push_back({"increment_L1", inc_l1, std::sqrt(d2)});
  r.entries.push_back({"support_collar", r.collar, std::sqrt(d2)});
  r.support_within_delta = r.collar <= std::sqrt(d2) + 1e-12;
  double l = new_state.logged("l").value_or(sch.l);
  r.support_within_3l = r.collar <= 3.0 * l + 1e-12;
  auto w = new_state.logged("perturbation_l2_sup");
  auto rl = new_state.logged("mollified_stress_l1_sup");
  r.empirical_M = (w && rl && *rl > 0.0) ? *w / std::sqrt(*rl) : std::numeric_limits<double>::quiet_NaN();
  return r;
}

}  // namespace hallci

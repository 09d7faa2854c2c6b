#include "hallci/spectral_calculus.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hallci/parallel.hpp"
#include "hallci/time_grid.hpp"

namespace hallci {

Spectrum::Spectrum(int n, int ncomp)
    : n_(n), ncomp_(ncomp), plane_(static_cast<std::size_t>(n) * (n / 2 + 1)),
      data_(plane_ * ncomp, cplx(0.0, 0.0)) {}

Spectrum& Spectrum::operator+=(const Spectrum& o) {
  if (o.n_ != n_ || o.ncomp_ != ncomp_) throw std::invalid_argument("Spectrum: shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

Spectrum& Spectrum::operator-=(const Spectrum& o) {
  if (o.n_ != n_ || o.ncomp_ != ncomp_) throw std::invalid_argument("Spectrum: shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

Spectrum& Spectrum::operator*=(double s) {
  for (auto& v : data_) v *= s;
  return *this;
}

namespace {

// Calls fn(idx, κ1, κ2) for every stored coefficient.
template <class Fn>
void for_modes(int n, Fn fn) {
  const Fft2& fft = Fft2::get(n);
  int nh = fft.nh();
  for (int k2 = 0; k2 < n; ++k2) {
    double q2 = fft.kappa(k2);
    for (int k1 = 0; k1 < nh; ++k1) fn(static_cast<std::size_t>(k2) * nh + k1, fft.kappa(k1), q2);
  }
}

const cplx I(0.0, 1.0);

void require_ncomp(const Spectrum& s, int nc, const char* what) {
  if (s.ncomp() != nc) throw std::invalid_argument(std::string(what) + ": rank mismatch");
}

}  // namespace

Spectrum to_spectrum(const TorusField& f, int j) {
  const Fft2& fft = Fft2::get(f.grid().n_x);
  Spectrum s(f.grid().n_x, f.ncomp());
  if (f.rank() == Rank::tensor3x3 && f.symmetry() != Symmetry::none) {
    bool skew = f.symmetry() == Symmetry::skew;
    for (int a = 0; a < 3; ++a)
      for (int b = a; b < 3; ++b) {
        if (skew && a == b) continue;
        fft.forward(f.plane(j, tc(a, b)), s.comp(tc(a, b)));
        const cplx* src = s.comp(tc(a, b));
        cplx* dst = s.comp(tc(b, a));
        if (a != b)
          for (std::size_t i = 0; i < s.plane_size(); ++i) dst[i] = skew ? -src[i] : src[i];
      }
    return s;
  }
  for (int c = 0; c < f.ncomp(); ++c) fft.forward(f.plane(j, c), s.comp(c));
  return s;
}

TorusField to_field(const Spectrum& s, Rank rank, Symmetry sym) {
  require_ncomp(s, components(rank), "to_field");
  const Fft2& fft = Fft2::get(s.n());
  TorusField f(GridSpec{s.n(), 1}, rank, sym);
  std::size_t np = f.grid().plane();
  if (rank == Rank::tensor3x3 && sym != Symmetry::none) {
    bool skew = sym == Symmetry::skew;
    for (int a = 0; a < 3; ++a)
      for (int b = a; b < 3; ++b) {
        if (skew && a == b) continue;
        fft.inverse(s.comp(tc(a, b)), f.plane(0, tc(a, b)));
        if (a == b) continue;
        const double* src = f.plane(0, tc(a, b));
        double* dst = f.plane(0, tc(b, a));
        for (std::size_t i = 0; i < np; ++i) dst[i] = skew ? -src[i] : src[i];
      }
    return f;
  }
  for (int c = 0; c < f.ncomp(); ++c) fft.inverse(s.comp(c), f.plane(0, c));
  return f;
}

// ---- multipliers ------------------------------------------------------------

MultiplierSymbol MultiplierSymbol::fractional_laplacian(double alpha) {
  if (alpha < 0.0) throw std::invalid_argument("fractional Laplacian requires alpha >= 0");
  return {Kind::fractional_laplacian, alpha};
}
MultiplierSymbol MultiplierSymbol::inverse_laplacian() { return {Kind::inverse_laplacian, 0.0}; }
MultiplierSymbol MultiplierSymbol::zero_mean_projection() { return {Kind::zero_mean_projection, 0.0}; }
MultiplierSymbol MultiplierSymbol::smoothed_inverse_gradient() { return {Kind::smoothed_inverse_gradient, 0.0}; }

double MultiplierSymbol::operator()(double kk) const {
  switch (kind) {
    case Kind::fractional_laplacian:
      if (alpha == 0.0) return 1.0;
      return kk > 0.0 ? std::pow(kk, alpha) : 0.0;
    case Kind::inverse_laplacian: return kk > 0.0 ? 1.0 / kk : 0.0;
    case Kind::zero_mean_projection: return kk > 0.0 ? 1.0 : 0.0;
    case Kind::smoothed_inverse_gradient: return kk > 0.0 ? 1.0 / std::sqrt(kk) : 0.0;
  }
  return 0.0;
}

namespace spec {

Spectrum gradient(const Spectrum& s) {
  require_ncomp(s, 1, "gradient");
  Spectrum out(s.n(), 3);
  const cplx* f = s.comp(0);
  cplx* g1 = out.comp(0);
  cplx* g2 = out.comp(1);
  for_modes(s.n(), [&](std::size_t i, double q1, double q2) {
    g1[i] = I * q1 * f[i];
    g2[i] = I * q2 * f[i];
  });
  return out;
}

Spectrum divergence(const Spectrum& v) {
  require_ncomp(v, 3, "divergence");
  Spectrum out(v.n(), 1);
  const cplx* a = v.comp(0);
  const cplx* b = v.comp(1);
  cplx* d = out.comp(0);
  for_modes(v.n(), [&](std::size_t i, double q1, double q2) { d[i] = I * (q1 * a[i] + q2 * b[i]); });
  return out;
}

Spectrum curl(const Spectrum& v) {
  require_ncomp(v, 3, "curl");
  Spectrum out(v.n(), 3);
  const cplx* a = v.comp(0);
  const cplx* b = v.comp(1);
  const cplx* c = v.comp(2);
  cplx* o1 = out.comp(0);
  cplx* o2 = out.comp(1);
  cplx* o3 = out.comp(2);
  for_modes(v.n(), [&](std::size_t i, double q1, double q2) {
    o1[i] = I * q2 * c[i];
    o2[i] = -I * q1 * c[i];
    o3[i] = I * (q1 * b[i] - q2 * a[i]);
  });
  return out;
}

Spectrum tensor_divergence(const Spectrum& m) {
  require_ncomp(m, 9, "tensor_divergence");
  Spectrum out(m.n(), 3);
  for (int k = 0; k < 3; ++k) {
    const cplx* r1 = m.comp(tc(k, 0));
    const cplx* r2 = m.comp(tc(k, 1));
    cplx* o = out.comp(k);
    for_modes(m.n(), [&](std::size_t i, double q1, double q2) { o[i] = I * (q1 * r1[i] + q2 * r2[i]); });
  }
  return out;
}

Spectrum helmholtz(const Spectrum& v) {
  require_ncomp(v, 3, "helmholtz");
  Spectrum out = v;
  cplx* a = out.comp(0);
  cplx* b = out.comp(1);
  for_modes(v.n(), [&](std::size_t i, double q1, double q2) {
    double kk = q1 * q1 + q2 * q2;
    if (kk == 0.0) return;
    cplx p = (q1 * a[i] + q2 * b[i]) / kk;
    a[i] -= q1 * p;
    b[i] -= q2 * p;
  });
  return out;
}

Spectrum inverse_divergence(const Spectrum& v) {
  require_ncomp(v, 3, "inverse_divergence");
  Spectrum out(v.n(), 9);
  const cplx* u[3] = {v.comp(0), v.comp(1), v.comp(2)};
  for_modes(v.n(), [&](std::size_t i, double q1, double q2) {
    double kk = q1 * q1 + q2 * q2;
    if (kk == 0.0) return;
    double q[3] = {q1, q2, 0.0};
    cplx d = I * (q1 * u[0][i] + q2 * u[1][i]);
    for (int k = 0; k < 3; ++k)
      for (int l = 0; l < 3; ++l) {
        cplx val = -I * (q[k] * u[l][i] + q[l] * u[k][i]) / kk;
        val += 0.5 * ((k == l ? 1.0 : 0.0) + q[k] * q[l] / kk) * d / kk;
        out.comp(tc(k, l))[i] = val;
      }
  });
  return out;
}

Spectrum inverse_curl(const Spectrum& v) {
  Spectrum c = curl(v);
  return multiplier(c, MultiplierSymbol::inverse_laplacian());
}

Spectrum multiplier(const Spectrum& s, const MultiplierSymbol& m) {
  Spectrum out = s;
  std::vector<double> w(s.plane_size());
  for_modes(s.n(), [&](std::size_t i, double q1, double q2) { w[i] = m(q1 * q1 + q2 * q2); });
  for (int c = 0; c < s.ncomp(); ++c) {
    cplx* p = out.comp(c);
    for (std::size_t i = 0; i < s.plane_size(); ++i) p[i] *= w[i];
  }
  return out;
}

double relative_divergence(const Spectrum& v) {
  require_ncomp(v, 3, "relative_divergence");
  int n = v.n();
  int nh = n / 2 + 1;
  std::vector<double> num(v.plane_size()), den(v.plane_size());
  const cplx* a = v.comp(0);
  const cplx* b = v.comp(1);
  const cplx* c = v.comp(2);
  for_modes(n, [&](std::size_t i, double q1, double q2) {
    int k1 = static_cast<int>(i % nh);
    double w = (k1 == 0 || 2 * k1 == n) ? 1.0 : 2.0;
    double kk = q1 * q1 + q2 * q2;
    num[i] = w * std::norm(q1 * a[i] + q2 * b[i]);
    den[i] = w * kk * (std::norm(a[i]) + std::norm(b[i]) + std::norm(c[i]));
  });
  double d = pairwise_sum(den.data(), den.size());
  if (d == 0.0) return 0.0;
  return std::sqrt(pairwise_sum(num.data(), num.size()) / d);
}

}  // namespace spec

// ---- field-level operators -------------------------------------------------------------

TorusField map_slices(const TorusField& f, Rank out_rank, Symmetry out_sym,
                      const std::function<TorusField(const TorusField&)>& op) {
  TorusField out(f.grid(), out_rank, out_sym);
  parallel_for(f.grid().n_t, [&](int j) {
    TorusField s = op(f.slice(j));
    out.assign_slice(j, s);
  });
  return out;
}

TorusField differential(const TorusField& f, DiffOp op) {
  switch (op) {
    case DiffOp::gradient:
      if (f.rank() != Rank::scalar) throw std::invalid_argument("gradient: rank mismatch (scalar expected)");
      return map_slices(f, Rank::vector3, Symmetry::none,
                        [](const TorusField& s) { return to_field(spec::gradient(to_spectrum(s)), Rank::vector3); });
    case DiffOp::divergence:
      if (f.rank() != Rank::vector3) throw std::invalid_argument("divergence: rank mismatch (vector expected)");
      return map_slices(f, Rank::scalar, Symmetry::none,
                        [](const TorusField& s) { return to_field(spec::divergence(to_spectrum(s)), Rank::scalar); });
    case DiffOp::curl:
      if (f.rank() != Rank::vector3) throw std::invalid_argument("curl: rank mismatch (vector expected)");
      return map_slices(f, Rank::vector3, Symmetry::none,
                        [](const TorusField& s) { return to_field(spec::curl(to_spectrum(s)), Rank::vector3); });
    case DiffOp::tensor_divergence:
      if (f.rank() != Rank::tensor3x3) throw std::invalid_argument("tensor_divergence: rank mismatch (tensor expected)");
      return map_slices(f, Rank::vector3, Symmetry::none, [](const TorusField& s) {
        return to_field(spec::tensor_divergence(to_spectrum(s)), Rank::vector3);
      });
    case DiffOp::curl_of_tensor_divergence:
      if (f.rank() != Rank::tensor3x3)
        throw std::invalid_argument("curl_of_tensor_divergence: rank mismatch (tensor expected)");
      return map_slices(f, Rank::vector3, Symmetry::none, [](const TorusField& s) {
        return to_field(spec::curl(spec::tensor_divergence(to_spectrum(s))), Rank::vector3);
      });
  }
  throw std::invalid_argument("differential: unknown operator");
}

TorusField apply_multiplier(const TorusField& f, const MultiplierSymbol& m) {
  if (m.kind == MultiplierSymbol::Kind::fractional_laplacian && m.alpha < 0.0)
    throw std::invalid_argument("fractional Laplacian requires alpha >= 0");
  Rank r = f.rank();
  Symmetry sym = f.symmetry();
  return map_slices(f, r, sym, [&](const TorusField& s) { return to_field(spec::multiplier(to_spectrum(s), m), r, sym); });
}

TorusField helmholtz_project(const TorusField& v) {
  if (v.rank() != Rank::vector3) throw std::invalid_argument("helmholtz_project: rank mismatch (vector expected)");
  return map_slices(v, Rank::vector3, Symmetry::none,
                    [](const TorusField& s) { return to_field(spec::helmholtz(to_spectrum(s)), Rank::vector3); });
}

TorusField inverse_divergence(const TorusField& v) {
  if (v.rank() != Rank::vector3) throw std::invalid_argument("inverse_divergence: rank mismatch (vector expected)");
  return map_slices(v, Rank::tensor3x3, Symmetry::symmetric_traceless, [](const TorusField& s) {
    return to_field(spec::inverse_divergence(to_spectrum(s)), Rank::tensor3x3, Symmetry::symmetric_traceless);
  });
}

TorusField inverse_curl(const TorusField& f) {
  if (f.rank() != Rank::vector3) throw std::invalid_argument("inverse_curl: rank mismatch (vector expected)");
  return map_slices(f, Rank::vector3, Symmetry::none, [](const TorusField& s) {
    Spectrum sp = to_spectrum(s);
    double rel = spec::relative_divergence(sp);
    if (rel > kInverseCurlDivTol)
      throw std::domain_error("inverse_curl: input not divergence-free (relative divergence " + std::to_string(rel) + ")");
    return to_field(spec::inverse_curl(sp), Rank::vector3);
  });
}

TorusField zero_mean(const TorusField& f) { return apply_multiplier(f, MultiplierSymbol::zero_mean_projection()); }

// ---- mollification ----------------------------------------------------------------------

double bump(double r) {
  double a = std::abs(r);
  if (a >= 1.0) return 0.0;
  return std::exp(-1.0 / (1.0 - a * a));
}

std::vector<double> time_kernel(double l, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("time mollification needs a time axis");
  if (!(l > dt)) throw std::invalid_argument("mollifier under-resolved: l must exceed the time spacing");
  int m = static_cast<int>(std::ceil(l / dt));
  std::vector<double> w(2 * m + 1);
  for (int i = -m; i <= m; ++i) w[i + m] = bump(i * dt / l);
  double s = pairwise_sum(w.data(), w.size());
  for (double& v : w) v /= s;
  return w;
}

namespace {

// Fourier transform of the periodic radial bump, normalized to unit discrete mass.
std::vector<cplx> space_kernel_spectrum(int n, double l) {
  double h = 2.0 * M_PI / n;
  if (!(l > h)) throw std::invalid_argument("mollifier under-resolved: l must exceed the grid spacing");
  std::vector<double> k(static_cast<std::size_t>(n) * n);
  for (int i2 = 0; i2 < n; ++i2) {
    int d2 = std::min(i2, n - i2);
    for (int i1 = 0; i1 < n; ++i1) {
      int d1 = std::min(i1, n - i1);
      double r = h * std::sqrt(static_cast<double>(d1) * d1 + static_cast<double>(d2) * d2);
      k[static_cast<std::size_t>(i2) * n + i1] = bump(r / l);
    }
  }
  double mass = pairwise_sum(k.data(), k.size());
  for (double& v : k) v /= mass;
  const Fft2& fft = Fft2::get(n);
  std::vector<cplx> s(fft.spectral_size());
  fft.forward(k.data(), s.data());
  return s;
}

TorusField mollify_space_with(const TorusField& slice, const std::vector<cplx>& ks) {
  Spectrum s = to_spectrum(slice);
  for (int c = 0; c < s.ncomp(); ++c) {
    cplx* p = s.comp(c);
    for (std::size_t i = 0; i < s.plane_size(); ++i) p[i] *= ks[i];
  }
  return to_field(s, slice.rank(), slice.symmetry());
}

}  // namespace

TorusField mollify_space_slice(const TorusField& slice, double l) {
  return mollify_space_with(slice, space_kernel_spectrum(slice.grid().n_x, l));
}

TorusField mollify(const TorusField& f, const MollifierSpec& spec) {
  TorusField out = f;
  if (spec.axes != MollifyAxes::time) {
    auto ks = space_kernel_spectrum(f.grid().n_x, spec.l);
    out = map_slices(out, f.rank(), f.symmetry(), [&](const TorusField& s) { return mollify_space_with(s, ks); });
  }
  if (spec.axes != MollifyAxes::space) {
    const GridSpec& g = f.grid();
    if (g.n_t < 2) throw std::invalid_argument("time mollification needs a time axis");
    std::vector<double> w = time_kernel(spec.l, g.dt());
    int m = static_cast<int>(w.size() / 2);
    TorusField src = out;
    std::size_t np = g.plane();
    parallel_for(g.n_t, [&](int j) {
      for (int c = 0; c < f.ncomp(); ++c) {
        double* o = out.plane(j, c);
        std::fill(o, o + np, 0.0);
        for (int i = -m; i <= m; ++i) {
          int jj = std::clamp(j - i, 0, g.n_t - 1);
          const double* v = src.plane(jj, c);
          double wi = w[i + m];
          for (std::size_t p = 0; p < np; ++p) o[p] += wi * v[p];
        }
      }
    });
  }
  return out;
}

// ---- streaming ---------------------------------------------------------------------------

FieldSeries series_map(const FieldSeries& in, Rank out_rank, Symmetry out_sym,
                       std::function<TorusField(const TorusField&)> op) {
  return FieldSeries(in.grid(), out_rank, out_sym, [in, op](int j) { return op(*in.at(j)); });
}

FieldSeries series_mollify(const FieldSeries& in, double l, std::size_t cache_slices) {
  const GridSpec g = in.grid();
  auto ks = std::make_shared<std::vector<cplx>>(space_kernel_spectrum(g.n_x, l));
  if (g.n_t < 2)
    return FieldSeries(g, in.rank(), in.symmetry(), [in, ks](int j) { return mollify_space_with(*in.at(j), *ks); },
                       cache_slices);
  auto w = std::make_shared<std::vector<double>>(time_kernel(l, g.dt()));
  FieldSeries spatial(g, in.rank(), in.symmetry(),
                      [in, ks](int j) { return mollify_space_with(*in.at(j), *ks); }, w->size() + 1);
  return FieldSeries(g, in.rank(), in.symmetry(), [spatial, w, g](int j) {
    int m = static_cast<int>(w->size() / 2);
    TorusField out(g.spatial(), spatial.rank(), spatial.symmetry());
    for (int i = -m; i <= m; ++i) axpy((*w)[i + m], *spatial.at(j - i), out);
    return out;
  }, cache_slices);
}

FieldSeries series_time_derivative(const FieldSeries& in) {
  const GridSpec g = in.grid();
  return FieldSeries(g, in.rank(), in.symmetry(), [in, g](int j) {
    TimeStencil s = time_stencil(j, g.n_t);
    TorusField out(g.spatial(), in.rank(), in.symmetry());
    for (int k = 0; k < 5; ++k)
      if (s.weight[k] != 0.0) axpy(s.weight[k], *in.at(j + s.offset[k]), out);
    return out;
  });
}

}  // namespace hallci

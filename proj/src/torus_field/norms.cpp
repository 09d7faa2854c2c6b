#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "hallci/fft.hpp"
#include "hallci/parallel.hpp"
#include "hallci/time_grid.hpp"
#include "hallci/torus_field.hpp"

namespace hallci {

NormKind NormKind::Lp(double p, int refine) {
  if (p < 1.0) throw std::invalid_argument("L^p norm requires p >= 1");
  if (refine < 1) throw std::invalid_argument("refinement factor must be >= 1");
  NormKind k;
  k.kind = Kind::Lp;
  k.p = p;
  k.refine = refine;
  return k;
}

NormKind NormKind::C0() {
  NormKind k;
  k.kind = Kind::C0;
  return k;
}

NormKind NormKind::CN(int n) {
  if (n < 0 || n > 4) throw std::invalid_argument("C^N norm requires 0 <= N <= 4");
  NormKind k;
  k.kind = Kind::CN;
  k.order = n;
  return k;
}

NormKind NormKind::Hs(double s) {
  NormKind k;
  k.kind = Kind::Hs;
  k.s = s;
  return k;
}

NormKind NormKind::Wsp(double s, double p) {
  if (p < 1.0) throw std::invalid_argument("W^{s,p} norm requires p >= 1");
  NormKind k;
  k.kind = Kind::Wsp;
  k.s = s;
  k.p = p;
  return k;
}

std::string NormKind::label() const {
  auto num = [](double v) {
    if (std::isinf(v)) return std::string("inf");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return std::string(buf);
  };
  switch (kind) {
    case Kind::Lp: return "L" + num(p);
    case Kind::C0: return "C0";
    case Kind::CN: return "C" + std::to_string(order);
    case Kind::Hs: return "H" + num(s);
    case Kind::Wsp: return "W" + num(s) + "," + num(p);
  }
  return "?";
}

namespace {

double lp_planes(const std::vector<const double*>& planes, std::size_t np, double p, double cell) {
  if (std::isinf(p)) {
    double m = 0.0;
    for (const double* v : planes)
      for (std::size_t i = 0; i < np; ++i) m = std::max(m, std::abs(v[i]));
    return m;
  }
  std::vector<double> buf(np);
  double total = 0.0;
  for (const double* v : planes) {
    if (p == 1.0)
      for (std::size_t i = 0; i < np; ++i) buf[i] = std::abs(v[i]);
    else if (p == 2.0)
      for (std::size_t i = 0; i < np; ++i) buf[i] = v[i] * v[i];
    else
      for (std::size_t i = 0; i < np; ++i) buf[i] = std::pow(std::abs(v[i]), p);
    total += pairwise_sum(buf.data(), np);
  }
  total *= cell;
  return p == 1.0 ? total : std::pow(total, 1.0 / p);
}

// Applies a real spectral multiplier (given as a function of (κ1, κ2)) to one plane.
template <class Symbol>
std::vector<double> apply_symbol(const double* v, int n, Symbol sym) {
  const Fft2& fft = Fft2::get(n);
  std::vector<cplx> spec(fft.spectral_size());
  fft.forward(v, spec.data());
  int nh = fft.nh();
  for (int k2 = 0; k2 < n; ++k2)
    for (int k1 = 0; k1 < nh; ++k1) spec[static_cast<std::size_t>(k2) * nh + k1] *= sym(fft.kappa(k1), fft.kappa(k2));
  std::vector<double> out(static_cast<std::size_t>(n) * n);
  fft.inverse(spec.data(), out.data());
  return out;
}

cplx ipow(double kappa, int m) {
  cplx r(1.0, 0.0);
  for (int i = 0; i < m; ++i) r *= cplx(0.0, kappa);
  return r;
}

}  // namespace

double norm_slice(const TorusField& f, int j, const NormKind& kind) {
  const GridSpec& g = f.grid();
  int n = g.n_x;
  std::size_t np = g.plane();
  double cell = g.h() * g.h();
  switch (kind.kind) {
    case NormKind::Kind::Lp: {
      if (kind.p < 1.0) throw std::invalid_argument("L^p norm requires p >= 1");
      if (kind.refine > 1) {
        TorusField fine = refine_spectral(f.slice(j), kind.refine);
        NormKind plain = kind;
        plain.refine = 1;
        return norm_slice(fine, 0, plain);
      }
      std::vector<const double*> planes;
      for (int c = 0; c < f.ncomp(); ++c) planes.push_back(f.plane(j, c));
      return lp_planes(planes, np, kind.p, cell);
    }
    case NormKind::Kind::C0: {
      double m = 0.0;
      for (int c = 0; c < f.ncomp(); ++c) {
        const double* v = f.plane(j, c);
        for (std::size_t i = 0; i < np; ++i) m = std::max(m, std::abs(v[i]));
      }
      return m;
    }
    case NormKind::Kind::CN: {
      if (kind.order < 0 || kind.order > 4) throw std::invalid_argument("C^N norm requires 0 <= N <= 4");
      double m = 0.0;
      for (int c = 0; c < f.ncomp(); ++c)
        for (int a = 0; a <= kind.order; ++a)
          for (int b = 0; a + b <= kind.order; ++b) {
            if (a == 0 && b == 0) {
              const double* v = f.plane(j, c);
              for (std::size_t i = 0; i < np; ++i) m = std::max(m, std::abs(v[i]));
              continue;
            }
            const Fft2& fft = Fft2::get(n);
            std::vector<cplx> spec(fft.spectral_size());
            fft.forward(f.plane(j, c), spec.data());
            int nh = fft.nh();
            for (int k2 = 0; k2 < n; ++k2)
              for (int k1 = 0; k1 < nh; ++k1)
                spec[static_cast<std::size_t>(k2) * nh + k1] *= ipow(fft.kappa(k1), a) * ipow(fft.kappa(k2), b);
            std::vector<double> d(np);
            fft.inverse(spec.data(), d.data());
            for (double v : d) m = std::max(m, std::abs(v));
          }
      return m;
    }
    case NormKind::Kind::Hs: {
      const Fft2& fft = Fft2::get(n);
      int nh = fft.nh();
      std::vector<cplx> spec(fft.spectral_size());
      std::vector<double> w(fft.spectral_size());
      double total = 0.0;
      for (int c = 0; c < f.ncomp(); ++c) {
        fft.forward(f.plane(j, c), spec.data());
        for (int k2 = 0; k2 < n; ++k2)
          for (int k1 = 0; k1 < nh; ++k1) {
            std::size_t idx = static_cast<std::size_t>(k2) * nh + k1;
            double kk = fft.kappa(k1) * fft.kappa(k1) + fft.kappa(k2) * fft.kappa(k2);
            double mult = (k1 == 0 || 2 * k1 == n) ? 1.0 : 2.0;
            w[idx] = kk > 0.0 ? mult * std::pow(kk, kind.s) * std::norm(spec[idx]) : 0.0;
          }
        total += pairwise_sum(w.data(), w.size());
      }
      double scale = cell / static_cast<double>(np);
      return std::sqrt(total * scale);
    }
    case NormKind::Kind::Wsp: {
      std::vector<std::vector<double>> imgs;
      std::vector<const double*> planes;
      for (int c = 0; c < f.ncomp(); ++c) {
        imgs.push_back(apply_symbol(f.plane(j, c), n, [&](double a, double b) {
          double kk = a * a + b * b;
          return kk > 0.0 ? std::pow(kk, 0.5 * kind.s) : 0.0;
        }));
      }
      for (auto& v : imgs) planes.push_back(v.data());
      return lp_planes(planes, np, kind.p, cell);
    }
  }
  return 0.0;
}

std::vector<double> norm_profile(const TorusField& f, const NormKind& kind) {
  std::vector<double> out(f.grid().n_t);
  parallel_for(f.grid().n_t, [&](int j) { out[j] = norm_slice(f, j, kind); });
  return out;
}

double reduce_in_time(const std::vector<double>& profile, const GridSpec& grid, TimeReduce r) {
  if (profile.empty()) return 0.0;
  if (r == TimeReduce::sup || profile.size() == 1) {
    double m = 0.0;
    for (double v : profile) m = std::max(m, v);
    return m;
  }
  std::vector<double> w = trapezoid_weights(grid.n_t);
  std::vector<double> terms(profile.size());
  for (std::size_t j = 0; j < profile.size(); ++j)
    terms[j] = w[j] * (r == TimeReduce::l2 ? profile[j] * profile[j] : profile[j]);
  double s = pairwise_sum(terms.data(), terms.size());
  return r == TimeReduce::l2 ? std::sqrt(s) : s;
}

double norm(const TorusField& f, const NormKind& kind, TimeReduce r) {
  return reduce_in_time(norm_profile(f, kind), f.grid(), r);
}

double norm_CN_tx(const TorusField& f, int n) {
  if (n < 0 || n > 4) throw std::invalid_argument("C^N norm requires 0 <= N <= 4");
  double m = norm(f, NormKind::CN(n));
  if (f.grid().n_t < 5) return m;
  TorusField d = f;
  for (int c = 1; c <= n; ++c) {
    d = time_derivative(d);
    m = std::max(m, norm(d, NormKind::CN(n - c)));
  }
  return m;
}

double l2_plancherel(const TorusField& f, int j) {
  int n = f.grid().n_x;
  const Fft2& fft = Fft2::get(n);
  int nh = fft.nh();
  std::vector<cplx> spec(fft.spectral_size());
  std::vector<double> w(fft.spectral_size());
  double total = 0.0;
  for (int c = 0; c < f.ncomp(); ++c) {
    fft.forward(f.plane(j, c), spec.data());
    for (int k2 = 0; k2 < n; ++k2)
      for (int k1 = 0; k1 < nh; ++k1) {
        std::size_t idx = static_cast<std::size_t>(k2) * nh + k1;
        double mult = (k1 == 0 || 2 * k1 == n) ? 1.0 : 2.0;
        w[idx] = mult * std::norm(spec[idx]);
      }
    total += pairwise_sum(w.data(), w.size());
  }
  double h = f.grid().h();
  return std::sqrt(total * h * h / static_cast<double>(f.grid().plane()));
}

TorusField refine_spectral(const TorusField& f, int factor) {
  if (f.grid().n_t != 1) throw std::invalid_argument("refine_spectral: stationary field required");
  if (factor < 1) throw std::invalid_argument("refine_spectral: factor must be >= 1");
  if (factor == 1) return f;
  int n = f.grid().n_x;
  int m = n * factor;
  const Fft2& small = Fft2::get(n);
  const Fft2& big = Fft2::get(m);
  int nh = small.nh();
  int mh = big.nh();
  TorusField out(GridSpec{m, 1}, f.rank(), f.symmetry());
  std::vector<cplx> s(small.spectral_size());
  for (int c = 0; c < f.ncomp(); ++c) {
    small.forward(f.plane(0, c), s.data());
    std::vector<cplx> b(big.spectral_size(), cplx(0.0, 0.0));
    double gain = static_cast<double>(factor) * factor;
    for (int k2 = 0; k2 < n; ++k2) {
      int signed2 = k2 < n / 2 ? k2 : k2 - n;
      bool nyq2 = (k2 == n / 2);
      for (int k1 = 0; k1 < nh; ++k1) {
        bool nyq1 = (k1 == n / 2);
        cplx v = s[static_cast<std::size_t>(k2) * nh + k1] * gain;
        if (nyq1) v *= 0.5;
        if (nyq2) {
          v *= 0.5;
          int r1 = n / 2;
          int r2 = m - n / 2;
          b[static_cast<std::size_t>(r1) * mh + k1] += v;
          b[static_cast<std::size_t>(r2) * mh + k1] += v;
        } else {
          int r = signed2 >= 0 ? signed2 : signed2 + m;
          b[static_cast<std::size_t>(r) * mh + k1] += v;
        }
      }
    }
    big.inverse(b.data(), out.plane(0, c));
  }
  return out;
}

}  // namespace hallci

#include "hallci/torus_field.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "hallci/fft.hpp"
#include "hallci/parallel.hpp"

namespace hallci {

double GridSpec::h() const { return 2.0 * std::numbers::pi / n_x; }

double GridSpec::dt() const { return n_t > 1 ? 1.0 / (n_t - 1) : 0.0; }

GridSpec make_grid(int n_x, int n_t) {
  if (n_x <= 0 || (n_x & (n_x - 1)) != 0) throw std::invalid_argument("n_x must be power of two");
  if (n_x < 16) throw std::invalid_argument("n_x too small (minimum 16)");
  if (n_t < 1) throw std::invalid_argument("n_t must be at least 1");
  return GridSpec{n_x, n_t};
}

int components(Rank r) {
  switch (r) {
    case Rank::scalar: return 1;
    case Rank::vector3: return 3;
    case Rank::tensor3x3: return 9;
  }
  return 1;
}

std::string to_string(Rank r) {
  switch (r) {
    case Rank::scalar: return "scalar";
    case Rank::vector3: return "vector3";
    case Rank::tensor3x3: return "tensor3x3";
  }
  return "scalar";
}

std::string to_string(Symmetry s) {
  switch (s) {
    case Symmetry::none: return "none";
    case Symmetry::symmetric: return "symmetric";
    case Symmetry::skew: return "skew";
    case Symmetry::symmetric_traceless: return "symmetric-traceless";
  }
  return "none";
}

Rank rank_from_string(const std::string& s) {
  if (s == "scalar") return Rank::scalar;
  if (s == "vector3") return Rank::vector3;
  if (s == "tensor3x3") return Rank::tensor3x3;
  throw std::invalid_argument("unknown rank: " + s);
}

Symmetry symmetry_from_string(const std::string& s) {
  if (s == "none") return Symmetry::none;
  if (s == "symmetric") return Symmetry::symmetric;
  if (s == "skew") return Symmetry::skew;
  if (s == "symmetric-traceless") return Symmetry::symmetric_traceless;
  throw std::invalid_argument("unknown symmetry tag: " + s);
}

TorusField::TorusField(const GridSpec& grid, Rank rank, Symmetry sym)
    : grid_(grid), rank_(rank), sym_(sym),
      samples_(static_cast<std::size_t>(grid.n_t) * components(rank) * grid.plane(), 0.0) {}

TorusField TorusField::slice(int j) const {
  TorusField out(grid_.spatial(), rank_, sym_);
  std::size_t n = static_cast<std::size_t>(ncomp()) * grid_.plane();
  std::copy_n(samples_.begin() + offset(j, 0), n, out.samples_.begin());
  return out;
}

void TorusField::assign_slice(int j, const TorusField& s) {
  if (s.grid_.n_x != grid_.n_x || s.rank_ != rank_ || s.grid_.n_t != 1)
    throw std::invalid_argument("assign_slice: grid or rank mismatch");
  std::copy(s.samples_.begin(), s.samples_.end(), samples_.begin() + offset(j, 0));
}

TorusField TorusField::from_slices(const std::vector<TorusField>& slices, int n_t) {
  if (slices.empty() || static_cast<int>(slices.size()) != n_t)
    throw std::invalid_argument("from_slices: slice count does not match n_t");
  GridSpec g{slices[0].grid().n_x, n_t};
  TorusField out(g, slices[0].rank(), slices[0].symmetry());
  for (int j = 0; j < n_t; ++j) out.assign_slice(j, slices[j]);
  return out;
}

TorusField sample(const GridSpec& grid, Rank rank, const Generator& gen) {
  TorusField f(grid, rank);
  int nc = components(rank);
  int n = grid.n_x;
  parallel_for(grid.n_t, [&](int j) {
    double t = grid.t(j);
    double buf[9];
    for (int i2 = 0; i2 < n; ++i2)
      for (int i1 = 0; i1 < n; ++i1) {
        gen(t, grid.x(i1), grid.x(i2), buf);
        for (int c = 0; c < nc; ++c) f.at(j, c, i1, i2) = buf[c];
      }
  });
  return f;
}

// ---- pointwise algebra ----------------------------------------------------

namespace {

void require_same(const TorusField& a, const TorusField& b, const char* what) {
  if (!(a.grid() == b.grid()) || a.rank() != b.rank())
    throw std::invalid_argument(std::string(what) + ": grid or rank mismatch");
}

void require_grid(const TorusField& a, const TorusField& b, const char* what) {
  if (!(a.grid() == b.grid())) throw std::invalid_argument(std::string(what) + ": grid mismatch");
}

Symmetry sum_symmetry(Symmetry a, Symmetry b) {
  if (a == b) return a;
  auto sym = [](Symmetry s) { return s == Symmetry::symmetric || s == Symmetry::symmetric_traceless; };
  if (sym(a) && sym(b)) return Symmetry::symmetric;
  return Symmetry::none;
}

}  // namespace

TorusField operator+(const TorusField& a, const TorusField& b) {
  require_same(a, b, "add");
  TorusField out(a.grid(), a.rank(), sum_symmetry(a.symmetry(), b.symmetry()));
  auto& o = out.samples();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a.samples()[i] + b.samples()[i];
  return out;
}

TorusField operator-(const TorusField& a, const TorusField& b) {
  require_same(a, b, "subtract");
  TorusField out(a.grid(), a.rank(), sum_symmetry(a.symmetry(), b.symmetry()));
  auto& o = out.samples();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = a.samples()[i] - b.samples()[i];
  return out;
}

TorusField operator*(double s, const TorusField& a) {
  TorusField out = a;
  for (double& v : out.samples()) v *= s;
  return out;
}

void axpy(double s, const TorusField& x, TorusField& y) {
  require_same(x, y, "axpy");
  auto& yv = y.samples();
  const auto& xv = x.samples();
  for (std::size_t i = 0; i < yv.size(); ++i) yv[i] += s * xv[i];
  y.set_symmetry(sum_symmetry(x.symmetry(), y.symmetry()));
}

TorusField component(const TorusField& f, int c) {
  TorusField out(f.grid(), Rank::scalar);
  for (int j = 0; j < f.grid().n_t; ++j)
    std::copy_n(f.plane(j, c), f.grid().plane(), out.plane(j, 0));
  return out;
}

TorusField stack_vector(const TorusField& a, const TorusField& b, const TorusField& c) {
  require_same(a, b, "stack_vector");
  require_same(a, c, "stack_vector");
  TorusField out(a.grid(), Rank::vector3);
  const TorusField* src[3] = {&a, &b, &c};
  for (int j = 0; j < a.grid().n_t; ++j)
    for (int k = 0; k < 3; ++k) std::copy_n(src[k]->plane(j, 0), a.grid().plane(), out.plane(j, k));
  return out;
}

TorusField scalar_times(const TorusField& s, const TorusField& f) {
  require_grid(s, f, "scalar_times");
  if (s.rank() != Rank::scalar) throw std::invalid_argument("scalar_times: first factor must be scalar");
  TorusField out(f.grid(), f.rank(), f.symmetry());
  std::size_t np = f.grid().plane();
  for (int j = 0; j < f.grid().n_t; ++j)
    for (int c = 0; c < f.ncomp(); ++c) {
      const double* sv = s.plane(j, 0);
      const double* fv = f.plane(j, c);
      double* o = out.plane(j, c);
      for (std::size_t i = 0; i < np; ++i) o[i] = sv[i] * fv[i];
    }
  return out;
}

TorusField outer(const TorusField& a, const TorusField& b) {
  require_same(a, b, "outer");
  if (a.rank() != Rank::vector3) throw std::invalid_argument("outer: vector fields required");
  TorusField out(a.grid(), Rank::tensor3x3);
  std::size_t np = a.grid().plane();
  for (int j = 0; j < a.grid().n_t; ++j)
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) {
        const double* x = a.plane(j, r);
        const double* y = b.plane(j, c);
        double* o = out.plane(j, tc(r, c));
        for (std::size_t i = 0; i < np; ++i) o[i] = x[i] * y[i];
      }
  return out;
}

TorusField traceless_outer(const TorusField& a, const TorusField& b) {
  TorusField out = outer(a, b);
  std::size_t np = a.grid().plane();
  for (int j = 0; j < a.grid().n_t; ++j) {
    double* d0 = out.plane(j, tc(0, 0));
    double* d1 = out.plane(j, tc(1, 1));
    double* d2 = out.plane(j, tc(2, 2));
    for (std::size_t i = 0; i < np; ++i) {
      double tr = (d0[i] + d1[i] + d2[i]) / 3.0;
      d0[i] -= tr;
      d1[i] -= tr;
      d2[i] -= tr;
    }
  }
  return out;
}

TorusField transpose(const TorusField& m) {
  if (m.rank() != Rank::tensor3x3) throw std::invalid_argument("transpose: tensor field required");
  TorusField out(m.grid(), Rank::tensor3x3, m.symmetry());
  for (int j = 0; j < m.grid().n_t; ++j)
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) std::copy_n(m.plane(j, tc(r, c)), m.grid().plane(), out.plane(j, tc(c, r)));
  return out;
}

TorusField identity_times(const TorusField& s) {
  if (s.rank() != Rank::scalar) throw std::invalid_argument("identity_times: scalar field required");
  TorusField out(s.grid(), Rank::tensor3x3, Symmetry::symmetric);
  for (int j = 0; j < s.grid().n_t; ++j)
    for (int d = 0; d < 3; ++d) std::copy_n(s.plane(j, 0), s.grid().plane(), out.plane(j, tc(d, d)));
  return out;
}

TorusField constant_tensor_times(const TorusField& s, const std::array<double, 9>& m) {
  if (s.rank() != Rank::scalar) throw std::invalid_argument("constant_tensor_times: scalar field required");
  TorusField out(s.grid(), Rank::tensor3x3);
  std::size_t np = s.grid().plane();
  for (int j = 0; j < s.grid().n_t; ++j)
    for (int c = 0; c < 9; ++c) {
      if (m[c] == 0.0) continue;
      const double* sv = s.plane(j, 0);
      double* o = out.plane(j, c);
      for (std::size_t i = 0; i < np; ++i) o[i] = m[c] * sv[i];
    }
  return out;
}

TorusField dot(const TorusField& a, const TorusField& b) {
  require_same(a, b, "dot");
  TorusField out(a.grid(), Rank::scalar);
  std::size_t np = a.grid().plane();
  for (int j = 0; j < a.grid().n_t; ++j) {
    double* o = out.plane(j, 0);
    for (int c = 0; c < a.ncomp(); ++c) {
      const double* x = a.plane(j, c);
      const double* y = b.plane(j, c);
      for (std::size_t i = 0; i < np; ++i) o[i] += x[i] * y[i];
    }
  }
  return out;
}

TorusField frobenius(const TorusField& m) {
  TorusField out = dot(m, m);
  for (double& v : out.samples()) v = std::sqrt(v);
  return out;
}

TorusField zero_like(const TorusField& f) { return TorusField(f.grid(), f.rank(), f.symmetry()); }

double max_abs(const TorusField& f) {
  double m = 0.0;
  for (double v : f.samples()) m = std::max(m, std::abs(v));
  return m;
}

double max_abs_diff(const TorusField& a, const TorusField& b) {
  require_same(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.samples()[i] - b.samples()[i]));
  return m;
}

double plane_mean(const double* v, std::size_t n) { return pairwise_sum(v, n) / static_cast<double>(n); }

std::vector<double> component_means(const TorusField& f, int j) {
  std::vector<double> out(f.ncomp());
  for (int c = 0; c < f.ncomp(); ++c) out[c] = plane_mean(f.plane(j, c), f.grid().plane());
  return out;
}

namespace {

template <class F>
double tensor_defect(const TorusField& m, F pointwise) {
  if (m.rank() != Rank::tensor3x3) throw std::invalid_argument("tensor field required");
  double worst = 0.0;
  std::size_t np = m.grid().plane();
  for (int j = 0; j < m.grid().n_t; ++j) {
    double scale = 0.0;
    double defect = 0.0;
    const double* p[9];
    for (int c = 0; c < 9; ++c) p[c] = m.plane(j, c);
    for (std::size_t i = 0; i < np; ++i) {
      double v[9];
      for (int c = 0; c < 9; ++c) {
        v[c] = p[c][i];
        scale = std::max(scale, std::abs(v[c]));
      }
      defect = std::max(defect, pointwise(v));
    }
    if (scale > 0.0) worst = std::max(worst, defect / scale);
  }
  return worst;
}

}  // namespace

double asymmetry(const TorusField& m) {
  return tensor_defect(m, [](const double* v) {
    return std::max({std::abs(v[1] - v[3]), std::abs(v[2] - v[6]), std::abs(v[5] - v[7])});
  });
}

double trace_defect(const TorusField& m) {
  return tensor_defect(m, [](const double* v) { return std::abs(v[0] + v[4] + v[8]); });
}

double skew_defect(const TorusField& m) {
  return tensor_defect(m, [](const double* v) {
    return std::max({std::abs(v[1] + v[3]), std::abs(v[2] + v[6]), std::abs(v[5] + v[7]), std::abs(v[0]),
                     std::abs(v[4]), std::abs(v[8])});
  });
}

}  // namespace hallci

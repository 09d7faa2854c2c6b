#include "hallci/time_grid.hpp"

#include <stdexcept>

namespace hallci {

std::vector<double> trapezoid_weights(int n_t) {
  if (n_t <= 1) return std::vector<double>(1, 1.0);
  double dt = 1.0 / (n_t - 1);
  std::vector<double> w(n_t, dt);
  w.front() = w.back() = 0.5 * dt;
  return w;
}

TimeStencil time_stencil(int j, int n_t) {
  if (n_t < 5) throw std::invalid_argument("time derivative needs at least 5 time samples");
  double inv = (n_t - 1) / 12.0;
  TimeStencil s{};
  if (j >= 2 && j <= n_t - 3) {
    s.offset = {-2, -1, 0, 1, 2};
    s.weight = {1.0, -8.0, 0.0, 8.0, -1.0};
  } else if (j == 0) {
    s.offset = {0, 1, 2, 3, 4};
    s.weight = {-25.0, 48.0, -36.0, 16.0, -3.0};
  } else if (j == 1) {
    s.offset = {-1, 0, 1, 2, 3};
    s.weight = {-3.0, -10.0, 18.0, -6.0, 1.0};
  } else if (j == n_t - 2) {
    s.offset = {-3, -2, -1, 0, 1};
    s.weight = {-1.0, 6.0, -18.0, 10.0, 3.0};
  } else {
    s.offset = {-4, -3, -2, -1, 0};
    s.weight = {3.0, -16.0, 36.0, -48.0, 25.0};
  }
  for (double& w : s.weight) w *= inv;
  return s;
}

TorusField time_derivative(const TorusField& f) {
  const GridSpec& g = f.grid();
  TorusField out(g, f.rank(), f.symmetry());
  std::size_t np = g.plane();
  for (int j = 0; j < g.n_t; ++j) {
    TimeStencil s = time_stencil(j, g.n_t);
    for (int c = 0; c < f.ncomp(); ++c) {
      double* o = out.plane(j, c);
      for (int k = 0; k < 5; ++k) {
        if (s.weight[k] == 0.0) continue;
        const double* v = f.plane(j + s.offset[k], c);
        for (std::size_t i = 0; i < np; ++i) o[i] += s.weight[k] * v[i];
      }
    }
  }
  return out;
}

}  // namespace hallci

#pragma once

#include <array>
#include <vector>

#include "hallci/torus_field.hpp"

namespace hallci {

// Trapezoid weights on [0,1] with n_t nodes (a single node gets weight 1).
std::vector<double> trapezoid_weights(int n_t);

// Fourth-order first-derivative stencil at node j: central in the interior,
// one-sided on the first and last two nodes. Offsets are relative to j.
struct TimeStencil {
  std::array<int, 5> offset;
  std::array<double, 5> weight;  // already divided by dt
};
TimeStencil time_stencil(int j, int n_t);

TorusField time_derivative(const TorusField& f);

}  // namespace hallci

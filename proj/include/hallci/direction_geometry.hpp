#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "hallci/torus_field.hpp"

namespace hallci {

using Vec3 = std::array<double, 3>;
using Vec2 = std::array<double, 2>;
using Mat3 = std::array<double, 9>;  // row-major, index tc(a, b)
using Sym6 = std::array<double, 6>;  // entries (11, 22, 33, 12, 13, 23)

// One wavevector of the direction families with its orthonormal frame and
// planar pair. k, A and k×A have integer numerators over `denom`.
struct Direction {
  int family = 1;  // 1: velocity family, 2: magnetic family
  int index = 0;   // position inside the family, 0..5
  std::array<int, 3> k_num{};
  std::array<int, 3> A_num{};
  std::array<int, 3> kxA_num{};
  std::array<int, 2> k_tilde_num{};
  std::array<int, 2> A_tilde_num{};
  int denom = 5;  // the per-direction N_Λ clearing every denominator
  Vec3 k{}, A{}, kxA{};
  Vec2 k_tilde{}, A_tilde{};

  std::string label() const;
  Mat3 k_outer_k() const;
};

// The twelve directions: family 1 (indices 0..5) then family 2.
const std::vector<Direction>& lambda_sets();
std::vector<Direction> family_directions(int family);
// Smallest integer clearing every denominator of both families (65).
int common_n_lambda();

Sym6 sym_vec(const Mat3& m);
Mat3 sym_mat(const Sym6& v);
double frobenius_distance_to_identity(const Mat3& r);

// Column j of the 6×6 map is sym_vec(k_j ⊗ k_j).
std::array<double, 36> gamma_map(int family);
double gamma_map_determinant(int family);
double gamma_map_condition(int family);

// γ²_k(R) for the six directions of the family, by a dense solve of the
// 6×6 system. Throws when |R − Id|_F > delta or any γ²_k ≤ 0.
Sym6 solve_gamma(const Mat3& r, int family, double delta);
// Same solve without the ball and sign checks; uses the precomputed inverse.
Sym6 solve_gamma_unchecked(const Mat3& r, int family);
Mat3 reconstruct(const Sym6& gamma_sq, int family);

// Largest radius on which every γ²_k stays positive, by the closed-form
// support-function bound in the Frobenius metric.
double analytic_delta(int family);

struct DeltaCalibration {
  int family = 1;
  int n_samples = 0;
  std::uint64_t seed = 0;
  double bisected = 0.0;  // before the safety factor
  double delta = 0.0;     // bisected × 0.9
  double analytic = 0.0;
};
inline constexpr int kMinCalibrationSamples = 10000;
inline constexpr double kDeltaSafety = 0.9;
DeltaCalibration calibrate_delta(int family, int n_samples, std::uint64_t seed = 12345);
// Minimum of the two per-family calibrated radii.
double global_delta(int n_samples = kMinCalibrationSamples, std::uint64_t seed = 12345);

// ---- amplitude function --------------------------------------------------------

struct AmplitudeSpec {
  double r0 = 0.0;
  double delta = 0.0;
};

double smoothstep5(double t);  // 6t⁵ − 15t⁴ + 10t³ clamped to [0,1]
double chi_value(double x, const AmplitudeSpec& spec);
double chi_derivative(double x, const AmplitudeSpec& spec);
// Pointwise ρ = χ(|R|_F). Throws when r0 = 0 while R is not identically zero.
TorusField chi(const TorusField& r, const AmplitudeSpec& spec);

}  // namespace hallci

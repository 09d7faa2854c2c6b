#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hallci/direction_geometry.hpp"
#include "hallci/torus_field.hpp"

namespace hallci {

// Φ = c·exp(−1/(1−x²)) on (−1, 1) with φ = Φ″ and c fixed by (1/2π)∫φ² = 1.
class ProfilePair {
 public:
  static const ProfilePair& get();

  double c() const { return c_; }
  // Derivatives of Φ of order 0..3 at x (zero outside (−1, 1)).
  double Phi(double x, int order = 0) const;
  double phi(double x) const { return Phi(x, 2); }
  // (1/2π)∫φ² by the trapezoid rule with `intervals` cells on [−1, 1].
  double normalization_quadrature(int intervals) const;
  double mean_quadrature(int intervals) const;  // ∫φ

 private:
  ProfilePair();
  double c_ = 1.0;
};

enum class NLambdaMode { common, per_family };
int block_n_lambda(const Direction& d, NLambdaMode mode);
NLambdaMode n_lambda_mode_from_string(const std::string& s);
std::string to_string(NLambdaMode m);

// Global index of a direction inside lambda_sets().
inline int direction_id(const Direction& d) { return (d.family - 1) * 6 + d.index; }

struct ShiftPair {
  int a = 0, b = 0;        // direction ids
  double separation = 0.0;  // distance of the shift difference to the period lattice
  double required = 0.0;    // sum of the half widths
};

struct ShiftPlan {
  double mu = 0.0;
  int sigma = 0;
  NLambdaMode mode = NLambdaMode::common;
  std::array<Vec2, 12> shift{};
  std::vector<ShiftPair> pairs;  // every pair with a shared planar direction
  double min_margin() const;     // min(separation − required); > 0 when disjoint
};

ShiftPlan assign_shifts(double mu, int sigma, NLambdaMode mode);

// One Mikado block sampled on an n×n grid. Every field is a closed-form
// function of the residue r = (m₁i₁ + m₂i₂) mod n with m = σN·Ã, so the block
// keeps per-residue tables and materializes fields on demand.
class MikadoBlock {
 public:
  MikadoBlock(const Direction& dir, double mu, int sigma, int n_lambda, const Vec2& shift, int n_x);

  const Direction& direction() const { return dir_; }
  double mu() const { return mu_; }
  int sigma() const { return sigma_; }
  int n_lambda() const { return n_lambda_; }
  const Vec2& shift() const { return shift_; }
  int n_x() const { return n_; }
  const std::array<int, 2>& m() const { return m_; }
  int lattice_gcd() const { return g_; }
  double eta() const { return eta_; }
  // Residue samples across one support width; must be ≥ 4.
  double samples_across_support() const;
  // The conservative rule n_x ≥ 8μσN.
  bool meets_resolution_rule() const { return n_ >= 8.0 * mu_ * sigma_ * n_lambda_; }

  int residue(int i1, int i2) const;
  // Tables indexed by residue. Φ_(k); coefficient of Ã in ∇Φ_(k); coefficient of
  // ÃÃᵀ in ∇²Φ_(k); φ_(k); coefficient of Ã in ∇φ_(k).
  const std::vector<double>& Phi_table() const { return Phi_; }
  const std::vector<double>& dPhi_table() const { return dPhi_; }
  const std::vector<double>& hess_table() const { return hess_; }
  const std::vector<double>& phi_table() const { return phi_; }
  const std::vector<double>& dphi_table() const { return dphi_; }

  TorusField Phi() const;
  TorusField phi() const;
  TorusField grad_Phi() const;
  TorusField hess_Phi() const;
  TorusField grad_phi() const;
  TorusField W() const;
  TorusField Omega() const;
  std::vector<std::uint8_t> support_mask() const;  // |φ| > 1e-14·max

  // Grid mean of f(φ_(k)) computed from residue counts (exactly the grid mean).
  double grid_mean(const std::function<double(double)>& f) const;

 private:
  TorusField from_table(const std::vector<double>& t) const;
  Direction dir_;
  double mu_;
  int sigma_;
  int n_lambda_;
  Vec2 shift_;
  int n_;
  std::array<int, 2> m_{};
  int g_ = 1;
  double s0_ = 0.0;
  double eta_ = 1.0;
  std::vector<double> Phi_, dPhi_, hess_, phi_, dphi_;
};

// Lemma-level identity defects of one block, each relative to the natural
// scale of the compared quantity.
struct BlockChecks {
  double div_W = 0.0;
  double div_Omega_minus_W = 0.0;
  double div_WW = 0.0;
  double mean_WW_minus_kk = 0.0;
  double mean_phi2_minus_1 = 0.0;
  double phi_minus_lap_Phi = 0.0;
  double omega_skew = 0.0;
  double period_shift = 0.0;    // W(x + 2π/σ e_i) − W(x)
  double spectral_lap_defect = 0.0;  // diagnostic: φ − Δ_spectral Φ
  double max_defect() const;
};
BlockChecks verify_block(const MikadoBlock& b);

struct IntersectionReport {
  double support_measure = 0.0;  // |supp(W_k ⊗ W_k′)| by grid counting
  double l1 = 0.0, l2 = 0.0, linf = 0.0;
  std::int64_t count = 0;
};
IntersectionReport intersection_report(const MikadoBlock& a, const MikadoBlock& b);

// Number of grid points where both supports are present.
std::int64_t mask_overlap(const MikadoBlock& a, const MikadoBlock& b);

// Least-squares slope of log(y) against log(x).
double fit_exponent(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace hallci

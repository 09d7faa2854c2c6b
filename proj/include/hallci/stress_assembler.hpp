#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hallci/field_series.hpp"
#include "hallci/perturbation_builder.hpp"
#include "hallci/torus_field.hpp"

namespace hallci {

struct EquationParams {
  double nu1 = 1.0;
  double nu2 = 1.0;
  double alpha1 = 0.5;
  double alpha2 = 1.0;
};

struct StressPair {
  TorusField R_u;  // symmetric traceless
  TorusField R_B;  // symmetric traceless
  std::vector<TimeInterval> support;
  std::string provenance;  // initial | mollified | iterated | component:<part>
};

// ---- commutators ------------------------------------------------------------------------

// R̊^u_com and R̊^B_com,1 are symmetric traceless; R̊^B_com,2 is skew.
struct CommutatorStresses {
  TorusField R_u, R_B1, R_B2;
};
struct CommutatorSeries {
  FieldSeries R_u, R_B1, R_B2;
};

CommutatorSeries commutator_stresses(const FieldSeries& u, const FieldSeries& b, double l);
CommutatorStresses commutator_stresses(const TorusField& u, const TorusField& b, double l);

// ---- initial and mollification stresses ------------------------------------------------------

struct InitialSeries {
  FieldSeries R_u, R_B, pressure;
};
// Throws when u0 or B0 is not divergence-free and mean-free.
InitialSeries initial_stresses(const FieldSeries& u0, const FieldSeries& b0, const EquationParams& eq);
StressPair initial_stresses(const TorusField& u0, const TorusField& b0, const EquationParams& eq, TorusField* pressure = nullptr);

struct MollificationStresses {
  StressPair stresses;
  double nu1_n = 0.0;  // λ_n^{−2α₁}
  double nu2_n = 0.0;  // λ_n^{−2α₂}
  TorusField u_n, B_n;
};
MollificationStresses mollification_stresses(const TorusField& u, const TorusField& b, double lambda_n, double alpha1,
                                             double alpha2);

// ---- error parts at one time slice ------------------------------------------------------------

struct LinearInputs {
  const PerturbationSlice* w = nullptr;
  const PerturbationSlice* d = nullptr;
  const TorusField* dt_w = nullptr;  // ∂_t of the total velocity perturbation
  const TorusField* dt_d = nullptr;
  const TorusField* u_l = nullptr;
  const TorusField* B_l = nullptr;
};

struct PartPair {
  TorusField u, B;
};

PartPair linear_errors(const LinearInputs& in, const EquationParams& eq);
PartPair corrector_errors(const PerturbationSlice& w, const PerturbationSlice& d);

struct OscillationErrors {
  TorusField x_u, far_u, x_B, far_B;
  TorusField sum_u() const { return x_u + far_u; }
  TorusField sum_B() const { return x_B + far_B; }
};
OscillationErrors oscillation_errors(const CoefficientSlice& vel, const CoefficientSlice& mag, const TorusField& w_p,
                                     const TorusField& d_p, const BlockSet& blocks);

// R P_H div R̊^u_com and R̊^B_com,1 + R curl⁻¹ div R̊^B_com,2.
PartPair commutator_errors(const TorusField& R_u_com, const TorusField& R_B1, const TorusField& R_B2);

struct StressParts {
  PartPair lin, cor, com;
  OscillationErrors osc;
};

// Sum of the four parts with symmetry enforcement. Throws when a part is missing.
StressPair assemble_new_stresses(const StressParts& parts);

// ‖R P_H div R − R‖_∞ / ‖R‖_∞ for one slice.
double idempotence_defect(const TorusField& R_u);

// ---- residuals ---------------------------------------------------------------------------

struct TermNorm {
  std::string equation;  // velocity | magnetic
  std::string term;
  double l2 = 0.0;       // L²_t L²_x
};

struct ResidualReport {
  double velocity_l2 = 0.0, velocity_l1 = 0.0;
  double magnetic_l2 = 0.0, magnetic_l1 = 0.0;
  double velocity_scale = 0.0, magnetic_scale = 0.0;  // largest single term, L²_t L²_x
  bool pressure_free = true;
  std::vector<TermNorm> terms;
  double velocity_relative() const { return velocity_scale > 0.0 ? velocity_l2 / velocity_scale : velocity_l2; }
  double magnetic_relative() const { return magnetic_scale > 0.0 ? magnetic_l2 / magnetic_scale : magnetic_l2; }
};

ResidualReport residual(const FieldSeries& u, const FieldSeries& b, const FieldSeries& R_u, const FieldSeries& R_B,
                        const EquationParams& eq);
ResidualReport residual(const TorusField& u, const TorusField& b, const TorusField& R_u, const TorusField& R_B,
                        const EquationParams& eq);

// Accumulates residual terms slice by slice (trapezoid weights in time).
class ResidualAccumulator {
 public:
  ResidualAccumulator(const GridSpec& grid, const EquationParams& eq);
  // dt_u, dt_b are the time derivatives at slice j.
  void add(int j, const TorusField& u, const TorusField& b, const TorusField& dt_u, const TorusField& dt_b,
           const TorusField& R_u, const TorusField& R_B);
  ResidualReport report() const;

 private:
  GridSpec grid_;
  EquationParams eq_;
  std::vector<double> w_;
  std::vector<double> vel_sq_, mag_sq_;  // per term, weighted squared L²
  double vel_res_sq_ = 0.0, mag_res_sq_ = 0.0, vel_res_l1_ = 0.0, mag_res_l1_ = 0.0;
};

// ---- weak formulation ----------------------------------------------------------------------

// A divergence-free test field φ(t,x) = η(t) (∂₂ψ, −∂₁ψ, ζ)(x) with η(1) = 0.
struct TestFunction {
  TorusField phi;  // space-time vector field on the solution grid
};
std::vector<TestFunction> default_test_family(const GridSpec& grid, int count, std::uint64_t seed = 12345);

// Max over the family of the pairing defects of both equations, each relative
// to the largest term of its pairing. Stresses enter as forcing when given.
// Time integrals use the discrete adjoint of the time-difference scheme.
double weak_form_check(const TorusField& u, const TorusField& b, const std::vector<TestFunction>& tests,
                       const EquationParams& eq, const TorusField* R_u = nullptr, const TorusField* R_B = nullptr);

// ---- ledger ---------------------------------------------------------------------------------

struct LedgerRow {
  std::string part;
  std::string norm_kind;
  double value = 0.0;
  std::string paper_bound_formula;
  std::string parameters;
};

std::string ledger_csv(const std::vector<LedgerRow>& rows);
void write_ledger_csv(const std::vector<LedgerRow>& rows, const std::string& path);

// Bound formula reported next to each named part.
std::string part_bound_formula(const std::string& part);

}  // namespace hallci

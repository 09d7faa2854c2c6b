#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hallci/field_series.hpp"
#include "hallci/mikado_blocks.hpp"
#include "hallci/perturbation_builder.hpp"
#include "hallci/stress_assembler.hpp"

namespace hallci {

// ---- parameter schedules -------------------------------------------------------------------

// a^e for a possibly huge exponent; the decimal digits are kept when the
// value has at most kMaxMaterializedBits bits.
struct BigPower {
  double log10 = 0.0;
  bool materialized = false;
  std::string decimal;  // empty unless materialized
  double value() const;  // inf when too large for a double
  std::string str() const;
};
inline constexpr double kMaxMaterializedBits = 1 << 20;

struct ScheduleConstraint {
  std::string inequality;
  bool holds = true;
  std::string detail;
};

struct ParamSchedule {
  bool desk = false;
  long a = 0, b = 0;
  double beta = 0.0, epsilon = 0.0;
  int q = 0;
  BigPower lambda_q, lambda_q1, lambda_q2;  // λ_q, λ_{q+1}, λ_{q+2}
  double log10_delta_q1 = 0.0;              // δ_{q+1} = λ_{q+1}^{−2β}
  double log10_delta_q2 = 0.0;
  // Working parameters. In paper mode only their base-10 logarithms are meaningful.
  double mu = 0.0;
  int sigma = 0;
  double l = 0.0;
  double log10_mu = 0.0, log10_sigma = 0.0, log10_l = 0.0;
  NLambdaMode mode = NLambdaMode::common;
  double required_n_x = 0.0;  // 8μσN_Λ
  std::vector<ScheduleConstraint> constraints;

  double delta_q1() const;
  double delta_q2() const;
  bool resolved_by(int n_x) const { return n_x >= required_n_x; }
};

// λ_q = a^{b^q} and δ_q = λ_q^{−2β} without any constraint check.
ParamSchedule schedule_formulas(long a, long b, double beta, int q);

// Paper-mode schedule. Every constraint on (a, b, β, ε) is evaluated; the
// error message names each violated inequality.
ParamSchedule paper_schedule(long a, long b, double beta, double epsilon, int q, double alpha1 = 0.5,
                             double alpha2 = 1.0);

struct DeskOverrides {
  double mu = 16.0;
  int sigma = 2;
  double l = 1.0 / 16.0;
  double beta = 0.0;  // δ_{q+1} = μ^{−2β}
  long b = 2;         // λ_q = μ^{1/b}, λ_{q+2} = μ^b
  int q = 0;
  NLambdaMode mode = NLambdaMode::common;
};
// Throws when σ < 2, μ < 4 or l ≤ 0.
ParamSchedule desk_schedule(const DeskOverrides& d);

// ---- background fields and helicity ------------------------------------------------------------

// Quintic ramps on [1/4, 1/2] and [5/8, 3/4]; 1 on [1/2, 5/8], 0 outside [1/4, 3/4].
double psi(double t);

// ũ_m = mψ(sin x₂, 0, 0), B̃_m = mψ(sin x₂, cos x₁, −sin x₁ − cos x₂).
std::pair<TorusField, TorusField> background_fields(int m, const GridSpec& grid);
std::pair<FieldSeries, FieldSeries> background_series(int m, const GridSpec& grid);

// ∫ A·B per time sample with A = ∇×(−Δ)⁻¹B. Throws for B that is not divergence-free.
std::vector<double> helicity(const TorusField& b);
std::vector<double> helicity(const FieldSeries& b);

// ---- iteration state ---------------------------------------------------------------------------

struct IterationState {
  int q = 0;
  FieldSeries u, b, R_u, R_B;
  ParamSchedule schedule;
  std::vector<std::pair<std::string, double>> log;  // measured norms, in order of measurement

  const GridSpec& grid() const { return u.grid(); }
  std::optional<double> logged(const std::string& key) const;
};

// Level-0 state of the background pair with its initial stresses.
IterationState background_state(int m, const GridSpec& grid, const ParamSchedule& schedule, const EquationParams& eq);
// State from explicit fields; the stresses default to zero.
IterationState make_state(FieldSeries u, FieldSeries b, FieldSeries R_u, FieldSeries R_B, const ParamSchedule& s,
                          int q = 0);

struct StateChecks {
  double divergence = 0.0;  // largest relative spectral divergence of u, B
  double mean = 0.0;        // largest |mean| of u, B relative to max(1, max|field|)
  double asymmetry = 0.0;   // stresses
  double trace = 0.0;
};
StateChecks check_state(const IterationState& s);

// ---- one iteration step ----------------------------------------------------------------------

class IterationError : public std::runtime_error {
 public:
  IterationError(const std::string& stage, const std::string& what)
      : std::runtime_error("iterate_once[" + stage + "]: " + what), stage_(stage) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct IterateOptions {
  EquationParams eq;
  double delta = 0.0;          // δ-ball radius; 0 selects the calibrated global radius
  bool keep_fields = true;     // hold u_{q+1}, B_{q+1} in memory
  bool keep_stresses = true;   // otherwise the new stresses are recomputed on access
  bool check_identities = true;
};

struct IterationChecks {
  double r0 = 0.0, delta = 0.0;
  double reconstruction_magnetic = 0.0, reconstruction_velocity = 0.0;
  double expansion_magnetic = 0.0, expansion_velocity = 0.0;
  double potential_defect = 0.0, perturbation_divergence = 0.0;
  double aliasing_defect = 0.0, corrector_ratio = 0.0;
  double idempotence = 0.0;
  double stress_asymmetry = 0.0, stress_trace = 0.0;
  double field_divergence = 0.0, field_mean = 0.0;
  double ledger_defect_u = 0.0, ledger_defect_B = 0.0;  // residual relative to the stress term
  ResidualReport residual;  // level q+1
  std::vector<TimeInterval> old_support, new_support;
  double collar = 0.0, collar_bound = 0.0;  // measured collar and 3l
  bool support_inclusion = true;
  std::vector<TimeInterval> theta_b_support, theta_u_support;
};

struct IterationResult {
  IterationState state;
  std::vector<LedgerRow> ledger;
  IterationChecks checks;
};

// Mollification, coefficients, perturbations and all error parts, streamed one
// time slice at a time. Uses the schedule's μ, σ, l and N_Λ mode.
IterationResult iterate_once(const IterationState& s, const IterateOptions& opt = {});

// ---- inductive report --------------------------------------------------------------------------

struct InductiveEntry {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio() const { return rhs > 0.0 ? lhs / rhs : (lhs == 0.0 ? 0.0 : INFINITY); }
};

struct InductiveReport {
  std::vector<InductiveEntry> entries;
  bool paper_mode = false;
  std::string verdict;
  std::vector<TimeInterval> old_support, new_support;
  double collar = 0.0;
  bool support_within_delta = true;  // collar ≤ δ_{q+2}^{1/2}
  bool support_within_3l = true;     // collar ≤ 3l
  double empirical_M = 0.0;          // NaN when the new state carries no perturbation log
};

// Spatial supports are taken from the L¹ profiles of u, B, R̊^u, R̊^B.
InductiveReport inductive_report(const IterationState& old_state, const IterationState& new_state, double M);

// C¹_{t,x} surrogate of a series: spectral C¹ in x, the time stencil in t.
double series_c1_tx(const FieldSeries& f);

}  // namespace hallci

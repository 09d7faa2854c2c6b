#pragma once

#include <array>
#include <vector>

#include "hallci/direction_geometry.hpp"
#include "hallci/mikado_blocks.hpp"
#include "hallci/torus_field.hpp"

namespace hallci {

// ---- temporal supports and cutoffs ----------------------------------------------

struct TimeInterval {
  double a = 0.0;
  double b = 0.0;
};

// Relative threshold on the spatial L¹ norm that marks a time node as support.
inline constexpr double kSupportThreshold = 1e-12;

// Nodes with profile[j] > rel·max_j profile[j].
std::vector<bool> support_nodes(const std::vector<double>& profile, double rel = kSupportThreshold);
// Contiguous runs of support nodes as closed intervals [t_first, t_last].
std::vector<TimeInterval> support_intervals(const std::vector<bool>& nodes, const GridSpec& grid);
std::vector<TimeInterval> support_intervals(const std::vector<double>& profile, const GridSpec& grid,
                                            double rel = kSupportThreshold);
std::vector<TimeInterval> merge_intervals(std::vector<TimeInterval> a, const std::vector<TimeInterval>& b);
double distance_to(const std::vector<TimeInterval>& set, double t);  // +inf for an empty set
// Largest distance from a support node of `inner` to the set `outer` (0 if `inner` is empty).
double collar_width(const std::vector<bool>& inner, const std::vector<TimeInterval>& outer, const GridSpec& grid);

// θ = 1 on the intervals, S(1 − dist/l) on the l-collar and 0 beyond, with
// S the quintic smoothstep.
class TemporalCutoff {
 public:
  TemporalCutoff() = default;  // θ ≡ 0
  TemporalCutoff(std::vector<TimeInterval> support, double l);

  double operator()(double t) const;
  double derivative(double t) const;
  const std::vector<TimeInterval>& support() const { return support_; }
  double l() const { return l_; }
  bool empty() const { return support_.empty(); }

 private:
  std::vector<TimeInterval> support_;
  double l_ = 0.0;
};

// Throws when l does not exceed the time spacing dt (dt = 0 skips the check).
TemporalCutoff temporal_cutoff(const std::vector<TimeInterval>& support, double l, double dt);

// ---- coefficients -------------------------------------------------------------------

// Coefficients of one family at one time: a_(k) = θ ρ^{1/2} γ_k(Id − ρ⁻¹S)
// with ρ = χ(S). Indexed by the direction index inside the family.
struct CoefficientSlice {
  int family = 1;
  double theta = 0.0;
  TorusField rho;
  std::array<TorusField, 6> a;
};

// Throws std::domain_error when Id − ρ⁻¹S leaves the δ-ball or a γ²_k is not
// positive.
CoefficientSlice coefficient_slice(const TorusField& s, double theta, const AmplitudeSpec& amp, int family);

// Σ_k a²_(k) k⊗k as a symmetric tensor.
TorusField frame_sum(const CoefficientSlice& c);
// max|Σ a²k⊗k − (θ²ρ Id − θ²S)| relative to max|θ²ρ Id − θ²S|.
double reconstruction_defect(const CoefficientSlice& c, const TorusField& s);

// Space-time coefficient set of one family.
struct CoefficientSet {
  int family = 1;
  TemporalCutoff theta;
  TorusField source;  // S: R̊^B_l for the magnetic family, R̊^u_l − G^B for the velocity family
  TorusField rho;
  std::array<TorusField, 6> a;

  CoefficientSlice slice(int j) const;
};

CoefficientSet magnetic_coefficients(const TorusField& r_b_l, const TemporalCutoff& theta_b, const AmplitudeSpec& amp);
CoefficientSet velocity_coefficients(const TorusField& r_u_l, const TorusField& g_b, const TemporalCutoff& theta_u,
                                     const AmplitudeSpec& amp);
// G^B = Σ_{k∈Λ₂} a²_(k) k⊗k; throws for a velocity coefficient set.
TorusField interaction_tensor(const CoefficientSet& magnetic);
// Largest reconstruction defect over the time slices.
double reconstruction_defect(const CoefficientSet& c);

// ---- blocks and perturbations -----------------------------------------------------------

struct BlockSet {
  ShiftPlan plan;
  std::vector<MikadoBlock> blocks;  // indexed by direction_id
  const MikadoBlock& block(int family, int index) const { return blocks.at((family - 1) * 6 + index); }
  int n_x() const { return blocks.front().n_x(); }
};

BlockSet build_blocks(double mu, int sigma, NLambdaMode mode, int n_x);

// One time slice of a perturbation. total = div(potential) spectrally, so it
// is exactly divergence-free; corrector = total − principal.
struct PerturbationSlice {
  TorusField principal;  // Σ a_(k) W_(k)
  TorusField corrector;
  TorusField total;
  TorusField potential;  // Σ a_(k) Ω_(k), skew
};

PerturbationSlice assemble_slice(const CoefficientSlice& c, const BlockSet& blocks);

struct Perturbation {
  TorusField principal, corrector, total, potential;
};
Perturbation assemble(const CoefficientSet& c, const BlockSet& blocks);

// Σ_k Ω_(k)∇a_(k) with the closed-form Ω and spectral ∇a, contracted as
// (∇a:Ω)^i = Ω^{iℓ}∂_ℓ a.
TorusField closed_form_corrector(const CoefficientSlice& c, const BlockSet& blocks);

struct PerturbationChecks {
  double potential_defect = 0.0;     // ‖total − div(potential)‖ / ‖total‖
  double divergence = 0.0;           // relative spectral divergence of total
  double aliasing_defect = 0.0;      // ‖corrector − closed_form_corrector‖ / ‖principal‖ (diagnostic)
  double corrector_ratio = 0.0;      // ‖closed_form_corrector‖_{L²} / ‖principal‖_{L²}
};
PerturbationChecks check_perturbation(const PerturbationSlice& p, const CoefficientSlice& c, const BlockSet& blocks);

// Σ_k a²_(k) P≠0(W_(k)⊗W_(k)), with P≠0 removing the exact grid mean of φ².
TorusField self_interaction(const CoefficientSlice& c, const BlockSet& blocks);
// Σ_{k≠k′} a_(k) a_(k′) W_(k)⊗W_(k′).
TorusField pair_interaction(const CoefficientSlice& c, const BlockSet& blocks);

// d^p⊗d^p + S_B − [θ²ρ Id + Σ a²P≠0(W⊗W) + Σ_{k≠k′} a a′ W⊗W′], relative to max|d^p⊗d^p|.
double magnetic_expansion_defect(const TorusField& d_p, const TorusField& r_b_l, const CoefficientSlice& mag,
                                 const BlockSet& blocks);
// w^p⊗w^p − d^p⊗d^p + R̊^u_l − [θ_u²ρ_u Id + (Σ_{Λ₁} − Σ_{Λ₂})(P≠0 + pair terms)], relative
// to the largest product.
double velocity_expansion_defect(const TorusField& w_p, const TorusField& d_p, const TorusField& r_u_l,
                                 const CoefficientSlice& vel, const CoefficientSlice& mag, const BlockSet& blocks);

// ---- decorrelation ------------------------------------------------------------------

struct DecorrelationResult {
  double p = 2.0;
  std::vector<int> sigmas;
  std::vector<double> differences;  // |‖aφ_σ‖_p − ‖a‖_p‖φ_σ‖_p| with normalized measure
  double exponent = 0.0;            // −inf when every difference is at roundoff level
  bool exact = false;
};

// Block profile of direction `direction_id` at per-family N_Λ and scale mu,
// sampled on the grid of the stationary scalar field a.
DecorrelationResult decorrelation_check(const TorusField& a, const std::vector<int>& sigmas, double p,
                                       double mu = 2.0, int direction_id = 4);

}  // namespace hallci

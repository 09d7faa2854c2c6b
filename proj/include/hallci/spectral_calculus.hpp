#pragma once

#include <functional>
#include <vector>

#include "hallci/fft.hpp"
#include "hallci/field_series.hpp"
#include "hallci/torus_field.hpp"

namespace hallci {

// Fourier coefficients of every component of one time slice. Component c
// occupies plane(c), laid out like Fft2 ([k2][k1], k1 in [0, n/2]). All
// derivatives use ∇ = (∂₁, ∂₂, 0).
class Spectrum {
 public:
  Spectrum() = default;
  Spectrum(int n, int ncomp);

  int n() const { return n_; }
  int ncomp() const { return ncomp_; }
  std::size_t plane_size() const { return plane_; }
  cplx* comp(int c) { return data_.data() + static_cast<std::size_t>(c) * plane_; }
  const cplx* comp(int c) const { return data_.data() + static_cast<std::size_t>(c) * plane_; }

  Spectrum& operator+=(const Spectrum& o);
  Spectrum& operator-=(const Spectrum& o);
  Spectrum& operator*=(double s);

 private:
  int n_ = 0;
  int ncomp_ = 0;
  std::size_t plane_ = 0;
  std::vector<cplx> data_;
};

// Transforms slice j. Symmetric and skew tensors transform only their upper
// triangle and mirror it.
Spectrum to_spectrum(const TorusField& f, int j = 0);
// Stationary field from coefficients; the symmetry tag selects which entries
// are transformed back (the rest are mirrored).
TorusField to_field(const Spectrum& s, Rank rank, Symmetry sym = Symmetry::none);

struct MultiplierSymbol {
  enum class Kind { fractional_laplacian, inverse_laplacian, zero_mean_projection, smoothed_inverse_gradient };
  Kind kind = Kind::zero_mean_projection;
  double alpha = 0.0;

  static MultiplierSymbol fractional_laplacian(double alpha);
  static MultiplierSymbol inverse_laplacian();
  static MultiplierSymbol zero_mean_projection();
  static MultiplierSymbol smoothed_inverse_gradient();
  double operator()(double kk) const;  // kk = |κ|²
};

namespace spec {
Spectrum gradient(const Spectrum& s);            // scalar -> vector
Spectrum divergence(const Spectrum& v);          // vector -> scalar
Spectrum curl(const Spectrum& v);                // vector -> vector
Spectrum tensor_divergence(const Spectrum& m);   // (div M)^k = ∂_ℓ M^{kℓ}
Spectrum helmholtz(const Spectrum& v);           // f − ∇Δ⁻¹ div f
Spectrum inverse_divergence(const Spectrum& v);  // vector -> symmetric traceless tensor
Spectrum inverse_curl(const Spectrum& v);        // (−Δ)⁻¹ ∇×, no precondition check
Spectrum multiplier(const Spectrum& s, const MultiplierSymbol& m);
// ‖div v‖ / ‖|∇| v‖ in ℓ² over coefficients (0 for v with no nonzero modes).
double relative_divergence(const Spectrum& v);
}  // namespace spec

enum class DiffOp { gradient, divergence, curl, tensor_divergence, curl_of_tensor_divergence };

// Applies a slice operator to every time slice of f.
TorusField map_slices(const TorusField& f, Rank out_rank, Symmetry out_sym,
                      const std::function<TorusField(const TorusField&)>& op);

TorusField differential(const TorusField& f, DiffOp op);
TorusField apply_multiplier(const TorusField& f, const MultiplierSymbol& m);
TorusField helmholtz_project(const TorusField& v);
TorusField inverse_divergence(const TorusField& v);
// Tolerance on ‖div f‖/‖|∇|f‖ accepted by inverse_curl.
inline constexpr double kInverseCurlDivTol = 1e-8;
TorusField inverse_curl(const TorusField& f);
TorusField zero_mean(const TorusField& f);

// ---- mollification --------------------------------------------------------

enum class MollifyAxes { space, time, both };

struct MollifierSpec {
  double l = 0.0;
  MollifyAxes axes = MollifyAxes::both;
};

// Standard bump exp(−1/(1−r²)) on r < 1, 0 otherwise.
double bump(double r);

// Discrete time weights w_i, i = −m..m, for a kernel of radius l sampled at
// spacing dt and normalized to unit sum.
std::vector<double> time_kernel(double l, double dt);

// Space convolution uses the periodic 2D radial bump of radius l normalized to
// unit discrete mass; time convolution extends the field by its boundary
// values.
TorusField mollify(const TorusField& f, const MollifierSpec& spec);
TorusField mollify_space_slice(const TorusField& slice, double l);

// ---- streaming variants ---------------------------------------------------

FieldSeries series_map(const FieldSeries& in, Rank out_rank, Symmetry out_sym,
                       std::function<TorusField(const TorusField&)> op);
FieldSeries series_mollify(const FieldSeries& in, double l, std::size_t cache_slices = 8);
FieldSeries series_time_derivative(const FieldSeries& in);

}  // namespace hallci

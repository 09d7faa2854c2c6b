#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace hallci {

struct GridSpec {
  int n_x = 16;
  int n_t = 1;

  double h() const;
  double dt() const;  // 0 for a stationary grid
  double x(int i) const { return h() * i; }
  double t(int j) const { return n_t > 1 ? j * dt() : 0.0; }
  std::size_t plane() const { return static_cast<std::size_t>(n_x) * n_x; }
  GridSpec spatial() const { return GridSpec{n_x, 1}; }
  bool operator==(const GridSpec&) const = default;
};

GridSpec make_grid(int n_x, int n_t);

enum class Rank { scalar, vector3, tensor3x3 };
enum class Symmetry { none, symmetric, skew, symmetric_traceless };

int components(Rank r);
std::string to_string(Rank r);
std::string to_string(Symmetry s);
Rank rank_from_string(const std::string& s);
Symmetry symmetry_from_string(const std::string& s);

// Tensor component index for row a, column b (0-based).
constexpr int tc(int a, int b) { return 3 * a + b; }

// Samples are laid out time-major, then component-major, then row-major in x
// with x1 fastest: index = ((j * ncomp + c) * n_x + i2) * n_x + i1.
class TorusField {
 public:
  TorusField() = default;
  TorusField(const GridSpec& grid, Rank rank, Symmetry sym = Symmetry::none);

  const GridSpec& grid() const { return grid_; }
  Rank rank() const { return rank_; }
  Symmetry symmetry() const { return sym_; }
  void set_symmetry(Symmetry s) { sym_ = s; }
  int ncomp() const { return components(rank_); }
  bool empty() const { return samples_.empty(); }

  std::size_t size() const { return samples_.size(); }
  std::vector<double>& samples() { return samples_; }
  const std::vector<double>& samples() const { return samples_; }

  double* plane(int j, int c) { return samples_.data() + offset(j, c); }
  const double* plane(int j, int c) const { return samples_.data() + offset(j, c); }
  double& at(int j, int c, int i1, int i2) {
    return samples_[offset(j, c) + static_cast<std::size_t>(i2) * grid_.n_x + i1];
  }
  double at(int j, int c, int i1, int i2) const {
    return samples_[offset(j, c) + static_cast<std::size_t>(i2) * grid_.n_x + i1];
  }

  // Stationary copy of time slice j.
  TorusField slice(int j) const;
  void assign_slice(int j, const TorusField& s);
  static TorusField from_slices(const std::vector<TorusField>& slices, int n_t);

 private:
  std::size_t offset(int j, int c) const {
    return (static_cast<std::size_t>(j) * ncomp() + c) * grid_.plane();
  }
  GridSpec grid_{};
  Rank rank_ = Rank::scalar;
  Symmetry sym_ = Symmetry::none;
  std::vector<double> samples_;
};

// Pointwise generator: writes components(rank) values for (t, x1, x2).
using Generator = std::function<void(double t, double x1, double x2, double* out)>;

TorusField sample(const GridSpec& grid, Rank rank, const Generator& gen);

// ---- pointwise algebra ----------------------------------------------------

TorusField operator+(const TorusField& a, const TorusField& b);
TorusField operator-(const TorusField& a, const TorusField& b);
TorusField operator*(double s, const TorusField& a);
void axpy(double s, const TorusField& x, TorusField& y);  // y += s x
TorusField component(const TorusField& f, int c);
TorusField stack_vector(const TorusField& a, const TorusField& b, const TorusField& c);
TorusField scalar_times(const TorusField& s, const TorusField& f);
TorusField outer(const TorusField& a, const TorusField& b);          // a ⊗ b
TorusField traceless_outer(const TorusField& a, const TorusField& b);  // a ⊗ b − (a·b)/3 Id
TorusField transpose(const TorusField& m);
TorusField identity_times(const TorusField& s);  // s Id
TorusField constant_tensor_times(const TorusField& s, const std::array<double, 9>& m);
TorusField dot(const TorusField& a, const TorusField& b);  // Σ a_c b_c, any rank
TorusField frobenius(const TorusField& m);
TorusField zero_like(const TorusField& f);

double max_abs(const TorusField& f);
double max_abs_diff(const TorusField& a, const TorusField& b);
double plane_mean(const double* v, std::size_t n);
std::vector<double> component_means(const TorusField& f, int j);

// Symmetry diagnostics, relative to max|M| per time slice.
double asymmetry(const TorusField& m);
double trace_defect(const TorusField& m);
double skew_defect(const TorusField& m);

// ---- norms ----------------------------------------------------------------

struct NormKind {
  enum class Kind { Lp, C0, CN, Hs, Wsp };
  Kind kind = Kind::Lp;
  double p = 2.0;
  int order = 0;    // N for C^N
  double s = 0.0;   // smoothness for H^s, W^{s,p}
  int refine = 1;   // spectral upsampling factor before L^p quadrature

  static NormKind Lp(double p, int refine = 1);
  static NormKind C0();
  static NormKind CN(int n);
  static NormKind Hs(double s);
  static NormKind Wsp(double s, double p);
  std::string label() const;
};

enum class TimeReduce { sup, l2, l1 };

// Spatial norm of slice j. Vector and tensor fields use the entrywise norm
// (Σ_c ∫|f_c|^p)^{1/p}; C⁰ is the largest entry. H^s and W^{s,p} are
// homogeneous (|∇|^s) with the mean removed.
double norm_slice(const TorusField& f, int j, const NormKind& kind);
std::vector<double> norm_profile(const TorusField& f, const NormKind& kind);
double reduce_in_time(const std::vector<double>& profile, const GridSpec& grid, TimeReduce r);
double norm(const TorusField& f, const NormKind& kind, TimeReduce r = TimeReduce::sup);

// Max over mixed derivatives of total order ≤ N: spectral in x, finite
// differences in t (report-only surrogate).
double norm_CN_tx(const TorusField& f, int n);

// ‖f(t_j)‖_{L²} from Fourier coefficients (mean included).
double l2_plancherel(const TorusField& f, int j);

// Spectral (trigonometric) interpolation of a stationary field onto a grid
// refined by an integer factor.
TorusField refine_spectral(const TorusField& f, int factor);

// ---- persistence ----------------------------------------------------------

struct SerializedField {
  std::string header;            // JSON sidecar
  std::vector<std::uint8_t> payload;  // little-endian f64
};

SerializedField serialize(const TorusField& f);
TorusField deserialize(const std::string& header, const std::vector<std::uint8_t>& payload);
void write_snapshot(const TorusField& f, const std::string& path_without_ext);
TorusField read_snapshot(const std::string& path_without_ext);

}  // namespace hallci

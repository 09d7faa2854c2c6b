#pragma once

#include <complex>
#include <vector>

namespace hallci {

using cplx = std::complex<double>;

// Real-to-complex 2D transform on an n×n periodic grid. Spectral planes are
// stored row-major as [k2][k1] with k1 in [0, n/2]. Plans are built once per n
// under a lock and executed on aligned scratch buffers, so results are
// independent of the caller's buffer alignment and of the calling thread.
class Fft2 {
 public:
  static const Fft2& get(int n);

  int n() const { return n_; }
  int nh() const { return n_ / 2 + 1; }
  std::size_t spectral_size() const { return static_cast<std::size_t>(n_) * nh(); }

  // Unnormalized forward transform.
  void forward(const double* in, cplx* out) const;
  // Inverse transform including the 1/n² factor.
  void inverse(const cplx* in, double* out) const;

  // Wavenumber of storage index along either axis; the Nyquist index maps to 0.
  double kappa(int index) const { return kappa_[index]; }
  const std::vector<double>& kappa() const { return kappa_; }

  Fft2(const Fft2&) = delete;
  Fft2& operator=(const Fft2&) = delete;
  ~Fft2();

 private:
  explicit Fft2(int n);
  int n_;
  void* plan_r2c_ = nullptr;
  void* plan_c2r_ = nullptr;
  std::vector<double> kappa_;
};

}  // namespace hallci

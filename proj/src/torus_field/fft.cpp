#include "hallci/fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <map>
#include <memory>
#include <mutex>

namespace hallci {

namespace {

std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

struct Scratch {
  double* real = nullptr;
  fftw_complex* spec = nullptr;
  std::size_t real_cap = 0;
  std::size_t spec_cap = 0;
  ~Scratch() {
    if (real) fftw_free(real);
    if (spec) fftw_free(spec);
  }
  void reserve(std::size_t nr, std::size_t ns) {
    if (nr > real_cap) {
      if (real) fftw_free(real);
      real = static_cast<double*>(fftw_malloc(sizeof(double) * nr));
      real_cap = nr;
    }
    if (ns > spec_cap) {
      if (spec) fftw_free(spec);
      spec = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * ns));
      spec_cap = ns;
    }
  }
};

Scratch& scratch() {
  thread_local Scratch s;
  return s;
}

}  // namespace

const Fft2& Fft2::get(int n) {
  static std::map<int, std::unique_ptr<Fft2>> cache;
  std::lock_guard<std::mutex> lock(plan_mutex());
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, std::unique_ptr<Fft2>(new Fft2(n))).first;
  return *it->second;
}

Fft2::Fft2(int n) : n_(n), kappa_(n) {
  std::size_t nr = static_cast<std::size_t>(n) * n;
  std::size_t ns = static_cast<std::size_t>(n) * (n / 2 + 1);
  auto* r = static_cast<double*>(fftw_malloc(sizeof(double) * nr));
  auto* c = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * ns));
  plan_r2c_ = fftw_plan_dft_r2c_2d(n, n, r, c, FFTW_ESTIMATE);
  plan_c2r_ = fftw_plan_dft_c2r_2d(n, n, c, r, FFTW_ESTIMATE);
  fftw_free(r);
  fftw_free(c);
  for (int i = 0; i < n; ++i) {
    if (i < n / 2)
      kappa_[i] = i;
    else if (i == n / 2)
      kappa_[i] = 0.0;
    else
      kappa_[i] = i - n;
  }
}

Fft2::~Fft2() {
  fftw_destroy_plan(static_cast<fftw_plan>(plan_r2c_));
  fftw_destroy_plan(static_cast<fftw_plan>(plan_c2r_));
}

void Fft2::forward(const double* in, cplx* out) const {
  std::size_t nr = static_cast<std::size_t>(n_) * n_;
  Scratch& s = scratch();
  s.reserve(nr, spectral_size());
  std::memcpy(s.real, in, sizeof(double) * nr);
  fftw_execute_dft_r2c(static_cast<fftw_plan>(plan_r2c_), s.real, s.spec);
  std::memcpy(static_cast<void*>(out), s.spec, sizeof(fftw_complex) * spectral_size());
}

void Fft2::inverse(const cplx* in, double* out) const {
  std::size_t nr = static_cast<std::size_t>(n_) * n_;
  Scratch& s = scratch();
  s.reserve(nr, spectral_size());
  std::memcpy(s.spec, static_cast<const void*>(in), sizeof(fftw_complex) * spectral_size());
  fftw_execute_dft_c2r(static_cast<fftw_plan>(plan_c2r_), s.spec, s.real);
  double scale = 1.0 / static_cast<double>(nr);
  for (std::size_t i = 0; i < nr; ++i) out[i] = s.real[i] * scale;
}

}  // namespace hallci

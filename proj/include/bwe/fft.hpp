#pragma once

// Thin wrapper over FFTW. Plans are created once per (kind, size) under a
// lock and cached for the life of the process; execution uses the new-array
// interface, which is safe from any thread. FFTW_ESTIMATE keeps plans (and so
// results) identical from run to run, FFTW_UNALIGNED keeps them independent of
// buffer alignment.

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bwe/errors.hpp"

namespace bwe {

constexpr bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

constexpr std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

namespace fft_detail {

enum class Kind { forward, backward, r2c, c2r };

inline fftw_complex* as_fftw(std::complex<double>* p) { return reinterpret_cast<fftw_complex*>(p); }

inline fftw_plan cached_plan(Kind kind, std::size_t n) {
  require(n > 0, "FFT size must be positive");
  static std::mutex mutex;
  static std::map<std::pair<Kind, std::size_t>, fftw_plan> cache;
  const std::lock_guard lock(mutex);
  auto& plan = cache[{kind, n}];
  if (plan) return plan;
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  const int len = static_cast<int>(n);
  std::vector<std::complex<double>> c(n);
  std::vector<double> r(n);
  switch (kind) {
    case Kind::forward: plan = fftw_plan_dft_1d(len, as_fftw(c.data()), as_fftw(c.data()), FFTW_FORWARD, flags); break;
    case Kind::backward: plan = fftw_plan_dft_1d(len, as_fftw(c.data()), as_fftw(c.data()), FFTW_BACKWARD, flags); break;
    case Kind::r2c: plan = fftw_plan_dft_r2c_1d(len, r.data(), as_fftw(c.data()), flags); break;
    case Kind::c2r: plan = fftw_plan_dft_c2r_1d(len, as_fftw(c.data()), r.data(), flags); break;
  }
  if (!plan) throw NumericalError("FFTW could not create a plan of size " + std::to_string(n));
  return plan;
}

}  // namespace fft_detail

/// In-place complex DFT of a fixed size, X[k] = sum_n x[n] e^{-2 pi i k n / N}.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n)
      : n_(n),
        forward_(fft_detail::cached_plan(fft_detail::Kind::forward, n)),
        backward_(fft_detail::cached_plan(fft_detail::Kind::backward, n)) {}

  std::size_t size() const { return n_; }

  void forward(std::span<std::complex<double>> data) const {
    require(data.size() == n_, "FFT buffer size does not match plan");
    fftw_execute_dft(forward_, fft_detail::as_fftw(data.data()), fft_detail::as_fftw(data.data()));
  }

  /// Inverse transform, including the 1/N factor.
  void inverse(std::span<std::complex<double>> data) const {
    require(data.size() == n_, "FFT buffer size does not match plan");
    fftw_execute_dft(backward_, fft_detail::as_fftw(data.data()), fft_detail::as_fftw(data.data()));
    const double scale = 1.0 / static_cast<double>(n_);
    for (auto& v : data) v *= scale;
  }

 private:
  std::size_t n_;
  fftw_plan forward_;
  fftw_plan backward_;
};

inline void fft_inplace(std::span<std::complex<double>> data) {
  if (data.empty()) return;
  FftPlan(data.size()).forward(data);
}

inline void ifft_inplace(std::span<std::complex<double>> data) {
  if (data.empty()) return;
  FftPlan(data.size()).inverse(data);
}

/// One-sided spectrum of a real sequence: bins 0..N/2.
inline std::vector<std::complex<double>> rfft(std::span<const double> x) {
  if (x.empty()) return {};
  std::vector<double> in(x.begin(), x.end());
  std::vector<std::complex<double>> out(x.size() / 2 + 1);
  fftw_execute_dft_r2c(fft_detail::cached_plan(fft_detail::Kind::r2c, x.size()), in.data(),
                       fft_detail::as_fftw(out.data()));
  return out;
}

/// Inverse of rfft for a real sequence of length n. Imaginary parts of the DC
/// and (even n) Nyquist bins are ignored.
inline std::vector<double> irfft(std::span<const std::complex<double>> half, std::size_t n) {
  require(half.size() == n / 2 + 1, "irfft: half-spectrum size does not match length");
  if (n == 0) return {};
  std::vector<std::complex<double>> in(half.begin(), half.end());
  in[0] = in[0].real();
  if (n % 2 == 0) in[n / 2] = in[n / 2].real();
  std::vector<double> out(n);
  fftw_execute_dft_c2r(fft_detail::cached_plan(fft_detail::Kind::c2r, n), fft_detail::as_fftw(in.data()), out.data());
  const double scale = 1.0 / static_cast<double>(n);
  for (auto& v : out) v *= scale;
  return out;
}

}  // namespace bwe

#pragma once

#include <bit>
#include <map>
#include <memory>

#include "blindrx/types.hpp"

namespace blindrx {

namespace detail {

// Twiddle table exp(-2*pi*i*k/n), k < n/2, for a power-of-two n.
inline const std::vector<cplx>& twiddles(std::size_t n) {
  thread_local std::map<std::size_t, std::vector<cplx>> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<cplx> w(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k)
    w[k] = std::polar(1.0, -kTwoPi * static_cast<double>(k) / static_cast<double>(n));
  return cache.emplace(n, std::move(w)).first->second;
}

inline void fft_pow2(std::vector<cplx>& a, bool inverse) {
  const std::size_t n = a.size();
  if (n <= 1) return;
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const auto& w = twiddles(n);
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t step = n / len;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        cplx t = w[k * step];
        if (inverse) t = std::conj(t);
        const cplx u = a[i + k];
        const cplx v = a[i + k + half] * t;
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
}

// Bluestein chirp-z for arbitrary lengths.
inline void fft_bluestein(std::vector<cplx>& a, bool inverse) {
  const std::size_t n = a.size();
  const std::size_t m = std::bit_ceil(2 * n - 1);
  const double sign = inverse ? 1.0 : -1.0;
  std::vector<cplx> chirp(n);
  for (std::size_t k = 0; k < n; ++k) {
    // k^2 mod 2n keeps the argument small for large n.
    const auto k2 = static_cast<double>((k * k) % (2 * n));
    chirp[k] = std::polar(1.0, sign * kPi * k2 / static_cast<double>(n));
  }
  std::vector<cplx> x(m), y(m);
  for (std::size_t k = 0; k < n; ++k) x[k] = a[k] * chirp[k];
  y[0] = std::conj(chirp[0]);
  for (std::size_t k = 1; k < n; ++k) y[k] = y[m - k] = std::conj(chirp[k]);
  fft_pow2(x, false);
  fft_pow2(y, false);
  for (std::size_t k = 0; k < m; ++k) x[k] *= y[k];
  fft_pow2(x, true);
  const double scale = 1.0 / static_cast<double>(m);
  for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * scale * chirp[k];
}

}  // namespace detail

/// In-place unnormalized DFT of any length. The inverse transform is also
/// unnormalized; use ifft() for the 1/N-scaled inverse.
inline void fft_inplace(std::vector<cplx>& a, bool inverse = false) {
  if (a.size() <= 1) return;
  if (std::has_single_bit(a.size()))
    detail::fft_pow2(a, inverse);
  else
    detail::fft_bluestein(a, inverse);
}

inline std::vector<cplx> fft(std::span<const cplx> x) {
  std::vector<cplx> a(x.begin(), x.end());
  fft_inplace(a, false);
  return a;
}

inline std::vector<cplx> ifft(std::span<const cplx> x) {
  std::vector<cplx> a(x.begin(), x.end());
  fft_inplace(a, true);
  const double scale = a.empty() ? 1.0 : 1.0 / static_cast<double>(a.size());
  for (auto& v : a) v *= scale;
  return a;
}

/// Frequency (cycles/sample) of bin `i` in an fftshift-ordered spectrum of size n.
inline double shifted_bin_frequency(std::size_t i, std::size_t n) {
  return (static_cast<double>(i) - static_cast<double>(n / 2)) / static_cast<double>(n);
}

}  // namespace blindrx

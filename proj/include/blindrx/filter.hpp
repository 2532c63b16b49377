#pragma once

#include <algorithm>
#include <array>

#include "blindrx/types.hpp"

namespace blindrx {

/// Multiplies x[k] by exp(j(2*pi*f*k + phase)). The phase is evaluated per
/// sample (no recursive accumulation), so |out[k]| = |x[k]| to rounding.
inline Signal frequency_shift(std::span<const cplx> x, double f, double phase = 0.0) {
  Signal out(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double arg = kTwoPi * f * static_cast<double>(k) + phase;
    out[k] = x[k] * cplx(std::cos(arg), std::sin(arg));
  }
  return out;
}

inline double blackman(double n, double len_minus_one) {
  const double a = kTwoPi * n / len_minus_one;
  return 0.42 - 0.5 * std::cos(a) + 0.08 * std::cos(2.0 * a);
}

/// Blackman-windowed sinc low-pass, odd length, unity DC gain. `cutoff` is
/// the one-sided cutoff in cycles/sample; cutoff >= 0.5 yields a pass-through.
inline std::vector<double> lowpass_taps(double cutoff, std::size_t num_taps) {
  if (num_taps % 2 == 0) ++num_taps;
  std::vector<double> h(num_taps, 0.0);
  const std::size_t mid = num_taps / 2;
  if (cutoff >= 0.5 || num_taps == 1) {
    h[mid] = 1.0;
    return h;
  }
  if (cutoff <= 0.0) throw Error(ErrorCode::InvalidArgument, "lowpass cutoff must be positive");
  double sum = 0.0;
  for (std::size_t n = 0; n < num_taps; ++n) {
    const double t = static_cast<double>(n) - static_cast<double>(mid);
    const double s = t == 0.0 ? 2.0 * cutoff : std::sin(kTwoPi * cutoff * t) / (kPi * t);
    h[n] = s * blackman(static_cast<double>(n), static_cast<double>(num_taps - 1));
    sum += h[n];
  }
  for (double& v : h) v /= sum;
  return h;
}

/// Zero-delay FIR filtering of an odd-length filter: out[k] = sum_j h[j] x[k + mid - j],
/// samples outside the record treated as zero.
template <typename Tap>
Signal filter_same(std::span<const cplx> x, std::span<const Tap> h) {
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  const auto len = static_cast<std::ptrdiff_t>(h.size());
  const std::ptrdiff_t mid = len / 2;
  Signal out(x.size());
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    cplx acc{};
    const std::ptrdiff_t jlo = std::max<std::ptrdiff_t>(0, k + mid - (n - 1));
    const std::ptrdiff_t jhi = std::min<std::ptrdiff_t>(len - 1, k + mid);
    for (std::ptrdiff_t j = jlo; j <= jhi; ++j) acc += h[static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(k + mid - j)];
    out[static_cast<std::size_t>(k)] = acc;
  }
  return out;
}

inline Signal lowpass(std::span<const cplx> x, double cutoff, std::size_t num_taps) {
  const auto h = lowpass_taps(cutoff, num_taps);
  return filter_same<double>(x, h);
}

/// Band-limited fractional-delay interpolation with a 32-tap Blackman-windowed
/// sinc kernel, tabulated at 1/1024-sample resolution with linear blending
/// between neighbouring phases.
class Interpolator {
 public:
  static constexpr int kHalfWidth = 16;
  static constexpr int kTaps = 2 * kHalfWidth;
  static constexpr int kPhases = 1024;

  static const Interpolator& instance() {
    static const Interpolator interp;
    return interp;
  }

  /// Value of the band-limited reconstruction of z at continuous time t
  /// (sample units). Samples outside the record count as zero.
  cplx at(std::span<const cplx> z, double t) const {
    const double fl = std::floor(t);
    const double mu = t - fl;
    const double pos = mu * kPhases;
    const auto row = std::min(static_cast<int>(pos), kPhases - 1);
    const double blend = pos - row;
    const double* a = &table_[static_cast<std::size_t>(row) * kTaps];
    const double* b = a + kTaps;
    const auto base = static_cast<std::ptrdiff_t>(fl) - kHalfWidth + 1;
    const auto n = static_cast<std::ptrdiff_t>(z.size());
    cplx acc{};
    for (int j = 0; j < kTaps; ++j) {
      const std::ptrdiff_t idx = base + j;
      if (idx < 0 || idx >= n) continue;
      const double w = a[j] + blend * (b[j] - a[j]);
      acc += w * z[static_cast<std::size_t>(idx)];
    }
    return acc;
  }

 private:
  Interpolator() : table_(static_cast<std::size_t>(kPhases + 1) * kTaps) {
    for (int p = 0; p <= kPhases; ++p) {
      const double mu = static_cast<double>(p) / kPhases;
      double sum = 0.0;
      double* r = &table_[static_cast<std::size_t>(p) * kTaps];
      for (int j = 0; j < kTaps; ++j) {
        // Distance from the interpolation point to tap j.
        const double x = mu + kHalfWidth - 1 - j;
        const double s = x == 0.0 ? 1.0 : std::sin(kPi * x) / (kPi * x);
        const double w = blackman(x + kHalfWidth, 2.0 * kHalfWidth);
        r[j] = s * w;
        sum += r[j];
      }
      for (int j = 0; j < kTaps; ++j) r[j] /= sum;
    }
  }

  std::vector<double> table_;
};

}  // namespace blindrx

#pragma once

#include <bit>
#include <optional>

#include "blindrx/fft.hpp"
#include "blindrx/filter.hpp"

namespace blindrx {

inline constexpr std::size_t kBandFftCoarse = 64;   // N1
inline constexpr std::size_t kBandFftFine = 256;    // N2
inline constexpr double kBandThresholdFactor = 2.0; // T = 2 N0
inline constexpr double kBandFilterMargin = 1.2;
inline constexpr std::size_t kFrontEndTaps = 65;
inline constexpr std::size_t kSearchPoints = 100;
inline constexpr double kCfoHalfWindow = 0.001;     // in units of 4 f0
inline constexpr double kRateWindowLow = 0.85;
inline constexpr double kRateWindowHigh = 1.15;
inline constexpr double kLowConfidenceRatio = 3.0;
inline constexpr double kRateLevelFloor = 0.05;
inline constexpr int kTimingOversample = 64;         // P
inline constexpr std::size_t kCmaTaps = 20;
inline constexpr double kCmaStep = 1e-4;
inline constexpr double kCmaDivergence = 1e3;

// Fine CFO windows searched on each side of the coarse estimate.
inline constexpr int kCfoTiles = 12;
// Occupied bandwidth over symbol rate for a typical rolloff plus PSD leakage.
inline constexpr double kOccupiedPerRate = 1.3;

struct BandEstimate {
  double center = 0.0;
  double halfwidth = 0.0;
  double b1 = 0.0;
  double b2 = 0.0;
  double rate = 0.0;  // coarse symbol rate 1/tau_c
};

struct EstimateSet {
  double f0_hat = 0.0;
  double tau_hat = 0.0;
  double t0_hat = 0.0;
  double phi0_hat = 0.0;              // genie only
  std::vector<cplx> eq_taps;          // blind: CMA taps; genie: channel impulse response
  double n0 = 0.0;                    // genie only
  BandEstimate band;
  bool low_confidence = false;
  bool no_crossing = false;
};

/// Welch PSD: 50%-overlapping Hann segments, no detrending. Scaled so that white
/// noise of per-sample variance N0 has expected bin value N0. Bins run from -1/2
/// to +1/2 cycles/sample (bin i at (i - n/2)/n).
inline std::vector<double> welch_psd(std::span<const cplx> x, std::size_t fft_size) {
  if (fft_size < 2) throw Error(ErrorCode::InvalidArgument, "fft size must be >= 2");
  if (x.size() < fft_size) throw Error(ErrorCode::SignalTooShort, "signal shorter than the Welch segment");
  std::vector<double> win(fft_size);
  double wsum = 0.0;
  for (std::size_t n = 0; n < fft_size; ++n) {
    win[n] = 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(n) / static_cast<double>(fft_size));
    wsum += win[n] * win[n];
  }
  const std::size_t step = std::max<std::size_t>(1, fft_size / 2);
  const std::size_t segments = 1 + (x.size() - fft_size) / step;
  std::vector<double> acc(fft_size, 0.0);
  std::vector<cplx> buf(fft_size);
  for (std::size_t s = 0; s < segments; ++s) {
    for (std::size_t n = 0; n < fft_size; ++n) buf[n] = x[s * step + n] * win[n];
    fft_inplace(buf);
    for (std::size_t i = 0; i < fft_size; ++i) acc[i] += std::norm(buf[i]);
  }
  std::vector<double> psd(fft_size);
  const double scale = 1.0 / (wsum * static_cast<double>(segments));
  for (std::size_t i = 0; i < fft_size; ++i) psd[i] = acc[(i + fft_size - fft_size / 2) % fft_size] * scale;
  return psd;
}

namespace detail {

inline double median(std::vector<double> v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double hi = *mid;
  return 0.5 * (hi + *std::max_element(v.begin(), mid));
}

struct BinRun {
  std::size_t first = 0;
  std::size_t last = 0;
};

// Largest run of bins above the threshold, single-bin gaps bridged.
inline std::optional<BinRun> occupied_run(std::span<const double> psd, double threshold) {
  std::vector<BinRun> runs;
  for (std::size_t i = 0; i < psd.size(); ++i) {
    if (!(psd[i] > threshold)) continue;
    if (!runs.empty() && i - runs.back().last <= 2)
      runs.back().last = i;
    else
      runs.push_back({i, i});
  }
  if (runs.empty()) return std::nullopt;
  return *std::max_element(runs.begin(), runs.end(), [](const BinRun& a, const BinRun& b) {
    return a.last - a.first < b.last - b.first;
  });
}

struct StageResult {
  double b1;
  double b2;
  double n0;
};

inline StageResult band_stage(std::span<const cplx> x, std::size_t fft_size, std::optional<double> n0) {
  const auto psd = welch_psd(x, fft_size);
  const double noise = n0 ? *n0 : median(psd);
  const double peak = *std::max_element(psd.begin(), psd.end());
  const double threshold = std::max(kBandThresholdFactor * noise, 1e-12 * peak);
  const auto run = peak > 0.0 ? occupied_run(psd, threshold) : std::nullopt;
  if (!run) throw Error(ErrorCode::NoBandDetected, "no PSD bin above threshold");
  const double half_bin = 0.5 / static_cast<double>(fft_size);
  return {shifted_bin_frequency(run->first, fft_size) - half_bin,
          shifted_bin_frequency(run->last, fft_size) + half_bin, noise};
}

// Full width at which a PSD falls to halfway between `noise` and its median
// level over [lo, hi] (cycles/sample); outermost crossings, linearly interpolated.
inline double half_power_width(std::span<const double> psd, double noise, double lo, double hi) {
  const std::size_t n = psd.size();
  std::vector<double> inband;
  for (std::size_t k = 0; k < n; ++k) {
    const double f = shifted_bin_frequency(k, n);
    if (f >= lo && f <= hi) inband.push_back(psd[k]);
  }
  if (inband.empty()) return 0.0;
  const double half = noise + 0.5 * (median(inband) - noise);
  std::ptrdiff_t first = -1, last = -1;
  for (std::size_t k = 0; k < n; ++k) {
    if (!(psd[k] > half)) continue;
    if (first < 0) first = static_cast<std::ptrdiff_t>(k);
    last = static_cast<std::ptrdiff_t>(k);
  }
  if (first < 0) return 0.0;
  auto edge = [&](std::ptrdiff_t k, std::ptrdiff_t out) {
    if (out < 0 || out >= static_cast<std::ptrdiff_t>(n)) return static_cast<double>(k);
    const double a = psd[static_cast<std::size_t>(k)];
    const double b = psd[static_cast<std::size_t>(out)];
    return static_cast<double>(k) + static_cast<double>(out - k) * (a - half) / (a - b);
  };
  return (edge(last, last + 1) - edge(first, first - 1)) / static_cast<double>(n);
}

}  // namespace detail

struct BandSegmentation {
  BandEstimate band;
  Signal signal;  // shifted by -center and low-pass filtered to the band
};

/// Shifts the band at `center` to DC and low-pass filters it with cutoff
/// 1.2 * halfwidth (65-tap windowed sinc).
inline Signal front_end(std::span<const cplx> y, double center, double halfwidth) {
  const auto shifted = frequency_shift(y, -center);
  return lowpass(shifted, kBandFilterMargin * halfwidth, kFrontEndTaps);
}

/// Two-stage band segmentation (64- then 256-bin Welch PSD). The noise floor is
/// either supplied or taken as the median stage-1 bin, and is reused for stage 2.
inline BandSegmentation band_segment(std::span<const cplx> x, std::optional<double> n0 = std::nullopt) {
  require_signal(x, "band_segment");
  if (x.size() < kBandFftFine) throw Error(ErrorCode::SignalTooShort, "band segmentation needs >= 256 samples");
  if (n0 && !(*n0 >= 0.0)) throw Error(ErrorCode::InvalidArgument, "N0 must be non-negative");

  const auto s1 = detail::band_stage(x, kBandFftCoarse, n0);
  const double c1 = 0.5 * (s1.b1 + s1.b2);
  const double h1 = 0.5 * (s1.b2 - s1.b1);
  const auto narrowed = front_end(x, c1, h1);

  const auto s2 = detail::band_stage(narrowed, kBandFftFine, s1.n0);
  BandEstimate b;
  b.b1 = c1 + s2.b1;
  b.b2 = c1 + s2.b2;
  b.center = 0.5 * (b.b1 + b.b2);
  b.halfwidth = 0.5 * (b.b2 - b.b1);

  // Coarse symbol rate: geometric mean of the rolloff-corrected occupied width
  // and the half-power width (exactly 1/tau for a raised-cosine spectrum).
  const auto centred = frequency_shift(x, -b.center);
  const auto psd = welch_psd(centred, kBandFftFine);
  const double hp = detail::half_power_width(psd, s1.n0, -b.halfwidth, b.halfwidth);
  const double occupied = (b.b2 - b.b1) / kOccupiedPerRate;
  b.rate = hp > 0.0 ? std::sqrt(occupied * hp) : occupied;
  return {b, front_end(x, b.center, b.halfwidth)};
}

/// |sum_k v[k] exp(-j 2 pi a k)| for each a in the grid.
inline std::vector<double> cyclic_spectrum(std::span<const cplx> v, std::span<const double> alphas) {
  std::vector<double> out(alphas.size());
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    const cplx step = std::polar(1.0, -kTwoPi * alphas[i]);
    cplx rot(1.0, 0.0);
    cplx acc{};
    for (std::size_t k = 0; k < v.size(); ++k) {
      if ((k & 255u) == 0) rot = std::polar(1.0, -kTwoPi * alphas[i] * static_cast<double>(k));
      acc += v[k] * rot;
      rot *= step;
    }
    out[i] = std::abs(acc);
  }
  return out;
}

/// `count` equally spaced points from lo to hi, both endpoints included.
inline std::vector<double> search_grid(double lo, double hi, std::size_t count = kSearchPoints) {
  std::vector<double> g(count);
  for (std::size_t i = 0; i < count; ++i)
    g[i] = count == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  if (count > 1) g.back() = hi;
  return g;
}

struct CfoScan {
  double f0 = 0.0;
  double peak = 0.0;
};

/// Fourth-power spectral line search over 100 points in 4 f0c +- 0.001.
inline CfoScan fine_cfo_scan(std::span<const cplx> z, double f0_coarse) {
  if (z.size() < kBandFftFine) throw Error(ErrorCode::SignalTooShort, "fine CFO needs >= 256 samples");
  Signal z4(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) {
    const cplx s = z[k] * z[k];
    z4[k] = s * s;
  }
  const auto grid = search_grid(4.0 * f0_coarse - kCfoHalfWindow, 4.0 * f0_coarse + kCfoHalfWindow);
  const auto spec = cyclic_spectrum(z4, grid);
  const auto best = static_cast<std::size_t>(std::max_element(spec.begin(), spec.end()) - spec.begin());
  return {grid[best] / 4.0, spec[best]};
}

inline double fine_cfo(std::span<const cplx> z, double f0_coarse) {
  return fine_cfo_scan(z, f0_coarse).f0;
}

/// Fine CFO over adjacent windows tiling f0_coarse +- (tiles + 1/2) * 0.0005.
inline double fine_cfo_acquire(std::span<const cplx> z, double f0_coarse, int tiles = kCfoTiles) {
  const double spacing = 2.0 * kCfoHalfWindow / 4.0;
  CfoScan best{};
  bool first = true;
  for (int j = -tiles; j <= tiles; ++j) {
    const auto s = fine_cfo_scan(z, f0_coarse + j * spacing);
    if (first || s.peak > best.peak) best = s;
    first = false;
  }
  return best.f0;
}

struct RateEstimate {
  double tau = 0.0;
  double peak_to_mean = 0.0;
  bool low_confidence = false;
};

namespace detail {

// Vertex offset in (-1/2, 1/2) of the parabola through three equally spaced points.
inline double parabolic_offset(double a, double b, double c) {
  const double den = a - 2.0 * b + c;
  if (!(den < 0.0)) return 0.0;
  return std::clamp(0.5 * (a - c) / den, -0.5, 0.5);
}

struct RateScan {
  double alpha;
  double peak;
  double mean;
};

// Expected self-noise level of the squared-envelope spectrum at each cyclic
// frequency: sqrt(sum_f S(f) S(f + a)) from a 256-bin PSD of z.
inline std::vector<double> envelope_noise_level(std::span<const cplx> z, std::span<const double> alphas) {
  const std::size_t n = std::min<std::size_t>(kBandFftFine, std::bit_floor(z.size()));
  const auto psd = welch_psd(z, n);
  std::vector<double> out(alphas.size());
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    const double shift = alphas[i] * static_cast<double>(n);
    const auto whole = static_cast<std::ptrdiff_t>(std::floor(shift));
    const double frac = shift - static_cast<double>(whole);
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const auto j = static_cast<std::ptrdiff_t>(k) + whole;
      const double a = j >= 0 && j < static_cast<std::ptrdiff_t>(n) ? psd[static_cast<std::size_t>(j)] : 0.0;
      const double b = j + 1 >= 0 && j + 1 < static_cast<std::ptrdiff_t>(n) ? psd[static_cast<std::size_t>(j + 1)] : 0.0;
      acc += psd[k] * (a + frac * (b - a));
    }
    out[i] = std::sqrt(std::max(acc, 0.0));
  }
  return out;
}

inline RateScan rate_scan(std::span<const cplx> z, std::span<const double> env, double rate_coarse) {
  const auto grid = search_grid(kRateWindowLow * rate_coarse, kRateWindowHigh * rate_coarse);
  std::vector<cplx> v(env.begin(), env.end());
  const auto spec = cyclic_spectrum(v, grid);
  const auto level = envelope_noise_level(z, grid);
  std::vector<double> score(spec.size());
  // The model level vanishes past the band edges while the raw magnitude
  // keeps a floor, so it is regularized by a fraction of its window peak.
  const double floor = kRateLevelFloor * *std::max_element(level.begin(), level.end());
  for (std::size_t i = 0; i < spec.size(); ++i) score[i] = spec[i] / std::max(level[i] + floor, 1e-300);
  const auto best = static_cast<std::size_t>(std::max_element(score.begin(), score.end()) - score.begin());
  double alpha = grid[best];
  if (best > 0 && best + 1 < grid.size())
    alpha += parabolic_offset(spec[best - 1], spec[best], spec[best + 1]) * (grid[1] - grid[0]);
  double mean = 0.0;
  for (double s : spec) mean += s;
  mean /= static_cast<double>(spec.size());
  return {alpha, spec[best], mean};
}

}  // namespace detail

/// Squared-envelope spectral line search over 100 points in [0.85, 1.15] * bw,
/// taking bw as the coarse symbol rate 1/tau_c. The peak is refined by
/// parabolic interpolation between neighbouring grid points.
inline RateEstimate fine_symbol_rate_scan(std::span<const cplx> z, double bw_coarse) {
  if (!(bw_coarse > 0.0) || !std::isfinite(bw_coarse))
    throw Error(ErrorCode::InvalidBandwidth, "coarse bandwidth must be positive");
  if (z.empty()) throw Error(ErrorCode::SignalTooShort, "empty signal");
  std::vector<double> env(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) env[k] = std::norm(z[k]);
  const auto s = detail::rate_scan(z, env, bw_coarse);
  RateEstimate r;
  r.tau = 1.0 / s.alpha;
  r.peak_to_mean = s.mean > 0.0 ? s.peak / s.mean : 0.0;
  r.low_confidence = r.peak_to_mean < kLowConfidenceRatio;
  return r;
}

inline double fine_symbol_rate(std::span<const cplx> z, double bw_coarse) {
  return fine_symbol_rate_scan(z, bw_coarse).tau;
}

/// Band-limited resampling of z to P samples per symbol: out[n] = z(n * tau / P).
/// Output covers the record, i.e. n * tau / P <= len(z) - 1.
inline Signal resample_to_symbol_grid(std::span<const cplx> z, double tau, int p = kTimingOversample) {
  const auto& interp = Interpolator::instance();
  const double stride = tau / p;
  const auto count = static_cast<std::size_t>(std::floor(static_cast<double>(z.size() - 1) / stride)) + 1;
  Signal out(count);
  for (std::size_t n = 0; n < count; ++n) out[n] = interp.at(z, static_cast<double>(n) * stride);
  return out;
}

struct TimingEstimate {
  double t0 = 0.0;
  bool no_crossing = false;
  std::vector<double> profile;
};

/// Gardner timing recovery at P samples per symbol. The symbol-averaged real
/// error profile falls through zero half a symbol after the symbol peaks; with
/// peaks at (i - t0) * tau the offset is t0 = -(crossing / P - 1/2) mod 1.
inline TimingEstimate gardner_timing_scan(std::span<const cplx> z, double tau_hat) {
  if (!(tau_hat >= 3.0 && tau_hat <= 20.0))
    throw Error(ErrorCode::InvalidArgument, "tau_hat must lie in [3, 20]");
  if (z.size() < 2) throw Error(ErrorCode::SignalTooShort, "timing recovery needs samples");
  constexpr int p = kTimingOversample;
  constexpr int h = p / 2;
  const auto zi = resample_to_symbol_grid(z, tau_hat, p);
  TimingEstimate est;
  est.profile.assign(p, 0.0);
  std::vector<std::size_t> counts(p, 0);
  // Only instants whose interpolation kernel lies inside the record.
  const double stride = tau_hat / p;
  const auto margin = static_cast<std::size_t>(std::ceil(Interpolator::kHalfWidth / stride));
  const std::size_t lo = h + margin;
  const std::size_t hi = zi.size() > h + margin ? zi.size() - h - margin : 0;
  for (std::size_t k = lo; k < hi; ++k) {
    const double e = ((zi[k - h] - zi[k + h]) * std::conj(zi[k])).real();
    est.profile[k % p] += e;
    ++counts[k % p];
  }
  double scale = 0.0;
  for (int j = 0; j < p; ++j) {
    if (counts[j] == 0) continue;
    est.profile[j] /= static_cast<double>(counts[j]);
    scale = std::max(scale, std::abs(est.profile[j]));
  }
  const double floor = 1e-9 * std::max(mean_power(zi), 1e-300);
  int best = -1;
  double best_drop = 0.0;
  if (scale > floor) {
    for (int j = 0; j < p; ++j) {
      const double a = est.profile[j];
      const double b = est.profile[(j + 1) % p];
      if (a > 0.0 && b <= 0.0 && a - b > best_drop) {
        best_drop = a - b;
        best = j;
      }
    }
  }
  if (best < 0) {
    est.no_crossing = true;
    est.t0 = 0.0;
    return est;
  }
  const double a = est.profile[best];
  const double b = est.profile[(best + 1) % p];
  const double crossing = (best + a / (a - b)) / p;
  est.t0 = wrap_unit(-(crossing - 0.5));
  return est;
}

inline double gardner_timing(std::span<const cplx> z, double tau_hat) {
  return gardner_timing_scan(z, tau_hat).t0;
}

struct CmaResult {
  std::vector<cplx> taps;
  Signal signal;
};

/// Applies taps as the equalizer does: out[n] = sum_i w[i] z[n - c + i] with c
/// the centre tap, so the centre-spike initialization is the identity.
inline Signal apply_equalizer(std::span<const cplx> z, std::span<const cplx> w) {
  const auto n = static_cast<std::ptrdiff_t>(z.size());
  const auto c = static_cast<std::ptrdiff_t>(w.size() / 2);
  Signal out(z.size());
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    cplx acc{};
    for (std::size_t i = 0; i < w.size(); ++i) {
      const std::ptrdiff_t idx = k - c + static_cast<std::ptrdiff_t>(i);
      if (idx >= 0 && idx < n) acc += w[i] * z[static_cast<std::size_t>(idx)];
    }
    out[static_cast<std::size_t>(k)] = acc;
  }
  return out;
}

/// Normalizes z to unit mean power; zero-power input is rejected.
inline Signal unit_power(std::span<const cplx> z) {
  const double p = mean_power(z);
  if (!(p > 0.0)) throw Error(ErrorCode::ZeroPowerSignal, "cannot normalize a zero-power signal");
  const double s = 1.0 / std::sqrt(p);
  Signal out(z.begin(), z.end());
  for (auto& v : out) v *= s;
  return out;
}

/// One pass of constant-modulus stochastic gradient descent over the
/// unit-power-normalized input, centre-spike initialization.
inline CmaResult cma_equalize(std::span<const cplx> z, double mu = kCmaStep, std::size_t num_taps = kCmaTaps) {
  if (z.size() <= 2 * num_taps) throw Error(ErrorCode::SignalTooShort, "CMA needs more than 40 samples");
  require_signal(z, "cma_equalize");
  const auto r = unit_power(z);
  std::vector<cplx> w(num_taps, cplx{});
  w[num_taps / 2] = cplx(1.0, 0.0);
  for (std::size_t m = 0; m + num_taps <= r.size(); ++m) {
    cplx g{};
    for (std::size_t i = 0; i < num_taps; ++i) g += w[i] * r[m + i];
    const cplx grad = mu * g * (std::norm(g) - 1.0);
    for (std::size_t i = 0; i < num_taps; ++i) {
      w[i] -= grad * std::conj(r[m + i]);
      if (!(std::abs(w[i]) <= kCmaDivergence))
        throw Error(ErrorCode::Divergence, "equalizer tap magnitude exceeded 1e3");
    }
  }
  auto out = apply_equalizer(r, w);
  return {std::move(w), std::move(out)};
}

/// Mean of (|g|^2 - 1)^2 over the signal.
inline double modulus_dispersion(std::span<const cplx> g) {
  double acc = 0.0;
  for (const auto& v : g) {
    const double d = std::norm(v) - 1.0;
    acc += d * d;
  }
  return g.empty() ? 0.0 : acc / static_cast<double>(g.size());
}

struct ChainResult {
  EstimateSet estimates;
  Signal signal;
};

namespace detail {

template <typename F>
auto run_stage(const char* stage, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.code(), e.what(), stage);
  }
}

}  // namespace detail

/// Fully blind estimation: band segmentation, CFO removal with a fine
/// fourth-power search, symbol rate from the squared envelope, Gardner timing
/// and CMA equalization. Errors carry the failing stage name.
inline ChainResult blind_chain(std::span<const cplx> y, std::optional<double> n0 = std::nullopt) {
  if (y.size() < kBandFftFine) throw Error(ErrorCode::SignalTooShort, "blind chain needs >= 256 samples", "input");
  ChainResult out;
  auto& est = out.estimates;
  auto seg = detail::run_stage("band_segment", [&] { return band_segment(y, n0); });
  est.band = seg.band;
  const double residual = detail::run_stage("fine_cfo", [&] { return fine_cfo_acquire(seg.signal, 0.0); });
  est.f0_hat = est.band.center + residual;
  const auto z = front_end(y, est.f0_hat, est.band.halfwidth);
  const auto rate = detail::run_stage("fine_symbol_rate", [&] {
    return fine_symbol_rate_scan(z, est.band.rate);
  });
  est.tau_hat = rate.tau;
  est.low_confidence = rate.low_confidence;
  const auto timing = detail::run_stage("gardner_timing", [&] { return gardner_timing_scan(z, est.tau_hat); });
  est.t0_hat = timing.t0;
  est.no_crossing = timing.no_crossing;
  auto cma = detail::run_stage("cma_equalize", [&] { return cma_equalize(z); });
  est.eq_taps = std::move(cma.taps);
  out.signal = std::move(cma.signal);
  return out;
}

/// Rebuilds the blind chain's output signal from its estimates.
inline Signal blind_reconstruct(std::span<const cplx> y, const EstimateSet& est) {
  const auto z = front_end(y, est.f0_hat, est.band.halfwidth);
  return apply_equalizer(unit_power(z), est.eq_taps);
}

}  // namespace blindrx

#pragma once

#include "blindrx/blindest.hpp"
#include "blindrx/datagen.hpp"

namespace blindrx {

inline constexpr double kGenieFilterMargin = 1.1;
inline constexpr std::size_t kGenieFilterTaps = 65;
inline constexpr double kPhaseLoopGain = 0.5;

struct RecoveredSymbols {
  Signal soft;
  std::vector<std::uint32_t> hard;
  Signal decoded;
};

struct PhaseLoopState {
  double e_f = 0.0;
  double alpha = kPhaseLoopGain;
};

/// Frequency-domain MMSE equalizer: Z H* / (|H|^2 + N0) with H the N-point DFT
/// of the channel impulse response (circular over the record).
inline Signal genie_equalize(std::span<const cplx> z, std::span<const cplx> channel, double n0) {
  if (z.empty()) throw Error(ErrorCode::SignalTooShort, "empty signal");
  if (!(n0 >= 0.0)) throw Error(ErrorCode::InvalidArgument, "N0 must be non-negative");
  double energy = 0.0;
  for (const auto& t : channel) energy += std::norm(t);
  if (!(energy > 0.0)) throw Error(ErrorCode::InvalidArgument, "channel has no energy");
  if (channel.size() > z.size()) throw Error(ErrorCode::SignalTooShort, "channel longer than the signal");

  std::vector<cplx> h(z.size(), cplx{});
  std::copy(channel.begin(), channel.end(), h.begin());
  fft_inplace(h);
  auto spec = fft(z);
  for (std::size_t k = 0; k < spec.size(); ++k) {
    const double den = std::norm(h[k]) + n0;
    if (den == 0.0) throw Error(ErrorCode::DivisionByZero, "channel null with N0 = 0");
    spec[k] *= std::conj(h[k]) / den;
  }
  return ifft(spec);
}

/// Low-pass cutoff used by the genie path: 1.1 (1 + beta) / (2 tau).
inline double genie_cutoff(double beta, double tau) {
  return kGenieFilterMargin * (1.0 + beta) / (2.0 * tau);
}

/// Genie front end: exact CFO and phase removal, low-pass to the known
/// occupied band, MMSE equalization with the true channel and N0.
inline ChainResult genie_chain(const TxGroundTruth& truth) {
  const auto& p = truth.params;
  require_signal(truth.y, "genie_chain");
  ChainResult out;
  auto& est = out.estimates;
  est.f0_hat = p.f0;
  est.phi0_hat = p.phi0;
  est.tau_hat = p.tau;
  est.t0_hat = p.t0;
  est.eq_taps = p.channel.taps;
  est.n0 = truth.n0;
  const double half = (1.0 + p.beta) / (2.0 * p.tau);
  est.band = {p.f0, half, p.f0 - half, p.f0 + half};
  const auto derotated = frequency_shift(truth.y, -p.f0, -p.phi0);
  const auto filtered = lowpass(derotated, genie_cutoff(p.beta, p.tau), kGenieFilterTaps);
  out.signal = genie_equalize(filtered, p.channel.taps, truth.n0);
  return out;
}

/// Symbol-rate samples of z. Conceptually z is interpolated to P samples per
/// symbol, round(((1 - t0) mod 1) * P) samples are skipped and every P-th
/// sample is kept while it lies inside the record; each instant is computed
/// directly from the symbol index so no timing drift accumulates.
inline Signal symbol_resample(std::span<const cplx> z, double tau_hat, double t0_hat) {
  if (!(tau_hat >= 3.0 && tau_hat <= 20.0))
    throw Error(ErrorCode::InvalidArgument, "tau_hat must lie in [3, 20]");
  if (!(t0_hat >= 0.0 && t0_hat < 1.0)) throw Error(ErrorCode::InvalidArgument, "t0_hat must lie in [0, 1)");
  if (z.empty()) throw Error(ErrorCode::SignalTooShort, "empty signal");
  constexpr int p = kTimingOversample;
  const double stride = tau_hat / p;
  const auto total = static_cast<long>(std::floor(static_cast<double>(z.size() - 1) / stride)) + 1;
  const long skip = std::lround(wrap_unit(1.0 - t0_hat) * p) % p;
  const long count = total > skip ? (total - skip) / p : 0;
  if (count < 1) throw Error(ErrorCode::SignalTooShort, "less than one symbol after timing offset");
  const auto& interp = Interpolator::instance();
  Signal out(static_cast<std::size_t>(count));
  for (long k = 0; k < count; ++k)
    out[static_cast<std::size_t>(k)] = interp.at(z, (static_cast<double>(skip) / p + static_cast<double>(k)) * tau_hat);
  return out;
}

inline std::uint32_t nearest_point(std::span<const cplx> points, cplx v) {
  std::uint32_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::uint32_t i = 0; i < points.size(); ++i) {
    const double d = std::norm(v - points[i]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

/// Decision-directed decoding with a first-order phase loop. The loop phase
/// starts at arg(first_symbol * conj(soft[0])) and after every decision moves
/// by alpha * arg(decided * conj(corrected)).
inline RecoveredSymbols decode_symbols(std::span<const cplx> soft, ModulationType m, cplx first_symbol,
                                       double alpha = kPhaseLoopGain) {
  if (!is_linear(m)) throw Error(ErrorCode::NonLinearModulation, "decoding needs a linear modulation");
  if (soft.empty()) throw Error(ErrorCode::SignalTooShort, "no symbols to decode");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(ErrorCode::InvalidArgument, "loop gain must lie in (0, 1]");
  const auto& points = constellation(m);
  PhaseLoopState loop{0.0, alpha};
  const cplx ref = first_symbol * std::conj(soft[0]);
  if (std::abs(ref) > 0.0) loop.e_f = std::arg(ref);

  RecoveredSymbols r;
  r.soft.assign(soft.begin(), soft.end());
  r.hard.resize(soft.size());
  r.decoded.resize(soft.size());
  for (std::size_t k = 0; k < soft.size(); ++k) {
    const cplx corrected = soft[k] * std::polar(1.0, loop.e_f);
    r.hard[k] = nearest_point(points, corrected);
    r.decoded[k] = points[r.hard[k]];
    const cplx err = r.decoded[k] * std::conj(corrected);
    if (std::abs(err) > 0.0) loop.e_f += loop.alpha * std::arg(err);
  }
  return r;
}

/// Symbol error rate over the common prefix, skipping the known first symbol.
inline double ser(std::span<const std::uint32_t> decoded, std::span<const std::uint32_t> truth) {
  const std::size_t n = std::min(decoded.size(), truth.size());
  if (n <= 1) throw Error(ErrorCode::EmptyOverlap, "fewer than two overlapping symbols");
  std::size_t errors = 0;
  for (std::size_t i = 1; i < n; ++i) errors += decoded[i] != truth[i] ? 1 : 0;
  return static_cast<double>(errors) / static_cast<double>(n - 1);
}

inline double ser(const RecoveredSymbols& decoded, const SymbolSequence& truth) {
  return ser(decoded.hard, truth.indices);
}

}  // namespace blindrx

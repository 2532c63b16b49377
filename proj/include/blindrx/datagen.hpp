#pragma once

#include <limits>

#include "blindrx/filter.hpp"
#include "blindrx/rng.hpp"
#include "blindrx/sigcore.hpp"

namespace blindrx {

// Generation constants.
inline constexpr int kUpsampleFactor = 64;      // N_up
inline constexpr int kRrcSpanSymbols = 12;
inline constexpr double kMaxFrequencyOffset = 0.01;
inline constexpr double kMinSymbolDuration = 4.0;
inline constexpr double kMaxSymbolDuration = 16.0;
inline constexpr double kMaxSnrDb = 20.0;
inline constexpr std::array<double, 3> kRolloffs = {0.15, 0.25, 0.35};
inline constexpr double kNoNoise = std::numeric_limits<double>::infinity();

/// Multipath channel as a dense impulse response: taps[d] is the gain at an
/// integer delay of d samples.
struct Channel {
  std::vector<cplx> taps{cplx(1.0, 0.0)};

  double energy() const {
    double e = 0.0;
    for (const auto& t : taps) e += std::norm(t);
    return e;
  }
};

struct TxParams {
  double f0 = 0.0;           // cycles/sample
  double phi0 = 0.0;         // radians
  double t0 = 0.0;           // fraction of a symbol, realized on the N_up grid
  double tau = 8.0;          // realized samples per symbol, N_up / decimation
  double tau_nominal = 8.0;  // drawn value before flooring
  int decimation = 8;
  double beta = 0.35;
  double snr_db = kNoNoise;  // +inf disables noise
  double sigma = 0.0;        // delay spread, samples
  Channel channel;
};

/// Generator labels for one signal. `symbols` holds the transmitted symbols
/// whose reference instants fall inside the received window, in order; the
/// first of them is received ((1 - t0) mod 1) * tau samples after sample 0.
struct TxGroundTruth {
  TxParams params;
  ModulationType modulation = ModulationType::BPSK;
  SymbolSequence symbols;
  Signal y;   // received
  Signal z1;  // faded, noise-free, no CFO
  Signal z2;  // clean transmitted waveform at the receive instants
  double n0 = 0.0;
};

enum class SnrMode { Continuous, Discrete };

struct DatasetSpec {
  std::size_t count = 1;
  std::size_t n_r = 1024;
  SnrMode snr_mode = SnrMode::Discrete;
  std::vector<double> snr_levels = {0.0, 5.0, 10.0, 15.0, 20.0};
  std::uint64_t seed = 0;
  std::vector<ModulationType> modulations{kAllModulations.begin(), kAllModulations.end()};

  void validate() const {
    if (count < 1) throw Error(ErrorCode::ConfigError, "count must be >= 1");
    if (n_r < 128) throw Error(ErrorCode::ConfigError, "N_r must be >= 128");
    if (modulations.empty()) throw Error(ErrorCode::ConfigError, "empty modulation subset");
    if (snr_mode == SnrMode::Discrete && snr_levels.empty())
      throw Error(ErrorCode::ConfigError, "discrete SNR mode needs at least one level");
  }
};

// Sub-stream tags for per-signal seeding.
enum class Stream : std::uint64_t { Params = 1, Fading = 2, Data = 3, Noise = 4 };

inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index, Stream s) {
  return derive_seed(seed, index, static_cast<std::uint64_t>(s));
}

/// Decimation factor floor(N_up / tau), kept within the realizable range.
inline int decimation_for(double tau_nominal) {
  const int d = static_cast<int>(std::floor(kUpsampleFactor / tau_nominal));
  return std::max(d, 1);
}

/// Three Rayleigh/uniform-phase taps at delays {0, round(sigma/2), round(sigma)},
/// colliding delays summed, energy normalized to one. The global phase is
/// referenced to the first tap (made real-positive) since phi0 already models
/// an arbitrary carrier phase; a zero spread therefore gives exactly [1].
inline Channel build_fading(double sigma, std::uint64_t rng_seed) {
  if (!(sigma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "delay spread must be >= 0");
  CounterRng rng(rng_seed);
  const std::array<long, 3> delays = {0, std::lround(sigma / 2.0), std::lround(sigma)};
  Channel ch;
  ch.taps.assign(static_cast<std::size_t>(delays[2] + 1), cplx{});
  for (long d : delays) {
    const double mag = std::sqrt(-std::log(1.0 - rng.uniform()));  // Rayleigh, E|h|^2 = 1
    const double ph = rng.uniform(0.0, kTwoPi);
    ch.taps[static_cast<std::size_t>(d)] += std::polar(mag, ph);
  }
  double e = ch.energy();
  if (e <= 0.0) {
    ch.taps.assign(1, cplx(1.0, 0.0));
    return ch;
  }
  const cplx ref = ch.taps[0];
  const cplx rot = std::abs(ref) > 0.0 ? std::conj(ref) / std::abs(ref) : cplx(1.0, 0.0);
  const double s = 1.0 / std::sqrt(e);
  for (auto& t : ch.taps) t *= rot * s;
  ch.taps[0] = cplx(std::abs(ch.taps[0]), 0.0);
  if (ch.taps.size() == 1) ch.taps[0] = cplx(1.0, 0.0);
  return ch;
}

struct SampledSignal {
  TxParams params;
  ModulationType modulation;
};

/// Draws every generation parameter independently and uniformly from its range.
inline SampledSignal sample_params(std::uint64_t rng_seed, const DatasetSpec& spec) {
  spec.validate();
  CounterRng rng(rng_seed);
  SampledSignal out{};
  out.modulation = spec.modulations[rng.below(spec.modulations.size())];
  TxParams& p = out.params;
  p.f0 = rng.uniform(-kMaxFrequencyOffset, kMaxFrequencyOffset);
  p.phi0 = rng.uniform(0.0, kTwoPi);
  const double t0 = rng.uniform();
  const long removed = std::lround(t0 * kUpsampleFactor);
  p.t0 = static_cast<double>(removed % kUpsampleFactor) / kUpsampleFactor;
  p.tau_nominal = rng.uniform(kMinSymbolDuration, kMaxSymbolDuration);
  p.decimation = decimation_for(p.tau_nominal);
  p.tau = static_cast<double>(kUpsampleFactor) / p.decimation;
  p.beta = kRolloffs[rng.below(kRolloffs.size())];
  if (spec.snr_mode == SnrMode::Continuous)
    p.snr_db = rng.uniform(0.0, kMaxSnrDb);
  else
    p.snr_db = spec.snr_levels[rng.below(spec.snr_levels.size())];
  p.sigma = rng.uniform(0.0, p.tau);
  p.channel = build_fading(p.sigma, derive_seed(rng_seed, 0, static_cast<std::uint64_t>(Stream::Fading)));
  return out;
}

struct TimingResult {
  Signal signal;
  double tau_real;
  int decimation;
  long removed;
};

/// Removes round(t0 * N_up) leading samples of a signal shaped at N_up samples
/// per symbol, then keeps every floor(N_up / tau)-th sample.
inline TimingResult apply_timing_and_rate(std::span<const cplx> shaped, double t0,
                                          double tau_nominal, std::size_t n_r) {
  if (!(t0 >= 0.0 && t0 <= 1.0)) throw Error(ErrorCode::InvalidArgument, "t0 must lie in [0,1]");
  if (!(tau_nominal > 0.0)) throw Error(ErrorCode::InvalidArgument, "tau must be positive");
  TimingResult r{};
  r.removed = std::lround(t0 * kUpsampleFactor);
  r.decimation = decimation_for(tau_nominal);
  r.tau_real = static_cast<double>(kUpsampleFactor) / r.decimation;
  for (auto i = static_cast<std::size_t>(r.removed); i < shaped.size();
       i += static_cast<std::size_t>(r.decimation))
    r.signal.push_back(shaped[i]);
  if (r.signal.size() < n_r)
    throw Error(ErrorCode::SignalTooShort, "fewer than N_r samples after timing/decimation");
  return r;
}

inline Signal apply_cfo_phase(std::span<const cplx> x, double f0, double phi0) {
  return frequency_shift(x, f0, phi0);
}

struct NoisyResult {
  Signal signal;
  double n0;
};

/// Adds circular Gaussian noise of per-sample variance N0 = P_x / 10^(snr/10).
/// An infinite SNR returns the input unchanged with N0 = 0.
inline NoisyResult add_awgn(std::span<const cplx> x, double snr_db, std::uint64_t rng_seed) {
  if (std::isinf(snr_db) && snr_db > 0) return {Signal(x.begin(), x.end()), 0.0};
  const double px = mean_power(x);
  if (!(px > 0.0)) throw Error(ErrorCode::ZeroPowerSignal, "cannot reference SNR to a zero-power signal");
  NoisyResult r{Signal(x.begin(), x.end()), px / std::pow(10.0, snr_db / 10.0)};
  CounterRng rng(rng_seed);
  for (auto& v : r.signal) v += rng.complex_normal(r.n0);
  return r;
}

/// Causal channel convolution: out[k] = sum_d taps[d] * x[k - d], zero history.
inline Signal apply_channel(std::span<const cplx> x, const Channel& ch) {
  Signal out(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    cplx acc{};
    for (std::size_t d = 0; d < ch.taps.size() && d <= k; ++d) acc += ch.taps[d] * x[k - d];
    out[k] = acc;
  }
  return out;
}

namespace detail {

// Samples kept before the window so the fading convolution sees real history.
inline constexpr std::size_t kHistorySamples = 24;
// Symbols generated before logical symbol 0; covers the RRC half-span and history.
inline constexpr std::size_t kLeadSymbols = 16;
inline constexpr std::size_t kTailSymbols = 8;

// Linear modulation upsampled by N_up and RRC-shaped; symbol j peaks at
// sample j * N_up. The pulse is scaled to unit peak so the waveform sampled
// at a symbol instant reads that symbol (plus residual ISI).
inline Signal shape_linear(std::span<const cplx> symbols, double beta) {
  auto h = rrc_taps(beta, kRrcSpanSymbols, kUpsampleFactor);
  const double peak = h[h.size() / 2];
  for (double& v : h) v /= peak;
  const auto half = static_cast<std::ptrdiff_t>(h.size() / 2);
  const auto n = static_cast<std::ptrdiff_t>(symbols.size()) * kUpsampleFactor;
  Signal out(static_cast<std::size_t>(n));
  for (std::size_t j = 0; j < symbols.size(); ++j) {
    const auto centre = static_cast<std::ptrdiff_t>(j) * kUpsampleFactor;
    const auto lo = std::max<std::ptrdiff_t>(0, centre - half);
    const auto hi = std::min<std::ptrdiff_t>(n - 1, centre + half);
    for (auto i = lo; i <= hi; ++i)
      out[static_cast<std::size_t>(i)] += symbols[j] * h[static_cast<std::size_t>(i - centre + half)];
  }
  return out;
}

}  // namespace detail

/// Runs the generation chain for fixed parameters:
/// data -> modulate (+ RRC for linear types) -> timing/rate -> z2 -> fading
/// -> z1 -> CFO/phase -> AWGN -> y, each trimmed to n_r samples.
inline TxGroundTruth synthesize(const TxParams& params, ModulationType modulation, std::size_t n_r,
                                std::uint64_t data_seed, std::uint64_t noise_seed) {
  using namespace detail;
  if (n_r < 1) throw Error(ErrorCode::InvalidArgument, "n_r must be positive");
  TxGroundTruth gt;
  gt.params = params;
  gt.modulation = modulation;

  const int dec = decimation_for(params.tau_nominal);
  gt.params.decimation = dec;
  gt.params.tau = static_cast<double>(kUpsampleFactor) / dec;
  const long removed = std::lround(params.t0 * kUpsampleFactor);

  const std::size_t span_samples =
      static_cast<std::size_t>(removed) + (n_r - 1) * static_cast<std::size_t>(dec);
  const std::size_t total_symbols =
      kLeadSymbols + span_samples / kUpsampleFactor + 1 + kTailSymbols;

  CounterRng data_rng(data_seed);
  const std::uint32_t alphabet = alphabet_size(modulation);
  std::vector<std::uint32_t> data(total_symbols);
  for (auto& d : data) d = static_cast<std::uint32_t>(data_rng.below(alphabet));

  Signal shaped;
  std::vector<cplx> values(total_symbols);
  if (is_linear(modulation)) {
    const auto seq = modulate_linear(modulation, data);
    values = seq.values;
    shaped = shape_linear(values, params.beta);
  } else {
    std::vector<std::uint8_t> bits(data.begin(), data.end());
    for (std::size_t i = 0; i < total_symbols; ++i) values[i] = cplx(bits[i] ? 1.0 : -1.0, 0.0);
    shaped = modulation == ModulationType::GMSK ? modulate_gmsk(bits, kUpsampleFactor)
                                                : modulate_cpfsk(bits, kUpsampleFactor);
  }

  // Start early enough that the first kHistorySamples decimated samples precede
  // the window; the decimation grid is unchanged.
  const std::size_t start = kLeadSymbols * kUpsampleFactor - kHistorySamples * static_cast<std::size_t>(dec);
  const auto timed = apply_timing_and_rate(std::span<const cplx>(shaped).subspan(start), params.t0,
                                           params.tau_nominal, n_r + kHistorySamples);
  const auto& clean = timed.signal;

  const auto faded_full = apply_channel(clean, params.channel);
  gt.z2.assign(clean.begin() + kHistorySamples, clean.begin() + kHistorySamples + static_cast<std::ptrdiff_t>(n_r));
  gt.z1.assign(faded_full.begin() + kHistorySamples,
               faded_full.begin() + kHistorySamples + static_cast<std::ptrdiff_t>(n_r));

  const auto rotated = apply_cfo_phase(gt.z1, params.f0, params.phi0);
  auto noisy = add_awgn(rotated, params.snr_db, noise_seed);
  gt.y = std::move(noisy.signal);
  gt.n0 = noisy.n0;

  // Logical symbol i (data index i + kLeadSymbols) is referenced at receive
  // time (i * N_up - removed) / dec samples.
  std::vector<std::uint32_t> vis_idx;
  std::vector<cplx> vis_val;
  const auto limit = static_cast<long>((n_r - 1) * static_cast<std::size_t>(dec));
  for (long i = (removed + kUpsampleFactor - 1) / kUpsampleFactor;; ++i) {
    const long pos = i * kUpsampleFactor - removed;
    if (pos > limit) break;
    const auto j = static_cast<std::size_t>(i) + kLeadSymbols;
    vis_idx.push_back(data[j]);
    vis_val.push_back(values[j]);
  }
  gt.symbols.indices = std::move(vis_idx);
  gt.symbols.values = std::move(vis_val);
  return gt;
}

/// One dataset record; every random draw is keyed by (spec.seed, index).
inline TxGroundTruth generate_one(const DatasetSpec& spec, std::uint64_t index) {
  spec.validate();
  const auto s = sample_params(stream_seed(spec.seed, index, Stream::Params), spec);
  return synthesize(s.params, s.modulation, spec.n_r, stream_seed(spec.seed, index, Stream::Data),
                    stream_seed(spec.seed, index, Stream::Noise));
}

}  // namespace blindrx

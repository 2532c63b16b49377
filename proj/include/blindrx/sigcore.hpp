#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>

#include "blindrx/types.hpp"

namespace blindrx {

enum class ModulationType : std::uint8_t {
  OOK,
  ASK4,
  ASK8,
  BPSK,
  QPSK,
  PSK8,
  PSK16,
  PSK32,
  APSK16,
  APSK32,
  APSK64,
  QAM16,
  QAM32,
  QAM64,
  GMSK,
  CPFSK,
};

inline constexpr std::array<ModulationType, 16> kAllModulations = {
    ModulationType::OOK,    ModulationType::ASK4,   ModulationType::ASK8,   ModulationType::BPSK,
    ModulationType::QPSK,   ModulationType::PSK8,   ModulationType::PSK16,  ModulationType::PSK32,
    ModulationType::APSK16, ModulationType::APSK32, ModulationType::APSK64, ModulationType::QAM16,
    ModulationType::QAM32,  ModulationType::QAM64,  ModulationType::GMSK,   ModulationType::CPFSK,
};

constexpr bool is_linear(ModulationType m) {
  return m != ModulationType::GMSK && m != ModulationType::CPFSK;
}

constexpr std::string_view name(ModulationType m) {
  constexpr std::array<std::string_view, 16> names = {
      "OOK",    "ASK4",   "ASK8",   "BPSK",  "QPSK",  "PSK8",  "PSK16", "PSK32",
      "APSK16", "APSK32", "APSK64", "QAM16", "QAM32", "QAM64", "GMSK",  "CPFSK"};
  return names[static_cast<std::size_t>(m)];
}

inline std::optional<ModulationType> parse_modulation(std::string_view s) {
  for (auto m : kAllModulations) {
    const auto n = name(m);
    if (n.size() == s.size() &&
        std::equal(n.begin(), n.end(), s.begin(), [](char a, char b) {
          return a == static_cast<char>(std::toupper(static_cast<unsigned char>(b)));
        }))
      return m;
  }
  return std::nullopt;
}

// Waveform constants for the constant-envelope modulations.
inline constexpr double kGmskBandwidthTime = 0.35;
inline constexpr int kGmskSpanSymbols = 4;
inline constexpr double kCpfskIndex = 0.5;  // also used for GMSK

struct SymbolSequence {
  std::vector<std::uint32_t> indices;
  std::vector<cplx> values;

  std::size_t size() const noexcept { return indices.size(); }
  bool empty() const noexcept { return indices.empty(); }
};

namespace detail {

constexpr std::uint32_t gray(std::uint32_t p) { return p ^ (p >> 1); }

inline void normalize_power(std::vector<cplx>& pts) {
  double p = 0.0;
  for (const auto& c : pts) p += std::norm(c);
  const double s = 1.0 / std::sqrt(p / static_cast<double>(pts.size()));
  for (auto& c : pts) c *= s;
}

// Real amplitude levels 0..M-1, Gray-indexed.
inline std::vector<cplx> make_ask(std::uint32_t m) {
  std::vector<cplx> pts(m);
  for (std::uint32_t p = 0; p < m; ++p) pts[gray(p)] = cplx(static_cast<double>(p), 0.0);
  normalize_power(pts);
  return pts;
}

inline std::vector<cplx> make_psk(std::uint32_t m) {
  std::vector<cplx> pts(m);
  for (std::uint32_t p = 0; p < m; ++p)
    pts[gray(p)] = std::polar(1.0, kTwoPi * static_cast<double>(p) / static_cast<double>(m));
  return pts;
}

// Square QAM, Gray-coded independently on each axis.
inline std::vector<cplx> make_square_qam(std::uint32_t side) {
  std::uint32_t bits = 0;
  while ((1u << bits) < side) ++bits;
  std::vector<cplx> pts(side * side);
  for (std::uint32_t pi = 0; pi < side; ++pi)
    for (std::uint32_t pq = 0; pq < side; ++pq) {
      const double re = 2.0 * pi - (side - 1.0);
      const double im = 2.0 * pq - (side - 1.0);
      pts[(gray(pi) << bits) | gray(pq)] = cplx(re, im);
    }
  normalize_power(pts);
  return pts;
}

// 32-point cross: 6x6 grid without its four corners, row-major.
inline std::vector<cplx> make_cross_qam32() {
  std::vector<cplx> pts;
  pts.reserve(32);
  for (int row = 0; row < 6; ++row)
    for (int col = 0; col < 6; ++col) {
      const bool corner = (row == 0 || row == 5) && (col == 0 || col == 5);
      if (!corner) pts.emplace_back(2.0 * col - 5.0, 5.0 - 2.0 * row);
    }
  normalize_power(pts);
  return pts;
}

struct Ring {
  int points;
  double radius;
  double phase;
};

inline std::vector<cplx> make_apsk(std::initializer_list<Ring> rings) {
  std::vector<cplx> pts;
  for (const auto& r : rings)
    for (int k = 0; k < r.points; ++k)
      pts.push_back(std::polar(r.radius, r.phase + kTwoPi * k / r.points));
  normalize_power(pts);
  return pts;
}

inline std::vector<cplx> build_constellation(ModulationType m) {
  using M = ModulationType;
  switch (m) {
    case M::OOK: return make_ask(2);
    case M::ASK4: return make_ask(4);
    case M::ASK8: return make_ask(8);
    case M::BPSK: return {cplx(1.0, 0.0), cplx(-1.0, 0.0)};
    case M::QPSK: {
      std::vector<cplx> pts(4);
      const double a = 1.0 / std::sqrt(2.0);
      for (std::uint32_t i = 0; i < 4; ++i) pts[i] = cplx((i & 1u) ? -a : a, (i & 2u) ? -a : a);
      return pts;
    }
    case M::PSK8: return make_psk(8);
    case M::PSK16: return make_psk(16);
    case M::PSK32: return make_psk(32);
    // DVB-S2 / S2X ring ratios.
    case M::APSK16: return make_apsk({{4, 1.0, kPi / 4}, {12, 2.57, kPi / 12}});
    case M::APSK32:
      return make_apsk({{4, 1.0, kPi / 4}, {12, 2.53, kPi / 12}, {16, 4.30, 0.0}});
    case M::APSK64:
      return make_apsk(
          {{4, 1.0, kPi / 4}, {12, 2.4, kPi / 12}, {20, 4.3, kPi / 20}, {28, 7.0, kPi / 28}});
    case M::QAM16: return make_square_qam(4);
    case M::QAM32: return make_cross_qam32();
    case M::QAM64: return make_square_qam(8);
    case M::GMSK:
    case M::CPFSK: break;
  }
  throw Error(ErrorCode::NonLinearModulation, std::string(name(m)) + " has no constellation");
}

}  // namespace detail

/// Unit-average-power constellation of a linear modulation.
inline const std::vector<cplx>& constellation(ModulationType m) {
  if (!is_linear(m))
    throw Error(ErrorCode::NonLinearModulation, std::string(name(m)) + " has no constellation");
  static const auto table = [] {
    std::array<std::vector<cplx>, kAllModulations.size()> t;
    for (auto mod : kAllModulations)
      if (is_linear(mod)) t[static_cast<std::size_t>(mod)] = detail::build_constellation(mod);
    return t;
  }();
  return table[static_cast<std::size_t>(m)];
}

/// Number of symbol indices: constellation size for linear types, 2 (bits) otherwise.
inline std::uint32_t alphabet_size(ModulationType m) {
  return is_linear(m) ? static_cast<std::uint32_t>(constellation(m).size()) : 2u;
}

/// Root-raised-cosine taps, odd length span*sps+1 (rounded up to odd),
/// normalized to unit energy.
inline std::vector<double> rrc_taps(double beta, int span_symbols, int samples_per_symbol) {
  if (!(beta > 0.0 && beta < 1.0))
    throw Error(ErrorCode::InvalidRolloff, "rolloff must lie in (0,1)");
  if (span_symbols < 4 || samples_per_symbol < 1)
    throw Error(ErrorCode::InvalidArgument, "rrc_taps needs span >= 4 and sps >= 1");

  const int half = span_symbols * samples_per_symbol / 2;
  std::vector<double> h(static_cast<std::size_t>(2 * half + 1));
  const double sps = samples_per_symbol;
  for (int n = 0; n <= half; ++n) {
    const double t = n / sps;
    double v;
    if (n == 0) {
      v = 1.0 - beta + 4.0 * beta / kPi;
    } else if (std::abs(4.0 * beta * t - 1.0) < 1e-9) {
      v = beta / std::sqrt(2.0) *
          ((1.0 + 2.0 / kPi) * std::sin(kPi / (4.0 * beta)) +
           (1.0 - 2.0 / kPi) * std::cos(kPi / (4.0 * beta)));
    } else {
      const double x = 4.0 * beta * t;
      v = (std::sin(kPi * t * (1.0 - beta)) + x * std::cos(kPi * t * (1.0 + beta))) /
          (kPi * t * (1.0 - x * x));
    }
    h[static_cast<std::size_t>(half + n)] = v;
    h[static_cast<std::size_t>(half - n)] = v;
  }
  double energy = 0.0;
  for (double v : h) energy += v * v;
  const double s = 1.0 / std::sqrt(energy);
  for (double& v : h) v *= s;
  return h;
}

inline SymbolSequence modulate_linear(ModulationType m, std::span<const std::uint32_t> indices) {
  const auto& c = constellation(m);
  SymbolSequence out;
  out.indices.assign(indices.begin(), indices.end());
  out.values.reserve(indices.size());
  for (auto i : indices) {
    if (i >= c.size()) throw Error(ErrorCode::IndexOutOfRange, "symbol index out of range");
    out.values.push_back(c[i]);
  }
  return out;
}

namespace detail {

// Continuous-phase FM: phase advances by pi*h*freq[n]/sps per sample, where
// freq is the (possibly smoothed) +/-1 frequency trajectory.
inline Signal cpm_from_frequency(std::span<const double> freq, int sps, double h) {
  Signal out(freq.size());
  double phase = 0.0;
  const double k = kPi * h / sps;
  for (std::size_t n = 0; n < freq.size(); ++n) {
    phase += k * freq[n];
    out[n] = std::polar(1.0, phase);
  }
  return out;
}

inline std::vector<double> nrz_frequency(std::span<const std::uint8_t> bits, int sps) {
  if (bits.empty()) throw Error(ErrorCode::InvalidArgument, "empty bit sequence");
  if (sps < 1) throw Error(ErrorCode::InvalidArgument, "samples_per_symbol must be >= 1");
  std::vector<double> f;
  f.reserve(bits.size() * static_cast<std::size_t>(sps));
  for (auto b : bits)
    for (int i = 0; i < sps; ++i) f.push_back(b ? 1.0 : -1.0);
  return f;
}

}  // namespace detail

/// GMSK with BT = 0.35, h = 0.5 and a Gaussian filter spanning 4 symbols.
/// Edges are extended with the first/last bit so constant data gives a
/// constant frequency.
inline Signal modulate_gmsk(std::span<const std::uint8_t> bits, int samples_per_symbol) {
  const auto nrz = detail::nrz_frequency(bits, samples_per_symbol);
  const int sps = samples_per_symbol;
  const int half = kGmskSpanSymbols * sps / 2;
  const double sigma = std::sqrt(std::log(2.0)) / (kTwoPi * kGmskBandwidthTime);  // symbols
  std::vector<double> g(static_cast<std::size_t>(2 * half + 1));
  double sum = 0.0;
  for (int n = -half; n <= half; ++n) {
    const double t = static_cast<double>(n) / sps;
    const double v = std::exp(-t * t / (2.0 * sigma * sigma));
    g[static_cast<std::size_t>(n + half)] = v;
    sum += v;
  }
  for (double& v : g) v /= sum;

  const auto len = static_cast<std::ptrdiff_t>(nrz.size());
  std::vector<double> freq(nrz.size());
  for (std::ptrdiff_t n = 0; n < len; ++n) {
    double acc = 0.0;
    for (int j = -half; j <= half; ++j) {
      const auto idx = std::clamp<std::ptrdiff_t>(n - j, 0, len - 1);
      acc += g[static_cast<std::size_t>(j + half)] * nrz[static_cast<std::size_t>(idx)];
    }
    freq[static_cast<std::size_t>(n)] = acc;
  }
  return detail::cpm_from_frequency(freq, sps, kCpfskIndex);
}

/// Binary CPFSK with a rectangular frequency pulse and modulation index 0.5.
inline Signal modulate_cpfsk(std::span<const std::uint8_t> bits, int samples_per_symbol) {
  const auto nrz = detail::nrz_frequency(bits, samples_per_symbol);
  return detail::cpm_from_frequency(nrz, samples_per_symbol, kCpfskIndex);
}

}  // namespace blindrx

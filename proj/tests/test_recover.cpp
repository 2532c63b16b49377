#include "test_util.hpp"

using namespace blindrx;

namespace {

Signal circular_convolve(std::span<const cplx> x, std::span<const cplx> h) {
  const std::size_t n = x.size();
  Signal out(n);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t d = 0; d < h.size(); ++d) out[k] += h[d] * x[(k + n - d) % n];
  return out;
}

SymbolSequence random_symbols(ModulationType m, std::size_t n, std::uint64_t seed) {
  CounterRng rng(seed);
  const auto& c = constellation(m);
  std::vector<std::uint32_t> idx(n);
  for (auto& i : idx) i = static_cast<std::uint32_t>(rng.below(c.size()));
  // Keep the known first symbol off the origin so it carries a phase.
  while (std::abs(c[idx[0]]) < 1e-9) idx[0] = (idx[0] + 1) % static_cast<std::uint32_t>(c.size());
  return modulate_linear(m, idx);
}

Signal rotate(std::span<const cplx> x, double phase, double drift = 0.0) {
  Signal out(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) out[k] = x[k] * std::polar(1.0, phase + drift * static_cast<double>(k));
  return out;
}

}  // namespace

TEST(GenieEqualize, UnitChannelIsIdentity) {
  const auto x = testutil::random_signal(1000, 1);
  const std::vector<cplx> h = {1.0, 0.0, 0.0};
  EXPECT_LT(testutil::rms_error(genie_equalize(x, h, 0.0), x), 1e-9);
}

TEST(GenieEqualize, PureDelayIsCircularAdvance) {
  const auto x = testutil::random_signal(777, 2);
  const std::vector<cplx> h = {0.0, 1.0, 0.0};
  const auto out = genie_equalize(x, h, 0.0);
  for (std::size_t k = 0; k < x.size(); ++k) EXPECT_NEAR(std::abs(out[k] - x[(k + 1) % x.size()]), 0.0, 1e-9);
}

TEST(GenieEqualize, RoundTripThroughChannel) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto ch = build_fading(4.0, 100 + s);
    const auto x = testutil::random_signal(1024, s);
    const auto y = circular_convolve(x, ch.taps);
    EXPECT_LT(testutil::rms_error(genie_equalize(y, ch.taps, 0.0), x), 1e-6);
  }
}

TEST(GenieEqualize, ImprovesFadedSignal) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto p = testutil::clean_params(8.0, 0.0);
    p.sigma = 6.0;
    p.channel = build_fading(p.sigma, 300 + s);
    const auto gt = testutil::make_signal(ModulationType::QPSK, p, s);
    const auto eq = genie_equalize(gt.z1, p.channel.taps, 1e-4);
    EXPECT_LE(phase_invariant_loss(eq, gt.z2), phase_invariant_loss(gt.z1, gt.z2)) << s;
  }
}

TEST(GenieEqualize, SpectralNullWithoutNoise) {
  const auto x = testutil::random_signal(64, 3);
  const std::vector<cplx> h = {1.0, -1.0};
  try {
    (void)genie_equalize(x, h, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DivisionByZero);
  }
  EXPECT_NO_THROW((void)genie_equalize(x, h, 1e-3));
}

TEST(GenieChain, EstimatesEqualTruth) {
  DatasetSpec spec;
  spec.seed = 12;
  for (std::uint64_t i = 0; i < 10; ++i) {
    const auto gt = generate_one(spec, i);
    const auto r = genie_chain(gt);
    EXPECT_EQ(r.estimates.f0_hat, gt.params.f0);
    EXPECT_EQ(r.estimates.phi0_hat, gt.params.phi0);
    EXPECT_EQ(r.estimates.tau_hat, gt.params.tau);
    EXPECT_EQ(r.estimates.t0_hat, gt.params.t0);
    EXPECT_EQ(r.estimates.eq_taps, gt.params.channel.taps);
    EXPECT_EQ(r.signal.size(), gt.y.size());
  }
}

TEST(GenieChain, CleanSignalIsFilteredReference) {
  // Without noise or fading the genie output is exactly the low-passed clean
  // waveform; what remains against z2 is the filter's effect on the band.
  for (double tau : {4.0, 8.0, 16.0}) {
    auto p = testutil::clean_params(tau, 0.25);
    p.f0 = 0.006;
    p.phi0 = 2.0;
    const auto gt = testutil::make_signal(ModulationType::QPSK, p, 6);
    const auto z = genie_chain(gt).signal;
    const auto ref = lowpass(gt.z2, genie_cutoff(p.beta, p.tau), kGenieFilterTaps);
    EXPECT_LT(testutil::rms_error(z, ref), 1e-9) << tau;
    EXPECT_LT(testutil::rms_error(z, gt.z2), 0.1) << tau;
  }
}

namespace {

// Mean ISI power of the unit-peak pulse sampled at symbol spacing.
double pulse_isi(double beta) {
  double acc = 0.0;
  const double peak = testutil::rrc_value(beta, 0.0);
  for (int j = 1; j <= 6; ++j) acc += 2.0 * std::pow(testutil::rrc_value(beta, j) / peak, 2);
  return acc;
}

}  // namespace

TEST(SymbolResample, CleanSymbolsCarryPulseIsi) {
  // Samples of the transmitted waveform at the symbol instants: the symbols
  // plus the transmit pulse's own ISI (no matched filter is applied).
  for (double beta : {0.15, 0.35}) {
    for (double t0 : {0.0, 0.3125, 0.75}) {
      const auto p = testutil::clean_params(8.0, t0, beta);
      const auto gt = testutil::make_signal(ModulationType::BPSK, p, 17);
      const auto soft = symbol_resample(gt.z2, p.tau, p.t0);
      const std::size_t n = std::min(soft.size(), gt.symbols.size());
      ASSERT_GE(n + 1, gt.symbols.size());
      const std::span<const cplx> a(soft.data(), n), b(gt.symbols.values.data(), n);
      const double mse = phase_invariant_loss(a, b);
      EXPECT_NEAR(mse, pulse_isi(beta), 0.35 * pulse_isi(beta)) << beta << " " << t0;
    }
  }
}

TEST(SymbolResample, SamplesAtSymbolInstants) {
  // Non-integer tau: compare with the waveform built from the symbols.
  for (double t0 : {0.0, 0.4375}) {
    const auto p = testutil::clean_params(64.0 / 7, t0);
    const auto gt = testutil::make_signal(ModulationType::QPSK, p, 8);
    const auto soft = symbol_resample(gt.z2, p.tau, p.t0);
    const auto& s = gt.symbols.values;
    const double peak = testutil::rrc_value(p.beta, 0.0);
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 8; i + 8 < std::min(soft.size(), s.size()); ++i) {
      cplx expect{};
      for (int j = -6; j <= 6; ++j)
        expect += s[static_cast<std::size_t>(static_cast<long>(i) - j)] * testutil::rrc_value(p.beta, j) / peak;
      acc += std::norm(soft[i] - expect);
      ++n;
    }
    EXPECT_LT(std::sqrt(acc / static_cast<double>(n)), 1e-2) << t0;
  }
}

TEST(SymbolResample, ZeroOffsetStartsAtFirstSample) {
  const auto x = testutil::random_signal(512, 4);
  const auto soft = symbol_resample(x, 8.0, 0.0);
  EXPECT_NEAR(std::abs(soft[0] - x[0]), 0.0, 1e-12);
  EXPECT_NEAR(std::abs(soft[1] - x[8]), 0.0, 1e-12);
}

TEST(SymbolResample, CountMatchesSymbols) {
  for (double tau : {4.0, 64.0 / 5, 64.0 / 7, 64.0 / 11, 16.0}) {
    for (double t0 : {0.0, 0.1875, 0.5, 0.984375}) {
      const auto p = testutil::clean_params(tau, t0);
      const auto gt = testutil::make_signal(ModulationType::QPSK, p, 1);
      const auto ns = static_cast<long>(gt.symbols.size());
      const auto n = static_cast<long>(symbol_resample(gt.z2, p.tau, p.t0).size());
      // Whole symbol periods only: the last instant is dropped when the
      // record ends before a full period after it.
      const long total = static_cast<long>(std::floor(1023.0 / (p.tau / 64.0))) + 1;
      const long skip = std::lround(std::fmod(1.0 - p.t0, 1.0) * 64.0) % 64;
      EXPECT_EQ(n, (total - skip) / 64) << tau << " " << t0;
      EXPECT_TRUE(n == ns || n == ns - 1) << tau << " " << t0;
      // One step of the symbol-rate grid.
      const double step = p.tau * p.tau * (0.3 / p.tau) / 99.0;
      for (double t : {p.tau - step, p.tau + step}) {
        const auto m = static_cast<long>(symbol_resample(gt.z2, t, p.t0).size());
        EXPECT_LE(std::abs(m - n), 1) << tau << " " << t0;
        EXPECT_LE(std::abs(m - ns), 2) << tau << " " << t0;
      }
    }
  }
}

TEST(SymbolResample, PreconditionsChecked) {
  const auto x = testutil::random_signal(64, 4);
  EXPECT_THROW((void)symbol_resample(x, 2.0, 0.0), Error);
  EXPECT_THROW((void)symbol_resample(x, 8.0, 1.0), Error);
  try {
    (void)symbol_resample(testutil::random_signal(4, 4), 8.0, 0.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SignalTooShort);
  }
}

TEST(Decode, ConstantRotationAnyLinearModulation) {
  for (auto m : kAllModulations) {
    if (!is_linear(m)) continue;
    const auto truth = random_symbols(m, 200, 5);
    const auto soft = rotate(truth.values, kPi / 5);
    const auto dec = decode_symbols(soft, m, truth.values[0]);
    EXPECT_EQ(ser(dec, truth), 0.0) << name(m);
  }
}

TEST(Decode, TracksResidualFrequency) {
  const double drift = kTwoPi * 1e-4 * 8.0;
  for (auto m : {ModulationType::BPSK, ModulationType::QPSK}) {
    const auto truth = random_symbols(m, 128, 6);
    const auto dec = decode_symbols(rotate(truth.values, 0.4, drift), m, truth.values[0]);
    EXPECT_EQ(ser(dec, truth), 0.0);
  }
}

TEST(Decode, ExactPointsPassThrough) {
  const auto truth = random_symbols(ModulationType::QAM16, 64, 7);
  const auto dec = decode_symbols(truth.values, ModulationType::QAM16, truth.values[0]);
  EXPECT_EQ(dec.decoded, truth.values);
  EXPECT_EQ(dec.hard, truth.indices);
  EXPECT_EQ(dec.soft, truth.values);
}

TEST(Decode, InvariantToGlobalPhase) {
  CounterRng rng(8);
  for (auto m : {ModulationType::BPSK, ModulationType::QPSK, ModulationType::PSK8, ModulationType::QAM16}) {
    const auto truth = random_symbols(m, 300, 9);
    Signal noisy(truth.values);
    for (auto& v : noisy) v += rng.complex_normal(0.05);
    const double base = ser(decode_symbols(noisy, m, truth.values[0]), truth);
    for (int i = 0; i < 20; ++i) {
      const auto rotated = rotate(noisy, rng.uniform(0.0, kTwoPi));
      EXPECT_EQ(ser(decode_symbols(rotated, m, truth.values[0]), truth), base) << name(m);
    }
  }
}

TEST(Decode, EqualLengthsAndValidIndices) {
  const auto truth = random_symbols(ModulationType::APSK32, 50, 10);
  const auto soft = testutil::random_signal(50, 11);
  const auto dec = decode_symbols(soft, ModulationType::APSK32, truth.values[0]);
  EXPECT_EQ(dec.soft.size(), 50u);
  EXPECT_EQ(dec.hard.size(), 50u);
  EXPECT_EQ(dec.decoded.size(), 50u);
  for (auto h : dec.hard) EXPECT_LT(h, 32u);
}

TEST(Decode, NonLinearRejected) {
  const auto soft = testutil::random_signal(8, 1);
  try {
    (void)decode_symbols(soft, ModulationType::GMSK, cplx(1, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonLinearModulation);
  }
}

TEST(Ser, Examples) {
  const std::vector<std::uint32_t> a = {0, 1, 2, 3, 0, 1};
  EXPECT_EQ(ser(a, a), 0.0);
  const std::vector<std::uint32_t> b = {0, 2, 3, 0, 1, 2};
  EXPECT_EQ(ser(a, b), 1.0);

  std::vector<std::uint32_t> d(127, 0), t(128, 0);
  for (std::size_t i = 1; i <= 12; ++i) d[i * 10] = 1;
  EXPECT_DOUBLE_EQ(ser(d, t), 12.0 / 126.0);
}

TEST(Ser, SymmetricAndTruncationInvariant) {
  CounterRng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::uint32_t> a(20 + rng.below(50)), b(20 + rng.below(50));
    for (auto& v : a) v = static_cast<std::uint32_t>(rng.below(4));
    for (auto& v : b) v = static_cast<std::uint32_t>(rng.below(4));
    EXPECT_EQ(ser(a, b), ser(b, a));
    const std::size_t n = std::min(a.size(), b.size());
    const std::vector<std::uint32_t> at(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(n));
    EXPECT_EQ(ser(at, b), ser(a, b));
  }
}

TEST(Ser, EmptyOverlap) {
  const std::vector<std::uint32_t> one = {0}, many = {0, 1, 2};
  try {
    (void)ser(one, many);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyOverlap);
  }
}

#include <set>

#include "test_util.hpp"

using namespace blindrx;

TEST(Constellation, SixteenVariantsTwoNonLinear) {
  EXPECT_EQ(kAllModulations.size(), 16u);
  int linear = 0;
  for (auto m : kAllModulations) linear += is_linear(m) ? 1 : 0;
  EXPECT_EQ(linear, 14);
  EXPECT_FALSE(is_linear(ModulationType::GMSK));
  EXPECT_FALSE(is_linear(ModulationType::CPFSK));
}

TEST(Constellation, UnitAveragePower) {
  for (auto m : kAllModulations) {
    if (!is_linear(m)) continue;
    const auto& c = constellation(m);
    long double acc = 0.0L;
    for (const auto& p : c) acc += static_cast<long double>(p.real()) * p.real() + static_cast<long double>(p.imag()) * p.imag();
    EXPECT_NEAR(static_cast<double>(acc / c.size()), 1.0, 1e-12) << name(m);
  }
}

TEST(Constellation, ExpectedSizesAndDistinctPoints) {
  const std::vector<std::pair<ModulationType, std::size_t>> sizes = {
      {ModulationType::OOK, 2},     {ModulationType::ASK4, 4},    {ModulationType::ASK8, 8},
      {ModulationType::BPSK, 2},    {ModulationType::QPSK, 4},    {ModulationType::PSK8, 8},
      {ModulationType::PSK16, 16},  {ModulationType::PSK32, 32},  {ModulationType::APSK16, 16},
      {ModulationType::APSK32, 32}, {ModulationType::APSK64, 64}, {ModulationType::QAM16, 16},
      {ModulationType::QAM32, 32},  {ModulationType::QAM64, 64}};
  for (auto [m, n] : sizes) {
    const auto& c = constellation(m);
    ASSERT_EQ(c.size(), n) << name(m);
    for (std::size_t i = 0; i < c.size(); ++i)
      for (std::size_t j = i + 1; j < c.size(); ++j) EXPECT_GT(std::abs(c[i] - c[j]), 1e-6) << name(m);
  }
}

TEST(Constellation, BpskQpskPoints) {
  const auto& b = constellation(ModulationType::BPSK);
  EXPECT_EQ(b[0], cplx(1.0, 0.0));
  EXPECT_EQ(b[1], cplx(-1.0, 0.0));
  for (const auto& p : constellation(ModulationType::QPSK)) {
    EXPECT_NEAR(std::abs(p.real()), 1.0 / std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(std::abs(p.imag()), 1.0 / std::sqrt(2.0), 1e-15);
  }
}

TEST(Constellation, OokLevels) {
  const auto& c = constellation(ModulationType::OOK);
  EXPECT_EQ(c[0], cplx(0.0, 0.0));
  EXPECT_NEAR(c[1].real(), std::sqrt(2.0), 1e-15);
}

TEST(Constellation, ApskRingCounts) {
  auto rings = [](ModulationType m) {
    std::map<long, int> count;
    for (const auto& p : constellation(m)) ++count[std::lround(std::abs(p) * 1e6)];
    std::vector<int> v;
    for (auto& [r, n] : count) v.push_back(n);
    return v;
  };
  EXPECT_EQ(rings(ModulationType::APSK16), (std::vector<int>{4, 12}));
  EXPECT_EQ(rings(ModulationType::APSK32), (std::vector<int>{4, 12, 16}));
  EXPECT_EQ(rings(ModulationType::APSK64), (std::vector<int>{4, 12, 20, 28}));
}

TEST(Constellation, GrayNeighboursOnPsk8) {
  // Adjacent points on the circle differ in exactly one bit.
  const auto& c = constellation(ModulationType::PSK8);
  for (std::uint32_t i = 0; i < 8; ++i) {
    std::uint32_t nearest = 0;
    double best = 1e9;
    for (std::uint32_t j = 0; j < 8; ++j) {
      if (i == j) continue;
      const double d = std::abs(c[i] - c[j]);
      if (d < best - 1e-12) {
        best = d;
        nearest = j;
      }
    }
    EXPECT_EQ(std::popcount(i ^ nearest), 1);
  }
}

TEST(Constellation, NonLinearThrows) {
  for (auto m : {ModulationType::GMSK, ModulationType::CPFSK}) {
    try {
      (void)constellation(m);
      FAIL() << "expected NonLinearModulation";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::NonLinearModulation);
    }
  }
}

TEST(ParseModulation, CaseInsensitive) {
  EXPECT_EQ(parse_modulation("qpsk"), ModulationType::QPSK);
  EXPECT_EQ(parse_modulation("Apsk64"), ModulationType::APSK64);
  EXPECT_FALSE(parse_modulation("QPSK8").has_value());
}

TEST(RrcTaps, SymmetricOddUnitEnergyPeakAtCentre) {
  for (double beta : {0.15, 0.25, 0.35, 0.5, 0.99}) {
    for (int sps : {1, 2, 4, 7, 64}) {
      const auto h = rrc_taps(beta, 8, sps);
      ASSERT_EQ(h.size() % 2, 1u);
      double e = 0.0;
      for (double v : h) e += v * v;
      EXPECT_NEAR(e, 1.0, 1e-9);
      for (std::size_t n = 0; n < h.size(); ++n) EXPECT_EQ(h[n], h[h.size() - 1 - n]);
      const auto peak = std::max_element(h.begin(), h.end()) - h.begin();
      EXPECT_EQ(static_cast<std::size_t>(peak), h.size() / 2);
    }
  }
}

TEST(RrcTaps, SingularPointIsFinite) {
  // beta = 0.25, sps = 4: t = 1/(4 beta) = 1 symbol lands on a tap.
  for (double v : rrc_taps(0.25, 12, 4)) EXPECT_TRUE(std::isfinite(v));
  // Limit value continuity: compare against points just off the singularity.
  const auto h = rrc_taps(0.25, 12, 1000);
  const std::size_t c = h.size() / 2 + 1000;
  EXPECT_NEAR(h[c], 0.5 * (h[c - 1] + h[c + 1]), 1e-6);
}

TEST(RrcTaps, MatchesClosedForm) {
  for (double beta : {0.15, 0.25, 0.35, 0.5}) {
    for (int sps : {4, 8, 64}) {
      const auto h = rrc_taps(beta, 12, sps);
      const auto half = static_cast<int>(h.size() / 2);
      double e = 0.0;
      std::vector<double> ref(h.size());
      for (int n = -half; n <= half; ++n) {
        ref[static_cast<std::size_t>(n + half)] = testutil::rrc_value(beta, static_cast<double>(n) / sps);
        e += ref[static_cast<std::size_t>(n + half)] * ref[static_cast<std::size_t>(n + half)];
      }
      for (std::size_t i = 0; i < h.size(); ++i) EXPECT_NEAR(h[i], ref[i] / std::sqrt(e), 1e-12);
    }
  }
}

namespace {

double cascade_isi(double beta, int span, int sps) {
  const auto h = rrc_taps(beta, span, sps);
  std::vector<double> rc(2 * h.size() - 1, 0.0);
  for (std::size_t i = 0; i < h.size(); ++i)
    for (std::size_t j = 0; j < h.size(); ++j) rc[i + j] += h[i] * h[j];
  const std::size_t mid = rc.size() / 2;
  double worst = 0.0;
  for (std::size_t k = static_cast<std::size_t>(sps); k <= mid; k += static_cast<std::size_t>(sps))
    worst = std::max({worst, std::abs(rc[mid + k]), std::abs(rc[mid - k])});
  return worst / rc[mid];
}

}  // namespace

TEST(RrcTaps, CascadeIsNearlyNyquist) {
  // Matched-filter cascade sampled at the symbol rate. Truncating the pulse to
  // 12 symbols leaves about 7.6e-3 of ISI at beta = 0.25; 16 symbols is below 1e-3.
  EXPECT_LT(cascade_isi(0.25, 12, 4), 1e-2);
  EXPECT_LT(cascade_isi(0.25, 16, 4), 1e-3);
  EXPECT_LT(cascade_isi(0.35, 24, 8), 1e-3);
  EXPECT_GT(cascade_isi(0.25, 4, 4), cascade_isi(0.25, 12, 4));
}

TEST(RrcTaps, InvalidArguments) {
  for (double beta : {0.0, 1.0, -0.1, 1.5}) {
    try {
      (void)rrc_taps(beta, 8, 4);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::InvalidRolloff);
    }
  }
  EXPECT_THROW((void)rrc_taps(0.35, 3, 4), Error);
  EXPECT_THROW((void)rrc_taps(0.35, 8, 0), Error);
}

TEST(ModulateLinear, MapsIndices) {
  const std::vector<std::uint32_t> idx = {0, 1, 0};
  const auto s = modulate_linear(ModulationType::BPSK, idx);
  ASSERT_EQ(s.values.size(), 3u);
  EXPECT_EQ(s.values[0], cplx(1, 0));
  EXPECT_EQ(s.values[1], cplx(-1, 0));
  EXPECT_EQ(s.values[2], cplx(1, 0));
  EXPECT_EQ(s.indices, idx);

  const std::vector<std::uint32_t> zeros(4, 0);
  const auto q = modulate_linear(ModulationType::QPSK, zeros);
  for (const auto& v : q.values) EXPECT_EQ(v, q.values[0]);
}

TEST(ModulateLinear, Qam16Bijection) {
  std::vector<std::uint32_t> idx(16);
  for (std::uint32_t i = 0; i < 16; ++i) idx[i] = i;
  const auto s = modulate_linear(ModulationType::QAM16, idx);
  std::set<std::pair<long, long>> pts;
  for (const auto& v : s.values) pts.insert({std::lround(v.real() * 1e9), std::lround(v.imag() * 1e9)});
  EXPECT_EQ(pts.size(), 16u);
}

TEST(ModulateLinear, OutOfRangeIndex) {
  const std::vector<std::uint32_t> idx = {0, 4};
  try {
    (void)modulate_linear(ModulationType::QPSK, idx);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IndexOutOfRange);
  }
}

TEST(ModulateLinear, PureFunction) {
  CounterRng rng(99);
  std::vector<std::uint32_t> idx(500);
  for (auto& i : idx) i = static_cast<std::uint32_t>(rng.below(64));
  const auto a = modulate_linear(ModulationType::APSK64, idx);
  const auto b = modulate_linear(ModulationType::APSK64, idx);
  ASSERT_EQ(a.values.size(), b.values.size());
  EXPECT_EQ(0, std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(cplx)));
}

namespace {

std::vector<std::uint8_t> random_bits(std::size_t n, std::uint64_t seed) {
  CounterRng rng(seed);
  std::vector<std::uint8_t> b(n);
  for (auto& v : b) v = static_cast<std::uint8_t>(rng.below(2));
  return b;
}

std::vector<double> unwrapped_phase(const Signal& x) {
  std::vector<double> ph(x.size());
  double prev = std::arg(x[0]);
  ph[0] = prev;
  for (std::size_t i = 1; i < x.size(); ++i) {
    double d = std::arg(x[i]) - prev;
    while (d > kPi) d -= kTwoPi;
    while (d < -kPi) d += kTwoPi;
    ph[i] = ph[i - 1] + d;
    prev = std::arg(x[i]);
  }
  return ph;
}

}  // namespace

TEST(ConstantEnvelope, UnitModulus) {
  const auto bits = random_bits(300, 5);
  for (const auto& x : {modulate_gmsk(bits, 8), modulate_cpfsk(bits, 8), modulate_gmsk(bits, 64)})
    for (const auto& v : x) EXPECT_NEAR(std::abs(v), 1.0, 1e-9);
}

TEST(ConstantEnvelope, ZeroBitsGiveConstantFrequency) {
  const std::vector<std::uint8_t> zeros(40, 0);
  for (const auto& x : {modulate_gmsk(zeros, 8), modulate_cpfsk(zeros, 8)}) {
    const auto ph = unwrapped_phase(x);
    const double step = ph[1] - ph[0];
    EXPECT_LT(step, 0.0);  // monotone ramp
    for (std::size_t i = 1; i < ph.size(); ++i) EXPECT_NEAR(ph[i] - ph[i - 1], step, 1e-9);
  }
}

TEST(ConstantEnvelope, GmskAlternatingBitsAlternateFrequency) {
  const int sps = 8;
  std::vector<std::uint8_t> bits(32);
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = static_cast<std::uint8_t>(i % 2);
  const auto ph = unwrapped_phase(modulate_gmsk(bits, sps));
  // Numerical derivative at the centre of each bit, away from the edges.
  for (std::size_t b = 2; b + 2 < bits.size(); ++b) {
    const std::size_t c = b * sps + sps / 2;
    const double f = ph[c + 1] - ph[c - 1];
    if (bits[b]) EXPECT_GT(f, 0.0) << b;
    else EXPECT_LT(f, 0.0) << b;
  }
}

TEST(ConstantEnvelope, CpfskPhaseIncrementBound) {
  const int sps = 8;
  auto bits = random_bits(64, 17);
  bits[20] ^= 1u;
  const auto ph = unwrapped_phase(modulate_cpfsk(bits, sps));
  const double bound = kPi * kCpfskIndex / sps + 1e-12;
  for (std::size_t i = 1; i < ph.size(); ++i) EXPECT_LE(std::abs(ph[i] - ph[i - 1]), bound);
  // Each bit advances the phase by exactly +-pi h.
  for (std::size_t b = 1; b < bits.size(); ++b) {
    const double d = ph[b * sps + sps - 1] - ph[b * sps - 1];
    EXPECT_NEAR(std::abs(d), kPi * kCpfskIndex, 1e-9);
  }
}

TEST(ConstantEnvelope, EmptyBitsRejected) {
  const std::vector<std::uint8_t> none;
  EXPECT_THROW((void)modulate_gmsk(none, 8), Error);
  EXPECT_THROW((void)modulate_cpfsk(none, 8), Error);
}

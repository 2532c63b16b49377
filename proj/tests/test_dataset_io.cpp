#include <unistd.h>

#include <filesystem>

#include "test_util.hpp"

using namespace blindrx;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("blindrx_io_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

Dataset small_dataset(std::size_t count) {
  DatasetSpec spec;
  spec.seed = 5;
  spec.count = count;
  spec.n_r = 256;
  return run_generate(spec, 2);
}

}  // namespace

TEST(DatasetIo, RoundTripIsBitExact) {
  const auto dir = scratch("roundtrip");
  const auto ds = small_dataset(12);
  write_dataset(dir, ds);
  const auto back = read_dataset(dir);
  ASSERT_EQ(back.records.size(), ds.records.size());
  EXPECT_EQ(back.spec.n_r, ds.spec.n_r);
  EXPECT_EQ(back.spec.seed, ds.spec.seed);
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& a = ds.records[i];
    const auto& b = back.records[i];
    EXPECT_EQ(a.y, b.y);
    EXPECT_EQ(a.z1, b.z1);
    EXPECT_EQ(a.z2, b.z2);
    EXPECT_EQ(a.modulation, b.modulation);
    EXPECT_EQ(a.symbols.indices, b.symbols.indices);
    EXPECT_EQ(a.symbols.values, b.symbols.values);
    EXPECT_EQ(a.params.f0, b.params.f0);
    EXPECT_EQ(a.params.phi0, b.params.phi0);
    EXPECT_EQ(a.params.t0, b.params.t0);
    EXPECT_EQ(a.params.tau, b.params.tau);
    EXPECT_EQ(a.params.beta, b.params.beta);
    EXPECT_EQ(a.params.sigma, b.params.sigma);
    EXPECT_EQ(a.params.snr_db, b.params.snr_db);
    EXPECT_EQ(a.params.channel.taps, b.params.channel.taps);
    EXPECT_EQ(a.n0, b.n0);
  }
  // Rewriting what was read reproduces the files byte for byte.
  const auto dir2 = scratch("roundtrip2");
  write_dataset(dir2, back);
  for (const char* f : {"meta.json", "y.iq", "z1.iq", "z2.iq"})
    EXPECT_EQ(io::read_file(dir / f), io::read_file(dir2 / f)) << f;
  fs::remove_all(dir);
  fs::remove_all(dir2);
}

TEST(DatasetIo, InfiniteSnrSurvives) {
  const auto dir = scratch("inf");
  DatasetSpec spec;
  spec.count = 2;
  spec.n_r = 256;
  spec.snr_levels = {kNoNoise};
  const auto ds = run_generate(spec, 1);
  write_dataset(dir, ds);
  const auto back = read_dataset(dir);
  EXPECT_TRUE(std::isinf(back.records[0].params.snr_db));
  EXPECT_TRUE(std::isinf(back.spec.snr_levels[0]));
  fs::remove_all(dir);
}

TEST(DatasetIo, IqFilesAreLittleEndianFloat32) {
  const auto dir = scratch("layout");
  const auto ds = small_dataset(2);
  write_dataset(dir, ds);
  const auto bytes = io::read_file(dir / "y.iq");
  ASSERT_EQ(bytes.size(), 2u * 256u * 8u);
  const auto& v = ds.records[1].y[3];
  const std::size_t off = (256 + 3) * 8;
  std::uint8_t b[4];
  std::memcpy(b, bytes.data() + off, 4);
  const std::uint32_t bits = b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  EXPECT_EQ(std::bit_cast<float>(bits), static_cast<float>(v.real()));
  fs::remove_all(dir);
}

TEST(DatasetIo, TruncatedFile) {
  const auto dir = scratch("trunc");
  write_dataset(dir, small_dataset(3));
  const auto bytes = io::read_file(dir / "z1.iq");
  io::write_file(dir / "z1.iq", bytes.substr(0, bytes.size() - 5));
  try {
    (void)read_dataset(dir);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TruncatedFile);
  }
  fs::remove_all(dir);
}

TEST(DatasetIo, EmptyDataset) {
  const auto dir = scratch("empty");
  Dataset ds;
  ds.spec.n_r = 512;
  write_dataset(dir, ds);
  EXPECT_EQ(fs::file_size(dir / "y.iq"), 0u);
  const auto back = read_dataset(dir);
  EXPECT_TRUE(back.records.empty());
  EXPECT_EQ(back.spec.n_r, 512u);
  fs::remove_all(dir);
}

TEST(DatasetIo, FormatVersionMismatch) {
  const auto dir = scratch("version");
  write_dataset(dir, small_dataset(1));
  auto meta = nlohmann::json::parse(io::read_file(dir / "meta.json"));
  meta["format_version"] = kDatasetFormatVersion + 1;
  io::write_file(dir / "meta.json", meta.dump());
  try {
    (void)read_dataset(dir);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::FormatVersionMismatch);
  }
  fs::remove_all(dir);
}

TEST(DatasetIo, MissingDirectoryIsIoError) {
  try {
    (void)read_dataset(scratch("missing"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IoError);
  }
}

TEST(DatasetIo, WrongRecordLengthRejected) {
  auto ds = small_dataset(1);
  ds.records[0].y.pop_back();
  try {
    write_dataset(scratch("len"), ds);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LengthMismatch);
  }
}

TEST(DatasetIo, GeneratedRecordsAreFloatExact) {
  const auto ds = small_dataset(1);
  for (const auto& v : ds.records[0].y) {
    EXPECT_EQ(v.real(), static_cast<double>(static_cast<float>(v.real())));
    EXPECT_EQ(v.imag(), static_cast<double>(static_cast<float>(v.imag())));
  }
}

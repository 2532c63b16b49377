#pragma once

// On-disk dataset layout (one directory per dataset):
//   meta.json  format version, generation spec, optional run config echo and
//              one label object per record
//   y.iq z1.iq z2.iq
//              N_r complex samples per record, records concatenated in label
//              order, interleaved little-endian float32 I,Q pairs

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "blindrx/datagen.hpp"

namespace blindrx {

inline constexpr int kDatasetFormatVersion = 1;

struct Dataset {
  DatasetSpec spec;
  nlohmann::json config = nlohmann::json::object();
  std::vector<TxGroundTruth> records;
};

namespace io {

using nlohmann::json;

inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline double number_or_inf(const json& j) {
  return j.is_null() ? kNoNoise : j.get<double>();
}

inline json complex_list(std::span<const cplx> v) {
  json a = json::array();
  for (const auto& c : v) a.push_back(json::array({c.real(), c.imag()}));
  return a;
}

inline std::vector<cplx> complex_list_from(const json& a) {
  std::vector<cplx> v;
  v.reserve(a.size());
  for (const auto& p : a) v.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
  return v;
}

inline ModulationType modulation_from(const json& j) {
  const auto s = j.get<std::string>();
  const auto m = parse_modulation(s);
  if (!m) throw Error(ErrorCode::InvalidArgument, "unknown modulation '" + s + "'");
  return *m;
}

inline json spec_to_json(const DatasetSpec& s) {
  json mods = json::array();
  for (auto m : s.modulations) mods.push_back(std::string(name(m)));
  json levels = json::array();
  for (double v : s.snr_levels) levels.push_back(number_or_null(v));
  return {{"count", s.count},
          {"n_r", s.n_r},
          {"snr_mode", s.snr_mode == SnrMode::Continuous ? "continuous" : "discrete"},
          {"snr_levels", levels},
          {"seed", s.seed},
          {"modulations", mods}};
}

inline DatasetSpec spec_from_json(const json& j) {
  DatasetSpec s;
  s.count = j.at("count").get<std::size_t>();
  s.n_r = j.at("n_r").get<std::size_t>();
  s.snr_mode = j.at("snr_mode").get<std::string>() == "continuous" ? SnrMode::Continuous : SnrMode::Discrete;
  s.snr_levels.clear();
  for (const auto& v : j.at("snr_levels")) s.snr_levels.push_back(number_or_inf(v));
  s.seed = j.at("seed").get<std::uint64_t>();
  s.modulations.clear();
  for (const auto& m : j.at("modulations")) s.modulations.push_back(modulation_from(m));
  return s;
}

inline json labels_to_json(const TxGroundTruth& r, std::size_t index) {
  const auto& p = r.params;
  return {{"index", index},
          {"modulation", std::string(name(r.modulation))},
          {"f0", p.f0},
          {"phi0", p.phi0},
          {"t0", p.t0},
          {"tau", p.tau},
          {"tau_nominal", p.tau_nominal},
          {"decimation", p.decimation},
          {"beta", p.beta},
          {"sigma", p.sigma},
          {"snr_db", number_or_null(p.snr_db)},
          {"n0", r.n0},
          {"channel", complex_list(p.channel.taps)},
          {"symbols", r.symbols.indices}};
}

inline TxGroundTruth labels_from_json(const json& j) {
  TxGroundTruth r;
  auto& p = r.params;
  r.modulation = modulation_from(j.at("modulation"));
  p.f0 = j.at("f0").get<double>();
  p.phi0 = j.at("phi0").get<double>();
  p.t0 = j.at("t0").get<double>();
  p.tau = j.at("tau").get<double>();
  p.tau_nominal = j.at("tau_nominal").get<double>();
  p.decimation = j.at("decimation").get<int>();
  p.beta = j.at("beta").get<double>();
  p.sigma = j.at("sigma").get<double>();
  p.snr_db = number_or_inf(j.at("snr_db"));
  r.n0 = j.at("n0").get<double>();
  p.channel.taps = complex_list_from(j.at("channel"));
  r.symbols.indices = j.at("symbols").get<std::vector<std::uint32_t>>();
  if (is_linear(r.modulation)) {
    r.symbols = modulate_linear(r.modulation, r.symbols.indices);
  } else {
    for (auto b : r.symbols.indices) r.symbols.values.emplace_back(b ? 1.0 : -1.0, 0.0);
  }
  return r;
}

inline std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
}

inline void append_iq(std::vector<char>& buf, std::span<const cplx> x) {
  const std::size_t off = buf.size();
  buf.resize(off + x.size() * 8);
  char* p = buf.data() + off;
  for (const auto& c : x) {
    for (double part : {c.real(), c.imag()}) {
      const std::uint32_t bits = to_le(std::bit_cast<std::uint32_t>(static_cast<float>(part)));
      std::memcpy(p, &bits, 4);
      p += 4;
    }
  }
}

inline Signal decode_iq(const char* p, std::size_t n) {
  Signal out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t re = 0, im = 0;
    std::memcpy(&re, p + 8 * i, 4);
    std::memcpy(&im, p + 8 * i + 4, 4);
    out[i] = cplx(std::bit_cast<float>(to_le(re)), std::bit_cast<float>(to_le(im)));
  }
  return out;
}

inline void write_file(const std::filesystem::path& path, const std::string& data) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  f.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!f) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace io

/// Rounds every sample to float32 precision, which is what the dataset stores.
inline void quantize_to_float(Signal& x) {
  for (auto& c : x)
    c = cplx(static_cast<float>(c.real()), static_cast<float>(c.imag()));
}

inline void write_dataset(const std::filesystem::path& dir, const Dataset& ds) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());

  const std::size_t n_r = ds.spec.n_r;
  nlohmann::json meta;
  meta["format_version"] = kDatasetFormatVersion;
  meta["spec"] = io::spec_to_json(ds.spec);
  meta["spec"]["count"] = ds.records.size();
  meta["config"] = ds.config;
  meta["records"] = nlohmann::json::array();

  std::vector<char> y, z1, z2;
  y.reserve(ds.records.size() * n_r * 8);
  z1.reserve(y.capacity());
  z2.reserve(y.capacity());
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& r = ds.records[i];
    if (r.y.size() != n_r || r.z1.size() != n_r || r.z2.size() != n_r)
      throw Error(ErrorCode::LengthMismatch, "record " + std::to_string(i) + " is not N_r samples long");
    meta["records"].push_back(io::labels_to_json(r, i));
    io::append_iq(y, r.y);
    io::append_iq(z1, r.z1);
    io::append_iq(z2, r.z2);
  }
  io::write_file(dir / "meta.json", meta.dump(1) + "\n");
  io::write_file(dir / "y.iq", std::string(y.begin(), y.end()));
  io::write_file(dir / "z1.iq", std::string(z1.begin(), z1.end()));
  io::write_file(dir / "z2.iq", std::string(z2.begin(), z2.end()));
}

inline Dataset read_dataset(const std::filesystem::path& dir) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(io::read_file(dir / "meta.json"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IoError, "malformed meta.json: " + std::string(e.what()));
  }
  if (!meta.contains("format_version") || meta["format_version"] != kDatasetFormatVersion)
    throw Error(ErrorCode::FormatVersionMismatch, "unsupported dataset format version");

  Dataset ds;
  try {
    ds.spec = io::spec_from_json(meta.at("spec"));
    if (meta.contains("config")) ds.config = meta["config"];
    for (const auto& j : meta.at("records")) ds.records.push_back(io::labels_from_json(j));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IoError, "malformed dataset labels: " + std::string(e.what()));
  }

  const std::size_t n_r = ds.spec.n_r;
  const std::size_t expected = ds.records.size() * n_r * 8;
  const std::array<std::pair<const char*, Signal TxGroundTruth::*>, 3> files = {{
      {"y.iq", &TxGroundTruth::y}, {"z1.iq", &TxGroundTruth::z1}, {"z2.iq", &TxGroundTruth::z2}}};
  for (const auto& [file, member] : files) {
    const auto bytes = io::read_file(dir / file);
    if (bytes.size() < expected)
      throw Error(ErrorCode::TruncatedFile, std::string(file) + " holds fewer samples than the label table");
    if (bytes.size() > expected)
      throw Error(ErrorCode::LengthMismatch, std::string(file) + " holds more samples than the label table");
    for (std::size_t i = 0; i < ds.records.size(); ++i)
      ds.records[i].*member = io::decode_iq(bytes.data() + i * n_r * 8, n_r);
  }
  return ds;
}

}  // namespace blindrx

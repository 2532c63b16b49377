#pragma once

// JSON-lines formats for per-record estimates and evaluation records, and the
// report bundle writers (CSV tables + JSON).

#include <cstdio>
#include <sstream>

#include "blindrx/dataset_io.hpp"
#include "blindrx/metrics.hpp"

namespace blindrx {

struct EstimateRecord {
  std::size_t index = 0;
  Method method = Method::Blind;
  std::string status = "ok";
  std::string stage;
  std::string message;
  std::optional<EstimateSet> estimates;
};

namespace io {

inline json optional_number(const std::optional<double>& v) {
  return v && std::isfinite(*v) ? json(*v) : json(nullptr);
}

inline std::optional<double> optional_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

inline json estimate_to_json(const EstimateSet& e) {
  return {{"f0_hat", e.f0_hat},
          {"tau_hat", e.tau_hat},
          {"t0_hat", e.t0_hat},
          {"phi0_hat", e.phi0_hat},
          {"n0", e.n0},
          {"band", {{"center", e.band.center},
                    {"halfwidth", e.band.halfwidth},
                    {"b1", e.band.b1},
                    {"b2", e.band.b2},
                    {"rate", e.band.rate}}},
          {"eq_taps", complex_list(e.eq_taps)},
          {"flags", {{"low_confidence", e.low_confidence}, {"no_crossing", e.no_crossing}}}};
}

inline EstimateSet estimate_from_json(const json& j) {
  EstimateSet e;
  e.f0_hat = j.at("f0_hat").get<double>();
  e.tau_hat = j.at("tau_hat").get<double>();
  e.t0_hat = j.at("t0_hat").get<double>();
  e.phi0_hat = j.at("phi0_hat").get<double>();
  e.n0 = j.at("n0").get<double>();
  const auto& b = j.at("band");
  e.band = {b.at("center").get<double>(), b.at("halfwidth").get<double>(), b.at("b1").get<double>(),
            b.at("b2").get<double>(), b.at("rate").get<double>()};
  e.eq_taps = complex_list_from(j.at("eq_taps"));
  e.low_confidence = j.at("flags").at("low_confidence").get<bool>();
  e.no_crossing = j.at("flags").at("no_crossing").get<bool>();
  return e;
}

}  // namespace io

inline nlohmann::json to_json(const EstimateRecord& r) {
  nlohmann::json j = {{"index", r.index},
                      {"method", std::string(name(r.method))},
                      {"status", r.status},
                      {"stage", r.stage},
                      {"message", r.message}};
  j["estimates"] = r.estimates ? io::estimate_to_json(*r.estimates) : nlohmann::json(nullptr);
  return j;
}

inline EstimateRecord estimate_record_from_json(const nlohmann::json& j) {
  EstimateRecord r;
  r.index = j.at("index").get<std::size_t>();
  const auto m = parse_method(j.at("method").get<std::string>());
  if (!m) throw Error(ErrorCode::IoError, "unknown method in estimates file");
  r.method = *m;
  r.status = j.at("status").get<std::string>();
  r.stage = j.value("stage", "");
  r.message = j.value("message", "");
  if (!j.at("estimates").is_null()) r.estimates = io::estimate_from_json(j.at("estimates"));
  return r;
}

inline nlohmann::json to_json(const EvalRecord& r) {
  return {{"index", r.id},
          {"method", std::string(name(r.method))},
          {"modulation", std::string(name(r.modulation))},
          {"snr_db", io::number_or_null(r.snr_db)},
          {"status", r.status},
          {"stage", r.stage},
          {"abs_f0_err", r.abs_f0_err},
          {"abs_tau_err", r.abs_tau_err},
          {"circ_t0_err", r.circ_t0_err},
          {"recon_loss", io::optional_number(r.recon_loss)},
          {"ser", io::optional_number(r.ser)},
          {"decoded", r.decoded}};
}

inline EvalRecord eval_record_from_json(const nlohmann::json& j) {
  EvalRecord r;
  r.id = j.at("index").get<std::size_t>();
  const auto m = parse_method(j.at("method").get<std::string>());
  if (!m) throw Error(ErrorCode::IoError, "unknown method in evaluation file");
  r.method = *m;
  r.modulation = io::modulation_from(j.at("modulation"));
  r.snr_db = io::number_or_inf(j.at("snr_db"));
  r.status = j.at("status").get<std::string>();
  r.stage = j.value("stage", "");
  r.abs_f0_err = j.at("abs_f0_err").get<double>();
  r.abs_tau_err = j.at("abs_tau_err").get<double>();
  r.circ_t0_err = j.at("circ_t0_err").get<double>();
  r.recon_loss = io::optional_from(j.at("recon_loss"));
  r.ser = io::optional_from(j.at("ser"));
  r.decoded = j.at("decoded").get<bool>();
  return r;
}

template <typename T>
void write_json_lines(const std::filesystem::path& path, std::span<const T> rows) {
  std::string out;
  for (const auto& r : rows) {
    out += to_json(r).dump();
    out += '\n';
  }
  io::write_file(path, out);
}

template <typename F>
auto read_json_lines(const std::filesystem::path& path, F&& parse) {
  std::vector<decltype(parse(nlohmann::json{}))> rows;
  std::istringstream in(io::read_file(path));
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      rows.push_back(parse(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::IoError, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

inline std::vector<EstimateRecord> read_estimates(const std::filesystem::path& path) {
  return read_json_lines(path, [](const nlohmann::json& j) { return estimate_record_from_json(j); });
}

inline std::vector<EvalRecord> read_evals(const std::filesystem::path& path) {
  return read_json_lines(path, [](const nlohmann::json& j) { return eval_record_from_json(j); });
}

// ---- report bundle ----

namespace io {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

inline const GroupStats* find_group(const EvalReport& rep, Method m, const std::string& mod, double snr) {
  for (const auto& g : rep.groups)
    if (g.method == m && g.modulation == mod && g.snr_db == snr) return &g;
  return nullptr;
}

}  // namespace io

/// Wide table: modulation, snr_db, then per method <m>_count, <m>_mae_f0,
/// <m>_mae_tau, <m>_mae_t0. Empty groups leave the aggregate cells blank.
inline std::string mae_csv(const EvalReport& rep) {
  std::string out = "modulation,snr_db";
  for (auto m : rep.methods) {
    const std::string p(name(m));
    out += "," + p + "_count," + p + "_mae_f0," + p + "_mae_tau," + p + "_mae_t0";
  }
  out += '\n';
  for (const auto& mod : rep.modulations) {
    for (double b : rep.buckets) {
      out += mod + "," + io::fmt(b);
      for (auto m : rep.methods) {
        const auto* g = io::find_group(rep, m, mod, b);
        out += "," + std::to_string(g->count) + "," + io::fmt(g->mae_f0) + "," + io::fmt(g->mae_tau) + "," +
               io::fmt(g->mae_t0);
      }
      out += '\n';
    }
  }
  return out;
}

/// modulation, snr_db, then per method <m>_count (decoded records) and <m>_per.
inline std::string per_csv(const EvalReport& rep) {
  std::string out = "modulation,snr_db";
  for (auto m : rep.methods) {
    const std::string p(name(m));
    out += "," + p + "_count," + p + "_per";
  }
  out += '\n';
  for (const auto& mod : rep.modulations) {
    for (double b : rep.buckets) {
      out += mod + "," + io::fmt(b);
      for (auto m : rep.methods) {
        const auto* g = io::find_group(rep, m, mod, b);
        out += "," + std::to_string(g->decoded_count) + "," + io::fmt(g->per);
      }
      out += '\n';
    }
  }
  return out;
}

/// Long table: method, modulation, snr_db, ser, cdf.
inline std::string ser_cdf_csv(const EvalReport& rep) {
  std::string out = "method,modulation,snr_db,ser,cdf\n";
  for (const auto& g : rep.groups)
    for (const auto& [s, c] : g.ser_cdf)
      out += std::string(name(g.method)) + "," + g.modulation + "," + io::fmt(g.snr_db) + "," + io::fmt(s) + "," +
             io::fmt(c) + "\n";
  return out;
}

inline nlohmann::json to_json(const EvalReport& rep) {
  using nlohmann::json;
  json j;
  j["buckets"] = rep.buckets;
  json methods = json::array();
  for (auto m : rep.methods) methods.push_back(std::string(name(m)));
  j["methods"] = methods;
  j["modulations"] = rep.modulations;
  j["failure_policy"] =
      "records whose estimation failed are charged abs_f0_err=" + io::fmt(kFailedF0Error) +
      ", abs_tau_err=" + io::fmt(kFailedTauError) + ", circ_t0_err=" + io::fmt(kFailedT0Error) +
      ", count as packet errors and as SER=1 in CDFs";
  json groups = json::array();
  for (const auto& g : rep.groups) {
    json cdf = json::array();
    for (const auto& [s, c] : g.ser_cdf) cdf.push_back(json::array({s, c}));
    groups.push_back({{"method", std::string(name(g.method))},
                      {"modulation", g.modulation},
                      {"snr_db", g.snr_db},
                      {"count", g.count},
                      {"mae_f0", io::optional_number(g.mae_f0)},
                      {"mae_tau", io::optional_number(g.mae_tau)},
                      {"mae_t0", io::optional_number(g.mae_t0)},
                      {"mean_recon_loss", io::optional_number(g.mean_recon_loss)},
                      {"decoded_count", g.decoded_count},
                      {"per", io::optional_number(g.per)},
                      {"ser_cdf", cdf}});
  }
  j["groups"] = groups;
  return j;
}

/// Writes mae_vs_snr.csv, per_vs_snr.csv, ser_cdf.csv and report.json into dir.
inline void write_report(const std::filesystem::path& dir, const EvalReport& rep) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
  io::write_file(dir / "mae_vs_snr.csv", mae_csv(rep));
  io::write_file(dir / "per_vs_snr.csv", per_csv(rep));
  io::write_file(dir / "ser_cdf.csv", ser_cdf_csv(rep));
  io::write_file(dir / "report.json", to_json(rep).dump(1) + "\n");
}

}  // namespace blindrx

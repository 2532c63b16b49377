// blindrx: generate impaired signal datasets, run blind and genie estimation,
// decode symbols and build evaluation reports.
//
//   blindrx generate --out DIR [--seed N] [--count N] [--nr N] [--snr LIST] [--mods LIST]
//   blindrx estimate --dataset DIR --out FILE [--method blind|genie|both] [--n0 known|estimated]
//   blindrx decode   --dataset DIR --estimates FILE --out FILE [--mods LIST]
//   blindrx report   --evals FILE --out DIR [--snr LIST]
//
// Exit codes: 0 success, 1 configuration error, 2 I/O error.

#include <iostream>

#include "CLI11.hpp"
#include "blindrx/blindrx.hpp"

namespace {

using namespace blindrx;

constexpr int kExitConfig = 1;
constexpr int kExitIo = 2;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<ModulationType> parse_mods(const std::string& s) {
  if (s == "all" || s == "ALL") return {kAllModulations.begin(), kAllModulations.end()};
  std::vector<ModulationType> mods;
  for (const auto& tok : split_list(s)) {
    const auto m = parse_modulation(tok);
    if (!m) throw Error(ErrorCode::ConfigError, "unknown modulation '" + tok + "'");
    if (std::find(mods.begin(), mods.end(), *m) == mods.end()) mods.push_back(*m);
  }
  if (mods.empty()) throw Error(ErrorCode::ConfigError, "empty modulation list");
  return mods;
}

std::vector<double> parse_snrs(const std::string& s) {
  std::vector<double> v;
  for (const auto& tok : split_list(s)) {
    if (tok == "inf" || tok == "INF") {
      v.push_back(kNoNoise);
      continue;
    }
    try {
      std::size_t used = 0;
      const double x = std::stod(tok, &used);
      if (used != tok.size() || !std::isfinite(x)) throw std::invalid_argument(tok);
      v.push_back(x);
    } catch (const std::exception&) {
      throw Error(ErrorCode::ConfigError, "bad SNR value '" + tok + "'");
    }
  }
  if (v.empty()) throw Error(ErrorCode::ConfigError, "empty SNR list");
  return v;
}

std::vector<Method> parse_methods(const std::string& s) {
  if (s == "both") return {Method::Blind, Method::Genie};
  const auto m = parse_method(s);
  if (!m) throw Error(ErrorCode::ConfigError, "method must be blind, genie or both");
  return {*m};
}

void require_distinct(const std::string& a, const std::string& b) {
  std::error_code ec;
  const auto pa = std::filesystem::weakly_canonical(a, ec);
  const auto pb = std::filesystem::weakly_canonical(b, ec);
  if (a == b || (!pa.empty() && pa == pb)) throw Error(ErrorCode::ConfigError, "input and output paths must differ");
}

struct Options {
  std::uint64_t seed = 0;
  std::size_t count = 1;
  std::size_t nr = 1024;
  std::string snr = "0,5,10,15,20";
  std::string mods;
  std::string method = "blind";
  std::string n0 = "estimated";
  std::size_t workers = 0;
  std::string out;
  std::string dataset;
  std::string estimates;
  std::string evals;
};

int cmd_generate(const Options& o) {
  DatasetSpec spec;
  spec.seed = o.seed;
  spec.count = o.count;
  spec.n_r = o.nr;
  if (o.snr == "continuous") {
    spec.snr_mode = SnrMode::Continuous;
    spec.snr_levels.clear();
  } else {
    spec.snr_mode = SnrMode::Discrete;
    spec.snr_levels = parse_snrs(o.snr);
  }
  spec.modulations = o.mods.empty() ? std::vector<ModulationType>(kAllModulations.begin(), kAllModulations.end())
                                    : parse_mods(o.mods);
  try {
    spec.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  nlohmann::json config = {{"subcommand", "generate"},
                           {"seed", o.seed},
                           {"count", o.count},
                           {"nr", o.nr},
                           {"snr", o.snr},
                           {"mods", o.mods.empty() ? "all" : o.mods}};
  const auto ds = run_generate(spec, o.workers, config);
  write_dataset(o.out, ds);
  std::cerr << "wrote " << ds.records.size() << " records to " << o.out << "\n";
  return 0;
}

int cmd_estimate(const Options& o) {
  require_distinct(o.dataset, o.out);
  const auto methods = parse_methods(o.method);
  NoisePolicy policy;
  if (o.n0 == "known")
    policy = NoisePolicy::Known;
  else if (o.n0 == "estimated")
    policy = NoisePolicy::Estimated;
  else
    throw Error(ErrorCode::ConfigError, "--n0 must be known or estimated");
  const auto ds = read_dataset(o.dataset);
  const auto est = run_estimate(ds, methods, policy, o.workers);
  write_json_lines<EstimateRecord>(o.out, est);
  std::size_t failed = 0;
  for (const auto& e : est) failed += e.status != "ok" ? 1 : 0;
  std::cerr << "wrote " << est.size() << " estimates (" << failed << " failed) to " << o.out << "\n";
  return 0;
}

int cmd_decode(const Options& o) {
  require_distinct(o.dataset, o.out);
  require_distinct(o.estimates, o.out);
  const auto mods = o.mods.empty() ? std::vector<ModulationType>{ModulationType::BPSK, ModulationType::QPSK}
                                   : parse_mods(o.mods);
  const auto ds = read_dataset(o.dataset);
  const auto est = read_estimates(o.estimates);
  const auto evals = run_decode(ds, est, mods, o.workers);
  write_json_lines<EvalRecord>(o.out, evals);
  std::cerr << "wrote " << evals.size() << " evaluation records to " << o.out << "\n";
  return 0;
}

int cmd_report(const Options& o) {
  require_distinct(o.evals, o.out);
  const auto evals = read_evals(o.evals);
  std::vector<double> buckets;
  for (double b : parse_snrs(o.snr))
    if (std::isfinite(b)) buckets.push_back(b);
  if (buckets.empty()) throw Error(ErrorCode::ConfigError, "report needs at least one finite SNR bucket");
  const auto rep = run_report(evals, buckets);
  if (evals.empty()) std::cerr << "warning: no evaluation records; tables are empty\n";
  bool any_decoded = false;
  for (const auto& r : evals) any_decoded = any_decoded || r.decoded;
  if (!evals.empty() && !any_decoded) std::cerr << "warning: no decoded records; PER and SER tables are empty\n";
  write_report(o.out, rep);
  std::cerr << "wrote report to " << o.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blind single-carrier receiver evaluation toolkit"};
  app.require_subcommand(1);
  Options o;
  o.workers = default_workers();

  auto* gen = app.add_subcommand("generate", "Synthesize a dataset");
  gen->add_option("--out", o.out, "Output dataset directory")->required();
  gen->add_option("--seed", o.seed, "Master seed");
  gen->add_option("--count", o.count, "Number of signals");
  gen->add_option("--nr", o.nr, "Samples per signal");
  gen->add_option("--snr", o.snr, "Comma-separated SNR levels in dB (inf allowed) or 'continuous'");
  gen->add_option("--mods", o.mods, "Comma-separated modulations or 'all'");
  gen->add_option("--workers", o.workers, "Worker threads");

  auto* est = app.add_subcommand("estimate", "Run blind and/or genie estimation");
  est->add_option("--dataset", o.dataset, "Dataset directory")->required();
  est->add_option("--out", o.out, "Output JSON-lines file")->required();
  est->add_option("--method", o.method, "blind, genie or both");
  est->add_option("--n0", o.n0, "Noise floor for band segmentation: known or estimated");
  est->add_option("--workers", o.workers, "Worker threads");

  auto* dec = app.add_subcommand("decode", "Recover and decode symbols");
  dec->add_option("--dataset", o.dataset, "Dataset directory")->required();
  dec->add_option("--estimates", o.estimates, "Estimates JSON-lines file")->required();
  dec->add_option("--out", o.out, "Output JSON-lines file")->required();
  dec->add_option("--mods", o.mods, "Modulations to decode (default BPSK,QPSK)");
  dec->add_option("--workers", o.workers, "Worker threads");

  auto* rep = app.add_subcommand("report", "Aggregate evaluation records");
  rep->add_option("--evals", o.evals, "Evaluation JSON-lines file")->required();
  rep->add_option("--out", o.out, "Output directory")->required();
  rep->add_option("--snr", o.snr, "SNR buckets in dB");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }
  if (o.workers == 0) o.workers = 1;

  try {
    if (gen->parsed()) {
      if (o.count < 1) throw Error(ErrorCode::ConfigError, "--count must be >= 1");
      return cmd_generate(o);
    }
    if (est->parsed()) return cmd_estimate(o);
    if (dec->parsed()) return cmd_decode(o);
    if (rep->parsed()) return cmd_report(o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.code()) {
      case ErrorCode::IoError:
      case ErrorCode::TruncatedFile:
      case ErrorCode::FormatVersionMismatch:
      case ErrorCode::LengthMismatch:
        return kExitIo;
      default:
        return kExitConfig;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitConfig;
}

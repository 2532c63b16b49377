#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>

#include "blindrx/recover.hpp"
#include "blindrx/records_io.hpp"

namespace blindrx {

inline constexpr const char* kWorkersEnv = "BLINDRX_WORKERS";

/// Worker count from BLINDRX_WORKERS, else the hardware concurrency.
inline std::size_t default_workers() {
  if (const char* env = std::getenv(kWorkersEnv)) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Evaluates fn(i) for i in [0, n) on up to `workers` threads; results are
/// returned in index order. The first exception thrown by fn is rethrown.
template <typename F>
auto parallel_map(std::size_t n, std::size_t workers, F&& fn) {
  using R = decltype(fn(std::size_t{}));
  std::vector<std::optional<R>> slots(n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
  if (threads == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
  std::vector<R> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

// ---- generate ----

inline Dataset run_generate(const DatasetSpec& spec, std::size_t workers,
                            nlohmann::json config = nlohmann::json::object()) {
  spec.validate();
  Dataset ds;
  ds.spec = spec;
  ds.config = std::move(config);
  ds.records = parallel_map(spec.count, workers, [&](std::size_t i) {
    auto r = generate_one(spec, i);
    quantize_to_float(r.y);
    quantize_to_float(r.z1);
    quantize_to_float(r.z2);
    return r;
  });
  return ds;
}

// ---- estimate ----

enum class NoisePolicy { Known, Estimated };

inline EstimateRecord estimate_one(const TxGroundTruth& truth, std::size_t index, Method method,
                                   NoisePolicy policy) {
  EstimateRecord rec;
  rec.index = index;
  rec.method = method;
  try {
    if (method == Method::Genie) {
      rec.estimates = genie_chain(truth).estimates;
    } else {
      const auto n0 = policy == NoisePolicy::Known ? std::optional<double>(truth.n0) : std::nullopt;
      rec.estimates = blind_chain(truth.y, n0).estimates;
    }
  } catch (const Error& e) {
    rec.status = std::string(to_string(e.code()));
    rec.stage = e.stage();
    rec.message = e.what();
    rec.estimates.reset();
  }
  return rec;
}

/// One record per (dataset record, method), record-major.
inline std::vector<EstimateRecord> run_estimate(const Dataset& ds, std::span<const Method> methods,
                                                NoisePolicy policy, std::size_t workers) {
  const std::size_t nm = methods.size();
  return parallel_map(ds.records.size() * nm, workers, [&](std::size_t k) {
    return estimate_one(ds.records[k / nm], k / nm, methods[k % nm], policy);
  });
}

// ---- decode ----

/// Signal handed to symbol recovery for a given estimate: the genie front end
/// for genie estimates, the blind chain output rebuilt from the estimates
/// otherwise.
inline Signal recovered_signal(const TxGroundTruth& truth, Method method, const EstimateSet& est) {
  if (method == Method::Genie) return genie_chain(truth).signal;
  return blind_reconstruct(truth.y, est);
}

/// Symbol recovery and decoding for one record. Blind soft symbols are scaled
/// to unit mean power (automatic gain control) before decisions.
inline double decode_record(const TxGroundTruth& truth, Method method, const EstimateSet& est,
                            std::span<const cplx> recovered) {
  auto soft = symbol_resample(recovered, est.tau_hat, est.t0_hat);
  if (method == Method::Blind) soft = unit_power(soft);
  if (truth.symbols.values.empty()) throw Error(ErrorCode::EmptyOverlap, "record has no labelled symbols");
  const auto dec = decode_symbols(soft, truth.modulation, truth.symbols.values.front());
  return ser(dec, truth.symbols);
}

inline EvalRecord evaluate_one(const TxGroundTruth& truth, const EstimateRecord& est,
                               std::span<const ModulationType> decode_mods) {
  EvalRecord r;
  r.id = est.index;
  r.modulation = truth.modulation;
  r.snr_db = truth.params.snr_db;
  r.method = est.method;
  r.decoded = is_linear(truth.modulation) &&
              std::find(decode_mods.begin(), decode_mods.end(), truth.modulation) != decode_mods.end();
  if (est.status != "ok" || !est.estimates) {
    r.status = est.status == "ok" ? "MissingEstimates" : est.status;
    r.stage = est.stage;
    r.abs_f0_err = kFailedF0Error;
    r.abs_tau_err = kFailedTauError;
    r.circ_t0_err = kFailedT0Error;
    return r;
  }
  const auto errs = estimation_errors(*est.estimates, truth.params);
  r.abs_f0_err = errs.f0;
  r.abs_tau_err = errs.tau;
  r.circ_t0_err = errs.t0;
  try {
    const auto z = recovered_signal(truth, est.method, *est.estimates);
    r.recon_loss = phase_invariant_loss(z, truth.z2);
    if (r.decoded) r.ser = decode_record(truth, est.method, *est.estimates, z);
  } catch (const Error& e) {
    r.status = std::string(to_string(e.code()));
    r.stage = "decode";
  }
  return r;
}

inline std::vector<EvalRecord> run_decode(const Dataset& ds, std::span<const EstimateRecord> estimates,
                                          std::span<const ModulationType> decode_mods, std::size_t workers) {
  for (const auto& e : estimates)
    if (e.index >= ds.records.size())
      throw Error(ErrorCode::IndexOutOfRange, "estimate refers to record " + std::to_string(e.index) +
                                                  " outside the dataset");
  return parallel_map(estimates.size(), workers, [&](std::size_t k) {
    return evaluate_one(ds.records[estimates[k].index], estimates[k], decode_mods);
  });
}

// ---- report ----

inline const std::vector<double>& default_buckets() {
  static const std::vector<double> b = {0.0, 5.0, 10.0, 15.0, 20.0};
  return b;
}

inline EvalReport run_report(std::span<const EvalRecord> records, std::vector<double> buckets = default_buckets()) {
  return aggregate(records, std::move(buckets));
}

}  // namespace blindrx

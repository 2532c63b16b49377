#pragma once

#include <map>
#include <optional>

#include "blindrx/blindest.hpp"
#include "blindrx/datagen.hpp"

namespace blindrx {

enum class Method { Blind, Genie };

constexpr std::string_view name(Method m) { return m == Method::Blind ? "blind" : "genie"; }

inline std::optional<Method> parse_method(std::string_view s) {
  if (s == "blind") return Method::Blind;
  if (s == "genie") return Method::Genie;
  return std::nullopt;
}

// Errors charged to a record whose blind chain failed: the widest possible
// f0 and tau mismatch over the generation ranges, and half a symbol of timing.
inline constexpr double kFailedF0Error = 2.0 * kMaxFrequencyOffset;
inline constexpr double kFailedTauError = kMaxSymbolDuration - kMinSymbolDuration;
inline constexpr double kFailedT0Error = 0.5;

struct EvalRecord {
  std::size_t id = 0;
  ModulationType modulation = ModulationType::BPSK;
  double snr_db = kNoNoise;
  Method method = Method::Blind;
  std::string status = "ok";  // "ok" or the error code that stopped the record
  std::string stage;          // failing stage, if any
  double abs_f0_err = 0.0;
  double abs_tau_err = 0.0;
  double circ_t0_err = 0.0;
  std::optional<double> recon_loss;
  std::optional<double> ser;
  bool decoded = false;  // part of the symbol-decoding evaluation set

  bool ok() const { return status == "ok"; }
};

/// (|zh|^2 + |z|^2 - 2 |<zh, z>|) / N: the mean squared error after the best
/// global phase rotation of zh.
inline double phase_invariant_loss(std::span<const cplx> z_hat, std::span<const cplx> z) {
  if (z_hat.size() != z.size()) throw Error(ErrorCode::LengthMismatch, "signals differ in length");
  if (z.empty()) return 0.0;
  double e1 = 0.0, e2 = 0.0;
  cplx inner{};
  for (std::size_t k = 0; k < z.size(); ++k) {
    e1 += std::norm(z_hat[k]);
    e2 += std::norm(z[k]);
    inner += std::conj(z_hat[k]) * z[k];
  }
  const double loss = (e1 + e2 - 2.0 * std::abs(inner)) / static_cast<double>(z.size());
  return std::max(loss, 0.0);
}

struct EstimationErrors {
  double f0 = 0.0;
  double tau = 0.0;
  double t0 = 0.0;
};

inline double circular_distance(double a, double b) {
  const double d = std::abs(wrap_unit(a) - wrap_unit(b));
  return std::min(d, 1.0 - d);
}

inline EstimationErrors estimation_errors(const EstimateSet& est, const TxParams& truth) {
  return {std::abs(truth.f0 - est.f0_hat), std::abs(truth.tau - est.tau_hat),
          circular_distance(truth.t0, est.t0_hat)};
}

/// Empirical CDF evaluated at each distinct value: (value, fraction <= value).
inline std::vector<std::pair<double, double>> ser_cdf(std::vector<double> sers) {
  if (sers.empty()) throw Error(ErrorCode::EmptySet, "no SER values");
  std::sort(sers.begin(), sers.end());
  std::vector<std::pair<double, double>> cdf;
  const auto n = static_cast<double>(sers.size());
  for (std::size_t i = 0; i < sers.size(); ++i) {
    if (i + 1 < sers.size() && sers[i + 1] == sers[i]) continue;
    cdf.emplace_back(sers[i], static_cast<double>(i + 1) / n);
  }
  return cdf;
}

/// Packet error indicator: a record is correct only if it was decoded with
/// zero symbol errors; failed or undecodable records count as errors.
inline bool packet_error(const EvalRecord& r) { return !(r.ser && *r.ser == 0.0); }

/// Fraction of records in packet error, 1 - P(SER = 0).
inline double per(std::span<const EvalRecord> records) {
  if (records.empty()) throw Error(ErrorCode::EmptySet, "no records");
  std::size_t errors = 0;
  for (const auto& r : records) errors += packet_error(r) ? 1 : 0;
  return static_cast<double>(errors) / static_cast<double>(records.size());
}

/// SER used for CDFs: records that were meant to be decoded but produced no SER
/// (a failed stage) count as SER = 1.
inline double effective_ser(const EvalRecord& r) { return r.ser ? *r.ser : 1.0; }

inline constexpr std::string_view kAllModulationsLabel = "ALL";

struct GroupStats {
  Method method = Method::Blind;
  std::string modulation;  // modulation name or "ALL"
  double snr_db = 0.0;     // bucket
  std::size_t count = 0;
  std::optional<double> mae_f0;
  std::optional<double> mae_tau;
  std::optional<double> mae_t0;
  std::optional<double> mean_recon_loss;
  std::size_t decoded_count = 0;
  std::optional<double> per;
  std::vector<std::pair<double, double>> ser_cdf;
};

struct EvalReport {
  std::vector<double> buckets;
  std::vector<Method> methods;
  std::vector<std::string> modulations;  // "ALL" first, then enumeration order
  std::vector<GroupStats> groups;        // method-major, then modulation, then bucket
};

/// Index of the bucket nearest to snr (ties to the lower bucket); +inf maps to
/// the highest bucket.
inline std::size_t bucket_index(std::span<const double> buckets, double snr) {
  if (buckets.empty()) throw Error(ErrorCode::InvalidArgument, "no SNR buckets");
  if (std::isinf(snr)) return snr > 0 ? buckets.size() - 1 : 0;
  std::size_t best = 0;
  for (std::size_t i = 1; i < buckets.size(); ++i)
    if (std::abs(buckets[i] - snr) < std::abs(buckets[best] - snr)) best = i;
  return best;
}

/// Groups records by (method, modulation, SNR bucket), plus an all-modulation
/// group, and reduces each group. Every combination of present methods and
/// modulations with every bucket is emitted; empty groups carry count 0 and
/// null aggregates. Output depends only on the multiset of records.
inline EvalReport aggregate(std::span<const EvalRecord> records, std::vector<double> buckets) {
  std::sort(buckets.begin(), buckets.end());
  buckets.erase(std::unique(buckets.begin(), buckets.end()), buckets.end());
  EvalReport rep;
  rep.buckets = buckets;

  bool has[2] = {false, false};
  std::vector<bool> mod_present(kAllModulations.size(), false);
  for (const auto& r : records) {
    has[static_cast<int>(r.method)] = true;
    mod_present[static_cast<std::size_t>(r.modulation)] = true;
  }
  for (Method m : {Method::Blind, Method::Genie})
    if (has[static_cast<int>(m)]) rep.methods.push_back(m);
  rep.modulations.emplace_back(kAllModulationsLabel);
  for (auto m : kAllModulations)
    if (mod_present[static_cast<std::size_t>(m)]) rep.modulations.emplace_back(name(m));

  // (method, modulation slot, bucket) -> record pointers; slot 0 is ALL.
  std::map<std::tuple<int, std::size_t, std::size_t>, std::vector<const EvalRecord*>> groups;
  for (const auto& r : records) {
    const std::size_t b = bucket_index(buckets, r.snr_db);
    const auto slot = static_cast<std::size_t>(
        std::find(rep.modulations.begin(), rep.modulations.end(), std::string(name(r.modulation))) -
        rep.modulations.begin());
    groups[{static_cast<int>(r.method), 0, b}].push_back(&r);
    groups[{static_cast<int>(r.method), slot, b}].push_back(&r);
  }

  for (Method m : rep.methods) {
    for (std::size_t slot = 0; slot < rep.modulations.size(); ++slot) {
      for (std::size_t b = 0; b < buckets.size(); ++b) {
        GroupStats g;
        g.method = m;
        g.modulation = rep.modulations[slot];
        g.snr_db = buckets[b];
        const auto it = groups.find({static_cast<int>(m), slot, b});
        if (it != groups.end()) {
          // Sort by id so floating-point sums do not depend on input order.
          auto members = it->second;
          std::sort(members.begin(), members.end(),
                    [](const EvalRecord* a, const EvalRecord* c) { return a->id < c->id; });
          g.count = members.size();
          double f0 = 0.0, tau = 0.0, t0 = 0.0, loss = 0.0;
          std::size_t losses = 0, errors = 0;
          std::vector<double> sers;
          for (const auto* r : members) {
            f0 += r->abs_f0_err;
            tau += r->abs_tau_err;
            t0 += r->circ_t0_err;
            if (r->recon_loss) {
              loss += *r->recon_loss;
              ++losses;
            }
            if (r->decoded) {
              ++g.decoded_count;
              errors += packet_error(*r) ? 1 : 0;
              sers.push_back(effective_ser(*r));
            }
          }
          const auto n = static_cast<double>(g.count);
          g.mae_f0 = f0 / n;
          g.mae_tau = tau / n;
          g.mae_t0 = t0 / n;
          if (losses > 0) g.mean_recon_loss = loss / static_cast<double>(losses);
          if (g.decoded_count > 0) {
            g.per = static_cast<double>(errors) / static_cast<double>(g.decoded_count);
            g.ser_cdf = ser_cdf(std::move(sers));
          }
        }
        rep.groups.push_back(std::move(g));
      }
    }
  }
  return rep;
}

}  // namespace blindrx

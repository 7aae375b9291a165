#pragma once

// Utilization sweep over payload length x list width.

#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <vector>

#include "liststeg/bitstring.hpp"
#include "liststeg/codec.hpp"
#include "liststeg/metrics.hpp"
#include "liststeg/model.hpp"

namespace liststeg {

struct CapacityPoint {
  std::size_t payload_bits = 0;
  CapacityReport report;
};

struct CapacitySweep {
  SecretKey key;
  double lambda = 40.0;
  std::vector<std::size_t> payload_lengths;
  std::vector<unsigned> list_bits;
  /// Fixed b; empty selects the two-pass rule.
  std::optional<std::size_t> suffix_bits;
  std::size_t max_tokens = 1'000'000;
  /// Seeds the payload bits.
  std::uint64_t seed = 0;
};

inline BitString random_payload(std::mt19937_64& rng, std::size_t bits) {
  BitString m;
  while (m.size() < bits) {
    const std::size_t take = std::min<std::size_t>(64, bits - m.size());
    m.append_uint(rng() >> (64 - take), take);
  }
  return m;
}

/// Rows in list_bits-major order, payload lengths ascending within each N.
inline std::vector<CapacityPoint> run_capacity_sweep(const CapacitySweep& sweep, const ModelSource& model) {
  std::vector<CapacityPoint> out;
  for (unsigned n : sweep.list_bits) {
    for (std::size_t len : sweep.payload_lengths) {
      std::mt19937_64 rng(sweep.seed ^ (std::uint64_t{n} << 32) ^ len);
      const BitString payload = random_payload(rng, len);
      CodecParams p;
      p.list_bits = n;
      p.lambda = sweep.lambda;
      p.key = sweep.key;
      p.max_tokens = sweep.max_tokens;
      StegoTrace trace;
      if (sweep.suffix_bits) {
        p.suffix_bits = *sweep.suffix_bits;
        trace = encode(p, model, payload);
      } else {
        auto r = resolve_suffix_bits(p, model, payload);
        p.suffix_bits = r.suffix_bits;
        trace = std::move(r.trace);
      }
      out.push_back({len, capacity_report(trace, len, p)});
    }
  }
  return out;
}

inline void write_capacity_csv(std::ostream& os, const std::vector<CapacityPoint>& rows) {
  os << "payload_bits,N,b,tokens,suffix_tokens,I,H,R,bound_R\n";
  const auto old = os.precision(8);
  for (const auto& row : rows) {
    const auto& r = row.report;
    os << row.payload_bits << ',' << r.list_bits << ',' << r.suffix_bits << ',' << r.tokens << ','
       << r.suffix_tokens << ',' << r.total_information << ',' << r.entropy_per_token << ',' << r.utilization << ','
       << r.bound << '\n';
  }
  os.precision(old);
}

/// Non-decreasing up to `noise` per adjacent pair, and strictly higher at
/// the end than at the start.
inline bool increasing_trend(const std::vector<double>& values, double noise = 0.01) {
  if (values.size() < 2) return true;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] < values[i - 1] - noise) return false;
  }
  return values.back() > values.front();
}

}  // namespace liststeg

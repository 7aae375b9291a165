#pragma once

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "liststeg/bitstring.hpp"
#include "liststeg/codec.hpp"
#include "liststeg/dist.hpp"
#include "liststeg/error.hpp"

namespace liststeg {

/// Self-information of the emitted tokens in bits: sum of -log2(w / 2^32).
inline double information_content(std::span<const std::uint64_t> per_step_weight) {
  double bits = 0.0;
  for (auto w : per_step_weight) {
    if (w == 0 || w > kProbabilityOne) throw Error(ErrorCode::kInvalidInput, "step weight outside [1, 2^32]");
    bits += 32.0 - std::log2(static_cast<double>(w));
  }
  return bits;
}

inline double information_content(const StegoTrace& trace) { return information_content(trace.per_step_weight); }

/// Embedded payload bits per bit of self-information.
inline double utilization(double information_bits, std::size_t payload_bits) {
  if (payload_bits == 0) return 0.0;
  if (!(information_bits > 0.0)) throw Error(ErrorCode::kUndefinedUtilization, "stegotext carries no information");
  return static_cast<double>(payload_bits) / information_bits;
}

inline double utilization(const StegoTrace& trace, std::size_t payload_bits) {
  return utilization(information_content(trace), payload_bits);
}

/// Lower bound on utilization:
///   (1 - K / |m*|) * (1 - n_all * sqrt(lambda / 2^N) / (ln 2 * I)).
/// Each factor is floored at zero before multiplying, so the result lies in [0, 1].
inline double utilization_bound(double lambda, unsigned list_bits, std::size_t n_all, double information_bits,
                                std::size_t payload_bits, double overhead_bits) {
  if (!(information_bits > 0.0) || payload_bits == 0) {
    throw Error(ErrorCode::kInvalidInput, "utilization bound needs I > 0 and a non-empty payload");
  }
  const double f1 = 1.0 - overhead_bits / static_cast<double>(payload_bits);
  const double f2 = 1.0 - static_cast<double>(n_all) * std::sqrt(lambda / std::ldexp(1.0, static_cast<int>(list_bits))) /
                              (std::log(2.0) * information_bits);
  return std::clamp(std::max(f1, 0.0) * std::max(f2, 0.0), 0.0, 1.0);
}

/// Fraction of equal bits.
inline double success_rate(const BitString& sent, const BitString& received) {
  if (sent.size() != received.size()) throw Error(ErrorCode::kInvalidInput, "bit strings differ in length");
  if (sent.empty()) return 1.0;
  std::size_t diff = 0;
  const auto a = sent.words();
  const auto b = received.words();
  for (std::size_t i = 0; i < a.size(); ++i) diff += static_cast<std::size_t>(std::popcount(a[i] ^ b[i]));
  return 1.0 - static_cast<double>(diff) / static_cast<double>(sent.size());
}

// Chi-square goodness of fit ---------------------------------------------------

struct ChiSquareResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t degrees_of_freedom = 0;
  std::size_t categories = 0;
};

/// Upper-tail probability of the chi-square distribution (regularized upper
/// incomplete gamma Q(df/2, x/2)).
inline double chi_square_sf(double statistic, std::size_t df) {
  if (statistic <= 0.0) return 1.0;
  if (!std::isfinite(statistic)) return 0.0;
  return boost::math::gamma_q(static_cast<double>(df) / 2.0, statistic / 2.0);
}

/// Pearson test of `observed` counts against `expected`.
///
/// Categories with expected count below 5 are pooled into one; if the pool is
/// still below 5 it absorbs the smallest remaining category. Observations on
/// a zero-weight token make the statistic infinite (p = 0).
inline ChiSquareResult chi_square_gof(std::span<const std::uint64_t> observed, const QuantizedDistribution& expected) {
  if (observed.size() != expected.vocab_size()) {
    throw Error(ErrorCode::kInvalidInput, "observed counts and distribution differ in size");
  }
  const std::uint64_t total = std::accumulate(observed.begin(), observed.end(), std::uint64_t{0});
  if (total == 0) throw Error(ErrorCode::kInvalidInput, "no observations");

  struct Cell {
    double obs;
    double exp;
  };
  std::vector<Cell> cells;
  Cell pool{0.0, 0.0};
  bool impossible = false;
  for (std::size_t s = 0; s < observed.size(); ++s) {
    const double e = static_cast<double>(total) * static_cast<double>(expected.weight(static_cast<TokenId>(s))) /
                     static_cast<double>(kProbabilityOne);
    const auto o = static_cast<double>(observed[s]);
    if (e == 0.0) {
      if (o > 0.0) impossible = true;
      continue;
    }
    if (e < 5.0) {
      pool.obs += o;
      pool.exp += e;
    } else {
      cells.push_back({o, e});
    }
  }
  if (pool.exp > 0.0) {
    if (pool.exp < 5.0 && !cells.empty()) {
      auto smallest = std::min_element(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) { return a.exp < b.exp; });
      smallest->obs += pool.obs;
      smallest->exp += pool.exp;
    } else {
      cells.push_back(pool);
    }
  }
  if (cells.size() < 2) throw Error(ErrorCode::kDegenerateSupport, "fewer than two categories after pooling");

  ChiSquareResult r;
  r.categories = cells.size();
  r.degrees_of_freedom = cells.size() - 1;
  if (impossible) {
    r.statistic = std::numeric_limits<double>::infinity();
    r.p_value = 0.0;
    return r;
  }
  for (const auto& c : cells) r.statistic += (c.obs - c.exp) * (c.obs - c.exp) / c.exp;
  r.p_value = chi_square_sf(r.statistic, r.degrees_of_freedom);
  return r;
}

// Capacity report --------------------------------------------------------------

struct CapacityReport {
  double total_information = 0.0;  // I
  double entropy_per_token = 0.0;  // H = I / n_all
  std::size_t embedded_bits = 0;   // B = |m*|
  std::size_t tokens = 0;          // n_all
  std::size_t suffix_tokens = 0;   // n_suf
  std::size_t suffix_bits = 0;     // b
  unsigned list_bits = 0;          // N
  double lambda = 0.0;
  double utilization = 0.0;        // R
  double bound = 0.0;              // lower bound on R
  double overhead_bits = 0.0;      // K, floored at 0
  /// Bits the last expansion wrote past payload || suf; at least 1, since
  /// the loop only stops once the list is longer than the message.
  std::size_t overshoot_bits = 0;
  /// `bound` with K raised by the overshoot plus one bit of list-size slack.
  /// The plain bound assumes the tokens fix exactly |m*| + K bits, which the
  /// last token can exceed by up to its own self-information.
  double finite_bound = 0.0;

  std::string to_kv() const {
    std::ostringstream os;
    os << std::setprecision(10);
    os << "information_bits=" << total_information << '\n'
       << "entropy_per_token=" << entropy_per_token << '\n'
       << "embedded_bits=" << embedded_bits << '\n'
       << "tokens=" << tokens << '\n'
       << "suffix_tokens=" << suffix_tokens << '\n'
       << "suffix_bits=" << suffix_bits << '\n'
       << "list_bits=" << list_bits << '\n'
       << "lambda=" << lambda << '\n'
       << "utilization=" << utilization << '\n'
       << "utilization_bound=" << bound << '\n'
       << "overhead_bits=" << overhead_bits << '\n'
       << "overshoot_bits=" << overshoot_bits << '\n'
       << "utilization_bound_finite=" << finite_bound << '\n';
    return os.str();
  }

  nlohmann::json to_json() const {
    return {{"information_bits", total_information},
            {"entropy_per_token", entropy_per_token},
            {"embedded_bits", embedded_bits},
            {"tokens", tokens},
            {"suffix_tokens", suffix_tokens},
            {"suffix_bits", suffix_bits},
            {"list_bits", list_bits},
            {"lambda", lambda},
            {"utilization", utilization},
            {"utilization_bound", bound},
            {"overhead_bits", overhead_bits},
            {"overshoot_bits", overshoot_bits},
            {"utilization_bound_finite", finite_bound}};
  }
};

inline CapacityReport capacity_report(const StegoTrace& trace, std::size_t payload_bits, const CodecParams& params) {
  CapacityReport r;
  r.total_information = information_content(trace);
  r.tokens = trace.total_tokens();
  r.entropy_per_token = r.tokens > 0 ? r.total_information / static_cast<double>(r.tokens) : 0.0;
  r.embedded_bits = payload_bits;
  r.suffix_tokens = trace.suffix_tokens;
  r.suffix_bits = params.suffix_bits;
  r.list_bits = params.list_bits;
  r.lambda = params.lambda;
  r.overhead_bits = std::max(0.0, static_cast<double>(params.suffix_bits) - static_cast<double>(params.list_bits));
  const std::size_t message_bits = payload_bits + params.suffix_bits;
  r.overshoot_bits = trace.final_bit_length > message_bits ? trace.final_bit_length - message_bits : 0;
  if (r.total_information > 0.0) {
    r.utilization = utilization(r.total_information, payload_bits);
    r.bound = utilization_bound(params.lambda, params.list_bits, r.tokens, r.total_information, payload_bits,
                                r.overhead_bits);
    r.finite_bound = utilization_bound(params.lambda, params.list_bits, r.tokens, r.total_information, payload_bits,
                                       r.overhead_bits + static_cast<double>(r.overshoot_bits) + 1.0);
  }
  return r;
}

}  // namespace liststeg

#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "liststeg/error.hpp"

namespace liststeg {

using TokenId = std::uint32_t;

/// Total mass of every quantized distribution.
inline constexpr std::uint64_t kProbabilityOne = std::uint64_t{1} << 32;

/// Next-token probabilities on the fixed 2^32 integer grid.
class QuantizedDistribution {
 public:
  /// Validates the grid sum; throws invalid-distribution otherwise.
  explicit QuantizedDistribution(std::vector<std::uint64_t> weights) : weights_(std::move(weights)) {
    if (weights_.size() < 2) {
      throw Error(ErrorCode::kInvalidDistribution, "vocabulary must hold at least two tokens");
    }
    if (weights_.size() > (std::size_t{1} << 31)) {
      throw Error(ErrorCode::kInvalidDistribution, "vocabulary too large");
    }
    std::uint64_t sum = 0;
    for (auto w : weights_) {
      if (w > kProbabilityOne) throw Error(ErrorCode::kInvalidDistribution, "weight above 2^32");
      sum += w;
      if (sum > kProbabilityOne) break;
    }
    if (sum != kProbabilityOne) {
      throw Error(ErrorCode::kInvalidDistribution, "weights must sum to exactly 2^32");
    }
  }

  std::size_t vocab_size() const noexcept { return weights_.size(); }
  std::uint64_t weight(TokenId s) const { return weights_.at(s); }
  std::span<const std::uint64_t> weights() const noexcept { return weights_; }
  double probability(TokenId s) const { return static_cast<double>(weight(s)) / kProbabilityOne; }

  friend bool operator==(const QuantizedDistribution&, const QuantizedDistribution&) = default;

 private:
  std::vector<std::uint64_t> weights_;
};

/// Shannon entropy in bits.
inline double entropy_bits(const QuantizedDistribution& d) {
  double h = 0.0;
  for (auto w : d.weights()) {
    if (w == 0) continue;
    const double p = static_cast<double>(w) / kProbabilityOne;
    h -= p * std::log2(p);
  }
  return h;
}

/// Maps a non-negative probability vector onto the 2^32 grid.
///
/// Every raw value is treated as the exact binary rational it represents, so
/// the result does not depend on floating-point summation order:
///   w_i = floor(raw_i * 2^32 / sum), and the leftover grid units go one per
/// token by descending fractional remainder (ties to the smaller id), with
/// positive tokens that floored to zero served first.
inline QuantizedDistribution quantize(std::span<const double> raw) {
  using boost::multiprecision::cpp_int;
  const std::size_t n = raw.size();
  if (n < 2) throw Error(ErrorCode::kInvalidDistribution, "vocabulary must hold at least two tokens");

  std::vector<std::int64_t> mantissa(n, 0);
  std::vector<int> exponent(n, 0);
  int min_exp = 0;
  bool any_positive = false;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = raw[i];
    if (!std::isfinite(x) || x < 0.0) {
      throw Error(ErrorCode::kInvalidDistribution, "raw probabilities must be finite and >= 0");
    }
    if (x == 0.0) continue;
    int e = 0;
    const double frac = std::frexp(x, &e);  // x = frac * 2^e, frac in [0.5, 1)
    mantissa[i] = static_cast<std::int64_t>(std::ldexp(frac, 53));
    exponent[i] = e - 53;
    if (!any_positive || exponent[i] < min_exp) min_exp = exponent[i];
    any_positive = true;
  }
  if (!any_positive) throw Error(ErrorCode::kInvalidDistribution, "all-zero probability vector");

  std::vector<cpp_int> scaled(n);
  cpp_int total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (mantissa[i] == 0) continue;
    scaled[i] = cpp_int(mantissa[i]) << (exponent[i] - min_exp);
    total += scaled[i];
  }

  std::vector<std::uint64_t> weights(n, 0);
  std::vector<cpp_int> remainder(n);
  std::uint64_t assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (mantissa[i] == 0) continue;
    cpp_int q;
    cpp_int r;
    boost::multiprecision::divide_qr(cpp_int(scaled[i] << 32), total, q, r);
    weights[i] = q.convert_to<std::uint64_t>();
    remainder[i] = std::move(r);
    assigned += weights[i];
  }

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < n; ++i) {
    if (mantissa[i] != 0 && remainder[i] != 0) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const bool za = weights[a] == 0;
    const bool zb = weights[b] == 0;
    if (za != zb) return za;
    if (remainder[a] != remainder[b]) return remainder[a] > remainder[b];
    return a < b;
  });
  const std::uint64_t residual = kProbabilityOne - assigned;
  for (std::uint64_t k = 0; k < residual; ++k) ++weights[order.at(k)];
  return QuantizedDistribution(std::move(weights));
}

inline QuantizedDistribution quantize(std::initializer_list<double> raw) {
  return quantize(std::span<const double>(raw.begin(), raw.size()));
}

/// All mass on one token.
inline QuantizedDistribution point_mass(std::size_t vocab_size, TokenId token) {
  std::vector<std::uint64_t> w(vocab_size, 0);
  w.at(token) = kProbabilityOne;
  return QuantizedDistribution(std::move(w));
}

}  // namespace liststeg

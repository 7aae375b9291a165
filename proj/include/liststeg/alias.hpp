#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "liststeg/dist.hpp"
#include "liststeg/error.hpp"

namespace liststeg {

/// Walker alias decomposition built in exact integer arithmetic.
///
/// Slot i yields `primary(i)` when the second random word is below the
/// slot threshold and `alias(i)` otherwise. Thresholds are 64-bit fixed
/// point probabilities; a slot with no alias has threshold 2^64, stored as
/// primary == alias so that sampling needs no special case.
class AliasTable {
 public:
  struct Slot {
    std::uint64_t threshold;
    TokenId primary;
    TokenId alias;
  };

  explicit AliasTable(const QuantizedDistribution& d) { build(d); }

  std::size_t vocab_size() const noexcept { return slots_.size(); }
  TokenId primary(std::size_t i) const { return slots_.at(i).primary; }
  TokenId alias(std::size_t i) const { return slots_.at(i).alias; }
  bool is_full(std::size_t i) const { return slots_.at(i).primary == slots_.at(i).alias; }

  /// Exact threshold in units of 2^-64; 2^64 for slots without alias.
  unsigned __int128 threshold(std::size_t i) const {
    return is_full(i) ? (static_cast<unsigned __int128>(1) << 64) : slots_.at(i).threshold;
  }

  std::span<const Slot> slots() const noexcept { return slots_; }

  TokenId sample(std::uint64_t slot_word, std::uint64_t coin_word) const noexcept {
    const auto x = static_cast<std::size_t>(
        (static_cast<unsigned __int128>(slots_.size()) * slot_word) >> 64);
    const Slot& s = slots_[x];
    return coin_word < s.threshold ? s.primary : s.alias;
  }

  /// Sample i consumes randoms[2i] (slot choice) and randoms[2i+1] (coin).
  void sample_batch(std::span<const std::uint64_t> randoms, std::span<TokenId> out) const {
    if (randoms.size() % 2 != 0) throw Error(ErrorCode::kInvalidInput, "odd number of random words");
    if (out.size() != randoms.size() / 2) throw Error(ErrorCode::kInvalidInput, "output size mismatch");
    const auto v = static_cast<unsigned __int128>(slots_.size());
    const Slot* slots = slots_.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
      const auto x = static_cast<std::size_t>((v * randoms[2 * i]) >> 64);
      const Slot& s = slots[x];
      out[i] = randoms[2 * i + 1] < s.threshold ? s.primary : s.alias;
    }
  }

  std::vector<TokenId> sample_batch(std::span<const std::uint64_t> randoms) const {
    std::vector<TokenId> out(randoms.size() / 2);
    sample_batch(randoms, out);
    return out;
  }

 private:
  // Scaled weights q_i = |V| * w_i are kept over the common denominator 2^32,
  // so q_i < 1 is the integer test |V| * w_i < 2^32. The small and large
  // worklists are served smallest id first. Large tokens leave the large list
  // in ascending id order, so tokens demoted to the small list arrive sorted
  // and the small list is a merge of two ascending queues.
  void build(const QuantizedDistribution& d) {
    const std::size_t v = d.vocab_size();
    std::vector<std::uint64_t> q(v);
    std::vector<TokenId> small_init;
    std::vector<TokenId> large;
    for (std::size_t i = 0; i < v; ++i) {
      q[i] = static_cast<std::uint64_t>(v) * d.weights()[i];
      (q[i] < kProbabilityOne ? small_init : large).push_back(static_cast<TokenId>(i));
    }
    std::vector<TokenId> demoted;
    std::size_t si = 0;
    std::size_t di = 0;
    std::size_t li = 0;
    slots_.clear();
    slots_.reserve(v);

    auto pop_small = [&]() -> TokenId {
      const bool take_demoted =
          di < demoted.size() && (si == small_init.size() || demoted[di] < small_init[si]);
      return take_demoted ? demoted[di++] : small_init[si++];
    };

    while ((si < small_init.size() || di < demoted.size()) && li < large.size()) {
      const TokenId j = pop_small();
      const TokenId k = large[li];
      slots_.push_back({q[j] << 32, j, k});
      q[k] -= kProbabilityOne - q[j];
      if (q[k] < kProbabilityOne) {
        demoted.push_back(k);
        ++li;
      }
    }
    // Leftovers hold exactly one unit of scaled mass each.
    while (li < large.size()) {
      const TokenId k = large[li++];
      slots_.push_back({~std::uint64_t{0}, k, k});
    }
    while (si < small_init.size() || di < demoted.size()) {
      const TokenId j = pop_small();
      slots_.push_back({~std::uint64_t{0}, j, j});
    }
  }

  std::vector<Slot> slots_;
};

}  // namespace liststeg

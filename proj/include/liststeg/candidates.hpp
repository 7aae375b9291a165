#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "liststeg/bitstring.hpp"
#include "liststeg/dist.hpp"
#include "liststeg/error.hpp"

namespace liststeg {

/// Strictly ascending list of equal-length bit strings.
///
/// Position in the list is the index used by the message-to-token mapping:
/// the i-th member (ascending) takes the i-th sample of a step.
class CandidateList {
 public:
  /// All 2^width strings of length `width` in ascending order.
  static CandidateList all_strings(std::size_t width) {
    if (width > 26) throw Error(ErrorCode::kOutOfRange, "list width above 26 bits");
    CandidateList out;
    out.bit_length_ = width;
    out.members_.reserve(std::size_t{1} << width);
    for (std::uint64_t i = 0; i < (std::uint64_t{1} << width); ++i) {
      out.members_.push_back(BitString::from_uint(i, width));
    }
    return out;
  }

  /// Validates ordering and common length.
  static CandidateList from_members(std::vector<BitString> members) {
    CandidateList out;
    if (!members.empty()) out.bit_length_ = members.front().size();
    for (std::size_t i = 0; i < members.size(); ++i) {
      if (members[i].size() != out.bit_length_) {
        throw Error(ErrorCode::kInvalidInput, "candidates must share one bit length");
      }
      if (i > 0 && !(members[i - 1] < members[i])) {
        throw Error(ErrorCode::kInvalidInput, "candidates must be strictly ascending");
      }
    }
    out.members_ = std::move(members);
    return out;
  }

  std::size_t size() const noexcept { return members_.size(); }
  bool empty() const noexcept { return members_.empty(); }
  std::size_t bit_length() const noexcept { return bit_length_; }
  const BitString& operator[](std::size_t i) const { return members_.at(i); }
  std::span<const BitString> members() const noexcept { return members_; }

  /// Position of `m` via binary search, or size() if absent.
  std::size_t find(const BitString& m) const {
    auto it = std::lower_bound(members_.begin(), members_.end(), m);
    if (it == members_.end() || !(*it == m)) return members_.size();
    return static_cast<std::size_t>(it - members_.begin());
  }

  /// Keeps members whose mapped sample equals `token`; order is preserved.
  void filter(std::span<const TokenId> samples, TokenId token) {
    if (samples.size() != members_.size()) throw Error(ErrorCode::kInvalidInput, "sample count mismatch");
    std::size_t w = 0;
    for (std::size_t i = 0; i < members_.size(); ++i) {
      if (samples[i] == token) members_[w++] = std::move(members_[i]);
    }
    members_.resize(w);
  }

  /// Replaces every m with m||0, m||1 (in that order).
  void expand() {
    std::vector<BitString> next;
    next.reserve(2 * members_.size());
    for (auto& m : members_) {
      BitString zero = m;
      zero.push_back(false);
      m.push_back(true);
      next.push_back(std::move(zero));
      next.push_back(std::move(m));
    }
    members_ = std::move(next);
    ++bit_length_;
  }

 private:
  std::vector<BitString> members_;
  std::size_t bit_length_ = 0;
};

/// Picks the payload out of the final candidates.
///
/// A member matches when its bits payload_len+1 .. payload_len+|suf| equal
/// `suf`. All matches must agree on their first payload_len bits; members
/// longer than payload_len+|suf| (expansion overshoot) are allowed.
inline BitString match_suffix(const CandidateList& members, std::size_t payload_len, const BitString& suf) {
  if (members.bit_length() < payload_len + suf.size()) {
    throw Error(ErrorCode::kInvalidInput, "candidates shorter than payload plus suffix");
  }
  const BitString* first = nullptr;
  BitString result;
  for (const auto& m : members.members()) {
    if (!(slice(m, payload_len + 1, payload_len + suf.size()) == suf)) continue;
    if (first == nullptr) {
      first = &m;
      result = prefix(m, payload_len);
    } else if (!(prefix(m, payload_len) == result)) {
      throw Error(ErrorCode::kAmbiguousDecode, "several candidates carry the validation suffix");
    }
  }
  if (first == nullptr) throw Error(ErrorCode::kNoMatch, "no candidate carries the validation suffix");
  return result;
}

}  // namespace liststeg

#pragma once

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "liststeg/alias.hpp"
#include "liststeg/bitstring.hpp"
#include "liststeg/candidates.hpp"
#include "liststeg/dist.hpp"
#include "liststeg/error.hpp"
#include "liststeg/model.hpp"
#include "liststeg/prg.hpp"

namespace liststeg {

inline constexpr unsigned kMaxListBits = 26;

struct CodecParams {
  /// log2 of the candidate-list cap.
  unsigned list_bits = 16;
  /// Validation suffix length b.
  std::size_t suffix_bits = 0;
  /// Security parameter lambda; only used for bound bookkeeping.
  double lambda = 40.0;
  SecretKey key;
  /// Encoding gives up after this many tokens.
  std::size_t max_tokens = 1'000'000;

  void validate() const {
    if (list_bits < 1 || list_bits > kMaxListBits) {
      throw Error(ErrorCode::kInvalidInput, "list_bits must be in [1, 26]");
    }
    if (!(lambda >= 0.0)) throw Error(ErrorCode::kInvalidInput, "lambda must be >= 0");
  }
};

/// Encoder output: the token sequence and per-step bookkeeping.
struct StegoTrace {
  std::vector<TokenId> tokens;
  /// Quantized weight (out of 2^32) of each emitted token under its step's distribution.
  std::vector<std::uint64_t> per_step_weight;
  /// Loop iterations (cnt).
  std::size_t steps = 0;
  /// Tokens emitted while the selected prefix already reached into the suffix.
  std::size_t suffix_tokens = 0;
  /// Candidate bit length when the loop ended.
  std::size_t final_bit_length = 0;

  std::size_t total_tokens() const noexcept { return tokens.size(); }
};

// Bounds ------------------------------------------------------------------

using HighPrecision = boost::multiprecision::cpp_bin_float_50;

/// Smallest suffix length b with collision probability below e^-lambda:
/// ceil(lambda * log2(e) + n * log2(1 + sqrt(lambda / 2^N))).
inline std::size_t suffix_length(double lambda, std::size_t n_estimate, unsigned list_bits) {
  if (!(lambda >= 0.0)) throw Error(ErrorCode::kInvalidInput, "lambda must be >= 0");
  const HighPrecision lam(lambda);
  const HighPrecision ln2 = boost::multiprecision::log(HighPrecision(2));
  const HighPrecision cap = boost::multiprecision::ldexp(HighPrecision(1), static_cast<int>(list_bits));
  const HighPrecision term1 = lam / ln2;
  const HighPrecision term2 =
      HighPrecision(n_estimate) * boost::multiprecision::log1p(boost::multiprecision::sqrt(lam / cap)) / ln2;
  const HighPrecision b = boost::multiprecision::ceil(term1 + term2);
  return b.convert_to<std::size_t>();
}

/// Upper bound on a wrong candidate surviving the suffix phase:
/// 2^-b / (1 + sqrt(lambda / 2^N))^n.
inline double collision_bound(std::size_t b, double lambda, unsigned list_bits, std::size_t n) {
  const HighPrecision lam(lambda);
  const HighPrecision cap = boost::multiprecision::ldexp(HighPrecision(1), static_cast<int>(list_bits));
  const HighPrecision denom =
      boost::multiprecision::pow(1 + boost::multiprecision::sqrt(lam / cap), HighPrecision(n));
  const HighPrecision v = boost::multiprecision::ldexp(HighPrecision(1), -static_cast<int>(b)) / denom;
  return v.convert_to<double>();
}

// Per-step instrumentation ---------------------------------------------------

struct StepEvent {
  std::size_t step = 0;
  std::size_t list_before = 0;
  TokenId token = 0;
  std::uint64_t token_weight = 0;
  std::size_t list_after_filter = 0;
  std::size_t list_after_expand = 0;
  std::size_t bit_length = 0;
  /// Encoder only: position of the true prefix after the step.
  std::size_t true_index = std::numeric_limits<std::size_t>::max();
  std::span<const TokenId> samples;
};

using StepObserver = std::function<void(const StepEvent&)>;

namespace detail {

/// Draws one sample per candidate from the sampling stream, two words each.
class StepSampler {
 public:
  static constexpr std::size_t kChunk = 4096;

  explicit StepSampler(const SecretKey& key) : prg_(key, PrgDomain::kSampling) {}

  const AliasTable& table_for(const std::shared_ptr<const QuantizedDistribution>& d) {
    if (d != cached_dist_ || !table_) {
      table_ = std::make_unique<AliasTable>(*d);
      cached_dist_ = d;
    }
    return *table_;
  }

  std::span<const TokenId> draw(const AliasTable& table, std::size_t count) {
    samples_.resize(count);
    if (randoms_.size() < 2 * std::min(kChunk, count)) randoms_.resize(2 * std::min(kChunk, count));
    for (std::size_t done = 0; done < count; done += kChunk) {
      const std::size_t n = std::min(kChunk, count - done);
      auto r = std::span<std::uint64_t>(randoms_).first(2 * n);
      prg_.fill_u64(r);
      table.sample_batch(r, std::span<TokenId>(samples_).subspan(done, n));
    }
    return samples_;
  }

  std::uint64_t random_words_consumed() const { return prg_.position() / 64; }

 private:
  PrgStream prg_;
  std::vector<std::uint64_t> randoms_;
  std::vector<TokenId> samples_;
  std::shared_ptr<const QuantizedDistribution> cached_dist_;
  std::unique_ptr<AliasTable> table_;
};

/// Which positions of one step's list survived filtering, plus the number
/// of expansion bits applied afterwards.
///
/// Stored as whichever is smallest: nothing (all kept), the kept positions,
/// the dropped positions, or a bitmask with per-word ranks.
class SurvivorRecord {
 public:
  SurvivorRecord(std::span<const TokenId> samples, TokenId token) : before_(samples.size()) {
    const std::size_t nwords = (before_ + 63) / 64;
    words_.assign(nwords, 0);
    for (std::size_t i = 0; i < before_; ++i) {
      words_[i >> 6] |= std::uint64_t{samples[i] == token} << (i & 63);
    }
    for (auto w : words_) kept_ += static_cast<std::size_t>(std::popcount(w));

    if (kept_ == before_) {
      kind_ = Kind::kAll;
      words_ = {};
    } else if (kept_ * 32 < before_) {
      kind_ = Kind::kPositions;
      list_ = collect(true);
      words_ = {};
    } else if ((before_ - kept_) * 32 < before_) {
      kind_ = Kind::kExcluded;
      list_ = collect(false);
      words_ = {};
    } else {
      kind_ = Kind::kMask;
      rank_.resize(nwords);
      std::uint32_t acc = 0;
      for (std::size_t w = 0; w < nwords; ++w) {
        rank_[w] = acc;
        acc += static_cast<std::uint32_t>(std::popcount(words_[w]));
      }
    }
  }

  std::size_t before() const noexcept { return before_; }
  std::size_t kept() const noexcept { return kept_; }
  unsigned expansion() const noexcept { return expansion_; }
  std::size_t bit_length_after() const noexcept { return bit_length_after_; }

  void set_expansion(unsigned e, std::size_t bit_length_after) {
    expansion_ = e;
    bit_length_after_ = bit_length_after;
  }

  /// Pre-filter position of the k-th survivor, k < kept().
  std::size_t select(std::size_t k) const {
    switch (kind_) {
      case Kind::kAll:
        return k;
      case Kind::kPositions:
        return list_[k];
      case Kind::kExcluded: {
        // ex[j] - j is non-decreasing; count the dropped positions at or before the answer.
        std::size_t lo = 0, hi = list_.size();
        while (lo < hi) {
          const std::size_t mid = (lo + hi) / 2;
          if (list_[mid] - mid <= k) lo = mid + 1; else hi = mid;
        }
        return k + lo;
      }
      case Kind::kMask: {
        const auto it = std::upper_bound(rank_.begin(), rank_.end(), static_cast<std::uint32_t>(k));
        const std::size_t w = static_cast<std::size_t>(it - rank_.begin()) - 1;
        std::uint64_t word = words_[w];
        for (std::size_t r = k - rank_[w]; r > 0; --r) word &= word - 1;
        return w * 64 + static_cast<std::size_t>(std::countr_zero(word));
      }
    }
    return k;
  }

  /// List index before this step of list index `j` after it, and the bits
  /// the expansion appended to that candidate.
  std::pair<std::size_t, std::uint32_t> parent(std::size_t j) const {
    const std::uint32_t bits = static_cast<std::uint32_t>(j & ((std::size_t{1} << expansion_) - 1));
    return {select(j >> expansion_), bits};
  }

  std::size_t bytes() const noexcept {
    return sizeof(*this) + words_.size() * 8 + rank_.size() * 4 + list_.size() * 4;
  }

 private:
  enum class Kind : std::uint8_t { kAll, kPositions, kExcluded, kMask };

  std::vector<std::uint32_t> collect(bool kept) const {
    std::vector<std::uint32_t> out;
    out.reserve(kept ? kept_ : before_ - kept_);
    for (std::size_t w = 0; w < words_.size(); ++w) {
      std::uint64_t word = kept ? words_[w] : ~words_[w];
      if (w + 1 == words_.size() && (before_ & 63) != 0) word &= (std::uint64_t{1} << (before_ & 63)) - 1;
      while (word != 0) {
        out.push_back(static_cast<std::uint32_t>(w * 64 + static_cast<std::size_t>(std::countr_zero(word))));
        word &= word - 1;
      }
    }
    return out;
  }

  Kind kind_ = Kind::kAll;
  std::size_t before_ = 0;
  std::size_t kept_ = 0;
  unsigned expansion_ = 0;
  std::size_t bit_length_after_ = 0;
  std::vector<std::uint64_t> words_;
  std::vector<std::uint32_t> rank_;
  std::vector<std::uint32_t> list_;
};

inline std::size_t expansions_needed(std::size_t size, unsigned list_bits) {
  const std::size_t half = std::size_t{1} << (list_bits - 1);
  std::size_t e = 0;
  while (size <= half) {
    size <<= 1;
    ++e;
  }
  return e;
}

}  // namespace detail

/// Raised when encoding hits `max_tokens` before the message fits.
class TokenBudgetExceeded : public Error {
 public:
  TokenBudgetExceeded(StegoTrace partial, std::size_t bit_length, std::size_t message_bits)
      : Error(ErrorCode::kTokenBudgetExceeded,
              "token budget of " + std::to_string(partial.total_tokens()) + " exhausted at bit " +
                  std::to_string(bit_length) + " of " + std::to_string(message_bits)),
        partial_(std::move(partial)),
        bit_length_(bit_length),
        message_bits_(message_bits) {}

  const StegoTrace& partial_trace() const noexcept { return partial_; }
  std::size_t bit_length() const noexcept { return bit_length_; }
  std::size_t message_bits() const noexcept { return message_bits_; }

 private:
  StegoTrace partial_;
  std::size_t bit_length_;
  std::size_t message_bits_;
};

/// Step-wise encoder.
///
/// Embeds m = payload || suf. The candidate list is never stored: all
/// candidates share one length and stay in ascending order, so the encoder
/// only tracks the list size and the position of prefix(m, l). Filtering
/// maps that position to the number of surviving candidates before it;
/// expansion maps it to 2 * position + next message bit.
class Encoder {
 public:
  Encoder(const CodecParams& params, ModelSource model, const BitString& payload)
      : params_(params), model_(std::move(model)), sampler_(params.key), payload_bits_(payload.size()) {
    params_.validate();
    if (payload.empty()) throw Error(ErrorCode::kInvalidInput, "payload is empty");
    message_ = concat(payload, derive_suffix(params_.key, params_.suffix_bits));
    if (message_.size() < params_.list_bits) {
      throw Error(ErrorCode::kInvalidInput, "payload plus suffix shorter than the initial list width");
    }
    list_size_ = std::size_t{1} << params_.list_bits;
    bit_length_ = params_.list_bits;
    true_index_ = message_.read_uint0(0, params_.list_bits);
  }

  bool done() const noexcept { return bit_length_ > message_.size(); }

  TokenId step() {
    if (done()) throw Error(ErrorCode::kInvalidInput, "encoder already finished");
    const auto dist = model_.next_distribution();
    const AliasTable& table = sampler_.table_for(dist);
    const std::size_t before = list_size_;
    const auto samples = sampler_.draw(table, list_size_);
    const TokenId token = samples[true_index_];

    std::size_t kept_before = 0;
    std::size_t kept = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const std::size_t hit = samples[i] == token;
      kept += hit;
      if (i < true_index_) kept_before += hit;
    }
    if (bit_length_ > payload_bits_) ++trace_.suffix_tokens;

    true_index_ = kept_before;
    list_size_ = kept;
    const std::size_t after_filter = list_size_;
    const std::size_t e = detail::expansions_needed(list_size_, params_.list_bits);
    for (std::size_t k = 0; k < e; ++k) {
      const bool bit = bit_length_ + 1 <= message_.size() && message_.at(bit_length_ + 1);
      true_index_ = 2 * true_index_ + bit;
      list_size_ *= 2;
      ++bit_length_;
    }

    model_.append_history(token);
    trace_.tokens.push_back(token);
    trace_.per_step_weight.push_back(dist->weight(token));
    ++trace_.steps;
    trace_.final_bit_length = bit_length_;

    if (observer_) {
      observer_({trace_.steps, before, token, dist->weight(token), after_filter, list_size_, bit_length_,
                 true_index_, samples});
    }
    return token;
  }

  void set_observer(StepObserver obs) { observer_ = std::move(obs); }

  const StegoTrace& trace() const noexcept { return trace_; }
  StegoTrace take_trace() { return std::move(trace_); }
  const BitString& message() const noexcept { return message_; }
  std::size_t list_size() const noexcept { return list_size_; }
  std::size_t bit_length() const noexcept { return bit_length_; }
  std::size_t true_index() const noexcept { return true_index_; }
  std::uint64_t random_words_consumed() const { return sampler_.random_words_consumed(); }

 private:
  CodecParams params_;
  ModelSource model_;
  detail::StepSampler sampler_;
  std::size_t payload_bits_;
  BitString message_;
  std::size_t list_size_ = 0;
  std::size_t bit_length_ = 0;
  std::size_t true_index_ = 0;
  StegoTrace trace_;
  StepObserver observer_;
};

/// Step-wise decoder mirroring `Encoder`.
///
/// Like the encoder it only tracks the list size. Each step keeps a
/// SurvivorRecord; a candidate is rebuilt by walking the records backwards,
/// since list index j after a step is 2^e * (survivor rank) + (appended bits).
class Decoder {
 public:
  Decoder(const CodecParams& params, ModelSource model, std::size_t payload_bits)
      : params_(params), model_(std::move(model)), sampler_(params.key), payload_bits_(payload_bits) {
    params_.validate();
    if (payload_bits == 0) throw Error(ErrorCode::kInvalidInput, "payload length is zero");
    if (payload_bits + params_.suffix_bits < params_.list_bits) {
      throw Error(ErrorCode::kInvalidInput, "payload plus suffix shorter than the initial list width");
    }
    suffix_ = derive_suffix(params_.key, params_.suffix_bits);
    list_size_ = std::size_t{1} << params_.list_bits;
    bit_length_ = params_.list_bits;
  }

  bool done() const noexcept { return bit_length_ > payload_bits_ + suffix_.size(); }

  void step(TokenId token) {
    if (done()) throw Error(ErrorCode::kInvalidInput, "decoder already finished");
    const auto dist = model_.next_distribution();
    if (token >= dist->vocab_size()) throw Error(ErrorCode::kDesync, "token id outside vocabulary");
    const AliasTable& table = sampler_.table_for(dist);
    const std::size_t before = list_size_;
    const auto samples = sampler_.draw(table, list_size_);
    detail::SurvivorRecord rec(samples, token);
    ++steps_;
    if (rec.kept() == 0) {
      list_size_ = 0;
      throw Error(ErrorCode::kDesync, "no candidate maps to token at step " + std::to_string(steps_));
    }
    model_.append_history(token);
    const std::size_t e = detail::expansions_needed(rec.kept(), params_.list_bits);
    list_size_ = rec.kept() << e;
    bit_length_ += e;
    rec.set_expansion(static_cast<unsigned>(e), bit_length_);
    record_bytes_ += rec.bytes();
    records_.push_back(std::move(rec));
    if (observer_) {
      observer_({steps_, before, token, dist->weight(token), records_.back().kept(), list_size_, bit_length_,
                 std::numeric_limits<std::size_t>::max(), samples});
    }
  }

  /// Suffix matching over the final candidate list.
  ///
  /// Walks every final candidate back through the steps whose bits reach the
  /// suffix window, dropping those that disagree with suf. Survivors are
  /// grouped by their payload prefix (list index at the last step ending
  /// inside the payload, plus the payload bits of the next step); one group
  /// decodes, none is kNoMatch, several is kAmbiguousDecode.
  BitString finish() const {
    if (!done()) throw Error(ErrorCode::kTruncated, "stegotext ended before the suffix was embedded");
    const std::size_t lo = payload_bits_ + 1;
    const std::size_t hi = payload_bits_ + suffix_.size();

    struct Walker {
      std::size_t origin;   // index in the final list
      std::size_t index;    // index at the current level
      std::uint64_t partial = 0;  // payload bits from the chunk straddling the payload end
    };
    std::vector<Walker> active(list_size_);
    for (std::size_t j = 0; j < list_size_; ++j) active[j] = {j, j, 0};

    // Bits [from, from + n) of a candidate, given as the low n bits of `chunk`,
    // agree with suf wherever they overlap the window.
    auto agrees = [&](std::uint64_t chunk, std::size_t from, std::size_t n) {
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t pos = from + k;
        if (pos < lo || pos > hi) continue;
        if (((chunk >> (n - 1 - k)) & 1) != static_cast<std::uint64_t>(suffix_.at(pos - lo + 1))) return false;
      }
      return true;
    };

    std::size_t level = records_.size();
    auto length_at = [&](std::size_t t) { return t == 0 ? std::size_t{params_.list_bits} : records_[t - 1].bit_length_after(); };
    while (level > 0 && length_at(level) >= lo) {
      const auto& rec = records_[level - 1];
      const std::size_t from = length_at(level - 1) + 1;
      const std::size_t e = rec.expansion();
      std::size_t w = 0;
      for (auto& a : active) {
        const auto [prev, bits] = rec.parent(a.index);
        if (!agrees(bits, from, e)) continue;
        if (from <= payload_bits_) a.partial = bits >> (from + e - 1 - payload_bits_);
        a.index = prev;
        active[w++] = a;
      }
      active.resize(w);
      --level;
    }

    std::vector<std::pair<std::uint64_t, std::uint64_t>> keys;
    const std::size_t base = length_at(level);
    for (const auto& a : active) {
      if (base >= lo) {
        // Only the initial list can end past the payload; its index is the bit string itself.
        if (!agrees(a.index, 1, base)) continue;
        keys.emplace_back(a.index >> (base - payload_bits_), 0);
      } else {
        keys.emplace_back(a.index, a.partial);
      }
    }
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    if (keys.empty()) throw Error(ErrorCode::kNoMatch, "no candidate carries the validation suffix");
    if (keys.size() > 1) throw Error(ErrorCode::kAmbiguousDecode, "several candidates carry the validation suffix");

    std::size_t origin = 0;
    for (const auto& a : active) {
      if (base < lo || agrees(a.index, 1, base)) {
        origin = a.origin;
        break;
      }
    }
    return match_suffix(CandidateList::from_members({member(origin)}), payload_bits_, suffix_);
  }

  void set_observer(StepObserver obs) { observer_ = std::move(obs); }

  std::size_t list_size() const noexcept { return list_size_; }
  std::size_t bit_length() const noexcept { return bit_length_; }
  std::size_t steps() const noexcept { return steps_; }
  std::size_t record_bytes() const noexcept { return record_bytes_; }
  const BitString& suffix() const noexcept { return suffix_; }

  /// The i-th current candidate (ascending order), rebuilt from the records.
  BitString member(std::size_t i) const {
    if (i >= list_size_) throw Error(ErrorCode::kOutOfRange, "candidate index out of range");
    std::vector<std::pair<std::uint32_t, unsigned>> chunks;
    chunks.reserve(records_.size());
    std::size_t j = i;
    for (std::size_t t = records_.size(); t > 0; --t) {
      const auto [prev, bits] = records_[t - 1].parent(j);
      chunks.emplace_back(bits, records_[t - 1].expansion());
      j = prev;
    }
    BitString out = BitString::from_uint(j, params_.list_bits);
    for (auto it = chunks.rbegin(); it != chunks.rend(); ++it) out.append_uint(it->first, it->second);
    return out;
  }

 private:
  CodecParams params_;
  ModelSource model_;
  detail::StepSampler sampler_;
  std::size_t payload_bits_;
  BitString suffix_;
  std::vector<detail::SurvivorRecord> records_;
  std::size_t record_bytes_ = 0;
  std::size_t list_size_ = 0;
  std::size_t bit_length_ = 0;
  std::size_t steps_ = 0;
  StepObserver observer_;
};

/// Runs the encoder to completion.
inline StegoTrace encode(const CodecParams& params, const ModelSource& model, const BitString& payload) {
  Encoder enc(params, model, payload);
  while (!enc.done()) {
    if (enc.trace().total_tokens() >= params.max_tokens) {
      throw TokenBudgetExceeded(enc.trace(), enc.bit_length(), enc.message().size());
    }
    enc.step();
  }
  return enc.take_trace();
}

/// Recovers a payload of `payload_bits` bits. Tokens after the point where
/// the suffix is fully embedded are ignored.
inline BitString decode(const CodecParams& params, const ModelSource& model, std::span<const TokenId> tokens,
                        std::size_t payload_bits) {
  if (tokens.empty()) throw Error(ErrorCode::kTruncated, "stegotext is empty");
  Decoder dec(params, model, payload_bits);
  std::size_t i = 0;
  while (!dec.done()) {
    if (i == tokens.size()) throw Error(ErrorCode::kTruncated, "stegotext ended before the suffix was embedded");
    dec.step(tokens[i++]);
  }
  return dec.finish();
}

struct SuffixResolution {
  std::size_t suffix_bits;
  std::size_t suffix_tokens;
  std::size_t dry_runs;
  /// The encoding under the chosen b; identical to encode() with it.
  StegoTrace trace;
};

inline constexpr std::size_t kMaxSuffixRuns = 16;

/// Two-pass choice of b: dry-run the encoder, measure the suffix-phase
/// token count n, and grow b until suffix_length(lambda, n, N) <= b.
inline SuffixResolution resolve_suffix_bits(CodecParams params, const ModelSource& model, const BitString& payload) {
  std::size_t b = suffix_length(params.lambda, 0, params.list_bits);
  for (std::size_t run = 1;; ++run) {
    params.suffix_bits = b;
    StegoTrace dry = encode(params, model, payload);
    const std::size_t need = suffix_length(params.lambda, dry.suffix_tokens, params.list_bits);
    if (need <= b) return {b, dry.suffix_tokens, run, std::move(dry)};
    // b grows with n; when each suffix token costs more than it carries the iteration diverges.
    if (run == kMaxSuffixRuns) {
      throw Error(ErrorCode::kInvalidInput, "suffix length did not converge; pass an explicit b or raise N");
    }
    b = need;
  }
}

}  // namespace liststeg

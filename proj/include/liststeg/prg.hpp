#pragma once

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "liststeg/bitstring.hpp"
#include "liststeg/error.hpp"

namespace liststeg {

/// Label mixed into the stream nonce. Encoder and decoder draw from both.
enum class PrgDomain : std::uint8_t {
  kSampling = 0,
  kSuffix = 1,
};

namespace detail {

/// Nonce layout: "LSTG" 0 0 0 <domain>.
inline std::array<std::uint8_t, 8> stream_nonce(PrgDomain domain) {
  return {'L', 'S', 'T', 'G', 0, 0, 0, static_cast<std::uint8_t>(domain)};
}

/// ChaCha20 with a 64-bit block counter and 64-bit nonce (the original
/// layout: state words 12-13 hold the counter, 14-15 the nonce).
class ChaCha20 {
 public:
  ChaCha20(const SecretKey& key, std::span<const std::uint8_t, 8> nonce) : ctx_(EVP_CIPHER_CTX_new()) {
    if (!ctx_ || EVP_EncryptInit_ex2(ctx_.get(), cipher(), key.bytes().data(), nullptr, nullptr) != 1) {
      throw Error(ErrorCode::kInvalidInput, "ChaCha20 initialisation failed");
    }
    std::copy(nonce.begin(), nonce.end(), iv_.begin() + 8);
  }

  /// Keystream starting at block `first_block`, written over `out`.
  void keystream(std::uint64_t first_block, std::span<std::uint8_t> out) {
    static const std::vector<std::uint8_t> zeros(kZeroChunk, 0);
    for (int i = 0; i < 8; ++i) iv_[i] = static_cast<std::uint8_t>(first_block >> (8 * i));
    if (EVP_EncryptInit_ex2(ctx_.get(), nullptr, nullptr, iv_.data(), nullptr) != 1) {
      throw Error(ErrorCode::kInvalidInput, "ChaCha20 IV setup failed");
    }
    for (std::size_t done = 0; done < out.size(); done += kZeroChunk) {
      const int n = static_cast<int>(std::min(kZeroChunk, out.size() - done));
      int len = 0;
      if (EVP_EncryptUpdate(ctx_.get(), out.data() + done, &len, zeros.data(), n) != 1 || len != n) {
        throw Error(ErrorCode::kInvalidInput, "ChaCha20 keystream generation failed");
      }
    }
  }

 private:
  static constexpr std::size_t kZeroChunk = 1 << 16;

  // Fetched once; the implicit fetch behind EVP_chacha20() costs more than a short keystream.
  static const EVP_CIPHER* cipher() {
    static const std::unique_ptr<EVP_CIPHER, void (*)(EVP_CIPHER*)> c(EVP_CIPHER_fetch(nullptr, "ChaCha20", nullptr),
                                                                     EVP_CIPHER_free);
    if (!c) throw Error(ErrorCode::kInvalidInput, "ChaCha20 unavailable in libcrypto");
    return c.get();
  }

  struct CtxFree {
    void operator()(EVP_CIPHER_CTX* c) const { EVP_CIPHER_CTX_free(c); }
  };
  std::unique_ptr<EVP_CIPHER_CTX, CtxFree> ctx_;
  // OpenSSL's 16-byte IV: little-endian block counter (8 bytes, carried), then the nonce.
  std::array<std::uint8_t, 16> iv_{};
};

inline std::uint64_t load_be64(const std::uint8_t* p) {
  std::uint64_t v;
  std::memcpy(&v, p, 8);
  if constexpr (std::endian::native == std::endian::little) v = __builtin_bswap64(v);
  return v;
}

}  // namespace detail

/// Keyed, domain-separated pseudorandom bit stream.
///
/// The stream is ChaCha20 in counter mode under the 256-bit key with the
/// domain label in the nonce. Bits are consumed most-significant-first from
/// each keystream byte, so `next_u64` on a byte-aligned stream is the next
/// eight keystream bytes read big-endian. A `PrgStream` is single-owner state.
class PrgStream {
 public:
  static constexpr std::size_t kBlockBytes = 64;
  static constexpr std::size_t kBufferBlocks = 64;

  PrgStream(const SecretKey& key, PrgDomain domain)
      : domain_(domain), nonce_(detail::stream_nonce(domain)), cipher_(key, nonce_) {}

  PrgDomain domain() const noexcept { return domain_; }

  /// Total bits consumed so far.
  std::uint64_t position() const noexcept { return consumed_bits_; }

  std::uint64_t next_u64() {
    if (bit_offset_ == 0 && buffer_.size() - byte_pos_ >= 8) {
      const std::uint64_t v = detail::load_be64(buffer_.data() + byte_pos_);
      byte_pos_ += 8;
      consumed_bits_ += 64;
      return v;
    }
    return take_bits(64);
  }

  BitString next_bits(std::size_t k) {
    BitString out;
    while (k > 0) {
      const std::size_t take = k < 64 ? k : 64;
      out.append_uint(take_bits(take), take);
      k -= take;
    }
    return out;
  }

  /// Equivalent to calling next_u64() once per element, but generates
  /// keystream straight into `out` for large requests.
  void fill_u64(std::span<std::uint64_t> out) {
    std::size_t i = 0;
    if (bit_offset_ == 0) {
      while (i < out.size() && buffer_.size() - byte_pos_ >= 8) out[i++] = next_u64();
      if (i < out.size() && byte_pos_ == buffer_.size()) {
        const std::size_t blocks = (out.size() - i) / (kBlockBytes / 8);
        if (blocks > 0) {
          reserve_blocks(blocks);
          auto bytes = std::span<std::uint8_t>(reinterpret_cast<std::uint8_t*>(out.data() + i),
                                               blocks * kBlockBytes);
          cipher_.keystream(next_block_, bytes);
          next_block_ += blocks;
          const std::size_t words = blocks * (kBlockBytes / 8);
          for (std::size_t j = 0; j < words; ++j) {
            out[i + j] = detail::load_be64(bytes.data() + 8 * j);
          }
          i += words;
          consumed_bits_ += 64ULL * words;
        }
      }
    }
    while (i < out.size()) out[i++] = next_u64();
  }

 private:
  void reserve_blocks(std::uint64_t blocks) {
    if (blocks > std::numeric_limits<std::uint64_t>::max() - next_block_) {
      throw Error(ErrorCode::kStreamExhausted, "keystream block counter exhausted");
    }
  }

  void refill() {
    reserve_blocks(kBufferBlocks);
    buffer_.resize(kBufferBlocks * kBlockBytes);
    cipher_.keystream(next_block_, buffer_);
    next_block_ += kBufferBlocks;
    byte_pos_ = 0;
  }

  std::uint64_t take_bits(std::size_t width) {
    std::uint64_t v = 0;
    std::size_t need = width;
    while (need > 0) {
      if (byte_pos_ == buffer_.size()) refill();
      const std::size_t avail = 8 - bit_offset_;
      const std::size_t take = need < avail ? need : avail;
      const unsigned byte = buffer_[byte_pos_];
      const unsigned chunk = (byte >> (avail - take)) & ((1U << take) - 1);
      v = (v << take) | chunk;
      bit_offset_ += take;
      if (bit_offset_ == 8) {
        bit_offset_ = 0;
        ++byte_pos_;
      }
      need -= take;
    }
    consumed_bits_ += width;
    return v;
  }

  PrgDomain domain_;
  std::array<std::uint8_t, 8> nonce_;
  detail::ChaCha20 cipher_;
  std::uint64_t next_block_ = 0;
  std::vector<std::uint8_t> buffer_;
  std::size_t byte_pos_ = 0;
  std::size_t bit_offset_ = 0;
  std::uint64_t consumed_bits_ = 0;
};

/// The validation suffix both endpoints derive from the key.
inline BitString derive_suffix(const SecretKey& key, std::size_t bits) {
  if (bits == 0) return {};
  PrgStream s(key, PrgDomain::kSuffix);
  return s.next_bits(bits);
}

}  // namespace liststeg

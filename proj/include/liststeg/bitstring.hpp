#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "liststeg/error.hpp"

namespace liststeg {

/// Variable-length bit sequence.
///
/// Bits are addressed 1-based in the public API (bit 1 is the first bit of
/// the logical sequence). Storage is packed most-significant-first into
/// 64-bit words; bits past `size()` in the last word are always zero, which
/// makes word-wise comparison equal to lexicographic comparison.
class BitString {
 public:
  BitString() = default;

  /// Parses a string of '0' / '1' characters.
  static BitString from_string(std::string_view text) {
    BitString out;
    for (char c : text) {
      if (c != '0' && c != '1') {
        throw Error(ErrorCode::kInvalidInput, "bit literal contains non-binary character");
      }
      out.push_back(c == '1');
    }
    return out;
  }

  /// The `width` low bits of `value`, most significant first.
  static BitString from_uint(std::uint64_t value, std::size_t width) {
    if (width > 64) throw Error(ErrorCode::kOutOfRange, "from_uint width > 64");
    BitString out;
    out.append_uint(value, width);
    return out;
  }

  static BitString from_bytes(std::span<const std::uint8_t> bytes, std::size_t bit_length) {
    if (bit_length > bytes.size() * 8) {
      throw Error(ErrorCode::kOutOfRange, "bit length exceeds byte buffer");
    }
    BitString out;
    out.words_.assign((bit_length + 63) / 64, 0);
    out.size_ = bit_length;
    for (std::size_t i = 0; i < (bit_length + 7) / 8; ++i) {
      out.words_[i / 8] |= std::uint64_t{bytes[i]} << (56 - 8 * (i % 8));
    }
    out.clear_tail();
    return out;
  }

  std::size_t size() const noexcept { return size_; }
  bool empty() const noexcept { return size_ == 0; }

  /// 1-based access.
  bool at(std::size_t index) const {
    if (index < 1 || index > size_) throw Error(ErrorCode::kOutOfRange, "bit index out of range");
    return get0(index - 1);
  }

  void push_back(bool bit) {
    if (size_ % 64 == 0) words_.push_back(0);
    if (bit) words_[size_ / 64] |= std::uint64_t{1} << (63 - size_ % 64);
    ++size_;
  }

  /// Appends the `width` low bits of `value`, most significant first.
  void append_uint(std::uint64_t value, std::size_t width) {
    if (width == 0) return;
    if (width < 64) value &= (std::uint64_t{1} << width) - 1;
    const std::size_t offset = size_ % 64;
    const std::size_t room = offset == 0 ? 0 : 64 - offset;
    if (room == 0) {
      words_.push_back(value << (64 - width));
    } else if (width <= room) {
      words_.back() |= value << (room - width);
    } else {
      const std::size_t spill = width - room;
      words_.back() |= value >> spill;
      words_.push_back(value << (64 - spill));
    }
    size_ += width;
  }

  void append(const BitString& other) {
    if (size_ % 64 == 0) {
      words_.insert(words_.end(), other.words_.begin(), other.words_.end());
      size_ += other.size_;
      return;
    }
    std::size_t remaining = other.size_;
    for (std::uint64_t w : other.words_) {
      const std::size_t take = std::min<std::size_t>(64, remaining);
      append_uint(w >> (64 - take), take);
      remaining -= take;
    }
  }

  /// Reads up to 64 bits starting at 0-based position `pos` as an integer.
  std::uint64_t read_uint0(std::size_t pos, std::size_t width) const {
    if (width == 0) return 0;
    const std::size_t w = pos / 64;
    const std::size_t off = pos % 64;
    std::uint64_t hi = words_[w] << off;
    if (off + width > 64) hi |= words_[w + 1] >> (64 - off);
    return hi >> (64 - width);
  }

  std::span<const std::uint64_t> words() const noexcept { return words_; }

  std::string to_string() const {
    std::string s;
    s.reserve(size_);
    for (std::size_t i = 0; i < size_; ++i) s.push_back(get0(i) ? '1' : '0');
    return s;
  }

  /// Packed bytes, most significant bit first, zero padded in the last byte.
  std::vector<std::uint8_t> to_bytes() const {
    std::vector<std::uint8_t> out((size_ + 7) / 8);
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = static_cast<std::uint8_t>(words_[i / 8] >> (56 - 8 * (i % 8)));
    }
    return out;
  }

  friend bool operator==(const BitString& a, const BitString& b) {
    return a.size_ == b.size_ && a.words_ == b.words_;
  }

  /// Lexicographic order; a proper prefix sorts first.
  friend std::strong_ordering operator<=>(const BitString& a, const BitString& b) {
    const std::size_t common = std::min(a.words_.size(), b.words_.size());
    for (std::size_t i = 0; i < common; ++i) {
      if (a.words_[i] != b.words_[i]) return a.words_[i] <=> b.words_[i];
    }
    return a.size_ <=> b.size_;
  }

 private:
  bool get0(std::size_t i) const { return (words_[i / 64] >> (63 - i % 64)) & 1U; }

  void clear_tail() {
    if (size_ % 64 != 0) words_.back() &= ~std::uint64_t{0} << (64 - size_ % 64);
  }

  friend BitString prefix(const BitString& m, std::size_t k);

  std::vector<std::uint64_t> words_;
  std::size_t size_ = 0;
};

inline BitString concat(const BitString& a, const BitString& b) {
  BitString out = a;
  out.append(b);
  return out;
}

/// First `k` bits of `m`.
inline BitString prefix(const BitString& m, std::size_t k) {
  if (k > m.size()) throw Error(ErrorCode::kOutOfRange, "prefix longer than bit string");
  BitString out;
  out.words_.assign(m.words_.begin(), m.words_.begin() + static_cast<std::ptrdiff_t>((k + 63) / 64));
  out.size_ = k;
  out.clear_tail();
  return out;
}

/// Bits i..j inclusive, 1-based. `i == j + 1` yields the empty string.
inline BitString slice(const BitString& m, std::size_t i, std::size_t j) {
  if (i < 1 || i > j + 1 || j > m.size()) {
    throw Error(ErrorCode::kOutOfRange, "slice bounds out of range");
  }
  BitString out;
  std::size_t pos = i - 1;
  std::size_t remaining = j + 1 - i;
  while (remaining > 0) {
    const std::size_t take = std::min<std::size_t>(64, remaining);
    out.append_uint(m.read_uint0(pos, take), take);
    pos += take;
    remaining -= take;
  }
  return out;
}

// Serialization: 8-byte big-endian bit count, then packed bits.

inline std::vector<std::uint8_t> pack(const BitString& m) {
  std::vector<std::uint8_t> out(8);
  const std::uint64_t n = m.size();
  for (int i = 0; i < 8; ++i) out[i] = static_cast<std::uint8_t>(n >> (56 - 8 * i));
  const auto body = m.to_bytes();
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

inline BitString unpack(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) throw Error(ErrorCode::kFormat, "payload shorter than length header");
  std::uint64_t n = 0;
  for (int i = 0; i < 8; ++i) n = (n << 8) | bytes[i];
  const auto body = bytes.subspan(8);
  if (n > body.size() * 8 || (n + 7) / 8 != body.size()) {
    throw Error(ErrorCode::kFormat, "payload length header disagrees with body size");
  }
  return BitString::from_bytes(body, n);
}

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kFormat, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kFormat, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kFormat, "short write to " + path);
}

inline BitString read_payload_file(const std::string& path) { return unpack(read_file_bytes(path)); }

inline void write_payload_file(const std::string& path, const BitString& m) {
  write_file_bytes(path, pack(m));
}

/// 256-bit shared key.
class SecretKey {
 public:
  static constexpr std::size_t kBytes = 32;

  SecretKey() = default;
  explicit SecretKey(const std::array<std::uint8_t, kBytes>& bytes) : bytes_(bytes) {}

  /// Accepts exactly 64 hex characters.
  static SecretKey from_hex(std::string_view hex) {
    if (hex.size() != 2 * kBytes) {
      throw Error(ErrorCode::kInvalidInput, "key must be 64 hex characters");
    }
    auto nibble = [](char c) -> int {
      if (c >= '0' && c <= '9') return c - '0';
      if (c >= 'a' && c <= 'f') return c - 'a' + 10;
      if (c >= 'A' && c <= 'F') return c - 'A' + 10;
      throw Error(ErrorCode::kInvalidInput, "key contains non-hex character");
    };
    std::array<std::uint8_t, kBytes> b{};
    for (std::size_t i = 0; i < kBytes; ++i) {
      b[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
    }
    return SecretKey(b);
  }

  /// Key whose bytes are the big-endian encoding of four 64-bit words.
  static SecretKey from_words(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
    std::array<std::uint8_t, kBytes> bytes{};
    const std::uint64_t w[4] = {a, b, c, d};
    for (std::size_t i = 0; i < kBytes; ++i) {
      bytes[i] = static_cast<std::uint8_t>(w[i / 8] >> (56 - 8 * (i % 8)));
    }
    return SecretKey(bytes);
  }

  std::string to_hex() const {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string s;
    for (auto v : bytes_) {
      s.push_back(kDigits[v >> 4]);
      s.push_back(kDigits[v & 15]);
    }
    return s;
  }

  const std::array<std::uint8_t, kBytes>& bytes() const noexcept { return bytes_; }

  friend bool operator==(const SecretKey&, const SecretKey&) = default;

 private:
  std::array<std::uint8_t, kBytes> bytes_{};
};

}  // namespace liststeg

#include <catch_amalgamated.hpp>

#include <sodium.h>

#include <bit>
#include <fstream>
#include <string>
#include <vector>

#include "liststeg/prg.hpp"

using namespace liststeg;

namespace {

const SecretKey kK0 = SecretKey::from_hex("000102030405060708090a0b0c0d0e0f101112131415161718191a1b1c1d1e1f");

std::vector<std::uint64_t> pinned(const std::string& name) {
  std::ifstream in(std::string(LISTSTEG_TEST_DATA) + "/" + name);
  REQUIRE(in);
  std::vector<std::uint64_t> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(std::stoull(line, nullptr, 16));
  }
  return out;
}

/// Keystream from libsodium; an independent ChaCha20 implementation.
std::vector<std::uint8_t> sodium_keystream(const SecretKey& key, PrgDomain d, std::uint64_t block, std::size_t n) {
  REQUIRE(sodium_init() >= 0);
  std::vector<std::uint8_t> out(n, 0);
  const auto nonce = detail::stream_nonce(d);
  crypto_stream_chacha20_xor_ic(out.data(), out.data(), n, nonce.data(), block, key.bytes().data());
  return out;
}

}  // namespace

TEST_CASE("ChaCha20 backend reproduces the published all-zero test vector") {
  const std::array<std::uint8_t, 8> zero_nonce{};
  detail::ChaCha20 c(SecretKey{}, zero_nonce);
  std::vector<std::uint8_t> ks(64);
  c.keystream(0, ks);
  const char* want =
      "76b8e0ada0f13d90405d6ae55386bd28bdd219b8a08ded1aa836efcc8b770dc7"
      "da41597c5157488d7724e03fb8d84a376a43b8f41518a11cc387b669b2ee6586";
  std::string got;
  for (auto b : ks) {
    static constexpr char d[] = "0123456789abcdef";
    got += d[b >> 4];
    got += d[b & 15];
  }
  CHECK(got == want);
}

TEST_CASE("keystream agrees with libsodium, including 32-bit counter carry") {
  for (PrgDomain d : {PrgDomain::kSampling, PrgDomain::kSuffix}) {
    detail::ChaCha20 c(kK0, detail::stream_nonce(d));
    for (std::uint64_t block : {std::uint64_t{0}, std::uint64_t{7}, std::uint64_t{0xfffffffe},
                                std::uint64_t{0x1fffffffd}, std::uint64_t{0xfffffffffffffff0}}) {
      std::vector<std::uint8_t> ks(64 * 9);
      c.keystream(block, ks);
      CHECK(ks == sodium_keystream(kK0, d, block, ks.size()));
    }
  }
}

TEST_CASE("first words under K0 match the pinned vectors for both domains") {
  for (auto [d, file] : {std::pair{PrgDomain::kSampling, "prg_k0_sampling.txt"},
                         std::pair{PrgDomain::kSuffix, "prg_k0_suffix.txt"}}) {
    const auto want = pinned(file);
    REQUIRE(want.size() == 8);
    PrgStream s(kK0, d);
    for (auto w : want) CHECK(s.next_u64() == w);
  }
  CHECK(pinned("prg_k0_sampling.txt")[0] != pinned("prg_k0_suffix.txt")[0]);
}

TEST_CASE("independent streams with equal state agree") {
  PrgStream a(kK0, PrgDomain::kSampling), b(kK0, PrgDomain::kSampling);
  for (int i = 0; i < 5000; ++i) REQUIRE(a.next_u64() == b.next_u64());
  CHECK(a.position() == 5000u * 64);
}

TEST_CASE("next_bits") {
  PrgStream a(kK0, PrgDomain::kSuffix), b(kK0, PrgDomain::kSuffix);
  CHECK(a.next_bits(0).empty());
  CHECK(a.next_bits(64) == BitString::from_uint(b.next_u64(), 64));
  // Unaligned reads splice the same underlying bit sequence.
  PrgStream c(kK0, PrgDomain::kSuffix), e(kK0, PrgDomain::kSuffix);
  BitString pieces;
  for (std::size_t k : {1, 3, 7, 13, 64, 65, 5, 100}) pieces.append(c.next_bits(k));
  CHECK(pieces == e.next_bits(pieces.size()));
}

TEST_CASE("fill_u64 equals repeated next_u64 at any alignment") {
  for (std::size_t lead : {0, 1, 5, 8, 511, 512, 513}) {
    PrgStream a(kK0, PrgDomain::kSampling), b(kK0, PrgDomain::kSampling);
    for (std::size_t i = 0; i < lead; ++i) {
      a.next_u64();
      b.next_u64();
    }
    std::vector<std::uint64_t> bulk(5000);
    a.fill_u64(bulk);
    for (auto w : bulk) REQUIRE(w == b.next_u64());
    CHECK(a.position() == b.position());
    CHECK(a.next_u64() == b.next_u64());
  }
  PrgStream u(kK0, PrgDomain::kSampling), v(kK0, PrgDomain::kSampling);
  u.next_bits(3);
  v.next_bits(3);
  std::vector<std::uint64_t> bulk(300);
  u.fill_u64(bulk);
  for (auto w : bulk) REQUIRE(w == v.next_u64());
}

TEST_CASE("monobit: ones fraction over 10^6 bits in [0.498, 0.502]") {
  PrgStream s(kK0, PrgDomain::kSampling);
  std::vector<std::uint64_t> words(1'000'000 / 64 + 1);
  s.fill_u64(words);
  std::uint64_t ones = 0;
  for (std::size_t i = 0; i + 1 < words.size(); ++i) ones += static_cast<std::uint64_t>(std::popcount(words[i]));
  const std::uint64_t last_bits = 1'000'000 - 64 * (words.size() - 1);
  ones += static_cast<std::uint64_t>(std::popcount(words.back() >> (64 - last_bits)));
  const double frac = static_cast<double>(ones) / 1e6;
  CHECK(frac >= 0.498);
  CHECK(frac <= 0.502);
}

TEST_CASE("derived suffix is a prefix of the suffix-domain stream") {
  PrgStream s(kK0, PrgDomain::kSuffix);
  CHECK(derive_suffix(kK0, 100) == s.next_bits(100));
  CHECK(derive_suffix(kK0, 0).empty());
  CHECK_FALSE(derive_suffix(kK0, 64) == derive_suffix(SecretKey::from_words(9, 9, 9, 9), 64));
}

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <random>
#include <vector>

#include "liststeg/bitstring.hpp"

using namespace liststeg;

namespace {

using Bools = std::vector<bool>;

BitString from_bools(const Bools& b) {
  BitString m;
  for (bool x : b) m.push_back(x);
  return m;
}

Bools to_bools(const BitString& m) {
  Bools out;
  for (std::size_t i = 1; i <= m.size(); ++i) out.push_back(m.at(i));
  return out;
}

BitString random_bits(std::mt19937_64& rng, std::size_t n) {
  BitString m;
  for (std::size_t i = 0; i < n; ++i) m.push_back(rng() & 1);
  return m;
}

}  // namespace

TEST_CASE("concat basics") {
  CHECK(concat(BitString{}, BitString{}).size() == 0);
  CHECK(concat(BitString::from_string("101"), BitString::from_string("0")) == BitString::from_string("1010"));
}

TEST_CASE("concat with one bit matches list-of-booleans expansion for widths up to 4") {
  for (std::size_t n = 0; n <= 4; ++n) {
    for (std::uint64_t v = 0; v < (1u << n); ++v) {
      const BitString x = BitString::from_uint(v, n);
      Bools naive;
      for (std::size_t i = 0; i < n; ++i) naive.push_back((v >> (n - 1 - i)) & 1);
      for (bool bit : {false, true}) {
        Bools want = naive;
        want.push_back(bit);
        const BitString got = concat(x, from_bools({bit}));
        CHECK(to_bools(got) == want);
        CHECK(got.size() == n + 1);
      }
    }
  }
}

TEST_CASE("concat of random strings preserves both parts") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 300; ++t) {
    const auto a = random_bits(rng, rng() % 200);
    const auto b = random_bits(rng, rng() % 200);
    Bools want = to_bools(a);
    const Bools tail = to_bools(b);
    want.insert(want.end(), tail.begin(), tail.end());
    CHECK(to_bools(concat(a, b)) == want);
  }
}

TEST_CASE("prefix") {
  const auto m = BitString::from_string("1010");
  CHECK(prefix(m, 2) == BitString::from_string("10"));
  CHECK(prefix(m, 0).empty());
  CHECK(prefix(m, 4) == m);
  CHECK_THROWS_AS(prefix(m, 5), Error);
}

TEST_CASE("slice") {
  const auto m = BitString::from_string("110011");
  CHECK(slice(m, 3, 4) == BitString::from_string("00"));
  CHECK(slice(m, 1, m.size()) == m);
  CHECK(slice(m, 4, 3).empty());
  CHECK_THROWS_AS(slice(m, 0, 2), Error);
  CHECK_THROWS_AS(slice(m, 3, 7), Error);
  CHECK_THROWS_AS(slice(m, 5, 3), Error);
}

TEST_CASE("slice recovers the suffix window of payload || suf || extra") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 200; ++t) {
    const auto payload = random_bits(rng, 1 + rng() % 300);
    const auto suf = random_bits(rng, rng() % 100);
    const auto extra = random_bits(rng, rng() % 30);
    const auto m = concat(concat(payload, suf), extra);
    CHECK(slice(m, payload.size() + 1, payload.size() + suf.size()) == suf);
  }
}

TEST_CASE("index access is 1-based and bounded") {
  const auto m = BitString::from_string("01");
  CHECK_FALSE(m.at(1));
  CHECK(m.at(2));
  CHECK_THROWS_AS(m.at(0), Error);
  CHECK_THROWS_AS(m.at(3), Error);
}

TEST_CASE("lexicographic order equals numeric order, exhaustively up to 12 bits") {
  for (std::size_t n = 1; n <= 12; ++n) {
    std::vector<BitString> all;
    for (std::uint64_t v = 0; v < (1u << n); ++v) all.push_back(BitString::from_uint(v, n));
    std::vector<BitString> shuffled = all;
    std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937_64(n));
    std::sort(shuffled.begin(), shuffled.end());
    REQUIRE(shuffled == all);
    for (std::size_t i = 1; i < all.size(); ++i) CHECK(all[i - 1] < all[i]);
  }
}

TEST_CASE("read_uint0 matches from_uint") {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 500; ++t) {
    const auto m = random_bits(rng, 1 + rng() % 400);
    const std::size_t pos = rng() % m.size();
    const std::size_t width = 1 + rng() % std::min<std::size_t>(64, m.size() - pos);
    CHECK(BitString::from_uint(m.read_uint0(pos, width), width) == slice(m, pos + 1, pos + width));
  }
}

TEST_CASE("pack layout is a big-endian bit count then zero-padded bits") {
  const auto bytes = pack(BitString::from_string("1010110011"));
  const std::vector<std::uint8_t> want = {0, 0, 0, 0, 0, 0, 0, 10, 0b10101100, 0b11000000};
  CHECK(bytes == want);
  CHECK(pack(BitString{}) == std::vector<std::uint8_t>(8, 0));
}

TEST_CASE("unpack(pack(m)) == m") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 500; ++t) {
    const auto m = random_bits(rng, rng() % 1000);
    CHECK(unpack(pack(m)) == m);
  }
}

TEST_CASE("unpack rejects inconsistent sizes") {
  auto bytes = pack(BitString::from_string("101"));
  bytes.push_back(0);
  CHECK_THROWS_AS(unpack(bytes), Error);
  CHECK_THROWS_AS(unpack(std::vector<std::uint8_t>(5, 0)), Error);
  std::vector<std::uint8_t> huge(9, 0);
  huge[0] = 0xff;
  CHECK_THROWS_AS(unpack(huge), Error);
}

TEST_CASE("secret keys") {
  const auto k = SecretKey::from_hex("000102030405060708090a0b0c0d0e0f101112131415161718191a1b1c1d1e1f");
  CHECK(k.bytes()[0] == 0);
  CHECK(k.bytes()[31] == 0x1f);
  CHECK(SecretKey::from_hex(k.to_hex()) == k);
  CHECK_FALSE(k == SecretKey::from_words(1, 2, 3, 4));
  CHECK_THROWS_AS(SecretKey::from_hex("00"), Error);
  CHECK_THROWS_AS(SecretKey::from_hex(std::string(64, 'g')), Error);
}

#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "liststeg/alias.hpp"
#include "liststeg/codec.hpp"
#include "liststeg/prg.hpp"

using namespace liststeg;

namespace {

using u128 = unsigned __int128;
constexpr u128 kOne64 = static_cast<u128>(1) << 64;

/// Mass each token receives over all slots, in units of 2^-64 per slot.
std::vector<u128> token_mass(const AliasTable& t) {
  std::vector<u128> m(t.vocab_size(), 0);
  for (std::size_t i = 0; i < t.vocab_size(); ++i) {
    m[t.primary(i)] += t.threshold(i);
    m[t.alias(i)] += kOne64 - t.threshold(i);
  }
  return m;
}

void check_exact(const QuantizedDistribution& d) {
  const AliasTable t(d);
  REQUIRE(t.vocab_size() == d.vocab_size());
  const auto m = token_mass(t);
  for (std::size_t s = 0; s < d.vocab_size(); ++s) {
    // slot mass / (|V| * 2^64) == w / 2^32
    const u128 want = static_cast<u128>(d.weight(static_cast<TokenId>(s))) * d.vocab_size() * kProbabilityOne;
    REQUIRE(m[s] == want);
  }
}

QuantizedDistribution random_distribution(std::mt19937_64& rng) {
  const std::size_t v = 2 + rng() % 63;
  std::vector<double> raw(v);
  for (auto& x : raw) x = (rng() % 4 == 0) ? 0.0 : std::ldexp(static_cast<double>(rng() >> 11), -53);
  raw[rng() % v] += 1e-3;
  return quantize(raw);
}

}  // namespace

TEST_CASE("slot masses reproduce the quantized weights exactly for 1000 random distributions") {
  std::mt19937_64 rng(101);
  for (int t = 0; t < 1000; ++t) check_exact(random_distribution(rng));
}

TEST_CASE("uniform distribution over four tokens gives four full slots") {
  const AliasTable t(quantize({1, 1, 1, 1}));
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(t.is_full(i));
    CHECK(t.primary(i) == i);
    CHECK(t.threshold(i) == kOne64);
  }
}

TEST_CASE("[0.5, 0.25, 0.25] table layout") {
  const auto d = quantize({0.5, 0.25, 0.25});
  const AliasTable t(d);
  check_exact(d);
  // q = (1.5, 0.75, 0.75): token 1 splits with 0, then token 2 absorbs the rest of 0.
  CHECK(t.primary(0) == 1);
  CHECK(t.alias(0) == 0);
  CHECK(t.threshold(0) == (kOne64 / 4) * 3);
  CHECK(t.primary(1) == 2);
  CHECK(t.alias(1) == 0);
  CHECK(t.is_full(2));
  CHECK(t.primary(2) == 0);
}

TEST_CASE("near point mass with two one-unit tokens") {
  const QuantizedDistribution d({kProbabilityOne - 2, 1, 1});
  check_exact(d);
  const AliasTable t(d);
  std::size_t full = 0;
  for (std::size_t i = 0; i < 3; ++i) full += t.is_full(i);
  CHECK(full == 1);
}

TEST_CASE("point mass always yields its token") {
  const QuantizedDistribution d({0, kProbabilityOne, 0});
  check_exact(d);
  const AliasTable t(d);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 10000; ++i) REQUIRE(t.sample(rng(), rng()) == 1);
}

TEST_CASE("two-token slot choice and coin") {
  const auto d = quantize({0.25, 0.75});
  const AliasTable t(d);
  check_exact(d);
  // Slot 0 covers slot words below 2^63.
  CHECK(t.sample(0, 0) == t.primary(0));
  CHECK(t.sample((std::uint64_t{1} << 63) - 1, ~std::uint64_t{0}) == t.alias(0));
  CHECK(t.sample(std::uint64_t{1} << 63, 0) == t.primary(1));
  CHECK(t.primary(0) == 0);
  CHECK(t.alias(0) == 1);
  CHECK(t.threshold(0) == kOne64 / 2);
}

TEST_CASE("sampled frequencies are within TV 5e-3 of the target over 10^6 draws") {
  PrgStream prg(SecretKey::from_words(5, 6, 7, 8), PrgDomain::kSampling);
  for (const auto& raw : {std::vector<double>{0.7, 0.2, 0.1}, std::vector<double>{0.5, 0.25, 0.125, 0.0625, 0.0625},
                          std::vector<double>{0.97, 0.01, 0.01, 0.01}}) {
    const auto d = quantize(raw);
    const AliasTable t(d);
    constexpr std::size_t kDraws = 1'000'000;
    std::vector<std::uint64_t> randoms(2 * kDraws);
    prg.fill_u64(randoms);
    const auto out = t.sample_batch(randoms);
    std::vector<double> freq(d.vocab_size(), 0.0);
    for (auto s : out) freq[s] += 1.0;
    double tv = 0;
    for (std::size_t s = 0; s < d.vocab_size(); ++s) {
      tv += std::abs(freq[s] / kDraws - d.probability(static_cast<TokenId>(s)));
    }
    CHECK(tv / 2 < 5e-3);
  }
}

TEST_CASE("batch sampling equals single sampling under any split") {
  std::mt19937_64 rng(9);
  const auto d = random_distribution(rng);
  const AliasTable t(d);
  std::vector<std::uint64_t> randoms(2 * 1000);
  for (auto& r : randoms) r = rng();
  const auto whole = t.sample_batch(randoms);
  for (std::size_t i = 0; i < whole.size(); ++i) REQUIRE(whole[i] == t.sample(randoms[2 * i], randoms[2 * i + 1]));
  for (std::size_t cut : {0, 1, 17, 500, 999}) {
    auto a = t.sample_batch(std::span<const std::uint64_t>(randoms).first(2 * cut));
    const auto b = t.sample_batch(std::span<const std::uint64_t>(randoms).subspan(2 * cut));
    a.insert(a.end(), b.begin(), b.end());
    CHECK(a == whole);
  }
  CHECK_THROWS_AS(t.sample_batch(std::span<const std::uint64_t>(randoms).first(3)), Error);
}

TEST_CASE("the step sampler consumes exactly two words per candidate") {
  detail::StepSampler s(SecretKey::from_words(1, 1, 1, 1));
  auto dist = std::make_shared<const QuantizedDistribution>(quantize({0.3, 0.3, 0.4}));
  const AliasTable& t = s.table_for(dist);
  std::uint64_t expected = 0;
  for (std::size_t count : {1, 7, 4096, 4097, 10000}) {
    s.draw(t, count);
    expected += 2 * count;
    CHECK(s.random_words_consumed() == expected);
  }
}

TEST_CASE("step sampler draws follow the raw sampling stream") {
  const auto key = SecretKey::from_words(4, 3, 2, 1);
  detail::StepSampler s(key);
  auto dist = std::make_shared<const QuantizedDistribution>(quantize({0.1, 0.6, 0.3}));
  const AliasTable& t = s.table_for(dist);
  PrgStream prg(key, PrgDomain::kSampling);
  for (std::size_t count : {5, 5000, 3}) {
    const auto got = s.draw(t, count);
    for (std::size_t i = 0; i < count; ++i) {
      const auto a = prg.next_u64();
      const auto b = prg.next_u64();
      REQUIRE(got[i] == t.sample(a, b));
    }
  }
}

// Embed a short message under a Markov cover model, decode it, print the report.

#include <iostream>

#include "liststeg/liststeg.hpp"

int main() {
  using namespace liststeg;

  const ModelSource model = make_model<MarkovSource>(
      std::vector<std::vector<double>>{{0.7, 0.2, 0.1}, {0.15, 0.7, 0.15}, {0.1, 0.2, 0.7}},
      std::vector<double>{0.6, 0.3, 0.1});

  CodecParams params;
  params.list_bits = 12;
  params.lambda = 40;
  params.key = SecretKey::from_hex("000102030405060708090a0b0c0d0e0f101112131415161718191a1b1c1d1e1f");

  const std::string text = "attack at dawn";
  const BitString payload =
      BitString::from_bytes(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()), 8 * text.size());

  auto resolved = resolve_suffix_bits(params, model, payload);
  params.suffix_bits = resolved.suffix_bits;
  const StegoTrace& trace = resolved.trace;

  const BitString recovered = decode(params, model, trace.tokens, payload.size());
  const auto bytes = recovered.to_bytes();
  std::cout << "stegotext: " << trace.total_tokens() << " tokens, b = " << params.suffix_bits << "\n"
            << "recovered: " << std::string(bytes.begin(), bytes.end()) << "\n"
            << capacity_report(trace, payload.size(), params).to_kv();
  return recovered == payload ? 0 : 1;
}

#pragma once

// Stegotext container ("LSTG") and the textual session header that travels
// next to it.
//
// LSTG layout, all integers big-endian:
//   offset 0  4 bytes  magic "LSTG"
//   offset 4  1 byte   version (1)
//   offset 5  8 bytes  token count n
//   offset 13 4*n      token ids, 4 bytes each
//
// Session header: UTF-8 text, first line "liststeg-session 1", then one
// key=value per line. The key is never written.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "liststeg/bitstring.hpp"
#include "liststeg/dist.hpp"
#include "liststeg/error.hpp"

namespace liststeg {

inline constexpr std::uint8_t kStegoFileVersion = 1;

inline std::vector<std::uint8_t> write_stegotext(std::span<const TokenId> tokens) {
  std::vector<std::uint8_t> out = {'L', 'S', 'T', 'G', kStegoFileVersion};
  out.reserve(13 + 4 * tokens.size());
  const std::uint64_t n = tokens.size();
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(n >> (56 - 8 * i)));
  for (TokenId t : tokens) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(t >> (24 - 8 * i)));
  }
  return out;
}

inline std::vector<TokenId> read_stegotext(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 13 || bytes[0] != 'L' || bytes[1] != 'S' || bytes[2] != 'T' || bytes[3] != 'G') {
    throw Error(ErrorCode::kFormat, "not an LSTG stegotext");
  }
  if (bytes[4] != kStegoFileVersion) {
    throw Error(ErrorCode::kFormat, "unsupported LSTG version " + std::to_string(bytes[4]));
  }
  std::uint64_t n = 0;
  for (int i = 0; i < 8; ++i) n = (n << 8) | bytes[5 + i];
  if (n > (bytes.size() - 13) / 4 || bytes.size() - 13 != 4 * n) {
    throw Error(ErrorCode::kFormat, "LSTG token count disagrees with file size");
  }
  std::vector<TokenId> tokens(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::uint8_t* p = bytes.data() + 13 + 4 * k;
    tokens[k] = (TokenId{p[0]} << 24) | (TokenId{p[1]} << 16) | (TokenId{p[2]} << 8) | TokenId{p[3]};
  }
  return tokens;
}

struct SessionHeader {
  unsigned list_bits = 0;
  std::size_t suffix_bits = 0;
  double lambda = 0.0;
  std::size_t payload_bits = 0;
  std::string model;              // human-readable description
  std::string model_fingerprint;  // digest of the model config

  std::string to_text() const {
    std::ostringstream os;
    os.precision(17);
    os << "liststeg-session 1\n"
       << "list_bits=" << list_bits << '\n'
       << "suffix_bits=" << suffix_bits << '\n'
       << "lambda=" << lambda << '\n'
       << "payload_bits=" << payload_bits << '\n'
       << "model=" << model << '\n'
       << "model_fingerprint=" << model_fingerprint << '\n';
    return os.str();
  }

  static SessionHeader parse(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "liststeg-session 1") {
      throw Error(ErrorCode::kFormat, "session header has wrong banner");
    }
    std::map<std::string, std::string> kv;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw Error(ErrorCode::kFormat, "session header line without '='");
      kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    auto need = [&](const char* k) -> const std::string& {
      auto it = kv.find(k);
      if (it == kv.end()) throw Error(ErrorCode::kFormat, std::string("session header lacks ") + k);
      return it->second;
    };
    SessionHeader h;
    try {
      h.list_bits = static_cast<unsigned>(std::stoul(need("list_bits")));
      h.suffix_bits = std::stoull(need("suffix_bits"));
      h.lambda = std::stod(need("lambda"));
      h.payload_bits = std::stoull(need("payload_bits"));
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::kFormat, "session header holds a malformed number");
    }
    h.model = kv.count("model") ? kv["model"] : "";
    h.model_fingerprint = kv.count("model_fingerprint") ? kv["model_fingerprint"] : "";
    return h;
  }
};

}  // namespace liststeg

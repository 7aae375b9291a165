#pragma once

// Model configuration (JSON). One object with a "kind" field:
//
//   {"kind": "uniform", "vocab_size": 16}
//   {"kind": "peaked", "vocab_size": 3, "epsilon": 0.0009765625, "peak": 0}
//   {"kind": "markov", "table": [[...], ...], "initial": [...]}
//   {"kind": "temperature-profile", "vocab_size": 64, "seed": 7,
//    "temperatures": [0.3, 1.0, 2.5]}
//   {"kind": "server", "vocab_size": 32000, "host": "127.0.0.1", "port": 7070}
//   {"kind": "server", "vocab_size": 32000, "command": ["python3", "bridge.py"]}
//
// "initial" is optional for markov (uniform by default).

#include <openssl/evp.h>

#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "liststeg/bridge_client.hpp"
#include "liststeg/error.hpp"
#include "liststeg/model.hpp"
#include "liststeg/prg.hpp"

namespace liststeg {

inline ModelSource model_from_json(const nlohmann::json& cfg) {
  try {
    const std::string kind = cfg.at("kind").get<std::string>();
    if (kind == "uniform") {
      return make_model<UniformSource>(cfg.at("vocab_size").get<std::size_t>());
    }
    if (kind == "peaked") {
      return make_model<PeakedSource>(cfg.at("vocab_size").get<std::size_t>(), cfg.at("epsilon").get<double>(),
                                      cfg.value("peak", TokenId{0}));
    }
    if (kind == "markov") {
      auto table = cfg.at("table").get<std::vector<std::vector<double>>>();
      auto initial = cfg.value("initial", std::vector<double>{});
      return make_model<MarkovSource>(table, initial);
    }
    if (kind == "temperature-profile") {
      return make_model<TemperatureProfileSource>(cfg.at("vocab_size").get<std::size_t>(),
                                                  cfg.value("seed", std::uint64_t{0}),
                                                  cfg.at("temperatures").get<std::vector<double>>());
    }
    if (kind == "server") {
      const auto vocab = cfg.at("vocab_size").get<std::size_t>();
      const auto session = cfg.value("session", std::string("liststeg"));
      std::unique_ptr<LineChannel> channel;
      if (cfg.contains("command")) {
        channel = std::make_unique<ProcessChannel>(cfg.at("command").get<std::vector<std::string>>());
      } else {
        channel = std::make_unique<TcpChannel>(cfg.value("host", std::string("127.0.0.1")),
                                               cfg.at("port").get<std::uint16_t>());
      }
      return ModelSource(std::make_shared<ServerSource>(std::move(channel), vocab, session));
    }
    throw Error(ErrorCode::kConfig, "unknown model kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("bad model config: ") + e.what());
  }
}

inline nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfig, "cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig, path + ": " + e.what());
  }
}

/// True for kinds whose distributions are computed locally.
inline bool is_deterministic_kind(const nlohmann::json& cfg) { return cfg.value("kind", std::string()) != "server"; }

/// Hex SHA-256 of the compact JSON dump; identifies a model config.
inline std::string model_fingerprint(const nlohmann::json& cfg) {
  const std::string text = cfg.dump();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::kConfig, "cannot hash model config");
  }
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string hex;
  for (unsigned i = 0; i < len; ++i) {
    hex.push_back(kDigits[digest[i] >> 4]);
    hex.push_back(kDigits[digest[i] & 15]);
  }
  return hex;
}

}  // namespace liststeg

// liststeg: encode, decode, selftest, capacity.
//
// Exit codes:
//   0 success          2 usage / config      3 desync or truncated stegotext
//   4 suffix no-match  5 ambiguous decode    6 transport / protocol / model server
//   7 token budget     8 malformed file

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "liststeg/liststeg.hpp"

namespace {

using namespace liststeg;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitDesync = 3;
constexpr int kExitNoMatch = 4;
constexpr int kExitAmbiguous = 5;
constexpr int kExitTransport = 6;
constexpr int kExitBudget = 7;
constexpr int kExitFormat = 8;

int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::kDesync:
    case ErrorCode::kTruncated:
    case ErrorCode::kInternalDesync:
      return kExitDesync;
    case ErrorCode::kNoMatch:
      return kExitNoMatch;
    case ErrorCode::kAmbiguousDecode:
      return kExitAmbiguous;
    case ErrorCode::kTransport:
    case ErrorCode::kProtocol:
    case ErrorCode::kModel:
      return kExitTransport;
    case ErrorCode::kTokenBudgetExceeded:
      return kExitBudget;
    case ErrorCode::kFormat:
      return kExitFormat;
    default:
      return kExitUsage;
  }
}

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Session config: {"N", "lambda", "b": int | "auto", "max_tokens", "model": {...} | "path.json"}.
struct SessionConfig {
  unsigned list_bits = 16;
  double lambda = 40.0;
  std::optional<std::size_t> suffix_bits;  // empty = auto
  std::size_t max_tokens = 1'000'000;
  nlohmann::json model;
};

SessionConfig load_session(const std::string& path) {
  const auto j = load_json_file(path);
  SessionConfig c;
  try {
    c.list_bits = j.value("N", 16u);
    c.lambda = j.value("lambda", 40.0);
    c.max_tokens = j.value("max_tokens", std::size_t{1'000'000});
    if (j.contains("b") && !(j["b"].is_string() && j["b"] == "auto")) c.suffix_bits = j["b"].get<std::size_t>();
    const auto& m = j.at("model");
    if (m.is_string()) {
      c.model = load_json_file((fs::path(path).parent_path() / m.get<std::string>()).string());
    } else {
      c.model = m;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig, path + ": " + e.what());
  }
  return c;
}

SecretKey resolve_key(const std::string& flag) {
  std::string hex = flag;
  if (hex.empty()) {
    if (const char* env = std::getenv("LISTSTEG_KEY")) hex = env;
  }
  if (hex.empty()) throw UsageError("no key: pass --key or set LISTSTEG_KEY (64 hex characters)");
  try {
    return SecretKey::from_hex(hex);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

CodecParams params_from(const SessionConfig& c, const SecretKey& key) {
  CodecParams p;
  p.list_bits = c.list_bits;
  p.lambda = c.lambda;
  p.key = key;
  p.max_tokens = c.max_tokens;
  p.validate();
  return p;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kFormat, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cmd_encode(const std::string& config, const std::string& in, const std::string& out, const std::string& key_hex,
               bool json_report) {
  const auto cfg = load_session(config);
  const auto key = resolve_key(key_hex);
  const BitString payload = read_payload_file(in);
  const ModelSource model = model_from_json(cfg.model);
  CodecParams p = params_from(cfg, key);

  StegoTrace trace;
  try {
    if (cfg.suffix_bits) {
      p.suffix_bits = *cfg.suffix_bits;
      trace = encode(p, model, payload);
    } else {
      if (!is_deterministic_kind(cfg.model)) throw UsageError("\"b\": \"auto\" needs a deterministic model kind");
      auto r = resolve_suffix_bits(p, model, payload);
      p.suffix_bits = r.suffix_bits;
      trace = std::move(r.trace);
    }
  } catch (const TokenBudgetExceeded& e) {
    std::cerr << "liststeg: " << e.what() << '\n'
              << "partial trace: tokens=" << e.partial_trace().total_tokens() << " bit_length=" << e.bit_length()
              << " message_bits=" << e.message_bits() << '\n';
    return kExitBudget;
  }

  write_file_bytes(out, write_stegotext(trace.tokens));
  SessionHeader h;
  h.list_bits = p.list_bits;
  h.suffix_bits = p.suffix_bits;
  h.lambda = p.lambda;
  h.payload_bits = payload.size();
  h.model = model.source().describe();
  h.model_fingerprint = model_fingerprint(cfg.model);
  const std::string header = h.to_text();
  write_file_bytes(out + ".session", std::span(reinterpret_cast<const std::uint8_t*>(header.data()), header.size()));

  const auto report = capacity_report(trace, payload.size(), p);
  if (json_report) {
    std::cout << report.to_json().dump(2) << '\n';
  } else {
    std::cout << report.to_kv();
  }
  return kExitOk;
}

int cmd_decode(const std::string& config, const std::string& in, const std::string& out, const std::string& key_hex,
               const std::string& session_path) {
  const auto cfg = load_session(config);
  const auto key = resolve_key(key_hex);
  const auto h = SessionHeader::parse(read_text(session_path.empty() ? in + ".session" : session_path));
  if (h.model_fingerprint != model_fingerprint(cfg.model)) {
    throw Error(ErrorCode::kConfig, "model config differs from the one recorded in the session header");
  }
  const auto tokens = read_stegotext(read_file_bytes(in));
  const ModelSource model = model_from_json(cfg.model);
  CodecParams p = params_from(cfg, key);
  p.list_bits = h.list_bits;
  p.suffix_bits = h.suffix_bits;
  p.lambda = h.lambda;
  p.validate();
  const BitString payload = decode(p, model, tokens, h.payload_bits);
  write_payload_file(out, payload);
  std::cout << "decoded " << payload.size() << " bits from " << tokens.size() << " tokens\n";
  return kExitOk;
}

int cmd_selftest(const std::string& scale, std::uint64_t seed) {
  const auto sc = scale == "full" ? selftest::full_scale() : selftest::quick_scale();
  bool all = true;
  selftest::run_all(sc, seed, [&](const selftest::CheckResult& r) {
    all = all && r.passed;
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << " [" << r.seconds << " s]\n"
              << std::flush;
  });
  std::cout << (all ? "selftest passed\n" : "selftest FAILED\n");
  return all ? kExitOk : 1;
}

int cmd_capacity(const std::string& config, const std::vector<std::size_t>& lengths,
                 const std::vector<unsigned>& list_bits, const std::string& key_hex, const std::string& out,
                 std::uint64_t seed) {
  const auto cfg = load_session(config);
  CapacitySweep sw;
  sw.key = resolve_key(key_hex);
  sw.lambda = cfg.lambda;
  sw.payload_lengths = lengths;
  sw.list_bits = list_bits.empty() ? std::vector<unsigned>{cfg.list_bits} : list_bits;
  sw.suffix_bits = cfg.suffix_bits;
  sw.max_tokens = cfg.max_tokens;
  sw.seed = seed;
  if (!sw.suffix_bits && !is_deterministic_kind(cfg.model)) {
    throw UsageError("\"b\": \"auto\" needs a deterministic model kind");
  }
  const auto rows = run_capacity_sweep(sw, model_from_json(cfg.model));
  if (out.empty()) {
    write_capacity_csv(std::cout, rows);
  } else {
    std::ofstream f(out);
    if (!f) throw Error(ErrorCode::kFormat, "cannot write " + out);
    write_capacity_csv(f, rows);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"List-decoding steganography over token distributions"};
  app.require_subcommand(1);

  std::string config, in, out, key, session, scale = "quick", csv_out;
  std::uint64_t seed = 1;
  bool json_report = false;
  std::vector<std::size_t> lengths;
  std::vector<unsigned> list_bits;

  auto* enc = app.add_subcommand("encode", "Embed a payload file; writes <out> and <out>.session");
  enc->add_option("-c,--config", config, "Session config (JSON)")->required();
  enc->add_option("-i,--in", in, "Payload file (8-byte bit count + packed bits)")->required();
  enc->add_option("-o,--out", out, "Stegotext file (LSTG)")->required();
  enc->add_option("-k,--key", key, "64 hex characters; defaults to $LISTSTEG_KEY");
  enc->add_flag("--json", json_report, "Print the capacity report as JSON");

  auto* dec = app.add_subcommand("decode", "Recover the payload from a stegotext");
  dec->add_option("-c,--config", config, "Session config (JSON)")->required();
  dec->add_option("-i,--in", in, "Stegotext file (LSTG)")->required();
  dec->add_option("-o,--out", out, "Payload file to write")->required();
  dec->add_option("-k,--key", key, "64 hex characters; defaults to $LISTSTEG_KEY");
  dec->add_option("-s,--session", session, "Session header; defaults to <in>.session");

  auto* st = app.add_subcommand("selftest", "Run the statistical and round-trip checks");
  st->add_option("--scale", scale, "quick or full")->check(CLI::IsMember({"quick", "full"}));
  st->add_option("--seed", seed, "Seed for keys, payloads and trials");

  auto* cap = app.add_subcommand("capacity", "Utilization table over payload length x N (CSV)");
  cap->add_option("-c,--config", config, "Session config (JSON)")->required();
  cap->add_option("-l,--lengths", lengths, "Payload lengths in bits")->required()->delimiter(',');
  cap->add_option("-N,--list-bits", list_bits, "List widths; defaults to the config's N")->delimiter(',');
  cap->add_option("-k,--key", key, "64 hex characters; defaults to $LISTSTEG_KEY");
  cap->add_option("-o,--out", csv_out, "CSV file; defaults to stdout");
  cap->add_option("--seed", seed, "Seed for the payload bits");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*enc) return cmd_encode(config, in, out, key, json_report);
    if (*dec) return cmd_decode(config, in, out, key, session);
    if (*st) return cmd_selftest(scale, seed);
    if (*cap) return cmd_capacity(config, lengths, list_bits, key, csv_out, seed);
  } catch (const UsageError& e) {
    std::cerr << "liststeg: usage: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "liststeg: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "liststeg: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

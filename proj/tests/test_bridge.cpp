#include <catch_amalgamated.hpp>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "liststeg/bridge_client.hpp"
#include "liststeg/codec.hpp"
#include "liststeg/model_config.hpp"

using namespace liststeg;

namespace {

const SecretKey kK0 = SecretKey::from_hex("000102030405060708090a0b0c0d0e0f101112131415161718191a1b1c1d1e1f");

auto code_is(ErrorCode c) {
  return Catch::Matchers::Predicate<Error>([c](const Error& e) { return e.code() == c; }, std::string(to_string(c)));
}

const std::vector<std::vector<double>> kTable = {{0.7, 0.2, 0.1}, {0.15, 0.7, 0.15}, {0.1, 0.2, 0.7}};
const std::vector<double> kInitial = {0.6, 0.3, 0.1};

std::string markov_reply(const nlohmann::json& req) {
  const auto hist = req.at("history").get<std::vector<TokenId>>();
  const auto d = quantize(hist.empty() ? kInitial : kTable.at(hist.back()));
  return nlohmann::json{{"weights", std::vector<std::uint64_t>(d.weights().begin(), d.weights().end())},
                        {"fingerprint", "markov3"}}
      .dump();
}

/// One-connection NDJSON server on 127.0.0.1 with an ephemeral port.
class FakeTcpServer {
 public:
  explicit FakeTcpServer(std::function<std::string(const nlohmann::json&)> reply) : reply_(std::move(reply)) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    REQUIRE(listen_fd_ >= 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    REQUIRE(::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
    REQUIRE(::listen(listen_fd_, 1) == 0);
    socklen_t len = sizeof addr;
    REQUIRE(::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len) == 0);
    port_ = ntohs(addr.sin_port);
    thread_ = std::thread([this] { serve(); });
  }

  ~FakeTcpServer() {
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    thread_.join();
  }

  std::uint16_t port() const { return port_; }
  std::size_t requests() const { return requests_; }

 private:
  void serve() {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) return;
    detail::FdLineIo io(fd, fd);
    try {
      for (;;) {
        const auto req = nlohmann::json::parse(io.read_line());
        ++requests_;
        const std::string out = reply_(req);
        if (out.empty()) break;  // hang up
        io.write_line(out);
      }
    } catch (const Error&) {
      // client closed
    }
    ::close(fd);
  }

  std::function<std::string(const nlohmann::json&)> reply_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::thread thread_;
  std::size_t requests_ = 0;
};

ModelSource tcp_model(std::uint16_t port, std::size_t vocab = 3) {
  return model_from_json({{"kind", "server"}, {"vocab_size", vocab}, {"host", "127.0.0.1"}, {"port", port}});
}

ModelSource stdio_model(const std::string& mode) {
  return model_from_json({{"kind", "server"},
                          {"vocab_size", 3},
                          {"command", {"python3", std::string(LISTSTEG_FIXTURES) + "/fake_bridge.py", mode}}});
}

}  // namespace

TEST_CASE("request encoding") {
  const std::vector<TokenId> h = {3, 1};
  const auto j = nlohmann::json::parse(bridge_request("s1", 5, h));
  CHECK(j["session"] == "s1");
  CHECK(j["vocab_size"] == 5);
  CHECK(j["history"] == nlohmann::json::array({3, 1}));
}

TEST_CASE("response parsing") {
  const auto ok = parse_bridge_response(R"({"weights":[4294967295,1],"fingerprint":"abc"})", 2);
  CHECK(ok.weights.weight(1) == 1);
  CHECK(ok.fingerprint == "abc");
  CHECK_THROWS_MATCHES(parse_bridge_response("nope", 2), Error, code_is(ErrorCode::kProtocol));
  CHECK_THROWS_MATCHES(parse_bridge_response("[1,2]", 2), Error, code_is(ErrorCode::kProtocol));
  CHECK_THROWS_MATCHES(parse_bridge_response(R"({"weights":[1,2]})", 2), Error, code_is(ErrorCode::kProtocol));
  CHECK_THROWS_MATCHES(parse_bridge_response(R"({"weights":[4294967296]})", 2), Error, code_is(ErrorCode::kProtocol));
  CHECK_THROWS_MATCHES(parse_bridge_response(R"({"weights":[-1,4294967297]})", 2), Error,
                       code_is(ErrorCode::kProtocol));
  CHECK_THROWS_MATCHES(parse_bridge_response(R"({"weights":[0.5,0.5]})", 2), Error, code_is(ErrorCode::kProtocol));
  CHECK_THROWS_MATCHES(parse_bridge_response(R"({"error":{"code":"oom","message":"x"}})", 2), Error,
                       code_is(ErrorCode::kModel));
}

TEST_CASE("tcp transport serves distributions and round-trips a payload") {
  FakeTcpServer server(markov_reply);
  const auto remote = tcp_model(server.port());
  const auto local = make_model<MarkovSource>(kTable, kInitial);
  CodecParams p;
  p.list_bits = 8;
  p.suffix_bits = 40;
  p.key = kK0;
  const BitString payload = BitString::from_uint(0xfeedfacecafe, 48);
  const auto trace = encode(p, remote, payload);
  CHECK(trace.tokens == encode(p, local, payload).tokens);
  CHECK(decode(p, remote, trace.tokens, payload.size()) == payload);
  CHECK(server.requests() >= 2 * trace.tokens.size());
  CHECK(remote.source().describe() == "server(3,fingerprint=markov3)");
}

TEST_CASE("tcp transport: repeated queries are identical") {
  FakeTcpServer server(markov_reply);
  auto m = tcp_model(server.port());
  m.append_history(2);
  const auto first = m.next_distribution();
  for (int i = 0; i < 100; ++i) REQUIRE(*m.next_distribution() == *first);
  CHECK(*first == quantize(kTable[2]));
}

TEST_CASE("tcp transport failures") {
  {
    // Port from a closed listener: nothing accepts there.
    std::uint16_t port = 0;
    {
      FakeTcpServer s([](const nlohmann::json&) { return std::string(); });
      port = s.port();
      const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
      sockaddr_in addr{};
      addr.sin_family = AF_INET;
      addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
      addr.sin_port = htons(port);
      ::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
      ::close(fd);
    }
    CHECK_THROWS_MATCHES(tcp_model(port), Error, code_is(ErrorCode::kTransport));
  }
  {
    FakeTcpServer s([](const nlohmann::json&) { return std::string(); });
    auto m = tcp_model(s.port());
    CHECK_THROWS_MATCHES(m.next_distribution(), Error, code_is(ErrorCode::kTransport));
  }
  {
    FakeTcpServer s([](const nlohmann::json&) { return std::string(R"({"error":{"code":"busy","message":"later"}})"); });
    auto m = tcp_model(s.port());
    CHECK_THROWS_MATCHES(m.next_distribution(), Error, code_is(ErrorCode::kModel));
  }
  {
    FakeTcpServer s(markov_reply);
    auto m = tcp_model(s.port(), 4);
    CHECK_THROWS_MATCHES(m.next_distribution(), Error, code_is(ErrorCode::kProtocol));
  }
}

TEST_CASE("stdio transport: distributions match the local chain") {
  auto remote = stdio_model("ok");
  auto local = make_model<MarkovSource>(kTable, kInitial);
  for (TokenId t : {0u, 2u, 2u, 1u}) {
    CHECK(*remote.next_distribution() == *local.next_distribution());
    remote.append_history(t);
    local.append_history(t);
  }
  CHECK(*remote.next_distribution() == *local.next_distribution());
}

TEST_CASE("stdio transport: fingerprint is stable over a session") {
  auto m = stdio_model("ok");
  for (int i = 0; i < 100; ++i) m.next_distribution();
  auto& src = dynamic_cast<ServerSource&>(m.source());
  CHECK(src.fingerprint() == std::optional<std::string>("markov3"));
}

TEST_CASE("stdio transport failures") {
  CHECK_THROWS_MATCHES(stdio_model("garbage").next_distribution(), Error, code_is(ErrorCode::kProtocol));
  CHECK_THROWS_MATCHES(stdio_model("error").next_distribution(), Error, code_is(ErrorCode::kModel));
  CHECK_THROWS_MATCHES(stdio_model("short").next_distribution(), Error, code_is(ErrorCode::kProtocol));
  {
    auto m = stdio_model("die");
    m.next_distribution();
    CHECK_THROWS_MATCHES(m.next_distribution(), Error, code_is(ErrorCode::kTransport));
  }
  {
    auto m = stdio_model("drift");
    m.next_distribution();
    CHECK_THROWS_MATCHES(m.next_distribution(), Error, code_is(ErrorCode::kProtocol));
  }
  CHECK_THROWS_MATCHES(model_from_json({{"kind", "server"}, {"vocab_size", 3}, {"command", {"/nonexistent/server"}}})
                           .next_distribution(),
                       Error, code_is(ErrorCode::kTransport));
}

TEST_CASE("server kind is not deterministic for auto suffix length") {
  CHECK_FALSE(is_deterministic_kind({{"kind", "server"}}));
  CHECK(is_deterministic_kind({{"kind", "markov"}}));
}

#pragma once

// Client side of the distribution-server protocol.
//
// Wire format: newline-delimited JSON, one request in flight per connection.
//   request:  {"session":"<id>","vocab_size":V,"history":[t0,t1,...]}\n
//   response: {"weights":[w0,...,w(V-1)],"fingerprint":"<hex>"}\n
//   failure:  {"error":{"code":"<kind>","message":"<text>"}}\n
// Weights are already on the 2^32 grid; no floating point crosses the wire.

#include <arpa/inet.h>
#include <netdb.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "liststeg/error.hpp"
#include "liststeg/model.hpp"

namespace liststeg {

/// Bidirectional line transport.
class LineChannel {
 public:
  virtual ~LineChannel() = default;
  virtual void write_line(const std::string& line) = 0;
  /// Returns the next line without its terminator; throws transport on EOF.
  virtual std::string read_line() = 0;
};

namespace detail {

/// Buffered line IO over a pair of file descriptors.
class FdLineIo {
 public:
  FdLineIo(int read_fd, int write_fd) : read_fd_(read_fd), write_fd_(write_fd) {}

  void write_line(const std::string& line) {
    std::string data = line;
    data.push_back('\n');
    std::size_t off = 0;
    while (off < data.size()) {
      const ssize_t n = ::write(write_fd_, data.data() + off, data.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw Error(ErrorCode::kTransport, std::string("write failed: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  std::string read_line() {
    for (;;) {
      if (auto pos = pending_.find('\n'); pos != std::string::npos) {
        std::string line = pending_.substr(0, pos);
        pending_.erase(0, pos + 1);
        return line;
      }
      char buf[65536];
      const ssize_t n = ::read(read_fd_, buf, sizeof buf);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw Error(ErrorCode::kTransport, std::string("read failed: ") + std::strerror(errno));
      }
      if (n == 0) throw Error(ErrorCode::kTransport, "connection closed by peer");
      pending_.append(buf, static_cast<std::size_t>(n));
    }
  }

 private:
  int read_fd_;
  int write_fd_;
  std::string pending_;
};

}  // namespace detail

class TcpChannel final : public LineChannel {
 public:
  TcpChannel(const std::string& host, std::uint16_t port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const std::string service = std::to_string(port);
    if (int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0) {
      throw Error(ErrorCode::kTransport, "cannot resolve " + host + ": " + ::gai_strerror(rc));
    }
    for (addrinfo* p = res; p != nullptr; p = p->ai_next) {
      fd_ = ::socket(p->ai_family, p->ai_socktype, p->ai_protocol);
      if (fd_ < 0) continue;
      if (::connect(fd_, p->ai_addr, p->ai_addrlen) == 0) break;
      ::close(fd_);
      fd_ = -1;
    }
    ::freeaddrinfo(res);
    if (fd_ < 0) {
      throw Error(ErrorCode::kTransport, "cannot connect to " + host + ":" + service);
    }
    io_.emplace(fd_, fd_);
  }

  ~TcpChannel() override {
    if (fd_ >= 0) ::close(fd_);
  }

  TcpChannel(const TcpChannel&) = delete;
  TcpChannel& operator=(const TcpChannel&) = delete;

  void write_line(const std::string& line) override { io_->write_line(line); }
  std::string read_line() override { return io_->read_line(); }

 private:
  int fd_ = -1;
  std::optional<detail::FdLineIo> io_;
};

/// Spawns the server as a child process and talks to it over stdin/stdout.
class ProcessChannel final : public LineChannel {
 public:
  explicit ProcessChannel(const std::vector<std::string>& argv) {
    if (argv.empty()) throw Error(ErrorCode::kConfig, "server command is empty");
    int to_child[2];
    int from_child[2];
    if (::pipe(to_child) != 0 || ::pipe(from_child) != 0) {
      throw Error(ErrorCode::kTransport, "pipe() failed");
    }
    pid_ = ::fork();
    if (pid_ < 0) throw Error(ErrorCode::kTransport, "fork() failed");
    if (pid_ == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::close(to_child[0]);
      ::close(to_child[1]);
      ::close(from_child[0]);
      ::close(from_child[1]);
      std::vector<char*> args;
      for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
      args.push_back(nullptr);
      ::execvp(args[0], args.data());
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    write_fd_ = to_child[1];
    read_fd_ = from_child[0];
    ::signal(SIGPIPE, SIG_IGN);
    io_.emplace(read_fd_, write_fd_);
  }

  ~ProcessChannel() override {
    if (write_fd_ >= 0) ::close(write_fd_);
    if (read_fd_ >= 0) ::close(read_fd_);
    if (pid_ > 0) {
      int status = 0;
      ::waitpid(pid_, &status, 0);
    }
  }

  ProcessChannel(const ProcessChannel&) = delete;
  ProcessChannel& operator=(const ProcessChannel&) = delete;

  void write_line(const std::string& line) override { io_->write_line(line); }
  std::string read_line() override { return io_->read_line(); }

 private:
  pid_t pid_ = -1;
  int write_fd_ = -1;
  int read_fd_ = -1;
  std::optional<detail::FdLineIo> io_;
};

/// Encodes a request line.
inline std::string bridge_request(const std::string& session, std::size_t vocab_size,
                                  std::span<const TokenId> history) {
  nlohmann::json j;
  j["session"] = session;
  j["vocab_size"] = vocab_size;
  j["history"] = std::vector<TokenId>(history.begin(), history.end());
  return j.dump();
}

struct BridgeResponse {
  QuantizedDistribution weights;
  std::string fingerprint;
};

/// Decodes a response line. Error objects become `kModel` errors; anything
/// malformed is a `kProtocol` error.
inline BridgeResponse parse_bridge_response(const std::string& line, std::size_t vocab_size) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kProtocol, std::string("response is not JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::kProtocol, "response is not a JSON object");
  if (auto it = j.find("error"); it != j.end()) {
    std::string code = "unknown";
    std::string message;
    if (it->is_object()) {
      code = it->value("code", code);
      message = it->value("message", message);
    } else if (it->is_string()) {
      message = it->get<std::string>();
    }
    throw Error(ErrorCode::kModel, "server reported " + code + ": " + message);
  }
  auto w = j.find("weights");
  if (w == j.end() || !w->is_array()) throw Error(ErrorCode::kProtocol, "response lacks weights array");
  if (w->size() != vocab_size) {
    throw Error(ErrorCode::kProtocol, "weights length " + std::to_string(w->size()) +
                                          " != vocab_size " + std::to_string(vocab_size));
  }
  std::vector<std::uint64_t> weights;
  weights.reserve(vocab_size);
  for (const auto& x : *w) {
    if (!x.is_number_unsigned() && !(x.is_number_integer() && x.get<std::int64_t>() >= 0)) {
      throw Error(ErrorCode::kProtocol, "weights must be non-negative integers");
    }
    weights.push_back(x.get<std::uint64_t>());
  }
  std::string fingerprint;
  if (auto f = j.find("fingerprint"); f != j.end() && f->is_string()) fingerprint = f->get<std::string>();
  try {
    return {QuantizedDistribution(std::move(weights)), std::move(fingerprint)};
  } catch (const Error& e) {
    throw Error(ErrorCode::kProtocol, e.what());
  }
}

/// The server model kind. Requests are serialized on the channel.
class ServerSource final : public DistributionSource {
 public:
  ServerSource(std::unique_ptr<LineChannel> channel, std::size_t vocab_size, std::string session = "liststeg")
      : channel_(std::move(channel)), vocab_size_(vocab_size), session_(std::move(session)) {
    if (vocab_size_ < 2) throw Error(ErrorCode::kConfig, "server vocab_size must be >= 2");
  }

  std::size_t vocab_size() const override { return vocab_size_; }

  std::shared_ptr<const QuantizedDistribution> distribution(std::span<const TokenId> history) override {
    channel_->write_line(bridge_request(session_, vocab_size_, history));
    auto resp = parse_bridge_response(channel_->read_line(), vocab_size_);
    if (!fingerprint_) {
      fingerprint_ = resp.fingerprint;
    } else if (*fingerprint_ != resp.fingerprint) {
      throw Error(ErrorCode::kProtocol, "server fingerprint changed mid-session");
    }
    return std::make_shared<QuantizedDistribution>(std::move(resp.weights));
  }

  std::string describe() const override {
    return "server(" + std::to_string(vocab_size_) + ",fingerprint=" + fingerprint_.value_or("?") + ")";
  }

  const std::optional<std::string>& fingerprint() const { return fingerprint_; }

 private:
  std::unique_ptr<LineChannel> channel_;
  std::size_t vocab_size_;
  std::string session_;
  std::optional<std::string> fingerprint_;
};

}  // namespace liststeg

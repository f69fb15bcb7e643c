#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>

#include "ddfm/wire.hpp"

namespace ddfm::net {

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  // "host:port"; throws ConfigError on malformed input.
  static Endpoint parse(const std::string& text);
  std::string str() const { return host + ":" + std::to_string(port); }
};

// Owned TCP stream carrying length-prefixed frames. Socket failures raise
// TransportError.
class Connection {
 public:
  Connection() = default;
  explicit Connection(int fd) : fd_(fd) {}
  ~Connection();
  Connection(Connection&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }
  Connection& operator=(Connection&& other) noexcept;
  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;

  static Connection connect(const Endpoint& endpoint, std::chrono::milliseconds timeout);

  bool is_open() const { return fd_ >= 0; }
  void close();

  void send_frame(const wire::Bytes& payload);
  // nullopt on orderly close by the peer before a new frame starts.
  std::optional<wire::Bytes> recv_frame();

 private:
  void send_all(const std::uint8_t* data, std::size_t n);
  bool recv_all(std::uint8_t* data, std::size_t n);

  int fd_ = -1;
};

// Loopback listener, used by test servers and tooling.
class Listener {
 public:
  // Port 0 picks an ephemeral port.
  explicit Listener(std::uint16_t port = 0, const std::string& host = "127.0.0.1");
  ~Listener();
  Listener(const Listener&) = delete;
  Listener& operator=(const Listener&) = delete;

  std::uint16_t port() const { return port_; }
  Connection accept();
  void close();

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

}  // namespace ddfm::net

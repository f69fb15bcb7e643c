#include "ddfm/net.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <sys/time.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "ddfm/error.hpp"

namespace ddfm::net {

namespace {

std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

}  // namespace

Endpoint Endpoint::parse(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == text.size()) {
    throw ConfigError("endpoint must look like HOST:PORT, got '" + text + "'");
  }
  Endpoint e;
  e.host = text.substr(0, colon);
  try {
    std::size_t used = 0;
    const int port = std::stoi(text.substr(colon + 1), &used);
    if (used != text.size() - colon - 1 || port <= 0 || port > 65535) throw std::out_of_range("port");
    e.port = static_cast<std::uint16_t>(port);
  } catch (const std::exception&) {
    throw ConfigError("invalid port in endpoint '" + text + "'");
  }
  return e;
}

Connection::~Connection() { close(); }

Connection& Connection::operator=(Connection&& other) noexcept {
  if (this != &other) {
    close();
    fd_ = other.fd_;
    other.fd_ = -1;
  }
  return *this;
}

void Connection::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

Connection Connection::connect(const Endpoint& endpoint, std::chrono::milliseconds timeout) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* result = nullptr;
  const std::string port = std::to_string(endpoint.port);
  if (int rc = ::getaddrinfo(endpoint.host.c_str(), port.c_str(), &hints, &result); rc != 0) {
    throw TransportError("cannot resolve " + endpoint.str() + ": " + ::gai_strerror(rc), 1);
  }
  std::string last_error = "no address";
  for (addrinfo* ai = result; ai != nullptr; ai = ai->ai_next) {
    int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) {
      last_error = errno_text("socket");
      continue;
    }
    timeval tv{};
    tv.tv_sec = static_cast<time_t>(timeout.count() / 1000);
    tv.tv_usec = static_cast<suseconds_t>((timeout.count() % 1000) * 1000);
    ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
    ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
      ::freeaddrinfo(result);
      return Connection(fd);
    }
    last_error = errno_text("connect");
    ::close(fd);
  }
  ::freeaddrinfo(result);
  throw TransportError("cannot connect to " + endpoint.str() + ": " + last_error, 1);
}

void Connection::send_all(const std::uint8_t* data, std::size_t n) {
  if (fd_ < 0) throw TransportError("send on closed connection", 1);
  while (n > 0) {
    const ssize_t sent = ::send(fd_, data, n, MSG_NOSIGNAL);
    if (sent < 0) {
      if (errno == EINTR) continue;
      throw TransportError(errno_text("send"), 1);
    }
    data += sent;
    n -= static_cast<std::size_t>(sent);
  }
}

bool Connection::recv_all(std::uint8_t* data, std::size_t n) {
  if (fd_ < 0) throw TransportError("receive on closed connection", 1);
  std::size_t got = 0;
  while (got < n) {
    const ssize_t r = ::recv(fd_, data + got, n - got, 0);
    if (r == 0) {
      if (got == 0) return false;
      throw TransportError("connection closed mid-frame", 1);
    }
    if (r < 0) {
      if (errno == EINTR) continue;
      throw TransportError(errno_text("recv"), 1);
    }
    got += static_cast<std::size_t>(r);
  }
  return true;
}

void Connection::send_frame(const wire::Bytes& payload) {
  if (payload.size() > wire::kMaxFrame) throw ProtocolError("frame too large");
  wire::Writer header;
  header.u32(static_cast<std::uint32_t>(payload.size()));
  send_all(header.bytes().data(), header.bytes().size());
  send_all(payload.data(), payload.size());
}

std::optional<wire::Bytes> Connection::recv_frame() {
  std::uint8_t header[4];
  if (!recv_all(header, 4)) return std::nullopt;
  wire::Reader r(header);
  const std::uint32_t length = r.u32();
  if (length > wire::kMaxFrame) throw ProtocolError("frame length " + std::to_string(length) + " too large");
  wire::Bytes payload(length);
  if (length > 0 && !recv_all(payload.data(), length)) {
    throw TransportError("connection closed mid-frame", 1);
  }
  return payload;
}

Listener::Listener(std::uint16_t port, const std::string& host) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw TransportError(errno_text("socket"), 1);
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    close();
    throw ConfigError("listener host must be an IPv4 address, got '" + host + "'");
  }
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd_, 8) != 0) {
    const std::string msg = errno_text("bind/listen");
    close();
    throw TransportError(msg, 1);
  }
  socklen_t len = sizeof addr;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

Listener::~Listener() { close(); }

void Listener::close() {
  if (fd_ >= 0) {
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    fd_ = -1;
  }
}

Connection Listener::accept() {
  for (;;) {
    const int fd = ::accept(fd_, nullptr, nullptr);
    if (fd >= 0) return Connection(fd);
    if (errno == EINTR) continue;
    throw TransportError(errno_text("accept"), 1);
  }
}

}  // namespace ddfm::net

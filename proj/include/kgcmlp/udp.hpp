#pragma once

// Thin POSIX UDP binding: one frame per datagram, no retransmission below the
// protocol. send() may be called from any thread; receive() blocks up to a
// timeout and should be called from a single thread.

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstdint>
#include <cstring>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "kgcmlp/error.hpp"

namespace kgcmlp {

struct UdpAddress {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
};

// Parses "host:port".
inline UdpAddress parse_udp_address(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == text.size())
    throw ParameterError("expected host:port, got '" + text + "'");
  UdpAddress addr;
  addr.host = text.substr(0, colon);
  const std::string port = text.substr(colon + 1);
  char* end = nullptr;
  const long value = std::strtol(port.c_str(), &end, 10);
  if (*end != '\0' || value < 0 || value > 65535) throw ParameterError("invalid port '" + port + "'");
  addr.port = static_cast<std::uint16_t>(value);
  return addr;
}

class UdpSocket {
 public:
  // Binds to `local` (port 0 picks an ephemeral port).
  explicit UdpSocket(const UdpAddress& local) {
    fd_ = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (fd_ < 0) throw TransportError(std::string("socket: ") + std::strerror(errno));
    sockaddr_in sa = resolve(local);
    if (::bind(fd_, reinterpret_cast<const sockaddr*>(&sa), sizeof sa) != 0) {
      const std::string msg = std::strerror(errno);
      ::close(fd_);
      throw TransportError("bind " + local.host + ":" + std::to_string(local.port) + ": " + msg);
    }
  }

  UdpSocket(const UdpSocket&) = delete;
  UdpSocket& operator=(const UdpSocket&) = delete;
  ~UdpSocket() {
    if (fd_ >= 0) ::close(fd_);
  }

  std::uint16_t local_port() const {
    sockaddr_in sa{};
    socklen_t len = sizeof sa;
    if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&sa), &len) != 0)
      throw TransportError(std::string("getsockname: ") + std::strerror(errno));
    return ntohs(sa.sin_port);
  }

  // Remembers `peer` as the default destination for send().
  void connect_peer(const UdpAddress& peer) {
    std::lock_guard lock(mu_);
    peer_ = resolve(peer);
  }

  bool has_peer() const {
    std::lock_guard lock(mu_);
    return peer_.has_value();
  }

  void send(const std::vector<std::uint8_t>& bytes) {
    std::lock_guard lock(mu_);
    if (!peer_) throw TransportError("send: no peer address known yet");
    const auto n = ::sendto(fd_, bytes.data(), bytes.size(), 0,
                            reinterpret_cast<const sockaddr*>(&*peer_), sizeof *peer_);
    if (n < 0 || static_cast<std::size_t>(n) != bytes.size())
      throw TransportError(std::string("sendto: ") + std::strerror(errno));
  }

  // Waits up to timeout_ms for one datagram. The first sender seen becomes the
  // peer when none was configured (listening side).
  std::optional<std::vector<std::uint8_t>> receive(int timeout_ms) {
    pollfd pfd{fd_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, timeout_ms);
    if (ready < 0) {
      if (errno == EINTR) return std::nullopt;
      throw TransportError(std::string("poll: ") + std::strerror(errno));
    }
    if (ready == 0) return std::nullopt;
    std::vector<std::uint8_t> buf(2048);
    sockaddr_in from{};
    socklen_t len = sizeof from;
    const auto n = ::recvfrom(fd_, buf.data(), buf.size(), 0, reinterpret_cast<sockaddr*>(&from), &len);
    if (n < 0) throw TransportError(std::string("recvfrom: ") + std::strerror(errno));
    buf.resize(static_cast<std::size_t>(n));
    std::lock_guard lock(mu_);
    if (!peer_) peer_ = from;
    return buf;
  }

 private:
  static sockaddr_in resolve(const UdpAddress& addr) {
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_port = htons(addr.port);
    if (::inet_pton(AF_INET, addr.host.c_str(), &sa.sin_addr) == 1) return sa;
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_DGRAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(addr.host.c_str(), nullptr, &hints, &res) != 0 || !res)
      throw TransportError("cannot resolve host '" + addr.host + "'");
    sa.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
    ::freeaddrinfo(res);
    return sa;
  }

  int fd_ = -1;
  mutable std::mutex mu_;
  std::optional<sockaddr_in> peer_;
};

}  // namespace kgcmlp

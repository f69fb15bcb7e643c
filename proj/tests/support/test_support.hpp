#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <thread>

#include "ddfm/net.hpp"
#include "ddfm/tensor.hpp"
#include "ddfm/wire.hpp"

namespace support {

inline std::string data_path(const std::string& rel) { return std::string(DDFM_TEST_DATA_DIR) + "/" + rel; }

inline ddfm::ImageTensor random_tensor(std::mt19937_64& rng, int h, int w, int c, double lo = -1.0,
                                       double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  ddfm::ImageTensor t(h, w, c);
  for (double& v : t.data()) v = d(rng);
  return t;
}

inline ddfm::GradientField random_field(std::mt19937_64& rng, int h, int w, int c, double scale = 1.0) {
  ddfm::GradientField g;
  g.horizontal = random_tensor(rng, h, w, c, -scale, scale);
  g.vertical = random_tensor(rng, h, w, c, -scale, scale);
  return g;
}

inline Eigen::VectorXd to_vector(const ddfm::ImageTensor& t) {
  return Eigen::Map<const Eigen::VectorXd>(t.values().data(), static_cast<Eigen::Index>(t.size()));
}

inline ddfm::ImageTensor from_vector(const Eigen::VectorXd& v, int h, int w) {
  return ddfm::ImageTensor(h, w, 1, std::vector<double>(v.data(), v.data() + v.size()));
}

// Dense periodic forward-difference operator for a single-channel h x w
// image: rows [0, n) horizontal differences, rows [n, 2n) vertical ones.
inline Eigen::MatrixXd dense_grad(int h, int w) {
  const int n = h * w;
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(2 * n, n);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const int i = r * w + c;
      g(i, r * w + (c + 1) % w) += 1.0;
      g(i, i) -= 1.0;
      g(n + i, ((r + 1) % h) * w + c) += 1.0;
      g(n + i, i) -= 1.0;
    }
  }
  return g;
}

inline Eigen::VectorXd stack(const ddfm::GradientField& g) {
  Eigen::VectorXd v(2 * g.horizontal.size());
  v << to_vector(g.horizontal), to_vector(g.vertical);
  return v;
}

inline double max_abs_diff(const ddfm::ImageTensor& a, const ddfm::ImageTensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Loopback score server for client tests. Answers the handshake with
// `handshake`, then replies to each request with `reply(request)`. The
// handler may return an empty payload to drop the connection.
class MockServer {
 public:
  using Handler = std::function<ddfm::wire::Bytes(const ddfm::wire::Request&)>;

  MockServer(ddfm::wire::Handshake handshake, Handler reply)
      : handshake_(std::move(handshake)), reply_(std::move(reply)), thread_([this] { serve(); }) {}

  ~MockServer() {
    stop_ = true;
    // Unblock accept() with a throwaway connection.
    try {
      auto c = ddfm::net::Connection::connect({"127.0.0.1", listener_.port()},
                                              std::chrono::milliseconds(500));
    } catch (...) {
    }
    thread_.join();
  }

  ddfm::net::Endpoint endpoint() const { return {"127.0.0.1", listener_.port()}; }
  int connections() const { return connections_; }
  int requests() const { return requests_; }

 private:
  void serve() {
    while (!stop_) {
      ddfm::net::Connection conn;
      try {
        conn = listener_.accept();
      } catch (...) {
        return;
      }
      if (stop_) return;
      ++connections_;
      try {
        auto hello = conn.recv_frame();
        if (!hello) continue;
        ddfm::wire::decode_hello(*hello);
        conn.send_frame(ddfm::wire::encode_handshake(handshake_));
        while (auto frame = conn.recv_frame()) {
          ++requests_;
          auto out = reply_(ddfm::wire::decode_request(*frame));
          if (out.empty()) break;
          conn.send_frame(out);
        }
      } catch (...) {
      }
    }
  }

  ddfm::net::Listener listener_;
  ddfm::wire::Handshake handshake_;
  Handler reply_;
  std::atomic<bool> stop_{false};
  std::atomic<int> connections_{0};
  std::atomic<int> requests_{0};
  std::thread thread_;
};

}  // namespace support

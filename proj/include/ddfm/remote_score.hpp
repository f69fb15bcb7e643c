#pragma once

#include <chrono>

#include "ddfm/net.hpp"
#include "ddfm/score.hpp"
#include "ddfm/wire.hpp"

namespace ddfm {

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds backoff{200};  // doubled after each failed attempt
  std::chrono::milliseconds timeout{30000};
};

// Client session against a score server speaking the wire protocol. One
// request in flight at a time; not thread-safe, use one session per chain.
class RemoteScore final : public ScoreModel {
 public:
  // Connects and performs the handshake immediately.
  explicit RemoteScore(net::Endpoint endpoint, RetryPolicy policy = {});

  // Sends f_t (1-channel inputs are replicated to the server's channel
  // count and the reply averaged back). Epsilon replies are converted with
  // score = -eps / sqrt(1 - abar_t).
  ImageTensor evaluate(const ImageTensor& f_t, int t, const NoiseSchedule& schedule) override;

  std::optional<NoiseSchedule> native_schedule() const override;
  std::optional<SizeHint> supported_size() const override;
  std::string describe() const override;

  const wire::Handshake& handshake() const { return handshake_; }
  int reconnects() const { return reconnects_; }

 private:
  void open_session();
  wire::Bytes round_trip(const wire::Bytes& request);

  net::Endpoint endpoint_;
  RetryPolicy policy_;
  net::Connection conn_;
  wire::Handshake handshake_;
  int reconnects_ = 0;
};

}  // namespace ddfm

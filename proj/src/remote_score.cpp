#include "ddfm/remote_score.hpp"

#include <cmath>
#include <thread>

#include "ddfm/error.hpp"

namespace ddfm {

RemoteScore::RemoteScore(net::Endpoint endpoint, RetryPolicy policy)
    : endpoint_(std::move(endpoint)), policy_(policy) {
  if (policy_.max_attempts < 1) throw ParameterError("max_attempts must be >= 1");
  auto delay = policy_.backoff;
  for (int attempt = 1;; ++attempt) {
    try {
      open_session();
      return;
    } catch (const TransportError& e) {
      if (attempt >= policy_.max_attempts) {
        throw TransportError("handshake with " + endpoint_.str() + " failed after " +
                                 std::to_string(attempt) + " attempt(s): " + e.what(),
                             attempt);
      }
    }
    std::this_thread::sleep_for(delay);
    delay *= 2;
  }
}

void RemoteScore::open_session() {
  conn_ = net::Connection::connect(endpoint_, policy_.timeout);
  conn_.send_frame(wire::encode_hello());
  auto reply = conn_.recv_frame();
  if (!reply) throw TransportError("server closed connection during handshake", 1);
  if (wire::is_error(*reply)) {
    const auto err = wire::decode_error(*reply);
    throw ProtocolError("server refused handshake: " + err.message);
  }
  handshake_ = wire::decode_handshake(*reply);
  if (handshake_.betas.empty()) throw ProtocolError("server advertised an empty schedule");
  if (handshake_.channels != 1 && handshake_.channels != 3) {
    throw ProtocolError("server advertised unsupported channel count " +
                        std::to_string(handshake_.channels));
  }
}

wire::Bytes RemoteScore::round_trip(const wire::Bytes& request) {
  auto delay = policy_.backoff;
  for (int attempt = 1;; ++attempt) {
    try {
      if (!conn_.is_open()) {
        open_session();
        ++reconnects_;
      }
      conn_.send_frame(request);
      auto reply = conn_.recv_frame();
      if (!reply) throw TransportError("server closed connection", 1);
      return std::move(*reply);
    } catch (const TransportError& e) {
      conn_.close();
      if (attempt >= policy_.max_attempts) {
        throw TransportError("request to " + endpoint_.str() + " failed after " +
                                 std::to_string(attempt) + " attempt(s): " + e.what(),
                             attempt);
      }
    }
    std::this_thread::sleep_for(delay);
    delay *= 2;
  }
}

ImageTensor RemoteScore::evaluate(const ImageTensor& f_t, int t, const NoiseSchedule& schedule) {
  if (t < 1 || t > schedule.steps()) throw ParameterError("remote_score: t out of range");
  const int server_channels = static_cast<int>(handshake_.channels);
  if (static_cast<std::uint32_t>(f_t.height()) != handshake_.height ||
      static_cast<std::uint32_t>(f_t.width()) != handshake_.width) {
    throw CapabilityError("server accepts " + std::to_string(handshake_.height) + "x" +
                          std::to_string(handshake_.width) + ", got " +
                          std::to_string(f_t.height()) + "x" + std::to_string(f_t.width()));
  }
  ImageTensor payload;
  if (f_t.channels() == server_channels) {
    payload = f_t;
  } else if (f_t.channels() == 1) {
    payload = broadcast_ir(f_t, server_channels);
  } else {
    throw CapabilityError("server accepts " + std::to_string(server_channels) +
                          " channels, got " + std::to_string(f_t.channels()));
  }

  const int model_t = schedule.model_timestep(t);
  if (model_t < 0 || static_cast<std::size_t>(model_t) >= handshake_.betas.size()) {
    throw CapabilityError("timestep " + std::to_string(model_t) + " outside the server schedule");
  }
  const auto reply = round_trip(wire::encode_request({static_cast<std::uint32_t>(model_t), payload}));
  if (wire::is_error(reply)) {
    const auto err = wire::decode_error(reply);
    if (err.code == wire::ErrorCode::kCapability) throw CapabilityError("server: " + err.message);
    throw ProtocolError("server: " + err.message);
  }
  ImageTensor out = wire::decode_response(reply);
  if (!out.same_shape(payload)) throw ProtocolError("response shape differs from request");

  if (handshake_.kind == wire::OutputKind::kEpsilon) {
    const double sigma = std::sqrt(1.0 - schedule.alpha_bar(t));
    if (!(sigma > 0.0)) throw NumericError("epsilon conversion undefined at alpha_bar = 1");
    out *= -1.0 / sigma;
  }
  if (f_t.channels() == payload.channels()) return out;
  ImageTensor mean(f_t.height(), f_t.width(), 1);
  for (std::size_t p = 0; p < mean.size(); ++p) {
    double acc = 0.0;
    for (int c = 0; c < server_channels; ++c) acc += out[p * server_channels + c];
    mean[p] = acc / server_channels;
  }
  return mean;
}

std::optional<NoiseSchedule> RemoteScore::native_schedule() const {
  return NoiseSchedule::from_betas(handshake_.betas);
}

std::optional<SizeHint> RemoteScore::supported_size() const {
  return SizeHint{static_cast<int>(handshake_.height), static_cast<int>(handshake_.width)};
}

std::string RemoteScore::describe() const {
  return "remote(" + endpoint_.str() + ", kind=" +
         (handshake_.kind == wire::OutputKind::kEpsilon ? "epsilon" : "score") +
         ", T=" + std::to_string(handshake_.betas.size()) + ")";
}

}  // namespace ddfm

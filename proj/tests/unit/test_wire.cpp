#include <doctest.h>

#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "ddfm/error.hpp"
#include "ddfm/remote_score.hpp"
#include "ddfm/sampler.hpp"
#include "ddfm/wire.hpp"
#include "test_support.hpp"

using namespace ddfm;

namespace {

wire::Bytes read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return wire::Bytes(std::istreambuf_iterator<char>(in), {});
}

struct Expected {
  int h = 0, w = 0, c = 0;
  std::vector<std::uint32_t> bits;
};

std::vector<Expected> read_expected(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::vector<Expected> out;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    Expected e;
    std::string colon;
    ls >> e.h >> e.w >> e.c >> colon;
    std::string hex;
    while (ls >> hex) e.bits.push_back(static_cast<std::uint32_t>(std::stoul(hex, nullptr, 16)));
    out.push_back(std::move(e));
  }
  return out;
}

std::uint32_t bits_of(double v) { return std::bit_cast<std::uint32_t>(static_cast<float>(v)); }

wire::Handshake handshake(wire::OutputKind kind, int h, int w, int c, int steps) {
  wire::Handshake hs;
  hs.kind = kind;
  hs.height = h;
  hs.width = w;
  hs.channels = c;
  hs.betas = build_linear_schedule(steps, 1e-4, 0.02).betas();
  return hs;
}

RetryPolicy quick_policy() {
  RetryPolicy p;
  p.backoff = std::chrono::milliseconds(10);
  p.timeout = std::chrono::milliseconds(2000);
  return p;
}

ImageTensor float_round(const ImageTensor& t) {
  ImageTensor out = t;
  for (double& v : out.data()) v = static_cast<float>(v);
  return out;
}

}  // namespace

TEST_SUITE("wire") {

TEST_CASE("conformance tensors decode to the recorded bit patterns") {
  const auto tensors = wire::read_tensor_blocks(support::data_path("wire/tensors.bin"));
  const auto expected = read_expected(support::data_path("wire/tensors.txt"));
  REQUIRE(tensors.size() == expected.size());
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    CHECK(tensors[i].height() == expected[i].h);
    CHECK(tensors[i].width() == expected[i].w);
    CHECK(tensors[i].channels() == expected[i].c);
    REQUIRE(tensors[i].size() == expected[i].bits.size());
    for (std::size_t j = 0; j < tensors[i].size(); ++j) CHECK(bits_of(tensors[i][j]) == expected[i].bits[j]);
  }
}

TEST_CASE("conformance tensors re-encode byte for byte") {
  const auto original = read_bytes(support::data_path("wire/tensors.bin"));
  const auto tensors = wire::read_tensor_blocks(support::data_path("wire/tensors.bin"));
  const auto path = std::filesystem::temp_directory_path() / "ddfm_wire_reencode.bin";
  wire::write_tensor_blocks(path.string(), tensors);
  CHECK(read_bytes(path.string()) == original);
  std::filesystem::remove(path);
}

TEST_CASE("conformance frames") {
  const auto hello = read_bytes(support::data_path("wire/hello.bin"));
  CHECK(wire::decode_hello(hello) == 1u);
  CHECK(wire::encode_hello() == hello);

  const auto hs_bytes = read_bytes(support::data_path("wire/handshake.bin"));
  const auto hs = wire::decode_handshake(hs_bytes);
  CHECK(hs.kind == wire::OutputKind::kEpsilon);
  CHECK(hs.height == 4u);
  CHECK(hs.width == 6u);
  CHECK(hs.channels == 3u);
  REQUIRE(hs.betas.size() == 5u);
  CHECK(hs.betas.front() == 1e-4);
  CHECK(hs.betas.back() == 0.02);
  CHECK(wire::encode_handshake(hs) == hs_bytes);

  const auto req_bytes = read_bytes(support::data_path("wire/request.bin"));
  const auto req = wire::decode_request(req_bytes);
  CHECK(req.timestep == 3u);
  const auto tensors = wire::read_tensor_blocks(support::data_path("wire/tensors.bin"));
  CHECK(req.tensor == tensors[1]);
  CHECK(wire::encode_request(req) == req_bytes);

  const auto err_bytes = read_bytes(support::data_path("wire/error.bin"));
  CHECK(wire::is_error(err_bytes));
  CHECK_FALSE(wire::is_error(req_bytes));
  const auto err = wire::decode_error(err_bytes);
  CHECK(err.code == wire::ErrorCode::kCapability);
  CHECK(err.message == "size 64x64 not supported");
  CHECK(wire::encode_error(err) == err_bytes);
}

TEST_CASE("tensor round trip on random shapes") {
  std::mt19937_64 rng(201);
  std::uniform_int_distribution<int> dim(1, 9);
  const int channels[] = {1, 2, 3, 6};
  for (int trial = 0; trial < 200; ++trial) {
    const ImageTensor t = float_round(
        support::random_tensor(rng, dim(rng), dim(rng), channels[trial % 4], -1e3, 1e3));
    const wire::Bytes b = wire::encode_response(t);
    CHECK(wire::decode_response(b) == t);
    CHECK(wire::encode_response(wire::decode_response(b)) == b);
  }
}

TEST_CASE("malformed payloads are rejected") {
  wire::Writer w;
  w.u32(1);
  w.u32(1);
  w.u32(1);
  w.f32(std::numeric_limits<float>::quiet_NaN());
  CHECK_THROWS_AS(wire::decode_response(w.bytes()), ProtocolError);

  wire::Writer inf;
  inf.u32(1);
  inf.u32(1);
  inf.u32(1);
  inf.f32(std::numeric_limits<float>::infinity());
  CHECK_THROWS_AS(wire::decode_response(inf.bytes()), ProtocolError);

  wire::Writer bad_channels;
  bad_channels.u32(1);
  bad_channels.u32(1);
  bad_channels.u32(4);
  for (int i = 0; i < 4; ++i) bad_channels.f32(0.0f);
  CHECK_THROWS_AS(wire::decode_response(bad_channels.bytes()), ProtocolError);

  auto truncated = wire::encode_response(ImageTensor(2, 2, 1, 0.5));
  truncated.pop_back();
  CHECK_THROWS_AS(wire::decode_response(truncated), ProtocolError);

  auto trailing = wire::encode_response(ImageTensor(2, 2, 1, 0.5));
  trailing.push_back(0);
  CHECK_THROWS_AS(wire::decode_response(trailing), ProtocolError);

  wire::Bytes wrong_magic = wire::encode_hello();
  wrong_magic[0] = 'X';
  CHECK_THROWS_AS(wire::decode_hello(wrong_magic), ProtocolError);
}

TEST_CASE("endpoint parsing") {
  const auto e = net::Endpoint::parse("localhost:5555");
  CHECK(e.host == "localhost");
  CHECK(e.port == 5555);
  CHECK_THROWS_AS(net::Endpoint::parse("localhost"), ConfigError);
  CHECK_THROWS_AS(net::Endpoint::parse("host:99999"), ConfigError);
  CHECK_THROWS_AS(net::Endpoint::parse("host:abc"), ConfigError);
}

TEST_CASE("remote score reports size capability errors") {
  support::MockServer server(handshake(wire::OutputKind::kScore, 128, 128, 3, 10),
                             [](const wire::Request& r) { return wire::encode_response(r.tensor); });
  RemoteScore score(server.endpoint(), quick_policy());
  const auto sched = NoiseSchedule::from_betas(score.handshake().betas);
  CHECK_THROWS_AS(score.evaluate(ImageTensor(64, 64, 3), 5, sched), CapabilityError);
  REQUIRE(score.supported_size().has_value());
  CHECK(score.supported_size()->height == 128);
}

TEST_CASE("server-side capability error frames surface as CapabilityError") {
  support::MockServer server(handshake(wire::OutputKind::kScore, 4, 4, 3, 10), [](const wire::Request&) {
    return wire::encode_error({wire::ErrorCode::kCapability, "nope"});
  });
  RemoteScore score(server.endpoint(), quick_policy());
  const auto sched = NoiseSchedule::from_betas(score.handshake().betas);
  CHECK_THROWS_AS(score.evaluate(ImageTensor(4, 4, 3), 1, sched), CapabilityError);
}

TEST_CASE("zero-epsilon server gives predict_x0 = f / sqrt(abar)") {
  support::MockServer server(handshake(wire::OutputKind::kEpsilon, 5, 4, 3, 20), [](const wire::Request& r) {
    return wire::encode_response(ImageTensor(r.tensor.height(), r.tensor.width(), r.tensor.channels()));
  });
  RemoteScore score(server.endpoint(), quick_policy());
  const auto sched = *score.native_schedule();
  std::mt19937_64 rng(202);
  const ImageTensor f = support::random_tensor(rng, 5, 4, 3);
  for (int t : {1, 7, 20}) {
    const ImageTensor x0 = predict_x0(f, score.evaluate(f, t, sched), t, sched);
    for (std::size_t i = 0; i < f.size(); ++i) {
      CHECK(x0[i] == doctest::Approx(f[i] / std::sqrt(sched.alpha_bar(t))).epsilon(1e-14));
    }
  }
}

TEST_CASE("epsilon replies are converted to scores") {
  support::MockServer server(handshake(wire::OutputKind::kEpsilon, 3, 3, 3, 20),
                             [](const wire::Request& r) { return wire::encode_response(r.tensor); });
  RemoteScore score(server.endpoint(), quick_policy());
  const auto sched = *score.native_schedule();
  std::mt19937_64 rng(203);
  const ImageTensor f = float_round(support::random_tensor(rng, 3, 3, 3));
  const ImageTensor s = score.evaluate(f, 12, sched);
  for (std::size_t i = 0; i < f.size(); ++i) {
    CHECK(s[i] == doctest::Approx(-f[i] / std::sqrt(1 - sched.alpha_bar(12))).epsilon(1e-14));
  }
}

TEST_CASE("request timestep is the zero-based model index") {
  std::atomic<int> seen{-1};
  support::MockServer server(handshake(wire::OutputKind::kScore, 2, 2, 3, 30), [&](const wire::Request& r) {
    seen = static_cast<int>(r.timestep);
    return wire::encode_response(r.tensor);
  });
  RemoteScore score(server.endpoint(), quick_policy());
  const auto native = *score.native_schedule();
  score.evaluate(ImageTensor(2, 2, 3), 30, native);
  CHECK(seen == 29);
  const auto strided = native.strided(7);
  score.evaluate(ImageTensor(2, 2, 3), 1, strided);
  CHECK(seen == strided.model_timestep(1));
}

TEST_CASE("single-channel inputs are replicated and averaged back") {
  support::MockServer server(handshake(wire::OutputKind::kScore, 3, 2, 3, 10), [](const wire::Request& r) {
    ImageTensor out = r.tensor;
    for (std::size_t p = 0; p < out.pixels(); ++p) {
      out[p * 3 + 0] += 1.0;
      out[p * 3 + 2] -= 1.0;
    }
    return wire::encode_response(out);
  });
  RemoteScore score(server.endpoint(), quick_policy());
  const auto sched = *score.native_schedule();
  std::mt19937_64 rng(204);
  const ImageTensor f = float_round(support::random_tensor(rng, 3, 2, 1));
  const ImageTensor s = score.evaluate(f, 3, sched);
  CHECK(s.channels() == 1);
  // f +- 1 travel as float32, so the average is exact only to float rounding.
  for (std::size_t i = 0; i < f.size(); ++i) CHECK(std::abs(s[i] - f[i]) <= 1e-7);
}

TEST_CASE("a dropped connection is retried on a fresh session") {
  std::atomic<int> calls{0};
  support::MockServer server(handshake(wire::OutputKind::kScore, 2, 2, 3, 10), [&](const wire::Request& r) {
    if (calls++ == 0) return wire::Bytes{};
    return wire::encode_response(r.tensor);
  });
  RemoteScore score(server.endpoint(), quick_policy());
  const auto sched = *score.native_schedule();
  const ImageTensor f(2, 2, 3, 0.25);
  CHECK(score.evaluate(f, 2, sched) == f);
  CHECK(score.reconnects() == 1);
  CHECK(server.connections() == 2);
}

TEST_CASE("persistent failures raise TransportError with the attempt count") {
  support::MockServer server(handshake(wire::OutputKind::kScore, 2, 2, 3, 10),
                             [](const wire::Request&) { return wire::Bytes{}; });
  RemoteScore score(server.endpoint(), quick_policy());
  const auto sched = *score.native_schedule();
  try {
    score.evaluate(ImageTensor(2, 2, 3), 2, sched);
    FAIL("expected TransportError");
  } catch (const TransportError& e) {
    CHECK(e.attempts() == 3);
  }
}

TEST_CASE("no server raises TransportError") {
  std::uint16_t port = 0;
  {
    net::Listener l;
    port = l.port();
  }
  CHECK_THROWS_AS(RemoteScore({"127.0.0.1", port}, quick_policy()), TransportError);
}

}  // TEST_SUITE

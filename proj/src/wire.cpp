#include "ddfm/wire.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ddfm/error.hpp"

namespace ddfm::wire {

static_assert(std::endian::native == std::endian::little,
              "wire encoding assumes a little-endian host");

void Writer::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void Writer::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void Writer::f64(double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

std::span<const std::uint8_t> Reader::raw(std::size_t n) {
  if (remaining() < n) {
    throw ProtocolError("truncated payload: need " + std::to_string(n) + " bytes, have " +
                        std::to_string(remaining()));
  }
  auto out = bytes_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::uint8_t Reader::u8() { return raw(1)[0]; }

std::uint32_t Reader::u32() {
  auto b = raw(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

float Reader::f32() { return std::bit_cast<float>(u32()); }

double Reader::f64() {
  auto b = raw(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

void Reader::expect_end() const {
  if (remaining() != 0) {
    throw ProtocolError(std::to_string(remaining()) + " trailing bytes in payload");
  }
}

void put_tensor(Writer& w, const ImageTensor& t) {
  w.u32(static_cast<std::uint32_t>(t.height()));
  w.u32(static_cast<std::uint32_t>(t.width()));
  w.u32(static_cast<std::uint32_t>(t.channels()));
  for (double v : t.values()) w.f32(static_cast<float>(v));
}

ImageTensor get_tensor(Reader& r) {
  const std::uint32_t h = r.u32(), w = r.u32(), c = r.u32();
  const std::uint64_t count = static_cast<std::uint64_t>(h) * w * c;
  if (h == 0 || w == 0 || count * 4 > r.remaining()) {
    throw ProtocolError("tensor block header " + std::to_string(h) + "x" + std::to_string(w) +
                        "x" + std::to_string(c) + " inconsistent with payload");
  }
  std::vector<double> data(count);
  for (auto& v : data) {
    v = r.f32();
    if (!std::isfinite(v)) throw ProtocolError("non-finite sample in tensor block");
  }
  try {
    return ImageTensor(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c),
                       std::move(data));
  } catch (const ShapeError& e) {
    throw ProtocolError(std::string("unsupported tensor shape: ") + e.what());
  }
}

Bytes encode_hello(std::uint32_t version) {
  Writer w;
  w.raw(std::string_view(kMagic, 4));
  w.u32(version);
  return w.take();
}

std::uint32_t decode_hello(std::span<const std::uint8_t> payload) {
  Reader r(payload);
  auto magic = r.raw(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw ProtocolError("bad hello magic");
  const std::uint32_t version = r.u32();
  r.expect_end();
  return version;
}

Bytes encode_handshake(const Handshake& h) {
  Writer w;
  w.u8(static_cast<std::uint8_t>(h.kind));
  w.u32(h.height);
  w.u32(h.width);
  w.u32(h.channels);
  w.u32(static_cast<std::uint32_t>(h.betas.size()));
  for (double b : h.betas) w.f64(b);
  return w.take();
}

Handshake decode_handshake(std::span<const std::uint8_t> payload) {
  Reader r(payload);
  Handshake h;
  const std::uint8_t kind = r.u8();
  if (kind > 1) throw ProtocolError("unknown output kind " + std::to_string(kind));
  h.kind = static_cast<OutputKind>(kind);
  h.height = r.u32();
  h.width = r.u32();
  h.channels = r.u32();
  const std::uint32_t steps = r.u32();
  if (static_cast<std::uint64_t>(steps) * 8 != r.remaining()) {
    throw ProtocolError("handshake beta table length mismatch");
  }
  h.betas.resize(steps);
  for (auto& b : h.betas) b = r.f64();
  return h;
}

Bytes encode_request(const Request& req) {
  Writer w;
  w.u32(req.timestep);
  put_tensor(w, req.tensor);
  return w.take();
}

Request decode_request(std::span<const std::uint8_t> payload) {
  Reader r(payload);
  Request req;
  req.timestep = r.u32();
  req.tensor = get_tensor(r);
  r.expect_end();
  return req;
}

Bytes encode_response(const ImageTensor& t) {
  Writer w;
  put_tensor(w, t);
  return w.take();
}

ImageTensor decode_response(std::span<const std::uint8_t> payload) {
  Reader r(payload);
  ImageTensor t = get_tensor(r);
  r.expect_end();
  return t;
}

Bytes encode_error(const ErrorFrame& e) {
  Writer w;
  w.raw(std::string_view(kErrorMagic, 4));
  w.u32(static_cast<std::uint32_t>(e.code));
  w.raw(e.message);
  return w.take();
}

bool is_error(std::span<const std::uint8_t> payload) {
  return payload.size() >= 8 && std::memcmp(payload.data(), kErrorMagic, 4) == 0;
}

ErrorFrame decode_error(std::span<const std::uint8_t> payload) {
  Reader r(payload);
  r.raw(4);
  ErrorFrame e;
  e.code = static_cast<ErrorCode>(r.u32());
  auto rest = r.raw(r.remaining());
  e.message.assign(rest.begin(), rest.end());
  return e;
}

void write_tensor_blocks(const std::string& path, const std::vector<ImageTensor>& tensors) {
  Writer w;
  for (const auto& t : tensors) put_tensor(w, t);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(w.bytes().data()),
            static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw IoError("failed writing '" + path + "'");
}

std::vector<ImageTensor> read_tensor_blocks(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r(bytes);
  std::vector<ImageTensor> out;
  while (r.remaining() > 0) out.push_back(get_tensor(r));
  return out;
}

}  // namespace ddfm::wire

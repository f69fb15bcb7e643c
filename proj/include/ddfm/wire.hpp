#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ddfm/tensor.hpp"

// Binary score protocol shared with the checkpoint bridge.
//
// Every message travels as a frame: u32 payload length, then the payload.
// All integers are little-endian; reals are IEEE-754 little-endian.
//
//   hello      "DDFM" u32 version
//   handshake  u8 kind (0 score, 1 epsilon), u32 height, u32 width,
//              u32 channels, u32 T, T x f64 beta
//   request    u32 timestep, tensor block
//   response   tensor block (same shape as the request)
//   error      "ERR!" u32 code, UTF-8 message (rest of payload)
//
// Tensor block: u32 height, u32 width, u32 channels, then H*W*C f32 samples,
// row-major with channels interleaved. The request timestep is the zero-based
// index into the advertised beta table.
namespace ddfm::wire {

inline constexpr std::uint32_t kVersion = 1;
inline constexpr char kMagic[4] = {'D', 'D', 'F', 'M'};
inline constexpr char kErrorMagic[4] = {'E', 'R', 'R', '!'};
inline constexpr std::uint32_t kMaxFrame = 1u << 30;

enum class OutputKind : std::uint8_t { kScore = 0, kEpsilon = 1 };

enum class ErrorCode : std::uint32_t { kProtocol = 1, kCapability = 2, kInternal = 3 };

struct Handshake {
  OutputKind kind = OutputKind::kEpsilon;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t channels = 3;
  std::vector<double> betas;

  friend bool operator==(const Handshake&, const Handshake&) = default;
};

struct Request {
  std::uint32_t timestep = 0;
  ImageTensor tensor;
};

struct ErrorFrame {
  ErrorCode code = ErrorCode::kProtocol;
  std::string message;
};

using Bytes = std::vector<std::uint8_t>;

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v);
  void f32(float v);
  void f64(double v);
  void raw(std::span<const std::uint8_t> bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }
  void raw(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  const Bytes& bytes() const { return buf_; }
  Bytes take() { return std::move(buf_); }

 private:
  Bytes buf_;
};

// Throws ProtocolError when the payload is shorter than requested.
class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  std::uint8_t u8();
  std::uint32_t u32();
  float f32();
  double f64();
  std::span<const std::uint8_t> raw(std::size_t n);
  std::size_t remaining() const { return bytes_.size() - pos_; }
  void expect_end() const;

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void put_tensor(Writer& w, const ImageTensor& t);
// Rejects non-finite samples and unsupported shapes with ProtocolError.
ImageTensor get_tensor(Reader& r);

Bytes encode_hello(std::uint32_t version = kVersion);
std::uint32_t decode_hello(std::span<const std::uint8_t> payload);

Bytes encode_handshake(const Handshake& h);
Handshake decode_handshake(std::span<const std::uint8_t> payload);

Bytes encode_request(const Request& req);
Request decode_request(std::span<const std::uint8_t> payload);

Bytes encode_response(const ImageTensor& t);
ImageTensor decode_response(std::span<const std::uint8_t> payload);

Bytes encode_error(const ErrorFrame& e);
bool is_error(std::span<const std::uint8_t> payload);
ErrorFrame decode_error(std::span<const std::uint8_t> payload);

// Conformance-vector files: tensor blocks concatenated back to back, no framing.
void write_tensor_blocks(const std::string& path, const std::vector<ImageTensor>& tensors);
std::vector<ImageTensor> read_tensor_blocks(const std::string& path);

}  // namespace ddfm::wire

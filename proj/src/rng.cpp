#include "ddfm/rng.hpp"

#include <cmath>
#include <numbers>

namespace ddfm {

double NormalStream::uniform() {
  // 53 random bits mapped to (0, 1] so log() below is finite.
  const std::uint64_t bits = engine_() >> 11;
  return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
}

double NormalStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

ImageTensor NormalStream::normal_tensor(int height, int width, int channels) {
  ImageTensor t(height, width, channels);
  for (double& v : t.data()) v = normal();
  return t;
}

}  // namespace ddfm

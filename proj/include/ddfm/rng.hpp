#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "ddfm/tensor.hpp"

namespace ddfm {

// Standard-normal stream: mt19937_64 seeded from one u64, 53-bit uniforms,
// Box-Muller pairs (cosine branch first). std::normal_distribution is avoided
// because its algorithm is implementation-defined.
//
// Draw order during a chain: the initial f_T tensor in storage order, then
// one z tensor per reverse step whose sigma_tilde is nonzero.
class NormalStream {
 public:
  static constexpr std::string_view kName = "mt19937_64+box-muller/v1";

  explicit NormalStream(std::uint64_t seed) : engine_(seed) {}

  double uniform();  // in (0, 1]
  double normal();
  ImageTensor normal_tensor(int height, int width, int channels);

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace ddfm

#pragma once

#include <cstdint>

#include "ddfm/tensor.hpp"

namespace ddfm {

struct SyntheticPair {
  ImageTensor ir;   // 1 channel, [0,255]
  ImageTensor vis;  // 3 channels, [0,255]
};

// Procedural infrared/visible scene: a shared smooth background, warm
// targets that are bright in infrared and dim in visible, and fine
// visible-only texture and edges. Deterministic in `seed`.
SyntheticPair make_synthetic_pair(std::uint64_t seed, int height, int width);

}  // namespace ddfm

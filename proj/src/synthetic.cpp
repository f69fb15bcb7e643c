#include "ddfm/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ddfm/rng.hpp"

namespace ddfm {

SyntheticPair make_synthetic_pair(std::uint64_t seed, int height, int width) {
  NormalStream rng(seed);
  const double h = height, w = width;

  const double fx = 1.0 + 2.0 * rng.uniform(), fy = 1.0 + 2.0 * rng.uniform();
  const double phase = 2.0 * std::numbers::pi * rng.uniform();

  struct Blob { double r, c, radius, heat; };
  Blob blobs[3];
  for (Blob& b : blobs) {
    b = {h * (0.15 + 0.7 * rng.uniform()), w * (0.15 + 0.7 * rng.uniform()),
         std::min(h, w) * (0.06 + 0.08 * rng.uniform()), 0.6 + 0.4 * rng.uniform()};
  }
  const double edge_col = w * (0.3 + 0.4 * rng.uniform());
  const double stripe = 3.0 + 3.0 * rng.uniform();
  const double tint[3] = {0.9 + 0.2 * rng.uniform(), 0.9 + 0.2 * rng.uniform(),
                          0.9 + 0.2 * rng.uniform()};

  SyntheticPair p{ImageTensor(height, width, 1), ImageTensor(height, width, 3)};
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const double background =
          0.5 + 0.25 * std::sin(2.0 * std::numbers::pi * fx * c / w + phase) *
                    std::cos(2.0 * std::numbers::pi * fy * r / h);
      double heat = 0.0;
      for (const Blob& b : blobs) {
        const double d2 = ((r - b.r) * (r - b.r) + (c - b.c) * (c - b.c)) / (b.radius * b.radius);
        heat = std::max(heat, b.heat * std::exp(-0.5 * d2 * d2));
      }
      const double texture = 0.12 * std::sin(2.0 * std::numbers::pi * (r + c) / stripe);
      const double edge = c < edge_col ? -0.15 : 0.15;
      const double noise = 0.02 * rng.normal();

      const double ir = std::clamp(0.35 * background + 0.65 * heat + 0.5 * noise, 0.0, 1.0);
      const double vis = std::clamp(background + texture + edge - 0.3 * heat + noise, 0.0, 1.0);
      p.ir.at(r, c, 0) = 255.0 * ir;
      for (int ch = 0; ch < 3; ++ch) {
        p.vis.at(r, c, ch) = std::clamp(255.0 * vis * tint[ch], 0.0, 255.0);
      }
    }
  }
  return p;
}

}  // namespace ddfm

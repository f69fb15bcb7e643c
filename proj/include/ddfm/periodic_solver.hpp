#pragma once

#include "ddfm/tensor.hpp"

namespace ddfm {

// Solves (I + weight * grad^T grad) k = rhs per channel under periodic
// boundary. grad^T grad is diagonalized by the 2-D DFT with eigenvalues
// (2 - 2 cos(2 pi p / W)) + (2 - 2 cos(2 pi q / H)). FFTW plans are cached
// per thread and per (height, width).
ImageTensor solve_identity_plus_laplacian(const ImageTensor& rhs, double weight = 1.0);

}  // namespace ddfm

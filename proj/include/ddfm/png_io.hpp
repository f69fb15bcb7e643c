#pragma once

#include <string>

#include "ddfm/tensor.hpp"

namespace ddfm {

// Reads an 8-bit PNG as a 1-channel (grayscale source) or 3-channel
// (color source) tensor with samples in [0,255]. Alpha is dropped.
ImageTensor read_png(const std::string& path);

// Writes 1- or 3-channel samples in [0,255] as an 8-bit PNG. Samples are
// rounded to nearest and clamped.
void write_png(const std::string& path, const ImageTensor& img);

// 8-bit quantization used on write: round-to-nearest then clamp to [0,255].
ImageTensor quantize8(const ImageTensor& img);

}  // namespace ddfm

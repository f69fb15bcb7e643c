#include "ddfm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ddfm/error.hpp"

namespace ddfm {

namespace {

void check_dims(int height, int width, int channels) {
  if (height <= 0 || width <= 0) {
    throw ShapeError("image dimensions must be positive, got " +
                     std::to_string(height) + "x" + std::to_string(width));
  }
  if (channels != 1 && channels != 2 && channels != 3 && channels != 6) {
    throw ShapeError("unsupported channel count " + std::to_string(channels));
  }
}

void require_same(const ImageTensor& a, const ImageTensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch (" +
                     std::to_string(a.height()) + "x" + std::to_string(a.width()) +
                     "x" + std::to_string(a.channels()) + " vs " +
                     std::to_string(b.height()) + "x" + std::to_string(b.width()) +
                     "x" + std::to_string(b.channels()) + ")");
  }
}

}  // namespace

ImageTensor::ImageTensor(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels) {
  check_dims(height, width, channels);
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

ImageTensor::ImageTensor(int height, int width, int channels, std::vector<double> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  check_dims(height, width, channels);
  if (data_.size() != static_cast<std::size_t>(height) * width * channels) {
    throw ShapeError("data length " + std::to_string(data_.size()) +
                     " does not match " + std::to_string(height) + "x" +
                     std::to_string(width) + "x" + std::to_string(channels));
  }
}

bool ImageTensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

ImageTensor ImageTensor::channel(int ch) const {
  if (ch < 0 || ch >= channels_) throw ShapeError("channel index out of range");
  ImageTensor plane(height_, width_, 1);
  for (std::size_t p = 0; p < pixels(); ++p) plane.data_[p] = data_[p * channels_ + ch];
  return plane;
}

void ImageTensor::set_channel(int ch, const ImageTensor& plane) {
  if (ch < 0 || ch >= channels_) throw ShapeError("channel index out of range");
  if (plane.channels_ != 1 || plane.height_ != height_ || plane.width_ != width_) {
    throw ShapeError("set_channel: plane shape mismatch");
  }
  for (std::size_t p = 0; p < pixels(); ++p) data_[p * channels_ + ch] = plane.data_[p];
}

ImageTensor& ImageTensor::operator+=(const ImageTensor& rhs) {
  require_same(*this, rhs, "add");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += rhs.data_[i];
  return *this;
}

ImageTensor& ImageTensor::operator-=(const ImageTensor& rhs) {
  require_same(*this, rhs, "subtract");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= rhs.data_[i];
  return *this;
}

ImageTensor& ImageTensor::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

ImageTensor operator+(ImageTensor lhs, const ImageTensor& rhs) { return lhs += rhs; }
ImageTensor operator-(ImageTensor lhs, const ImageTensor& rhs) { return lhs -= rhs; }
ImageTensor operator*(double s, ImageTensor t) { return t *= s; }

double inner(const ImageTensor& a, const ImageTensor& b) {
  require_same(a, b, "inner");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm(const ImageTensor& a) { return std::sqrt(inner(a, a)); }

GradientField& GradientField::operator*=(double s) {
  horizontal *= s;
  vertical *= s;
  return *this;
}

double inner(const GradientField& a, const GradientField& b) {
  return inner(a.horizontal, b.horizontal) + inner(a.vertical, b.vertical);
}

double squared_norm(const GradientField& g) { return inner(g, g); }

ImageTensor normalize(const ImageTensor& img) {
  ImageTensor out = img;
  for (double& v : out.data()) {
    if (!(v >= 0.0 && v <= 255.0)) {
      throw InputRangeError("normalize: sample " + std::to_string(v) +
                            " outside [0,255]");
    }
    v = v / 127.5 - 1.0;
  }
  return out;
}

ImageTensor denormalize(const ImageTensor& img) {
  ImageTensor out = img;
  for (double& v : out.data()) v = (v + 1.0) * 127.5;
  return out;
}

ImageTensor broadcast_ir(const ImageTensor& ir, int channels) {
  if (ir.channels() != 1) {
    throw ShapeError("broadcast_ir: expected 1-channel input, got " +
                     std::to_string(ir.channels()));
  }
  ImageTensor out(ir.height(), ir.width(), channels);
  for (std::size_t p = 0; p < ir.pixels(); ++p) {
    for (int c = 0; c < channels; ++c) out[p * channels + c] = ir[p];
  }
  return out;
}

GradientField grad(const ImageTensor& img) {
  const int h = img.height(), w = img.width(), nc = img.channels();
  GradientField g(h, w, nc);
  for (int r = 0; r < h; ++r) {
    const int rn = (r + 1) % h;
    for (int c = 0; c < w; ++c) {
      const int cn = (c + 1) % w;
      for (int ch = 0; ch < nc; ++ch) {
        const double v = img.at(r, c, ch);
        g.horizontal.at(r, c, ch) = img.at(r, cn, ch) - v;
        g.vertical.at(r, c, ch) = img.at(rn, c, ch) - v;
      }
    }
  }
  return g;
}

ImageTensor div(const GradientField& field) {
  const int h = field.height(), w = field.width(), nc = field.channels();
  if (!field.vertical.same_shape(field.horizontal)) {
    throw ShapeError("div: component shapes differ");
  }
  ImageTensor out(h, w, nc);
  for (int r = 0; r < h; ++r) {
    const int rp = (r + h - 1) % h;
    for (int c = 0; c < w; ++c) {
      const int cp = (c + w - 1) % w;
      for (int ch = 0; ch < nc; ++ch) {
        out.at(r, c, ch) = field.horizontal.at(r, c, ch) - field.horizontal.at(r, cp, ch) +
                           field.vertical.at(r, c, ch) - field.vertical.at(rp, c, ch);
      }
    }
  }
  return out;
}

ImageTensor clamp(ImageTensor img, double lo, double hi) {
  for (double& v : img.data()) v = std::clamp(v, lo, hi);
  return img;
}

ImageTensor luma(const ImageTensor& img) {
  if (img.channels() == 1) return img;
  if (img.channels() != 3) {
    throw ShapeError("luma: expected 1 or 3 channels, got " + std::to_string(img.channels()));
  }
  ImageTensor out(img.height(), img.width(), 1);
  for (std::size_t p = 0; p < img.pixels(); ++p) {
    out[p] = 0.299 * img[3 * p] + 0.587 * img[3 * p + 1] + 0.114 * img[3 * p + 2];
  }
  return out;
}

}  // namespace ddfm

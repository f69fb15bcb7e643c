#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace ddfm {

// Dense H x W x C image, row-major with channels interleaved:
// index = (row * width + col) * channels + channel.
class ImageTensor {
 public:
  ImageTensor() = default;
  ImageTensor(int height, int width, int channels, double fill = 0.0);
  ImageTensor(int height, int width, int channels, std::vector<double> data);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }
  std::size_t pixels() const { return static_cast<std::size_t>(height_) * width_; }
  bool empty() const { return data_.empty(); }

  double& at(int row, int col, int ch) { return data_[index(row, col, ch)]; }
  double at(int row, int col, int ch) const { return data_[index(row, col, ch)]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  bool same_shape(const ImageTensor& other) const {
    return height_ == other.height_ && width_ == other.width_ &&
           channels_ == other.channels_;
  }
  bool all_finite() const;

  // Extract / replace one channel as a 1-channel plane.
  ImageTensor channel(int ch) const;
  void set_channel(int ch, const ImageTensor& plane);

  ImageTensor& operator+=(const ImageTensor& rhs);
  ImageTensor& operator-=(const ImageTensor& rhs);
  ImageTensor& operator*=(double s);

  friend bool operator==(const ImageTensor&, const ImageTensor&) = default;

 private:
  std::size_t index(int row, int col, int ch) const {
    return (static_cast<std::size_t>(row) * width_ + col) * channels_ + ch;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

ImageTensor operator+(ImageTensor lhs, const ImageTensor& rhs);
ImageTensor operator-(ImageTensor lhs, const ImageTensor& rhs);
ImageTensor operator*(double s, ImageTensor t);

double inner(const ImageTensor& a, const ImageTensor& b);
double norm(const ImageTensor& a);

// Forward differences of a tensor under periodic boundary, per channel.
struct GradientField {
  ImageTensor horizontal;  // x(r, c+1) - x(r, c)
  ImageTensor vertical;    // x(r+1, c) - x(r, c)

  GradientField() = default;
  GradientField(int height, int width, int channels)
      : horizontal(height, width, channels), vertical(height, width, channels) {}

  int height() const { return horizontal.height(); }
  int width() const { return horizontal.width(); }
  int channels() const { return horizontal.channels(); }
  bool matches(const ImageTensor& t) const {
    return horizontal.same_shape(t) && vertical.same_shape(t);
  }
  GradientField& operator*=(double s);
  friend bool operator==(const GradientField&, const GradientField&) = default;
};

double inner(const GradientField& a, const GradientField& b);
double squared_norm(const GradientField& g);

// [0,255] -> [-1,1] via s / 127.5 - 1. Throws InputRangeError outside [0,255].
ImageTensor normalize(const ImageTensor& img);
// [-1,1] -> [0,255]; inverse of normalize.
ImageTensor denormalize(const ImageTensor& img);

// Replicate a single-channel plane into `channels` identical planes.
ImageTensor broadcast_ir(const ImageTensor& ir, int channels);

GradientField grad(const ImageTensor& img);
// Negative adjoint of grad: <grad x, u> = -<x, div u>.
ImageTensor div(const GradientField& field);

// Clamp every sample into [lo, hi].
ImageTensor clamp(ImageTensor img, double lo, double hi);

// ITU-R BT.601 luma for 3-channel input; identity copy for 1 channel.
ImageTensor luma(const ImageTensor& img);

}  // namespace ddfm

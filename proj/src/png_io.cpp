#include "ddfm/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "ddfm/error.hpp"

namespace ddfm {

ImageTensor read_png(const std::string& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw IoError("cannot read PNG '" + path + "': " + image.message);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int channels = color ? 3 : 1;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw IoError("cannot decode PNG '" + path + "': " + msg);
  }
  std::vector<double> data(buffer.begin(), buffer.end());
  return ImageTensor(static_cast<int>(image.height), static_cast<int>(image.width),
                     channels, std::move(data));
}

ImageTensor quantize8(const ImageTensor& img) {
  ImageTensor out = img;
  for (double& v : out.data()) v = std::clamp(std::nearbyint(v), 0.0, 255.0);
  return out;
}

void write_png(const std::string& path, const ImageTensor& img) {
  if (img.channels() != 1 && img.channels() != 3) {
    throw ShapeError("write_png: only 1 or 3 channels are supported");
  }
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> buffer(img.size());
  const ImageTensor q = quantize8(img);
  std::transform(q.values().begin(), q.values().end(), buffer.begin(),
                 [](double v) { return static_cast<std::uint8_t>(v); });
  if (!png_image_write_to_file(&image, path.c_str(), 0, buffer.data(), 0, nullptr)) {
    throw IoError("cannot write PNG '" + path + "': " + image.message);
  }
}

}  // namespace ddfm

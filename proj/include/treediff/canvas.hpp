#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace treediff {

class CanvasError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kCanvasSize = 128;

/// Row-major image with interleaved channels, values in [0, 1].
struct Canvas {
  int width = kCanvasSize;
  int height = kCanvasSize;
  int channels = 1;
  std::vector<float> pixels;

  static Canvas filled(int channels, float value, int width = kCanvasSize, int height = kCanvasSize) {
    Canvas c;
    c.width = width;
    c.height = height;
    c.channels = channels;
    c.pixels.assign(static_cast<std::size_t>(width) * height * channels, value);
    return c;
  }

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  float& at(int x, int y, int c = 0) { return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  float at(int x, int y, int c = 0) const { return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
  bool same_shape(const Canvas& o) const { return width == o.width && height == o.height && channels == o.channels; }

  friend bool operator==(const Canvas& a, const Canvas& b) { return a.same_shape(b) && a.pixels == b.pixels; }
};

}  // namespace treediff

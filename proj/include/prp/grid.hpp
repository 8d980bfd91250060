#pragma once

#include <cstdint>
#include <vector>

#include "prp/errors.hpp"

namespace prp {

/// Row-major 2D array indexed as (x, y).
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height), data_(checked_size(width, height), fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& values() { return data_; }
  const std::vector<T>& values() const { return data_; }

  bool operator==(const Grid&) const = default;

 private:
  static std::size_t checked_size(int w, int h) {
    if (w < 0 || h < 0) throw ShapeError("negative grid dimensions");
    return static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  }
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

struct Rgb8 {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  bool operator==(const Rgb8&) const = default;
};

using RgbImage = Grid<Rgb8>;
using GrayImage = Grid<double>;

/// Detector probability map; values live in [0, 1].
using Heatmap = Grid<float>;

inline GrayImage to_gray(const RgbImage& img) {
  GrayImage out(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const Rgb8 c = img.data()[i];
    out.data()[i] = 0.299 * c.r + 0.587 * c.g + 0.114 * c.b;
  }
  return out;
}

}  // namespace prp

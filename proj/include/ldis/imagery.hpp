#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ldis/error.hpp"

namespace ldis {

// Row-major raster with interleaved channels. Coordinates refer to pixel
// centers with (0,0) at the top-left.
template <typename T, int Channels>
class Grid {
 public:
  static_assert(Channels >= 1);
  using value_type = T;
  static constexpr int channels = Channels;

  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height) {
    if (width < 0 || height < 0) {
      throw Error(ErrorCode::invalid_argument, "negative grid dimensions");
    }
    data_.assign(static_cast<std::size_t>(width) * height * Channels, fill);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * height_;
  }
  bool empty() const noexcept { return data_.empty(); }

  T& at(int x, int y, int c = 0) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * Channels + c];
  }
  const T& at(int x, int y, int c = 0) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * Channels + c];
  }
  // Flat pixel index access; `i` counts pixels, not values.
  T& at(std::size_t i, int c = 0) { return data_[i * Channels + c]; }
  const T& at(std::size_t i, int c = 0) const { return data_[i * Channels + c]; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  std::vector<T>& raw() noexcept { return data_; }
  const std::vector<T>& raw() const noexcept { return data_; }

  template <typename U, int C>
  bool same_shape(const Grid<U, C>& other) const noexcept {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Grid& a, const Grid& b) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using Image = Grid<double, 3>;
using FlowField = Grid<double, 2>;
using AlphaField = Grid<double, 1>;
using Mask = Grid<std::uint8_t, 1>;

template <int C>
using SplatField = Grid<double, C>;

template <typename T, int CA, typename U, int CB>
void require_same_shape(const Grid<T, CA>& a, const Grid<U, CB>& b,
                        const char* what) {
  if (!a.same_shape(b)) {
    throw Error(ErrorCode::dimension_mismatch,
                std::string(what) + ": dimension mismatch (" +
                    std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                    " vs " + std::to_string(b.width()) + "x" +
                    std::to_string(b.height()) + ")");
  }
}

bool all_finite(std::span<const double> values) noexcept;

// PNG (8-bit RGB, RGBA or gray) or binary PPM (P6, maxval 255). Intensities
// are mapped by v/255.
Image load_image(const std::filesystem::path& path);
// Writes an 8-bit RGB PNG, or a P6 PPM when the extension is ".ppm".
// Values are clamped to [0,1] and quantized as round(v*255).
void save_image(const Image& img, const std::filesystem::path& path);

// 8-bit grayscale PNG; 0 <-> 0 and 1 <-> 255. Loading maps v > 127 to 1.
Mask load_mask(const std::filesystem::path& path);
void save_mask(const Mask& mask, const std::filesystem::path& path);

// Middlebury .flo: float32 magic 202021.25, int32 width, int32 height, then
// interleaved (u,v) float32 rows, little-endian.
FlowField load_flow(const std::filesystem::path& path);
void save_flow(const FlowField& flow, const std::filesystem::path& path);

// Single-channel field written as 8-bit gray with values clamped to [0,1].
void save_field_png(const AlphaField& field, const std::filesystem::path& path);

}  // namespace ldis

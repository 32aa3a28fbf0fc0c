#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace fakeidet {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

inline constexpr Rgb kBlack{0, 0, 0};

// Interleaved 8-bit RGB, row-major.
class RgbImage {
 public:
  RgbImage() = default;
  RgbImage(int width, int height, Rgb fill = {});

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return width_ == 0 || height_ == 0; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }

  Rgb at(int x, int y) const noexcept {
    const auto* p = &data_[offset(x, y)];
    return {p[0], p[1], p[2]};
  }
  void set(int x, int y, Rgb c) noexcept {
    auto* p = &data_[offset(x, y)];
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
  }

  std::span<const std::uint8_t> bytes() const noexcept { return data_; }
  std::span<std::uint8_t> bytes() noexcept { return data_; }

  // Copy of the w×h region with origin (x, y); the region must lie inside.
  RgbImage crop(int x, int y, int w, int h) const;

  friend bool operator==(const RgbImage&, const RgbImage&) = default;

 private:
  std::size_t offset(int x, int y) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) * 3;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

// PNG (lossless) is the only output format. Input accepts PNG and JPEG,
// detected by signature, since source photographs usually arrive as JPEG.
RgbImage read_image(const std::filesystem::path& path);
void write_png(const RgbImage& img, const std::filesystem::path& path);

// Keys of tEXt/zTXt/iTXt chunks found in a PNG; empty for clean files.
std::vector<std::string> png_text_keys(const std::filesystem::path& path);

}  // namespace fakeidet

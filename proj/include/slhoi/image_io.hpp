#pragma once

#include <array>
#include <filesystem>
#include <vector>

namespace slhoi {

// Interleaved RGB image; values in [0, 1] until normalize() is applied.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<double> pixels;  // h * w * 3, RGB interleaved

  Image() = default;
  Image(int h, int w) : height(h), width(w), pixels(static_cast<std::size_t>(h) * w * 3, 0.0) {}

  double& at(int y, int x, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  double at(int y, int x, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
};

// Binary PPM (P6), 8-bit. Values are clamped to [0, 1] on write.
Image read_ppm(const std::filesystem::path& file);
void write_ppm(const std::filesystem::path& file, const Image& img);

// Per-channel (x - mean) / std, in place.
void normalize(Image& img, const std::array<double, 3>& mean, const std::array<double, 3>& std);

}  // namespace slhoi

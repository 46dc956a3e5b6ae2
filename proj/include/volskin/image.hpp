#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace volskin {

// Interleaved float images. Color images live in [0, 1]; normal maps reuse
// Image3F with components in [-1, 1].
struct Image3F {
  int width = 0, height = 0;
  std::vector<float> pix;  // h * w * 3

  Image3F() = default;
  Image3F(int w, int h) : width(w), height(h), pix(static_cast<size_t>(w) * h * 3, 0.f) {}
  float* at(int x, int y) { return pix.data() + (static_cast<size_t>(y) * width + x) * 3; }
  const float* at(int x, int y) const {
    return pix.data() + (static_cast<size_t>(y) * width + x) * 3;
  }
};

struct Image1F {
  int width = 0, height = 0;
  std::vector<float> pix;

  Image1F() = default;
  Image1F(int w, int h) : width(w), height(h), pix(static_cast<size_t>(w) * h, 0.f) {}
  float& at(int x, int y) { return pix[static_cast<size_t>(y) * width + x]; }
  float at(int x, int y) const { return pix[static_cast<size_t>(y) * width + x]; }
};

struct ImageMask {
  int width = 0, height = 0;
  std::vector<uint8_t> pix;  // 0 or 1

  ImageMask() = default;
  ImageMask(int w, int h) : width(w), height(h), pix(static_cast<size_t>(w) * h, 0) {}
  uint8_t& at(int x, int y) { return pix[static_cast<size_t>(y) * width + x]; }
  uint8_t at(int x, int y) const { return pix[static_cast<size_t>(y) * width + x]; }
  int count() const;
};

// 8-bit RGB PNG; values clamped to [0, 1] and rounded on write.
void write_png(const std::filesystem::path& path, const Image3F& img);
Image3F read_png(const std::filesystem::path& path);

// 8-bit grayscale PNG, 0/255.
void write_png_mask(const std::filesystem::path& path, const ImageMask& mask);
ImageMask read_png_mask(const std::filesystem::path& path);

// Portable float map, little-endian, rows bottom to top ("Pf"/"PF").
void write_pfm(const std::filesystem::path& path, const Image1F& img);
void write_pfm(const std::filesystem::path& path, const Image3F& img);
Image1F read_pfm_1(const std::filesystem::path& path);
Image3F read_pfm_3(const std::filesystem::path& path);

}  // namespace volskin

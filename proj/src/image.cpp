#include "volskin/image.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace volskin {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

[[noreturn]] void fail(const std::string& what, const std::filesystem::path& path) {
  throw std::runtime_error(what + ": " + path.string());
}

uint8_t to_byte(float v) {
  return static_cast<uint8_t>(std::lround(std::clamp(v, 0.f, 1.f) * 255.f));
}

void write_png_impl(const std::filesystem::path& path, int width, int height, int channels,
                    const std::vector<uint8_t>& bytes) {
  FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) fail("write_png: cannot open", path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail("write_png: libpng failure", path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, width, height, 8,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y)
    png_write_row(png, const_cast<png_bytep>(bytes.data() + static_cast<size_t>(y) * width * channels));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

std::vector<uint8_t> read_png_impl(const std::filesystem::path& path, int& width, int& height,
                                   int expect_channels) {
  FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) fail("read_png: cannot open", path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail("read_png: libpng failure", path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);
  // Normalize to 8-bit RGB or gray.
  png_set_strip_16(png);
  png_set_packing(png);
  if (png_get_color_type(png, info) == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (expect_channels == 3 && png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY)
    png_set_gray_to_rgb(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  const int channels = png_get_channels(png, info);
  if (channels != expect_channels) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail("read_png: unexpected channel count in", path);
  }
  std::vector<uint8_t> bytes(static_cast<size_t>(width) * height * channels);
  for (int y = 0; y < height; ++y)
    png_read_row(png, bytes.data() + static_cast<size_t>(y) * width * channels, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return bytes;
}

}  // namespace

int ImageMask::count() const {
  int n = 0;
  for (uint8_t v : pix) n += v ? 1 : 0;
  return n;
}

void write_png(const std::filesystem::path& path, const Image3F& img) {
  std::vector<uint8_t> bytes(img.pix.size());
  for (size_t i = 0; i < img.pix.size(); ++i) bytes[i] = to_byte(img.pix[i]);
  write_png_impl(path, img.width, img.height, 3, bytes);
}

Image3F read_png(const std::filesystem::path& path) {
  int w, h;
  std::vector<uint8_t> bytes = read_png_impl(path, w, h, 3);
  Image3F img(w, h);
  for (size_t i = 0; i < img.pix.size(); ++i) img.pix[i] = bytes[i] / 255.f;
  return img;
}

void write_png_mask(const std::filesystem::path& path, const ImageMask& mask) {
  std::vector<uint8_t> bytes(mask.pix.size());
  for (size_t i = 0; i < mask.pix.size(); ++i) bytes[i] = mask.pix[i] ? 255 : 0;
  write_png_impl(path, mask.width, mask.height, 1, bytes);
}

ImageMask read_png_mask(const std::filesystem::path& path) {
  int w, h;
  std::vector<uint8_t> bytes = read_png_impl(path, w, h, 1);
  ImageMask mask(w, h);
  for (size_t i = 0; i < mask.pix.size(); ++i) mask.pix[i] = bytes[i] >= 128 ? 1 : 0;
  return mask;
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "PFM writer assumes a little-endian host");

void write_pfm_impl(const std::filesystem::path& path, int width, int height, int channels,
                    const float* pix) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("write_pfm: cannot open", path);
  out << (channels == 3 ? "PF" : "Pf") << "\n" << width << " " << height << "\n-1.0\n";
  for (int y = height - 1; y >= 0; --y)
    out.write(reinterpret_cast<const char*>(pix + static_cast<size_t>(y) * width * channels),
              static_cast<std::streamsize>(sizeof(float)) * width * channels);
  if (!out) fail("write_pfm: short write", path);
}

std::vector<float> read_pfm_impl(const std::filesystem::path& path, int& width, int& height,
                                 int expect_channels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("read_pfm: cannot open", path);
  std::string magic;
  double scale;
  in >> magic >> width >> height >> scale;
  in.get();  // single whitespace after the header
  const int channels = magic == "PF" ? 3 : (magic == "Pf" ? 1 : 0);
  if (channels != expect_channels || width <= 0 || height <= 0)
    fail("read_pfm: bad header in", path);
  if (scale >= 0) fail("read_pfm: big-endian data unsupported in", path);
  std::vector<float> pix(static_cast<size_t>(width) * height * channels);
  for (int y = height - 1; y >= 0; --y)
    in.read(reinterpret_cast<char*>(pix.data() + static_cast<size_t>(y) * width * channels),
            static_cast<std::streamsize>(sizeof(float)) * width * channels);
  if (!in) fail("read_pfm: truncated data in", path);
  return pix;
}

}  // namespace

void write_pfm(const std::filesystem::path& path, const Image1F& img) {
  write_pfm_impl(path, img.width, img.height, 1, img.pix.data());
}

void write_pfm(const std::filesystem::path& path, const Image3F& img) {
  write_pfm_impl(path, img.width, img.height, 3, img.pix.data());
}

Image1F read_pfm_1(const std::filesystem::path& path) {
  Image1F img;
  img.pix = read_pfm_impl(path, img.width, img.height, 1);
  return img;
}

Image3F read_pfm_3(const std::filesystem::path& path) {
  Image3F img;
  img.pix = read_pfm_impl(path, img.width, img.height, 3);
  return img;
}

}  // namespace volskin

#include "qlens/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>

#include "qlens/error.hpp"

namespace qlens {
namespace {

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};

}  // namespace

std::vector<std::uint8_t> to_rgb8(const Frame& frame, const Rgb& background) {
  std::vector<std::uint8_t> out;
  out.reserve(frame.pixels.size() * 3);
  for (const auto& p : frame.pixels) {
    const double rest = 1.0 - p.a;
    out.push_back(quantize(p.r + rest * background.r));
    out.push_back(quantize(p.g + rest * background.g));
    out.push_back(quantize(p.b + rest * background.b));
  }
  return out;
}

std::vector<std::uint8_t> to_rgba8(const Frame& frame) {
  std::vector<std::uint8_t> out;
  out.reserve(frame.pixels.size() * 4);
  for (const auto& p : frame.pixels) {
    const double inv = p.a > 0.0 ? 1.0 / p.a : 0.0;
    out.push_back(quantize(p.r * inv));
    out.push_back(quantize(p.g * inv));
    out.push_back(quantize(p.b * inv));
    out.push_back(quantize(p.a));
  }
  return out;
}

void write_ppm(const std::filesystem::path& path, const Frame& frame, const Rgb& background) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write image '" + path.string() + "'");
  out << "P6\n" << frame.width << " " << frame.height << "\n255\n";
  const auto rgb = to_rgb8(frame, background);
  out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
  if (!out) throw Error(ErrorKind::io, "short write to '" + path.string() + "'");
}

void write_png(const std::filesystem::path& path, const Frame& frame, const Rgb& background) {
  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.string().c_str(), "wb"));
  if (!file) throw Error(ErrorKind::io, "cannot write image '" + path.string() + "'");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorKind::io, "libpng initialisation failed");
  }
  const auto rgb = to_rgb8(frame, background);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorKind::io, "libpng failed writing '" + path.string() + "'");
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(frame.width), static_cast<png_uint_32>(frame.height),
               8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(frame.width) * 3;
  for (int y = 0; y < frame.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(rgb.data() + static_cast<std::size_t>(y) * stride));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void write_image(const std::filesystem::path& path, const Frame& frame, const Rgb& background) {
  const auto ext = path.extension().string();
  if (ext == ".png") {
    write_png(path, frame, background);
  } else if (ext == ".ppm") {
    write_ppm(path, frame, background);
  } else {
    throw Error(ErrorKind::unsupported_format,
                "unsupported image extension '" + ext + "' (expected .ppm or .png)");
  }
}

}  // namespace qlens

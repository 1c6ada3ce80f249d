#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "qlens/render.hpp"

namespace qlens {

/// Composites every pixel over `background` and quantizes to 8 bits.
std::vector<std::uint8_t> to_rgb8(const Frame& frame, const Rgb& background);
/// Straight (non-premultiplied) RGBA8 for streaming to viewers.
std::vector<std::uint8_t> to_rgba8(const Frame& frame);

void write_ppm(const std::filesystem::path& path, const Frame& frame, const Rgb& background);
void write_png(const std::filesystem::path& path, const Frame& frame, const Rgb& background);

/// Picks PPM or PNG from the extension (".ppm" / ".png").
void write_image(const std::filesystem::path& path, const Frame& frame, const Rgb& background);

}  // namespace qlens

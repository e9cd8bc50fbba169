#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "xcos/data.hpp"

namespace xcos {

// 8-bit RGB PNG, via libpng.
ImageRecord read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const ImageRecord& img);

// Trivial raw format: u32 LE width, u32 LE height, then H*W*3 RGB bytes.
ImageRecord read_raw(const std::filesystem::path& path);
void write_raw(const std::filesystem::path& path, const ImageRecord& img);

// Dispatches on extension: .png or .rgb.
ImageRecord read_image(const std::filesystem::path& path);

// Binary 8-bit grayscale PGM (P5, maxval 255).
void write_pgm(const std::filesystem::path& path, int height, int width,
               const std::vector<uint8_t>& gray);

}  // namespace xcos

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "brickplan/camera.hpp"

namespace brickplan {

// PNG (8-bit RGB) and PGM (16-bit grayscale) encoders. Both are byte
// deterministic for identical inputs, which the dataset generator relies on.
std::vector<std::uint8_t> encode_png_rgb8(const ImageRgb& image);
void write_png_rgb8(const std::string& path, const ImageRgb& image);

std::vector<std::uint8_t> encode_pgm16(int width, int height,
                                       const std::vector<std::uint16_t>& rows_top_down);
void write_pgm16(const std::string& path, int width, int height,
                 const std::vector<std::uint16_t>& rows_top_down);

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes);

}  // namespace brickplan

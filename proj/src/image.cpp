#include "brickplan/image.hpp"

#include <cstring>
#include <fstream>

#include <zlib.h>

#include "brickplan/error.hpp"

namespace brickplan {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void put_chunk(std::vector<std::uint8_t>& out, const char type[4],
               const std::vector<std::uint8_t>& data) {
    put_u32(out, static_cast<std::uint32_t>(data.size()));
    const std::size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    const uLong crc = crc32(0L, out.data() + crc_start, static_cast<uInt>(out.size() - crc_start));
    put_u32(out, static_cast<std::uint32_t>(crc));
}

std::vector<std::uint8_t> deflate_bytes(const std::vector<std::uint8_t>& raw) {
    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> out(bound);
    if (compress2(out.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw Error("runtime", "zlib compression failed");
    out.resize(bound);
    return out;
}

}  // namespace

std::vector<std::uint8_t> encode_png_rgb8(const ImageRgb& image) {
    if (image.width <= 0 || image.height <= 0 ||
        image.pixels.size() != static_cast<std::size_t>(image.width) * image.height)
        throw ValidationError("image buffer does not match its dimensions");

    std::vector<std::uint8_t> raw;
    raw.reserve(static_cast<std::size_t>(image.height) * (1 + 3 * image.width));
    for (int y = 0; y < image.height; ++y) {
        raw.push_back(0);  // filter type: none
        for (int x = 0; x < image.width; ++x) {
            const Rgb& p = image.pixels[image.index(x, y)];
            raw.push_back(p.r);
            raw.push_back(p.g);
            raw.push_back(p.b);
        }
    }

    std::vector<std::uint8_t> png{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    std::vector<std::uint8_t> ihdr;
    put_u32(ihdr, static_cast<std::uint32_t>(image.width));
    put_u32(ihdr, static_cast<std::uint32_t>(image.height));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(2);  // color type: truecolor
    ihdr.push_back(0);  // compression
    ihdr.push_back(0);  // filter
    ihdr.push_back(0);  // interlace
    put_chunk(png, "IHDR", ihdr);
    put_chunk(png, "IDAT", deflate_bytes(raw));
    put_chunk(png, "IEND", {});
    return png;
}

std::vector<std::uint8_t> encode_pgm16(int width, int height,
                                       const std::vector<std::uint16_t>& rows_top_down) {
    if (width <= 0 || height <= 0 ||
        rows_top_down.size() != static_cast<std::size_t>(width) * height)
        throw ValidationError("mask buffer does not match its dimensions");
    std::string header = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n65535\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + rows_top_down.size() * 2);
    for (std::uint16_t v : rows_top_down) {  // big-endian per the format
        out.push_back(static_cast<std::uint8_t>(v >> 8));
        out.push_back(static_cast<std::uint8_t>(v & 0xff));
    }
    return out;
}

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("runtime", "cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("runtime", "write failed: " + path);
}

void write_png_rgb8(const std::string& path, const ImageRgb& image) {
    write_bytes(path, encode_png_rgb8(image));
}

void write_pgm16(const std::string& path, int width, int height,
                 const std::vector<std::uint16_t>& rows_top_down) {
    write_bytes(path, encode_pgm16(width, height, rows_top_down));
}

}  // namespace brickplan

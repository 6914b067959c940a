#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace spectex {

/// 8-bit RGB image, interleaved, rows top to bottom.
struct RgbImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels; // width * height * 3

    std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c) {
        return pixels[(y * width + x) * 3 + c];
    }
    std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const {
        return pixels[(y * width + x) * 3 + c];
    }

    friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

/// Reads a PNG of any colour type and bit depth, converted to 8-bit RGB
/// (gray is replicated, alpha dropped, 16-bit reduced).
RgbImage read_png(const std::filesystem::path& path);

/// Encodes an 8-bit RGB PNG. Output bytes depend only on the pixels.
std::vector<std::byte> encode_png(const RgbImage& image);

/// Writes `image` atomically.
void write_png(const std::filesystem::path& path, const RgbImage& image);

} // namespace spectex

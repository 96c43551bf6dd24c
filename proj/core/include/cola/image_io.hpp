#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cola {

/// 8-bit interleaved raster as read from / written to disk.
struct RawImage {
    int width = 0;
    int height = 0;
    int channels = 0;  // 1 (gray) or 3 (rgb)
    std::vector<std::uint8_t> pixels;  // row-major, interleaved
};

// PNG support covers 8-bit gray/RGB/RGBA (alpha dropped on read),
// non-interlaced. PPM/PGM are binary P6/P5 with maxval 255.
RawImage read_image(const std::string& path);
void write_png(const std::string& path, const RawImage& img);
void write_ppm(const std::string& path, const RawImage& img);

bool has_supported_image_extension(const std::string& filename);

}  // namespace cola

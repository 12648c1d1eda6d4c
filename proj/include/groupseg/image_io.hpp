#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace groupseg {

// Binary portable pixmap (P6) with maxval 255; pixels are row-major RGB
// scalars in [0, 1].
struct RgbImage {
    std::int64_t width = 0;
    std::int64_t height = 0;
    std::vector<double> pixels;  // height*width*3
};

// Binary portable graymap (P5) with maxval 255; used for class-index masks
// where 255 means "ignore".
struct GrayImage {
    std::int64_t width = 0;
    std::int64_t height = 0;
    std::vector<std::uint8_t> pixels;  // height*width
};

void write_ppm(const std::string& path, const RgbImage& img);
RgbImage read_ppm(const std::string& path);
void write_pgm(const std::string& path, const GrayImage& img);
GrayImage read_pgm(const std::string& path);

}  // namespace groupseg

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "docback/color.hpp"

namespace docback::raster {

/// Row-major RGBA image, channels as doubles in [0,1].
struct RasterImage {
    int width = 0;
    int height = 0;
    std::vector<double> px;  // width * height * 4

    RasterImage() = default;
    RasterImage(int w, int h, double r = 0.0, double g = 0.0, double b = 0.0, double a = 1.0);

    double* at(int x, int y) { return px.data() + 4 * (static_cast<std::size_t>(y) * width + x); }
    const double* at(int x, int y) const {
        return px.data() + 4 * (static_cast<std::size_t>(y) * width + x);
    }

    color::Srgb rgb_at(int x, int y) const {
        const double* p = at(x, y);
        return {p[0], p[1], p[2]};
    }

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
};

/// Quantize to 8-bit RGBA, row-major. Used for PNG output and content hashing.
std::vector<std::uint8_t> to_rgba8(const RasterImage& img);

/// 8-bit RGBA PNG io. Reads promote any PNG color type to RGBA.
RasterImage read_png(const std::string& path);
void write_png(const RasterImage& img, const std::string& path);

/// Grayscale visualization helper (one value in [0,1] per pixel).
void write_gray_png(const std::vector<double>& values, int width, int height,
                    const std::string& path);

}  // namespace docback::raster

#include "docback/raster.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include <png.h>

#include "docback/errors.hpp"

namespace docback::raster {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::uint8_t quantize(double c) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0));
}

}  // namespace

RasterImage::RasterImage(int w, int h, double r, double g, double b, double a)
    : width(w), height(h), px(static_cast<std::size_t>(w) * h * 4) {
    for (std::size_t i = 0; i < pixel_count(); ++i) {
        px[4 * i + 0] = r;
        px[4 * i + 1] = g;
        px[4 * i + 2] = b;
        px[4 * i + 3] = a;
    }
}

std::vector<std::uint8_t> to_rgba8(const RasterImage& img) {
    std::vector<std::uint8_t> bytes(img.px.size());
    for (std::size_t i = 0; i < img.px.size(); ++i) bytes[i] = quantize(img.px[i]);
    return bytes;
}

RasterImage read_png(const std::string& path) {
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) throw Error("png: cannot open '" + path + "'");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw Error("png: read struct allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw Error("png: info struct allocation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("png: failed to decode '" + path + "'");
    }

    png_init_io(png, file.get());
    png_read_info(png, info);

    const png_uint_32 width = png_get_image_width(png, info);
    const png_uint_32 height = png_get_image_height(png, info);
    const int color_type = png_get_color_type(png, info);
    const int bit_depth = png_get_bit_depth(png, info);

    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color_type == PNG_COLOR_TYPE_RGB || color_type == PNG_COLOR_TYPE_GRAY ||
        color_type == PNG_COLOR_TYPE_PALETTE) {
        png_set_filler(png, 0xFF, PNG_FILLER_AFTER);
    }
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
        png_set_gray_to_rgb(png);
    }
    png_read_update_info(png, info);

    std::vector<std::uint8_t> data(static_cast<std::size_t>(width) * height * 4);
    std::vector<png_bytep> rows(height);
    for (png_uint_32 y = 0; y < height; ++y) rows[y] = data.data() + static_cast<std::size_t>(y) * width * 4;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    RasterImage img;
    img.width = static_cast<int>(width);
    img.height = static_cast<int>(height);
    img.px.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) img.px[i] = data[i] / 255.0;
    return img;
}

void write_png(const RasterImage& img, const std::string& path) {
    if (img.width <= 0 || img.height <= 0) throw Error("png: refusing to write empty image");
    FilePtr file(std::fopen(path.c_str(), "wb"));
    if (!file) throw Error("png: cannot write '" + path + "'");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw Error("png: write struct allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw Error("png: info struct allocation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error("png: failed to encode '" + path + "'");
    }

    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGBA,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_sRGB(png, info, PNG_sRGB_INTENT_PERCEPTUAL);
    png_write_info(png, info);

    const auto bytes = to_rgba8(img);
    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y) {
        rows[y] = const_cast<png_bytep>(bytes.data()) + static_cast<std::size_t>(y) * img.width * 4;
    }
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

void write_gray_png(const std::vector<double>& values, int width, int height,
                    const std::string& path) {
    if (static_cast<std::size_t>(width) * height != values.size()) {
        throw Error("png: gray buffer size does not match dimensions");
    }
    RasterImage img(width, height);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double v = std::clamp(values[i], 0.0, 1.0);
        img.px[4 * i + 0] = v;
        img.px[4 * i + 1] = v;
        img.px[4 * i + 2] = v;
        img.px[4 * i + 3] = 1.0;
    }
    write_png(img, path);
}

}  // namespace docback::raster

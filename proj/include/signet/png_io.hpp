#pragma once

#include <csetjmp>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <png.h>

#include "signet/common.hpp"

namespace signet {

struct Rgb8Image {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<unsigned char> pixels;  // row-major RGB triples
};

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace detail

/// Decodes an 8-bit RGB PNG. Anything else (palette, gray, 16-bit, RGBA,
/// truncated data) is rejected with a descriptive exception.
inline Rgb8Image read_png_rgb8(const std::filesystem::path& path) {
    detail::FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    require(fp != nullptr, "png: cannot open " + path.string());

    png_byte header[8];
    require(std::fread(header, 1, 8, fp.get()) == 8 && png_sig_cmp(header, 0, 8) == 0,
            "png: " + path.string() + " is not a PNG file");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    require(png != nullptr, "png: reader allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("png: info allocation failed");
    }
    Rgb8Image img;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("png: failed to decode " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    png_uint_32 w = png_get_image_width(png, info);
    png_uint_32 h = png_get_image_height(png, info);
    int bit_depth = png_get_bit_depth(png, info);
    int color_type = png_get_color_type(png, info);
    if (bit_depth != 8 || color_type != PNG_COLOR_TYPE_RGB) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("png: " + path.string() + " is not 8-bit RGB");
    }

    img.width = w;
    img.height = h;
    img.pixels.resize(static_cast<std::size_t>(w) * h * 3);
    std::vector<png_bytep> rows(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = img.pixels.data() + static_cast<std::size_t>(y) * w * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

inline void write_png_rgb8(const std::filesystem::path& path, const Rgb8Image& img) {
    require(img.pixels.size() == img.width * img.height * 3, "png: pixel buffer does not match extent");
    detail::FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    require(fp != nullptr, "png: cannot write " + path.string());

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    require(png != nullptr, "png: writer allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("png: info allocation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("png: failed to encode " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(img.height);
    for (std::size_t y = 0; y < img.height; ++y)
        rows[y] = const_cast<png_bytep>(img.pixels.data() + y * img.width * 3);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

/// Bilinear resample to the target extent.
inline Rgb8Image resize_bilinear(const Rgb8Image& src, std::size_t w, std::size_t h) {
    Rgb8Image out;
    out.width = w;
    out.height = h;
    out.pixels.resize(w * h * 3);
    if (src.width == w && src.height == h) {
        out.pixels = src.pixels;
        return out;
    }
    double sx = static_cast<double>(src.width) / static_cast<double>(w);
    double sy = static_cast<double>(src.height) / static_cast<double>(h);
    for (std::size_t y = 0; y < h; ++y) {
        double fy = (static_cast<double>(y) + 0.5) * sy - 0.5;
        double y0 = std::floor(fy);
        double wy = fy - y0;
        std::size_t ya = static_cast<std::size_t>(std::clamp(y0, 0.0, static_cast<double>(src.height - 1)));
        std::size_t yb = static_cast<std::size_t>(
            std::clamp(y0 + 1.0, 0.0, static_cast<double>(src.height - 1)));
        for (std::size_t x = 0; x < w; ++x) {
            double fx = (static_cast<double>(x) + 0.5) * sx - 0.5;
            double x0 = std::floor(fx);
            double wx = fx - x0;
            std::size_t xa = static_cast<std::size_t>(
                std::clamp(x0, 0.0, static_cast<double>(src.width - 1)));
            std::size_t xb = static_cast<std::size_t>(
                std::clamp(x0 + 1.0, 0.0, static_cast<double>(src.width - 1)));
            for (int c = 0; c < 3; ++c) {
                double v00 = src.pixels[(ya * src.width + xa) * 3 + c];
                double v01 = src.pixels[(ya * src.width + xb) * 3 + c];
                double v10 = src.pixels[(yb * src.width + xa) * 3 + c];
                double v11 = src.pixels[(yb * src.width + xb) * 3 + c];
                double top = v00 + (v01 - v00) * wx;
                double bot = v10 + (v11 - v10) * wx;
                double v = top + (bot - top) * wy;
                out.pixels[(y * w + x) * 3 + c] = static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 255.0)));
            }
        }
    }
    return out;
}

}  // namespace signet

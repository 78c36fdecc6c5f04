// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <png.h>

#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "scgan/image.hpp"

namespace scgan {

// 8- and 16-bit PNG, grayscale or RGB. Intensities map to [0,1] on load
// (divide by the depth's max value) and round to nearest on save. Palette
// and alpha variants are normalized to plain gray/RGB while reading.

namespace detail {
struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;
}  // namespace detail

struct LoadedPng {
    Image image;
    int bit_depth = 8;  // 8 or 16 as stored in the file
};

inline LoadedPng load_png(const std::filesystem::path& path) {
    detail::FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) throw RuntimeFailure("png: cannot open " + path.string());

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw RuntimeFailure("png: read struct allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw RuntimeFailure("png: info struct allocation failed");
    }
    std::vector<png_byte> raw;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw RuntimeFailure("png: failed to decode " + path.string());
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    const png_uint_32 width = png_get_image_width(png, info);
    const png_uint_32 height = png_get_image_height(png, info);
    int bit_depth = png_get_bit_depth(png, info);
    const int color_type = png_get_color_type(png, info);

    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
    if (bit_depth == 16) png_set_swap(png);  // stored big-endian
    png_read_update_info(png, info);

    bit_depth = png_get_bit_depth(png, info);
    const int channels = png_get_channels(png, info);
    if (channels != 1 && channels != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw RuntimeFailure("png: unsupported channel count " + std::to_string(channels) +
                             " in " + path.string());
    }

    const std::size_t rowbytes = png_get_rowbytes(png, info);
    raw.resize(rowbytes * height);
    rows.resize(height);
    for (png_uint_32 y = 0; y < height; ++y) rows[y] = raw.data() + y * rowbytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    LoadedPng out;
    out.bit_depth = bit_depth;
    out.image = Image(static_cast<int>(height), static_cast<int>(width), channels);
    const double denom = bit_depth == 16 ? 65535.0 : 255.0;
    for (png_uint_32 y = 0; y < height; ++y)
        for (png_uint_32 x = 0; x < width; ++x)
            for (int c = 0; c < channels; ++c) {
                double v;
                if (bit_depth == 16) {
                    const auto* p = reinterpret_cast<const png_uint_16*>(rows[y]);
                    v = p[x * channels + c];
                } else {
                    v = rows[y][x * channels + c];
                }
                out.image.at(c, static_cast<int>(y), static_cast<int>(x)) = v / denom;
            }
    return out;
}

inline void save_png(const Image& img, const std::filesystem::path& path, int bit_depth = 8) {
    if (bit_depth != 8 && bit_depth != 16)
        throw ConfigError("png: bit depth must be 8 or 16");
    if (!img.all_finite()) throw RuntimeFailure("png: refusing to save non-finite image");

    detail::FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) throw RuntimeFailure("png: cannot write " + path.string());

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw RuntimeFailure("png: write struct allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw RuntimeFailure("png: info struct allocation failed");
    }
    std::vector<png_byte> raw;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw RuntimeFailure("png: failed to encode " + path.string());
    }
    png_init_io(png, fp.get());
    const int color = img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
    png_set_IHDR(png, info, img.width, img.height, bit_depth, color,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    if (bit_depth == 16) png_set_swap(png);

    const double maxv = bit_depth == 16 ? 65535.0 : 255.0;
    const std::size_t rowbytes = static_cast<std::size_t>(img.width) * img.channels *
                                 (bit_depth == 16 ? 2 : 1);
    raw.resize(rowbytes * img.height);
    rows.resize(img.height);
    for (int y = 0; y < img.height; ++y) {
        rows[y] = raw.data() + static_cast<std::size_t>(y) * rowbytes;
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c) {
                double v = img.at(c, y, x);
                v = std::min(std::max(v, 0.0), 1.0);
                const auto q = static_cast<unsigned>(std::lround(v * maxv));
                if (bit_depth == 16)
                    reinterpret_cast<png_uint_16*>(rows[y])[x * img.channels + c] =
                        static_cast<png_uint_16>(q);
                else
                    rows[y][x * img.channels + c] = static_cast<png_byte>(q);
            }
    }
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace scgan

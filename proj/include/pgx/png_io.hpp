#pragma once

#include <cstdio>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include <png.h>

#include "pgx/errors.hpp"
#include "pgx/image.hpp"

namespace pgx {

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const { if (f) std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct PngGrid {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<unsigned char> bytes; // 8-bit, interleaved
};

inline PngGrid read_png_bytes(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open PNG for reading: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("png_create_info_struct failed");
    }
    std::vector<png_bytep> rows;
    PngGrid grid;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("libpng failed while reading " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    // Normalize every input to 8-bit samples.
    png_set_strip_16(png);
    png_set_packing(png);
    if (png_get_color_type(png, info) == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY &&
        png_get_bit_depth(png, info) < 8)
        png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    grid.width = int(png_get_image_width(png, info));
    grid.height = int(png_get_image_height(png, info));
    grid.channels = int(png_get_channels(png, info));
    const std::size_t stride = png_get_rowbytes(png, info);
    grid.bytes.resize(stride * grid.height);
    rows.resize(grid.height);
    for (int y = 0; y < grid.height; ++y) rows[y] = grid.bytes.data() + stride * y;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return grid;
}

inline void write_png_bytes(const std::string& path, const unsigned char* bytes, int width,
                            int height, int channels) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot open PNG for writing: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng failed while writing " + path);
    }
    png_init_io(png, fp.get());
    const int color = channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
    png_set_IHDR(png, info, width, height, 8, color, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(height);
    const std::size_t stride = std::size_t(width) * channels;
    for (int y = 0; y < height; ++y) rows[y] = const_cast<png_bytep>(bytes + stride * y);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

} // namespace detail

/// Reads any PNG as an 8-bit RGB image (gray is replicated to three channels).
inline Image read_png_rgb8(const std::string& path) {
    const auto grid = detail::read_png_bytes(path);
    Image img(grid.width, grid.height, Domain::U8, Colorspace::RGB);
    const std::size_t n = img.pixel_count();
    if (grid.channels == 3) {
        for (std::size_t i = 0; i < n * 3; ++i) img.data[i] = float(grid.bytes[i]);
    } else if (grid.channels == 1) {
        for (std::size_t i = 0; i < n; ++i)
            img.data[i * 3] = img.data[i * 3 + 1] = img.data[i * 3 + 2] = float(grid.bytes[i]);
    } else {
        throw IoError("unsupported channel count in " + path);
    }
    return img;
}

inline void write_png_rgb8(const std::string& path, const Image& img) {
    img.require(Domain::U8, Colorspace::RGB);
    std::vector<unsigned char> bytes(img.value_count());
    for (std::size_t i = 0; i < bytes.size(); ++i)
        bytes[i] = static_cast<unsigned char>(img.data[i]);
    detail::write_png_bytes(path, bytes.data(), img.width, img.height, 3);
}

/// Single-channel 8-bit PNG as raw bytes (depth maps, segment labels).
struct GrayPng {
    int width = 0;
    int height = 0;
    std::vector<unsigned char> values;
};

inline GrayPng read_png_gray8(const std::string& path) {
    const auto grid = detail::read_png_bytes(path);
    GrayPng out;
    out.width = grid.width;
    out.height = grid.height;
    out.values.resize(std::size_t(grid.width) * grid.height);
    const std::size_t n = out.values.size();
    if (grid.channels == 1) {
        out.values.assign(grid.bytes.begin(), grid.bytes.end());
    } else {
        for (std::size_t i = 0; i < n; ++i) out.values[i] = grid.bytes[i * grid.channels];
    }
    return out;
}

inline void write_png_gray8(const std::string& path, const std::vector<unsigned char>& values,
                            int width, int height) {
    if (values.size() != std::size_t(width) * height)
        throw ContractError("write_png_gray8: size mismatch");
    detail::write_png_bytes(path, values.data(), width, height, 1);
}

// In-memory PNG encode/decode (wire payloads).

namespace detail {

struct MemReader {
    const unsigned char* data;
    std::size_t size;
    std::size_t pos;
};

inline void mem_read_cb(png_structp png, png_bytep out, png_size_t n) {
    auto* r = static_cast<MemReader*>(png_get_io_ptr(png));
    if (r->pos + n > r->size) png_error(png, "read past end of buffer");
    std::memcpy(out, r->data + r->pos, n);
    r->pos += n;
}

inline void mem_write_cb(png_structp png, png_bytep data, png_size_t n) {
    auto* v = static_cast<std::vector<unsigned char>*>(png_get_io_ptr(png));
    v->insert(v->end(), data, data + n);
}

inline void mem_flush_cb(png_structp) {}

} // namespace detail

inline std::vector<unsigned char> encode_png_rgb8(const Image& img) {
    img.require(Domain::U8, Colorspace::RGB);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("png_create_info_struct failed");
    }
    std::vector<unsigned char> out;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng failed while encoding to memory");
    }
    png_set_write_fn(png, &out, detail::mem_write_cb, detail::mem_flush_cb);
    png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<unsigned char> row(std::size_t(img.width) * 3);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width * 3; ++x)
            row[std::size_t(x)] = static_cast<unsigned char>(img.data[std::size_t(y) * img.width * 3 + x]);
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

inline Image decode_png_rgb8(const unsigned char* bytes, std::size_t size) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("png_create_info_struct failed");
    }
    detail::MemReader reader{bytes, size, 0};
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("libpng failed while decoding from memory");
    }
    png_set_read_fn(png, &reader, detail::mem_read_cb);
    png_read_info(png, info);
    png_set_strip_16(png);
    png_set_packing(png);
    if (png_get_color_type(png, info) == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY &&
        png_get_bit_depth(png, info) < 8)
        png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY ||
        png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    png_read_update_info(png, info);
    const int w = int(png_get_image_width(png, info));
    const int h = int(png_get_image_height(png, info));
    const std::size_t stride = png_get_rowbytes(png, info);
    std::vector<unsigned char> raw(stride * h);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y) rows[std::size_t(y)] = raw.data() + stride * y;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Image img(w, h, Domain::U8, Colorspace::RGB);
    for (std::size_t i = 0; i < img.value_count(); ++i) img.data[i] = float(raw[i]);
    return img;
}

} // namespace pgx

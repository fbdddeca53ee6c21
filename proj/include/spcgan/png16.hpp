#pragma once

#include <cstdio>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include <png.h>
#include <zlib.h>

#include "spcgan/common.hpp"

namespace spcgan {

// 16-bit grayscale PNG read/write. All rasters in this project go through
// these two functions so files stay lossless and byte-stable.

inline void write_png16(const std::string& path, int height, int width,
                        const std::vector<uint16_t>& data) {
    if (data.size() != size_t(height) * size_t(width))
        throw ValidationError("write_png16: buffer size mismatch");
    std::FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw IoError("write_png16: cannot open " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw IoError("write_png16: libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw IoError("write_png16: libpng error writing " + path);
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, png_uint_32(width), png_uint_32(height), 16, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_set_swap(png);  // in-memory little endian -> PNG network order
    std::vector<png_bytep> rows(static_cast<size_t>(height));
    for (int r = 0; r < height; ++r)
        rows[size_t(r)] = reinterpret_cast<png_bytep>(
            const_cast<uint16_t*>(&data[size_t(r) * size_t(width)]));
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

inline void read_png16(const std::string& path, int& height, int& width,
                       std::vector<uint16_t>& data) {
    std::FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw IoError("read_png16: cannot open " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw IoError("read_png16: libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw IoError("read_png16: libpng error reading " + path);
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    if (png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY ||
        png_get_bit_depth(png, info) != 16) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw IoError("read_png16: " + path + " is not 16-bit grayscale");
    }
    width = int(png_get_image_width(png, info));
    height = int(png_get_image_height(png, info));
    png_set_swap(png);
    data.assign(size_t(height) * size_t(width), 0);
    std::vector<png_bytep> rows(static_cast<size_t>(height));
    for (int r = 0; r < height; ++r)
        rows[size_t(r)] = reinterpret_cast<png_bytep>(&data[size_t(r) * size_t(width)]);
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
}

inline uint32_t file_crc32(const std::string& path) {
    std::FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw IoError("file_crc32: cannot open " + path);
    uLong crc = crc32(0L, Z_NULL, 0);
    unsigned char buf[65536];
    size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, fp)) > 0) crc = crc32(crc, buf, uInt(n));
    std::fclose(fp);
    return uint32_t(crc);
}

}  // namespace spcgan

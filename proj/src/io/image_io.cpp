#include "ngsplat/io/image_io.hpp"

#include "ngsplat/io/fsio.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <stdexcept>
#include <vector>

namespace ngs {

namespace {

struct MemWriter {
    std::vector<std::uint8_t> bytes;
};

void png_mem_write(png_structp png, png_bytep data, png_size_t size) {
    auto* w = static_cast<MemWriter*>(png_get_io_ptr(png));
    w->bytes.insert(w->bytes.end(), data, data + size);
}

void png_mem_flush(png_structp) {}

struct MemReader {
    const std::uint8_t* data;
    std::size_t size;
    std::size_t pos = 0;
};

void png_mem_read(png_structp png, png_bytep out, png_size_t size) {
    auto* r = static_cast<MemReader*>(png_get_io_ptr(png));
    if (r->pos + size > r->size) png_error(png, "read past end of PNG buffer");
    std::memcpy(out, r->data + r->pos, size);
    r->pos += size;
}

// rows: packed bytes, one vector per row; bit_depth 8 or 16 (16-bit rows
// already big-endian).
void write_png(const std::filesystem::path& path, int width, int height, int color_type,
               int bit_depth, const std::vector<std::vector<std::uint8_t>>& rows) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("png_create_info_struct failed");
    }
    MemWriter writer;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("libpng write error: " + path.string());
    }
    png_set_write_fn(png, &writer, png_mem_write, png_mem_flush);
    png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (const auto& row : rows)
        png_write_row(png, const_cast<png_bytep>(row.data()));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    atomic_write_file(path, writer.bytes);
}

struct DecodedPng {
    int width = 0, height = 0, channels = 0, bit_depth = 0;
    std::vector<std::uint8_t> data;  // packed rows, 16-bit big-endian
};

DecodedPng read_png(const std::filesystem::path& path, int expect_channels, int expect_depth) {
    const auto bytes = read_file_bytes(path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("png_create_info_struct failed");
    }
    MemReader reader{bytes.data(), bytes.size()};
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("libpng read error: " + path.string());
    }
    png_set_read_fn(png, &reader, png_mem_read);
    png_read_info(png, info);

    DecodedPng out;
    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.bit_depth = png_get_bit_depth(png, info);
    out.channels = png_get_channels(png, info);
    if (out.channels != expect_channels || out.bit_depth != expect_depth) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("unexpected PNG layout: " + path.string());
    }
    const std::size_t row_bytes = png_get_rowbytes(png, info);
    out.data.resize(row_bytes * out.height);
    std::vector<png_bytep> rows(out.height);
    for (int y = 0; y < out.height; ++y) rows[y] = out.data.data() + row_bytes * y;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

std::uint8_t quantize8(float v) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(v * 255.0f), 0L, 255L));
}

std::uint16_t quantize16(float v) {
    return static_cast<std::uint16_t>(std::clamp(std::lround(v * 65535.0f), 0L, 65535L));
}

}  // namespace

void save_png_rgb8(const std::filesystem::path& path, const Image<float>& img) {
    if (img.channels != 3) throw std::invalid_argument("save_png_rgb8 expects 3 channels");
    std::vector<std::vector<std::uint8_t>> rows(img.height);
    for (int y = 0; y < img.height; ++y) {
        rows[y].resize(static_cast<std::size_t>(img.width) * 3);
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) rows[y][x * 3 + c] = quantize8(img.at(y, x, c));
    }
    write_png(path, img.width, img.height, PNG_COLOR_TYPE_RGB, 8, rows);
}

Image<float> load_png_rgb8(const std::filesystem::path& path) {
    const DecodedPng png = read_png(path, 3, 8);
    Image<float> img(png.width, png.height, 3);
    for (int y = 0; y < png.height; ++y)
        for (int x = 0; x < png.width; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(y, x, c) =
                    png.data[(static_cast<std::size_t>(y) * png.width + x) * 3 + c] / 255.0f;
    return img;
}

void save_png_gray8(const std::filesystem::path& path, const Image<float>& img) {
    if (img.channels != 1) throw std::invalid_argument("save_png_gray8 expects 1 channel");
    std::vector<std::vector<std::uint8_t>> rows(img.height);
    for (int y = 0; y < img.height; ++y) {
        rows[y].resize(img.width);
        for (int x = 0; x < img.width; ++x) rows[y][x] = quantize8(img.at(y, x, 0));
    }
    write_png(path, img.width, img.height, PNG_COLOR_TYPE_GRAY, 8, rows);
}

Image<float> load_png_gray8(const std::filesystem::path& path) {
    const DecodedPng png = read_png(path, 1, 8);
    Image<float> img(png.width, png.height, 1);
    for (int y = 0; y < png.height; ++y)
        for (int x = 0; x < png.width; ++x)
            img.at(y, x, 0) = png.data[static_cast<std::size_t>(y) * png.width + x] / 255.0f;
    return img;
}

void save_png_normal16(const std::filesystem::path& path, const Image<float>& normals) {
    if (normals.channels != 3) throw std::invalid_argument("save_png_normal16 expects 3 channels");
    std::vector<std::vector<std::uint8_t>> rows(normals.height);
    for (int y = 0; y < normals.height; ++y) {
        rows[y].resize(static_cast<std::size_t>(normals.width) * 6);
        for (int x = 0; x < normals.width; ++x)
            for (int c = 0; c < 3; ++c) {
                const std::uint16_t v = quantize16(normals.at(y, x, c) * 0.5f + 0.5f);
                rows[y][x * 6 + c * 2] = static_cast<std::uint8_t>(v >> 8);  // big-endian
                rows[y][x * 6 + c * 2 + 1] = static_cast<std::uint8_t>(v & 0xff);
            }
    }
    write_png(path, normals.width, normals.height, PNG_COLOR_TYPE_RGB, 16, rows);
}

Image<float> load_png_normal16(const std::filesystem::path& path) {
    const DecodedPng png = read_png(path, 3, 16);
    Image<float> img(png.width, png.height, 3);
    for (int y = 0; y < png.height; ++y)
        for (int x = 0; x < png.width; ++x)
            for (int c = 0; c < 3; ++c) {
                const std::size_t i = (static_cast<std::size_t>(y) * png.width + x) * 6 + c * 2;
                const std::uint16_t v =
                    static_cast<std::uint16_t>((png.data[i] << 8) | png.data[i + 1]);
                img.at(y, x, c) = v / 65535.0f * 2.0f - 1.0f;
            }
    return img;
}

}  // namespace ngs

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <vector>

#include <png.h>

#include "geofuse/io.hpp"

namespace geofuse {

namespace {

struct FileCloser {
    std::FILE* f;
    ~FileCloser() {
        if (f) std::fclose(f);
    }
};

// libpng reports errors through longjmp; wrap each call site in one function
// so the jump target owns all the cleanup.

void write_png(const std::string& path, int width, int height, int color_type, int bit_depth,
               const std::vector<std::vector<png_byte>>& rows) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw DataError("cannot open for writing: " + path);
    FileCloser closer{f};

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw DataError("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw DataError("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DataError("png write failed: " + path);
    }
    png_init_io(png, f);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
                 bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (const auto& row : rows)
        png_write_row(png, const_cast<png_bytep>(row.data()));
    png_write_end(png, info);
    png_destroy_write_struct(&png, &info);
}

void read_png(const std::string& path, int expect_color, int expect_depth, int& width,
              int& height, std::vector<std::vector<png_byte>>& rows) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw DataError("cannot open: " + path);
    FileCloser closer{f};

    png_byte header[8];
    if (std::fread(header, 1, 8, f) != 8 || png_sig_cmp(header, 0, 8))
        throw ParseError(path, 0, "signature", "not a PNG file");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw DataError("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw DataError("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ParseError(path, 8, "image data", "png decode failed");
    }
    png_init_io(png, f);
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    width = static_cast<int>(png_get_image_width(png, info));
    height = static_cast<int>(png_get_image_height(png, info));
    int color = png_get_color_type(png, info);
    int depth = png_get_bit_depth(png, info);
    if (color != expect_color || depth != expect_depth) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ParseError(path, 8, "IHDR",
                         "unexpected color type " + std::to_string(color) + " / bit depth " +
                             std::to_string(depth));
    }
    std::size_t rowbytes = png_get_rowbytes(png, info);
    rows.assign(static_cast<std::size_t>(height), std::vector<png_byte>(rowbytes));
    for (auto& row : rows) png_read_row(png, row.data(), nullptr);
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
}

}  // namespace

void save_png_gray8(const std::string& path, const ImageU8& img) {
    if (img.channels != 1) throw DataError("save_png_gray8: need a 1-channel image");
    std::vector<std::vector<png_byte>> rows(static_cast<std::size_t>(img.height));
    for (int y = 0; y < img.height; ++y) {
        rows[static_cast<std::size_t>(y)].resize(static_cast<std::size_t>(img.width));
        for (int x = 0; x < img.width; ++x)
            rows[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] = img.at(y, x, 0);
    }
    write_png(path, img.width, img.height, PNG_COLOR_TYPE_GRAY, 8, rows);
}

ImageU8 load_png_gray8(const std::string& path) {
    int w, h;
    std::vector<std::vector<png_byte>> rows;
    read_png(path, PNG_COLOR_TYPE_GRAY, 8, w, h, rows);
    ImageU8 img(w, h, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            img.at(y, x, 0) = rows[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)];
    return img;
}

void save_png_rgb8(const std::string& path, const ImageU8& img) {
    if (img.channels != 3) throw DataError("save_png_rgb8: need a 3-channel image");
    std::vector<std::vector<png_byte>> rows(static_cast<std::size_t>(img.height));
    for (int y = 0; y < img.height; ++y) {
        rows[static_cast<std::size_t>(y)].resize(static_cast<std::size_t>(img.width) * 3);
        for (int x = 0; x < img.width; ++x)
            for (int ch = 0; ch < 3; ++ch)
                rows[static_cast<std::size_t>(y)][static_cast<std::size_t>(x) * 3 +
                                                  static_cast<std::size_t>(ch)] =
                    img.at(y, x, ch);
    }
    write_png(path, img.width, img.height, PNG_COLOR_TYPE_RGB, 8, rows);
}

ImageU8 load_png_rgb8(const std::string& path) {
    int w, h;
    std::vector<std::vector<png_byte>> rows;
    read_png(path, PNG_COLOR_TYPE_RGB, 8, w, h, rows);
    ImageU8 img(w, h, 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int ch = 0; ch < 3; ++ch)
                img.at(y, x, ch) = rows[static_cast<std::size_t>(y)][static_cast<std::size_t>(x) * 3 +
                                                                     static_cast<std::size_t>(ch)];
    return img;
}

void save_png_gray16(const std::string& path, const ImageU16& img) {
    if (img.channels != 1) throw DataError("save_png_gray16: need a 1-channel image");
    std::vector<std::vector<png_byte>> rows(static_cast<std::size_t>(img.height));
    for (int y = 0; y < img.height; ++y) {
        rows[static_cast<std::size_t>(y)].resize(static_cast<std::size_t>(img.width) * 2);
        for (int x = 0; x < img.width; ++x) {
            std::uint16_t v = img.at(y, x, 0);
            // PNG stores 16-bit samples most-significant byte first
            rows[static_cast<std::size_t>(y)][static_cast<std::size_t>(x) * 2] =
                static_cast<png_byte>(v >> 8);
            rows[static_cast<std::size_t>(y)][static_cast<std::size_t>(x) * 2 + 1] =
                static_cast<png_byte>(v & 0xFF);
        }
    }
    write_png(path, img.width, img.height, PNG_COLOR_TYPE_GRAY, 16, rows);
}

ImageU16 load_png_gray16(const std::string& path) {
    int w, h;
    std::vector<std::vector<png_byte>> rows;
    read_png(path, PNG_COLOR_TYPE_GRAY, 16, w, h, rows);
    ImageU16 img(w, h, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            png_byte hi = rows[static_cast<std::size_t>(y)][static_cast<std::size_t>(x) * 2];
            png_byte lo = rows[static_cast<std::size_t>(y)][static_cast<std::size_t>(x) * 2 + 1];
            img.at(y, x, 0) = static_cast<std::uint16_t>((hi << 8) | lo);
        }
    return img;
}

ImageU8 quantize_rgb(const ImageF& img) {
    ImageU8 out(img.width, img.height, img.channels);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        float v = std::min(1.0f, std::max(0.0f, img.pixels[i]));
        out.pixels[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
    }
    return out;
}

ImageF dequantize_rgb(const ImageU8& img) {
    ImageF out(img.width, img.height, img.channels);
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        out.pixels[i] = static_cast<float>(img.pixels[i]) / 255.0f;
    return out;
}

ImageU16 depth_to_mm(const ImageD& depth) {
    if (depth.channels != 1) throw DataError("depth_to_mm: need a 1-channel image");
    ImageU16 out(depth.width, depth.height, 1);
    for (std::size_t i = 0; i < depth.pixels.size(); ++i) {
        double d = depth.pixels[i];
        if (!std::isfinite(d) || d <= 0) {
            out.pixels[i] = 0;
        } else {
            long mm = std::lround(d * 1000.0);
            out.pixels[i] = static_cast<std::uint16_t>(std::min(mm, 65535L));
        }
    }
    return out;
}

ImageD depth_from_mm(const ImageU16& mm) {
    if (mm.channels != 1) throw DataError("depth_from_mm: need a 1-channel image");
    ImageD out(mm.width, mm.height, 1);
    for (std::size_t i = 0; i < mm.pixels.size(); ++i)
        out.pixels[i] = static_cast<double>(mm.pixels[i]) / 1000.0;
    return out;
}

}  // namespace geofuse

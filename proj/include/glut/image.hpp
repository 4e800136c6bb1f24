#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

#include "glut/io_error.hpp"
#include "glut/vec3.hpp"

namespace glut {

/// Row-major RGB image with channel values nominally in [0,1].
struct Image {
    int width = 0;
    int height = 0;
    std::vector<Rgb> pixels;
    int bit_depth = 8;  // depth of the file this image came from, reused when writing

    Image() = default;
    Image(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h) {}

    Rgb& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
    const Rgb& at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

class ImageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace png_detail {

struct MemReader {
    const unsigned char* data;
    std::size_t size;
    std::size_t pos;
};

inline void read_fn(png_structp png, png_bytep out, png_size_t n) {
    auto* r = static_cast<MemReader*>(png_get_io_ptr(png));
    if (r->pos + n > r->size) png_error(png, "unexpected end of PNG data");
    std::memcpy(out, r->data + r->pos, n);
    r->pos += n;
}

inline void write_fn(png_structp png, png_bytep in, png_size_t n) {
    auto* v = static_cast<std::vector<unsigned char>*>(png_get_io_ptr(png));
    v->insert(v->end(), in, in + n);
}

inline void flush_fn(png_structp) {}

[[noreturn]] inline void error_fn(png_structp png, png_const_charp msg) {
    auto* buf = static_cast<std::string*>(png_get_error_ptr(png));
    *buf = msg;
    png_longjmp(png, 1);
}

inline void warn_fn(png_structp, png_const_charp) {}

}  // namespace png_detail

inline bool is_png(const unsigned char* data, std::size_t size) {
    return size >= 8 && png_sig_cmp(data, 0, 8) == 0;
}

/// Decodes an 8- or 16-bit PNG. Integer codes map to [0,1] by division by the maximum code;
/// gray is expanded to RGB and alpha is dropped. No color management is applied.
inline Image decode_png(const unsigned char* data, std::size_t size) {
    using namespace png_detail;
    if (!is_png(data, size)) throw ImageError("unsupported format: not a PNG");
    std::string err;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, error_fn, warn_fn);
    if (!png) throw ImageError("png: out of memory");
    png_infop info = png_create_info_struct(png);
    MemReader reader{data, size, 0};
    Image img;
    std::vector<unsigned char> raw;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ImageError("png decode: " + err);
    }
    png_set_read_fn(png, &reader, read_fn);
    png_read_info(png, info);
    const int color_type = png_get_color_type(png, info);
    int depth = png_get_bit_depth(png, info);
    if (color_type == PNG_COLOR_TYPE_PALETTE) {
        png_set_palette_to_rgb(png);
        depth = 8;
    }
    if (depth < 8) {
        png_set_expand_gray_1_2_4_to_8(png);
        depth = 8;
    }
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
    if (depth == 16) png_set_swap(png);  // host little-endian
    png_read_update_info(png, info);
    const auto w = static_cast<int>(png_get_image_width(png, info));
    const auto h = static_cast<int>(png_get_image_height(png, info));
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    raw.resize(rowbytes * static_cast<std::size_t>(h));
    rows.resize(static_cast<std::size_t>(h));
    for (int y = 0; y < h; ++y) rows[static_cast<std::size_t>(y)] = raw.data() + rowbytes * static_cast<std::size_t>(y);
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    img = Image(w, h);
    img.bit_depth = depth;
    const double maxcode = depth == 16 ? 65535.0 : 255.0;
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        for (int k = 0; k < 3; ++k) {
            const double code = depth == 16 ? reinterpret_cast<const std::uint16_t*>(raw.data())[i * 3 + k]
                                            : raw[i * 3 + k];
            img.pixels[i][k] = code / maxcode;
        }
    return img;
}

/// Quantizes a [0,1] value to an integer code, rounding half up.
inline unsigned quantize(double v, unsigned maxcode) {
    const double s = std::floor(std::clamp(v, 0.0, 1.0) * maxcode + 0.5);
    return static_cast<unsigned>(std::min<double>(s, maxcode));
}

inline std::vector<unsigned char> encode_png(const Image& img, int bit_depth = 8) {
    using namespace png_detail;
    if (bit_depth != 8 && bit_depth != 16) throw ImageError("png encode: bit depth must be 8 or 16");
    if (img.width <= 0 || img.height <= 0) throw ImageError("png encode: empty image");
    const std::size_t bpc = bit_depth == 16 ? 2 : 1;
    const std::size_t rowbytes = static_cast<std::size_t>(img.width) * 3 * bpc;
    std::vector<unsigned char> raw(rowbytes * static_cast<std::size_t>(img.height));
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        for (int k = 0; k < 3; ++k) {
            if (bit_depth == 16) {
                const unsigned c = quantize(img.pixels[i][k], 65535);
                raw[(i * 3 + k) * 2] = static_cast<unsigned char>(c >> 8);  // PNG is big-endian
                raw[(i * 3 + k) * 2 + 1] = static_cast<unsigned char>(c & 0xff);
            } else {
                raw[i * 3 + k] = static_cast<unsigned char>(quantize(img.pixels[i][k], 255));
            }
        }
    std::vector<unsigned char> out;
    std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
    for (int y = 0; y < img.height; ++y) rows[static_cast<std::size_t>(y)] = raw.data() + rowbytes * static_cast<std::size_t>(y);
    std::string err;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, error_fn, warn_fn);
    if (!png) throw ImageError("png: out of memory");
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw ImageError("png encode: " + err);
    }
    png_set_write_fn(png, &out, write_fn, flush_fn);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), bit_depth,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(png, 3);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

inline Image read_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_png(bytes.data(), bytes.size());
}

inline void write_image(const std::string& path, const Image& img, int bit_depth = 8) {
    const auto bytes = encode_png(img, bit_depth);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for '" + path + "'");
}

/// Area-average downscale so that the longer edge is at most max_edge; smaller images are copied.
inline Image downscale_area(const Image& img, int max_edge) {
    const int long_edge = std::max(img.width, img.height);
    if (long_edge <= max_edge || max_edge < 1) return img;
    const double s = static_cast<double>(long_edge) / max_edge;
    const int w = std::max(1, static_cast<int>(std::lround(img.width / s)));
    const int h = std::max(1, static_cast<int>(std::lround(img.height / s)));
    const double sx = static_cast<double>(img.width) / w, sy = static_cast<double>(img.height) / h;
    Image out(w, h);
    out.bit_depth = img.bit_depth;
    for (int y = 0; y < h; ++y) {
        const double y0 = y * sy, y1 = (y + 1) * sy;
        for (int x = 0; x < w; ++x) {
            const double x0 = x * sx, x1 = (x + 1) * sx;
            Vec3 acc;
            double area = 0.0;
            for (int yy = static_cast<int>(y0); yy < std::min(img.height, static_cast<int>(std::ceil(y1))); ++yy) {
                const double cy = std::min<double>(yy + 1, y1) - std::max<double>(yy, y0);
                for (int xx = static_cast<int>(x0); xx < std::min(img.width, static_cast<int>(std::ceil(x1))); ++xx) {
                    const double c = cy * (std::min<double>(xx + 1, x1) - std::max<double>(xx, x0));
                    if (c <= 0.0) continue;
                    acc += c * img.at(xx, yy);
                    area += c;
                }
            }
            out.at(x, y) = (1.0 / area) * acc;
        }
    }
    return out;
}

}  // namespace glut

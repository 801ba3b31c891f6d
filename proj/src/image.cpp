#include "pcnn/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <string>

namespace pcnn {
namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// libpng reports errors by longjmp; the handler stashes the message first.
void on_png_error(png_structp png, png_const_charp msg) {
    auto* err = static_cast<std::string*>(png_get_error_ptr(png));
    if (err) *err = msg ? msg : "unknown libpng error";
    longjmp(png_jmpbuf(png), 1);
}

void on_png_warning(png_structp, png_const_charp) {}

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;
    std::string err;
    ~PngReader() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    }
};

struct PngWriter {
    png_structp png = nullptr;
    png_infop info = nullptr;
    std::string err;
    ~PngWriter() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    }
};

} // namespace

Image load_image(const std::filesystem::path& path) {
    FilePtr file(std::fopen(path.string().c_str(), "rb"));
    if (!file)
        throw std::runtime_error("file not found: " + path.string());

    unsigned char sig[8];
    if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw std::runtime_error("not a PNG file: " + path.string());
    std::rewind(file.get());

    PngReader r;
    r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &r.err, on_png_error, on_png_warning);
    if (!r.png) throw std::runtime_error("libpng: failed to create read struct");
    r.info = png_create_info_struct(r.png);
    if (!r.info) throw std::runtime_error("libpng: failed to create info struct");

    Image img;
    std::vector<png_bytep> row_ptrs;

    if (setjmp(png_jmpbuf(r.png)))
        throw std::runtime_error("malformed PNG " + path.string() + ": " + r.err);

    png_init_io(r.png, file.get());
    png_read_info(r.png, r.info);

    const png_uint_32 w = png_get_image_width(r.png, r.info);
    const png_uint_32 h = png_get_image_height(r.png, r.info);
    const int bit_depth = png_get_bit_depth(r.png, r.info);
    const int color_type = png_get_color_type(r.png, r.info);

    if (color_type == PNG_COLOR_TYPE_PALETTE)
        png_set_palette_to_rgb(r.png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8)
        png_set_expand_gray_1_2_4_to_8(r.png);
    if (png_get_valid(r.png, r.info, PNG_INFO_tRNS))
        png_set_tRNS_to_alpha(r.png);
    if (bit_depth == 16)
        png_set_scale_16(r.png); // rescale, not truncate
    png_set_strip_alpha(r.png);  // alpha discarded, never premultiplied
    png_read_update_info(r.png, r.info);

    const int channels = png_get_channels(r.png, r.info);
    if (channels != 1 && channels != 3)
        throw std::runtime_error("unsupported PNG color type in " + path.string());

    img = Image(static_cast<int>(h), static_cast<int>(w), channels);
    row_ptrs.resize(h);
    for (png_uint_32 y = 0; y < h; ++y)
        row_ptrs[y] = img.data.data() + static_cast<std::size_t>(y) * w * channels;

    png_read_image(r.png, row_ptrs.data());
    png_read_end(r.png, nullptr);
    return img;
}

void save_image(const Image& img, const std::filesystem::path& path) {
    if (!img.valid())
        throw std::invalid_argument("save_image: invalid image");

    FilePtr file(std::fopen(path.string().c_str(), "wb"));
    if (!file)
        throw std::runtime_error("cannot write: " + path.string());

    PngWriter w;
    w.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &w.err, on_png_error, on_png_warning);
    if (!w.png) throw std::runtime_error("libpng: failed to create write struct");
    w.info = png_create_info_struct(w.png);
    if (!w.info) throw std::runtime_error("libpng: failed to create info struct");

    std::vector<png_bytep> row_ptrs(img.height);
    for (int y = 0; y < img.height; ++y)
        row_ptrs[y] = const_cast<png_bytep>(img.data.data()) +
                      static_cast<std::size_t>(y) * img.width * img.channels;

    if (setjmp(png_jmpbuf(w.png)))
        throw std::runtime_error("PNG write failed for " + path.string() + ": " + w.err);

    png_init_io(w.png, file.get());
    png_set_IHDR(w.png, w.info, img.width, img.height, 8,
                 img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(w.png, w.info);
    png_write_image(w.png, row_ptrs.data());
    png_write_end(w.png, nullptr);
}

FloatImage to_float(const Image& img) {
    if (!img.valid())
        throw std::invalid_argument("to_float: invalid image");
    FloatImage out(img.height, img.width, img.channels);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        out.data[i] = static_cast<float>(img.data[i]) / 255.0f;
    return out;
}

Image to_u8(const FloatImage& img) {
    if (!img.valid())
        throw std::invalid_argument("to_u8: invalid image");
    Image out(img.height, img.width, img.channels);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const long v = std::lround(static_cast<double>(img.data[i]) * 255.0);
        out.data[i] = static_cast<std::uint8_t>(std::clamp(v, 0L, 255L));
    }
    return out;
}

FloatImage to_grayscale(const FloatImage& img) {
    if (img.channels == 1)
        return img;
    if (img.channels != 3)
        throw std::invalid_argument("to_grayscale: expected 1 or 3 channels");
    FloatImage out(img.height, img.width, 1);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const float lum = 0.299f * img.at(y, x, 0) + 0.587f * img.at(y, x, 1) +
                              0.114f * img.at(y, x, 2);
            out.at(y, x, 0) = std::clamp(lum, 0.0f, 1.0f);
        }
    return out;
}

} // namespace pcnn

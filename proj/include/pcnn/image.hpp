#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace pcnn {

/// 8-bit raster image. Row-major, channel-interleaved; channels is 1 (gray) or 3 (RGB).
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<std::uint8_t> data;

    Image() = default;
    Image(int h, int w, int c)
        : height(h), width(w), channels(c),
          data(static_cast<std::size_t>(h) * w * c, 0) {}

    std::size_t index(int y, int x, int c) const {
        return (static_cast<std::size_t>(y) * width + x) * channels + c;
    }
    std::uint8_t& at(int y, int x, int c) { return data[index(y, x, c)]; }
    std::uint8_t at(int y, int x, int c) const { return data[index(y, x, c)]; }

    bool valid() const {
        return height >= 1 && width >= 1 && (channels == 1 || channels == 3) &&
               data.size() == static_cast<std::size_t>(height) * width * channels;
    }
};

/// Unit-interval float image, same layout as Image. The working form fed to the network.
struct FloatImage {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<float> data;

    FloatImage() = default;
    FloatImage(int h, int w, int c)
        : height(h), width(w), channels(c),
          data(static_cast<std::size_t>(h) * w * c, 0.0f) {}

    std::size_t index(int y, int x, int c) const {
        return (static_cast<std::size_t>(y) * width + x) * channels + c;
    }
    float& at(int y, int x, int c) { return data[index(y, x, c)]; }
    float at(int y, int x, int c) const { return data[index(y, x, c)]; }

    bool valid() const {
        return height >= 1 && width >= 1 && (channels == 1 || channels == 3) &&
               data.size() == static_cast<std::size_t>(height) * width * channels;
    }
};

/// Decode a PNG file. 16-bit sources are rescaled to 8-bit, palette images are
/// expanded to RGB, and any alpha channel is discarded. Result has 1 or 3 channels.
Image load_image(const std::filesystem::path& path);

/// Encode as 8-bit PNG (grayscale for 1 channel, RGB for 3).
void save_image(const Image& img, const std::filesystem::path& path);

/// Intensity / 255.
FloatImage to_float(const Image& img);

/// round(v * 255), half away from zero, clamped. Inverse of to_float on 8-bit data.
Image to_u8(const FloatImage& img);

/// Rec.601 luminance for 3-channel input; 1-channel input is returned unchanged.
FloatImage to_grayscale(const FloatImage& img);

} // namespace pcnn

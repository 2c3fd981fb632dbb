#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace agcam {

// Interleaved 8-bit image, RGB (3 channels) or RGBA (4 channels), row-major.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 3;
    std::vector<std::uint8_t> pixels;

    Image() = default;
    Image(int w, int h, int c, std::uint8_t fill = 0);

    bool empty() const { return width == 0 || height == 0; }
    std::uint8_t &at(int x, int y, int c) { return pixels[index(x, y, c)]; }
    std::uint8_t at(int x, int y, int c) const { return pixels[index(x, y, c)]; }

    bool operator==(const Image &) const = default;

  private:
    std::size_t index(int x, int y, int c) const {
        return (static_cast<std::size_t>(y) * width + x) * channels + c;
    }
};

// Decoding accepts anything OpenCV's codecs read (PNG, JPEG, BMP, ...). The
// result is always 3-channel RGB. Throws ImageDecodeError.
Image decode_image(std::span<const std::uint8_t> bytes);
Image load_image(const std::filesystem::path &path);

// PNG bytes for an RGB or RGBA image. Same input always yields the same bytes.
std::vector<std::uint8_t> encode_png(const Image &image);
void write_png(const std::filesystem::path &path, const Image &image);

// Area-averaged resize, used by model preprocessing.
Image resize_area(const Image &image, int width, int height);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path &path);
void write_file_bytes(const std::filesystem::path &path, std::span<const std::uint8_t> bytes);

} // namespace agcam

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace evframes {

/// Row-major 8-bit image with interleaved channels; pixel (0,0) is top-left.
struct Image {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::uint32_t channels = 1;
    std::vector<std::uint8_t> data;

    Image() = default;
    Image(std::uint32_t w, std::uint32_t h, std::uint32_t c, std::uint8_t fill = 0)
        : width(w), height(h), channels(c), data(std::size_t{w} * h * c, fill) {}

    std::uint8_t& at(std::uint32_t x, std::uint32_t y, std::uint32_t c = 0) {
        return data[(std::size_t{y} * width + x) * channels + c];
    }
    std::uint8_t at(std::uint32_t x, std::uint32_t y, std::uint32_t c = 0) const {
        return data[(std::size_t{y} * width + x) * channels + c];
    }

    friend bool operator==(const Image&, const Image&) = default;
};

/// Binary PGM (P5) for one channel, PPM (P6) for three.
std::string encode_pnm(const Image& img);
Image decode_pnm(const std::string& bytes);

void export_image(const Image& img, const std::filesystem::path& path);
Image import_image(const std::filesystem::path& path);

}  // namespace evframes

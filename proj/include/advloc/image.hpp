#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "advloc/common.hpp"

namespace advloc {

struct Rgb {
    uint8_t r = 0, g = 0, b = 0;

    bool operator==(const Rgb&) const = default;
};

// Row-major 8-bit RGB raster. Row 0 is the top of the image.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<Rgb> pixels;

    Image() = default;
    Image(int w, int h) : width(w), height(h), pixels(static_cast<size_t>(w) * h) {}

    Rgb& at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }
    const Rgb& at(int x, int y) const {
        return pixels[static_cast<size_t>(y) * width + x];
    }

    bool operator==(const Image&) const = default;
};

// FNV-1a over the raw pixel bytes; used to tie conversion tables to the
// exact base image they were calibrated against.
uint64_t image_content_hash(const Image& img);

void save_png(const Image& img, const std::string& path);
Image load_png(const std::string& path);

}  // namespace advloc

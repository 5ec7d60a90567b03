#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "auglab/errors.hpp"

namespace auglab {

// ---------------------------------------------------------------------------
// Image: planar float image, channel-major then row-major, values in [0,1].
// ---------------------------------------------------------------------------
struct Image {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<float> pixels;  // channels * height * width

    Image() = default;
    Image(int c, int h, int w, float fill = 0.0f)
        : channels(c), height(h), width(w),
          pixels(static_cast<std::size_t>(c) * h * w, fill) {}

    std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
    std::size_t size() const { return static_cast<std::size_t>(channels) * plane(); }

    float& at(int c, int y, int x) {
        return pixels[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    float at(int c, int y, int x) const {
        return pixels[(static_cast<std::size_t>(c) * height + y) * width + x];
    }

    bool same_shape(const Image& other) const {
        return channels == other.channels && height == other.height && width == other.width;
    }

    bool in_range() const {
        for (float v : pixels) {
            if (!(v >= 0.0f && v <= 1.0f)) return false;
        }
        return true;
    }
};

inline std::uint8_t to_byte(float v) {
    const long b = std::lround(static_cast<double>(v) * 255.0);
    return static_cast<std::uint8_t>(b < 0 ? 0 : (b > 255 ? 255 : b));
}

inline float from_byte(std::uint8_t b) { return static_cast<float>(b) / 255.0f; }

// Binary PPM (P6). Grayscale images are replicated across RGB.
inline void write_ppm(const Image& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < 3; ++c) {
                const int src = img.channels == 1 ? 0 : c;
                const char byte = static_cast<char>(to_byte(img.at(src, y, x)));
                out.put(byte);
            }
        }
    }
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace auglab

#pragma once

#include <algorithm>
#include <cmath>

#include "auglab/image.hpp"
#include "auglab/rng.hpp"

namespace auglab {

// ---------------------------------------------------------------------------
// Moderate per-image ops plus Cutout. Each op has a deterministic core
// (suffix _at / _apply) taking the drawn parameters explicitly, and a seeded
// wrapper that draws them from a stream. Tests drive the cores directly.
// ---------------------------------------------------------------------------

inline constexpr float kFillValue = 0.5f;  // mid-gray fill for erased/out-of-frame pixels

inline Image hflip_apply(const Image& img) {
    Image out(img.channels, img.height, img.width);
    for (int c = 0; c < img.channels; ++c) {
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x) {
                out.at(c, y, x) = img.at(c, y, img.width - 1 - x);
            }
        }
    }
    return out;
}

inline Image hflip(const Image& img, double probability, RngStream& rng) {
    if (rng.bernoulli(probability)) return hflip_apply(img);
    return img;
}

namespace detail {
// reflect with edge repeat: ...2,1,0 | 0,1,2,... | n-1,n-2...
inline int reflect_index(int i, int n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - i - 1;
    return i;
}
}  // namespace detail

// Reflect-pad by `padding` on every side, then crop the window whose top-left
// corner in the padded image is (dx, dy), dx and dy in [0, 2*padding].
inline Image pad_crop_at(const Image& img, int padding, int dx, int dy) {
    if (padding == 0) return img;
    Image out(img.channels, img.height, img.width);
    for (int c = 0; c < img.channels; ++c) {
        for (int y = 0; y < img.height; ++y) {
            const int sy = detail::reflect_index(y + dy - padding, img.height);
            for (int x = 0; x < img.width; ++x) {
                const int sx = detail::reflect_index(x + dx - padding, img.width);
                out.at(c, y, x) = img.at(c, sy, sx);
            }
        }
    }
    return out;
}

inline Image pad_crop(const Image& img, int padding, RngStream& rng) {
    if (padding < 0) throw std::invalid_argument("pad_crop: padding must be >= 0");
    if (padding == 0) return img;
    const int dx = static_cast<int>(rng.next_below(static_cast<std::uint32_t>(2 * padding + 1)));
    const int dy = static_cast<int>(rng.next_below(static_cast<std::uint32_t>(2 * padding + 1)));
    return pad_crop_at(img, padding, dx, dy);
}

// size x size square centered at (cx, cy), clipped at the borders, filled
// with mid-gray in every channel.
inline Image cutout_at(const Image& img, int size, int cx, int cy) {
    Image out = img;
    if (size <= 0) return out;
    const int x0 = std::max(0, cx - size / 2);
    const int y0 = std::max(0, cy - size / 2);
    const int x1 = std::min(img.width, cx - size / 2 + size);
    const int y1 = std::min(img.height, cy - size / 2 + size);
    for (int c = 0; c < img.channels; ++c) {
        for (int y = y0; y < y1; ++y) {
            for (int x = x0; x < x1; ++x) out.at(c, y, x) = kFillValue;
        }
    }
    return out;
}

inline Image cutout(const Image& img, int size, RngStream& rng) {
    if (size <= 0) return img;
    const int cx = static_cast<int>(rng.next_below(static_cast<std::uint32_t>(img.width)));
    const int cy = static_cast<int>(rng.next_below(static_cast<std::uint32_t>(img.height)));
    return cutout_at(img, size, cx, cy);
}

}  // namespace auglab

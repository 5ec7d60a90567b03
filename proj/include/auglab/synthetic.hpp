#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>

#include "auglab/dataset.hpp"
#include "auglab/rng.hpp"

namespace auglab {

// ---------------------------------------------------------------------------
// Procedural shape dataset: a desk-scale classification task. Each class is
// a shape family (rectangle, disk, cross, diagonal stripe; classes past four
// repeat the cycle as hollow outlines) drawn over a tinted background with
// jittered position, scale and hue plus additive pixel noise. Hue is drawn
// independently of the class, so color statistics overlap across classes and
// geometry carries the label.
// ---------------------------------------------------------------------------

struct SyntheticSpec {
    int num_classes = 4;
    int per_class_train = 500;
    int per_class_test = 100;
    int height = 32;
    int width = 32;
};

namespace detail {

inline void hsv_to_rgb(double h, double s, double v, float rgb[3]) {
    h = h - std::floor(h);
    const double k = h * 6.0;
    const int sector = static_cast<int>(k) % 6;
    const double f = k - std::floor(k);
    const double p = v * (1.0 - s);
    const double q = v * (1.0 - s * f);
    const double t = v * (1.0 - s * (1.0 - f));
    double r = 0.0, g = 0.0, b = 0.0;
    switch (sector) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        default: r = v; g = p; b = q; break;
    }
    rgb[0] = static_cast<float>(r);
    rgb[1] = static_cast<float>(g);
    rgb[2] = static_cast<float>(b);
}

inline Sample draw_shape_sample(const SyntheticSpec& spec, int class_index, RngStream rng) {
    const int h = spec.height;
    const int w = spec.width;

    RngStream bg_rng = rng.fork(rng_tag::background);
    RngStream geo_rng = rng.fork(rng_tag::geometry);
    RngStream noise_rng = rng.fork(rng_tag::noise);

    float background[3];
    const double base_gray = bg_rng.uniform(0.15, 0.45);
    for (int c = 0; c < 3; ++c) {
        background[c] = static_cast<float>(
            std::clamp(base_gray + bg_rng.uniform(-0.08, 0.08), 0.0, 1.0));
    }

    // hue independent of the class: color alone must not identify the label
    float shape_color[3];
    {
        const double hue = bg_rng.next_double();
        const double sat = bg_rng.uniform(0.55, 1.0);
        const double val = bg_rng.uniform(0.6, 1.0);
        hsv_to_rgb(hue, sat, val, shape_color);
    }

    const double cx = w * (0.5 + geo_rng.uniform(-0.15, 0.15));
    const double cy = h * (0.5 + geo_rng.uniform(-0.15, 0.15));
    const double radius = std::min(h, w) * geo_rng.uniform(0.26, 0.38);

    const int kind = class_index % 4;
    const bool hollow = (class_index / 4) % 2 == 1;

    // per-kind jitter parameters, drawn up front in a fixed order
    double aspect = geo_rng.uniform(0.45, 0.7);     // rectangle
    const bool portrait = geo_rng.bernoulli(0.5);   // rectangle orientation
    const double theta = (45.0 + geo_rng.uniform(-15.0, 15.0)) * 3.14159265358979323846 / 180.0;

    const double sin_t = std::sin(theta);
    const double cos_t = std::cos(theta);

    auto member = [&](double px, double py, double scale) -> bool {
        const double dx = px - cx;
        const double dy = py - cy;
        const double r = radius * scale;
        switch (kind) {
            case 0: {  // axis-aligned rectangle
                const double ax = portrait ? r * aspect : r;
                const double ay = portrait ? r : r * aspect;
                return std::fabs(dx) <= ax && std::fabs(dy) <= ay;
            }
            case 1:  // disk
                return dx * dx + dy * dy <= (0.9 * r) * (0.9 * r);
            case 2:  // cross
                return (std::fabs(dx) <= 0.35 * r && std::fabs(dy) <= r) ||
                       (std::fabs(dy) <= 0.35 * r && std::fabs(dx) <= r);
            default: {  // rotated bar ("stripe")
                const double u = dx * cos_t + dy * sin_t;
                const double v = -dx * sin_t + dy * cos_t;
                return std::fabs(v) <= 0.35 * r && std::fabs(u) <= 1.1 * r;
            }
        }
    };

    Sample s;
    s.image = Image(3, h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double px = x + 0.5;
            const double py = y + 0.5;
            bool inside = member(px, py, 1.0);
            if (hollow && inside && member(px, py, 0.55)) inside = false;
            for (int c = 0; c < 3; ++c) {
                const float base = inside ? shape_color[c] : background[c];
                const double noisy = base + 0.05 * noise_rng.normal();
                s.image.at(c, y, x) = static_cast<float>(std::clamp(noisy, 0.0, 1.0));
            }
        }
    }
    return s;
}

}  // namespace detail

// Deterministic given the seed; train and test come from disjoint stream
// paths of the same generator. Classes are exactly balanced.
inline std::pair<Dataset, Dataset> generate_synthetic(const SyntheticSpec& spec,
                                                      std::uint64_t seed) {
    if (spec.num_classes < 2) throw std::invalid_argument("generate_synthetic: need >= 2 classes");
    if (spec.height < 8 || spec.width < 8) {
        throw std::invalid_argument("generate_synthetic: dimensions must be >= 8");
    }
    if (spec.per_class_train <= 0 || spec.per_class_test <= 0) {
        throw std::invalid_argument("generate_synthetic: per-class sample counts must be positive");
    }

    RngStream root(seed);
    auto build = [&](std::uint64_t split_tag, int per_class, const std::string& name) {
        Dataset ds;
        ds.num_classes = spec.num_classes;
        ds.name = name;
        RngStream split_rng = root.fork(split_tag);
        for (int k = 0; k < spec.num_classes; ++k) {
            RngStream class_rng = split_rng.fork(static_cast<std::uint64_t>(k));
            for (int i = 0; i < per_class; ++i) {
                Sample s = detail::draw_shape_sample(
                    spec, k, class_rng.fork(static_cast<std::uint64_t>(i)));
                s.label = one_hot(k, spec.num_classes);
                ds.samples.push_back(std::move(s));
            }
        }
        return ds;
    };

    Dataset train = build(rng_tag::train_split, spec.per_class_train,
                          "synthetic-train-" + std::to_string(spec.num_classes) + "c");
    Dataset test = build(rng_tag::test_split, spec.per_class_test,
                         "synthetic-test-" + std::to_string(spec.num_classes) + "c");
    return {std::move(train), std::move(test)};
}

}  // namespace auglab

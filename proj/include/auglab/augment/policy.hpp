#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "auglab/augment/ops.hpp"
#include "auglab/errors.hpp"
#include "auglab/image.hpp"
#include "auglab/rng.hpp"

namespace auglab {

// ---------------------------------------------------------------------------
// Policy-based augmentation: a policy is a set of sub-policies, each an
// ordered pair of (op kind, probability, magnitude 0..9). One sub-policy is
// chosen uniformly per image; each of its two ops fires with its own
// probability at its own magnitude.
// ---------------------------------------------------------------------------

enum class PolicyOpKind {
    ShearX,
    ShearY,
    TranslateX,
    TranslateY,
    Rotate,
    Invert,
    Solarize,
    Posterize,
    Contrast,
    Color,
    Brightness,
    Sharpness,
    AutoContrast,
    Equalize,
    Cutout,
};

inline constexpr int kNumPolicyOpKinds = 15;

inline const char* policy_op_name(PolicyOpKind kind) {
    switch (kind) {
        case PolicyOpKind::ShearX: return "ShearX";
        case PolicyOpKind::ShearY: return "ShearY";
        case PolicyOpKind::TranslateX: return "TranslateX";
        case PolicyOpKind::TranslateY: return "TranslateY";
        case PolicyOpKind::Rotate: return "Rotate";
        case PolicyOpKind::Invert: return "Invert";
        case PolicyOpKind::Solarize: return "Solarize";
        case PolicyOpKind::Posterize: return "Posterize";
        case PolicyOpKind::Contrast: return "Contrast";
        case PolicyOpKind::Color: return "Color";
        case PolicyOpKind::Brightness: return "Brightness";
        case PolicyOpKind::Sharpness: return "Sharpness";
        case PolicyOpKind::AutoContrast: return "AutoContrast";
        case PolicyOpKind::Equalize: return "Equalize";
        case PolicyOpKind::Cutout: return "Cutout";
    }
    return "?";
}

inline PolicyOpKind policy_op_from_name(const std::string& name) {
    for (int k = 0; k < kNumPolicyOpKinds; ++k) {
        const auto kind = static_cast<PolicyOpKind>(k);
        if (name == policy_op_name(kind)) return kind;
    }
    throw ConfigError("unknown policy op kind '" + name + "'");
}

struct PolicyOp {
    PolicyOpKind kind = PolicyOpKind::Invert;
    double probability = 1.0;
    int magnitude = 0;  // 0..9
};

struct Policy {
    std::vector<std::array<PolicyOp, 2>> sub_policies;
    std::string name = "unnamed";
};

// ---------------------------------------------------------------------------
// Magnitude mapping: integer magnitude m in 0..9 maps linearly onto a
// physical range [lo(m=0), hi(m=9)]. Signed entries flip the sign of the
// physical value with probability 1/2 when the op fires. Size-relative
// entries (translate, cutout) scale by the relevant image dimension.
// ---------------------------------------------------------------------------
struct MagnitudeRange {
    double lo = 0.0;
    double hi = 0.0;
    bool sign_flip = false;
    bool size_relative = false;
};

using MagnitudeTable = std::map<PolicyOpKind, MagnitudeRange>;

inline MagnitudeTable default_magnitude_table() {
    MagnitudeTable t;
    t[PolicyOpKind::ShearX] = {0.0, 0.3, true, false};
    t[PolicyOpKind::ShearY] = {0.0, 0.3, true, false};
    t[PolicyOpKind::TranslateX] = {0.0, 0.45, true, true};  // fraction of width
    t[PolicyOpKind::TranslateY] = {0.0, 0.45, true, true};  // fraction of height
    t[PolicyOpKind::Rotate] = {0.0, 30.0, true, false};     // degrees
    t[PolicyOpKind::Solarize] = {256.0, 0.0, false, false}; // byte threshold, m=0 is a no-op
    t[PolicyOpKind::Posterize] = {8.0, 4.0, false, false};  // bits kept, m=0 is a no-op
    t[PolicyOpKind::Contrast] = {0.0, 0.9, true, false};    // factor = 1 + value
    t[PolicyOpKind::Color] = {0.0, 0.9, true, false};
    t[PolicyOpKind::Brightness] = {0.0, 0.9, true, false};
    t[PolicyOpKind::Sharpness] = {0.0, 0.9, true, false};
    t[PolicyOpKind::Cutout] = {0.0, 0.5, false, true};      // fraction of min(H,W)
    // Invert, AutoContrast, Equalize take no magnitude.
    return t;
}

inline double magnitude_to_physical(const MagnitudeRange& range, int magnitude) {
    const double f = std::clamp(magnitude, 0, 9) / 9.0;
    return range.lo + (range.hi - range.lo) * f;
}

// ---------------------------------------------------------------------------
// Geometric core: inverse-mapped affine warp with bilinear resampling and
// mid-gray fill outside the source frame. src = A * (dst - center) + center + t
// ---------------------------------------------------------------------------
struct AffineMap {
    double a = 1.0, b = 0.0;   // row for src_x
    double c = 0.0, d = 1.0;   // row for src_y
    double tx = 0.0, ty = 0.0;
};

inline Image affine_bilinear(const Image& img, const AffineMap& m, float fill = kFillValue) {
    Image out(img.channels, img.height, img.width);
    const double cx = (img.width - 1) * 0.5;
    const double cy = (img.height - 1) * 0.5;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const double dx = x - cx;
            const double dy = y - cy;
            const double sx = m.a * dx + m.b * dy + cx + m.tx;
            const double sy = m.c * dx + m.d * dy + cy + m.ty;
            const int ix = static_cast<int>(std::floor(sx));
            const int iy = static_cast<int>(std::floor(sy));
            const float fx = static_cast<float>(sx - ix);
            const float fy = static_cast<float>(sy - iy);
            for (int ch = 0; ch < img.channels; ++ch) {
                auto tap = [&](int yy, int xx) -> float {
                    if (xx < 0 || xx >= img.width || yy < 0 || yy >= img.height) return fill;
                    return img.at(ch, yy, xx);
                };
                const float v00 = tap(iy, ix);
                const float v01 = tap(iy, ix + 1);
                const float v10 = tap(iy + 1, ix);
                const float v11 = tap(iy + 1, ix + 1);
                const float top = v00 + (v01 - v00) * fx;
                const float bottom = v10 + (v11 - v10) * fx;
                out.at(ch, y, x) = top + (bottom - top) * fy;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Photometric cores. Posterize, Solarize, AutoContrast and Equalize quantize
// to 256 levels, operate on bytes, and rescale to [0,1].
// ---------------------------------------------------------------------------
namespace photometric {

inline Image invert(const Image& img) {
    Image out = img;
    for (float& v : out.pixels) v = 1.0f - v;
    return out;
}

inline Image solarize(const Image& img, int threshold_byte) {
    Image out = img;
    for (float& v : out.pixels) {
        const int b = to_byte(v);
        v = from_byte(static_cast<std::uint8_t>(b >= threshold_byte ? 255 - b : b));
    }
    return out;
}

inline Image posterize(const Image& img, int bits) {
    const int keep = std::clamp(bits, 1, 8);
    const std::uint8_t mask = static_cast<std::uint8_t>(0xFF << (8 - keep));
    Image out = img;
    for (float& v : out.pixels) v = from_byte(static_cast<std::uint8_t>(to_byte(v) & mask));
    return out;
}

inline Image autocontrast(const Image& img) {
    Image out = img;
    const std::size_t plane = img.plane();
    for (int c = 0; c < img.channels; ++c) {
        int lo = 255, hi = 0;
        for (std::size_t i = 0; i < plane; ++i) {
            const int b = to_byte(img.pixels[c * plane + i]);
            lo = std::min(lo, b);
            hi = std::max(hi, b);
        }
        if (hi <= lo) continue;
        const double scale = 255.0 / (hi - lo);
        for (std::size_t i = 0; i < plane; ++i) {
            const int b = to_byte(img.pixels[c * plane + i]);
            const long mapped = std::lround((b - lo) * scale);
            out.pixels[c * plane + i] = from_byte(
                static_cast<std::uint8_t>(std::clamp(mapped, 0l, 255l)));
        }
    }
    return out;
}

// Histogram equalization per channel, PIL's lookup-table construction.
inline Image equalize(const Image& img) {
    Image out = img;
    const std::size_t plane = img.plane();
    for (int c = 0; c < img.channels; ++c) {
        std::array<long, 256> hist{};
        for (std::size_t i = 0; i < plane; ++i) hist[to_byte(img.pixels[c * plane + i])] += 1;

        long total = 0;
        int last_nonzero = 0;
        int nonzero_bins = 0;
        for (int b = 0; b < 256; ++b) {
            if (hist[static_cast<std::size_t>(b)] > 0) {
                total += hist[static_cast<std::size_t>(b)];
                last_nonzero = b;
                nonzero_bins += 1;
            }
        }
        if (nonzero_bins <= 1) continue;
        const long step = (total - hist[static_cast<std::size_t>(last_nonzero)]) / 255;
        if (step == 0) continue;

        std::array<std::uint8_t, 256> lut{};
        long n = step / 2;
        for (int b = 0; b < 256; ++b) {
            lut[static_cast<std::size_t>(b)] =
                static_cast<std::uint8_t>(std::clamp(n / step, 0l, 255l));
            n += hist[static_cast<std::size_t>(b)];
        }
        for (std::size_t i = 0; i < plane; ++i) {
            out.pixels[c * plane + i] = from_byte(lut[to_byte(img.pixels[c * plane + i])]);
        }
    }
    return out;
}

inline float luminance(const Image& img, int y, int x) {
    if (img.channels == 1) return img.at(0, y, x);
    return 0.299f * img.at(0, y, x) + 0.587f * img.at(1, y, x) + 0.114f * img.at(2, y, x);
}

// factor 1 keeps the image; 0 collapses to the reference (mean gray,
// grayscale, black or smoothed respectively).
inline Image contrast(const Image& img, double factor) {
    double mean = 0.0;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) mean += luminance(img, y, x);
    }
    mean /= img.plane();
    Image out = img;
    const float m = static_cast<float>(mean);
    const float f = static_cast<float>(factor);
    for (float& v : out.pixels) v = std::clamp(m + f * (v - m), 0.0f, 1.0f);
    return out;
}

inline Image color(const Image& img, double factor) {
    Image out = img;
    const float f = static_cast<float>(factor);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const float gray = luminance(img, y, x);
            for (int c = 0; c < img.channels; ++c) {
                out.at(c, y, x) = std::clamp(gray + f * (img.at(c, y, x) - gray), 0.0f, 1.0f);
            }
        }
    }
    return out;
}

inline Image brightness(const Image& img, double factor) {
    Image out = img;
    const float f = static_cast<float>(factor);
    for (float& v : out.pixels) v = std::clamp(f * v, 0.0f, 1.0f);
    return out;
}

inline Image sharpness(const Image& img, double factor) {
    // smooth kernel [[1,1,1],[1,5,1],[1,1,1]]/13 over the interior; border
    // pixels keep their original value
    Image smooth = img;
    for (int c = 0; c < img.channels; ++c) {
        for (int y = 1; y + 1 < img.height; ++y) {
            for (int x = 1; x + 1 < img.width; ++x) {
                float acc = 5.0f * img.at(c, y, x);
                acc += img.at(c, y - 1, x - 1) + img.at(c, y - 1, x) + img.at(c, y - 1, x + 1);
                acc += img.at(c, y, x - 1) + img.at(c, y, x + 1);
                acc += img.at(c, y + 1, x - 1) + img.at(c, y + 1, x) + img.at(c, y + 1, x + 1);
                smooth.at(c, y, x) = acc / 13.0f;
            }
        }
    }
    Image out = img;
    const float f = static_cast<float>(factor);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        out.pixels[i] = std::clamp(smooth.pixels[i] + f * (img.pixels[i] - smooth.pixels[i]),
                                   0.0f, 1.0f);
    }
    return out;
}

}  // namespace photometric

// Applies one op at a known physical value (sign already resolved). The
// deterministic core behind apply_policy.
inline Image apply_policy_op_at(const Image& img, PolicyOpKind kind, double physical) {
    switch (kind) {
        case PolicyOpKind::ShearX: {
            AffineMap m;
            m.b = physical;
            return affine_bilinear(img, m);
        }
        case PolicyOpKind::ShearY: {
            AffineMap m;
            m.c = physical;
            return affine_bilinear(img, m);
        }
        case PolicyOpKind::TranslateX: {
            AffineMap m;
            m.tx = physical;  // pixels
            return affine_bilinear(img, m);
        }
        case PolicyOpKind::TranslateY: {
            AffineMap m;
            m.ty = physical;
            return affine_bilinear(img, m);
        }
        case PolicyOpKind::Rotate: {
            const double rad = physical * 3.14159265358979323846 / 180.0;
            AffineMap m;
            m.a = std::cos(rad);
            m.b = std::sin(rad);
            m.c = -std::sin(rad);
            m.d = std::cos(rad);
            return affine_bilinear(img, m);
        }
        case PolicyOpKind::Invert: return photometric::invert(img);
        case PolicyOpKind::Solarize:
            return photometric::solarize(img, static_cast<int>(std::lround(physical)));
        case PolicyOpKind::Posterize:
            return photometric::posterize(img, static_cast<int>(std::lround(physical)));
        case PolicyOpKind::Contrast: return photometric::contrast(img, 1.0 + physical);
        case PolicyOpKind::Color: return photometric::color(img, 1.0 + physical);
        case PolicyOpKind::Brightness: return photometric::brightness(img, 1.0 + physical);
        case PolicyOpKind::Sharpness: return photometric::sharpness(img, 1.0 + physical);
        case PolicyOpKind::AutoContrast: return photometric::autocontrast(img);
        case PolicyOpKind::Equalize: return photometric::equalize(img);
        case PolicyOpKind::Cutout: break;  // handled by the caller (needs a center draw)
    }
    throw ConfigError("apply_policy_op_at: op requires rng, use apply_policy_op");
}

inline Image apply_policy_op(const Image& img, const PolicyOp& op, const MagnitudeTable& table,
                             RngStream& rng, std::vector<std::string>* log = nullptr) {
    auto it = table.find(op.kind);
    const bool has_range = it != table.end();
    double physical = has_range ? magnitude_to_physical(it->second, op.magnitude) : 0.0;
    if (has_range && it->second.size_relative) {
        switch (op.kind) {
            case PolicyOpKind::TranslateX: physical *= img.width; break;
            case PolicyOpKind::TranslateY: physical *= img.height; break;
            default: physical *= std::min(img.height, img.width); break;
        }
    }
    if (has_range && it->second.sign_flip && rng.bernoulli(0.5)) physical = -physical;
    if (log) {
        log->push_back(std::string(policy_op_name(op.kind)) + "(m=" +
                       std::to_string(op.magnitude) + ",value=" + std::to_string(physical) + ")");
    }

    if (op.kind == PolicyOpKind::Cutout) {
        return cutout(img, static_cast<int>(std::lround(physical)), rng);
    }
    return apply_policy_op_at(img, op.kind, physical);
}

// Selects one sub-policy uniformly, applies each of its two ops with its own
// probability, then applies Cutout with the given square size.
inline Image apply_policy(const Image& img, const Policy& policy, int cutout_size,
                          const MagnitudeTable& table, RngStream& rng,
                          std::vector<std::string>* log = nullptr) {
    if (policy.sub_policies.empty()) throw ConfigError("apply_policy: policy has no sub-policies");
    const std::uint32_t pick =
        rng.next_below(static_cast<std::uint32_t>(policy.sub_policies.size()));
    Image out = img;
    for (const PolicyOp& op : policy.sub_policies[pick]) {
        if (rng.bernoulli(op.probability)) out = apply_policy_op(out, op, table, rng, log);
    }
    if (log && cutout_size > 0) {
        log->push_back("Cutout(size=" + std::to_string(cutout_size) + ")");
    }
    RngStream cutout_rng = rng.fork(rng_tag::cutout);
    return cutout(out, cutout_size, cutout_rng);
}

inline Image apply_policy(const Image& img, const Policy& policy, int cutout_size,
                          RngStream& rng) {
    static const MagnitudeTable table = default_magnitude_table();
    return apply_policy(img, policy, cutout_size, table, rng);
}

// ---------------------------------------------------------------------------
// Policy file format (see docs/FORMATS.md):
//   # comment
//   name = <identifier>
//   subpolicy = <Kind> <probability> <magnitude> | <Kind> <probability> <magnitude>
//   magnitude = <Kind> <lo> <hi> [signed] [relative]
// ---------------------------------------------------------------------------
struct PolicyFile {
    Policy policy;
    MagnitudeTable table = default_magnitude_table();
};

namespace detail {
inline PolicyOp parse_policy_op(std::istringstream& in, int line_no) {
    std::string kind;
    double prob = 0.0;
    int mag = 0;
    if (!(in >> kind >> prob >> mag)) {
        throw ConfigError("expected '<Kind> <probability> <magnitude>'", line_no, "subpolicy");
    }
    if (prob < 0.0 || prob > 1.0) {
        throw ConfigError("probability must be in [0,1]", line_no, "subpolicy");
    }
    if (mag < 0 || mag > 9) throw ConfigError("magnitude must be in 0..9", line_no, "subpolicy");
    PolicyOp op;
    op.kind = policy_op_from_name(kind);
    op.probability = prob;
    op.magnitude = mag;
    return op;
}
}  // namespace detail

inline PolicyFile parse_policy_text(std::istream& in) {
    PolicyFile out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        line_no += 1;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::size_t eq = line.find('=');
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (eq == std::string::npos) throw ConfigError("expected 'key = value'", line_no);
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        auto trim = [](std::string& s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            s = b == std::string::npos ? "" : s.substr(b, e - b + 1);
        };
        trim(key);
        trim(value);
        if (key == "name") {
            out.policy.name = value;
        } else if (key == "subpolicy") {
            const std::size_t bar = value.find('|');
            if (bar == std::string::npos) {
                throw ConfigError("expected two ops separated by '|'", line_no, "subpolicy");
            }
            std::istringstream first(value.substr(0, bar));
            std::istringstream second(value.substr(bar + 1));
            std::array<PolicyOp, 2> pair = {detail::parse_policy_op(first, line_no),
                                            detail::parse_policy_op(second, line_no)};
            out.policy.sub_policies.push_back(pair);
        } else if (key == "magnitude") {
            std::istringstream v(value);
            std::string kind;
            double lo = 0.0, hi = 0.0;
            if (!(v >> kind >> lo >> hi)) {
                throw ConfigError("expected '<Kind> <lo> <hi> [signed] [relative]'", line_no,
                                  "magnitude");
            }
            MagnitudeRange range{lo, hi, false, false};
            std::string flag;
            while (v >> flag) {
                if (flag == "signed") range.sign_flip = true;
                else if (flag == "relative") range.size_relative = true;
                else throw ConfigError("unknown flag '" + flag + "'", line_no, "magnitude");
            }
            out.table[policy_op_from_name(kind)] = range;
        } else {
            throw ConfigError("unknown key '" + key + "'", line_no);
        }
    }
    if (out.policy.sub_policies.empty()) throw ConfigError("policy file has no sub-policies");
    return out;
}

inline PolicyFile load_policy_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open policy file: " + path);
    try {
        return parse_policy_text(in);
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

}  // namespace auglab

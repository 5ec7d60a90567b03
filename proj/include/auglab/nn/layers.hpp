#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "auglab/nn/tensor.hpp"
#include "auglab/rng.hpp"

namespace auglab {

enum class Mode { train, eval };

// ---------------------------------------------------------------------------
// Layer interface. forward caches whatever backward needs when mode==train;
// a layer instance belongs to exactly one model and is driven by one
// training loop at a time.
// ---------------------------------------------------------------------------
template <typename T>
class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor<T> forward(const Tensor<T>& x, Mode mode) = 0;
    virtual Tensor<T> backward(const Tensor<T>& dy) = 0;
    virtual void collect_params(std::vector<ParamRef<T>>& out) { (void)out; }
    // All persistent state (parameters plus running buffers) in a fixed
    // order, for checkpointing and cross-precision copies.
    virtual void collect_state(std::vector<Tensor<T>*>& out) { (void)out; }
    // Hash of the nonlinearity's sign pattern from the last forward pass.
    // Finite-difference oracles compare it across perturbed evaluations to
    // detect kink crossings, where central differences are invalid. Only
    // the double instantiation computes it.
    virtual std::uint64_t nonlinearity_signature() const { return 0; }
    virtual std::string name() const = 0;
};

// ---------------------------------------------------------------------------
// Fixed per-channel input normalization: (x - mean[c]) / std[c].
// ---------------------------------------------------------------------------
template <typename T>
class InputNorm final : public Layer<T> {
public:
    InputNorm(std::vector<float> mean, std::vector<float> stddev)
        : mean_(std::move(mean)), std_(std::move(stddev)) {}

    Tensor<T> forward(const Tensor<T>& x, Mode) override {
        const int batch = x.dim(0);
        const int channels = x.dim(1);
        const std::size_t plane = x.count() / (static_cast<std::size_t>(batch) * channels);
        Tensor<T> out(x.shape);
        std::size_t i = 0;
        for (int b = 0; b < batch; ++b) {
            for (int c = 0; c < channels; ++c) {
                const T m = static_cast<T>(mean_[static_cast<std::size_t>(c)]);
                const T inv = T(1) / static_cast<T>(std_[static_cast<std::size_t>(c)]);
                for (std::size_t p = 0; p < plane; ++p, ++i) {
                    out.values[i] = (x.values[i] - m) * inv;
                }
            }
        }
        channels_ = channels;
        plane_ = plane;
        return out;
    }

    Tensor<T> backward(const Tensor<T>& dy) override {
        Tensor<T> dx(dy.shape);
        const int batch = dy.dim(0);
        std::size_t i = 0;
        for (int b = 0; b < batch; ++b) {
            for (int c = 0; c < channels_; ++c) {
                const T inv = T(1) / static_cast<T>(std_[static_cast<std::size_t>(c)]);
                for (std::size_t p = 0; p < plane_; ++p, ++i) dx.values[i] = dy.values[i] * inv;
            }
        }
        return dx;
    }

    std::string name() const override { return "input_norm"; }

private:
    std::vector<float> mean_, std_;
    int channels_ = 0;
    std::size_t plane_ = 0;
};

// ---------------------------------------------------------------------------
// 3x3 convolution, stride 1, zero padding 1: shape-preserving.
// ---------------------------------------------------------------------------
template <typename T>
class Conv3x3 final : public Layer<T> {
public:
    Conv3x3(int in_channels, int out_channels, RngStream& init_rng)
        : in_(in_channels), out_(out_channels),
          weight_({out_channels, in_channels, 3, 3}, true), bias_({out_channels}, true) {
        const double scale = std::sqrt(2.0 / (9.0 * in_channels));
        for (T& w : weight_.values) w = static_cast<T>(init_rng.normal() * scale);
    }

    Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
        const int batch = x.dim(0);
        const int h = x.dim(2);
        const int w = x.dim(3);
        if (mode == Mode::train) input_ = x;
        h_ = h;
        w_ = w;
        Tensor<T> out({batch, out_, h, w});
        for (int b = 0; b < batch; ++b) {
            for (int oc = 0; oc < out_; ++oc) {
                T* out_plane = plane_ptr(out, b, oc);
                const T bv = bias_.values[static_cast<std::size_t>(oc)];
                for (int i = 0; i < h * w; ++i) out_plane[i] = bv;
                for (int ic = 0; ic < in_; ++ic) {
                    const T* in_plane = plane_ptr(x, b, ic);
                    const T* kernel = kernel_ptr(weight_, oc, ic);
                    accumulate_correlation(in_plane, kernel, out_plane, h, w);
                }
            }
        }
        return out;
    }

    Tensor<T> backward(const Tensor<T>& dy) override {
        const int batch = dy.dim(0);
        const int h = h_;
        const int w = w_;
        Tensor<T> dx(input_.shape);
        for (int b = 0; b < batch; ++b) {
            for (int oc = 0; oc < out_; ++oc) {
                const T* dy_plane = plane_ptr(dy, b, oc);
                // bias gradient
                T acc = T(0);
                for (int i = 0; i < h * w; ++i) acc += dy_plane[i];
                bias_.grad[static_cast<std::size_t>(oc)] += acc;

                for (int ic = 0; ic < in_; ++ic) {
                    const T* in_plane = plane_ptr(input_, b, ic);
                    T* dx_plane = plane_ptr(dx, b, ic);
                    const T* kernel = kernel_ptr(weight_, oc, ic);
                    T* dkernel = kernel_grad_ptr(weight_, oc, ic);
                    for (int ky = 0; ky < 3; ++ky) {
                        for (int kx = 0; kx < 3; ++kx) {
                            const T wv = kernel[ky * 3 + kx];
                            T dw = T(0);
                            for (int y = 0; y < h; ++y) {
                                const int sy = y + ky - 1;
                                if (sy < 0 || sy >= h) continue;
                                const int x0 = std::max(0, 1 - kx);
                                const int x1 = std::min(w, w + 1 - kx);
                                const T* dyr = dy_plane + y * w;
                                const T* inr = in_plane + sy * w + (kx - 1);
                                T* dxr = dx_plane + sy * w + (kx - 1);
                                for (int x = x0; x < x1; ++x) {
                                    dw += dyr[x] * inr[x];
                                    dxr[x] += wv * dyr[x];
                                }
                            }
                            dkernel[ky * 3 + kx] += dw;
                        }
                    }
                }
            }
        }
        return dx;
    }

    void collect_params(std::vector<ParamRef<T>>& out) override {
        out.push_back({&weight_, true, "conv.weight"});
        out.push_back({&bias_, false, "conv.bias"});
    }

    void collect_state(std::vector<Tensor<T>*>& out) override {
        out.push_back(&weight_);
        out.push_back(&bias_);
    }

    std::string name() const override { return "conv3x3"; }

private:
    static T* plane_ptr(Tensor<T>& t, int b, int c) {
        const int h = t.dim(2);
        const int w = t.dim(3);
        return t.values.data() + (static_cast<std::size_t>(b) * t.dim(1) + c) * h * w;
    }
    static const T* plane_ptr(const Tensor<T>& t, int b, int c) {
        const int h = t.dim(2);
        const int w = t.dim(3);
        return t.values.data() + (static_cast<std::size_t>(b) * t.dim(1) + c) * h * w;
    }
    static const T* kernel_ptr(const Tensor<T>& wt, int oc, int ic) {
        return wt.values.data() + (static_cast<std::size_t>(oc) * wt.dim(1) + ic) * 9;
    }
    static T* kernel_grad_ptr(Tensor<T>& wt, int oc, int ic) {
        return wt.grad.data() + (static_cast<std::size_t>(oc) * wt.dim(1) + ic) * 9;
    }

    // out[y][x] += sum_{ky,kx} kernel[ky][kx] * in[y+ky-1][x+kx-1]
    static void accumulate_correlation(const T* in_plane, const T* kernel, T* out_plane, int h,
                                       int w) {
        for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
                const T wv = kernel[ky * 3 + kx];
                for (int y = 0; y < h; ++y) {
                    const int sy = y + ky - 1;
                    if (sy < 0 || sy >= h) continue;
                    const int x0 = std::max(0, 1 - kx);
                    const int x1 = std::min(w, w + 1 - kx);
                    const T* inr = in_plane + sy * w + (kx - 1);
                    T* outr = out_plane + y * w;
                    for (int x = x0; x < x1; ++x) outr[x] += wv * inr[x];
                }
            }
        }
    }

    int in_, out_;
    int h_ = 0, w_ = 0;
    Tensor<T> weight_, bias_;
    Tensor<T> input_;
};

// ---------------------------------------------------------------------------
// Batch normalization over (batch, spatial) per channel. Train mode
// normalizes with batch statistics and updates running statistics; eval
// mode uses the running ones.
// ---------------------------------------------------------------------------
template <typename T>
class BatchNorm final : public Layer<T> {
public:
    explicit BatchNorm(int channels, double momentum = 0.1, double eps = 1e-5)
        : channels_(channels), momentum_(momentum), eps_(eps),
          scale_({channels}, true), shift_({channels}, true),
          running_mean_({channels}), running_var_({channels}) {
        for (T& v : scale_.values) v = T(1);
        for (T& v : running_var_.values) v = T(1);
    }

    Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
        const int batch = x.dim(0);
        plane_ = x.count() / (static_cast<std::size_t>(batch) * channels_);
        const std::size_t per_channel = static_cast<std::size_t>(batch) * plane_;

        Tensor<T> out(x.shape);
        if (mode == Mode::train) {
            batch_inv_std_.assign(static_cast<std::size_t>(channels_), T(0));
            xhat_ = Tensor<T>(x.shape);
        }
        for (int c = 0; c < channels_; ++c) {
            T mean, inv_std, var;
            if (mode == Mode::train) {
                double sum = 0.0;
                for_channel(x, c, [&](std::size_t i) { sum += static_cast<double>(x.values[i]); });
                mean = static_cast<T>(sum / static_cast<double>(per_channel));
                double sq = 0.0;
                for_channel(x, c, [&](std::size_t i) {
                    const double d = static_cast<double>(x.values[i]) - static_cast<double>(mean);
                    sq += d * d;
                });
                var = static_cast<T>(sq / static_cast<double>(per_channel));
                inv_std = T(1) / std::sqrt(var + static_cast<T>(eps_));
                batch_inv_std_[static_cast<std::size_t>(c)] = inv_std;
                // running stats use the unbiased variance
                const double unbiased =
                    per_channel > 1
                        ? static_cast<double>(var) * per_channel / (per_channel - 1.0)
                        : static_cast<double>(var);
                auto& rm = running_mean_.values[static_cast<std::size_t>(c)];
                auto& rv = running_var_.values[static_cast<std::size_t>(c)];
                rm = static_cast<T>((1.0 - momentum_) * rm + momentum_ * static_cast<double>(mean));
                rv = static_cast<T>((1.0 - momentum_) * rv + momentum_ * unbiased);
            } else {
                mean = running_mean_.values[static_cast<std::size_t>(c)];
                inv_std = T(1) / std::sqrt(running_var_.values[static_cast<std::size_t>(c)] +
                                           static_cast<T>(eps_));
            }
            const T g = scale_.values[static_cast<std::size_t>(c)];
            const T b = shift_.values[static_cast<std::size_t>(c)];
            for_channel(x, c, [&](std::size_t i) {
                const T xh = (x.values[i] - mean) * inv_std;
                if (mode == Mode::train) xhat_.values[i] = xh;
                out.values[i] = g * xh + b;
            });
        }
        return out;
    }

    Tensor<T> backward(const Tensor<T>& dy) override {
        const int batch = dy.dim(0);
        const std::size_t per_channel = static_cast<std::size_t>(batch) * plane_;
        const T n = static_cast<T>(per_channel);
        Tensor<T> dx(dy.shape);
        for (int c = 0; c < channels_; ++c) {
            const T g = scale_.values[static_cast<std::size_t>(c)];
            const T inv_std = batch_inv_std_[static_cast<std::size_t>(c)];
            T sum_dy = T(0);
            T sum_dy_xhat = T(0);
            for_channel(dy, c, [&](std::size_t i) {
                sum_dy += dy.values[i];
                sum_dy_xhat += dy.values[i] * xhat_.values[i];
            });
            scale_.grad[static_cast<std::size_t>(c)] += sum_dy_xhat;
            shift_.grad[static_cast<std::size_t>(c)] += sum_dy;
            // dx = (g*inv_std/n) * (n*dy - sum_dy - xhat * sum_dy_xhat)
            const T k = g * inv_std / n;
            for_channel(dy, c, [&](std::size_t i) {
                dx.values[i] = k * (n * dy.values[i] - sum_dy - xhat_.values[i] * sum_dy_xhat);
            });
        }
        return dx;
    }

    void collect_params(std::vector<ParamRef<T>>& out) override {
        out.push_back({&scale_, false, "bn.scale"});
        out.push_back({&shift_, false, "bn.shift"});
    }

    void collect_state(std::vector<Tensor<T>*>& out) override {
        out.push_back(&scale_);
        out.push_back(&shift_);
        out.push_back(&running_mean_);
        out.push_back(&running_var_);
    }

    std::string name() const override { return "batch_norm"; }

private:
    template <typename F>
    void for_channel(const Tensor<T>& t, int c, F&& fn) const {
        const int batch = t.dim(0);
        for (int b = 0; b < batch; ++b) {
            const std::size_t base = (static_cast<std::size_t>(b) * channels_ + c) * plane_;
            for (std::size_t p = 0; p < plane_; ++p) fn(base + p);
        }
    }

    int channels_;
    double momentum_, eps_;
    Tensor<T> scale_, shift_, running_mean_, running_var_;
    Tensor<T> xhat_;
    std::vector<T> batch_inv_std_;
    std::size_t plane_ = 1;
};

template <typename T>
class Relu final : public Layer<T> {
public:
    Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
        Tensor<T> out(x.shape);
        for (std::size_t i = 0; i < x.count(); ++i) out.values[i] = x.values[i] > T(0) ? x.values[i] : T(0);
        if constexpr (std::is_same_v<T, double>) {
            std::uint64_t sig = 0;
            for (std::size_t i = 0; i < x.count(); ++i) {
                if (x.values[i] > 0.0) sig ^= sign_hash(i);
            }
            signature_ = sig;
        }
        if (mode == Mode::train) input_ = x;
        return out;
    }
    Tensor<T> backward(const Tensor<T>& dy) override {
        Tensor<T> dx(dy.shape);
        for (std::size_t i = 0; i < dy.count(); ++i) {
            dx.values[i] = input_.values[i] > T(0) ? dy.values[i] : T(0);
        }
        return dx;
    }
    std::uint64_t nonlinearity_signature() const override { return signature_; }
    std::string name() const override { return "relu"; }

private:
    static std::uint64_t sign_hash(std::size_t i) {
        std::uint64_t z = static_cast<std::uint64_t>(i) + 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    Tensor<T> input_;
    std::uint64_t signature_ = 0;
};

// Inverted dropout; active only in train mode with rate > 0.
template <typename T>
class Dropout final : public Layer<T> {
public:
    explicit Dropout(double rate) : rate_(rate) {}

    void set_rng(RngStream* rng) { rng_ = rng; }

    Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
        if (mode == Mode::eval || rate_ <= 0.0) {
            mask_.clear();
            return x;
        }
        if (!rng_) throw std::logic_error("dropout: no rng bound for train-mode forward");
        Tensor<T> out(x.shape);
        mask_.resize(x.count());
        const T keep_inv = static_cast<T>(1.0 / (1.0 - rate_));
        for (std::size_t i = 0; i < x.count(); ++i) {
            const bool keep = !rng_->bernoulli(rate_);
            mask_[i] = keep;
            out.values[i] = keep ? x.values[i] * keep_inv : T(0);
        }
        return out;
    }

    Tensor<T> backward(const Tensor<T>& dy) override {
        if (mask_.empty()) return dy;
        Tensor<T> dx(dy.shape);
        const T keep_inv = static_cast<T>(1.0 / (1.0 - rate_));
        for (std::size_t i = 0; i < dy.count(); ++i) {
            dx.values[i] = mask_[i] ? dy.values[i] * keep_inv : T(0);
        }
        return dx;
    }

    std::string name() const override { return "dropout"; }

private:
    double rate_;
    RngStream* rng_ = nullptr;
    std::vector<char> mask_;
};

// 2x2 average pooling, stride 2 (floor on odd inputs).
template <typename T>
class AvgPool2 final : public Layer<T> {
public:
    Tensor<T> forward(const Tensor<T>& x, Mode) override {
        const int batch = x.dim(0);
        const int channels = x.dim(1);
        in_h_ = x.dim(2);
        in_w_ = x.dim(3);
        const int oh = in_h_ / 2;
        const int ow = in_w_ / 2;
        Tensor<T> out({batch, channels, oh, ow});
        for (int b = 0; b < batch; ++b) {
            for (int c = 0; c < channels; ++c) {
                const T* in = x.values.data() +
                              (static_cast<std::size_t>(b) * channels + c) * in_h_ * in_w_;
                T* o = out.values.data() + (static_cast<std::size_t>(b) * channels + c) * oh * ow;
                for (int y = 0; y < oh; ++y) {
                    for (int x2 = 0; x2 < ow; ++x2) {
                        const T* r0 = in + (2 * y) * in_w_ + 2 * x2;
                        const T* r1 = r0 + in_w_;
                        o[y * ow + x2] = (r0[0] + r0[1] + r1[0] + r1[1]) * T(0.25);
                    }
                }
            }
        }
        return out;
    }

    Tensor<T> backward(const Tensor<T>& dy) override {
        const int batch = dy.dim(0);
        const int channels = dy.dim(1);
        const int oh = dy.dim(2);
        const int ow = dy.dim(3);
        Tensor<T> dx({batch, channels, in_h_, in_w_});
        for (int b = 0; b < batch; ++b) {
            for (int c = 0; c < channels; ++c) {
                const T* d = dy.values.data() + (static_cast<std::size_t>(b) * channels + c) * oh * ow;
                T* o = dx.values.data() +
                       (static_cast<std::size_t>(b) * channels + c) * in_h_ * in_w_;
                for (int y = 0; y < oh; ++y) {
                    for (int x2 = 0; x2 < ow; ++x2) {
                        const T v = d[y * ow + x2] * T(0.25);
                        T* r0 = o + (2 * y) * in_w_ + 2 * x2;
                        T* r1 = r0 + in_w_;
                        r0[0] += v;
                        r0[1] += v;
                        r1[0] += v;
                        r1[1] += v;
                    }
                }
            }
        }
        return dx;
    }

    std::string name() const override { return "avg_pool2"; }

private:
    int in_h_ = 0, in_w_ = 0;
};

// [B,C,H,W] -> [B,C] global average.
template <typename T>
class GlobalAvgPool final : public Layer<T> {
public:
    Tensor<T> forward(const Tensor<T>& x, Mode) override {
        const int batch = x.dim(0);
        const int channels = x.dim(1);
        plane_ = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
        h_ = x.dim(2);
        w_ = x.dim(3);
        Tensor<T> out({batch, channels});
        for (int b = 0; b < batch; ++b) {
            for (int c = 0; c < channels; ++c) {
                const T* in = x.values.data() + (static_cast<std::size_t>(b) * channels + c) * plane_;
                T acc = T(0);
                for (std::size_t i = 0; i < plane_; ++i) acc += in[i];
                out.values[static_cast<std::size_t>(b) * channels + c] =
                    acc / static_cast<T>(plane_);
            }
        }
        return out;
    }

    Tensor<T> backward(const Tensor<T>& dy) override {
        const int batch = dy.dim(0);
        const int channels = dy.dim(1);
        Tensor<T> dx({batch, channels, h_, w_});
        for (int b = 0; b < batch; ++b) {
            for (int c = 0; c < channels; ++c) {
                const T v = dy.values[static_cast<std::size_t>(b) * channels + c] /
                            static_cast<T>(plane_);
                T* o = dx.values.data() + (static_cast<std::size_t>(b) * channels + c) * plane_;
                for (std::size_t i = 0; i < plane_; ++i) o[i] = v;
            }
        }
        return dx;
    }

    std::string name() const override { return "global_avg_pool"; }

private:
    std::size_t plane_ = 1;
    int h_ = 0, w_ = 0;
};

// [B,C,H,W] -> [B,C*H*W]
template <typename T>
class Flatten final : public Layer<T> {
public:
    Tensor<T> forward(const Tensor<T>& x, Mode) override {
        shape_ = x.shape;
        Tensor<T> out({x.dim(0), static_cast<int>(x.count()) / x.dim(0)});
        out.values = x.values;
        return out;
    }
    Tensor<T> backward(const Tensor<T>& dy) override {
        Tensor<T> dx(shape_);
        dx.values = dy.values;
        return dx;
    }
    std::string name() const override { return "flatten"; }

private:
    std::vector<int> shape_;
};

template <typename T>
class Dense final : public Layer<T> {
public:
    Dense(int in_features, int out_features, RngStream& init_rng)
        : in_(in_features), out_(out_features),
          weight_({out_features, in_features}, true), bias_({out_features}, true) {
        const double scale = std::sqrt(2.0 / in_features);
        for (T& w : weight_.values) w = static_cast<T>(init_rng.normal() * scale);
    }

    Tensor<T> forward(const Tensor<T>& x, Mode mode) override {
        const int batch = x.dim(0);
        if (mode == Mode::train) input_ = x;
        Tensor<T> out({batch, out_});
        for (int b = 0; b < batch; ++b) {
            const T* xin = x.values.data() + static_cast<std::size_t>(b) * in_;
            T* o = out.values.data() + static_cast<std::size_t>(b) * out_;
            for (int j = 0; j < out_; ++j) {
                const T* wrow = weight_.values.data() + static_cast<std::size_t>(j) * in_;
                T acc = bias_.values[static_cast<std::size_t>(j)];
                for (int i = 0; i < in_; ++i) acc += wrow[i] * xin[i];
                o[j] = acc;
            }
        }
        return out;
    }

    Tensor<T> backward(const Tensor<T>& dy) override {
        const int batch = dy.dim(0);
        Tensor<T> dx({batch, in_});
        for (int b = 0; b < batch; ++b) {
            const T* d = dy.values.data() + static_cast<std::size_t>(b) * out_;
            const T* xin = input_.values.data() + static_cast<std::size_t>(b) * in_;
            T* dxr = dx.values.data() + static_cast<std::size_t>(b) * in_;
            for (int j = 0; j < out_; ++j) {
                const T dj = d[j];
                bias_.grad[static_cast<std::size_t>(j)] += dj;
                const T* wrow = weight_.values.data() + static_cast<std::size_t>(j) * in_;
                T* gwrow = weight_.grad.data() + static_cast<std::size_t>(j) * in_;
                for (int i = 0; i < in_; ++i) {
                    gwrow[i] += dj * xin[i];
                    dxr[i] += dj * wrow[i];
                }
            }
        }
        return dx;
    }

    void collect_params(std::vector<ParamRef<T>>& out) override {
        out.push_back({&weight_, true, "dense.weight"});
        out.push_back({&bias_, false, "dense.bias"});
    }

    void collect_state(std::vector<Tensor<T>*>& out) override {
        out.push_back(&weight_);
        out.push_back(&bias_);
    }

    std::string name() const override { return "dense"; }

private:
    int in_, out_;
    Tensor<T> weight_, bias_;
    Tensor<T> input_;
};

}  // namespace auglab

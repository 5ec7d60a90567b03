#pragma once

#include <algorithm>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "auglab/dataset.hpp"
#include "auglab/nn/layers.hpp"
#include "auglab/nn/tensor.hpp"
#include "auglab/rng.hpp"

namespace auglab {

// ---------------------------------------------------------------------------
// ModelSpec and Model: a small MLP or a SmallConvNet built from blocks of
// [conv3x3 -> batch-norm -> relu -> 2x2 avg pool], ending in global average
// pooling and a dense classifier. Mix points are the places where the
// manifold-mix hook may blend activations: point 0 is the raw input (before
// normalization), point i is the output of block / hidden layer i.
// ---------------------------------------------------------------------------

enum class ModelKind { mlp, convnet };

struct ModelSpec {
    ModelKind kind = ModelKind::convnet;
    std::vector<int> widths = {8, 16};  // conv channels per block, or MLP hidden widths
    int num_classes = 4;
    int in_channels = 3;
    int in_height = 32;
    int in_width = 32;
    std::vector<float> norm_mean;  // per channel; defaults to 0.5 when empty
    std::vector<float> norm_std;   // per channel; defaults to 0.5 when empty
    std::vector<int> eligible_mix_layers = {0, 1};
    double drop_rate = 0.0;

    int input_count() const { return in_channels * in_height * in_width; }

    void validate() const {
        if (num_classes < 2) throw std::invalid_argument("model: need >= 2 classes");
        if (in_channels < 1 || in_height < 1 || in_width < 1) {
            throw std::invalid_argument("model: bad input shape");
        }
        for (int w : widths) {
            if (w < 1) throw std::invalid_argument("model: widths must be positive");
        }
        if (!(drop_rate >= 0.0 && drop_rate < 1.0)) {
            throw std::invalid_argument("model: drop_rate must be in [0,1)");
        }
        const int points = static_cast<int>(widths.size());
        for (int l : eligible_mix_layers) {
            if (l < 0 || l > points) {
                throw std::invalid_argument("model: eligible mix layer " + std::to_string(l) +
                                            " out of range 0.." + std::to_string(points));
            }
        }
    }
};

// Blend request applied at one mix point during a forward pass:
// h[i] <- lambda * h[i] + (1 - lambda) * h[perm[i]].
struct MixHook {
    int layer = 0;
    float lambda = 1.0f;
    std::vector<int> perm;
};

template <typename T>
class Model {
public:
    explicit Model(const ModelSpec& spec, RngStream init_rng) : spec_(spec) {
        spec_.validate();
        if (spec_.norm_mean.empty()) {
            spec_.norm_mean.assign(static_cast<std::size_t>(spec_.in_channels), 0.5f);
        }
        if (spec_.norm_std.empty()) {
            spec_.norm_std.assign(static_cast<std::size_t>(spec_.in_channels), 0.5f);
        }
        build(init_rng);
    }

    const ModelSpec& spec() const { return spec_; }

    // Number of valid mix points (input plus one per block / hidden layer).
    int num_mix_points() const { return static_cast<int>(spec_.widths.size()) + 1; }

    // Logits for a [B,C,H,W] batch. In train mode every layer caches what
    // its backward needs; dropout (when enabled) draws from drop_rng.
    Tensor<T> forward(const Tensor<T>& input, Mode mode, const MixHook* hook = nullptr,
                      RngStream* drop_rng = nullptr) {
        if (input.shape.size() != 4 || input.dim(1) != spec_.in_channels ||
            input.dim(2) != spec_.in_height || input.dim(3) != spec_.in_width) {
            throw std::invalid_argument("forward: batch shape does not match model input");
        }
        if (hook) {
            const auto& ok = spec_.eligible_mix_layers;
            if (std::find(ok.begin(), ok.end(), hook->layer) == ok.end()) {
                throw std::invalid_argument("forward: mix hook at non-eligible layer " +
                                            std::to_string(hook->layer));
            }
            if (static_cast<int>(hook->perm.size()) != input.dim(0)) {
                throw std::invalid_argument("forward: mix hook permutation size mismatch");
            }
        }
        for (auto& d : dropouts_) d->set_rng(drop_rng);
        applied_hook_ = hook && mode == Mode::train ? std::optional<MixHook>(*hook) : std::nullopt;

        Tensor<T> h = input;
        if (hook && hook->layer == 0) h = mix_forward(h, *hook);
        for (std::size_t li = 0; li < layers_.size(); ++li) {
            h = layers_[li]->forward(h, mode);
            if (hook && mix_point_after_[li] == hook->layer) h = mix_forward(h, *hook);
        }
        return h;
    }

    // Backpropagates dL/dlogits through the cached forward pass and
    // accumulates parameter gradients.
    Tensor<T> backward(const Tensor<T>& dlogits) {
        Tensor<T> d = dlogits;
        for (std::size_t li = layers_.size(); li-- > 0;) {
            if (applied_hook_ && mix_point_after_[li] == applied_hook_->layer) {
                d = mix_backward(d, *applied_hook_);
            }
            d = layers_[li]->backward(d);
        }
        if (applied_hook_ && applied_hook_->layer == 0) d = mix_backward(d, *applied_hook_);
        return d;
    }

    std::vector<ParamRef<T>> params() {
        std::vector<ParamRef<T>> out;
        for (auto& l : layers_) l->collect_params(out);
        return out;
    }

    std::vector<Tensor<T>*> state_tensors() {
        std::vector<Tensor<T>*> out;
        for (auto& l : layers_) l->collect_state(out);
        return out;
    }

    // Combined sign pattern of all nonlinearities from the last forward.
    std::uint64_t nonlinearity_signature() const {
        std::uint64_t sig = 0;
        for (const auto& l : layers_) sig ^= l->nonlinearity_signature();
        return sig;
    }

    void zero_grad() {
        for (auto ref : params()) ref.tensor->zero_grad();
    }

    std::size_t num_params() {
        std::size_t n = 0;
        for (auto ref : params()) n += ref.tensor->count();
        return n;
    }

    // Exact element-wise copy of all persistent state from a model of a
    // different scalar type (used by the finite-difference oracle).
    template <typename U>
    void copy_state_from(Model<U>& other) {
        auto dst = state_tensors();
        auto src = other.state_tensors();
        if (dst.size() != src.size()) throw std::logic_error("copy_state_from: layout mismatch");
        for (std::size_t i = 0; i < dst.size(); ++i) {
            if (dst[i]->count() != src[i]->count()) {
                throw std::logic_error("copy_state_from: tensor size mismatch");
            }
            for (std::size_t j = 0; j < dst[i]->count(); ++j) {
                dst[i]->values[j] = static_cast<T>(src[i]->values[j]);
            }
        }
    }

private:
    static Tensor<T> mix_forward(const Tensor<T>& h, const MixHook& hook) {
        const int batch = h.dim(0);
        const std::size_t row = h.count() / static_cast<std::size_t>(batch);
        Tensor<T> out(h.shape);
        const T lam = static_cast<T>(hook.lambda);
        for (int i = 0; i < batch; ++i) {
            const T* a = h.values.data() + static_cast<std::size_t>(i) * row;
            const T* b = h.values.data() +
                         static_cast<std::size_t>(hook.perm[static_cast<std::size_t>(i)]) * row;
            T* o = out.values.data() + static_cast<std::size_t>(i) * row;
            for (std::size_t j = 0; j < row; ++j) o[j] = lam * a[j] + (T(1) - lam) * b[j];
        }
        return out;
    }

    // d/dh of the blend: dh[j] = lambda*dmix[j] + (1-lambda)*dmix[perm^-1(j)]
    static Tensor<T> mix_backward(const Tensor<T>& dmix, const MixHook& hook) {
        const int batch = dmix.dim(0);
        const std::size_t row = dmix.count() / static_cast<std::size_t>(batch);
        std::vector<int> inv(static_cast<std::size_t>(batch));
        for (int i = 0; i < batch; ++i) inv[static_cast<std::size_t>(hook.perm[static_cast<std::size_t>(i)])] = i;
        Tensor<T> out(dmix.shape);
        const T lam = static_cast<T>(hook.lambda);
        for (int j = 0; j < batch; ++j) {
            const T* dj = dmix.values.data() + static_cast<std::size_t>(j) * row;
            const T* di = dmix.values.data() +
                          static_cast<std::size_t>(inv[static_cast<std::size_t>(j)]) * row;
            T* o = out.values.data() + static_cast<std::size_t>(j) * row;
            for (std::size_t k = 0; k < row; ++k) o[k] = lam * dj[k] + (T(1) - lam) * di[k];
        }
        return out;
    }

    void add_layer(std::unique_ptr<Layer<T>> layer, int mix_point = -1) {
        layers_.push_back(std::move(layer));
        mix_point_after_.push_back(mix_point);
    }

    void build(RngStream& rng) {
        add_layer(std::make_unique<InputNorm<T>>(spec_.norm_mean, spec_.norm_std));
        if (spec_.kind == ModelKind::convnet) {
            int channels = spec_.in_channels;
            int h = spec_.in_height;
            int w = spec_.in_width;
            for (std::size_t b = 0; b < spec_.widths.size(); ++b) {
                const int out_ch = spec_.widths[b];
                add_layer(std::make_unique<Conv3x3<T>>(channels, out_ch, rng));
                add_layer(std::make_unique<BatchNorm<T>>(out_ch));
                add_layer(std::make_unique<Relu<T>>());
                if (h >= 2 && w >= 2) {
                    add_layer(std::make_unique<AvgPool2<T>>(), static_cast<int>(b) + 1);
                    h /= 2;
                    w /= 2;
                } else {
                    mix_point_after_.back() = static_cast<int>(b) + 1;
                }
                channels = out_ch;
            }
            if (spec_.drop_rate > 0.0) add_dropout();
            add_layer(std::make_unique<GlobalAvgPool<T>>());
            add_layer(std::make_unique<Dense<T>>(channels, spec_.num_classes, rng));
        } else {
            add_layer(std::make_unique<Flatten<T>>());
            int features = spec_.input_count();
            for (std::size_t i = 0; i < spec_.widths.size(); ++i) {
                add_layer(std::make_unique<Dense<T>>(features, spec_.widths[i], rng));
                add_layer(std::make_unique<Relu<T>>(), static_cast<int>(i) + 1);
                if (spec_.drop_rate > 0.0) add_dropout();
                features = spec_.widths[i];
            }
            add_layer(std::make_unique<Dense<T>>(features, spec_.num_classes, rng));
        }
    }

    void add_dropout() {
        auto layer = std::make_unique<Dropout<T>>(spec_.drop_rate);
        dropouts_.push_back(layer.get());
        add_layer(std::move(layer));
    }

    ModelSpec spec_;
    std::vector<std::unique_ptr<Layer<T>>> layers_;
    std::vector<int> mix_point_after_;  // mix point index fired after layer i, or -1
    std::vector<Dropout<T>*> dropouts_;
    std::optional<MixHook> applied_hook_;
};

// Assembles a [B,C,H,W] tensor and the label list from samples.
template <typename T>
inline Tensor<T> make_batch_tensor(const std::vector<Sample>& batch) {
    const Image& first = batch.front().image;
    Tensor<T> out({static_cast<int>(batch.size()), first.channels, first.height, first.width});
    std::size_t offset = 0;
    for (const Sample& s : batch) {
        for (std::size_t i = 0; i < s.image.pixels.size(); ++i) {
            out.values[offset + i] = static_cast<T>(s.image.pixels[i]);
        }
        offset += s.image.pixels.size();
    }
    return out;
}

inline std::vector<LabelDist> batch_labels(const std::vector<Sample>& batch) {
    std::vector<LabelDist> out;
    out.reserve(batch.size());
    for (const Sample& s : batch) out.push_back(s.label);
    return out;
}

}  // namespace auglab

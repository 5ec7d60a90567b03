#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "auglab/errors.hpp"
#include "auglab/image.hpp"
#include "auglab/rng.hpp"

namespace auglab {

// ---------------------------------------------------------------------------
// Labels, samples, datasets.
// ---------------------------------------------------------------------------

// Per-class probability vector. Hard labels are the one-hot special case.
struct LabelDist {
    std::vector<float> probs;

    int num_classes() const { return static_cast<int>(probs.size()); }

    bool valid(float eps = 1e-6f) const {
        double sum = 0.0;
        for (float p : probs) {
            if (!(p >= 0.0f)) return false;
            sum += p;
        }
        return std::fabs(sum - 1.0) <= eps;
    }

    int argmax() const {
        int best = 0;
        for (int c = 1; c < num_classes(); ++c) {
            if (probs[static_cast<std::size_t>(c)] > probs[static_cast<std::size_t>(best)]) best = c;
        }
        return best;  // ties resolve to the lowest class index
    }
};

inline LabelDist one_hot(int class_index, int num_classes) {
    if (class_index < 0 || class_index >= num_classes) {
        throw std::out_of_range("one_hot: class index " + std::to_string(class_index) +
                                " out of range for " + std::to_string(num_classes) + " classes");
    }
    LabelDist label;
    label.probs.assign(static_cast<std::size_t>(num_classes), 0.0f);
    label.probs[static_cast<std::size_t>(class_index)] = 1.0f;
    return label;
}

struct Sample {
    Image image;
    LabelDist label;
};

// Immutable after construction; safe to share across threads.
struct Dataset {
    std::vector<Sample> samples;
    int num_classes = 0;
    std::string name;

    std::size_t size() const { return samples.size(); }

    void validate() const {
        if (samples.empty()) return;
        const Image& first = samples.front().image;
        for (const Sample& s : samples) {
            if (!s.image.same_shape(first)) throw FormatError("dataset " + name + ": mixed image shapes");
            if (s.label.num_classes() != num_classes) {
                throw FormatError("dataset " + name + ": label length mismatch");
            }
        }
    }
};

// ---------------------------------------------------------------------------
// Batching: one seeded permutation per epoch, split into index batches. The
// final batch may be short. Depends only on the rng path handed in.
// ---------------------------------------------------------------------------
inline std::vector<std::vector<int>> epoch_batches(const Dataset& dataset, int batch_size,
                                                   RngStream rng) {
    if (dataset.samples.empty()) throw std::invalid_argument("epoch_batches: empty dataset");
    if (batch_size < 1) throw std::invalid_argument("epoch_batches: batch_size must be >= 1");
    RngStream shuffle_rng = rng.fork(rng_tag::shuffle);
    const std::vector<int> perm = random_permutation(static_cast<int>(dataset.size()), shuffle_rng);
    std::vector<std::vector<int>> batches;
    for (std::size_t start = 0; start < perm.size(); start += static_cast<std::size_t>(batch_size)) {
        const std::size_t stop = std::min(perm.size(), start + static_cast<std::size_t>(batch_size));
        batches.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start),
                             perm.begin() + static_cast<std::ptrdiff_t>(stop));
    }
    return batches;
}

// Per-channel mean and standard deviation over a dataset, used to fill the
// model's input normalization constants.
inline std::pair<std::vector<float>, std::vector<float>> channel_stats(const Dataset& dataset) {
    if (dataset.samples.empty()) throw std::invalid_argument("channel_stats: empty dataset");
    const int channels = dataset.samples.front().image.channels;
    std::vector<double> sum(static_cast<std::size_t>(channels), 0.0);
    std::vector<double> sum_sq(static_cast<std::size_t>(channels), 0.0);
    std::size_t count = 0;
    for (const Sample& s : dataset.samples) {
        const std::size_t plane = s.image.plane();
        for (int c = 0; c < channels; ++c) {
            const float* p = s.image.pixels.data() + static_cast<std::size_t>(c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                sum[static_cast<std::size_t>(c)] += p[i];
                sum_sq[static_cast<std::size_t>(c)] += static_cast<double>(p[i]) * p[i];
            }
        }
        count += s.image.plane();
    }
    std::vector<float> mean(static_cast<std::size_t>(channels));
    std::vector<float> stddev(static_cast<std::size_t>(channels));
    for (int c = 0; c < channels; ++c) {
        const double m = sum[static_cast<std::size_t>(c)] / static_cast<double>(count);
        double var = sum_sq[static_cast<std::size_t>(c)] / static_cast<double>(count) - m * m;
        if (var < 1e-8) var = 1e-8;
        mean[static_cast<std::size_t>(c)] = static_cast<float>(m);
        stddev[static_cast<std::size_t>(c)] = static_cast<float>(std::sqrt(var));
    }
    return {mean, stddev};
}

}  // namespace auglab

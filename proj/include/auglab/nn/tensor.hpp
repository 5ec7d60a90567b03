#pragma once

#include <cstddef>
#include <numeric>
#include <vector>

namespace auglab {

// ---------------------------------------------------------------------------
// Tensor<T>: shape plus flat storage, with an optional gradient buffer of
// the same length for parameters. T is float in the production path; the
// finite-difference oracle instantiates double.
// ---------------------------------------------------------------------------
template <typename T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> values;
    std::vector<T> grad;

    Tensor() = default;
    explicit Tensor(std::vector<int> dims, bool with_grad = false) : shape(std::move(dims)) {
        values.assign(count(), T(0));
        if (with_grad) grad.assign(count(), T(0));
    }

    std::size_t count() const {
        std::size_t n = 1;
        for (int d : shape) n *= static_cast<std::size_t>(d);
        return n;
    }

    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }

    T* data() { return values.data(); }
    const T* data() const { return values.data(); }

    void zero_grad() {
        for (T& g : grad) g = T(0);
    }
};

template <typename T>
struct ParamRef {
    Tensor<T>* tensor = nullptr;
    bool weight_decay = true;  // false for biases and batch-norm scale/shift
    const char* name = "";
};

}  // namespace auglab

#pragma once

#include <cstdint>
#include <initializer_list>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "saflab/errors.hpp"

namespace saflab {

// Dense row-major FP32 tensor. Shape is held alongside a flat buffer whose
// length always equals the product of the shape.
struct Tensor {
    std::vector<int64_t> shape;
    std::vector<float> data;

    Tensor() = default;

    explicit Tensor(std::vector<int64_t> s) : shape(std::move(s)) {
        data.assign(static_cast<size_t>(numel_of(shape)), 0.0f);
    }

    Tensor(std::vector<int64_t> s, std::vector<float> values)
        : shape(std::move(s)), data(std::move(values)) {
        require(static_cast<int64_t>(data.size()) == numel_of(shape), ErrorCategory::dimension,
                "tensor data length does not match shape");
    }

    static int64_t numel_of(const std::vector<int64_t>& s) {
        int64_t n = 1;
        for (int64_t d : s) {
            require(d >= 0, ErrorCategory::dimension, "negative tensor dimension");
            n *= d;
        }
        return n;
    }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    int64_t dim(int i) const { return shape[static_cast<size_t>(i)]; }

    // 2-D accessors (row-major).
    float& operator()(int64_t r, int64_t c) { return data[static_cast<size_t>(r * shape[1] + c)]; }
    float operator()(int64_t r, int64_t c) const { return data[static_cast<size_t>(r * shape[1] + c)]; }

    void fill(float v) { std::fill(data.begin(), data.end(), v); }

    Tensor reshaped(std::vector<int64_t> new_shape) const {
        require(numel_of(new_shape) == numel(), ErrorCategory::dimension,
                "reshape changes element count");
        Tensor out;
        out.shape = std::move(new_shape);
        out.data = data;
        return out;
    }

    std::string shape_str() const {
        std::ostringstream os;
        os << '[';
        for (size_t i = 0; i < shape.size(); ++i) {
            if (i) os << 'x';
            os << shape[i];
        }
        os << ']';
        return os.str();
    }
};

// C[M,N] = A[M,K] * B[K,N], FP32 accumulation.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    require(a.rank() == 2 && b.rank() == 2, ErrorCategory::dimension,
            "matmul expects rank-2 tensors");
    require(a.shape[1] == b.shape[0], ErrorCategory::dimension,
            "matmul inner dimensions disagree: " + a.shape_str() + " vs " + b.shape_str());
    const int64_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
    Tensor c({m, n});
    for (int64_t i = 0; i < m; ++i) {
        const float* arow = &a.data[static_cast<size_t>(i * k)];
        float* crow = &c.data[static_cast<size_t>(i * n)];
        for (int64_t p = 0; p < k; ++p) {
            const float av = arow[p];
            const float* brow = &b.data[static_cast<size_t>(p * n)];
            for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

inline void add_inplace(Tensor& a, const Tensor& b) {
    require(a.shape == b.shape, ErrorCategory::dimension, "add shape mismatch");
    for (size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

inline void scale_inplace(Tensor& a, float s) {
    for (float& v : a.data) v *= s;
}

}  // namespace saflab

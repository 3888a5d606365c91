#pragma once

#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "ser/errors.hpp"

namespace ser::nn {

// Dense row-major N-d array. Activations are [B, C, L] or [B, F];
// parameters use whatever shape their layer documents.
template <typename T>
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
        data.assign(numel(shape), T(0));
    }

    static std::size_t numel(const std::vector<std::size_t>& s) {
        return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
    }

    std::size_t size() const { return data.size(); }
    std::size_t dim(std::size_t i) const { return shape[i]; }
    std::size_t rank() const { return shape.size(); }

    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }

    // [B, F]
    T& at2(std::size_t b, std::size_t f) { return data[b * shape[1] + f]; }
    T at2(std::size_t b, std::size_t f) const { return data[b * shape[1] + f]; }

    // [B, C, L]
    T& at3(std::size_t b, std::size_t c, std::size_t l) {
        return data[(b * shape[1] + c) * shape[2] + l];
    }
    T at3(std::size_t b, std::size_t c, std::size_t l) const {
        return data[(b * shape[1] + c) * shape[2] + l];
    }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    Tensor<T> zeros_like() const { return Tensor<T>(shape); }

    bool same_shape(const Tensor<T>& other) const { return shape == other.shape; }
};

inline std::string shape_string(const std::vector<std::size_t>& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

template <typename T>
void require_rank(const Tensor<T>& t, std::size_t rank, const std::string& layer) {
    if (t.rank() != rank) {
        throw ShapeError(layer + ": expected rank " + std::to_string(rank) + " input, got " +
                         shape_string(t.shape));
    }
}

}  // namespace ser::nn

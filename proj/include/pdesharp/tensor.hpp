#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace pdesharp {

// Dense row-major tensor of 64-bit reals. The whole artifact works in doubles.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
        data.assign(element_count(shape), 0.0);
    }

    static std::size_t element_count(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (auto d : s) n *= d;
        return n;
    }

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }

    double* ptr() { return data.data(); }
    const double* ptr() const { return data.data(); }

    std::size_t offset(std::initializer_list<std::size_t> idx) const {
        if (idx.size() != shape.size()) throw std::logic_error("tensor index rank mismatch");
        std::size_t off = 0;
        std::size_t axis = 0;
        for (auto i : idx) {
            if (i >= shape[axis]) throw std::out_of_range("tensor index out of range");
            off = off * shape[axis] + i;
            ++axis;
        }
        return off;
    }

    double& at(std::initializer_list<std::size_t> idx) { return data[offset(idx)]; }
    double at(std::initializer_list<std::size_t> idx) const { return data[offset(idx)]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

// A tensor plus names for its component axis (empty for scalar fields).
struct SolutionField {
    Tensor data;
    std::vector<std::string> component_names;
};

}  // namespace pdesharp

#pragma once

#include <cstddef>
#include <vector>

#include "dyad/common.hpp"

namespace dyad {

// Dense row-major double matrix.
struct Matrix {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(size_t r, size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(size_t r, size_t c) { return data[r * cols + c]; }
    double operator()(size_t r, size_t c) const { return data[r * cols + c]; }

    double* row_ptr(size_t r) { return data.data() + r * cols; }
    const double* row_ptr(size_t r) const { return data.data() + r * cols; }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    bool operator==(const Matrix& o) const {
        return rows == o.rows && cols == o.cols && data == o.data;
    }
};

}  // namespace dyad

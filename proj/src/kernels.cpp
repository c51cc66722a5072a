#include "dyad/kernels.hpp"

#include <cassert>
#include <cmath>

namespace dyad::kernels {

namespace serial {

void matmul_nn(const Matrix& a, const Matrix& b, Matrix& out) {
    assert(a.cols == b.rows);
    out = Matrix(a.rows, b.cols);
    for (size_t i = 0; i < a.rows; ++i) {
        double* orow = out.row_ptr(i);
        for (size_t k = 0; k < a.cols; ++k) {
            double aik = a(i, k);
            const double* brow = b.row_ptr(k);
            for (size_t j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
        }
    }
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out) {
    assert(a.cols == b.cols);
    out = Matrix(a.rows, b.rows);
    for (size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row_ptr(i);
        for (size_t j = 0; j < b.rows; ++j) {
            const double* brow = b.row_ptr(j);
            double sum = 0.0;
            for (size_t k = 0; k < a.cols; ++k) sum += arow[k] * brow[k];
            out(i, j) = sum;
        }
    }
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out) {
    assert(a.rows == b.rows);
    out = Matrix(a.cols, b.cols);
    for (size_t i = 0; i < a.cols; ++i) {
        double* orow = out.row_ptr(i);
        for (size_t k = 0; k < a.rows; ++k) {
            double aki = a(k, i);
            const double* brow = b.row_ptr(k);
            for (size_t j = 0; j < b.cols; ++j) orow[j] += aki * brow[j];
        }
    }
}

void add_bias_rows(Matrix& m, const std::vector<double>& bias) {
    assert(m.cols == bias.size());
    for (size_t i = 0; i < m.rows; ++i) {
        double* row = m.row_ptr(i);
        for (size_t j = 0; j < m.cols; ++j) row[j] += bias[j];
    }
}

void relu_inplace(Matrix& m) {
    for (double& v : m.data)
        if (v < 0.0) v = 0.0;
}

void relu_backward(const Matrix& activation, Matrix& grad) {
    assert(activation.same_shape(grad));
    for (size_t i = 0; i < grad.data.size(); ++i)
        if (activation.data[i] <= 0.0) grad.data[i] = 0.0;
}

void softmax_rows(Matrix& m) {
    for (size_t i = 0; i < m.rows; ++i) {
        double* row = m.row_ptr(i);
        double mx = row[0];
        for (size_t j = 1; j < m.cols; ++j)
            if (row[j] > mx) mx = row[j];
        double sum = 0.0;
        for (size_t j = 0; j < m.cols; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        for (size_t j = 0; j < m.cols; ++j) row[j] /= sum;
    }
}

void col_sums(const Matrix& m, std::vector<double>& out) {
    out.assign(m.cols, 0.0);
    for (size_t i = 0; i < m.rows; ++i) {
        const double* row = m.row_ptr(i);
        for (size_t j = 0; j < m.cols; ++j) out[j] += row[j];
    }
}

}  // namespace serial

// Parallel variants. Each output row (or column for col_sums) is one task
// whose inner reduction runs in the same order as the serial reference.

void matmul_nn(const Matrix& a, const Matrix& b, Matrix& out) {
    assert(a.cols == b.rows);
    out = Matrix(a.rows, b.cols);
    const int64_t n = static_cast<int64_t>(a.rows);
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) {
        double* orow = out.row_ptr(i);
        for (size_t k = 0; k < a.cols; ++k) {
            double aik = a(i, k);
            const double* brow = b.row_ptr(k);
            for (size_t j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
        }
    }
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out) {
    assert(a.cols == b.cols);
    out = Matrix(a.rows, b.rows);
    const int64_t n = static_cast<int64_t>(a.rows);
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) {
        const double* arow = a.row_ptr(i);
        for (size_t j = 0; j < b.rows; ++j) {
            const double* brow = b.row_ptr(j);
            double sum = 0.0;
            for (size_t k = 0; k < a.cols; ++k) sum += arow[k] * brow[k];
            out(i, j) = sum;
        }
    }
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out) {
    assert(a.rows == b.rows);
    out = Matrix(a.cols, b.cols);
    const int64_t n = static_cast<int64_t>(a.cols);
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) {
        double* orow = out.row_ptr(i);
        for (size_t k = 0; k < a.rows; ++k) {
            double aki = a(k, i);
            const double* brow = b.row_ptr(k);
            for (size_t j = 0; j < b.cols; ++j) orow[j] += aki * brow[j];
        }
    }
}

void add_bias_rows(Matrix& m, const std::vector<double>& bias) {
    assert(m.cols == bias.size());
    const int64_t n = static_cast<int64_t>(m.rows);
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) {
        double* row = m.row_ptr(i);
        for (size_t j = 0; j < m.cols; ++j) row[j] += bias[j];
    }
}

void relu_inplace(Matrix& m) {
    const int64_t n = static_cast<int64_t>(m.data.size());
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i)
        if (m.data[i] < 0.0) m.data[i] = 0.0;
}

void relu_backward(const Matrix& activation, Matrix& grad) {
    assert(activation.same_shape(grad));
    const int64_t n = static_cast<int64_t>(grad.data.size());
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i)
        if (activation.data[i] <= 0.0) grad.data[i] = 0.0;
}

void softmax_rows(Matrix& m) {
    const int64_t n = static_cast<int64_t>(m.rows);
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) {
        double* row = m.row_ptr(i);
        double mx = row[0];
        for (size_t j = 1; j < m.cols; ++j)
            if (row[j] > mx) mx = row[j];
        double sum = 0.0;
        for (size_t j = 0; j < m.cols; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        for (size_t j = 0; j < m.cols; ++j) row[j] /= sum;
    }
}

void col_sums(const Matrix& m, std::vector<double>& out) {
    out.assign(m.cols, 0.0);
    const int64_t c = static_cast<int64_t>(m.cols);
#pragma omp parallel for schedule(static)
    for (int64_t j = 0; j < c; ++j) {
        double sum = 0.0;
        for (size_t i = 0; i < m.rows; ++i) sum += m(i, j);
        out[j] = sum;
    }
}

}  // namespace dyad::kernels

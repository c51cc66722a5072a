#pragma once

#include "dyad/matrix.hpp"

// Dense kernels behind the MLP. The default entry points parallelize over
// output rows with OpenMP; dyad::kernels::serial holds the plain-loop
// reference implementations. Both variants compute every output element with
// the same fixed-order inner reduction, so their results are bitwise equal
// and independent of the thread count. Tests compare the two; bench_kernels
// times them.

namespace dyad::kernels {

namespace serial {
// out = a (n×k) * b (k×m)
void matmul_nn(const Matrix& a, const Matrix& b, Matrix& out);
// out = a (n×k) * b^T (m×k)
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out);
// out = a^T (k×n) * b (k×m)
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out);
void add_bias_rows(Matrix& m, const std::vector<double>& bias);
void relu_inplace(Matrix& m);
// grad *= (activation > 0)
void relu_backward(const Matrix& activation, Matrix& grad);
void softmax_rows(Matrix& m);
// per-column sum of grad rows into out (bias gradient)
void col_sums(const Matrix& m, std::vector<double>& out);
}  // namespace serial

void matmul_nn(const Matrix& a, const Matrix& b, Matrix& out);
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out);
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out);
void add_bias_rows(Matrix& m, const std::vector<double>& bias);
void relu_inplace(Matrix& m);
void relu_backward(const Matrix& activation, Matrix& grad);
void softmax_rows(Matrix& m);
void col_sums(const Matrix& m, std::vector<double>& out);

}  // namespace dyad::kernels

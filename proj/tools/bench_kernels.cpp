// Times the OpenMP kernels against the serial reference at MLP-typical
// shapes, and one mini training epoch on top of each.

#include <chrono>
#include <cstdio>
#include <vector>

#include "dyad/kernels.hpp"
#include "dyad/matrix.hpp"
#include "dyad/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using dyad::Matrix;
using clock_type = std::chrono::steady_clock;

namespace {

Matrix random_matrix(size_t rows, size_t cols, dyad::Rng& rng) {
    Matrix m(rows, cols);
    for (double& v : m.data) v = rng.uniform(-1.0, 1.0);
    return m;
}

template <typename F>
double time_ms(F&& fn, int iters) {
    fn();  // warm up
    auto t0 = clock_type::now();
    for (int i = 0; i < iters; ++i) fn();
    auto t1 = clock_type::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / iters;
}

void bench_matmul(size_t n, size_t k, size_t m, int iters) {
    dyad::Rng rng(42);
    Matrix a = random_matrix(n, k, rng);
    Matrix b = random_matrix(k, m, rng);
    Matrix out;
    double serial = time_ms([&] { dyad::kernels::serial::matmul_nn(a, b, out); }, iters);
    double parallel = time_ms([&] { dyad::kernels::matmul_nn(a, b, out); }, iters);
    std::printf("matmul_nn %4zux%-4zu * %4zux%-4zu  serial %8.3f ms  omp %8.3f ms  speedup %5.2fx\n",
                n, k, k, m, serial, parallel, serial / parallel);
}

void bench_softmax(size_t n, size_t m, int iters) {
    dyad::Rng rng(7);
    Matrix base = random_matrix(n, m, rng);
    Matrix work;
    double serial = time_ms(
        [&] {
            work = base;
            dyad::kernels::serial::softmax_rows(work);
        },
        iters);
    double parallel = time_ms(
        [&] {
            work = base;
            dyad::kernels::softmax_rows(work);
        },
        iters);
    std::printf("softmax   %4zux%-4zu              serial %8.3f ms  omp %8.3f ms  speedup %5.2fx\n",
                n, m, serial, parallel, serial / parallel);
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("OpenMP enabled, max threads %d\n\n", omp_get_max_threads());
#else
    std::printf("built without OpenMP; both columns are serial\n\n");
#endif
    bench_matmul(256, 88, 128, 50);
    bench_matmul(1024, 600, 300, 10);
    bench_matmul(4096, 600, 300, 5);
    bench_softmax(4096, 3, 50);
    bench_softmax(16384, 300, 10);
    return 0;
}

#include "powertrace/kernels.hpp"

namespace powertrace::simd {

namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace

const KernelTable& scalar_kernels() {
    static const KernelTable table{Isa::scalar, "scalar", &dot_scalar, &axpy_scalar};
    return table;
}

}  // namespace powertrace::simd

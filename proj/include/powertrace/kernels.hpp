#pragma once

#include <cstddef>
#include <string_view>

// Dense inner loops behind the autodiff core. Each instruction set provides a
// dot product and an axpy; the matrix routines are written on top of those, so
// the scalar table is the reference every other variant is checked against.
namespace powertrace::simd {

enum class Isa { scalar, avx2 };

struct KernelTable {
    Isa isa;
    std::string_view name;
    double (*dot)(const double* a, const double* b, std::size_t n);
    // y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
};

const KernelTable& scalar_kernels();
// Null when the build or the CPU lacks the instruction set.
const KernelTable* avx2_kernels();

Isa detect_isa();
bool isa_available(Isa isa);

// Honors POWERTRACE_SIMD=scalar|avx2 on first use, otherwise the best detected.
const KernelTable& active();
// Throws ConfigError if unavailable.
void select(Isa isa);
Isa parse_isa(std::string_view text);
std::string_view to_string(Isa isa);

// Row-major GEMM variants, all accumulating into C.
// C[m,n] += A[m,k] B[k,n]
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
             std::size_t ldb, double* c, std::size_t ldc, const KernelTable& kt = active());
// C[m,n] += A[m,k] B[n,k]^T
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
             std::size_t ldb, double* c, std::size_t ldc, const KernelTable& kt = active());
// C[m,n] += A[k,m]^T B[k,n]
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
             std::size_t ldb, double* c, std::size_t ldc, const KernelTable& kt = active());

}  // namespace powertrace::simd

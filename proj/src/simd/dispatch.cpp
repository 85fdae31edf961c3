#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdlib>
#include <string>

#include "powertrace/errors.hpp"
#include "powertrace/kernels.hpp"

namespace powertrace::simd {

namespace {

const KernelTable* table_for(Isa isa) {
    switch (isa) {
    case Isa::scalar:
        return &scalar_kernels();
    case Isa::avx2:
        return avx2_kernels();
    }
    return nullptr;
}

const KernelTable* initial_table() {
    if (const char* env = std::getenv("POWERTRACE_SIMD"); env && *env) {
        if (const KernelTable* t = table_for(parse_isa(env))) return t;
        throw ConfigError(std::string("POWERTRACE_SIMD=") + env + " is not available on this CPU");
    }
    return table_for(detect_isa());
}

std::atomic<const KernelTable*>& current() {
    static std::atomic<const KernelTable*> table{initial_table()};
    return table;
}

}  // namespace

Isa detect_isa() { return avx2_kernels() ? Isa::avx2 : Isa::scalar; }

bool isa_available(Isa isa) { return table_for(isa) != nullptr; }

const KernelTable& active() { return *current().load(std::memory_order_relaxed); }

void select(Isa isa) {
    const KernelTable* t = table_for(isa);
    if (!t) throw ConfigError("instruction set '" + std::string(to_string(isa)) + "' is not available");
    current().store(t, std::memory_order_relaxed);
}

Isa parse_isa(std::string_view text) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "scalar") return Isa::scalar;
    if (lower == "avx2") return Isa::avx2;
    throw ConfigError("unknown instruction set '" + std::string(text) + "' (expected scalar or avx2)");
}

std::string_view to_string(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
             std::size_t ldb, double* c, std::size_t ldc, const KernelTable& kt) {
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * ldc;
        const double* arow = a + i * lda;
        for (std::size_t p = 0; p < k; ++p) {
            if (arow[p] != 0.0) kt.axpy(arow[p], b + p * ldb, crow, n);
        }
    }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
             std::size_t ldb, double* c, std::size_t ldc, const KernelTable& kt) {
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c + i * ldc;
        const double* arow = a + i * lda;
        for (std::size_t j = 0; j < n; ++j) {
            crow[j] += kt.dot(arow, b + j * ldb, k);
        }
    }
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda, const double* b,
             std::size_t ldb, double* c, std::size_t ldc, const KernelTable& kt) {
    for (std::size_t p = 0; p < k; ++p) {
        const double* arow = a + p * lda;
        const double* brow = b + p * ldb;
        for (std::size_t i = 0; i < m; ++i) {
            if (arow[i] != 0.0) kt.axpy(arow[i], brow, c + i * ldc, n);
        }
    }
}

}  // namespace powertrace::simd

#pragma once

// Dense double-precision vector kernels used by the latent arithmetic and the
// SVM solver. Each kernel has a scalar reference implementation plus SIMD
// variants (AVX2+FMA on x86-64, NEON on aarch64). The variant is chosen once
// per process from the CPU features; set LATCOMPASS_KERNELS=scalar to force
// the reference path.
//
// Variants agree with the reference to rounding: dot and sum_squares differ
// only in summation order, axpy only in fused vs. separate multiply-add.
// clamp is exact in every variant.

#include <cstddef>
#include <span>
#include <string_view>

namespace latcompass::kernels {

enum class Isa { Scalar, Avx2, Neon };

struct Table {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  double (*sum_squares)(const double* x, std::size_t n);
  // x[i] = min(max(x[i], lo), hi)
  void (*clamp)(double* x, std::size_t n, double lo, double hi);
};

std::string_view isa_name(Isa isa);

// Returns nullptr when the variant was not compiled in or the CPU lacks it.
const Table* table_for(Isa isa);

const Table& active();

double dot(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
double sum_squares(std::span<const double> x);
void clamp(std::span<double> x, double lo, double hi);

namespace detail {
extern const Table kScalarTable;
const Table* avx2_table();
const Table* neon_table();
}  // namespace detail

}  // namespace latcompass::kernels

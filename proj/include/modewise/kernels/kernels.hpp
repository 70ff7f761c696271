#pragma once

// Inner-loop arithmetic for the network layers. Each kernel has a scalar
// reference and, where the target supports it, an AVX2+FMA variant. The variant
// is chosen once at startup from CPUID; MODEWISE_SIMD=scalar forces the reference.

#include <cstddef>
#include <span>
#include <string_view>

namespace modewise::kernels {

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa);

/// y += alpha * x
using AxpyFn = void (*)(double alpha, const double* x, double* y, std::size_t n);
/// sum_i a[i] * b[i]
using DotFn = double (*)(const double* a, const double* b, std::size_t n);
/// out[i] = max(in[i], 0)
using ReluFn = void (*)(const double* in, double* out, std::size_t n);

struct KernelTable {
  Isa isa;
  AxpyFn axpy;
  DotFn dot;
  ReluFn relu;
};

namespace scalar {
void axpy(double alpha, const double* x, double* y, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);
void relu(const double* in, double* out, std::size_t n);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define MODEWISE_HAVE_AVX2_KERNELS 1
namespace avx2 {
void axpy(double alpha, const double* x, double* y, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);
void relu(const double* in, double* out, std::size_t n);
}  // namespace avx2
#endif

/// True when the running CPU can execute the AVX2 variants.
bool avx2_supported();

const KernelTable& table(Isa isa);
const KernelTable& active();
/// Overrides the runtime choice; throws UsageError if the ISA is unavailable.
void select(Isa isa);

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}
inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

}  // namespace modewise::kernels

#include <atomic>
#include <cstdlib>
#include <string>

#include "modewise/error.hpp"
#include "modewise/kernels/kernels.hpp"

namespace modewise::kernels {
namespace {

constexpr KernelTable kScalar{Isa::Scalar, &scalar::axpy, &scalar::dot, &scalar::relu};
#ifdef MODEWISE_HAVE_AVX2_KERNELS
constexpr KernelTable kAvx2{Isa::Avx2, &avx2::axpy, &avx2::dot, &avx2::relu};
#endif

const KernelTable* initial_table() {
  if (const char* env = std::getenv("MODEWISE_SIMD")) {
    if (std::string(env) == "scalar") return &kScalar;
  }
#ifdef MODEWISE_HAVE_AVX2_KERNELS
  if (avx2_supported()) return &kAvx2;
#endif
  return &kScalar;
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

std::string_view isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

bool avx2_supported() {
#if defined(MODEWISE_HAVE_AVX2_KERNELS) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable& table(Isa isa) {
#ifdef MODEWISE_HAVE_AVX2_KERNELS
  if (isa == Isa::Avx2) {
    if (!avx2_supported()) throw UsageError("AVX2 kernels are not supported on this CPU");
    return kAvx2;
  }
#else
  if (isa == Isa::Avx2) throw UsageError("AVX2 kernels were not built for this target");
#endif
  return kScalar;
}

const KernelTable& active() { return *current().load(std::memory_order_relaxed); }

void select(Isa isa) { current().store(&table(isa), std::memory_order_relaxed); }

}  // namespace modewise::kernels

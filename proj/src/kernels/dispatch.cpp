#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string_view>

#include "gmeta/kernels.hpp"

namespace gmeta::kernels {

#if defined(GMETA_HAVE_AVX2_KERNELS)
const KernelTable& avx2_table_impl();
#endif

namespace {

bool cpu_has_avx2() {
#if defined(GMETA_HAVE_AVX2_KERNELS) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* initial_table() {
  if (const char* env = std::getenv("GMETA_KERNELS")) {
    const std::string_view want(env);
    if (want == "scalar") return &scalar_table();
    if (want == "avx2") return &avx2_table();
    throw std::runtime_error("GMETA_KERNELS must be 'scalar' or 'avx2'");
  }
  return avx2_available() ? &avx2_table() : &scalar_table();
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{initial_table()};
  return slot;
}

}  // namespace

bool avx2_available() {
  static const bool ok = cpu_has_avx2();
  return ok;
}

const KernelTable& avx2_table() {
#if defined(GMETA_HAVE_AVX2_KERNELS)
  if (avx2_available()) return avx2_table_impl();
#endif
  throw std::runtime_error("AVX2 kernels are not available on this build or CPU");
}

const KernelTable& table(Isa isa) { return isa == Isa::Avx2 ? avx2_table() : scalar_table(); }

const KernelTable& active() { return *active_slot().load(std::memory_order_acquire); }

void select(Isa isa) { active_slot().store(&table(isa), std::memory_order_release); }

}  // namespace gmeta::kernels

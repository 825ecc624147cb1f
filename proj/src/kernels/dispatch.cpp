#include <atomic>
#include <cstdlib>
#include <string>

#include "bogss/kernels.hpp"

namespace bogss::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(BOGSS_BUILD_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa detect() {
  if (const char* env = std::getenv("BOGSS_ISA")) {
    const std::string v(env);
    if (v == "scalar") return Isa::scalar;
    if (v == "avx2" && cpu_has_avx2()) return Isa::avx2;
  }
  return cpu_has_avx2() ? Isa::avx2 : Isa::scalar;
}

struct Active {
  std::atomic<Isa> isa;
  std::atomic<const KernelTable*> table;
};

const KernelTable& lookup(Isa isa);

Active& current() {
  static Active state{detect(), &lookup(detect())};
  return state;
}

bool avx2_available() {
  static const bool has = cpu_has_avx2();
  return has;
}

const KernelTable& lookup(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return scalar::table;
    case Isa::avx2:
#if defined(BOGSS_BUILD_AVX2)
      if (avx2_available()) return avx2::table;
#endif
      break;
  }
  throw Error("kernel instruction set not supported on this machine");
}

}  // namespace

bool isa_supported(Isa isa) {
  return isa == Isa::scalar || (isa == Isa::avx2 && avx2_available());
}

const KernelTable& table(Isa isa) { return lookup(isa); }

const KernelTable& active() { return *current().table.load(std::memory_order_relaxed); }

Isa active_isa() { return current().isa.load(std::memory_order_relaxed); }

void set_isa(Isa isa) {
  const KernelTable& t = lookup(isa);
  current().table.store(&t, std::memory_order_relaxed);
  current().isa.store(isa, std::memory_order_relaxed);
}

}  // namespace bogss::kernels

#include "qleak/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace qleak::kernels {

bool cpu_has_avx2_fma() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

const Ops& select() {
  const char* env = std::getenv("QLEAK_KERNELS");
  if (env != nullptr) {
    if (std::strcmp(env, "scalar") == 0) return scalar_ops();
    if (std::strcmp(env, "avx2") == 0 && avx2_ops() != nullptr) return *avx2_ops();
  }
  if (avx2_ops() != nullptr && cpu_has_avx2_fma()) return *avx2_ops();
  return scalar_ops();
}

}  // namespace

const Ops& active() {
  static const Ops& ops = select();
  return ops;
}

}  // namespace qleak::kernels

#include <cstdlib>
#include <string>

#include "verbgen/error.hpp"
#include "verbgen/simd/kernels.hpp"

namespace verbgen::simd {

namespace {

bool cpu_supports(Isa isa) {
#if defined(__x86_64__) || defined(__i386__)
  switch (isa) {
    case Isa::Scalar: return true;
    case Isa::Avx2: return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    case Isa::Avx512: return __builtin_cpu_supports("avx512f");
  }
  return false;
#else
  return isa == Isa::Scalar;
#endif
}

Isa select() {
  if (const char* env = std::getenv("VERBGEN_SIMD")) {
    const std::string want(env);
    for (Isa isa : {Isa::Scalar, Isa::Avx2, Isa::Avx512})
      if (want == to_string(isa)) {
        if (!kernel_table(isa))
          throw Error(ErrorCode::InvalidArgument, "VERBGEN_SIMD=" + want + " is not available here");
        return isa;
      }
    throw Error(ErrorCode::InvalidArgument, "VERBGEN_SIMD must be scalar, avx2 or avx512");
  }
  const auto isas = available_isas();
  return isas.back();
}

}  // namespace

std::string_view to_string(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Avx512: return "avx512";
  }
  return "?";
}

const KernelTable* kernel_table(Isa isa) {
  if (!cpu_supports(isa)) return nullptr;
  switch (isa) {
    case Isa::Scalar: return &detail::scalar_table();
#if defined(__x86_64__) || defined(__i386__)
    case Isa::Avx2: return detail::avx2_table();
    case Isa::Avx512: return detail::avx512_table();
#else
    default: return nullptr;
#endif
  }
  return nullptr;
}

std::vector<Isa> available_isas() {
  std::vector<Isa> out;
  for (Isa isa : {Isa::Scalar, Isa::Avx2, Isa::Avx512})
    if (kernel_table(isa)) out.push_back(isa);
  return out;
}

Isa active_isa() {
  static const Isa isa = select();
  return isa;
}

const KernelTable& kernels() {
  static const KernelTable& table = *kernel_table(active_isa());
  return table;
}

}  // namespace verbgen::simd

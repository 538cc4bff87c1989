#include "conley/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace conley::kernels {

namespace {

const Ops& select() {
  const char* mode = std::getenv("CONLEY_KERNELS");
  if (mode == nullptr || std::strcmp(mode, "auto") == 0)
    return avx2_supported() ? avx2_ops() : scalar_ops();
  if (std::strcmp(mode, "scalar") == 0) return scalar_ops();
  if (std::strcmp(mode, "avx2") == 0) {
    if (!avx2_supported())
      throw std::runtime_error("CONLEY_KERNELS=avx2 but CPU lacks AVX2");
    return avx2_ops();
  }
  throw std::runtime_error("CONLEY_KERNELS must be scalar, avx2, or auto");
}

}  // namespace

const Ops& ops() {
  static const Ops& selected = select();
  return selected;
}

}  // namespace conley::kernels

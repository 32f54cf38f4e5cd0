#include "smartaug/runtime.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace smartaug {

void configure_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 32 << 20);  // glibc maximum on 64-bit
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
  mallopt(M_TOP_PAD, 64 << 20);
#endif
}

}  // namespace smartaug

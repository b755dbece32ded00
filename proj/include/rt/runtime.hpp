#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace rt {

/// Keeps large im2col and gradient buffers on the heap between calls
/// instead of returning them to the OS after every layer (glibc only).
inline void configure_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 64 << 20);
#endif
}

}  // namespace rt

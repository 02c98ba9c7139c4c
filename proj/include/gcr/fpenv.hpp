#pragma once

#if defined(__SSE__) || defined(_M_X64)
#include <xmmintrin.h>
#define GCR_HAVE_MXCSR 1
#endif

namespace gcr {

/// Flushes subnormal floats to zero on the calling thread while alive
/// (FTZ + DAZ). Restores the previous mode on exit. No-op off x86.
class FlushSubnormals {
 public:
  FlushSubnormals() {
#ifdef GCR_HAVE_MXCSR
    saved_ = _mm_getcsr();
    _mm_setcsr(saved_ | 0x8040u);
#endif
  }
  ~FlushSubnormals() {
#ifdef GCR_HAVE_MXCSR
    _mm_setcsr(saved_);
#endif
  }
  FlushSubnormals(const FlushSubnormals&) = delete;
  FlushSubnormals& operator=(const FlushSubnormals&) = delete;

 private:
  unsigned saved_ = 0;
};

}  // namespace gcr

// Copyright 2026 the mfec authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "kernels_impl.hpp"
#include "mfec/simd/kernels.hpp"

namespace mfec::simd {

namespace {

constexpr KernelTable kScalarTable{&scalar::squared_l2, &scalar::dot, &scalar::axpy};
#if defined(MFEC_HAVE_AVX2)
constexpr KernelTable kAvx2Table{&avx2::squared_l2, &avx2::dot, &avx2::axpy};
#endif
#if defined(MFEC_HAVE_NEON)
constexpr KernelTable kNeonTable{&neon::squared_l2, &neon::dot, &neon::axpy};
#endif

Backend detect_backend() {
  if (const char* forced = std::getenv("MFEC_SIMD")) {
    const std::string name(forced);
    for (Backend b : {Backend::scalar, Backend::avx2, Backend::neon}) {
      if (name == backend_name(b) && backend_available(b)) return b;
    }
  }
  if (backend_available(Backend::avx2)) return Backend::avx2;
  if (backend_available(Backend::neon)) return Backend::neon;
  return Backend::scalar;
}

std::atomic<const KernelTable*>& active_table() {
  static std::atomic<const KernelTable*> table{&kernels_for(detect_backend())};
  return table;
}

}  // namespace

std::string_view backend_name(Backend backend) {
  switch (backend) {
    case Backend::scalar: return "scalar";
    case Backend::avx2: return "avx2";
    case Backend::neon: return "neon";
  }
  return "unknown";
}

bool backend_available(Backend backend) {
  switch (backend) {
    case Backend::scalar: return true;
    case Backend::avx2:
#if defined(MFEC_HAVE_AVX2)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
    case Backend::neon:
#if defined(MFEC_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

std::vector<Backend> available_backends() {
  std::vector<Backend> out;
  for (Backend b : {Backend::scalar, Backend::avx2, Backend::neon}) {
    if (backend_available(b)) out.push_back(b);
  }
  return out;
}

const KernelTable& kernels_for(Backend backend) {
  if (!backend_available(backend)) {
    throw std::invalid_argument("simd backend not available: " + std::string(backend_name(backend)));
  }
  switch (backend) {
#if defined(MFEC_HAVE_AVX2)
    case Backend::avx2: return kAvx2Table;
#endif
#if defined(MFEC_HAVE_NEON)
    case Backend::neon: return kNeonTable;
#endif
    default: return kScalarTable;
  }
}

const KernelTable& kernels() { return *active_table().load(std::memory_order_relaxed); }

Backend active_backend() {
  const KernelTable* t = active_table().load(std::memory_order_relaxed);
#if defined(MFEC_HAVE_AVX2)
  if (t == &kAvx2Table) return Backend::avx2;
#endif
#if defined(MFEC_HAVE_NEON)
  if (t == &kNeonTable) return Backend::neon;
#endif
  (void)t;
  return Backend::scalar;
}

void set_backend(Backend backend) { active_table().store(&kernels_for(backend), std::memory_order_relaxed); }

}  // namespace mfec::simd

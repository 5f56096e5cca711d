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

// Runtime-dispatched arithmetic kernels for the inner loops of the
// nearest-neighbour scan, the random projection and the dense layers.
//
// Every backend evaluates reductions in the same canonical order: four
// interleaved lane accumulators over the largest multiple-of-four prefix,
// combined as (l0 + l1) + (l2 + l3), then the tail added left to right.
// With FMA contraction disabled this makes all backends bit-identical, so
// results (and experiment CSVs) do not depend on the host CPU.

#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace mfec::simd {

enum class Backend { scalar, avx2, neon };

struct KernelTable {
  double (*squared_l2)(const double* a, const double* b, std::size_t n);
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
};

std::string_view backend_name(Backend backend);

bool backend_available(Backend backend);

std::vector<Backend> available_backends();

/// Kernel table for a specific backend. Throws std::invalid_argument if the
/// backend was not compiled in or the CPU lacks the instructions.
const KernelTable& kernels_for(Backend backend);

/// The process-wide active table. Chosen on first use from the CPU features,
/// unless MFEC_SIMD=scalar|avx2|neon is set in the environment.
const KernelTable& kernels();

Backend active_backend();

void set_backend(Backend backend);

inline double squared_l2(std::span<const double> a, std::span<const double> b) {
  return kernels().squared_l2(a.data(), b.data(), a.size());
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  return kernels().dot(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  kernels().axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace mfec::simd

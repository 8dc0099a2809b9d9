// Copyright 2026 The tbcnn Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <atomic>
#include <cstdlib>
#include <string>

#include "tbcnn/common.hpp"
#include "tbcnn/simd/kernels.hpp"

namespace tbcnn::simd {
namespace {

constexpr KernelTable kScalarTable{&scalar::dot, &scalar::axpy, &scalar::conv1d_valid,
                                   &scalar::lda_topic_weights, &scalar::adam_update};

#if defined(TBCNN_HAVE_AVX2)
constexpr KernelTable kAvx2Table{&avx2::dot, &avx2::axpy, &avx2::conv1d_valid,
                                 &avx2::lda_topic_weights, &avx2::adam_update};
#endif

Isa detect() {
  if (const char* forced = std::getenv("TBCNN_SIMD")) {
    const std::string name(forced);
    if (name == "scalar") return Isa::kScalar;
    if (name == "avx2" && isa_available(Isa::kAvx2)) return Isa::kAvx2;
  }
  return isa_available(Isa::kAvx2) ? Isa::kAvx2 : Isa::kScalar;
}

std::atomic<Isa>& selected() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
#if defined(TBCNN_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table(Isa isa) {
  if (!isa_available(isa)) {
    throw Error("SIMD variant '" + std::string(isa_name(isa)) + "' is not available on this CPU");
  }
#if defined(TBCNN_HAVE_AVX2)
  if (isa == Isa::kAvx2) return kAvx2Table;
#endif
  return kScalarTable;
}

const KernelTable& active() { return table(selected().load(std::memory_order_relaxed)); }

Isa active_isa() { return selected().load(std::memory_order_relaxed); }

void set_isa(Isa isa) {
  table(isa);
  selected().store(isa, std::memory_order_relaxed);
}

std::string_view isa_name(Isa isa) { return isa == Isa::kAvx2 ? "avx2" : "scalar"; }

}  // namespace tbcnn::simd

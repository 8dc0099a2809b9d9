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

// Arithmetic inner loops shared by the topic model and the CNN.
//
// Every kernel has a scalar reference implementation and, on x86-64, an
// AVX2+FMA variant. The variant is picked once at startup from CPUID and can
// be pinned with the TBCNN_SIMD environment variable ("scalar" or "avx2") or
// with set_isa(). Elementwise kernels (lda_topic_weights, adam_update) are
// bit-identical across variants; reductions (dot, axpy, conv1d_valid) agree
// to rounding only because the vector variants reassociate sums.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace tbcnn::simd {

enum class Isa { kScalar, kAvx2 };

struct KernelTable {
  double (*dot)(const double* a, const double* b, std::size_t n);
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  void (*conv1d_valid)(const double* input, std::size_t rows, std::size_t width,
                       const double* filter, std::size_t height, double bias, double* out);
  void (*lda_topic_weights)(const std::int32_t* doc_topic, const std::int32_t* word_topic,
                            const std::int32_t* topic_total, double alpha, double beta,
                            double vocab_beta, std::size_t k, double* out);
  void (*adam_update)(double* param, const double* grad, double* m, double* v, std::size_t n,
                      double lr, double beta1, double beta2, double eps, double bias1,
                      double bias2);
};

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void conv1d_valid(const double* input, std::size_t rows, std::size_t width, const double* filter,
                  std::size_t height, double bias, double* out);
void lda_topic_weights(const std::int32_t* doc_topic, const std::int32_t* word_topic,
                       const std::int32_t* topic_total, double alpha, double beta,
                       double vocab_beta, std::size_t k, double* out);
void adam_update(double* param, const double* grad, double* m, double* v, std::size_t n, double lr,
                 double beta1, double beta2, double eps, double bias1, double bias2);
}  // namespace scalar

#if defined(TBCNN_HAVE_AVX2)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void conv1d_valid(const double* input, std::size_t rows, std::size_t width, const double* filter,
                  std::size_t height, double bias, double* out);
void lda_topic_weights(const std::int32_t* doc_topic, const std::int32_t* word_topic,
                       const std::int32_t* topic_total, double alpha, double beta,
                       double vocab_beta, std::size_t k, double* out);
void adam_update(double* param, const double* grad, double* m, double* v, std::size_t n, double lr,
                 double beta1, double beta2, double eps, double bias1, double bias2);
}  // namespace avx2
#endif

/// True when the running CPU can execute the given variant.
bool isa_available(Isa isa);

/// Table for a specific variant. Throws if the variant is unavailable.
const KernelTable& table(Isa isa);

/// Table selected for this process.
const KernelTable& active();
Isa active_isa();

/// Pins the variant used by active(). Throws if unavailable.
void set_isa(Isa isa);

std::string_view isa_name(Isa isa);

}  // namespace tbcnn::simd

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

// Compiled with -mavx2 -mfma. Nothing in here may run before dispatch has
// confirmed CPU support.

#include <immintrin.h>

#include <cmath>

#include "tbcnn/simd/kernels.hpp"

namespace tbcnn::simd::avx2 {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d pair = _mm_add_pd(lo, hi);
  const __m128d swapped = _mm_unpackhi_pd(pair, pair);
  return _mm_cvtsd_f64(_mm_add_sd(pair, swapped));
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  __m256d acc2 = _mm256_setzero_pd();
  __m256d acc3 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8), _mm256_loadu_pd(b + i + 8), acc2);
    acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12), _mm256_loadu_pd(b + i + 12), acc3);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double sum = hsum(_mm256_add_pd(_mm256_add_pd(acc0, acc1), _mm256_add_pd(acc2, acc3)));
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d a = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(a, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void conv1d_valid(const double* input, std::size_t rows, std::size_t width, const double* filter,
                  std::size_t height, double bias, double* out) {
  if (height > rows) return;
  const std::size_t span = height * width;
  const std::size_t outputs = rows - height + 1;
  std::size_t i = 0;
  // Four neighbouring windows share each filter load.
  for (; i + 4 <= outputs; i += 4) {
    const double* w0 = input + i * width;
    const double* w1 = w0 + width;
    const double* w2 = w1 + width;
    const double* w3 = w2 + width;
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    __m256d acc2 = _mm256_setzero_pd();
    __m256d acc3 = _mm256_setzero_pd();
    std::size_t j = 0;
    for (; j + 4 <= span; j += 4) {
      const __m256d f = _mm256_loadu_pd(filter + j);
      acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(w0 + j), f, acc0);
      acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(w1 + j), f, acc1);
      acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(w2 + j), f, acc2);
      acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(w3 + j), f, acc3);
    }
    double s0 = hsum(acc0);
    double s1 = hsum(acc1);
    double s2 = hsum(acc2);
    double s3 = hsum(acc3);
    for (; j < span; ++j) {
      s0 += w0[j] * filter[j];
      s1 += w1[j] * filter[j];
      s2 += w2[j] * filter[j];
      s3 += w3[j] * filter[j];
    }
    out[i] = s0 + bias;
    out[i + 1] = s1 + bias;
    out[i + 2] = s2 + bias;
    out[i + 3] = s3 + bias;
  }
  for (; i < outputs; ++i) out[i] = dot(input + i * width, filter, span) + bias;
}

void lda_topic_weights(const std::int32_t* doc_topic, const std::int32_t* word_topic,
                       const std::int32_t* topic_total, double alpha, double beta,
                       double vocab_beta, std::size_t k, double* out) {
  const __m256d va = _mm256_set1_pd(alpha);
  const __m256d vb = _mm256_set1_pd(beta);
  const __m256d vvb = _mm256_set1_pd(vocab_beta);
  std::size_t t = 0;
  for (; t + 4 <= k; t += 4) {
    const __m256d dt = _mm256_cvtepi32_pd(
        _mm_loadu_si128(reinterpret_cast<const __m128i*>(doc_topic + t)));
    const __m256d wt = _mm256_cvtepi32_pd(
        _mm_loadu_si128(reinterpret_cast<const __m128i*>(word_topic + t)));
    const __m256d tt = _mm256_cvtepi32_pd(
        _mm_loadu_si128(reinterpret_cast<const __m128i*>(topic_total + t)));
    const __m256d num = _mm256_mul_pd(_mm256_add_pd(dt, va), _mm256_add_pd(wt, vb));
    _mm256_storeu_pd(out + t, _mm256_div_pd(num, _mm256_add_pd(tt, vvb)));
  }
  for (; t < k; ++t) {
    const double doc_part = static_cast<double>(doc_topic[t]) + alpha;
    const double word_part = static_cast<double>(word_topic[t]) + beta;
    out[t] = doc_part * word_part / (static_cast<double>(topic_total[t]) + vocab_beta);
  }
}

void adam_update(double* param, const double* grad, double* m, double* v, std::size_t n, double lr,
                 double beta1, double beta2, double eps, double bias1, double bias2) {
  const double one_minus_b1 = 1.0 - beta1;
  const double one_minus_b2 = 1.0 - beta2;
  const __m256d vb1 = _mm256_set1_pd(beta1);
  const __m256d vb2 = _mm256_set1_pd(beta2);
  const __m256d vc1 = _mm256_set1_pd(one_minus_b1);
  const __m256d vc2 = _mm256_set1_pd(one_minus_b2);
  const __m256d vbias1 = _mm256_set1_pd(bias1);
  const __m256d vbias2 = _mm256_set1_pd(bias2);
  const __m256d vlr = _mm256_set1_pd(lr);
  const __m256d veps = _mm256_set1_pd(eps);
  std::size_t i = 0;
  // Plain mul/add (no fma) so results match the scalar kernel bit for bit.
  for (; i + 4 <= n; i += 4) {
    const __m256d g = _mm256_loadu_pd(grad + i);
    const __m256d mi = _mm256_add_pd(_mm256_mul_pd(vb1, _mm256_loadu_pd(m + i)),
                                     _mm256_mul_pd(vc1, g));
    const __m256d vi = _mm256_add_pd(_mm256_mul_pd(vb2, _mm256_loadu_pd(v + i)),
                                     _mm256_mul_pd(vc2, _mm256_mul_pd(g, g)));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    const __m256d m_hat = _mm256_div_pd(mi, vbias1);
    const __m256d v_hat = _mm256_div_pd(vi, vbias2);
    const __m256d step = _mm256_div_pd(_mm256_mul_pd(vlr, m_hat),
                                       _mm256_add_pd(_mm256_sqrt_pd(v_hat), veps));
    _mm256_storeu_pd(param + i, _mm256_sub_pd(_mm256_loadu_pd(param + i), step));
  }
  for (; i < n; ++i) {
    const double g = grad[i];
    m[i] = beta1 * m[i] + one_minus_b1 * g;
    v[i] = beta2 * v[i] + one_minus_b2 * (g * g);
    const double m_hat = m[i] / bias1;
    const double v_hat = v[i] / bias2;
    param[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

}  // namespace tbcnn::simd::avx2

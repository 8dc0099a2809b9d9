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

#include <cmath>

#include "tbcnn/simd/kernels.hpp"

namespace tbcnn::simd::scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void conv1d_valid(const double* input, std::size_t rows, std::size_t width, const double* filter,
                  std::size_t height, double bias, double* out) {
  // A window of `height` rows is contiguous in row-major storage.
  const std::size_t span = height * width;
  for (std::size_t i = 0; i + height <= rows; ++i) {
    out[i] = dot(input + i * width, filter, span) + bias;
  }
}

void lda_topic_weights(const std::int32_t* doc_topic, const std::int32_t* word_topic,
                       const std::int32_t* topic_total, double alpha, double beta,
                       double vocab_beta, std::size_t k, double* out) {
  for (std::size_t t = 0; t < k; ++t) {
    const double doc_part = static_cast<double>(doc_topic[t]) + alpha;
    const double word_part = static_cast<double>(word_topic[t]) + beta;
    const double norm = static_cast<double>(topic_total[t]) + vocab_beta;
    out[t] = doc_part * word_part / norm;
  }
}

void adam_update(double* param, const double* grad, double* m, double* v, std::size_t n, double lr,
                 double beta1, double beta2, double eps, double bias1, double bias2) {
  const double one_minus_b1 = 1.0 - beta1;
  const double one_minus_b2 = 1.0 - beta2;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grad[i];
    m[i] = beta1 * m[i] + one_minus_b1 * g;
    v[i] = beta2 * v[i] + one_minus_b2 * (g * g);
    const double m_hat = m[i] / bias1;
    const double v_hat = v[i] / bias2;
    param[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

}  // namespace tbcnn::simd::scalar

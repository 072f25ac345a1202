// Copyright 2026 The kws Authors.
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

// Row-major accumulate-into GEMM kernels used by the convolution and dense
// layers. Loop order is fixed, so results are deterministic for a given build.

#pragma once

#include <algorithm>
#include <cstddef>

namespace kws::nn::gemm {

constexpr std::size_t kColTile = 512;
constexpr std::size_t kDepthTile = 2048;

/// C[M x N] += A[M x K] * B[K x N]
template <class T>
void nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  for (std::size_t j0 = 0; j0 < n; j0 += kColTile) {
    const std::size_t jn = std::min(kColTile, n - j0);
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) {
      T* c0 = c + (i + 0) * n + j0;
      T* c1 = c + (i + 1) * n + j0;
      T* c2 = c + (i + 2) * n + j0;
      T* c3 = c + (i + 3) * n + j0;
      for (std::size_t p = 0; p < k; ++p) {
        const T a0 = a[(i + 0) * k + p], a1 = a[(i + 1) * k + p];
        const T a2 = a[(i + 2) * k + p], a3 = a[(i + 3) * k + p];
        const T* bp = b + p * n + j0;
#pragma omp simd
        for (std::size_t j = 0; j < jn; ++j) {
          const T bv = bp[j];
          c0[j] += a0 * bv;
          c1[j] += a1 * bv;
          c2[j] += a2 * bv;
          c3[j] += a3 * bv;
        }
      }
    }
    for (; i < m; ++i) {
      T* ci = c + i * n + j0;
      for (std::size_t p = 0; p < k; ++p) {
        const T av = a[i * k + p];
        const T* bp = b + p * n + j0;
#pragma omp simd
        for (std::size_t j = 0; j < jn; ++j) ci[j] += av * bp[j];
      }
    }
  }
}

/// C[K x N] += A[M x K]^T * B[M x N]
template <class T>
void tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  for (std::size_t j0 = 0; j0 < n; j0 += kColTile) {
    const std::size_t jn = std::min(kColTile, n - j0);
    std::size_t r = 0;
    for (; r + 4 <= k; r += 4) {
      T* c0 = c + (r + 0) * n + j0;
      T* c1 = c + (r + 1) * n + j0;
      T* c2 = c + (r + 2) * n + j0;
      T* c3 = c + (r + 3) * n + j0;
      for (std::size_t p = 0; p < m; ++p) {
        const T* ap = a + p * k + r;
        const T a0 = ap[0], a1 = ap[1], a2 = ap[2], a3 = ap[3];
        const T* bp = b + p * n + j0;
#pragma omp simd
        for (std::size_t j = 0; j < jn; ++j) {
          const T bv = bp[j];
          c0[j] += a0 * bv;
          c1[j] += a1 * bv;
          c2[j] += a2 * bv;
          c3[j] += a3 * bv;
        }
      }
    }
    for (; r < k; ++r) {
      T* cr = c + r * n + j0;
      for (std::size_t p = 0; p < m; ++p) {
        const T av = a[p * k + r];
        const T* bp = b + p * n + j0;
#pragma omp simd
        for (std::size_t j = 0; j < jn; ++j) cr[j] += av * bp[j];
      }
    }
  }
}

/// C[M x N] += A[M x K] * B[N x K]^T
template <class T>
void nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  for (std::size_t p0 = 0; p0 < k; p0 += kDepthTile) {
    const std::size_t pn = std::min(kDepthTile, k - p0);
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) {
      const T* a0 = a + (i + 0) * k + p0;
      const T* a1 = a + (i + 1) * k + p0;
      const T* a2 = a + (i + 2) * k + p0;
      const T* a3 = a + (i + 3) * k + p0;
      for (std::size_t j = 0; j < n; ++j) {
        const T* bj = b + j * k + p0;
        T s0 = 0, s1 = 0, s2 = 0, s3 = 0;
#pragma omp simd reduction(+ : s0, s1, s2, s3)
        for (std::size_t p = 0; p < pn; ++p) {
          const T bv = bj[p];
          s0 += a0[p] * bv;
          s1 += a1[p] * bv;
          s2 += a2[p] * bv;
          s3 += a3[p] * bv;
        }
        c[(i + 0) * n + j] += s0;
        c[(i + 1) * n + j] += s1;
        c[(i + 2) * n + j] += s2;
        c[(i + 3) * n + j] += s3;
      }
    }
    for (; i < m; ++i) {
      const T* ai = a + i * k + p0;
      for (std::size_t j = 0; j < n; ++j) {
        const T* bj = b + j * k + p0;
        T s = 0;
#pragma omp simd reduction(+ : s)
        for (std::size_t p = 0; p < pn; ++p) s += ai[p] * bj[p];
        c[i * n + j] += s;
      }
    }
  }
}

}  // namespace kws::nn::gemm

#pragma once

#include <algorithm>
#include <cstring>
#include <vector>

namespace ambiroom::engine {

// Small row-major GEMM kernels for the conv/linear hot paths. Threading
// partitions output rows only and inner summation order is fixed, so
// results are bit-identical for any thread count.

// C[m x n] (+)= A[m x k] * B[k x n]. Tiled over n and k so the active
// B panel stays cache-resident instead of being streamed once per
// output row.
template <typename T>
void gemm_nn(int m, int n, int k, const T* a, const T* b, T* c, bool accumulate) {
    if (!accumulate) std::memset(c, 0, sizeof(T) * static_cast<std::size_t>(m) * n);
    constexpr int kKTile = 256;
    // With few B rows there is nothing to keep resident; tiling only
    // adds sweep overhead.
    const int kNTile = k <= 32 ? n : 1024;
    for (int n0 = 0; n0 < n; n0 += kNTile) {
        const int n1 = n0 + kNTile < n ? n0 + kNTile : n;
        for (int k0 = 0; k0 < k; k0 += kKTile) {
            const int k1 = k0 + kKTile < k ? k0 + kKTile : k;
#pragma omp parallel for schedule(static)
            for (int i = 0; i < m; ++i) {
                const T* arow = a + static_cast<std::size_t>(i) * k;
                T* crow = c + static_cast<std::size_t>(i) * n;
                for (int kk = k0; kk < k1; ++kk) {
                    const T aik = arow[kk];
                    const T* brow = b + static_cast<std::size_t>(kk) * n;
#pragma omp simd
                    for (int j = n0; j < n1; ++j) crow[j] += aik * brow[j];
                }
            }
        }
    }
}

// C[m x n] (+)= A[k x m]^T * B[k x n]. A is transposed into a scratch
// block first; the strided column reads would otherwise dominate.
template <typename T>
void gemm_tn(int m, int n, int k, const T* a, const T* b, T* c, bool accumulate) {
    std::vector<T> at(static_cast<std::size_t>(m) * k);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
        T* row = at.data() + static_cast<std::size_t>(i) * k;
        for (int kk = 0; kk < k; ++kk) row[kk] = a[static_cast<std::size_t>(kk) * m + i];
    }
    gemm_nn(m, n, k, at.data(), b, c, accumulate);
}

// C[m x n] (+)= A[m x k] * B[n x k]^T  (rows of both operands contiguous).
// The j tile keeps a ~0.5 MB panel of B hot across the parallel i sweep.
template <typename T>
void gemm_nt(int m, int n, int k, const T* a, const T* b, T* c, bool accumulate) {
    const int rows_per_tile =
        std::max(8, static_cast<int>((512u * 1024u) / (sizeof(T) * static_cast<unsigned>(k) + 1)));
    for (int j0 = 0; j0 < n; j0 += rows_per_tile) {
        const int j1 = j0 + rows_per_tile < n ? j0 + rows_per_tile : n;
#pragma omp parallel for schedule(static)
        for (int i = 0; i < m; ++i) {
            const T* arow = a + static_cast<std::size_t>(i) * k;
            T* crow = c + static_cast<std::size_t>(i) * n;
            for (int j = j0; j < j1; ++j) {
                const T* brow = b + static_cast<std::size_t>(j) * k;
                T acc = T(0);
#pragma omp simd reduction(+ : acc)
                for (int kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
                crow[j] = accumulate ? crow[j] + acc : acc;
            }
        }
    }
}

}  // namespace ambiroom::engine

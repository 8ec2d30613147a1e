/*
 * Copyright 2026 The lipnn authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef LIPNN_LINALG_HPP_
#define LIPNN_LINALG_HPP_

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <vector>

namespace lipnn {

using DenseVector = std::vector<double>;

/// Row-major dense matrix of doubles.
struct DenseMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // rows * cols entries, row-major

    DenseMatrix() = default;
    DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    bool empty() const { return rows == 0 || cols == 0; }
};

DenseMatrix identity(std::size_t n);
DenseMatrix transpose(const DenseMatrix& a);
DenseMatrix make_matrix(std::initializer_list<std::initializer_list<double>> rows);

/// a * b, a^T * b, a * b^T.  Matrix-matrix products are BLAS-backed
/// (single-threaded, fixed kernel) and deterministic run to run.
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix matmul_ta(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix matmul_tb(const DenseMatrix& a, const DenseMatrix& b);

/// a^T a and a a^T (symmetric Gram products).
DenseMatrix gram(const DenseMatrix& a);
DenseMatrix gram_right(const DenseMatrix& a);

/// Matrix-vector products, BLAS-backed like the matrix products above.
DenseVector matvec(const DenseMatrix& a, const DenseVector& x);
DenseVector matvec_t(const DenseMatrix& a, const DenseVector& y);

double dot(const DenseVector& a, const DenseVector& b);
double norm1(const DenseVector& v);
double norm2(const DenseVector& v);
double norm_inf(const DenseVector& v);

/// y += alpha * x (sizes must match).
void add_scaled(DenseMatrix& y, double alpha, const DenseMatrix& x);
void add_scaled(DenseVector& y, double alpha, const DenseVector& x);
void scale_inplace(DenseMatrix& a, double alpha);
void scale_inplace(DenseVector& v, double alpha);
double frob_inner(const DenseMatrix& a, const DenseMatrix& b);
double frob_norm(const DenseMatrix& a);

/// Operator infinity norm: max over rows of the row's absolute sum.
double matrix_inf_norm(const DenseMatrix& a);

/**
 * Mixed operator norm |a|_{p,inf} = sup_{|x|_p <= 1} |a x|_inf, computed as the
 * max over rows of the row's dual norm (l_q with 1/p + 1/q = 1).
 * Supported p: 1, 2, infinity.
 */
double mixed_norm_p_inf(const DenseMatrix& a, double p);

struct PowerIterResult {
    double sigma = 0.0;   // largest singular value estimate (from below)
    DenseVector u;        // left singular direction, unit norm
    DenseVector v;        // right singular direction, unit norm
    std::size_t iters = 0;
};

/**
 * Power iteration for the largest singular value. The start vector is drawn
 * uniform in [-1, 1] from the seed, so results are reproducible. The estimate
 * is monotone non-decreasing in the iteration count and converges from below.
 * A zero matrix yields sigma = 0 with axis-aligned placeholder directions.
 */
PowerIterResult spectral_norm_power_iteration(const DenseMatrix& a,
                                              std::size_t iters,
                                              std::uint64_t seed);

/**
 * Power iteration run until the sigma estimate moves by less than
 * tol * max(1, sigma) between iterations (or max_iters). An empty v0 starts
 * from a fixed ramp vector; passing the previous v warm-starts the iteration.
 */
PowerIterResult spectral_norm_settled(const DenseMatrix& a, double tol,
                                      std::size_t max_iters,
                                      const DenseVector& v0 = {});

/**
 * All min(rows, cols) singular values, descending, via one-sided Jacobi
 * rotations (cyclic sweeps until every column pair is numerically orthogonal).
 */
std::vector<double> singular_spectrum(const DenseMatrix& a);

}  // namespace lipnn

#endif  // LIPNN_LINALG_HPP_

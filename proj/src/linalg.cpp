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

#include "lipnn/linalg.hpp"

#include <cblas.h>
#include <cpuid.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "lipnn/rng.hpp"

namespace {

// OpenBLAS picks a slow generic kernel on virtualized CPUs whose model string
// it does not recognize. Pin the AVX-512 kernel before the library
// initializes; this constructor must outrun OpenBLAS's own one, which is why
// the build links libopenblas statically. __builtin_cpu_supports is not
// usable this early, hence raw cpuid.
bool cpu_has_avx512f() {
    unsigned eax, ebx, ecx, edx;
    if (!__get_cpuid_count(7, 0, &eax, &ebx, &ecx, &edx)) return false;
    return (ebx >> 16) & 1u;
}

__attribute__((constructor(101))) void pin_blas_kernel() {
    if (cpu_has_avx512f()) setenv("OPENBLAS_CORETYPE", "SKYLAKEX", 0);
    setenv("OPENBLAS_NUM_THREADS", "1", 0);
}

[[noreturn]] void dim_error(const std::string& what) {
    throw std::invalid_argument("linalg: " + what);
}

void require_nonempty(const lipnn::DenseMatrix& a, const char* op) {
    if (a.empty()) dim_error(std::string(op) + ": empty matrix");
}

}  // namespace

namespace lipnn {

DenseMatrix identity(std::size_t n) {
    DenseMatrix a(n, n);
    for (std::size_t i = 0; i < n; ++i) a(i, i) = 1.0;
    return a;
}

DenseMatrix transpose(const DenseMatrix& a) {
    DenseMatrix t(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
    return t;
}

DenseMatrix make_matrix(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    DenseMatrix m(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
        if (row.size() != c) dim_error("make_matrix: ragged rows");
        std::size_t j = 0;
        for (double x : row) m(i, j++) = x;
        ++i;
    }
    return m;
}

namespace {

DenseMatrix gemm(bool ta, bool tb, const DenseMatrix& a, const DenseMatrix& b) {
    const std::size_t m = ta ? a.cols : a.rows;
    const std::size_t k = ta ? a.rows : a.cols;
    const std::size_t kb = tb ? b.cols : b.rows;
    const std::size_t n = tb ? b.rows : b.cols;
    if (k != kb)
        dim_error("matmul: inner dimensions differ (" + std::to_string(k) +
                  " vs " + std::to_string(kb) + ")");
    DenseMatrix c(m, n);
    if (m == 0 || n == 0 || k == 0) return c;
    cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans,
                tb ? CblasTrans : CblasNoTrans, static_cast<int>(m),
                static_cast<int>(n), static_cast<int>(k), 1.0, a.data.data(),
                static_cast<int>(a.cols), b.data.data(),
                static_cast<int>(b.cols), 0.0, c.data.data(),
                static_cast<int>(c.cols));
    return c;
}

// C = A^T A or A A^T through dsyrk (half the flops of a general product),
// mirrored to a full symmetric matrix afterwards.
DenseMatrix syrk(const DenseMatrix& a, bool right) {
    const std::size_t n = right ? a.rows : a.cols;
    DenseMatrix c(n, n);
    if (n == 0 || a.data.empty()) return c;
    cblas_dsyrk(CblasRowMajor, CblasUpper, right ? CblasNoTrans : CblasTrans,
                static_cast<int>(n),
                static_cast<int>(right ? a.cols : a.rows), 1.0, a.data.data(),
                static_cast<int>(a.cols), 0.0, c.data.data(),
                static_cast<int>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) c(i, j) = c(j, i);
    return c;
}

}  // namespace

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) { return gemm(false, false, a, b); }
DenseMatrix matmul_ta(const DenseMatrix& a, const DenseMatrix& b) { return gemm(true, false, a, b); }
DenseMatrix matmul_tb(const DenseMatrix& a, const DenseMatrix& b) { return gemm(false, true, a, b); }

DenseMatrix gram(const DenseMatrix& a) { return syrk(a, false); }
DenseMatrix gram_right(const DenseMatrix& a) { return syrk(a, true); }

DenseVector matvec(const DenseMatrix& a, const DenseVector& x) {
    if (a.cols != x.size()) dim_error("matvec: size mismatch");
    DenseVector y(a.rows, 0.0);
    if (!a.data.empty()) {
        cblas_dgemv(CblasRowMajor, CblasNoTrans, static_cast<int>(a.rows),
                    static_cast<int>(a.cols), 1.0, a.data.data(),
                    static_cast<int>(a.cols), x.data(), 1, 0.0, y.data(), 1);
    }
    return y;
}

DenseVector matvec_t(const DenseMatrix& a, const DenseVector& y) {
    if (a.rows != y.size()) dim_error("matvec_t: size mismatch");
    DenseVector x(a.cols, 0.0);
    if (!a.data.empty()) {
        cblas_dgemv(CblasRowMajor, CblasTrans, static_cast<int>(a.rows),
                    static_cast<int>(a.cols), 1.0, a.data.data(),
                    static_cast<int>(a.cols), y.data(), 1, 0.0, x.data(), 1);
    }
    return x;
}

double dot(const DenseVector& a, const DenseVector& b) {
    if (a.size() != b.size()) dim_error("dot: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm1(const DenseVector& v) {
    double s = 0.0;
    for (double x : v) s += std::fabs(x);
    return s;
}

double norm2(const DenseVector& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double norm_inf(const DenseVector& v) {
    double s = 0.0;
    for (double x : v) s = std::max(s, std::fabs(x));
    return s;
}

void add_scaled(DenseMatrix& y, double alpha, const DenseMatrix& x) {
    if (y.rows != x.rows || y.cols != x.cols) dim_error("add_scaled: shape mismatch");
    for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += alpha * x.data[i];
}

void add_scaled(DenseVector& y, double alpha, const DenseVector& x) {
    if (y.size() != x.size()) dim_error("add_scaled: size mismatch");
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

void scale_inplace(DenseMatrix& a, double alpha) {
    for (double& x : a.data) x *= alpha;
}

void scale_inplace(DenseVector& v, double alpha) {
    for (double& x : v) x *= alpha;
}

double frob_inner(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows != b.rows || a.cols != b.cols) dim_error("frob_inner: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
    return s;
}

double frob_norm(const DenseMatrix& a) {
    double s = 0.0;
    for (double x : a.data) s += x * x;
    return std::sqrt(s);
}

double matrix_inf_norm(const DenseMatrix& a) {
    require_nonempty(a, "matrix_inf_norm");
    double best = 0.0;
    for (std::size_t i = 0; i < a.rows; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols; ++j) s += std::fabs(a(i, j));
        best = std::max(best, s);
    }
    return best;
}

double mixed_norm_p_inf(const DenseMatrix& a, double p) {
    require_nonempty(a, "mixed_norm_p_inf");
    const bool is_inf = std::isinf(p) && p > 0;
    if (!is_inf && p != 1.0 && p != 2.0)
        dim_error("mixed_norm_p_inf: p must be 1, 2, or infinity");
    double best = 0.0;
    for (std::size_t i = 0; i < a.rows; ++i) {
        double s = 0.0;
        if (p == 1.0) {  // dual norm of l1 is l-infinity
            for (std::size_t j = 0; j < a.cols; ++j)
                s = std::max(s, std::fabs(a(i, j)));
        } else if (p == 2.0) {
            for (std::size_t j = 0; j < a.cols; ++j) s += a(i, j) * a(i, j);
            s = std::sqrt(s);
        } else {  // dual norm of l-infinity is l1
            for (std::size_t j = 0; j < a.cols; ++j) s += std::fabs(a(i, j));
        }
        best = std::max(best, s);
    }
    return best;
}

namespace {

DenseVector unit_axis(std::size_t n) {
    DenseVector e(n, 0.0);
    if (n) e[0] = 1.0;
    return e;
}

void normalize(DenseVector& v, double n) {
    for (double& x : v) x /= n;
}

// Shared power-iteration core. Runs until `iters` or, when tol > 0, until the
// estimate settles. The estimate sequence ||A^T u_k|| is non-decreasing.
PowerIterResult power_iterate(const DenseMatrix& a, std::size_t max_iters,
                              double tol, DenseVector v) {
    require_nonempty(a, "spectral_norm");
    PowerIterResult r;
    double nv = norm2(v);
    if (nv == 0.0) v[0] = 1.0; else normalize(v, nv);

    double prev = -1.0;
    for (std::size_t k = 0; k < max_iters; ++k) {
        DenseVector w = matvec(a, v);
        const double nw = norm2(w);
        if (nw == 0.0) {  // zero (or numerically zero) matrix
            return {0.0, unit_axis(a.rows), unit_axis(a.cols), k};
        }
        normalize(w, nw);
        DenseVector t = matvec_t(a, w);
        const double nt = norm2(t);
        if (nt == 0.0) return {0.0, unit_axis(a.rows), unit_axis(a.cols), k};
        normalize(t, nt);
        r.u = std::move(w);
        v = std::move(t);
        r.sigma = nt;
        r.iters = k + 1;
        if (tol > 0.0 && std::fabs(nt - prev) <= tol * std::max(1.0, nt)) break;
        prev = nt;
    }
    r.v = std::move(v);
    if (r.u.empty()) {  // max_iters == 0: report a raw Rayleigh estimate
        r.u = unit_axis(a.rows);
        r.sigma = 0.0;
    }
    return r;
}

}  // namespace

PowerIterResult spectral_norm_power_iteration(const DenseMatrix& a,
                                              std::size_t iters,
                                              std::uint64_t seed) {
    require_nonempty(a, "spectral_norm_power_iteration");
    Rng rng(seed);
    DenseVector v(a.cols);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    return power_iterate(a, iters, 0.0, std::move(v));
}

PowerIterResult spectral_norm_settled(const DenseMatrix& a, double tol,
                                      std::size_t max_iters,
                                      const DenseVector& v0) {
    require_nonempty(a, "spectral_norm_settled");
    DenseVector v = v0;
    if (v.size() != a.cols) {
        v.assign(a.cols, 0.0);
        for (std::size_t j = 0; j < a.cols; ++j)
            v[j] = 1.0 + static_cast<double>(j) / static_cast<double>(a.cols + 1);
    }
    return power_iterate(a, max_iters, tol, std::move(v));
}

std::vector<double> singular_spectrum(const DenseMatrix& a) {
    require_nonempty(a, "singular_spectrum");
    // One-sided Jacobi orthogonalizes columns; work on the transpose when the
    // matrix is wide so columns never outnumber rows.
    DenseMatrix w = a.rows >= a.cols ? a : transpose(a);
    const std::size_t m = w.rows, n = w.cols;

    const double tol = 1e-12;
    const std::size_t max_sweeps = 100;
    bool rotated = true;
    std::size_t sweep = 0;
    for (; sweep < max_sweeps && rotated; ++sweep) {
        rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double app = 0.0, aqq = 0.0, apq = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    const double xp = w(i, p), xq = w(i, q);
                    app += xp * xp;
                    aqq += xq * xq;
                    apq += xp * xq;
                }
                if (std::fabs(apq) <= tol * std::sqrt(app * aqq)) continue;
                rotated = true;
                const double zeta = (aqq - app) / (2.0 * apq);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < m; ++i) {
                    const double xp = w(i, p), xq = w(i, q);
                    w(i, p) = c * xp - s * xq;
                    w(i, q) = s * xp + c * xq;
                }
            }
        }
    }
    if (rotated)
        throw std::runtime_error("singular_spectrum: Jacobi sweeps did not converge");

    std::vector<double> sigma(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) s += w(i, j) * w(i, j);
        sigma[j] = std::sqrt(s);
    }
    std::sort(sigma.begin(), sigma.end(), std::greater<double>());
    return sigma;
}

}  // namespace lipnn

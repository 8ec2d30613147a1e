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

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <doctest.h>

#include "lipnn/linalg.hpp"
#include "support/oracles.hpp"

using namespace lipnn;

namespace {

DenseMatrix from_eigen(const oracles::RowMajor& m) {
    DenseMatrix out(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = m.data()[i];
    return out;
}

}  // namespace

TEST_CASE("matrix products match Eigen") {
    const DenseMatrix a = oracles::random_matrix(17, 9, 11);
    const DenseMatrix b = oracles::random_matrix(9, 13, 12);
    const DenseMatrix c = oracles::random_matrix(17, 13, 13);

    const auto ea = oracles::eigen_view(a);
    const auto eb = oracles::eigen_view(b);
    const auto ec = oracles::eigen_view(c);

    CHECK(oracles::max_abs_diff(matmul(a, b), from_eigen(ea * eb)) <= 1e-13);
    CHECK(oracles::max_abs_diff(matmul_ta(a, c), from_eigen(ea.transpose() * ec)) <= 1e-13);
    CHECK(oracles::max_abs_diff(matmul_tb(b, c), from_eigen(eb * ec.transpose())) <= 1e-13);
    CHECK(oracles::max_abs_diff(gram(a), from_eigen(ea.transpose() * ea)) <= 1e-13);
    CHECK(oracles::max_abs_diff(gram_right(a), from_eigen(ea * ea.transpose())) <= 1e-13);
}

TEST_CASE("matrix-vector products match Eigen") {
    const DenseMatrix a = oracles::random_matrix(23, 15, 21);
    const DenseVector x = oracles::random_vector(15, 22);
    const DenseVector y = oracles::random_vector(23, 23);

    const auto ea = oracles::eigen_view(a);
    const Eigen::VectorXd ex = Eigen::Map<const Eigen::VectorXd>(x.data(), 15);
    const Eigen::VectorXd ey = Eigen::Map<const Eigen::VectorXd>(y.data(), 23);

    const Eigen::VectorXd ax = ea * ex;
    const Eigen::VectorXd aty = ea.transpose() * ey;
    const DenseVector got_ax = matvec(a, x);
    const DenseVector got_aty = matvec_t(a, y);
    for (std::size_t i = 0; i < got_ax.size(); ++i) {
        CHECK(got_ax[i] == doctest::Approx(ax[static_cast<Eigen::Index>(i)]).epsilon(1e-13));
    }
    for (std::size_t i = 0; i < got_aty.size(); ++i) {
        CHECK(got_aty[i] == doctest::Approx(aty[static_cast<Eigen::Index>(i)]).epsilon(1e-13));
    }
}

TEST_CASE("products are bitwise deterministic run to run") {
    const DenseMatrix a = oracles::random_matrix(64, 64, 31);
    const DenseMatrix b = oracles::random_matrix(64, 64, 32);
    const DenseMatrix p1 = matmul(a, b);
    const DenseMatrix p2 = matmul(a, b);
    CHECK(p1.data == p2.data);
    const DenseVector x = oracles::random_vector(64, 33);
    CHECK(matvec(a, x) == matvec(a, x));
}

TEST_CASE("vector norms on a 3-4-5 triangle") {
    const DenseVector v{3.0, -4.0};
    CHECK(norm1(v) == 7.0);
    CHECK(norm2(v) == 5.0);
    CHECK(norm_inf(v) == 4.0);
    CHECK(dot(v, DenseVector{2.0, 1.0}) == 2.0);
}

TEST_CASE("operator infinity norm is the largest absolute row sum") {
    const DenseMatrix a = make_matrix({{1.0, -2.0}, {3.0, 0.5}});
    CHECK(matrix_inf_norm(a) == 3.5);
}

TEST_CASE("mixed (p, inf) norms equal the largest dual row norm") {
    const DenseMatrix a = oracles::random_matrix(7, 5, 41);
    double row_l1 = 0.0, row_l2 = 0.0, row_linf = 0.0;
    for (std::size_t i = 0; i < a.rows; ++i) {
        double s1 = 0.0, s2 = 0.0, si = 0.0;
        for (std::size_t j = 0; j < a.cols; ++j) {
            s1 += std::fabs(a(i, j));
            s2 += a(i, j) * a(i, j);
            si = std::max(si, std::fabs(a(i, j)));
        }
        row_l1 = std::max(row_l1, s1);
        row_l2 = std::max(row_l2, std::sqrt(s2));
        row_linf = std::max(row_linf, si);
    }
    // Dual exponents: p=1 pairs with the max entry, p=2 with itself, and
    // p=inf with the row sum (the operator infinity norm).
    CHECK(mixed_norm_p_inf(a, 1.0) == doctest::Approx(row_linf).epsilon(1e-15));
    CHECK(mixed_norm_p_inf(a, 2.0) == doctest::Approx(row_l2).epsilon(1e-15));
    CHECK(mixed_norm_p_inf(a, std::numeric_limits<double>::infinity()) ==
          doctest::Approx(row_l1).epsilon(1e-15));
    CHECK(matrix_inf_norm(a) ==
          mixed_norm_p_inf(a, std::numeric_limits<double>::infinity()));
}

TEST_CASE("transpose and identity behave") {
    const DenseMatrix a = oracles::random_matrix(6, 11, 51);
    const DenseMatrix t = transpose(a);
    REQUIRE(t.rows == 11);
    REQUIRE(t.cols == 6);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t j = 0; j < a.cols; ++j) CHECK(t(j, i) == a(i, j));
    }
    CHECK(oracles::max_abs_diff(matmul(a, identity(11)), a) == 0.0);
}

TEST_CASE("in-place updates and Frobenius products") {
    DenseMatrix a = make_matrix({{1.0, 2.0}, {3.0, 4.0}});
    const DenseMatrix b = make_matrix({{1.0, 0.0}, {0.0, 1.0}});
    add_scaled(a, 2.0, b);
    CHECK(a(0, 0) == 3.0);
    CHECK(a(1, 1) == 6.0);
    scale_inplace(a, 0.5);
    CHECK(a(0, 1) == 1.0);
    CHECK(frob_inner(b, b) == 2.0);
    CHECK(frob_norm(make_matrix({{3.0, 4.0}})) == 5.0);

    DenseVector v{1.0, -2.0};
    scale_inplace(v, -2.0);
    CHECK(v == DenseVector{-2.0, 4.0});
    add_scaled(v, 1.0, DenseVector{2.0, -4.0});
    CHECK(v == DenseVector{0.0, 0.0});
}

TEST_CASE("power iteration reaches the oracle's top singular value") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const std::size_t rows = 3 + seed % 37;
        const std::size_t cols = 3 + (seed * 7) % 29;
        const DenseMatrix a = oracles::random_matrix(rows, cols, 1000 + seed);
        const double want = oracles::spectral_norm(a);
        const PowerIterResult settled = spectral_norm_settled(a, 1e-12, 20000);
        CHECK(settled.sigma == doctest::Approx(want).epsilon(1e-7));
        CHECK(settled.sigma <= want * (1.0 + 1e-12));  // estimates never overshoot
        CHECK(norm2(settled.u) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(norm2(settled.v) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("seeded power iteration is reproducible and bounded by the oracle") {
    const DenseMatrix a = oracles::random_matrix(25, 18, 77);
    const PowerIterResult r1 = spectral_norm_power_iteration(a, 60, 5);
    const PowerIterResult r2 = spectral_norm_power_iteration(a, 60, 5);
    CHECK(r1.sigma == r2.sigma);
    CHECK(r1.v == r2.v);
    CHECK(r1.sigma <= oracles::spectral_norm(a) * (1.0 + 1e-12));
}

TEST_CASE("full singular spectrum matches the Jacobi SVD oracle") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const std::size_t rows = 4 + seed * 3;
        const std::size_t cols = seed % 2 ? rows + 5 : rows;  // square and wide
        const DenseMatrix a = oracles::random_matrix(rows, cols, 300 + seed);
        std::vector<double> got = singular_spectrum(a);
        std::vector<double> want = oracles::svd_singular_values(a);
        std::sort(got.rbegin(), got.rend());
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-9));
        }
    }
}

TEST_CASE("shape mismatches raise invalid_argument with context") {
    const DenseMatrix a = oracles::random_matrix(3, 4, 1);
    const DenseMatrix b = oracles::random_matrix(3, 4, 2);
    CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("inner dimensions differ"),
                         std::invalid_argument);
    CHECK_THROWS_AS(matvec(a, DenseVector(3, 0.0)), std::invalid_argument);
    CHECK_THROWS_AS(matvec_t(a, DenseVector(4, 0.0)), std::invalid_argument);
    CHECK_THROWS_AS(dot(DenseVector(2, 0.0), DenseVector(3, 0.0)), std::invalid_argument);
    CHECK_THROWS_AS(spectral_norm_settled(DenseMatrix(), 1e-6, 10), std::invalid_argument);
    CHECK_THROWS_WITH_AS(make_matrix({{1.0, 2.0}, {3.0}}), doctest::Contains("ragged"),
                         std::invalid_argument);
}

TEST_CASE("zero matrices have zero spectral norm and keep unit directions") {
    const DenseMatrix z(4, 6);
    const PowerIterResult r = spectral_norm_settled(z, 1e-10, 50);
    CHECK(r.sigma == 0.0);
    CHECK(norm2(r.u) == 1.0);
    CHECK(norm2(r.v) == 1.0);
}

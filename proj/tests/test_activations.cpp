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

#include <cmath>
#include <cstdlib>
#include <stdexcept>

#include <doctest.h>

#include "lipnn/activations.hpp"
#include "lipnn/rng.hpp"
#include "support/oracles.hpp"

using namespace lipnn;

TEST_CASE("group sort orders each contiguous group ascending") {
    const DenseVector z{3.0, 1.0, 2.0, 5.0};
    CHECK(apply_activation(ActivationKind::group_sort(2), z) == DenseVector{1.0, 3.0, 2.0, 5.0});
    CHECK(apply_activation(ActivationKind::maxmin(), z) == DenseVector{1.0, 3.0, 2.0, 5.0});
    CHECK(apply_activation(ActivationKind::fullsort(), z) == DenseVector{1.0, 2.0, 3.0, 5.0});
    CHECK(apply_activation(ActivationKind::group_sort(4), z) ==
          apply_activation(ActivationKind::fullsort(), z));
}

TEST_CASE("pointwise kinds and maxout") {
    const DenseVector z{1.5, -2.0, 0.0};
    CHECK(apply_activation(ActivationKind::relu(), z) == DenseVector{1.5, 0.0, 0.0});
    CHECK(apply_activation(ActivationKind::absolute_value(), z) == DenseVector{1.5, 2.0, 0.0});
    CHECK(apply_activation(ActivationKind::identity(), z) == z);
    CHECK(apply_activation(ActivationKind::maxout(3), DenseVector{1.0, 5.0, 2.0, -1.0, -7.0,
                                                                  -3.0}) ==
          DenseVector{5.0, -1.0});
}

TEST_CASE("group resolution and output widths") {
    CHECK(activation_group(ActivationKind::maxmin(), 8) == 2);
    CHECK(activation_group(ActivationKind::fullsort(), 8) == 8);
    CHECK(activation_group(ActivationKind::group_sort(4), 8) == 4);
    CHECK(activation_output_width(ActivationKind::maxout(2), 8) == 4);
    CHECK(activation_output_width(ActivationKind::relu(), 8) == 8);
    CHECK(is_sort_family(ActivationKind::maxmin()));
    CHECK(is_sort_family(ActivationKind::fullsort()));
    CHECK(!is_sort_family(ActivationKind::relu()));
    CHECK_THROWS_AS(activation_group(ActivationKind::group_sort(3), 8), std::invalid_argument);
    CHECK_THROWS_AS(apply_activation(ActivationKind::maxmin(), DenseVector{1.0, 2.0, 3.0}),
                    std::invalid_argument);
}

TEST_CASE("sorting is stable on ties") {
    ActivationTrace trace;
    apply_activation_traced(ActivationKind::fullsort(), DenseVector{2.0, 2.0, 1.0}, trace);
    // The two equal entries keep their original relative order.
    CHECK(trace.perm == std::vector<std::uint32_t>{2, 0, 1});
}

TEST_CASE("sort jacobians are permutation matrices") {
    const DenseVector z = oracles::random_vector(8, 91, 2.0);
    for (const ActivationKind& kind :
         {ActivationKind::maxmin(), ActivationKind::fullsort(), ActivationKind::group_sort(4)}) {
        const DenseMatrix j = activation_jacobian(kind, z);
        const DenseVector out = apply_activation(kind, z);
        REQUIRE(j.rows == 8);
        REQUIRE(j.cols == 8);
        std::size_t ones = 0;
        for (double v : j.data) {
            CHECK((v == 0.0 || v == 1.0));
            if (v == 1.0) ++ones;
        }
        CHECK(ones == 8);
        // J z reproduces the sorted output exactly.
        CHECK(oracles::max_abs_diff(matvec(j, z), out) == 0.0);
        // Permutations are orthogonal.
        CHECK(oracles::max_abs_diff(gram(j), identity(8)) == 0.0);
    }
}

TEST_CASE("jacobians match central differences away from ties") {
    const DenseVector z{0.7, -1.3, 2.1, 0.4, -0.6, 1.9};
    for (const ActivationKind& kind :
         {ActivationKind::maxmin(), ActivationKind::fullsort(), ActivationKind::relu(),
          ActivationKind::absolute_value(), ActivationKind::maxout(2)}) {
        const DenseMatrix j = activation_jacobian(kind, z);
        const std::size_t out_width = activation_output_width(kind, z.size());
        for (std::size_t row = 0; row < out_width; ++row) {
            const DenseVector num = oracles::central_diff(
                [&](const DenseVector& x) { return apply_activation(kind, x)[row]; }, z, 1e-6);
            for (std::size_t colv = 0; colv < z.size(); ++colv) {
                CHECK(j(row, colv) == doctest::Approx(num[colv]).epsilon(1e-8));
            }
        }
    }
}

TEST_CASE("traces replay the activation's linear action") {
    Rng rng(7);
    for (const ActivationKind& kind :
         {ActivationKind::maxmin(), ActivationKind::fullsort(), ActivationKind::relu(),
          ActivationKind::absolute_value(), ActivationKind::maxout(2),
          ActivationKind::identity()}) {
        DenseVector z(12);
        for (double& v : z) v = rng.uniform(-2.0, 2.0);
        ActivationTrace trace;
        const DenseVector out = apply_activation_traced(kind, z, trace);
        CHECK(out == apply_activation(kind, z));

        const DenseMatrix j = activation_jacobian(kind, z);
        DenseVector tangent(12), cotangent(out.size());
        for (double& v : tangent) v = rng.uniform(-1.0, 1.0);
        for (double& v : cotangent) v = rng.uniform(-1.0, 1.0);

        CHECK(oracles::max_abs_diff(activation_trace_jvp(trace, tangent), matvec(j, tangent)) ==
              0.0);
        CHECK(oracles::max_abs_diff(activation_trace_vjp(trace, 12, cotangent),
                                    matvec_t(j, cotangent)) == 0.0);
        // Adjoint identity <J v, w> = <v, J^T w>.
        CHECK(dot(activation_trace_jvp(trace, tangent), cotangent) ==
              doctest::Approx(dot(tangent, activation_trace_vjp(trace, 12, cotangent)))
                  .epsilon(1e-12));
    }
}

TEST_CASE("rectifier and absolute value rebuilt from two-unit sorting") {
    Rng rng(17);
    for (int i = 0; i < 1000; ++i) {
        const double x = rng.uniform(-3.0, 3.0);
        CHECK(std::fabs(construct_relu_via_maxmin(x) - std::max(x, 0.0)) <= 1e-12);
        CHECK(std::fabs(construct_abs_via_maxmin(x) - std::fabs(x)) <= 1e-12);
    }
}

TEST_CASE("full sorting recovers pairwise min-max given a dominating shift") {
    Rng rng(18);
    for (int i = 0; i < 1000; ++i) {
        DenseVector z(6);
        for (double& v : z) v = rng.uniform(-2.0, 2.0);
        const DenseVector got = fullsort_implements_maxmin(z, 2.0);
        const DenseVector want = apply_activation(ActivationKind::maxmin(), z);
        CHECK(oracles::max_abs_diff(got, want) <= 1e-12);
    }
}

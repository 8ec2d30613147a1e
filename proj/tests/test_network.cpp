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
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <doctest.h>

#include "lipnn/activations.hpp"
#include "lipnn/constraints.hpp"
#include "lipnn/network.hpp"
#include "lipnn/rng.hpp"
#include "support/oracles.hpp"

using namespace lipnn;

namespace {

/// Fills every weight and bias of a zero-initialized net with uniform draws.
void fill_random(LipschitzNet& net, std::uint64_t seed, double scale = 1.0) {
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        LipschitzLayer& layer = net.layers[l];
        layer.w_raw = oracles::random_matrix(layer.w_raw.rows, layer.w_raw.cols,
                                             Rng::mix(seed, l), scale);
        layer.b = oracles::random_vector(layer.b.size(), Rng::mix(seed, 100 + l), 0.3);
    }
    bump_version(net);
}

/// Single affine layer y = W x + b with no constraint, as a one-layer net.
LipschitzNet linear_net(const DenseMatrix& w, const DenseVector& b) {
    LipschitzNet net;
    LipschitzLayer layer;
    layer.w_raw = w;
    layer.b = b;
    layer.constraint = ConstraintKind::unconstrained();
    layer.activation = ActivationKind::identity();
    net.layers.push_back(std::move(layer));
    return net;
}

/// Input Jacobian assembled row by row from reverse-mode passes.
DenseMatrix assemble_jacobian(const LipschitzNet& net, const DenseVector& x) {
    const auto [y, tape] = forward(net, x);
    DenseMatrix j(y.size(), x.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        DenseVector dy(y.size(), 0.0);
        dy[i] = 1.0;
        const DenseVector dx = backward_input(net, tape, dy);
        for (std::size_t k = 0; k < x.size(); ++k) j(i, k) = dx[k];
    }
    return j;
}

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("forward reproduces the identity map through an identity layer") {
    LipschitzNet net = linear_net(identity(4), DenseVector(4, 0.0));
    const DenseVector x = oracles::random_vector(4, 17);
    const auto [y, tape] = forward(net, x);
    for (std::size_t i = 0; i < 4; ++i) CHECK(y[i] == x[i]);
    CHECK(tape.layer_inputs.size() == 1);
    CHECK(tape.output.size() == 4);
}

TEST_CASE("forward computes the absolute value through a two-layer min-max net") {
    LipschitzNet net;
    LipschitzLayer first;
    first.w_raw = DenseMatrix(2, 1);
    first.w_raw(0, 0) = 1.0;
    first.w_raw(1, 0) = -1.0;
    first.b.assign(2, 0.0);
    first.constraint = ConstraintKind::unconstrained();
    first.activation = ActivationKind::maxmin();
    net.layers.push_back(first);

    // The in-group sort is ascending, so the max lands in the second slot.
    LipschitzLayer second;
    second.w_raw = DenseMatrix(1, 2);
    second.w_raw(0, 0) = 0.0;
    second.w_raw(0, 1) = 1.0;
    second.b.assign(1, 0.0);
    second.constraint = ConstraintKind::unconstrained();
    second.activation = ActivationKind::identity();
    net.layers.push_back(second);

    for (double x : {-3.0, 2.5, 0.0, -0.125}) {
        CHECK(forward(net, DenseVector{x}).first[0] == std::fabs(x));
    }
}

TEST_CASE("forward rejects width mismatches and empty nets") {
    LipschitzNet net = linear_net(identity(4), DenseVector(4, 0.0));
    CHECK_THROWS_WITH_AS(forward(net, DenseVector(3, 0.0)),
                         doctest::Contains("does not match net input"), std::invalid_argument);
    LipschitzNet empty;
    CHECK_THROWS_WITH_AS(forward(empty, DenseVector(1, 0.0)),
                         doctest::Contains("no layers"), std::invalid_argument);
}

TEST_CASE("backward through a linear layer selects the cotangent-weighted rows") {
    const DenseMatrix w = oracles::random_matrix(3, 5, 21);
    const DenseVector x = oracles::random_vector(5, 22);
    LipschitzNet net = linear_net(w, oracles::random_vector(3, 23));
    const auto [y, tape] = forward(net, x);

    DenseVector dy(3, 0.0);
    dy[0] = 1.0;
    const auto [grads, dx] = backward(net, tape, dy);
    for (std::size_t j = 0; j < 5; ++j) CHECK(dx[j] == w(0, j));

    // d/dW of <e1, Wx + b> is the outer product e1 xT; d/db is e1.
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 5; ++j) {
            CHECK(grads.d_w_raw[0](i, j) == (i == 0 ? x[j] : 0.0));
        }
        CHECK(grads.d_b[0][i] == dy[i]);
    }
}

TEST_CASE("sorting layers with orthonormal weights preserve gradient norms") {
    LipschitzNet net;
    for (std::size_t l = 0; l < 3; ++l) {
        LipschitzLayer layer;
        layer.w_raw = oracles::random_spectrum_matrix(6, 40 + l, 1.0, 1.0);
        layer.b = oracles::random_vector(6, 50 + l, 0.2);
        layer.constraint = ConstraintKind::unconstrained();
        layer.activation = ActivationKind::maxmin();
        net.layers.push_back(std::move(layer));
    }
    for (std::uint64_t probe = 0; probe < 20; ++probe) {
        const DenseVector x = oracles::random_vector(6, 60 + probe);
        const DenseVector dy = oracles::random_vector(6, 80 + probe);
        const auto [y, tape] = forward(net, x);
        const DenseVector dx = backward_input(net, tape, dy);
        CHECK(std::fabs(norm2(dx) - norm2(dy)) <= 1e-12);
    }
}

TEST_CASE("input gradients match central differences on sorting nets") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        LipschitzNet net = make_dense_net(5, 6, 2, 3, ActivationKind::maxmin(),
                                          ConstraintKind::unconstrained(), NormFamily::Two, 1.0);
        fill_random(net, 300 + seed);
        const DenseVector x = oracles::random_vector(5, 900 + seed);
        const DenseVector c = oracles::random_vector(3, 950 + seed);

        const auto [y, tape] = forward(net, x);
        const DenseVector got = backward_input(net, tape, c);
        const DenseVector want = oracles::central_diff(
            [&](const DenseVector& xv) { return dot(c, forward(net, xv).first); }, x);
        CHECK(oracles::max_rel_diff(got, want) <= 1e-5);
    }
}

TEST_CASE("parameter gradients match central differences through enforcement") {
    // Training-phase enforcement (three orthonormalization iterations) keeps
    // the constraint differentiable; the pinned seeds avoid sort ties and
    // power-iteration stopping boundaries, both measure-zero.
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const ConstraintKind constraint =
            (seed % 2 == 0) ? ConstraintKind::bjorck() : ConstraintKind::unconstrained();
        const ActivationKind activation =
            (seed % 3 == 0) ? ActivationKind::group_sort(2) : ActivationKind::maxmin();
        LipschitzNet net =
            make_dense_net(4, 4, 2, 3, activation, constraint, NormFamily::Two, 1.0);
        net.eval_phase = Phase::Train;
        fill_random(net, 1000 + seed);

        const DenseVector x = oracles::random_vector(4, 1100 + seed);
        const DenseVector c = oracles::random_vector(3, 1150 + seed);
        const auto [y, tape] = forward(net, x);
        const auto [grads, dx] = backward(net, tape, c);

        for (std::size_t l = 0; l < net.layers.size(); ++l) {
            const DenseMatrix want_w = oracles::central_diff_matrix(
                [&](const DenseMatrix& m) {
                    LipschitzNet probe = net;
                    probe.layers[l].w_raw = m;
                    bump_version(probe);
                    return dot(c, forward(probe, x).first);
                },
                net.layers[l].w_raw);
            CHECK(oracles::max_rel_diff(grads.d_w_raw[l], want_w) <= 1e-5);

            const DenseVector want_b = oracles::central_diff(
                [&](const DenseVector& bv) {
                    LipschitzNet probe = net;
                    probe.layers[l].b = bv;
                    bump_version(probe);
                    return dot(c, forward(probe, x).first);
                },
                net.layers[l].b);
            CHECK(oracles::max_rel_diff(grads.d_b[l], want_b) <= 1e-5);
        }

        const DenseVector want_dx = oracles::central_diff(
            [&](const DenseVector& xv) { return dot(c, forward(net, xv).first); }, x);
        CHECK(oracles::max_rel_diff(dx, want_dx) <= 1e-5);
    }
}

TEST_CASE("backward rejects tapes from stale parameters or a changed phase") {
    LipschitzNet net = make_dense_net(4, 4, 1, 2, ActivationKind::maxmin(),
                                      ConstraintKind::bjorck(), NormFamily::Two, 1.0);
    fill_random(net, 7);
    const auto [y, tape] = forward(net, DenseVector(4, 0.25));
    const DenseVector dy(2, 1.0);

    bump_version(net);
    CHECK_THROWS_WITH_AS(backward(net, tape, dy), doctest::Contains("stale tape"),
                         std::runtime_error);

    LipschitzNet net2 = net;
    const auto [y2, tape2] = forward(net2, DenseVector(4, 0.25));
    net2.eval_phase = Phase::Train;
    CHECK_THROWS_WITH_AS(backward_input(net2, tape2, dy), doctest::Contains("stale tape"),
                         std::runtime_error);
}

TEST_CASE("forward-mode directional derivatives match the assembled jacobian") {
    LipschitzNet id_net = linear_net(identity(3), DenseVector(3, 0.0));
    const DenseVector v0 = oracles::random_vector(3, 5);
    const DenseVector jv0 = input_jvp(id_net, DenseVector(3, 0.5), v0);
    for (std::size_t i = 0; i < 3; ++i) CHECK(jv0[i] == v0[i]);

    const DenseMatrix w = oracles::random_matrix(4, 3, 6);
    LipschitzNet lin = linear_net(w, oracles::random_vector(4, 8));
    const DenseVector jv1 = input_jvp(lin, DenseVector(3, -0.25), v0);
    const DenseVector want = matvec(w, v0);
    for (std::size_t i = 0; i < 4; ++i) CHECK(jv1[i] == want[i]);

    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        LipschitzNet net = make_dense_net(5, 6, 2, 4, ActivationKind::maxmin(),
                                          ConstraintKind::unconstrained(), NormFamily::Two, 1.0);
        fill_random(net, 2000 + seed);
        const DenseVector x = oracles::random_vector(5, 2100 + seed);
        const DenseVector v = oracles::random_vector(5, 2200 + seed);
        const DenseMatrix j = assemble_jacobian(net, x);
        CHECK(oracles::max_abs_diff(input_jvp(net, x, v), matvec(j, v)) <= 1e-8);

        const auto [y, tape] = forward(net, x);
        CHECK(oracles::max_abs_diff(input_jvp_from_tape(net, tape, v),
                                    input_jvp(net, x, v)) == 0.0);
    }

    CHECK_THROWS_WITH_AS(input_jvp(lin, DenseVector(3, 0.0), DenseVector(2, 0.0)),
                         doctest::Contains("tangent width mismatch"), std::invalid_argument);
}

TEST_CASE("power iteration on the input jacobian matches the assembled spectrum") {
    DenseMatrix diag(2, 2);
    diag(0, 0) = 2.0;
    diag(1, 1) = 1.0;
    LipschitzNet lin = linear_net(diag, DenseVector(2, 0.0));
    CHECK(std::fabs(input_jacobian_spectral_norm(lin, DenseVector(2, 0.3), 100, 1) - 2.0) <=
          1e-6);

    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        LipschitzNet net = make_dense_net(5, 6, 2, 4, ActivationKind::maxmin(),
                                          ConstraintKind::unconstrained(), NormFamily::Two, 1.0);
        fill_random(net, 3000 + seed);
        const DenseVector x = oracles::random_vector(5, 3100 + seed);
        const double got = input_jacobian_spectral_norm(net, x, 300, seed);
        const double want = oracles::spectral_norm(assemble_jacobian(net, x));
        CHECK(std::fabs(got - want) / want <= 1e-5);
    }
}

TEST_CASE("constrained sorting nets keep the jacobian norm at one") {
    LipschitzNet net = make_dense_net(8, 8, 2, 8, ActivationKind::maxmin(),
                                      ConstraintKind::bjorck(), NormFamily::Two, 1.0);
    fill_random(net, 44);
    Rng rng(91);
    for (std::size_t probe = 0; probe < 500; ++probe) {
        DenseVector x(8);
        for (double& v : x) v = rng.uniform(-2.0, 2.0);
        CHECK(input_jacobian_spectral_norm(net, x, 30, probe) <= 1.0 + 1e-3);
    }
}

TEST_CASE("activation statistics count persistently positive units") {
    LipschitzNet net = linear_net(identity(2), DenseVector(2, 0.0));
    net.layers[0].activation = ActivationKind::relu();
    const std::vector<DenseVector> inputs = {DenseVector{1.0, 1.0}, DenseVector{1.0, -1.0}};
    const DenseVector thresholds{0.4, 0.7, 1.0};

    // Unit 0 fires on both inputs, unit 1 on half of them.
    const auto ratios = activation_statistics(net, inputs, thresholds);
    CHECK(ratios.at(0.4) == 1.0);
    CHECK(ratios.at(0.7) == 0.5);
    CHECK(ratios.at(1.0) == 0.5);

    LipschitzNet always_on = linear_net(identity(2), DenseVector(2, 5.0));
    always_on.layers[0].activation = ActivationKind::relu();
    for (const auto& [tau, ratio] : activation_statistics(always_on, inputs, thresholds)) {
        CHECK(ratio == 1.0);
    }

    LipschitzNet always_off = linear_net(identity(2), DenseVector(2, -5.0));
    always_off.layers[0].activation = ActivationKind::relu();
    const auto off = activation_statistics(always_off, inputs, DenseVector{0.2, 0.5});
    CHECK(off.at(0.2) == 0.0);
    CHECK(off.at(0.5) == 0.0);

    LipschitzNet sorting = linear_net(identity(2), DenseVector(2, 0.0));
    sorting.layers[0].activation = ActivationKind::maxmin();
    CHECK_THROWS_WITH_AS(activation_statistics(sorting, inputs, thresholds),
                         doctest::Contains("rectifier"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(activation_statistics(net, {}, thresholds),
                         doctest::Contains("empty dataset"), std::invalid_argument);
}

TEST_CASE("checkpoints round-trip every field bit-exactly") {
    LipschitzNet net = make_dense_net(5, 6, 2, 3, ActivationKind::group_sort(3),
                                      ConstraintKind::bjorck(), NormFamily::Two, 2.0);
    fill_random(net, 55);
    const std::string path = temp_path("lipnn_test_roundtrip.ckpt");
    save_net(net, path);

    const DenseVector x = oracles::random_vector(5, 56);
    const DenseVector y1 = forward(net, x).first;

    const LipschitzNet loaded = load_net(path);
    CHECK(loaded.layers.size() == net.layers.size());
    CHECK(loaded.declared_k == net.declared_k);
    CHECK(loaded.norm_family == net.norm_family);
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        CHECK(oracles::max_abs_diff(loaded.layers[l].w_raw, net.layers[l].w_raw) == 0.0);
        CHECK(oracles::max_abs_diff(loaded.layers[l].b, net.layers[l].b) == 0.0);
        CHECK(loaded.layers[l].scale == net.layers[l].scale);
    }
    const DenseVector y2 = forward(loaded, x).first;
    for (std::size_t i = 0; i < y1.size(); ++i) CHECK(y1[i] == y2[i]);
    std::filesystem::remove(path);
}

TEST_CASE("checkpoint loading rejects damaged files") {
    LipschitzNet net = make_dense_net(3, 4, 1, 2, ActivationKind::maxmin(),
                                      ConstraintKind::bjorck(), NormFamily::Two, 1.0);
    fill_random(net, 77);
    const std::string path = temp_path("lipnn_test_damage.ckpt");
    save_net(net, path);

    const auto full_size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, full_size / 2);
    CHECK_THROWS_WITH_AS(load_net(path), doctest::Contains("truncated"), std::runtime_error);

    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write("XXXX", 4);
    }
    CHECK_THROWS_WITH_AS(load_net(path), doctest::Contains("bad magic"), std::runtime_error);
    CHECK_THROWS_WITH_AS(load_net(temp_path("lipnn_test_absent.ckpt")),
                         doctest::Contains("cannot open"), std::runtime_error);
    std::filesystem::remove(path);
}

TEST_CASE("baked checkpoints store deployment-ready weights") {
    LipschitzNet net = make_dense_net(8, 8, 2, 8, ActivationKind::maxmin(),
                                      ConstraintKind::bjorck(), NormFamily::Two, 1.0);
    fill_random(net, 88);
    bake_enforced_weights(net);
    const std::string path = temp_path("lipnn_test_baked.ckpt");
    save_net(net, path);

    const LipschitzNet loaded = load_net(path);
    for (std::size_t l = 0; l < loaded.layers.size(); ++l) {
        for (double s : oracles::svd_singular_values(loaded.layers[l].w_raw)) {
            CHECK(std::fabs(s - 1.0) <= 1e-4);
        }
    }
    const DenseVector x = oracles::random_vector(8, 89);
    const DenseVector y1 = forward(net, x).first;
    const DenseVector y2 = forward(loaded, x).first;
    for (std::size_t i = 0; i < y1.size(); ++i) CHECK(y1[i] == y2[i]);
    std::filesystem::remove(path);
}

TEST_CASE("empirical probe stays within the declared bound after enforcement") {
    std::vector<DenseVector> anchors;
    for (std::uint64_t i = 0; i < 100; ++i) anchors.push_back(oracles::random_vector(6, 600 + i, 2.0));

    LipschitzNet unit = make_dense_net(6, 6, 2, 1, ActivationKind::maxmin(),
                                       ConstraintKind::bjorck(), NormFamily::Two, 1.0);
    fill_random(unit, 61);
    CHECK(empirical_lipschitz(unit, anchors, 20, 3) <= 1.0 + 1e-6);

    LipschitzNet scaled = make_dense_net(6, 6, 2, 1, ActivationKind::maxmin(),
                                         ConstraintKind::bjorck(), NormFamily::Two, 3.0);
    fill_random(scaled, 62);
    CHECK(empirical_lipschitz(scaled, anchors, 20, 3) <= 3.0 * (1.0 + 1e-6));

    LipschitzNet inf_net = make_dense_net(6, 6, 2, 1, ActivationKind::maxmin(),
                                          ConstraintKind::linf_project(), NormFamily::Inf, 1.0);
    fill_random(inf_net, 63);
    CHECK(empirical_lipschitz(inf_net, anchors, 20, 3) <= 1.0 + 1e-6);
}

TEST_CASE("batched evaluation matches the per-example path") {
    LipschitzNet net = make_dense_net(5, 6, 2, 3, ActivationKind::group_sort(2),
                                      ConstraintKind::bjorck(), NormFamily::Two, 1.0);
    fill_random(net, 71);

    const std::size_t batch = 8;
    DenseMatrix x_cols(5, batch);
    for (std::size_t c = 0; c < batch; ++c) {
        const DenseVector x = oracles::random_vector(5, 7100 + c);
        for (std::size_t i = 0; i < 5; ++i) x_cols(i, c) = x[i];
    }

    const BatchTape tape = forward_batch(net, x_cols);
    const DenseMatrix direct = eval_batch(net, x_cols);
    CHECK(oracles::max_abs_diff(tape.output, direct) == 0.0);

    for (std::size_t c = 0; c < batch; ++c) {
        DenseVector x(5);
        for (std::size_t i = 0; i < 5; ++i) x[i] = x_cols(i, c);
        const DenseVector y = forward(net, x).first;
        for (std::size_t i = 0; i < y.size(); ++i) {
            CHECK(std::fabs(tape.output(i, c) - y[i]) <= 1e-13);
        }
    }
}

TEST_CASE("batched gradients accumulate the per-example passes") {
    // Unconstrained weights make the enforced and raw parameters coincide, so
    // the batch gradients (left in enforced space) are directly comparable.
    LipschitzNet net = make_dense_net(5, 6, 2, 3, ActivationKind::maxmin(),
                                      ConstraintKind::unconstrained(), NormFamily::Two, 1.0);
    fill_random(net, 72);

    const std::size_t batch = 6;
    DenseMatrix x_cols(5, batch);
    DenseMatrix dy_cols(3, batch);
    for (std::size_t c = 0; c < batch; ++c) {
        const DenseVector x = oracles::random_vector(5, 7200 + c);
        const DenseVector dy = oracles::random_vector(3, 7300 + c);
        for (std::size_t i = 0; i < 5; ++i) x_cols(i, c) = x[i];
        for (std::size_t i = 0; i < 3; ++i) dy_cols(i, c) = dy[i];
    }

    const BatchTape tape = forward_batch(net, x_cols);
    const BatchGrads got = backward_batch(net, tape, dy_cols, /*want_dx=*/true);

    std::vector<DenseMatrix> want_w;
    std::vector<DenseVector> want_b;
    for (const LipschitzLayer& layer : net.layers) {
        want_w.emplace_back(layer.w_raw.rows, layer.w_raw.cols);
        want_b.emplace_back(layer.b.size(), 0.0);
    }
    for (std::size_t c = 0; c < batch; ++c) {
        DenseVector x(5), dy(3);
        for (std::size_t i = 0; i < 5; ++i) x[i] = x_cols(i, c);
        for (std::size_t i = 0; i < 3; ++i) dy[i] = dy_cols(i, c);
        const auto [y, one_tape] = forward(net, x);
        const auto [grads, dx] = backward(net, one_tape, dy);
        for (std::size_t l = 0; l < net.layers.size(); ++l) {
            add_scaled(want_w[l], 1.0, grads.d_w_raw[l]);
            add_scaled(want_b[l], 1.0, grads.d_b[l]);
        }
        for (std::size_t i = 0; i < 5; ++i) CHECK(std::fabs(got.d_x(i, c) - dx[i]) <= 1e-13);
    }
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        CHECK(oracles::max_abs_diff(got.d_w_eff[l], want_w[l]) <= 1e-12);
        CHECK(oracles::max_abs_diff(got.d_b[l], want_b[l]) <= 1e-12);
    }

    const BatchGrads no_dx = backward_batch(net, tape, dy_cols, /*want_dx=*/false);
    CHECK(no_dx.d_x.data.empty());
}

TEST_CASE("dense builder chains widths and splits the scale across layers") {
    LipschitzNet net = make_dense_net(7, 10, 3, 2, ActivationKind::maxmin(),
                                      ConstraintKind::bjorck(), NormFamily::Two, 8.0);
    CHECK(net.layers.size() == 4);
    CHECK(net.input_width() == 7);
    CHECK(net.output_width() == 2);
    CHECK(net.declared_k == 8.0);
    double product = 1.0;
    for (const LipschitzLayer& layer : net.layers) {
        product *= layer.scale;
        for (double v : layer.w_raw.data) CHECK(v == 0.0);
    }
    CHECK(product == doctest::Approx(8.0).epsilon(1e-12));
    CHECK(net.layers.back().activation.op == Activation::Identity);

    CHECK_THROWS_WITH_AS(make_dense_net(0, 4, 1, 1, ActivationKind::maxmin(),
                                        ConstraintKind::bjorck(), NormFamily::Two, 1.0),
                         doctest::Contains("zero width"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(make_dense_net(4, 4, 1, 1, ActivationKind::maxmin(),
                                        ConstraintKind::bjorck(), NormFamily::Two, 0.0),
                         doctest::Contains("positive"), std::invalid_argument);
}

TEST_CASE("row normalization caps row norms at one and leaves short rows alone") {
    DenseMatrix w = oracles::random_matrix(4, 6, 99, 0.2);
    for (std::size_t j = 0; j < w.cols; ++j) w(1, j) *= 40.0;
    const DenseMatrix before = w;
    normalize_rows_two(w);
    for (std::size_t i = 0; i < w.rows; ++i) {
        double row_sq = 0.0;
        for (std::size_t j = 0; j < w.cols; ++j) row_sq += w(i, j) * w(i, j);
        CHECK(std::sqrt(row_sq) <= 1.0 + 1e-12);
    }
    for (std::size_t i : {std::size_t{0}, std::size_t{2}, std::size_t{3}}) {
        for (std::size_t j = 0; j < w.cols; ++j) CHECK(w(i, j) == before(i, j));
    }
}

TEST_CASE("evaluation phases enforce at different depths") {
    LipschitzNet net = make_dense_net(6, 6, 1, 6, ActivationKind::maxmin(),
                                      ConstraintKind::bjorck(), NormFamily::Two, 1.0);
    fill_random(net, 123);

    net.eval_phase = Phase::Train;
    double train_dev = 0.0;
    for (double s : oracles::svd_singular_values(layer_weight(net, 0))) {
        train_dev = std::max(train_dev, std::fabs(s - 1.0));
    }
    net.eval_phase = Phase::Final;
    double final_dev = 0.0;
    for (double s : oracles::svd_singular_values(layer_weight(net, 0))) {
        final_dev = std::max(final_dev, std::fabs(s - 1.0));
    }
    CHECK(final_dev < train_dev);
    CHECK(final_dev <= 1e-6);
}

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

#ifndef LIPNN_ACTIVATIONS_HPP_
#define LIPNN_ACTIVATIONS_HPP_

#include <cstdint>
#include <vector>

#include "lipnn/linalg.hpp"

namespace lipnn {

enum class Activation : std::uint8_t {
    GroupSort,      // sort each contiguous group of `group` units ascending
    MaxMin,         // GroupSort with groups of two
    FullSort,       // GroupSort with one group spanning the whole layer
    ReLU,
    Maxout,         // max over each contiguous group (shrinks width by `group`)
    Identity,
    AbsoluteValue,
};

struct ActivationKind {
    Activation op = Activation::Identity;
    std::size_t group = 2;  // used by GroupSort and Maxout

    static ActivationKind group_sort(std::size_t g) { return {Activation::GroupSort, g}; }
    static ActivationKind maxmin() { return {Activation::MaxMin, 2}; }
    static ActivationKind fullsort() { return {Activation::FullSort, 0}; }
    static ActivationKind relu() { return {Activation::ReLU, 0}; }
    static ActivationKind maxout(std::size_t g) { return {Activation::Maxout, g}; }
    static ActivationKind identity() { return {Activation::Identity, 0}; }
    static ActivationKind absolute_value() { return {Activation::AbsoluteValue, 0}; }
};

/// Resolved group size for a layer of the given width (MaxMin -> 2, FullSort
/// -> width). Throws if the group does not divide the width.
std::size_t activation_group(const ActivationKind& k, std::size_t width);

/// Output width (width / group for Maxout, width otherwise).
std::size_t activation_output_width(const ActivationKind& k, std::size_t width);

bool is_sort_family(const ActivationKind& k);

DenseVector apply_activation(const ActivationKind& k, const DenseVector& z);

/**
 * Jacobian of the activation at z as an explicit (out x in) matrix. For the
 * sorting family this is a permutation matrix; ties keep their original order
 * (stable sort), and the subgradient at relu/abs kinks is taken as 0.
 */
DenseMatrix activation_jacobian(const ActivationKind& k, const DenseVector& z);

/// Per-evaluation record that lets the tape replay the activation's linear
/// action without re-sorting: out[i] = z[perm[i]] for sorts and maxout,
/// out[i] = diag[i] * z[i] for the pointwise kinds.
struct ActivationTrace {
    std::vector<std::uint32_t> perm;
    std::vector<double> diag;
};

DenseVector apply_activation_traced(const ActivationKind& k, const DenseVector& z,
                                    ActivationTrace& trace);

/// Tangent (JVP) and cotangent (VJP) maps of the recorded linearization.
DenseVector activation_trace_jvp(const ActivationTrace& t, const DenseVector& tz);
DenseVector activation_trace_vjp(const ActivationTrace& t, std::size_t in_width,
                                 const DenseVector& dout);

/// ReLU recovered exactly from a two-unit MaxMin block: the input is embedded
/// as (x, 0), sorted, and the larger element selected.
double construct_relu_via_maxmin(double x);

/// Absolute value recovered from MaxMin with 1/sqrt(2) weights on both sides;
/// both weight matrices have spectral norm one.
double construct_abs_via_maxmin(double x);

/**
 * Emulates MaxMin on z using a single FullSort layer with a staircase bias:
 * pair j receives bias (2j + 1) * (x_max + 1), which keeps pairs separated so
 * the full sort can only reorder within pairs. Requires |z|_inf <= x_max.
 */
DenseVector fullsort_implements_maxmin(const DenseVector& z, double x_max);

}  // namespace lipnn

#endif  // LIPNN_ACTIVATIONS_HPP_

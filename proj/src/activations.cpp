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

#include "lipnn/activations.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace lipnn {
namespace {

[[noreturn]] void activation_error(const std::string& what) {
    throw std::invalid_argument("activations: " + what);
}

bool is_pointwise(Activation op) {
    return op == Activation::ReLU || op == Activation::Identity ||
           op == Activation::AbsoluteValue;
}

double pointwise_slope(Activation op, double z) {
    switch (op) {
        case Activation::ReLU:
            return z > 0.0 ? 1.0 : 0.0;
        case Activation::AbsoluteValue:
            if (z > 0.0) return 1.0;
            if (z < 0.0) return -1.0;
            return 0.0;
        default:
            return 1.0;  // Identity
    }
}

/// Stable ascending argsort of z[base .. base+g) into perm[base ..).
void argsort_group(const DenseVector& z, std::size_t base, std::size_t g,
                   std::vector<std::uint32_t>& perm) {
    for (std::size_t j = 0; j < g; ++j) perm[base + j] = static_cast<std::uint32_t>(base + j);
    std::stable_sort(perm.begin() + static_cast<std::ptrdiff_t>(base),
                     perm.begin() + static_cast<std::ptrdiff_t>(base + g),
                     [&z](std::uint32_t a, std::uint32_t b) { return z[a] < z[b]; });
}

}  // namespace

std::size_t activation_group(const ActivationKind& k, std::size_t width) {
    std::size_t g = 1;
    switch (k.op) {
        case Activation::GroupSort:
            g = k.group;
            break;
        case Activation::MaxMin:
            g = 2;
            break;
        case Activation::FullSort:
            g = width;
            break;
        case Activation::Maxout:
            g = k.group;
            break;
        default:
            return 1;
    }
    if (g == 0) activation_error("group size must be positive");
    if (width % g != 0) {
        activation_error("group size " + std::to_string(g) +
                         " does not divide layer width " + std::to_string(width));
    }
    return g;
}

std::size_t activation_output_width(const ActivationKind& k, std::size_t width) {
    if (k.op == Activation::Maxout) return width / activation_group(k, width);
    return width;
}

bool is_sort_family(const ActivationKind& k) {
    return k.op == Activation::GroupSort || k.op == Activation::MaxMin ||
           k.op == Activation::FullSort;
}

DenseVector apply_activation_traced(const ActivationKind& k, const DenseVector& z,
                                    ActivationTrace& trace) {
    const std::size_t n = z.size();
    trace.perm.clear();
    trace.diag.clear();

    if (is_pointwise(k.op)) {
        trace.diag.resize(n);
        DenseVector out(n);
        for (std::size_t i = 0; i < n; ++i) {
            trace.diag[i] = pointwise_slope(k.op, z[i]);
            out[i] = k.op == Activation::ReLU   ? std::max(z[i], 0.0)
                     : k.op == Activation::AbsoluteValue ? std::fabs(z[i])
                                                         : z[i];
        }
        return out;
    }

    const std::size_t g = activation_group(k, n);
    if (is_sort_family(k)) {
        trace.perm.resize(n);
        for (std::size_t base = 0; base < n; base += g) argsort_group(z, base, g, trace.perm);
        DenseVector out(n);
        for (std::size_t i = 0; i < n; ++i) out[i] = z[trace.perm[i]];
        return out;
    }

    // Maxout: keep the index of the winning unit per group. The first maximal
    // element wins so ties behave like the stable sort above.
    const std::size_t m = n / g;
    trace.perm.resize(m);
    DenseVector out(m);
    for (std::size_t b = 0; b < m; ++b) {
        std::size_t best = b * g;
        for (std::size_t j = 1; j < g; ++j) {
            if (z[b * g + j] > z[best]) best = b * g + j;
        }
        trace.perm[b] = static_cast<std::uint32_t>(best);
        out[b] = z[best];
    }
    return out;
}

DenseVector apply_activation(const ActivationKind& k, const DenseVector& z) {
    ActivationTrace scratch;
    return apply_activation_traced(k, z, scratch);
}

DenseMatrix activation_jacobian(const ActivationKind& k, const DenseVector& z) {
    ActivationTrace trace;
    const DenseVector out = apply_activation_traced(k, z, trace);
    DenseMatrix jac(out.size(), z.size());
    if (!trace.diag.empty()) {
        for (std::size_t i = 0; i < out.size(); ++i) jac(i, i) = trace.diag[i];
    } else {
        for (std::size_t i = 0; i < out.size(); ++i) jac(i, trace.perm[i]) = 1.0;
    }
    return jac;
}

DenseVector activation_trace_jvp(const ActivationTrace& t, const DenseVector& tz) {
    if (!t.diag.empty()) {
        if (tz.size() != t.diag.size()) activation_error("tangent width mismatch");
        DenseVector out(tz.size());
        for (std::size_t i = 0; i < tz.size(); ++i) out[i] = t.diag[i] * tz[i];
        return out;
    }
    DenseVector out(t.perm.size());
    for (std::size_t i = 0; i < t.perm.size(); ++i) {
        if (t.perm[i] >= tz.size()) activation_error("tangent width mismatch");
        out[i] = tz[t.perm[i]];
    }
    return out;
}

DenseVector activation_trace_vjp(const ActivationTrace& t, std::size_t in_width,
                                 const DenseVector& dout) {
    if (!t.diag.empty()) {
        if (dout.size() != t.diag.size() || in_width != t.diag.size()) {
            activation_error("cotangent width mismatch");
        }
        DenseVector dz(in_width);
        for (std::size_t i = 0; i < in_width; ++i) dz[i] = t.diag[i] * dout[i];
        return dz;
    }
    if (dout.size() != t.perm.size()) activation_error("cotangent width mismatch");
    DenseVector dz(in_width, 0.0);
    for (std::size_t i = 0; i < t.perm.size(); ++i) {
        if (t.perm[i] >= in_width) activation_error("cotangent width mismatch");
        dz[t.perm[i]] += dout[i];
    }
    return dz;
}

double construct_relu_via_maxmin(double x) {
    // First layer embeds x as (x, 0); MaxMin sorts the pair ascending; the
    // selector (0, 1) reads off the maximum, i.e. max(x, 0).
    const DenseVector pre = {x, 0.0};
    const DenseVector sorted = apply_activation(ActivationKind::maxmin(), pre);
    const DenseVector selector = {0.0, 1.0};
    return dot(selector, sorted);
}

double construct_abs_via_maxmin(double x) {
    const double c = 1.0 / std::sqrt(2.0);
    const DenseVector pre = {c * x, -c * x};
    const DenseVector sorted = apply_activation(ActivationKind::maxmin(), pre);
    const DenseVector selector = {-c, c};
    return dot(selector, sorted);  // c * (max - min) = c * 2|c x| = |x|
}

DenseVector fullsort_implements_maxmin(const DenseVector& z, double x_max) {
    if (z.size() % 2 != 0) activation_error("fullsort_implements_maxmin needs an even width");
    if (norm_inf(z) > x_max) activation_error("input exceeds the declared bound x_max");

    // Shift pair j into its own band around (2j + 1) * (x_max + 1). Bands are
    // 2 * (x_max + 1) apart while elements stay within x_max + 1 of the band
    // center, so a global sort can only swap elements inside a pair.
    DenseVector shifted(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double bias = static_cast<double>(2 * (i / 2) + 1) * (x_max + 1.0);
        shifted[i] = z[i] + bias;
    }
    DenseVector sorted = apply_activation(ActivationKind::fullsort(), shifted);
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double bias = static_cast<double>(2 * (i / 2) + 1) * (x_max + 1.0);
        sorted[i] -= bias;
    }
    return sorted;
}

}  // namespace lipnn

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

#include "lipnn/lattice.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lipnn/activations.hpp"

namespace lipnn {
namespace {

[[noreturn]] void lattice_error(const std::string& what) {
    throw std::invalid_argument("lattice: " + what);
}

// A combined layer before construction: enforced weight, bias, and whether a
// pairwise sort follows it.
struct PlainLayer {
    DenseMatrix w;
    DenseVector b;
    bool sorted_output = false;
};

bool is_pairwise_sort(const ActivationKind& k, std::size_t width) {
    return is_sort_family(k) && activation_group(k, width) == 2;
}

/**
 * Reduces a net to a list of affine layers each followed by a pairwise sort,
 * except the last, which is bare. Depth-1 affine nets get a synthetic hidden
 * layer: duplicate the single row, sort (a tied pair is its own fixed point),
 * then average the pair back with a half/half selector. Both synthetic rows
 * keep the original l1 norm, and the selector row has l1 norm exactly 1.
 */
std::vector<PlainLayer> canonical_layers(const LipschitzNet& src, const char* which) {
    const std::string tag(which);
    if (src.norm_family != NormFamily::Inf) {
        lattice_error(tag + " net must use the inf norm family");
    }
    if (src.output_width() != 1) lattice_error(tag + " net must have scalar output");

    LipschitzNet net = src;
    net.eval_phase = Phase::Final;

    std::vector<PlainLayer> out;
    const std::size_t depth = net.layers.size();
    for (std::size_t l = 0; l < depth; ++l) {
        const LipschitzLayer& layer = net.layers[l];
        if (layer.scale != 1.0) lattice_error(tag + " net must have unit layer scales");
        PlainLayer plain;
        plain.w = layer_weight(net, l);
        plain.b = layer.b;
        if (l + 1 == depth) {
            if (layer.activation.op != Activation::Identity) {
                lattice_error(tag + " net must end with an identity layer");
            }
            plain.sorted_output = false;
        } else {
            if (!is_pairwise_sort(layer.activation, plain.w.rows)) {
                lattice_error(tag + " net hidden layers must use pairwise sorting activations");
            }
            plain.sorted_output = true;
        }
        out.push_back(std::move(plain));
    }

    if (out.size() == 1) {
        PlainLayer hidden;
        hidden.w = DenseMatrix(2, out[0].w.cols);
        for (std::size_t j = 0; j < out[0].w.cols; ++j) {
            hidden.w(0, j) = out[0].w(0, j);
            hidden.w(1, j) = out[0].w(0, j);
        }
        hidden.b = {out[0].b[0], out[0].b[0]};
        hidden.sorted_output = true;
        PlainLayer selector;
        selector.w = make_matrix({{0.5, 0.5}});
        selector.b = {0.0};
        out = {std::move(hidden), std::move(selector)};
    }
    return out;
}

/// Identity pad inserted after the first hidden sort: its input arrives
/// sorted, so weight I followed by another sort reproduces it exactly.
PlainLayer identity_pad(std::size_t width) {
    PlainLayer pad;
    pad.w = identity(width);
    pad.b.assign(width, 0.0);
    pad.sorted_output = true;
    return pad;
}

DenseMatrix vstack(const DenseMatrix& top, const DenseMatrix& bottom) {
    if (top.cols != bottom.cols) lattice_error("vstack column mismatch");
    DenseMatrix out(top.rows + bottom.rows, top.cols);
    for (std::size_t i = 0; i < top.rows; ++i) {
        for (std::size_t j = 0; j < top.cols; ++j) out(i, j) = top(i, j);
    }
    for (std::size_t i = 0; i < bottom.rows; ++i) {
        for (std::size_t j = 0; j < bottom.cols; ++j) out(top.rows + i, j) = bottom(i, j);
    }
    return out;
}

DenseMatrix block_diag(const DenseMatrix& a, const DenseMatrix& b) {
    DenseMatrix out(a.rows + b.rows, a.cols + b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t j = 0; j < a.cols; ++j) out(i, j) = a(i, j);
    }
    for (std::size_t i = 0; i < b.rows; ++i) {
        for (std::size_t j = 0; j < b.cols; ++j) out(a.rows + i, a.cols + j) = b(i, j);
    }
    return out;
}

DenseVector concat(const DenseVector& a, const DenseVector& b) {
    DenseVector out = a;
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

LipschitzLayer as_layer(PlainLayer&& plain) {
    LipschitzLayer layer;
    layer.w_raw = std::move(plain.w);
    layer.b = std::move(plain.b);
    layer.constraint = ConstraintKind::unconstrained();
    layer.activation =
        plain.sorted_output ? ActivationKind::maxmin() : ActivationKind::identity();
    layer.scale = 1.0;
    return layer;
}

}  // namespace

LipschitzNet lattice_combine(const LipschitzNet& f, const LipschitzNet& g, LatticeOp op) {
    if (f.input_width() != g.input_width()) lattice_error("input widths differ");
    std::vector<PlainLayer> lf = canonical_layers(f, "first");
    std::vector<PlainLayer> lg = canonical_layers(g, "second");

    while (lf.size() < lg.size()) lf.insert(lf.begin() + 1, identity_pad(lf[0].w.rows));
    while (lg.size() < lf.size()) lg.insert(lg.begin() + 1, identity_pad(lg[0].w.rows));

    const std::size_t depth = lf.size();
    LipschitzNet out;
    out.norm_family = NormFamily::Inf;
    out.declared_k = 1.0;

    PlainLayer first;
    first.w = vstack(lf[0].w, lg[0].w);
    first.b = concat(lf[0].b, lg[0].b);
    first.sorted_output = true;
    out.layers.push_back(as_layer(std::move(first)));

    for (std::size_t l = 1; l + 1 < depth; ++l) {
        PlainLayer mid;
        mid.w = block_diag(lf[l].w, lg[l].w);
        mid.b = concat(lf[l].b, lg[l].b);
        mid.sorted_output = true;
        out.layers.push_back(as_layer(std::move(mid)));
    }

    // The two scalar heads side by side, then one sort so the pair arrives
    // as (min, max).
    PlainLayer heads;
    heads.w = block_diag(lf[depth - 1].w, lg[depth - 1].w);
    heads.b = concat(lf[depth - 1].b, lg[depth - 1].b);
    heads.sorted_output = true;
    out.layers.push_back(as_layer(std::move(heads)));

    PlainLayer select;
    select.w = op == LatticeOp::Max ? make_matrix({{0.0, 1.0}}) : make_matrix({{1.0, 0.0}});
    select.b = {0.0};
    select.sorted_output = false;
    out.layers.push_back(as_layer(std::move(select)));
    return out;
}

LipschitzNet fit_separating_line(const DenseVector& x1, const DenseVector& x2, double a, double b,
                                 double p) {
    if (x1.size() != x2.size() || x1.empty()) lattice_error("points must share a nonzero width");
    if (x1 == x2) lattice_error("points must be distinct");
    const bool p_inf = std::isinf(p);
    if (p != 1.0 && p != 2.0 && !p_inf) lattice_error("p must be 1, 2, or inf");

    DenseVector dir(x1.size());
    for (std::size_t i = 0; i < x1.size(); ++i) dir[i] = x2[i] - x1[i];
    const double dist = p_inf ? norm_inf(dir) : (p == 1.0 ? norm1(dir) : norm2(dir));
    if (std::abs(a - b) > dist) {
        lattice_error("need |a - b| <= ||x1 - x2||_p, got |" + std::to_string(a) + " - " +
                      std::to_string(b) + "| > " + std::to_string(dist));
    }

    // Hoelder-equality direction: unit dual norm, inner product with dir
    // equal to ||dir||_p.
    DenseVector w(x1.size(), 0.0);
    if (a != b) {
        const double gain = (b - a) / dist;
        if (p == 2.0) {
            for (std::size_t i = 0; i < w.size(); ++i) w[i] = gain * dir[i] / dist;
        } else if (p == 1.0) {
            for (std::size_t i = 0; i < w.size(); ++i) {
                w[i] = dir[i] > 0.0 ? gain : (dir[i] < 0.0 ? -gain : 0.0);
            }
        } else {
            std::size_t peak = 0;
            for (std::size_t i = 1; i < dir.size(); ++i) {
                if (std::abs(dir[i]) > std::abs(dir[peak])) peak = i;
            }
            w[peak] = dir[peak] > 0.0 ? gain : -gain;
        }
    }

    LipschitzLayer layer;
    layer.w_raw = DenseMatrix(1, x1.size());
    for (std::size_t i = 0; i < w.size(); ++i) layer.w_raw(0, i) = w[i];
    layer.b = {a - dot(w, x1)};
    layer.constraint = ConstraintKind::unconstrained();
    layer.activation = ActivationKind::identity();

    LipschitzNet net;
    net.norm_family = NormFamily::Inf;
    net.declared_k = 1.0;
    net.layers.push_back(std::move(layer));
    return net;
}

}  // namespace lipnn

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

#include "lipnn/network.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>

#include "lipnn/rng.hpp"

namespace lipnn {
namespace {

[[noreturn]] void net_error(const std::string& what) {
    throw std::invalid_argument("network: " + what);
}

void check_tape_fresh(const LipschitzNet& net, std::uint64_t tape_version, Phase tape_phase) {
    if (tape_version != net.param_version || tape_phase != net.eval_phase) {
        throw std::runtime_error(
            "network: stale tape (parameters or phase changed since the forward pass)");
    }
}

DenseVector affine(const DenseMatrix& w, const DenseVector& x, const DenseVector& b) {
    DenseVector z = matvec(w, x);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += b[i];
    return z;
}

/// z(:, col) extracted as a contiguous vector.
DenseVector take_column(const DenseMatrix& m, std::size_t col) {
    DenseVector out(m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) out[i] = m(i, col);
    return out;
}

}  // namespace

std::size_t LipschitzNet::input_width() const {
    if (layers.empty()) net_error("net has no layers");
    return layers.front().w_raw.cols;
}

std::size_t LipschitzNet::output_width() const {
    if (layers.empty()) net_error("net has no layers");
    const LipschitzLayer& last = layers.back();
    return activation_output_width(last.activation, last.w_raw.rows);
}

void bump_version(LipschitzNet& net) { ++net.param_version; }

const EnforcementTape& layer_tape(const LipschitzNet& net, std::size_t layer) {
    if (layer >= net.layers.size()) net_error("layer index out of range");
    const LipschitzLayer& l = net.layers[layer];
    if (l.cache.version != net.param_version || l.cache.phase != net.eval_phase) {
        l.cache.tape =
            enforce_constraint_traced(l.constraint, l.w_raw, net.eval_phase, &l.power_state);
        l.cache.version = net.param_version;
        l.cache.phase = net.eval_phase;
    }
    return l.cache.tape;
}

const DenseMatrix& layer_weight(const LipschitzNet& net, std::size_t layer) {
    return layer_tape(net, layer).enforced;
}

std::pair<DenseVector, ActivationRecord> forward(const LipschitzNet& net, const DenseVector& x) {
    if (net.layers.empty()) net_error("net has no layers");
    if (x.size() != net.input_width()) {
        net_error("input width " + std::to_string(x.size()) + " does not match net input " +
                  std::to_string(net.input_width()));
    }
    ActivationRecord tape;
    tape.param_version = net.param_version;
    tape.phase = net.eval_phase;
    tape.layer_inputs.reserve(net.layers.size());
    tape.pre.reserve(net.layers.size());
    tape.traces.resize(net.layers.size());

    DenseVector h = x;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const LipschitzLayer& layer = net.layers[l];
        tape.layer_inputs.push_back(h);
        DenseVector z = affine(layer_weight(net, l), h, layer.b);
        tape.pre.push_back(z);
        h = apply_activation_traced(layer.activation, z, tape.traces[l]);
        for (double& v : h) v *= layer.scale;
    }
    tape.output = h;
    return {std::move(h), std::move(tape)};
}

std::pair<ParamGrads, DenseVector> backward(const LipschitzNet& net, const ActivationRecord& tape,
                                            const DenseVector& dy) {
    check_tape_fresh(net, tape.param_version, tape.phase);
    if (dy.size() != tape.output.size()) net_error("backward: cotangent width mismatch");

    ParamGrads grads;
    grads.d_w_raw.resize(net.layers.size());
    grads.d_b.resize(net.layers.size());

    DenseVector g = dy;
    for (std::size_t l = net.layers.size(); l-- > 0;) {
        const LipschitzLayer& layer = net.layers[l];
        for (double& v : g) v *= layer.scale;
        DenseVector dz = activation_trace_vjp(tape.traces[l], tape.pre[l].size(), g);
        grads.d_b[l] = dz;
        const DenseVector& h = tape.layer_inputs[l];
        DenseMatrix d_w_eff(layer.w_raw.rows, layer.w_raw.cols);
        for (std::size_t i = 0; i < d_w_eff.rows; ++i) {
            for (std::size_t j = 0; j < d_w_eff.cols; ++j) d_w_eff(i, j) = dz[i] * h[j];
        }
        grads.d_w_raw[l] = enforcement_vjp(layer.constraint, layer.w_raw, net.eval_phase,
                                           layer_tape(net, l), d_w_eff);
        g = matvec_t(layer_weight(net, l), dz);
    }
    return {std::move(grads), std::move(g)};
}

DenseVector backward_input(const LipschitzNet& net, const ActivationRecord& tape,
                           const DenseVector& dy) {
    check_tape_fresh(net, tape.param_version, tape.phase);
    if (dy.size() != tape.output.size()) net_error("backward_input: cotangent width mismatch");
    DenseVector g = dy;
    for (std::size_t l = net.layers.size(); l-- > 0;) {
        const LipschitzLayer& layer = net.layers[l];
        for (double& v : g) v *= layer.scale;
        DenseVector dz = activation_trace_vjp(tape.traces[l], tape.pre[l].size(), g);
        g = matvec_t(layer_weight(net, l), dz);
    }
    return g;
}

DenseVector input_jvp_from_tape(const LipschitzNet& net, const ActivationRecord& tape,
                                const DenseVector& v) {
    check_tape_fresh(net, tape.param_version, tape.phase);
    if (v.size() != net.input_width()) net_error("input_jvp: tangent width mismatch");
    DenseVector t = v;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const LipschitzLayer& layer = net.layers[l];
        t = matvec(layer_weight(net, l), t);
        t = activation_trace_jvp(tape.traces[l], t);
        for (double& x : t) x *= layer.scale;
    }
    return t;
}

DenseVector input_jvp(const LipschitzNet& net, const DenseVector& x, const DenseVector& v) {
    const auto [y, tape] = forward(net, x);
    (void)y;
    return input_jvp_from_tape(net, tape, v);
}

double input_jacobian_spectral_norm(const LipschitzNet& net, const DenseVector& x,
                                    std::size_t iters, std::uint64_t seed) {
    const auto [y, tape] = forward(net, x);
    (void)y;
    Rng rng(Rng::mix(seed, 0x6ac0));
    DenseVector u(tape.output.size());
    for (double& e : u) e = rng.gaussian();
    const double un = norm2(u);
    if (un == 0.0) return 0.0;
    for (double& e : u) e /= un;

    double sigma = 0.0;
    for (std::size_t k = 0; k < iters; ++k) {
        DenseVector v = backward_input(net, tape, u);
        const double vn = norm2(v);
        if (vn == 0.0) return 0.0;
        for (double& e : v) e /= vn;
        DenseVector h = input_jvp_from_tape(net, tape, v);
        sigma = norm2(h);
        if (sigma == 0.0) return 0.0;
        u = h;
        for (double& e : u) e /= sigma;
    }
    if (iters == 0) sigma = norm2(backward_input(net, tape, u));
    return sigma;
}

std::map<double, double> activation_statistics(const LipschitzNet& net,
                                               const std::vector<DenseVector>& inputs,
                                               const DenseVector& thresholds) {
    std::size_t relu_units = 0;
    for (const LipschitzLayer& layer : net.layers) {
        if (layer.activation.op == Activation::ReLU) {
            relu_units += layer.w_raw.rows;
        } else if (layer.activation.op != Activation::Identity) {
            net_error("activation_statistics requires a rectifier net");
        }
    }
    if (relu_units == 0) net_error("activation_statistics requires a rectifier net");
    if (inputs.empty()) net_error("activation_statistics: empty dataset");

    std::vector<std::size_t> positive(relu_units, 0);
    for (const DenseVector& x : inputs) {
        const auto [y, tape] = forward(net, x);
        (void)y;
        std::size_t unit = 0;
        for (std::size_t l = 0; l < net.layers.size(); ++l) {
            if (net.layers[l].activation.op != Activation::ReLU) continue;
            for (double z : tape.pre[l]) {
                if (z > 0.0) ++positive[unit];
                ++unit;
            }
        }
    }

    std::map<double, double> ratios;
    for (double t : thresholds) {
        std::size_t count = 0;
        for (std::size_t u = 0; u < relu_units; ++u) {
            const double freq =
                static_cast<double>(positive[u]) / static_cast<double>(inputs.size());
            if (freq >= t) ++count;
        }
        ratios[t] = static_cast<double>(count) / static_cast<double>(relu_units);
    }
    return ratios;
}

// ---------------------------------------------------------------------------
// Serialization. Little-endian binary: magic "LIPN", u32 version, net header,
// then per-layer dims, constraint and activation tags, and raw f64 payloads.
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'L', 'I', 'P', 'N'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::ifstream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw std::runtime_error("checkpoint: truncated file");
    return value;
}

void put_doubles(std::ofstream& out, const std::vector<double>& v) {
    put<std::uint64_t>(out, v.size());
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> get_doubles(std::ifstream& in) {
    const auto n = get<std::uint64_t>(in);
    std::vector<double> v(n);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

}  // namespace

void save_net(const LipschitzNet& net, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    out.write(kMagic, 4);
    put<std::uint32_t>(out, kVersion);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(net.norm_family));
    put<double>(out, net.declared_k);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(net.eval_phase));
    put<std::uint64_t>(out, net.layers.size());
    for (const LipschitzLayer& l : net.layers) {
        put<std::uint64_t>(out, l.w_raw.rows);
        put<std::uint64_t>(out, l.w_raw.cols);
        put<std::uint8_t>(out, static_cast<std::uint8_t>(l.constraint.scheme));
        put<std::uint64_t>(out, l.constraint.order);
        put<std::uint64_t>(out, l.constraint.train_iters);
        put<std::uint64_t>(out, l.constraint.final_iters);
        put<std::uint8_t>(out, static_cast<std::uint8_t>(l.constraint.safe));
        put<std::uint64_t>(out, l.constraint.power_iters);
        put<double>(out, l.constraint.beta);
        put<std::uint8_t>(out, static_cast<std::uint8_t>(l.activation.op));
        put<std::uint64_t>(out, l.activation.group);
        put<double>(out, l.scale);
        put_doubles(out, l.w_raw.data);
        put_doubles(out, l.b);
        put_doubles(out, l.power_state);
    }
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path);
}

void bake_enforced_weights(LipschitzNet& net) {
    net.eval_phase = Phase::Final;
    std::vector<DenseMatrix> enforced;
    enforced.reserve(net.layers.size());
    for (std::size_t l = 0; l < net.layers.size(); ++l) enforced.push_back(layer_weight(net, l));
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        net.layers[l].w_raw = std::move(enforced[l]);
    }
    bump_version(net);
}

LipschitzNet load_net(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != std::string(kMagic, 4)) {
        throw std::runtime_error("checkpoint: bad magic in " + path);
    }
    const auto version = get<std::uint32_t>(in);
    if (version != kVersion) {
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
    }
    LipschitzNet net;
    net.norm_family = static_cast<NormFamily>(get<std::uint8_t>(in));
    net.declared_k = get<double>(in);
    net.eval_phase = static_cast<Phase>(get<std::uint8_t>(in));
    const auto n_layers = get<std::uint64_t>(in);
    net.layers.resize(n_layers);
    for (LipschitzLayer& l : net.layers) {
        const auto rows = get<std::uint64_t>(in);
        const auto cols = get<std::uint64_t>(in);
        l.constraint.scheme = static_cast<Scheme>(get<std::uint8_t>(in));
        l.constraint.order = get<std::uint64_t>(in);
        l.constraint.train_iters = get<std::uint64_t>(in);
        l.constraint.final_iters = get<std::uint64_t>(in);
        l.constraint.safe = static_cast<SafeScaleMode>(get<std::uint8_t>(in));
        l.constraint.power_iters = get<std::uint64_t>(in);
        l.constraint.beta = get<double>(in);
        l.activation.op = static_cast<Activation>(get<std::uint8_t>(in));
        l.activation.group = get<std::uint64_t>(in);
        l.scale = get<double>(in);
        l.w_raw.rows = rows;
        l.w_raw.cols = cols;
        l.w_raw.data = get_doubles(in);
        if (l.w_raw.data.size() != rows * cols) {
            throw std::runtime_error("checkpoint: weight payload size mismatch");
        }
        l.b = get_doubles(in);
        if (l.b.size() != rows) throw std::runtime_error("checkpoint: bias size mismatch");
        l.power_state = get_doubles(in);
    }
    return net;
}

// ---------------------------------------------------------------------------
// Batched paths (examples as columns).
// ---------------------------------------------------------------------------

namespace {

void add_bias_columns(DenseMatrix& z, const DenseVector& b) {
    for (std::size_t i = 0; i < z.rows; ++i) {
        for (std::size_t j = 0; j < z.cols; ++j) z(i, j) += b[i];
    }
}

/// Applies the activation column by column, recording one trace per column.
DenseMatrix apply_activation_columns(const ActivationKind& kind, const DenseMatrix& z,
                                     std::vector<ActivationTrace>& traces) {
    const std::size_t out_rows = activation_output_width(kind, z.rows);
    DenseMatrix out(out_rows, z.cols);
    traces.resize(z.cols);
    for (std::size_t c = 0; c < z.cols; ++c) {
        const DenseVector col = take_column(z, c);
        const DenseVector act = apply_activation_traced(kind, col, traces[c]);
        for (std::size_t i = 0; i < out_rows; ++i) out(i, c) = act[i];
    }
    return out;
}

}  // namespace

BatchTape forward_batch(const LipschitzNet& net, const DenseMatrix& x_cols) {
    if (net.layers.empty()) net_error("net has no layers");
    if (x_cols.rows != net.input_width()) net_error("forward_batch: input width mismatch");
    BatchTape tape;
    tape.param_version = net.param_version;
    tape.phase = net.eval_phase;
    tape.layer_inputs.reserve(net.layers.size());
    tape.traces.resize(net.layers.size());

    DenseMatrix h = x_cols;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const LipschitzLayer& layer = net.layers[l];
        tape.layer_inputs.push_back(h);
        DenseMatrix z = matmul(layer_weight(net, l), h);
        add_bias_columns(z, layer.b);
        h = apply_activation_columns(layer.activation, z, tape.traces[l]);
        scale_inplace(h, layer.scale);
    }
    tape.output = std::move(h);
    return tape;
}

DenseMatrix eval_batch(const LipschitzNet& net, const DenseMatrix& x_cols) {
    if (net.layers.empty()) net_error("net has no layers");
    if (x_cols.rows != net.input_width()) net_error("eval_batch: input width mismatch");
    DenseMatrix h = x_cols;
    std::vector<ActivationTrace> scratch;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const LipschitzLayer& layer = net.layers[l];
        DenseMatrix z = matmul(layer_weight(net, l), h);
        add_bias_columns(z, layer.b);
        h = apply_activation_columns(layer.activation, z, scratch);
        scale_inplace(h, layer.scale);
    }
    return h;
}

BatchGrads backward_batch(const LipschitzNet& net, const BatchTape& tape,
                          const DenseMatrix& dy_cols, bool want_dx) {
    check_tape_fresh(net, tape.param_version, tape.phase);
    if (dy_cols.rows != tape.output.rows || dy_cols.cols != tape.output.cols) {
        net_error("backward_batch: cotangent shape mismatch");
    }
    BatchGrads grads;
    grads.d_w_eff.resize(net.layers.size());
    grads.d_b.resize(net.layers.size());

    DenseMatrix g = dy_cols;
    for (std::size_t l = net.layers.size(); l-- > 0;) {
        const LipschitzLayer& layer = net.layers[l];
        scale_inplace(g, layer.scale);
        const std::size_t pre_rows = layer.w_raw.rows;
        DenseMatrix dz(pre_rows, g.cols);
        for (std::size_t c = 0; c < g.cols; ++c) {
            const DenseVector gc = take_column(g, c);
            const DenseVector back =
                activation_trace_vjp(tape.traces[l][c], pre_rows, gc);
            for (std::size_t i = 0; i < pre_rows; ++i) dz(i, c) = back[i];
        }
        grads.d_b[l].assign(pre_rows, 0.0);
        for (std::size_t i = 0; i < pre_rows; ++i) {
            double s = 0.0;
            for (std::size_t c = 0; c < dz.cols; ++c) s += dz(i, c);
            grads.d_b[l][i] = s;
        }
        grads.d_w_eff[l] = matmul_tb(dz, tape.layer_inputs[l]);
        if (l > 0 || want_dx) g = matmul_ta(layer_weight(net, l), dz);
    }
    if (want_dx) grads.d_x = std::move(g);
    return grads;
}

LipschitzNet make_dense_net(std::size_t input_width, std::size_t hidden_width,
                            std::size_t hidden_layers, std::size_t output_width,
                            ActivationKind activation, ConstraintKind constraint,
                            NormFamily family, double k) {
    if (input_width == 0 || output_width == 0) net_error("make_dense_net: zero width");
    if (k <= 0.0) net_error("make_dense_net: Lipschitz bound must be positive");
    LipschitzNet net;
    net.norm_family = family;
    net.declared_k = k;
    const std::size_t num_layers = hidden_layers + 1;
    const double per_layer_scale = std::pow(k, 1.0 / static_cast<double>(num_layers));
    std::size_t in = input_width;
    for (std::size_t l = 0; l < hidden_layers; ++l) {
        LipschitzLayer layer;
        layer.w_raw = DenseMatrix(hidden_width, in);
        layer.b.assign(hidden_width, 0.0);
        layer.constraint = constraint;
        layer.activation = activation;
        layer.scale = per_layer_scale;
        net.layers.push_back(std::move(layer));
        in = activation_output_width(activation, hidden_width);
    }
    LipschitzLayer out_layer;
    out_layer.w_raw = DenseMatrix(output_width, in);
    out_layer.b.assign(output_width, 0.0);
    out_layer.constraint = constraint;
    out_layer.activation = ActivationKind::identity();
    out_layer.scale = per_layer_scale;
    net.layers.push_back(std::move(out_layer));
    return net;
}

double empirical_lipschitz(const LipschitzNet& net, const std::vector<DenseVector>& anchors,
                           std::size_t pairs, std::uint64_t seed) {
    if (anchors.size() < 2) net_error("empirical_lipschitz needs at least two anchor points");
    Rng rng(Rng::mix(seed, 0x11b5));
    const std::size_t dim = net.input_width();
    double worst = 0.0;
    for (std::size_t k = 0; k < pairs; ++k) {
        DenseVector x = anchors[rng.index(anchors.size())];
        DenseVector y = anchors[rng.index(anchors.size())];
        for (std::size_t i = 0; i < dim; ++i) {
            x[i] += 0.05 * rng.gaussian();
            y[i] += 0.05 * rng.gaussian();
        }
        DenseVector dxy(dim);
        for (std::size_t i = 0; i < dim; ++i) dxy[i] = x[i] - y[i];
        const double denom = net.norm_family == NormFamily::Two ? norm2(dxy) : norm_inf(dxy);
        if (denom < 1e-12) continue;
        const DenseVector fx = forward(net, x).first;
        const DenseVector fy = forward(net, y).first;
        DenseVector df(fx.size());
        for (std::size_t i = 0; i < fx.size(); ++i) df[i] = fx[i] - fy[i];
        const double numer = net.norm_family == NormFamily::Two ? norm2(df) : norm_inf(df);
        worst = std::max(worst, numer / denom);
    }
    return worst;
}

void normalize_rows_two(DenseMatrix& w) {
    for (std::size_t i = 0; i < w.rows; ++i) {
        double sq = 0.0;
        for (std::size_t j = 0; j < w.cols; ++j) sq += w(i, j) * w(i, j);
        const double n = std::sqrt(sq);
        if (n > 1.0) {
            for (std::size_t j = 0; j < w.cols; ++j) w(i, j) /= n;
        }
    }
}

}  // namespace lipnn

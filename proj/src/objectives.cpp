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

#include "lipnn/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "lipnn/activations.hpp"

namespace lipnn {
namespace {

[[noreturn]] void obj_error(const std::string& what) {
    throw std::invalid_argument("objectives: " + what);
}

DenseMatrix as_columns(const std::vector<DenseVector>& xs) {
    DenseMatrix m(xs.front().size(), xs.size());
    for (std::size_t c = 0; c < xs.size(); ++c) {
        if (xs[c].size() != m.rows) obj_error("ragged sample set");
        for (std::size_t r = 0; r < m.rows; ++r) m(r, c) = xs[c][r];
    }
    return m;
}

double mean_scalar_output(const LipschitzNet& net, const std::vector<DenseVector>& xs) {
    const DenseMatrix y = eval_batch(net, as_columns(xs));
    double sum = 0.0;
    for (std::size_t c = 0; c < y.cols; ++c) sum += y(0, c);
    return sum / static_cast<double>(y.cols);
}

std::size_t argmax_index(const DenseVector& v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

}  // namespace

double wasserstein_dual_objective(const LipschitzNet& net, const std::vector<DenseVector>& p1,
                                  const std::vector<DenseVector>& p2) {
    if (net.output_width() != 1) obj_error("dual objective needs a scalar-output net");
    if (p1.empty() || p2.empty()) obj_error("dual objective needs nonempty sample sets");
    return mean_scalar_output(net, p1) - mean_scalar_output(net, p2);
}

double margin(const DenseVector& logits, std::size_t t) {
    if (logits.size() < 2) obj_error("margin needs at least two classes");
    if (t >= logits.size()) obj_error("margin: class index out of range");
    double runner_up = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < logits.size(); ++i) {
        if (i != t) runner_up = std::max(runner_up, logits[i]);
    }
    return std::max(0.0, logits[t] - runner_up);
}

double hinge_loss(const DenseVector& logits, std::size_t t, double kappa) {
    if (t >= logits.size()) obj_error("hinge_loss: class index out of range");
    if (kappa < 0.0) obj_error("hinge_loss needs kappa >= 0");
    double loss = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        if (i != t) loss += std::max(0.0, kappa - (logits[t] - logits[i]));
    }
    return loss;
}

DenseVector hinge_loss_grad(const DenseVector& logits, std::size_t t, double kappa) {
    if (t >= logits.size()) obj_error("hinge_loss_grad: class index out of range");
    if (kappa < 0.0) obj_error("hinge_loss_grad needs kappa >= 0");
    DenseVector g(logits.size(), 0.0);
    for (std::size_t i = 0; i < logits.size(); ++i) {
        if (i == t) continue;
        if (kappa - (logits[t] - logits[i]) > 0.0) {
            g[i] += 1.0;
            g[t] -= 1.0;
        }
    }
    return g;
}

double certified_radius(double margin_val, double k, CertRule rule) {
    if (k <= 0.0) obj_error("certified_radius needs K > 0");
    if (margin_val < 0.0) obj_error("certified_radius needs a nonnegative margin");
    switch (rule) {
        case CertRule::Sound2K:
            return margin_val / (2.0 * k);
        case CertRule::PaperKHalf:
            return 2.0 * margin_val / k;
    }
    obj_error("unknown certificate rule");
}

CertificationReport certification_report(const LipschitzNet& net, const Dataset& data,
                                         const MarginConfig& cfg) {
    if (net.output_width() < 2) obj_error("certification needs at least two classes");
    if (data.inputs.empty()) obj_error("certification needs a nonempty dataset");
    if (data.inputs.size() != data.labels.size()) obj_error("input/label count mismatch");

    const DenseMatrix y = eval_batch(net, as_columns(data.inputs));
    CertificationReport report;
    report.reserve(data.inputs.size());
    for (std::size_t c = 0; c < y.cols; ++c) {
        DenseVector logits(y.rows);
        for (std::size_t r = 0; r < y.rows; ++r) logits[r] = y(r, c);
        const int label = data.labels[c];
        if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
            obj_error("label " + std::to_string(label) + " outside logit range");
        }
        CertificationRow row;
        row.label = label;
        row.predicted = static_cast<int>(argmax_index(logits));
        row.margin = margin(logits, static_cast<std::size_t>(label));
        row.certified_radius = certified_radius(row.margin, cfg.k, cfg.cert_rule);
        report.push_back(row);
    }
    return report;
}

std::map<double, double> certified_accuracy_curve(const LipschitzNet& net, const Dataset& data,
                                                  const DenseVector& epsilons, CertRule rule) {
    MarginConfig cfg;
    cfg.k = net.declared_k;
    cfg.cert_rule = rule;
    const CertificationReport report = certification_report(net, data, cfg);
    std::map<double, double> curve;
    for (double eps : epsilons) {
        std::size_t count = 0;
        for (const CertificationRow& row : report) {
            if (row.predicted == row.label && row.certified_radius >= eps) ++count;
        }
        curve[eps] = static_cast<double>(count) / static_cast<double>(report.size());
    }
    return curve;
}

namespace {

// Shared body of the two penalty entry points. For each example, runs one
// power-iteration refinement of the Jacobian's top singular value and, when
// requested, accumulates the parameter cotangent with u and v frozen:
// the tangent entering layer l and the cotangent at its preactivation form
// the outer-product gradient for that layer's enforced weight.
JacPenaltyGrads penalty_step(const LipschitzNet& net, const std::vector<DenseVector>& x_batch,
                             const std::vector<DenseVector>& state_u, bool want_grads) {
    if (x_batch.empty()) obj_error("spectral penalty needs a nonempty batch");
    if (state_u.size() != x_batch.size()) {
        obj_error("spectral penalty: one u vector per example required");
    }
    const std::size_t num_layers = net.layers.size();

    JacPenaltyGrads out;
    out.new_u.reserve(x_batch.size());
    if (want_grads) {
        out.d_w_eff.resize(num_layers);
        for (std::size_t l = 0; l < num_layers; ++l) {
            out.d_w_eff[l] = DenseMatrix(net.layers[l].w_raw.rows, net.layers[l].w_raw.cols);
        }
    }

    double penalty_sum = 0.0;
    for (std::size_t e = 0; e < x_batch.size(); ++e) {
        if (state_u[e].size() != net.output_width()) {
            obj_error("spectral penalty: u width does not match net output");
        }
        const auto [y, tape] = forward(net, x_batch[e]);
        (void)y;

        DenseVector v = backward_input(net, tape, state_u[e]);
        const double vn = norm2(v);
        if (vn == 0.0) {
            // Degenerate Jacobian row space; contributes nothing this step.
            out.new_u.push_back(state_u[e]);
            continue;
        }
        scale_inplace(v, 1.0 / vn);

        // Forward tangent sweep, keeping each layer's incoming tangent for
        // the gradient outer products.
        std::vector<DenseVector> tangent_in;
        if (want_grads) tangent_in.reserve(num_layers);
        DenseVector t = v;
        for (std::size_t l = 0; l < num_layers; ++l) {
            if (want_grads) tangent_in.push_back(t);
            t = matvec(layer_weight(net, l), t);
            t = activation_trace_jvp(tape.traces[l], t);
            scale_inplace(t, net.layers[l].scale);
        }
        penalty_sum += dot(state_u[e], t);

        if (want_grads) {
            DenseVector g = state_u[e];
            for (std::size_t l = num_layers; l-- > 0;) {
                scale_inplace(g, net.layers[l].scale);
                DenseVector gz = activation_trace_vjp(tape.traces[l], tape.pre[l].size(), g);
                DenseMatrix& acc = out.d_w_eff[l];
                const DenseVector& tin = tangent_in[l];
                for (std::size_t i = 0; i < acc.rows; ++i) {
                    for (std::size_t j = 0; j < acc.cols; ++j) acc(i, j) += gz[i] * tin[j];
                }
                if (l > 0) g = matvec_t(layer_weight(net, l), gz);
            }
        }

        const double hn = norm2(t);
        if (hn > 0.0) {
            scale_inplace(t, 1.0 / hn);
            out.new_u.push_back(std::move(t));
        } else {
            out.new_u.push_back(state_u[e]);
        }
    }

    const double inv_batch = 1.0 / static_cast<double>(x_batch.size());
    out.penalty = penalty_sum * inv_batch;
    if (want_grads) {
        for (DenseMatrix& m : out.d_w_eff) scale_inplace(m, inv_batch);
    }
    return out;
}

}  // namespace

std::pair<double, std::vector<DenseVector>> spectral_jac_penalty(
    const LipschitzNet& net, const std::vector<DenseVector>& x_batch,
    const std::vector<DenseVector>& state_u) {
    JacPenaltyGrads result = penalty_step(net, x_batch, state_u, false);
    return {result.penalty, std::move(result.new_u)};
}

JacPenaltyGrads spectral_jac_penalty_grads(const LipschitzNet& net,
                                           const std::vector<DenseVector>& x_batch,
                                           const std::vector<DenseVector>& state_u) {
    return penalty_step(net, x_batch, state_u, true);
}

}  // namespace lipnn

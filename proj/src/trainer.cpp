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

#include "lipnn/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>

#include "lipnn/activations.hpp"
#include "lipnn/constraints.hpp"
#include "lipnn/objectives.hpp"
#include "lipnn/rng.hpp"

namespace lipnn {
namespace {

[[noreturn]] void train_error(const std::string& what) {
    throw std::invalid_argument("trainer: " + what);
}

void check_config(const TrainConfig& cfg) {
    if (cfg.beta1 < 0.0 || cfg.beta1 >= 1.0 || cfg.beta2 < 0.0 || cfg.beta2 >= 1.0) {
        train_error("Adam betas must lie in [0, 1)");
    }
    if (cfg.eps_adam <= 0.0) train_error("eps_adam must be positive");
    if (cfg.batch_size < 1) train_error("batch_size must be >= 1");
    if (cfg.eval_interval < 1) train_error("eval_interval must be >= 1");
    if (cfg.kappa < 0.0) train_error("kappa must be >= 0");
    if (cfg.lambda_specjac < 0.0) train_error("lambda_specjac must be >= 0");
}

double resolve_lr(const TrainConfig& cfg, const LipschitzNet& net) {
    if (cfg.lr > 0.0) return cfg.lr;
    if (cfg.lr < 0.0) train_error("lr must be positive (or 0 for the default)");
    for (const LipschitzLayer& l : net.layers) {
        if (l.constraint.scheme != Scheme::BjorckOrthonormal && l.constraint.scheme != Scheme::Unconstrained) {
            return 0.001;
        }
    }
    return 0.01;
}

std::size_t flat_size(const LipschitzNet& net) {
    std::size_t n = 0;
    for (const LipschitzLayer& l : net.layers) n += l.w_raw.data.size() + l.b.size();
    return n;
}

DenseVector flatten_params(const LipschitzNet& net) {
    DenseVector flat;
    flat.reserve(flat_size(net));
    for (const LipschitzLayer& l : net.layers) {
        flat.insert(flat.end(), l.w_raw.data.begin(), l.w_raw.data.end());
        flat.insert(flat.end(), l.b.begin(), l.b.end());
    }
    return flat;
}

void scatter_params(const DenseVector& flat, LipschitzNet& net) {
    std::size_t pos = 0;
    for (LipschitzLayer& l : net.layers) {
        std::copy(flat.begin() + pos, flat.begin() + pos + l.w_raw.data.size(),
                  l.w_raw.data.begin());
        pos += l.w_raw.data.size();
        std::copy(flat.begin() + pos, flat.begin() + pos + l.b.size(), l.b.begin());
        pos += l.b.size();
    }
    bump_version(net);
}

DenseVector flatten_grads(const LipschitzNet& net, const std::vector<DenseMatrix>& d_w,
                          const std::vector<DenseVector>& d_b) {
    DenseVector flat;
    flat.reserve(flat_size(net));
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        flat.insert(flat.end(), d_w[l].data.begin(), d_w[l].data.end());
        flat.insert(flat.end(), d_b[l].begin(), d_b[l].end());
    }
    return flat;
}

DenseVector column_of(const DenseMatrix& m, std::size_t c) {
    DenseVector v(m.rows);
    for (std::size_t r = 0; r < m.rows; ++r) v[r] = m(r, c);
    return v;
}

DenseVector softmax_stable(const DenseVector& logits) {
    const double top = *std::max_element(logits.begin(), logits.end());
    DenseVector p(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - top);
        z += p[i];
    }
    for (double& v : p) v /= z;
    return p;
}

/// Deterministic reshuffled-cursor batch source over pool indices.
class Shuffler {
  public:
    Shuffler(std::size_t pool, Rng& rng) : order_(pool), rng_(rng) {
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        reshuffle();
    }

    // True when the draw wrapped around, i.e. a fresh epoch began.
    bool draw(std::size_t count, std::vector<std::size_t>& out) {
        bool wrapped = false;
        out.clear();
        for (std::size_t i = 0; i < count; ++i) {
            if (cursor_ >= order_.size()) {
                reshuffle();
                wrapped = true;
            }
            out.push_back(order_[cursor_++]);
        }
        return wrapped;
    }

  private:
    void reshuffle() {
        for (std::size_t i = order_.size(); i > 1; --i) {
            std::swap(order_[i - 1], order_[rng_.index(i)]);
        }
        cursor_ = 0;
    }

    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
    Rng& rng_;
};

std::vector<DenseVector> fresh_u_state(std::size_t count, std::size_t width, Rng& rng) {
    std::vector<DenseVector> u(count);
    for (DenseVector& v : u) {
        v.resize(width);
        double sq = 0.0;
        do {
            sq = 0.0;
            for (double& x : v) {
                x = rng.gaussian();
                sq += x * x;
            }
        } while (sq == 0.0);
        scale_inplace(v, 1.0 / std::sqrt(sq));
    }
    return u;
}

double dataset_accuracy(const LipschitzNet& net, const Dataset& data) {
    DenseMatrix cols(data.inputs.front().size(), data.inputs.size());
    for (std::size_t c = 0; c < data.inputs.size(); ++c) {
        for (std::size_t r = 0; r < cols.rows; ++r) cols(r, c) = data.inputs[c][r];
    }
    const DenseMatrix y = eval_batch(net, cols);
    std::size_t hits = 0;
    for (std::size_t c = 0; c < y.cols; ++c) {
        std::size_t best = 0;
        for (std::size_t r = 1; r < y.rows; ++r) {
            if (y(r, c) > y(best, c)) best = r;
        }
        if (static_cast<int>(best) == data.labels[c]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(y.cols);
}

}  // namespace

void adam_step(DenseVector& params, const DenseVector& grads, AdamState& state,
               const TrainConfig& cfg) {
    if (params.size() != grads.size()) train_error("adam_step: param/grad shape mismatch");
    if (cfg.lr <= 0.0) train_error("adam_step needs a resolved positive lr");
    check_config(cfg);
    if (state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    if (state.m.size() != params.size()) train_error("adam_step: state shape mismatch");

    state.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grads[i];
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps_adam);
    }
}

void initialize_weights(LipschitzNet& net, std::uint64_t seed) {
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        LipschitzLayer& layer = net.layers[l];
        Rng rng(Rng::mix(seed, 0x1417 + l));
        const double stddev = 1.0 / std::sqrt(static_cast<double>(layer.w_raw.cols));
        for (double& w : layer.w_raw.data) w = stddev * rng.gaussian();
        std::fill(layer.b.begin(), layer.b.end(), 0.0);
        // Start near-orthonormal so every constraint scheme begins feasible.
        auto [scaled, factor] = safe_scale(layer.w_raw, SafeScaleMode::Spectral);
        (void)factor;
        layer.w_raw = bjorck_orthonormalize(scaled, 1, 20);
    }
    bump_version(net);
}

namespace {

struct PairPools {
    std::vector<DenseVector> p1;
    std::vector<DenseVector> p2;
};

double now_ms(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
        .count();
}

}  // namespace

std::vector<TrainLogRow> train(LipschitzNet& net, const TaskSpec& task, const TrainConfig& cfg) {
    check_config(cfg);
    TrainConfig rc = cfg;
    rc.lr = resolve_lr(cfg, net);
    const auto start = std::chrono::steady_clock::now();
    const bool dual = rc.objective == Objective::WassersteinDual;

    // Materialize the training pools up front.
    PairPools pools;
    Dataset train_set;
    if (dual) {
        if (net.output_width() != 1) train_error("dual objective needs a scalar-output net");
        if (task.variant == TaskVariant::MnistClassify) {
            train_error("dual objective needs a distribution-pair task");
        }
        SamplePair pair = materialize_pair(task, rc.pool_size);
        pools.p1 = std::move(pair.p1);
        pools.p2 = std::move(pair.p2);
        if (pools.p1.front().size() != net.input_width()) {
            train_error("task width does not match net input");
        }
    } else {
        if (net.output_width() < 2) train_error("classification needs >= 2 output classes");
        if (task.variant != TaskVariant::MnistClassify) {
            train_error("classification objectives need a labeled dataset task");
        }
        if (task.train_size < 1) train_error("train_size must be >= 1");
        if (!task.path1.empty() || !task.path2.empty()) {
            train_set = load_mnist_idx(task.path1, task.path2);
            if (task.train_size < train_set.inputs.size()) {
                train_set.inputs.resize(task.train_size);
                train_set.labels.resize(task.train_size);
            }
        } else {
            train_set = synthesize_digit_dataset(task.train_size, task.seed);
        }
        for (int label : train_set.labels) {
            if (label < 0 || static_cast<std::size_t>(label) >= net.output_width()) {
                train_error("label outside the net's class range");
            }
        }
        if (train_set.inputs.front().size() != net.input_width()) {
            train_error("dataset width does not match net input");
        }
    }

    const std::size_t pool1 = dual ? pools.p1.size() : train_set.inputs.size();
    const std::size_t pool2 = dual ? pools.p2.size() : 0;
    const std::size_t batch = std::min(rc.batch_size, pool1);

    Rng loop_rng(Rng::mix(rc.seed, 0x700b));
    Shuffler shuffle1(pool1, loop_rng);
    Shuffler shuffle2(std::max<std::size_t>(pool2, 1), loop_rng);

    // Probe anchors for the per-row Lipschitz spot check.
    std::vector<DenseVector> probe;
    for (std::size_t i = 0; i < std::min<std::size_t>(32, pool1); ++i) {
        probe.push_back(dual ? pools.p1[i] : train_set.inputs[i]);
    }
    if (dual) {
        for (std::size_t i = 0; i < std::min<std::size_t>(32, pool2); ++i) {
            probe.push_back(pools.p2[i]);
        }
    }

    // Algorithm-2 state: one persistent unit vector per pool example,
    // refreshed whenever its pool reshuffles.
    std::vector<DenseVector> u1, u2;
    if (rc.lambda_specjac > 0.0) {
        u1 = fresh_u_state(pool1, net.output_width(), loop_rng);
        if (dual) u2 = fresh_u_state(pool2, net.output_width(), loop_rng);
    }

    net.eval_phase = Phase::Train;
    bump_version(net);

    DenseVector flat = flatten_params(net);
    AdamState adam;
    std::vector<TrainLogRow> log;
    double last_loss = 0.0;
    std::vector<std::size_t> idx1, idx2;

    const auto full_objective = [&]() {
        return dual ? wasserstein_dual_objective(net, pools.p1, pools.p2)
                    : dataset_accuracy(net, train_set);
    };

    for (std::size_t step = 0; step < rc.steps; ++step) {
        const bool wrapped1 = shuffle1.draw(batch, idx1);
        bool wrapped2 = false;
        if (dual) wrapped2 = shuffle2.draw(std::min(rc.batch_size, pool2), idx2);
        if (rc.lambda_specjac > 0.0) {
            if (wrapped1) u1 = fresh_u_state(pool1, net.output_width(), loop_rng);
            if (wrapped2) u2 = fresh_u_state(pool2, net.output_width(), loop_rng);
        }

        const std::size_t cols = idx1.size() + idx2.size();
        DenseMatrix x_cols(net.input_width(), cols);
        for (std::size_t c = 0; c < idx1.size(); ++c) {
            const DenseVector& x = dual ? pools.p1[idx1[c]] : train_set.inputs[idx1[c]];
            for (std::size_t r = 0; r < x_cols.rows; ++r) x_cols(r, c) = x[r];
        }
        for (std::size_t c = 0; c < idx2.size(); ++c) {
            const DenseVector& x = pools.p2[idx2[c]];
            for (std::size_t r = 0; r < x_cols.rows; ++r) x_cols(r, idx1.size() + c) = x[r];
        }

        const BatchTape tape = forward_batch(net, x_cols);
        DenseMatrix dy(tape.output.rows, tape.output.cols);
        double loss = 0.0;
        if (dual) {
            // Minimize mean over the second pool minus mean over the first.
            const double inv1 = 1.0 / static_cast<double>(idx1.size());
            const double inv2 = 1.0 / static_cast<double>(idx2.size());
            double m1 = 0.0, m2 = 0.0;
            for (std::size_t c = 0; c < idx1.size(); ++c) m1 += tape.output(0, c);
            for (std::size_t c = 0; c < idx2.size(); ++c) m2 += tape.output(0, idx1.size() + c);
            loss = m2 * inv2 - m1 * inv1;
            for (std::size_t c = 0; c < idx1.size(); ++c) dy(0, c) = -inv1;
            for (std::size_t c = 0; c < idx2.size(); ++c) dy(0, idx1.size() + c) = inv2;
        } else {
            const double inv = 1.0 / static_cast<double>(cols);
            for (std::size_t c = 0; c < cols; ++c) {
                const DenseVector logits = column_of(tape.output, c);
                const auto label = static_cast<std::size_t>(train_set.labels[idx1[c]]);
                DenseVector g;
                if (rc.objective == Objective::Hinge) {
                    loss += hinge_loss(logits, label, rc.kappa) * inv;
                    g = hinge_loss_grad(logits, label, rc.kappa);
                } else {
                    const DenseVector p = softmax_stable(logits);
                    loss -= std::log(std::max(p[label], 1e-300)) * inv;
                    g = p;
                    g[label] -= 1.0;
                }
                for (std::size_t r = 0; r < dy.rows; ++r) dy(r, c) = g[r] * inv;
            }
        }

        BatchGrads grads = backward_batch(net, tape, dy, false);

        if (rc.lambda_specjac > 0.0) {
            std::vector<DenseVector> xb;
            std::vector<DenseVector> ub;
            xb.reserve(cols);
            ub.reserve(cols);
            for (std::size_t c = 0; c < idx1.size(); ++c) {
                xb.push_back(dual ? pools.p1[idx1[c]] : train_set.inputs[idx1[c]]);
                ub.push_back(u1[idx1[c]]);
            }
            for (std::size_t c = 0; c < idx2.size(); ++c) {
                xb.push_back(pools.p2[idx2[c]]);
                ub.push_back(u2[idx2[c]]);
            }
            JacPenaltyGrads jac = spectral_jac_penalty_grads(net, xb, ub);
            loss += rc.lambda_specjac * jac.penalty;
            for (std::size_t l = 0; l < net.layers.size(); ++l) {
                add_scaled(grads.d_w_eff[l], rc.lambda_specjac, jac.d_w_eff[l]);
            }
            for (std::size_t c = 0; c < idx1.size(); ++c) u1[idx1[c]] = jac.new_u[c];
            for (std::size_t c = 0; c < idx2.size(); ++c) {
                u2[idx2[c]] = jac.new_u[idx1.size() + c];
            }
        }

        if (!std::isfinite(loss)) {
            train_error("non-finite loss at step " + std::to_string(step) +
                        "; lower the learning rate or check the data");
        }
        last_loss = loss;

        // One constraint pullback per layer, then the flat Adam update.
        std::vector<DenseMatrix> d_w_raw(net.layers.size());
        for (std::size_t l = 0; l < net.layers.size(); ++l) {
            d_w_raw[l] = enforcement_vjp(net.layers[l].constraint, net.layers[l].w_raw,
                                         net.eval_phase, layer_tape(net, l), grads.d_w_eff[l]);
        }
        DenseVector flat_grads = flatten_grads(net, d_w_raw, grads.d_b);
        adam_step(flat, flat_grads, adam, rc);
        scatter_params(flat, net);

        // Regularization schemes project after, not during, the update.
        bool projected = false;
        for (LipschitzLayer& layer : net.layers) {
            if (layer.constraint.scheme == Scheme::ParsevalRegularize) {
                layer.w_raw = parseval_step(layer.w_raw, layer.constraint.beta);
                projected = true;
            }
        }
        if (projected) {
            flat = flatten_params(net);
            bump_version(net);
        }

        const std::size_t completed = step + 1;
        if (completed % rc.eval_interval == 0 && completed != rc.steps) {
            TrainLogRow row;
            row.step = completed;
            row.loss = last_loss;
            row.objective = full_objective();
            row.lipschitz_check = empirical_lipschitz(net, probe, 4, rc.seed);
            row.wall_ms = now_ms(start);
            log.push_back(row);
        }
    }

    // Final-strength enforcement: deepen the orthonormalization, switch
    // phase, and warm every cache before the closing metrics row.
    for (LipschitzLayer& layer : net.layers) {
        if (layer.constraint.scheme == Scheme::BjorckOrthonormal) {
            layer.constraint.final_iters = rc.final_enforce_iters;
        }
    }
    net.eval_phase = Phase::Final;
    bump_version(net);
    for (std::size_t l = 0; l < net.layers.size(); ++l) layer_tape(net, l);

    TrainLogRow final_row;
    final_row.step = rc.steps;
    final_row.loss = last_loss;
    final_row.objective = full_objective();
    final_row.lipschitz_check = empirical_lipschitz(net, probe, 8, rc.seed);
    final_row.wall_ms = now_ms(start);

    bool hard_schemes = true;
    for (const LipschitzLayer& layer : net.layers) {
        if (layer.constraint.scheme == Scheme::ParsevalRegularize) hard_schemes = false;
    }
    if (hard_schemes && final_row.lipschitz_check > net.declared_k * (1.0 + 1e-6)) {
        throw std::runtime_error("trainer: empirical Lipschitz probe " +
                                 std::to_string(final_row.lipschitz_check) +
                                 " exceeds the declared bound " + std::to_string(net.declared_k));
    }
    log.push_back(final_row);
    return log;
}

std::string metrics_csv_string(const std::vector<TrainLogRow>& log) {
    std::string out = "step,loss,objective,lipschitz_check,wall_ms\n";
    char line[256];
    for (const TrainLogRow& row : log) {
        std::snprintf(line, sizeof(line), "%zu,%.17g,%.17g,%.17g,%.3f\n", row.step, row.loss,
                      row.objective, row.lipschitz_check, row.wall_ms);
        out += line;
    }
    return out;
}

void write_metrics_csv(const std::vector<TrainLogRow>& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("trainer: cannot open " + path + " for writing");
    out << metrics_csv_string(log);
}

}  // namespace lipnn

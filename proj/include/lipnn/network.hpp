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

#ifndef LIPNN_NETWORK_HPP_
#define LIPNN_NETWORK_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lipnn/activations.hpp"
#include "lipnn/constraints.hpp"
#include "lipnn/linalg.hpp"

namespace lipnn {

enum class NormFamily : std::uint8_t { Two, Inf };

/// One dense layer x -> scale * activation(W x + b). The stored W_raw is the
/// free parameter; the weight actually used is the constrained version,
/// cached per parameter version so repeated evaluations do not re-run the
/// enforcement.
struct LipschitzLayer {
    DenseMatrix w_raw;
    DenseVector b;
    ConstraintKind constraint;
    ActivationKind activation;
    double scale = 1.0;

    /// Persistent power-iteration state (warm start for the spectral
    /// safe-scale bound, or the left iterate of spectral normalization).
    /// Mutated on cache refill; the net must not be shared across threads
    /// while its parameters move.
    mutable DenseVector power_state;

    struct Cache {
        std::uint64_t version = static_cast<std::uint64_t>(-1);
        Phase phase = Phase::Train;
        EnforcementTape tape;
    };
    mutable Cache cache;
};

struct LipschitzNet {
    std::vector<LipschitzLayer> layers;
    NormFamily norm_family = NormFamily::Two;
    double declared_k = 1.0;
    Phase eval_phase = Phase::Final;
    std::uint64_t param_version = 0;

    std::size_t input_width() const;
    std::size_t output_width() const;
};

/// Must be called after mutating any W_raw or bias so cached enforced
/// weights are recomputed on the next evaluation.
void bump_version(LipschitzNet& net);

/// Enforced weight (and its differentiation tape) for one layer under the
/// net's current evaluation phase, filling the cache if stale.
const EnforcementTape& layer_tape(const LipschitzNet& net, std::size_t layer);
const DenseMatrix& layer_weight(const LipschitzNet& net, std::size_t layer);

/// Per-example evaluation record: every layer input, preactivation, and
/// activation trace needed to run the backward pass or replay the
/// linearization.
struct ActivationRecord {
    std::uint64_t param_version = 0;
    Phase phase = Phase::Final;
    std::vector<DenseVector> layer_inputs;  // input to each layer's affine map
    std::vector<DenseVector> pre;           // W x + b per layer
    std::vector<ActivationTrace> traces;
    DenseVector output;
};

std::pair<DenseVector, ActivationRecord> forward(const LipschitzNet& net, const DenseVector& x);

struct ParamGrads {
    std::vector<DenseMatrix> d_w_raw;
    std::vector<DenseVector> d_b;
};

/**
 * Reverse-mode pass from an output cotangent dy: returns gradients with
 * respect to the raw parameters (pulled back through the differentiable
 * constraint) and the input. The tape must come from a forward pass at the
 * current parameter version, otherwise a stale-tape error is raised.
 */
std::pair<ParamGrads, DenseVector> backward(const LipschitzNet& net, const ActivationRecord& tape,
                                            const DenseVector& dy);

/// Input gradient only (no parameter pullback); the attack inner loop.
DenseVector backward_input(const LipschitzNet& net, const ActivationRecord& tape,
                           const DenseVector& dy);

/// Forward-mode directional derivative (df/dx) v, propagating the tangent
/// through each affine map and the activation linearization at x.
DenseVector input_jvp(const LipschitzNet& net, const DenseVector& x, const DenseVector& v);

/// Same tangent propagation but reusing an existing record's linearization.
DenseVector input_jvp_from_tape(const LipschitzNet& net, const ActivationRecord& tape,
                                const DenseVector& v);

/**
 * Largest singular value of the input Jacobian at x, estimated by power
 * iteration that alternates the vector-Jacobian product (backward) with the
 * Jacobian-vector product (forward mode).
 */
double input_jacobian_spectral_norm(const LipschitzNet& net, const DenseVector& x,
                                    std::size_t iters, std::uint64_t seed);

/**
 * For each threshold t, the fraction of rectifier units whose positive
 * frequency over the dataset is at least t. Only defined for nets whose
 * activations are ReLU (Identity output layers allowed).
 */
std::map<double, double> activation_statistics(const LipschitzNet& net,
                                               const std::vector<DenseVector>& inputs,
                                               const DenseVector& thresholds);

/// Little-endian binary checkpoint ("LIPN" magic, version 1). Round-trips
/// every field bit-exactly.
void save_net(const LipschitzNet& net, const std::string& path);
LipschitzNet load_net(const std::string& path);

/**
 * Replaces each raw weight with its final-phase enforced matrix, so a
 * subsequent save_net stores deployment-ready weights. Enforcement at the
 * fixed point is stable, so later evaluations reproduce the same maps up to
 * roundoff.
 */
void bake_enforced_weights(LipschitzNet& net);

/// Batched evaluation with examples as matrix columns; used by the trainer
/// so layer products run as matrix-matrix multiplies.
struct BatchTape {
    std::uint64_t param_version = 0;
    Phase phase = Phase::Final;
    std::vector<DenseMatrix> layer_inputs;            // in_l x batch
    std::vector<std::vector<ActivationTrace>> traces; // per layer, per column
    DenseMatrix output;                               // out x batch
};

BatchTape forward_batch(const LipschitzNet& net, const DenseMatrix& x_cols);

/// Batch output only, without trace bookkeeping (evaluation-time path).
DenseMatrix eval_batch(const LipschitzNet& net, const DenseMatrix& x_cols);

struct BatchGrads {
    std::vector<DenseMatrix> d_w_eff;  // gradients w.r.t. the ENFORCED weights
    std::vector<DenseVector> d_b;
    DenseMatrix d_x;
};

/// Reverse pass over a batch. Gradients are left against the enforced
/// weights; the caller chains enforcement_vjp once per layer (cheaper than
/// pulling each example through the constraint separately).
BatchGrads backward_batch(const LipschitzNet& net, const BatchTape& tape,
                          const DenseMatrix& dy_cols, bool want_dx);

/**
 * Fully-connected builder: `hidden_layers` layers of the given width with
 * the requested activation, then a linear output layer. Every layer carries
 * the constraint and a scale of k^(1/num_layers) so the layer scales multiply
 * to the declared Lipschitz bound. Weights start at zero; the trainer's init
 * routine fills them.
 */
LipschitzNet make_dense_net(std::size_t input_width, std::size_t hidden_width,
                            std::size_t hidden_layers, std::size_t output_width,
                            ActivationKind activation, ConstraintKind constraint,
                            NormFamily family, double k);

/**
 * Empirical Lipschitz probe: max over sampled pairs (jittered around the
 * anchor points) of the output/input difference-norm ratio in the net's
 * declared norm family.
 */
double empirical_lipschitz(const LipschitzNet& net, const std::vector<DenseVector>& anchors,
                           std::size_t pairs, std::uint64_t seed);

/// Scales every row with l2 norm above one back onto the unit sphere, the
/// construction-time enforcement of a (2, inf) mixed-norm bound.
void normalize_rows_two(DenseMatrix& w);

}  // namespace lipnn

#endif  // LIPNN_NETWORK_HPP_

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

#ifndef LIPNN_TRAINER_HPP_
#define LIPNN_TRAINER_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "lipnn/linalg.hpp"
#include "lipnn/network.hpp"
#include "lipnn/tasks.hpp"

namespace lipnn {

enum class Objective { WassersteinDual, Hinge, CrossEntropy };

struct TrainConfig {
    // 0 selects the constraint-specific default: 0.01 when every layer is
    // orthonormalized, 0.001 otherwise.
    double lr = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_adam = 1e-8;
    std::size_t batch_size = 64;   // per distribution for the dual objective
    std::size_t steps = 1000;
    std::size_t eval_interval = 100;
    std::uint64_t seed = 0;
    Objective objective = Objective::WassersteinDual;
    double kappa = 0.0;            // hinge target margin
    double lambda_specjac = 0.0;   // Jacobian-norm regularizer weight
    std::size_t final_enforce_iters = 20;
    std::size_t pool_size = 10000;  // synthetic samples drawn per distribution
};

/// Flat first/second-moment buffers plus the step counter for bias
/// correction. Sized lazily on first use.
struct AdamState {
    DenseVector m;
    DenseVector v;
    std::uint64_t t = 0;
};

/// One bias-corrected Adam update, in place. Shapes of params and grads must
/// agree (and match any prior state), otherwise an error is raised.
void adam_step(DenseVector& params, const DenseVector& grads, AdamState& state,
               const TrainConfig& cfg);

/// Seeded near-orthonormal start: Gaussian fill scaled by 1/sqrt(fan_in),
/// then a full-strength orthonormalization pass per layer. Biases zeroed.
void initialize_weights(LipschitzNet& net, std::uint64_t seed);

struct TrainLogRow {
    std::size_t step = 0;
    double loss = 0.0;             // mini-batch training loss at the log point
    double objective = 0.0;        // full-pool objective (dual value or accuracy)
    double lipschitz_check = 0.0;  // empirical difference-quotient probe
    double wall_ms = 0.0;          // elapsed since training start
};

/**
 * Seeded mini-batch training. Initializes weights to near-orthonormal,
 * runs `steps` Adam updates with train-strength constraint enforcement in
 * every forward pass, then switches the net to final-strength enforcement
 * (final_enforce_iters) and verifies the empirical Lipschitz probe before
 * emitting the last log row. A non-finite loss aborts with a diagnostic.
 * Everything except wall_ms is bit-reproducible for a fixed seed and config.
 */
std::vector<TrainLogRow> train(LipschitzNet& net, const TaskSpec& task, const TrainConfig& cfg);

/// CSV with header step,loss,objective,lipschitz_check,wall_ms; doubles are
/// written round-trip exact so reproducibility can be checked textually.
void write_metrics_csv(const std::vector<TrainLogRow>& log, const std::string& path);
std::string metrics_csv_string(const std::vector<TrainLogRow>& log);

}  // namespace lipnn

#endif  // LIPNN_TRAINER_HPP_

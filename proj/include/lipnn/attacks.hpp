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

#ifndef LIPNN_ATTACKS_HPP_
#define LIPNN_ATTACKS_HPP_

#include <cstddef>
#include <cstdint>
#include <limits>

#include "lipnn/linalg.hpp"
#include "lipnn/network.hpp"

namespace lipnn {

/// Objective the attacker ascends: cross-entropy of the true label, or the
/// negated f6 margin surrogate.
enum class AttackLoss { CrossEntropy, CwF6 };

struct AttackConfig {
    double epsilon = 0.1;       // l-inf budget, >= 0
    std::size_t steps = 200;    // gradient iterations per restart
    double step_size = 0.0;     // 0 selects epsilon / 10
    std::size_t restarts = 10;  // random restarts, best kept by loss
    double init_scale = 0.1;    // restart start point within epsilon * init_scale
    AttackLoss loss = AttackLoss::CwF6;
    std::uint64_t seed = 0;
    // Clamp floor for the f6 surrogate. Unclamped by default so the attack
    // keeps pushing the margin below zero instead of plateauing at the flip.
    double kappa_cw = std::numeric_limits<double>::infinity();
};

/**
 * f6 surrogate: max(-kappa_cw, y_t - max_{i != t} y_i). Positive values
 * equal the classification margin; negative values measure how decisively
 * the example is misclassified (down to the -kappa_cw floor).
 */
double cw_f6_loss(const DenseVector& logits, std::size_t t,
                  double kappa_cw = std::numeric_limits<double>::infinity());

/// Value and logit-gradient of the attacker's ascent objective.
double attack_loss_value(const DenseVector& logits, std::size_t t, AttackLoss loss,
                         double kappa_cw);
DenseVector attack_loss_grad(const DenseVector& logits, std::size_t t, AttackLoss loss,
                             double kappa_cw);

/// Single sign-gradient step of size epsilon, clipped to the [0,1] box.
DenseVector fgs_attack(const LipschitzNet& net, const DenseVector& x, std::size_t t,
                       const AttackConfig& cfg);

struct AttackResult {
    DenseVector x_adv;
    bool success = false;  // argmax at x_adv differs from t
};

/**
 * Projected gradient descent within the epsilon ball around x: random start,
 * sign-gradient steps, per-step projection onto the ball and the [0,1] box.
 * Runs cfg.restarts independent restarts (seeded deterministically from
 * cfg.seed) and returns the iterate with the highest attack loss.
 */
AttackResult pgd_attack(const LipschitzNet& net, const DenseVector& x, std::size_t t,
                        const AttackConfig& cfg);

}  // namespace lipnn

#endif  // LIPNN_ATTACKS_HPP_

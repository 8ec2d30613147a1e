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

#ifndef LIPNN_OBJECTIVES_HPP_
#define LIPNN_OBJECTIVES_HPP_

#include <cstddef>
#include <map>
#include <utility>
#include <vector>

#include "lipnn/linalg.hpp"
#include "lipnn/network.hpp"
#include "lipnn/tasks.hpp"

namespace lipnn {

/**
 * Robustness certificates convert a classification margin into an l-inf
 * perturbation radius. Two conversion rules are provided:
 *
 *   Sound2K     radius = margin / (2K). Provably safe whenever every logit
 *               is K-Lipschitz: an adversary moving the input by r can close
 *               the gap between two logits by at most 2Kr.
 *   PaperKHalf  radius = 2 * margin / K. A looser folk rule kept behind an
 *               explicit opt-in for comparison plots; it is NOT sound and
 *               must never back a safety claim.
 */
enum class CertRule { Sound2K, PaperKHalf };

struct MarginConfig {
    double kappa = 0.0;  // hinge target margin, >= 0
    double k = 1.0;      // declared Lipschitz constant of the net, > 0
    CertRule cert_rule = CertRule::Sound2K;
};

/// One certificate per example.
struct CertificationRow {
    double margin = 0.0;
    double certified_radius = 0.0;
    int predicted = 0;
    int label = 0;
};
using CertificationReport = std::vector<CertificationRow>;

/**
 * Dual form of the 1-Wasserstein distance: the mean of the scalar network
 * over the first sample set minus its mean over the second. Training
 * maximizes this, so the trainer minimizes its negation. Requires a
 * width-1 output and at least one sample on each side.
 */
double wasserstein_dual_objective(const LipschitzNet& net, const std::vector<DenseVector>& p1,
                                  const std::vector<DenseVector>& p2);

/// max(0, y_t - max_{i != t} y_i); zero when misclassified or tied.
double margin(const DenseVector& logits, std::size_t t);

/// Multi-class hinge: sum_{i != t} max(0, kappa - (y_t - y_i)).
double hinge_loss(const DenseVector& logits, std::size_t t, double kappa);

/// Subgradient of hinge_loss in the logits (boundary terms treated as
/// inactive, matching the value function exactly off ties).
DenseVector hinge_loss_grad(const DenseVector& logits, std::size_t t, double kappa);

double certified_radius(double margin_val, double k, CertRule rule);

/// Margins, predictions, and radii for every example in the dataset,
/// evaluated under the net's current phase.
CertificationReport certification_report(const LipschitzNet& net, const Dataset& data,
                                         const MarginConfig& cfg);

/// For each epsilon: the fraction of examples both correctly classified and
/// certified at radius >= epsilon, using the net's declared constant.
std::map<double, double> certified_accuracy_curve(const LipschitzNet& net, const Dataset& data,
                                                  const DenseVector& epsilons, CertRule rule);

/**
 * One power-iteration step of the input-Jacobian spectral norm per example,
 * averaged over the batch. Each persistent left vector u is refined as
 *
 *   v = normalize(J^T u), h = J v, penalty += u . h, u <- normalize(h)
 *
 * so repeated calls on the same inputs converge to the true spectral norm.
 * state_u must hold one output-width unit vector per batch example; the
 * refined vectors are returned for the caller to carry forward.
 */
std::pair<double, std::vector<DenseVector>> spectral_jac_penalty(
    const LipschitzNet& net, const std::vector<DenseVector>& x_batch,
    const std::vector<DenseVector>& state_u);

/**
 * Same step, also accumulating d(penalty)/d(enforced weight) per layer with
 * u and v held constant. Layout matches BatchGrads::d_w_eff so the trainer
 * can add lambda times these into its loss gradient before the single
 * constraint pullback per layer. The Jacobian does not touch biases, so
 * there is no bias term.
 */
struct JacPenaltyGrads {
    double penalty = 0.0;
    std::vector<DenseMatrix> d_w_eff;
    std::vector<DenseVector> new_u;
};
JacPenaltyGrads spectral_jac_penalty_grads(const LipschitzNet& net,
                                           const std::vector<DenseVector>& x_batch,
                                           const std::vector<DenseVector>& state_u);

}  // namespace lipnn

#endif  // LIPNN_OBJECTIVES_HPP_

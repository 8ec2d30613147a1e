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

#include "lipnn/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "lipnn/rng.hpp"

namespace lipnn {
namespace {

[[noreturn]] void attack_error(const std::string& what) {
    throw std::invalid_argument("attacks: " + what);
}

void check_config(const AttackConfig& cfg) {
    if (cfg.epsilon < 0.0) attack_error("epsilon must be >= 0");
    if (cfg.steps < 1) attack_error("steps must be >= 1");
    if (cfg.restarts < 1) attack_error("restarts must be >= 1");
    if (cfg.init_scale > 1.0) attack_error("init_scale must be <= 1");
    if (cfg.kappa_cw < 0.0) attack_error("kappa_cw must be >= 0");
}

void check_example(const LipschitzNet& net, const DenseVector& x, std::size_t t) {
    if (x.size() != net.input_width()) attack_error("input width mismatch");
    if (net.output_width() < 2) attack_error("attacks need at least two classes");
    if (t >= net.output_width()) attack_error("class index out of range");
}

std::size_t runner_up_index(const DenseVector& logits, std::size_t t) {
    std::size_t best = t == 0 ? 1 : 0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        if (i != t && logits[i] > logits[best]) best = i;
    }
    return best;
}

std::size_t argmax_index(const DenseVector& v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

DenseVector softmax(const DenseVector& logits) {
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

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void project_and_clip(DenseVector& x, const DenseVector& center, double epsilon) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = std::clamp(x[i], center[i] - epsilon, center[i] + epsilon);
        x[i] = std::clamp(x[i], 0.0, 1.0);
    }
}

}  // namespace

double cw_f6_loss(const DenseVector& logits, std::size_t t, double kappa_cw) {
    if (logits.size() < 2) attack_error("cw_f6_loss needs at least two classes");
    if (t >= logits.size()) attack_error("cw_f6_loss: class index out of range");
    const double gap = logits[t] - logits[runner_up_index(logits, t)];
    return std::max(-kappa_cw, gap);
}

double attack_loss_value(const DenseVector& logits, std::size_t t, AttackLoss loss,
                         double kappa_cw) {
    switch (loss) {
        case AttackLoss::CrossEntropy: {
            const DenseVector p = softmax(logits);
            return -std::log(std::max(p[t], 1e-300));
        }
        case AttackLoss::CwF6:
            return -cw_f6_loss(logits, t, kappa_cw);
    }
    attack_error("unknown attack loss");
}

DenseVector attack_loss_grad(const DenseVector& logits, std::size_t t, AttackLoss loss,
                             double kappa_cw) {
    if (t >= logits.size()) attack_error("attack_loss_grad: class index out of range");
    DenseVector g(logits.size(), 0.0);
    switch (loss) {
        case AttackLoss::CrossEntropy: {
            g = softmax(logits);
            g[t] -= 1.0;
            return g;
        }
        case AttackLoss::CwF6: {
            const std::size_t j = runner_up_index(logits, t);
            // Inside the clamp floor the objective is flat.
            if (logits[t] - logits[j] <= -kappa_cw) return g;
            g[t] = -1.0;
            g[j] = 1.0;
            return g;
        }
    }
    attack_error("unknown attack loss");
}

DenseVector fgs_attack(const LipschitzNet& net, const DenseVector& x, std::size_t t,
                       const AttackConfig& cfg) {
    check_config(cfg);
    check_example(net, x, t);
    const auto [logits, tape] = forward(net, x);
    const DenseVector dy = attack_loss_grad(logits, t, cfg.loss, cfg.kappa_cw);
    const DenseVector gx = backward_input(net, tape, dy);
    DenseVector adv = x;
    for (std::size_t i = 0; i < adv.size(); ++i) adv[i] += cfg.epsilon * sign_of(gx[i]);
    project_and_clip(adv, x, cfg.epsilon);
    return adv;
}

AttackResult pgd_attack(const LipschitzNet& net, const DenseVector& x, std::size_t t,
                        const AttackConfig& cfg) {
    check_config(cfg);
    check_example(net, x, t);
    const double step = cfg.step_size > 0.0 ? cfg.step_size : cfg.epsilon / 10.0;

    DenseVector best_adv = x;
    double best_loss = -std::numeric_limits<double>::infinity();
    for (std::size_t restart = 0; restart < cfg.restarts; ++restart) {
        Rng rng(Rng::mix(cfg.seed, 0xadd0 + restart));
        DenseVector cur = x;
        const double start_radius = cfg.epsilon * cfg.init_scale;
        for (double& v : cur) v += rng.uniform(-start_radius, start_radius);
        project_and_clip(cur, x, cfg.epsilon);

        for (std::size_t it = 0; it < cfg.steps; ++it) {
            const auto [logits, tape] = forward(net, cur);
            const DenseVector dy = attack_loss_grad(logits, t, cfg.loss, cfg.kappa_cw);
            const DenseVector gx = backward_input(net, tape, dy);
            for (std::size_t i = 0; i < cur.size(); ++i) cur[i] += step * sign_of(gx[i]);
            project_and_clip(cur, x, cfg.epsilon);
        }

        const auto [logits, tape] = forward(net, cur);
        (void)tape;
        const double loss = attack_loss_value(logits, t, cfg.loss, cfg.kappa_cw);
        if (loss > best_loss) {
            best_loss = loss;
            best_adv = cur;
        }
    }

    AttackResult result;
    const auto [final_logits, tape] = forward(net, best_adv);
    (void)tape;
    result.success = argmax_index(final_logits) != t;
    result.x_adv = std::move(best_adv);
    return result;
}

}  // namespace lipnn

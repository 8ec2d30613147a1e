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

#ifndef LIPNN_CONSTRAINTS_HPP_
#define LIPNN_CONSTRAINTS_HPP_

#include <cstdint>
#include <utility>

#include "lipnn/linalg.hpp"

namespace lipnn {

/// Pre-scaling rule used to shrink a matrix under the orthonormalization
/// precondition. Spectral runs power iteration with a small slack factor;
/// the other three divide by a cheap closed-form upper bound on sigma_max.
enum class SafeScaleMode : std::uint8_t { Spectral, InfBound, OneBound, MaxBound };

enum class Phase : std::uint8_t { Train, Final };

enum class Scheme : std::uint8_t {
    BjorckOrthonormal,
    SpectralNormalize,
    ParsevalRegularize,
    LInfProject,
    Unconstrained,
};

struct ConstraintKind {
    Scheme scheme = Scheme::Unconstrained;
    std::size_t order = 1;        // Taylor order of the orthonormalization update (1 or 2)
    std::size_t train_iters = 3;  // iterations inside the training loop
    std::size_t final_iters = 20; // iterations for the final enforcement pass
    SafeScaleMode safe = SafeScaleMode::Spectral;
    std::size_t power_iters = 1;  // spectral normalization updates per enforcement
    double beta = 0.5;            // Parseval regularization strength

    static ConstraintKind bjorck(std::size_t order = 1, std::size_t train_iters = 3,
                                 std::size_t final_iters = 20,
                                 SafeScaleMode safe = SafeScaleMode::Spectral) {
        ConstraintKind k;
        k.scheme = Scheme::BjorckOrthonormal;
        k.order = order;
        k.train_iters = train_iters;
        k.final_iters = final_iters;
        k.safe = safe;
        return k;
    }
    static ConstraintKind spectral(std::size_t power_iters = 1) {
        ConstraintKind k;
        k.scheme = Scheme::SpectralNormalize;
        k.power_iters = power_iters;
        return k;
    }
    static ConstraintKind parseval(double beta = 0.5) {
        ConstraintKind k;
        k.scheme = Scheme::ParsevalRegularize;
        k.beta = beta;
        return k;
    }
    static ConstraintKind linf_project() {
        ConstraintKind k;
        k.scheme = Scheme::LInfProject;
        return k;
    }
    static ConstraintKind unconstrained() { return {}; }
};

/// Throws std::invalid_argument when the kind violates its own invariants
/// (order outside {1, 2}, beta outside (0, 0.5]).
void validate_constraint(const ConstraintKind& k);

/**
 * Iterative orthonormalization: A_{k+1} = A_k (I + 1/2 Q_k + ...) with
 * Q_k = I - A_k^T A_k, truncated at Taylor order p (1 or 2). Converges to the
 * nearest orthonormal matrix when the Gram residual of the smaller side has
 * spectral norm below one; a violating input raises an error telling the
 * caller to safe_scale first. Wide matrices are handled by the mirrored
 * recurrence on A A^T so that rows, not columns, become orthonormal.
 */
DenseMatrix bjorck_orthonormalize(const DenseMatrix& a, std::size_t p, std::size_t iters);

/// Reverse-mode gradient of bjorck_orthonormalize: given dL/d(output),
/// returns dL/dA by replaying the iteration and back-substituting through
/// each matrix product. Exact (matches finite differences).
DenseMatrix bjorck_orthonormalize_vjp(const DenseMatrix& a, std::size_t p, std::size_t iters,
                                      const DenseMatrix& g_out);

/// Spectral norm of (Gram(smaller side of a) - I), the quantity the
/// orthonormalization precondition bounds by one.
double bjorck_precondition_norm(const DenseMatrix& a);

/**
 * Divides A by an upper bound on sigma_max chosen per mode and returns the
 * scaled matrix together with the divisor. Spectral uses power iteration
 * times (1 + 1e-3) slack; InfBound uses sqrt(rows) * max-row-abs-sum;
 * OneBound sqrt(cols) * max-col-abs-sum; MaxBound sqrt(rows * cols) * largest
 * absolute entry. A zero matrix is rejected. The optional warm-start vector
 * (resized to cols) carries the power iterate across repeated calls.
 */
std::pair<DenseMatrix, double> safe_scale(const DenseMatrix& a, SafeScaleMode mode,
                                          DenseVector* warm_v = nullptr);

/// Derivative of the safe_scale divisor with respect to the matrix entries
/// (the almost-everywhere gradient of the max-based bounds; u v^T for the
/// spectral mode).
DenseMatrix safe_scale_factor_grad(const DenseMatrix& a, SafeScaleMode mode);

/// Reverse-mode gradient through A -> A / factor(A) given dL/d(scaled).
DenseMatrix safe_scale_vjp(const DenseMatrix& a, SafeScaleMode mode,
                           const DenseMatrix& g_scaled);

/**
 * Applies the p=1 orthonormalization for `iters` iterations to the vector v
 * without ever forming an intermediate matrix, using only the maps u -> A u,
 * u -> A^T u and u -> A A^T u. Cost grows as 3^iters products, so iterations
 * beyond 5 are rejected.
 */
DenseVector bjorck_matvec(const DenseMatrix& a, const DenseVector& v, std::size_t iters);

/// Power-iteration weight rescaling: W / sigma_hat with a persistent left
/// iterate. Returns the normalized matrix and the updated iterate.
std::pair<DenseMatrix, DenseVector> spectral_normalize(const DenseMatrix& w,
                                                       std::size_t power_iters,
                                                       const DenseVector& state_u);

/// One regularization step W (1 + beta) - beta W W^T W; at beta = 1/2 this is
/// bit-identical to a single p=1 orthonormalization iteration.
DenseMatrix parseval_step(const DenseMatrix& w, double beta);

/**
 * Euclidean projection of y onto the unit l1 ball via the sort/threshold
 * rule: vectors already inside the ball pass through untouched; otherwise the
 * magnitudes are sorted descending, the pivot count K and threshold
 * tau = (sum of the K largest - 1) / K are found, and each coordinate is
 * soft-thresholded with its original sign restored.
 */
DenseVector linf_project_row(const DenseVector& y);

/// Reverse-mode gradient of linf_project_row (identity inside the ball;
/// sign-corrected mean subtraction over the surviving support otherwise).
DenseVector linf_project_row_vjp(const DenseVector& y, const DenseVector& g);

/// Everything the backward pass needs to differentiate one enforcement.
struct EnforcementTape {
    DenseMatrix enforced;
    DenseMatrix scaled;   // orthonormalization input after pre-scaling
    double factor = 1.0;  // pre-scaling divisor
    DenseVector u, v;     // singular directions behind the divisor / sigma_hat
    double sigma = 0.0;   // spectral-normalization estimate
    std::vector<DenseMatrix> trajectory;  // orthonormalization iterates, scaled input first
};

/**
 * Dispatches W_raw through the configured scheme. BjorckOrthonormal
 * pre-scales then runs train-phase or final-phase iterations; LInfProject
 * projects every row onto the unit l1 ball; SpectralNormalize divides by the
 * power-iteration estimate (the persistent iterate lives in *spectral_state
 * when provided); ParsevalRegularize and Unconstrained pass the matrix
 * through, the former because its update applies after the gradient step.
 */
EnforcementTape enforce_constraint_traced(const ConstraintKind& kind, const DenseMatrix& w_raw,
                                          Phase phase, DenseVector* spectral_state = nullptr);

DenseMatrix enforce_constraint(const ConstraintKind& kind, const DenseMatrix& w_raw, Phase phase);

/// Pulls dL/d(enforced) back to dL/d(W_raw) using the tape recorded by
/// enforce_constraint_traced on the same input.
DenseMatrix enforcement_vjp(const ConstraintKind& kind, const DenseMatrix& w_raw, Phase phase,
                            const EnforcementTape& tape, const DenseMatrix& g_enforced);

}  // namespace lipnn

#endif  // LIPNN_CONSTRAINTS_HPP_

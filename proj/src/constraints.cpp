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

#include "lipnn/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace lipnn {
namespace {

constexpr double kSpectralSlack = 1e-3;  // head-room multiplier for the spectral bound
constexpr std::size_t kPreconditionProbeIters = 50;
constexpr std::uint64_t kPreconditionSeed = 0x900d5eedULL;

[[noreturn]] void constraint_error(const std::string& what) {
    throw std::invalid_argument("constraints: " + what);
}

void require_nonempty(const DenseMatrix& a, const char* who) {
    if (a.empty()) constraint_error(std::string(who) + " requires a non-empty matrix");
}

void require_order(std::size_t p) {
    if (p < 1 || p > 2) {
        constraint_error("orthonormalization order must be 1 or 2, got " + std::to_string(p));
    }
}

/// Gram matrix of the smaller side: A^T A when tall (columns orthonormalize),
/// A A^T when wide (rows orthonormalize).
DenseMatrix small_gram(const DenseMatrix& a) {
    return a.rows >= a.cols ? gram(a) : gram_right(a);
}

/// Checks ||G - I||_2 < 1 on an already-computed Gram matrix; the estimate
/// converges from below, which can only make the check more permissive.
void check_precondition(const DenseMatrix& g, const char* who) {
    DenseMatrix residual = g;
    for (std::size_t i = 0; i < residual.rows; ++i) residual(i, i) -= 1.0;
    const double norm =
        spectral_norm_power_iteration(residual, kPreconditionProbeIters, kPreconditionSeed).sigma;
    if (norm >= 1.0) {
        constraint_error(std::string(who) + ": ||Gram - I||_2 = " + std::to_string(norm) +
                         " >= 1; run safe_scale on the matrix first");
    }
}

/// One p=1 update, shared with parseval_step so that beta = 1/2 reproduces it
/// bit for bit: grow * A - shrink * A (A^T A) for tall A and the mirrored
/// grouping (A A^T) A for wide A.
DenseMatrix first_order_step(const DenseMatrix& a, double grow, double shrink,
                             const DenseMatrix& gram_small) {
    DenseMatrix cubic = a.rows >= a.cols ? matmul(a, gram_small) : matmul(gram_small, a);
    DenseMatrix out = a;
    scale_inplace(out, grow);
    add_scaled(out, -shrink, cubic);
    return out;
}

/// One p=2 update A (I + 1/2 Q + 3/8 Q^2) with Q = I - Gram (mirrored on the
/// left for wide matrices).
DenseMatrix second_order_step(const DenseMatrix& a, const DenseMatrix& gram_small) {
    const std::size_t n = gram_small.rows;
    DenseMatrix q = identity(n);
    add_scaled(q, -1.0, gram_small);
    DenseMatrix r = identity(n);
    add_scaled(r, 0.5, q);
    add_scaled(r, 0.375, matmul(q, q));
    return a.rows >= a.cols ? matmul(a, r) : matmul(r, a);
}

DenseMatrix bjorck_iterate(const DenseMatrix& a0, std::size_t p, std::size_t iters,
                           bool check, std::vector<DenseMatrix>* trajectory) {
    DenseMatrix a = a0;
    if (trajectory) trajectory->push_back(a);
    for (std::size_t k = 0; k < iters; ++k) {
        const DenseMatrix g = small_gram(a);
        if (check && k == 0) check_precondition(g, "bjorck_orthonormalize");
        a = p == 1 ? first_order_step(a, 1.5, 0.5, g) : second_order_step(a, g);
        if (trajectory) trajectory->push_back(a);
    }
    if (check && iters == 0) check_precondition(small_gram(a), "bjorck_orthonormalize");
    return a;
}

/// Adds A (S + S^T) to g, the pullback of a Gram cotangent S through
/// M = A^T A (tall) or (S + S^T) A through N = A A^T (wide).
void add_gram_pullback(DenseMatrix& g, const DenseMatrix& a, const DenseMatrix& s, bool tall) {
    DenseMatrix sym = s;
    const DenseMatrix st = transpose(s);
    add_scaled(sym, 1.0, st);
    if (tall) {
        add_scaled(g, 1.0, matmul(a, sym));
    } else {
        add_scaled(g, 1.0, matmul(sym, a));
    }
}

/// Reverse of one p=1 iteration at base point a with post-gradient g_next.
DenseMatrix first_order_reverse(const DenseMatrix& a, const DenseMatrix& g_next) {
    const bool tall = a.rows >= a.cols;
    const DenseMatrix gm = small_gram(a);
    DenseMatrix g = g_next;
    scale_inplace(g, 1.5);
    DenseMatrix s;  // cotangent of the Gram matrix
    if (tall) {
        add_scaled(g, -0.5, matmul(g_next, gm));  // Gram is symmetric
        s = matmul_ta(a, g_next);
    } else {
        add_scaled(g, -0.5, matmul(gm, g_next));
        s = matmul_tb(g_next, a);
    }
    scale_inplace(s, -0.5);
    add_gram_pullback(g, a, s, tall);
    return g;
}

/// Reverse of one p=2 iteration.
DenseMatrix second_order_reverse(const DenseMatrix& a, const DenseMatrix& g_next) {
    const bool tall = a.rows >= a.cols;
    const DenseMatrix gm = small_gram(a);
    const std::size_t n = gm.rows;
    DenseMatrix q = identity(n);
    add_scaled(q, -1.0, gm);
    DenseMatrix r = identity(n);
    add_scaled(r, 0.5, q);
    add_scaled(r, 0.375, matmul(q, q));

    DenseMatrix g, g_r;
    if (tall) {
        g = matmul_tb(g_next, r);   // d(A R)/dA with R symmetric
        g_r = matmul_ta(a, g_next);
    } else {
        g = matmul_ta(r, g_next);
        g_r = matmul_tb(g_next, a);
    }
    // R = I + 1/2 Q + 3/8 Q Q, Q symmetric.
    DenseMatrix g_q = g_r;
    scale_inplace(g_q, 0.5);
    add_scaled(g_q, 0.375, matmul(q, g_r));
    add_scaled(g_q, 0.375, matmul(g_r, q));
    scale_inplace(g_q, -1.0);  // Q = I - Gram
    add_gram_pullback(g, a, g_q, tall);
    return g;
}

double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

/// sigma_max upper bound and its (almost-everywhere) derivative location for
/// the closed-form safe_scale modes.
double closed_form_bound(const DenseMatrix& a, SafeScaleMode mode, DenseMatrix* grad) {
    const double m = static_cast<double>(a.rows);
    const double n = static_cast<double>(a.cols);
    if (grad) *grad = DenseMatrix(a.rows, a.cols);
    switch (mode) {
        case SafeScaleMode::InfBound: {
            std::size_t best = 0;
            double best_sum = -1.0;
            for (std::size_t i = 0; i < a.rows; ++i) {
                double s = 0.0;
                for (std::size_t j = 0; j < a.cols; ++j) s += std::fabs(a(i, j));
                if (s > best_sum) {
                    best_sum = s;
                    best = i;
                }
            }
            if (grad) {
                for (std::size_t j = 0; j < a.cols; ++j) {
                    (*grad)(best, j) = std::sqrt(m) * sgn(a(best, j));
                }
            }
            return std::sqrt(m) * best_sum;
        }
        case SafeScaleMode::OneBound: {
            std::size_t best = 0;
            double best_sum = -1.0;
            for (std::size_t j = 0; j < a.cols; ++j) {
                double s = 0.0;
                for (std::size_t i = 0; i < a.rows; ++i) s += std::fabs(a(i, j));
                if (s > best_sum) {
                    best_sum = s;
                    best = j;
                }
            }
            if (grad) {
                for (std::size_t i = 0; i < a.rows; ++i) {
                    (*grad)(i, best) = std::sqrt(n) * sgn(a(i, best));
                }
            }
            return std::sqrt(n) * best_sum;
        }
        default: {  // MaxBound
            std::size_t bi = 0, bj = 0;
            double best = -1.0;
            for (std::size_t i = 0; i < a.rows; ++i) {
                for (std::size_t j = 0; j < a.cols; ++j) {
                    if (std::fabs(a(i, j)) > best) {
                        best = std::fabs(a(i, j));
                        bi = i;
                        bj = j;
                    }
                }
            }
            if (grad) (*grad)(bi, bj) = std::sqrt(m * n) * sgn(a(bi, bj));
            return std::sqrt(m * n) * best;
        }
    }
}

/// Pullback through A -> A / f(A): g/f - (<g, A> / f^2) df/dA.
DenseMatrix divide_by_factor_vjp(const DenseMatrix& a, double factor,
                                 const DenseMatrix& d_factor, const DenseMatrix& g_scaled) {
    DenseMatrix g = g_scaled;
    scale_inplace(g, 1.0 / factor);
    const double pull = frob_inner(g_scaled, a) / (factor * factor);
    add_scaled(g, -pull, d_factor);
    return g;
}

/// Rank-one df/dA = c * u v^T.
DenseMatrix rank_one(double c, const DenseVector& u, const DenseVector& v) {
    DenseMatrix out(u.size(), v.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        for (std::size_t j = 0; j < v.size(); ++j) out(i, j) = c * u[i] * v[j];
    }
    return out;
}

/**
 * Tightens a settled singular pair in place and returns the matching norm
 * estimate |A v|. The settled estimate stops on value convergence, which
 * leaves the vectors an order of sqrt(tolerance) away from the top pair.
 * The value error is quadratic in the vector error, so polishing makes the
 * returned norm exact to machine precision and the rank-one u v^T a faithful
 * derivative of the scale factor the forward pass actually uses. Convergence
 * runs at the squared spectral-gap rate, so when the increments stop
 * shrinking (a flat top of the spectrum, where the top pair is barely
 * determined and polishing cannot identify it) the loop exits early instead
 * of burning the full budget. Each iteration starts from v so that the
 * measured increment reflects a full power step; starting from u would
 * merely recompute the v the caller already holds and read as converged.
 */
double refine_singular_pair(const DenseMatrix& a, DenseVector& u, DenseVector& v) {
    constexpr double kVecTol = 1e-9;
    constexpr std::size_t kCap = 512;
    constexpr std::size_t kWindow = 8;
    double window_inc = std::numeric_limits<double>::infinity();
    double sigma = 0.0;
    DenseVector prev = v;
    for (std::size_t t = 0; t < kCap; ++t) {
        u = matvec(a, v);
        const double nu = norm2(u);
        if (nu == 0.0) return 0.0;
        scale_inplace(u, 1.0 / nu);
        v = matvec_t(a, u);
        sigma = norm2(v);
        if (sigma == 0.0) return 0.0;
        scale_inplace(v, 1.0 / sigma);
        double inc = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            inc = std::max(inc, std::fabs(v[i] - prev[i]));
        }
        if (inc <= kVecTol) return sigma;
        if (t % kWindow == kWindow - 1) {
            if (inc > 0.85 * window_inc) return sigma;
            window_inc = inc;
        }
        prev = v;
    }
    return sigma;
}

// Operator recursion for bjorck_matvec. S_k is the level-k self-map
// u -> A_k A_k^T u expressed through S_{k-1}; F_k is x -> A_k x.
DenseVector apply_s(const DenseMatrix& a, std::size_t k, const DenseVector& u);

DenseVector apply_f(const DenseMatrix& a, std::size_t k, const DenseVector& x) {
    if (k == 0) return matvec(a, x);
    DenseVector w = apply_f(a, k - 1, x);
    DenseVector sw = apply_s(a, k - 1, w);
    DenseVector out(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) out[i] = 1.5 * w[i] - 0.5 * sw[i];
    return out;
}

DenseVector apply_s(const DenseMatrix& a, std::size_t k, const DenseVector& u) {
    if (k == 0) return matvec(a, matvec_t(a, u));
    const DenseVector s1 = apply_s(a, k - 1, u);
    const DenseVector s2 = apply_s(a, k - 1, s1);
    const DenseVector s3 = apply_s(a, k - 1, s2);
    DenseVector out(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        out[i] = 2.25 * s1[i] - 1.5 * s2[i] + 0.25 * s3[i];
    }
    return out;
}

}  // namespace

void validate_constraint(const ConstraintKind& k) {
    if (k.scheme == Scheme::BjorckOrthonormal) require_order(k.order);
    if (k.scheme == Scheme::ParsevalRegularize && !(k.beta > 0.0 && k.beta <= 0.5)) {
        constraint_error("Parseval beta must lie in (0, 0.5], got " + std::to_string(k.beta));
    }
}

double bjorck_precondition_norm(const DenseMatrix& a) {
    require_nonempty(a, "bjorck_precondition_norm");
    DenseMatrix residual = small_gram(a);
    for (std::size_t i = 0; i < residual.rows; ++i) residual(i, i) -= 1.0;
    return spectral_norm_settled(residual, 1e-10, 2000).sigma;
}

DenseMatrix bjorck_orthonormalize(const DenseMatrix& a, std::size_t p, std::size_t iters) {
    require_nonempty(a, "bjorck_orthonormalize");
    require_order(p);
    return bjorck_iterate(a, p, iters, /*check=*/true, nullptr);
}

namespace {

DenseMatrix bjorck_reverse_from_trajectory(const std::vector<DenseMatrix>& trajectory,
                                           std::size_t p, const DenseMatrix& g_out) {
    DenseMatrix g = g_out;
    for (std::size_t k = trajectory.size() - 1; k-- > 0;) {
        const DenseMatrix& base = trajectory[k];
        g = p == 1 ? first_order_reverse(base, g) : second_order_reverse(base, g);
    }
    return g;
}

}  // namespace

DenseMatrix bjorck_orthonormalize_vjp(const DenseMatrix& a, std::size_t p, std::size_t iters,
                                      const DenseMatrix& g_out) {
    require_nonempty(a, "bjorck_orthonormalize_vjp");
    require_order(p);
    if (g_out.rows != a.rows || g_out.cols != a.cols) {
        constraint_error("bjorck_orthonormalize_vjp: cotangent shape mismatch");
    }
    std::vector<DenseMatrix> trajectory;
    trajectory.reserve(iters + 1);
    bjorck_iterate(a, p, iters, /*check=*/false, &trajectory);
    return bjorck_reverse_from_trajectory(trajectory, p, g_out);
}

std::pair<DenseMatrix, double> safe_scale(const DenseMatrix& a, SafeScaleMode mode,
                                          DenseVector* warm_v) {
    require_nonempty(a, "safe_scale");
    double bound = 0.0;
    if (mode == SafeScaleMode::Spectral) {
        // A coarse 1e-7 settle followed by a vector polish: tighter settles
        // stall on near-orthonormal input, where the estimate is accurate
        // immediately but its increments decay at the (tiny) spectral-gap
        // rate. The polish then pins the norm to machine precision, which
        // keeps the factor differentiable as sigma's exact rank-one form.
        const DenseVector start = warm_v ? *warm_v : DenseVector{};
        const PowerIterResult pi = spectral_norm_settled(a, 1e-7, 5000, start);
        DenseVector u = pi.u;
        DenseVector v = pi.v;
        const double sigma = refine_singular_pair(a, u, v);
        if (warm_v) *warm_v = v;
        bound = sigma * (1.0 + kSpectralSlack);
    } else {
        bound = closed_form_bound(a, mode, nullptr);
    }
    if (bound == 0.0) constraint_error("safe_scale: zero matrix has no scale");
    DenseMatrix scaled = a;
    scale_inplace(scaled, 1.0 / bound);
    return {std::move(scaled), bound};
}

DenseMatrix safe_scale_factor_grad(const DenseMatrix& a, SafeScaleMode mode) {
    require_nonempty(a, "safe_scale_factor_grad");
    if (mode == SafeScaleMode::Spectral) {
        const PowerIterResult pi = spectral_norm_settled(a, 1e-7, 5000);
        DenseVector u = pi.u;
        DenseVector v = pi.v;
        refine_singular_pair(a, u, v);
        return rank_one(1.0 + kSpectralSlack, u, v);
    }
    DenseMatrix grad;
    closed_form_bound(a, mode, &grad);
    return grad;
}

DenseMatrix safe_scale_vjp(const DenseMatrix& a, SafeScaleMode mode,
                           const DenseMatrix& g_scaled) {
    const auto [scaled, factor] = safe_scale(a, mode);
    (void)scaled;
    return divide_by_factor_vjp(a, factor, safe_scale_factor_grad(a, mode), g_scaled);
}

DenseVector bjorck_matvec(const DenseMatrix& a, const DenseVector& v, std::size_t iters) {
    require_nonempty(a, "bjorck_matvec");
    if (v.size() != a.cols) constraint_error("bjorck_matvec: vector length mismatch");
    if (iters > 5) {
        constraint_error("bjorck_matvec: " + std::to_string(iters) +
                         " iterations would cost O(3^k) products; limit is 5");
    }
    check_precondition(small_gram(a), "bjorck_matvec");
    return apply_f(a, iters, v);
}

std::pair<DenseMatrix, DenseVector> spectral_normalize(const DenseMatrix& w,
                                                       std::size_t power_iters,
                                                       const DenseVector& state_u) {
    require_nonempty(w, "spectral_normalize");
    if (state_u.size() != w.rows) {
        constraint_error("spectral_normalize: state length must equal the row count");
    }
    DenseVector u = state_u;
    for (std::size_t k = 0; k < power_iters; ++k) {
        DenseVector t = matvec_t(w, u);
        const double tn = norm2(t);
        if (tn == 0.0) break;  // u lies in the left null space; keep the state
        for (double& x : t) x /= tn;
        DenseVector s = matvec(w, t);
        const double sn = norm2(s);
        if (sn == 0.0) break;
        for (double& x : s) x /= sn;
        u = std::move(s);
    }
    const double sigma = norm2(matvec_t(w, u));  // equals u^T W v for v = W^T u normalized
    if (sigma < 1e-300) return {w, u};
    DenseMatrix out = w;
    scale_inplace(out, 1.0 / sigma);
    return {std::move(out), std::move(u)};
}

DenseMatrix parseval_step(const DenseMatrix& w, double beta) {
    require_nonempty(w, "parseval_step");
    if (!(beta > 0.0 && beta <= 0.5)) {
        constraint_error("parseval_step: beta must lie in (0, 0.5], got " + std::to_string(beta));
    }
    return first_order_step(w, 1.0 + beta, beta, small_gram(w));
}

DenseVector linf_project_row(const DenseVector& y) {
    if (norm1(y) <= 1.0) return y;
    std::vector<double> mags(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) mags[i] = std::fabs(y[i]);
    std::sort(mags.begin(), mags.end(), std::greater<double>());
    double cumulative = 0.0;
    double tau = 0.0;
    for (std::size_t k = 0; k < mags.size(); ++k) {
        cumulative += mags[k];
        const double candidate = (cumulative - 1.0) / static_cast<double>(k + 1);
        if (mags[k] > candidate) {
            tau = candidate;  // largest k keeping mags[k] above the running threshold
        }
    }
    DenseVector out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        out[i] = sgn(y[i]) * std::max(std::fabs(y[i]) - tau, 0.0);
    }
    return out;
}

DenseVector linf_project_row_vjp(const DenseVector& y, const DenseVector& g) {
    if (y.size() != g.size()) constraint_error("linf_project_row_vjp: size mismatch");
    if (norm1(y) <= 1.0) return g;
    const DenseVector projected = linf_project_row(y);
    // Surviving support: coordinates still nonzero after thresholding. On it
    // the map is y -> sign (|y| - tau) with tau an average over the support,
    // so the pullback is a sign-corrected mean subtraction.
    std::vector<std::size_t> support;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (projected[i] != 0.0) support.push_back(i);
    }
    DenseVector out(y.size(), 0.0);
    if (support.empty()) return out;
    double mean = 0.0;
    for (std::size_t i : support) mean += g[i] * sgn(y[i]);
    mean /= static_cast<double>(support.size());
    for (std::size_t i : support) out[i] = sgn(y[i]) * (g[i] * sgn(y[i]) - mean);
    return out;
}

EnforcementTape enforce_constraint_traced(const ConstraintKind& kind, const DenseMatrix& w_raw,
                                          Phase phase, DenseVector* spectral_state) {
    validate_constraint(kind);
    require_nonempty(w_raw, "enforce_constraint");
    for (double x : w_raw.data) {
        if (!std::isfinite(x)) constraint_error("enforce_constraint: non-finite weight");
    }
    EnforcementTape tape;
    switch (kind.scheme) {
        case Scheme::BjorckOrthonormal: {
            double factor = 0.0;
            if (kind.safe == SafeScaleMode::Spectral) {
                // Same settle-then-polish scheme as safe_scale. Storing the
                // polished vector as the warm start keeps later settles near
                // the fixed point, so the polish converges in a few steps
                // once training reaches a steady state.
                const DenseVector start = spectral_state ? *spectral_state : DenseVector{};
                const PowerIterResult pi = spectral_norm_settled(w_raw, 1e-7, 5000, start);
                DenseVector u = pi.u;
                DenseVector v = pi.v;
                const double sigma = refine_singular_pair(w_raw, u, v);
                if (spectral_state) *spectral_state = v;
                factor = sigma * (1.0 + kSpectralSlack);
                tape.u = std::move(u);
                tape.v = std::move(v);
            } else {
                factor = closed_form_bound(w_raw, kind.safe, nullptr);
            }
            if (factor == 0.0) constraint_error("enforce_constraint: zero weight matrix");
            tape.factor = factor;
            tape.scaled = w_raw;
            scale_inplace(tape.scaled, 1.0 / factor);
            const std::size_t iters = phase == Phase::Train ? kind.train_iters : kind.final_iters;
            tape.trajectory.reserve(iters + 1);
            tape.enforced =
                bjorck_iterate(tape.scaled, kind.order, iters, /*check=*/true, &tape.trajectory);
            break;
        }
        case Scheme::SpectralNormalize: {
            DenseVector u;
            if (spectral_state && spectral_state->size() == w_raw.rows) {
                u = *spectral_state;
            } else {
                // Deterministic unit start: a normalized ramp.
                u.resize(w_raw.rows);
                for (std::size_t i = 0; i < u.size(); ++i) {
                    u[i] = 1.0 + static_cast<double>(i) / static_cast<double>(u.size() + 1);
                }
                const double n = norm2(u);
                for (double& x : u) x /= n;
            }
            auto [normed, new_u] = spectral_normalize(w_raw, kind.power_iters, u);
            if (spectral_state) *spectral_state = new_u;
            tape.sigma = norm2(matvec_t(w_raw, new_u));
            tape.u = new_u;
            tape.v = matvec_t(w_raw, new_u);
            if (tape.sigma > 0.0) {
                for (double& x : tape.v) x /= tape.sigma;
            }
            tape.enforced = std::move(normed);
            break;
        }
        case Scheme::LInfProject: {
            tape.enforced = w_raw;
            for (std::size_t i = 0; i < w_raw.rows; ++i) {
                DenseVector row(w_raw.cols);
                for (std::size_t j = 0; j < w_raw.cols; ++j) row[j] = w_raw(i, j);
                const DenseVector projected = linf_project_row(row);
                for (std::size_t j = 0; j < w_raw.cols; ++j) tape.enforced(i, j) = projected[j];
            }
            break;
        }
        case Scheme::ParsevalRegularize:
        case Scheme::Unconstrained:
            tape.enforced = w_raw;  // Parseval reshapes weights after the step, not here
            break;
    }
    return tape;
}

DenseMatrix enforce_constraint(const ConstraintKind& kind, const DenseMatrix& w_raw, Phase phase) {
    return enforce_constraint_traced(kind, w_raw, phase).enforced;
}

DenseMatrix enforcement_vjp(const ConstraintKind& kind, const DenseMatrix& w_raw, Phase phase,
                            const EnforcementTape& tape, const DenseMatrix& g_enforced) {
    validate_constraint(kind);
    switch (kind.scheme) {
        case Scheme::BjorckOrthonormal: {
            const std::size_t iters = phase == Phase::Train ? kind.train_iters : kind.final_iters;
            const DenseMatrix g_scaled =
                tape.trajectory.size() == iters + 1
                    ? bjorck_reverse_from_trajectory(tape.trajectory, kind.order, g_enforced)
                    : bjorck_orthonormalize_vjp(tape.scaled, kind.order, iters, g_enforced);
            DenseMatrix d_factor;
            if (kind.safe == SafeScaleMode::Spectral) {
                // The forward pass polished the pair, so the factor is the
                // exact top singular value and u v^T is its derivative.
                d_factor = rank_one(1.0 + kSpectralSlack, tape.u, tape.v);
            } else {
                closed_form_bound(w_raw, kind.safe, &d_factor);
            }
            return divide_by_factor_vjp(w_raw, tape.factor, d_factor, g_scaled);
        }
        case Scheme::SpectralNormalize: {
            if (tape.sigma < 1e-300) return g_enforced;
            // u, v treated as constants, so d sigma = u v^T.
            return divide_by_factor_vjp(w_raw, tape.sigma, rank_one(1.0, tape.u, tape.v),
                                        g_enforced);
        }
        case Scheme::LInfProject: {
            DenseMatrix g(w_raw.rows, w_raw.cols);
            for (std::size_t i = 0; i < w_raw.rows; ++i) {
                DenseVector row(w_raw.cols), grow(w_raw.cols);
                for (std::size_t j = 0; j < w_raw.cols; ++j) {
                    row[j] = w_raw(i, j);
                    grow[j] = g_enforced(i, j);
                }
                const DenseVector back = linf_project_row_vjp(row, grow);
                for (std::size_t j = 0; j < w_raw.cols; ++j) g(i, j) = back[j];
            }
            return g;
        }
        case Scheme::ParsevalRegularize:
        case Scheme::Unconstrained:
            return g_enforced;
    }
    constraint_error("enforcement_vjp: unknown scheme");
}

}  // namespace lipnn

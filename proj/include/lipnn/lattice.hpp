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

#ifndef LIPNN_LATTICE_HPP_
#define LIPNN_LATTICE_HPP_

#include "lipnn/linalg.hpp"
#include "lipnn/network.hpp"

namespace lipnn {

enum class LatticeOp { Max, Min };

/**
 * Builds a single network computing the pointwise max or min of two scalar
 * inf-norm networks, without changing any Lipschitz bound:
 *
 *   - first layers stack vertically, later layers become block-diagonal,
 *     so every row keeps its original l1 norm;
 *   - the shallower net is padded to equal depth with identity layers
 *     inserted after a sorting activation (sorted input is a fixed point
 *     of the pairwise sort, so the pad is exact);
 *   - the two scalar heads feed one more pairwise sort, and a 2-entry
 *     selector row picks the max or the min.
 *
 * Both inputs must be scalar-output inf-family nets with unit scales,
 * pairwise-sort hidden activations, and identity output layers. Weights are
 * copied as currently enforced, so finalize enforcement before combining.
 * The result carries unconstrained layers (entries are literal copies).
 */
LipschitzNet lattice_combine(const LipschitzNet& f, const LipschitzNet& g, LatticeOp op);

/**
 * Single affine layer f with f(x1) = a and f(x2) = b whose weight row has
 * dual norm at most 1, i.e. f is 1-Lipschitz from the l_p input metric to
 * the reals. Requires |a - b| <= ||x1 - x2||_p (otherwise no such
 * 1-Lipschitz function exists) and p in {1, 2, inf}. The weight points
 * along the Hoelder-equality direction of x2 - x1, so the bound is tight.
 */
LipschitzNet fit_separating_line(const DenseVector& x1, const DenseVector& x2, double a, double b,
                                 double p);

}  // namespace lipnn

#endif  // LIPNN_LATTICE_HPP_

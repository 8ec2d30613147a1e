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

#ifndef LIPNN_TASKS_HPP_
#define LIPNN_TASKS_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "lipnn/linalg.hpp"

namespace lipnn {

/// Two empirical sample sets, one per distribution.
struct SamplePair {
    std::vector<DenseVector> p1;
    std::vector<DenseVector> p2;
};

/// P1 is a point mass at zero; P2 puts half its mass at -1 and half at +1.
/// The optimal transport cost between them is exactly 1, attained by the
/// absolute-value witness.
SamplePair sample_abs_pair(std::size_t n, std::uint64_t seed);

/// P1 is uniform over the three centers (-2,0), (0,0), (2,0); P2 picks a
/// center the same way and then a uniform point on the unit circle around
/// it. True distance 1.
SamplePair sample_three_cones(std::size_t n, std::uint64_t seed);

/// P1 is a point mass at the origin of R^dim; P2 is uniform on the unit
/// sphere (normalized Gaussian draws). True distance 1. Requires dim >= 2.
SamplePair sample_shell_cone(std::size_t dim, std::size_t n, std::uint64_t seed);

struct Dataset {
    std::vector<DenseVector> inputs;
    std::vector<int> labels;
};

/**
 * Reads a big-endian IDX image/label file pair (magic 0x00000803 and
 * 0x00000801). Pixels are scaled to [0,1] and flattened row-major. Bad
 * magic, truncated payloads, and image/label count mismatches raise
 * distinct errors.
 */
Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path);

/// Writes a dataset back out in the same IDX pair format (28x28 u8 images).
void write_mnist_idx(const Dataset& data, const std::string& images_path,
                     const std::string& labels_path);

/// Headerless CSV, one sample per row, real-valued columns.
std::vector<DenseVector> load_sample_csv(const std::string& path);

/// Two sample CSVs forming an empirical distribution pair; both files must
/// agree on the column count.
SamplePair load_empirical_pair(const std::string& csv1, const std::string& csv2);

/**
 * Deterministic 28x28 digit-glyph corpus: stroke templates for the ten
 * digits rasterized with per-sample rotation, scale, translation, contrast
 * and pixel noise, quantized to bytes exactly as the IDX format stores them.
 * Serves as a stand-in classification corpus when no IDX files are at hand.
 */
Dataset synthesize_digit_dataset(std::size_t n, std::uint64_t seed);

enum class TaskVariant : std::uint8_t {
    AbsValue,
    ThreeCones,
    ShellCone,
    EmpiricalPair,
    MnistClassify,
};

struct TaskSpec {
    TaskVariant variant = TaskVariant::AbsValue;
    std::size_t dim = 2;            // ShellCone dimensionality
    std::string path1, path2;       // EmpiricalPair CSVs
    std::size_t train_size = 5000;  // MnistClassify subset size (<= 60000)
    std::uint64_t seed = 0;
};

/// Input dimensionality the task presents to a critic or classifier.
std::size_t task_input_width(const TaskSpec& task);

/// Draws (or loads) the two sample sets behind a distribution-pair task.
/// Not defined for MnistClassify.
SamplePair materialize_pair(const TaskSpec& task, std::size_t n);

}  // namespace lipnn

#endif  // LIPNN_TASKS_HPP_

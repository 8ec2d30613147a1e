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

#include "lipnn/tasks.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "lipnn/rng.hpp"

namespace lipnn {
namespace {

[[noreturn]] void task_error(const std::string& what) {
    throw std::invalid_argument("tasks: " + what);
}

[[noreturn]] void io_error(const std::string& what) { throw std::runtime_error("tasks: " + what); }

}  // namespace

SamplePair sample_abs_pair(std::size_t n, std::uint64_t seed) {
    if (n == 0) task_error("sample_abs_pair needs n >= 1");
    Rng rng(Rng::mix(seed, 0xab5));
    SamplePair out;
    out.p1.assign(n, DenseVector{0.0});
    out.p2.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.p2.push_back({rng.bits() & 1 ? 1.0 : -1.0});
    }
    return out;
}

SamplePair sample_three_cones(std::size_t n, std::uint64_t seed) {
    if (n == 0) task_error("sample_three_cones needs n >= 1");
    static const std::array<std::array<double, 2>, 3> centers = {{{-2, 0}, {0, 0}, {2, 0}}};
    Rng rng(Rng::mix(seed, 0xc0e5));
    SamplePair out;
    out.p1.reserve(n);
    out.p2.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& c = centers[rng.index(3)];
        out.p1.push_back({c[0], c[1]});
    }
    for (std::size_t i = 0; i < n; ++i) {
        const auto& c = centers[rng.index(3)];
        const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
        out.p2.push_back({c[0] + std::cos(angle), c[1] + std::sin(angle)});
    }
    return out;
}

SamplePair sample_shell_cone(std::size_t dim, std::size_t n, std::uint64_t seed) {
    if (dim < 2) task_error("sample_shell_cone needs dim >= 2");
    if (n == 0) task_error("sample_shell_cone needs n >= 1");
    Rng rng(Rng::mix(seed, 0x5e77));
    SamplePair out;
    out.p1.assign(n, DenseVector(dim, 0.0));
    out.p2.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        DenseVector x(dim);
        double sq = 0.0;
        do {
            sq = 0.0;
            for (std::size_t j = 0; j < dim; ++j) {
                x[j] = rng.gaussian();
                sq += x[j] * x[j];
            }
        } while (sq == 0.0);  // astronomically unlikely, but keeps the normalization total
        const double inv = 1.0 / std::sqrt(sq);
        for (double& v : x) v *= inv;
        out.p2.push_back(std::move(x));
    }
    return out;
}

// ---------------------------------------------------------------------------
// IDX ingestion (big-endian, magic 0x803 for images and 0x801 for labels).
// ---------------------------------------------------------------------------

namespace {

std::uint32_t read_be32(std::ifstream& in, const std::string& path) {
    unsigned char buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    if (!in) io_error("truncated IDX header in " + path);
    return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
           (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

void write_be32(std::ofstream& out, std::uint32_t v) {
    const unsigned char buf[4] = {static_cast<unsigned char>(v >> 24),
                                  static_cast<unsigned char>(v >> 16),
                                  static_cast<unsigned char>(v >> 8),
                                  static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(buf), 4);
}

}  // namespace

Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) io_error("cannot open image file " + images_path);
    if (read_be32(img, images_path) != 0x00000803u) {
        io_error("bad magic in image file " + images_path);
    }
    const std::uint32_t count = read_be32(img, images_path);
    const std::uint32_t rows = read_be32(img, images_path);
    const std::uint32_t cols = read_be32(img, images_path);
    const std::size_t pixels = static_cast<std::size_t>(rows) * cols;

    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) io_error("cannot open label file " + labels_path);
    if (read_be32(lab, labels_path) != 0x00000801u) {
        io_error("bad magic in label file " + labels_path);
    }
    const std::uint32_t label_count = read_be32(lab, labels_path);
    if (label_count != count) {
        io_error("image/label count mismatch: " + std::to_string(count) + " images vs " +
                 std::to_string(label_count) + " labels");
    }

    Dataset data;
    data.inputs.reserve(count);
    data.labels.reserve(count);
    std::vector<unsigned char> raw(pixels);
    for (std::uint32_t i = 0; i < count; ++i) {
        img.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(pixels));
        if (!img) io_error("truncated image payload in " + images_path);
        DenseVector x(pixels);
        for (std::size_t j = 0; j < pixels; ++j) x[j] = raw[j] / 255.0;
        data.inputs.push_back(std::move(x));
        char l;
        lab.read(&l, 1);
        if (!lab) io_error("truncated label payload in " + labels_path);
        data.labels.push_back(static_cast<unsigned char>(l));
    }
    return data;
}

void write_mnist_idx(const Dataset& data, const std::string& images_path,
                     const std::string& labels_path) {
    if (data.inputs.size() != data.labels.size()) {
        task_error("write_mnist_idx: input/label count mismatch");
    }
    std::ofstream img(images_path, std::ios::binary);
    if (!img) io_error("cannot open " + images_path + " for writing");
    write_be32(img, 0x00000803u);
    write_be32(img, static_cast<std::uint32_t>(data.inputs.size()));
    write_be32(img, 28);
    write_be32(img, 28);
    for (const DenseVector& x : data.inputs) {
        if (x.size() != 784) task_error("write_mnist_idx expects 784-pixel images");
        for (double v : x) {
            const auto byte = static_cast<unsigned char>(std::lround(v * 255.0));
            img.write(reinterpret_cast<const char*>(&byte), 1);
        }
    }
    std::ofstream lab(labels_path, std::ios::binary);
    if (!lab) io_error("cannot open " + labels_path + " for writing");
    write_be32(lab, 0x00000801u);
    write_be32(lab, static_cast<std::uint32_t>(data.labels.size()));
    for (int l : data.labels) {
        const auto byte = static_cast<unsigned char>(l);
        lab.write(reinterpret_cast<const char*>(&byte), 1);
    }
}

std::vector<DenseVector> load_sample_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) io_error("cannot open sample CSV " + path);
    std::vector<DenseVector> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        DenseVector row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                io_error("non-numeric cell '" + cell + "' in " + path);
            }
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            io_error("ragged row in " + path);
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) io_error("empty sample CSV " + path);
    return rows;
}

SamplePair load_empirical_pair(const std::string& csv1, const std::string& csv2) {
    SamplePair pair;
    pair.p1 = load_sample_csv(csv1);
    pair.p2 = load_sample_csv(csv2);
    if (pair.p1.front().size() != pair.p2.front().size()) {
        io_error("column count differs between " + csv1 + " and " + csv2);
    }
    return pair;
}

// ---------------------------------------------------------------------------
// Procedural digit glyphs. Each digit is a set of polylines in the unit
// square; a sample applies a random similarity transform, rasterizes the
// strokes with a Gaussian pen profile, adds noise, and quantizes to bytes.
// ---------------------------------------------------------------------------

namespace {

using Point = std::array<double, 2>;
using Polyline = std::vector<Point>;

Polyline ellipse(double cx, double cy, double rx, double ry, int segments = 14) {
    Polyline poly;
    for (int k = 0; k <= segments; ++k) {
        const double a = 2.0 * std::numbers::pi * k / segments;
        poly.push_back({cx + rx * std::sin(a), cy - ry * std::cos(a)});
    }
    return poly;
}

const std::vector<Polyline>& digit_strokes(int digit) {
    static const std::array<std::vector<Polyline>, 10> strokes = {{
        /*0*/ {ellipse(0.50, 0.50, 0.26, 0.36)},
        /*1*/ {{{0.34, 0.26}, {0.52, 0.13}, {0.52, 0.87}}},
        /*2*/ {{{0.27, 0.30},
                {0.32, 0.18},
                {0.48, 0.12},
                {0.64, 0.17},
                {0.71, 0.30},
                {0.62, 0.47},
                {0.40, 0.65},
                {0.25, 0.85},
                {0.75, 0.85}}},
        /*3*/ {{{0.28, 0.17},
                {0.48, 0.12},
                {0.66, 0.19},
                {0.70, 0.32},
                {0.56, 0.45},
                {0.45, 0.48},
                {0.60, 0.52},
                {0.72, 0.62},
                {0.70, 0.76},
                {0.54, 0.87},
                {0.32, 0.83}}},
        /*4*/ {{{0.58, 0.12}, {0.22, 0.60}, {0.80, 0.60}}, {{0.62, 0.34}, {0.62, 0.88}}},
        /*5*/ {{{0.72, 0.14},
                {0.31, 0.14},
                {0.28, 0.45},
                {0.50, 0.41},
                {0.67, 0.48},
                {0.72, 0.63},
                {0.62, 0.81},
                {0.38, 0.86},
                {0.26, 0.78}}},
        /*6*/ {{{0.62, 0.13},
                {0.43, 0.21},
                {0.31, 0.40},
                {0.27, 0.60},
                {0.33, 0.78},
                {0.50, 0.87},
                {0.65, 0.80},
                {0.70, 0.65},
                {0.60, 0.52},
                {0.42, 0.50},
                {0.30, 0.58}}},
        /*7*/ {{{0.24, 0.15}, {0.76, 0.15}, {0.45, 0.87}}},
        /*8*/ {ellipse(0.50, 0.30, 0.19, 0.17), ellipse(0.50, 0.66, 0.23, 0.21)},
        /*9*/ {ellipse(0.52, 0.32, 0.19, 0.19), {{0.71, 0.34}, {0.67, 0.62}, {0.56, 0.87}}},
    }};
    return strokes[digit];
}

double segment_distance(const Point& p, const Point& a, const Point& b) {
    const double vx = b[0] - a[0], vy = b[1] - a[1];
    const double wx = p[0] - a[0], wy = p[1] - a[1];
    const double vv = vx * vx + vy * vy;
    double t = vv > 0.0 ? (wx * vx + wy * vy) / vv : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double dx = p[0] - (a[0] + t * vx);
    const double dy = p[1] - (a[1] + t * vy);
    return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

Dataset synthesize_digit_dataset(std::size_t n, std::uint64_t seed) {
    Dataset data;
    data.inputs.reserve(n);
    data.labels.reserve(n);
    for (std::size_t idx = 0; idx < n; ++idx) {
        Rng rng(Rng::mix(seed, 0xd161700 + idx));
        const int digit = static_cast<int>(rng.index(10));
        const double angle = rng.uniform(-0.14, 0.14);
        const double scale = rng.uniform(0.82, 1.06);
        const double shift_x = rng.uniform(-0.07, 0.07);
        const double shift_y = rng.uniform(-0.07, 0.07);
        const double contrast = rng.uniform(0.82, 1.0);
        const double pen = 0.040 * scale;
        const double ca = std::cos(angle), sa = std::sin(angle);

        // Transform the template strokes once per sample.
        std::vector<Polyline> strokes = digit_strokes(digit);
        for (Polyline& poly : strokes) {
            for (Point& p : poly) {
                const double x = p[0] - 0.5, y = p[1] - 0.5;
                p[0] = 0.5 + scale * (ca * x - sa * y) + shift_x;
                p[1] = 0.5 + scale * (sa * x + ca * y) + shift_y;
            }
        }

        DenseVector img(784, 0.0);
        for (int row = 0; row < 28; ++row) {
            for (int col = 0; col < 28; ++col) {
                const Point p = {(col + 0.5) / 28.0, (row + 0.5) / 28.0};
                double d = 1e9;
                for (const Polyline& poly : strokes) {
                    for (std::size_t s = 0; s + 1 < poly.size(); ++s) {
                        d = std::min(d, segment_distance(p, poly[s], poly[s + 1]));
                    }
                }
                double v = contrast * std::exp(-(d * d) / (2.0 * pen * pen));
                v += rng.uniform(0.0, 0.06);
                // Quantize exactly as the byte-per-pixel file format would.
                const auto byte =
                    static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
                img[row * 28 + col] = byte / 255.0;
            }
        }
        data.inputs.push_back(std::move(img));
        data.labels.push_back(digit);
    }
    return data;
}

std::size_t task_input_width(const TaskSpec& task) {
    switch (task.variant) {
        case TaskVariant::AbsValue:
            return 1;
        case TaskVariant::ThreeCones:
            return 2;
        case TaskVariant::ShellCone:
            return task.dim;
        case TaskVariant::EmpiricalPair:
            return load_sample_csv(task.path1).front().size();
        case TaskVariant::MnistClassify:
            return 784;
    }
    task_error("unknown task variant");
}

SamplePair materialize_pair(const TaskSpec& task, std::size_t n) {
    switch (task.variant) {
        case TaskVariant::AbsValue:
            return sample_abs_pair(n, task.seed);
        case TaskVariant::ThreeCones:
            return sample_three_cones(n, task.seed);
        case TaskVariant::ShellCone:
            return sample_shell_cone(task.dim, n, task.seed);
        case TaskVariant::EmpiricalPair:
            return load_empirical_pair(task.path1, task.path2);
        case TaskVariant::MnistClassify:
            task_error("MnistClassify is not a distribution-pair task");
    }
    task_error("unknown task variant");
}

}  // namespace lipnn

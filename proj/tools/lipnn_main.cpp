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

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lipnn/attacks.hpp"
#include "lipnn/lattice.hpp"
#include "lipnn/objectives.hpp"
#include "lipnn/rng.hpp"
#include "lipnn/tasks.hpp"
#include "lipnn/trainer.hpp"

namespace {

using nlohmann::json;
using namespace lipnn;

[[noreturn]] void flag_error(const std::string& what) {
    throw CLI::ValidationError("lipnn", what);
}

// --task grammar: abs | cones3 | shell:<dim> | pair:<csv1>,<csv2>
TaskSpec parse_task(const std::string& s, std::uint64_t seed) {
    TaskSpec t;
    t.seed = seed;
    if (s == "abs") {
        t.variant = TaskVariant::AbsValue;
    } else if (s == "cones3") {
        t.variant = TaskVariant::ThreeCones;
    } else if (s.rfind("shell:", 0) == 0) {
        t.variant = TaskVariant::ShellCone;
        t.dim = static_cast<std::size_t>(std::strtoull(s.c_str() + 6, nullptr, 10));
        if (t.dim < 2) flag_error("shell:<dim> needs dim >= 2, got '" + s + "'");
    } else if (s.rfind("pair:", 0) == 0) {
        const std::string rest = s.substr(5);
        const std::size_t comma = rest.find(',');
        if (comma == std::string::npos) flag_error("pair task needs two CSV paths: '" + s + "'");
        t.variant = TaskVariant::EmpiricalPair;
        t.path1 = rest.substr(0, comma);
        t.path2 = rest.substr(comma + 1);
    } else {
        flag_error("unknown task '" + s + "' (abs, cones3, shell:<dim>, pair:<csv1>,<csv2>)");
    }
    return t;
}

// --activation grammar: relu | maxmin | groupsort:<k> | fullsort | maxout:<k>
ActivationKind parse_activation(const std::string& s) {
    if (s == "relu") return ActivationKind::relu();
    if (s == "maxmin") return ActivationKind::maxmin();
    if (s == "fullsort") return ActivationKind::fullsort();
    if (s.rfind("groupsort:", 0) == 0) {
        const std::size_t g = std::strtoull(s.c_str() + 10, nullptr, 10);
        if (g < 2) flag_error("groupsort:<k> needs k >= 2, got '" + s + "'");
        return ActivationKind::group_sort(g);
    }
    if (s.rfind("maxout:", 0) == 0) {
        const std::size_t g = std::strtoull(s.c_str() + 7, nullptr, 10);
        if (g < 2) flag_error("maxout:<k> needs k >= 2, got '" + s + "'");
        return ActivationKind::maxout(g);
    }
    flag_error("unknown activation '" + s +
               "' (relu, maxmin, groupsort:<k>, fullsort, maxout:<k>)");
}

// --constraint grammar: bjorck | spectral | parseval:<beta> | linf | none.
// The infinity projection implies the infinity norm family; everything else
// runs under the euclidean family.
std::pair<ConstraintKind, NormFamily> parse_constraint(const std::string& s) {
    if (s == "bjorck") return {ConstraintKind::bjorck(), NormFamily::Two};
    if (s == "spectral") return {ConstraintKind::spectral(), NormFamily::Two};
    if (s == "linf") return {ConstraintKind::linf_project(), NormFamily::Inf};
    if (s == "none") return {ConstraintKind::unconstrained(), NormFamily::Two};
    if (s.rfind("parseval:", 0) == 0) {
        const double beta = std::strtod(s.c_str() + 9, nullptr);
        return {ConstraintKind::parseval(beta), NormFamily::Two};
    }
    if (s == "parseval") return {ConstraintKind::parseval(), NormFamily::Two};
    flag_error("unknown constraint '" + s + "' (bjorck, spectral, parseval:<beta>, linf, none)");
}

std::size_t argmax_index(const DenseVector& v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

/**
 * Labeled data resolution, in precedence order: explicit IDX paths, the
 * LIPNN_MNIST_DIR directory (standard train/t10k file names), and finally
 * the synthesized digit corpus. `stream` decorrelates the synthesized train
 * and test splits.
 */
Dataset load_labeled(std::string images, std::string labels, bool test_split, std::size_t n,
                     std::uint64_t seed, std::uint64_t stream) {
    if (images.empty() != labels.empty()) {
        flag_error("--images and --labels must be given together");
    }
    if (images.empty()) {
        if (const char* dir = std::getenv("LIPNN_MNIST_DIR")) {
            images = std::string(dir) + (test_split ? "/t10k-images-idx3-ubyte"
                                                    : "/train-images-idx3-ubyte");
            labels = std::string(dir) + (test_split ? "/t10k-labels-idx1-ubyte"
                                                    : "/train-labels-idx1-ubyte");
        }
    }
    Dataset d;
    if (!images.empty()) {
        d = load_mnist_idx(images, labels);
        if (n < d.inputs.size()) {
            d.inputs.resize(n);
            d.labels.resize(n);
        }
    } else {
        d = synthesize_digit_dataset(n, Rng::mix(seed, stream));
    }
    return d;
}

double dataset_error(const LipschitzNet& net, const Dataset& data) {
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < data.inputs.size(); ++i) {
        const auto [y, rec] = forward(net, data.inputs[i]);
        (void)rec;
        if (argmax_index(y) != static_cast<std::size_t>(data.labels[i])) ++wrong;
    }
    return static_cast<double>(wrong) / static_cast<double>(data.inputs.size());
}

void write_text(const std::string& path, const std::string& text) {
    if (path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << text;
}

// ---------------------------------------------------------------- commands

struct WassersteinArgs {
    std::string task, activation = "maxmin", constraint = "bjorck";
    std::size_t depth = 3, width = 128, steps = 1000, batch = 64, eval_interval = 100;
    double lr = 0.0, lipschitz = 1.0, lambda_specjac = 0.0;
    std::uint64_t seed = 0;
    std::string out, ckpt;
};

int run_train_wasserstein(const WassersteinArgs& a) {
    const TaskSpec task = parse_task(a.task, a.seed);
    const ActivationKind act = parse_activation(a.activation);
    const auto [kind, family] = parse_constraint(a.constraint);
    LipschitzNet net = make_dense_net(task_input_width(task), a.width, a.depth, 1, act, kind,
                                      family, a.lipschitz);
    initialize_weights(net, a.seed);

    TrainConfig cfg;
    cfg.lr = a.lr;
    cfg.batch_size = a.batch;
    cfg.steps = a.steps;
    cfg.eval_interval = a.eval_interval;
    cfg.seed = a.seed;
    cfg.objective = Objective::WassersteinDual;
    cfg.lambda_specjac = a.lambda_specjac;
    const std::vector<TrainLogRow> log = train(net, task, cfg);

    if (!a.out.empty()) write_metrics_csv(log, a.out);
    if (!a.ckpt.empty()) {
        bake_enforced_weights(net);
        save_net(net, a.ckpt);
    }
    std::cout << json{{"objective", log.back().objective}}.dump() << "\n";
    return 0;
}

struct ClassifyArgs {
    std::string images, labels, activation = "maxmin", constraint = "linf", objective = "hinge";
    std::size_t depth = 3, width = 128, steps = 2000, batch = 64, train_size = 5000,
                test_size = 1000;
    double lr = 0.0, lipschitz = 1000.0, kappa = 0.1;
    std::uint64_t seed = 0;
    std::string out, metrics;
};

int run_train_classify(const ClassifyArgs& a) {
    if (a.train_size == 0) flag_error("--train-size must be positive");
    TaskSpec task;
    task.variant = TaskVariant::MnistClassify;
    task.train_size = a.train_size;
    task.seed = a.seed;
    if (!a.images.empty() || !a.labels.empty()) {
        if (a.images.empty() || a.labels.empty()) {
            flag_error("--images and --labels must be given together");
        }
        task.path1 = a.images;
        task.path2 = a.labels;
    } else if (std::getenv("LIPNN_MNIST_DIR")) {
        const std::string dir = std::getenv("LIPNN_MNIST_DIR");
        task.path1 = dir + "/train-images-idx3-ubyte";
        task.path2 = dir + "/train-labels-idx1-ubyte";
    }

    const ActivationKind act = parse_activation(a.activation);
    const auto [kind, family] = parse_constraint(a.constraint);
    LipschitzNet net =
        make_dense_net(784, a.width, a.depth, 10, act, kind, family, a.lipschitz);
    initialize_weights(net, a.seed);

    TrainConfig cfg;
    cfg.lr = a.lr;
    cfg.batch_size = a.batch;
    cfg.steps = a.steps;
    cfg.eval_interval = std::max<std::size_t>(a.steps / 10, 1);
    cfg.seed = a.seed;
    if (a.objective == "hinge") {
        cfg.objective = Objective::Hinge;
    } else if (a.objective == "ce") {
        cfg.objective = Objective::CrossEntropy;
    } else {
        flag_error("unknown objective '" + a.objective + "' (hinge, ce)");
    }
    cfg.kappa = a.kappa * a.lipschitz;  // margin target scales with the constant
    const std::vector<TrainLogRow> log = train(net, task, cfg);
    if (!a.metrics.empty()) write_metrics_csv(log, a.metrics);
    if (!a.out.empty()) {
        bake_enforced_weights(net);
        save_net(net, a.out);
    }

    const Dataset test =
        load_labeled(a.images, a.labels, /*test_split=*/true, a.test_size, a.seed, 0x7e57);
    std::cout << json{{"train_accuracy", log.back().objective},
                      {"test_error", dataset_error(net, test)}}
                     .dump()
              << "\n";
    return 0;
}

struct CertifyArgs {
    std::string ckpt, images, labels, epsilons = "0,0.1,0.3,1.0", rule = "sound";
    std::size_t test_size = 1000;
    std::uint64_t seed = 0;
    std::string out;
};

int run_certify(const CertifyArgs& a) {
    LipschitzNet net = load_net(a.ckpt);
    const Dataset data =
        load_labeled(a.images, a.labels, /*test_split=*/true, a.test_size, a.seed, 0x7e57);

    DenseVector eps;
    for (std::size_t pos = 0; pos < a.epsilons.size();) {
        std::size_t next = a.epsilons.find(',', pos);
        if (next == std::string::npos) next = a.epsilons.size();
        eps.push_back(std::strtod(a.epsilons.substr(pos, next - pos).c_str(), nullptr));
        pos = next + 1;
    }
    if (eps.empty()) flag_error("--epsilons needs at least one value");

    CertRule rule;
    if (a.rule == "sound") {
        rule = CertRule::Sound2K;
    } else if (a.rule == "paper") {
        rule = CertRule::PaperKHalf;
    } else {
        flag_error("unknown rule '" + a.rule + "' (sound, paper)");
    }

    const std::map<double, double> curve = certified_accuracy_curve(net, data, eps, rule);
    std::string csv = "epsilon,certified_accuracy\n";
    json curve_json = json::object();
    char line[64];
    for (const auto& [e, acc] : curve) {
        std::snprintf(line, sizeof line, "%.17g,%.17g\n", e, acc);
        csv += line;
        std::snprintf(line, sizeof line, "%.17g", e);
        curve_json[line] = acc;
    }
    if (!a.out.empty()) write_text(a.out, csv);
    std::cout << json{{"clean_error", dataset_error(net, data)}, {"certified_accuracy", curve_json}}
                     .dump()
              << "\n";
    return 0;
}

struct AttackArgs {
    std::string ckpt, images, labels, method = "pgd";
    double epsilon = 0.1, step_size = 0.0;
    std::size_t steps = 200, restarts = 10, test_size = 1000;
    std::uint64_t seed = 0;
    std::string out;
};

int run_attack(const AttackArgs& a) {
    LipschitzNet net = load_net(a.ckpt);
    const Dataset data =
        load_labeled(a.images, a.labels, /*test_split=*/true, a.test_size, a.seed, 0x7e57);
    if (a.method != "fgs" && a.method != "pgd") {
        flag_error("unknown method '" + a.method + "' (fgs, pgd)");
    }

    AttackConfig cfg;
    cfg.epsilon = a.epsilon;
    cfg.steps = a.steps;
    cfg.step_size = a.step_size;
    cfg.restarts = a.restarts;
    cfg.seed = a.seed;

    std::string csv = "index,label,clean_pred,adv_pred,success\n";
    std::size_t clean_wrong = 0, adv_wrong = 0;
    char line[96];
    for (std::size_t i = 0; i < data.inputs.size(); ++i) {
        const std::size_t label = static_cast<std::size_t>(data.labels[i]);
        const auto [y_clean, rec] = forward(net, data.inputs[i]);
        (void)rec;
        const std::size_t clean_pred = argmax_index(y_clean);
        if (clean_pred != label) ++clean_wrong;

        DenseVector x_adv;
        if (a.method == "fgs") {
            AttackConfig one = cfg;
            one.seed = Rng::mix(cfg.seed, i);
            x_adv = fgs_attack(net, data.inputs[i], label, one);
        } else {
            AttackConfig one = cfg;
            one.seed = Rng::mix(cfg.seed, i);
            x_adv = pgd_attack(net, data.inputs[i], label, one).x_adv;
        }
        const auto [y_adv, rec2] = forward(net, x_adv);
        (void)rec2;
        const std::size_t adv_pred = argmax_index(y_adv);
        const bool success = adv_pred != label;
        if (success) ++adv_wrong;
        std::snprintf(line, sizeof line, "%zu,%zu,%zu,%zu,%d\n", i, label, clean_pred, adv_pred,
                      success ? 1 : 0);
        csv += line;
    }
    if (!a.out.empty()) write_text(a.out, csv);
    const double n = static_cast<double>(data.inputs.size());
    std::cout << json{{"clean_error", clean_wrong / n}, {"error_rate", adv_wrong / n}}.dump()
              << "\n";
    return 0;
}

struct DiagnoseArgs {
    std::string ckpt, images, labels, report = "orthonormality";
    std::size_t probes = 200, test_size = 200;
    std::uint64_t seed = 0;
    std::string out = "-";
};

int run_diagnose(const DiagnoseArgs& a) {
    LipschitzNet net = load_net(a.ckpt);

    if (a.report == "orthonormality") {
        std::string csv = "layer,index,sigma\n";
        double worst = 0.0;
        char line[64];
        for (std::size_t l = 0; l < net.layers.size(); ++l) {
            const std::vector<double> sv = singular_spectrum(layer_weight(net, l));
            for (std::size_t i = 0; i < sv.size(); ++i) {
                std::snprintf(line, sizeof line, "%zu,%zu,%.17g\n", l, i, sv[i]);
                csv += line;
                worst = std::max(worst, std::fabs(sv[i] - 1.0));
            }
        }
        write_text(a.out, csv);
        std::cout << json{{"max_sigma_deviation", worst}}.dump() << "\n";
        return 0;
    }

    const Dataset data =
        load_labeled(a.images, a.labels, /*test_split=*/true, a.test_size, a.seed, 0x7e57);
    std::vector<DenseVector> inputs = data.inputs;
    if (inputs.size() > a.probes) inputs.resize(a.probes);

    if (a.report == "jacobian-spectrum") {
        std::vector<double> radii;
        radii.reserve(inputs.size());
        double top = net.declared_k;
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            radii.push_back(input_jacobian_spectral_norm(net, inputs[i], 50, Rng::mix(a.seed, i)));
            top = std::max(top, radii.back());
        }
        const std::size_t bins = 50;
        const double hi = top * (1.0 + 1e-9);  // keep the max inside the last bin
        std::vector<std::size_t> count(bins, 0);
        double mean = 0.0;
        for (double r : radii) {
            ++count[std::min(bins - 1, static_cast<std::size_t>(r / hi * bins))];
            mean += r / static_cast<double>(radii.size());
        }
        std::string csv = "bin_left,bin_right,count\n";
        char line[96];
        for (std::size_t b = 0; b < bins; ++b) {
            std::snprintf(line, sizeof line, "%.17g,%.17g,%zu\n", hi * b / bins,
                          hi * (b + 1) / bins, count[b]);
            csv += line;
        }
        write_text(a.out, csv);
        std::cout << json{{"max", *std::max_element(radii.begin(), radii.end())}, {"mean", mean}}
                         .dump()
                  << "\n";
        return 0;
    }

    if (a.report == "activation-stats") {
        DenseVector thresholds;
        for (int i = 0; i <= 20; ++i) thresholds.push_back(i / 20.0);
        const std::map<double, double> stats = activation_statistics(net, inputs, thresholds);
        std::string csv = "threshold,fraction_at_least\n";
        char line[64];
        for (const auto& [t, frac] : stats) {
            std::snprintf(line, sizeof line, "%.17g,%.17g\n", t, frac);
            csv += line;
        }
        write_text(a.out, csv);
        std::cout << json{{"fraction_always_active", stats.rbegin()->second}}.dump() << "\n";
        return 0;
    }

    flag_error("unknown report '" + a.report +
               "' (jacobian-spectrum, activation-stats, orthonormality)");
}

struct LatticeArgs {
    std::string f, g, op = "max";
    std::size_t probes = 500;
    std::uint64_t seed = 0;
};

int run_lattice_demo(const LatticeArgs& a) {
    const LipschitzNet f = load_net(a.f);
    const LipschitzNet g = load_net(a.g);
    if (a.op != "max" && a.op != "min") flag_error("unknown op '" + a.op + "' (max, min)");
    const LatticeOp op = a.op == "max" ? LatticeOp::Max : LatticeOp::Min;
    const LipschitzNet combined = lattice_combine(f, g, op);

    Rng rng(Rng::mix(a.seed, 0x1a77));
    double worst = 0.0;
    for (std::size_t i = 0; i < a.probes; ++i) {
        DenseVector x(f.input_width());
        for (double& v : x) v = rng.uniform(-3.0, 3.0);
        const double yf = forward(f, x).first[0];
        const double yg = forward(g, x).first[0];
        const double want = op == LatticeOp::Max ? std::max(yf, yg) : std::min(yf, yg);
        worst = std::max(worst, std::fabs(forward(combined, x).first[0] - want));
    }

    // The construction only rearranges existing rows and adds averaging or
    // selector rows, so every layer keeps a unit mixed-norm bound row-wise.
    bool bounds = true;
    for (std::size_t l = 1; l < combined.layers.size(); ++l) {
        bounds = bounds && matrix_inf_norm(layer_weight(combined, l)) <= 1.0 + 1e-12;
    }
    std::cout << json{{"max_deviation", worst}, {"bounds_preserved", bounds}}.dump() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Lipschitz-constrained dense networks: training, certification, attacks"};
    app.require_subcommand(1);
    app.set_config("--config");

    WassersteinArgs wa;
    CLI::App* tw = app.add_subcommand("train-wasserstein",
                                      "Train a 1-Lipschitz critic on a distribution pair");
    tw->add_option("--task", wa.task, "abs | cones3 | shell:<dim> | pair:<csv1>,<csv2>")
        ->required();
    tw->add_option("--activation", wa.activation,
                   "relu | maxmin | groupsort:<k> | fullsort | maxout:<k>");
    tw->add_option("--constraint", wa.constraint, "bjorck | spectral | parseval:<beta> | none");
    tw->add_option("--depth", wa.depth, "hidden layer count");
    tw->add_option("--width", wa.width, "hidden layer width");
    tw->add_option("--steps", wa.steps, "Adam updates");
    tw->add_option("--batch", wa.batch, "mini-batch size per distribution");
    tw->add_option("--lr", wa.lr, "learning rate (0 = constraint default)");
    tw->add_option("--lipschitz", wa.lipschitz, "declared Lipschitz constant");
    tw->add_option("--lambda-specjac", wa.lambda_specjac, "Jacobian-norm penalty weight");
    tw->add_option("--eval-interval", wa.eval_interval, "steps between metric rows");
    tw->add_option("--seed", wa.seed, "RNG seed");
    tw->add_option("--out", wa.out, "metrics CSV path");
    tw->add_option("--ckpt", wa.ckpt, "checkpoint output path");

    ClassifyArgs ca;
    CLI::App* tc = app.add_subcommand("train-classify",
                                      "Train a margin classifier on labeled digits");
    tc->add_option("--images", ca.images, "IDX image file (default: LIPNN_MNIST_DIR or synth)");
    tc->add_option("--labels", ca.labels, "IDX label file");
    tc->add_option("--train-size", ca.train_size, "training subset size");
    tc->add_option("--test-size", ca.test_size, "held-out evaluation size");
    tc->add_option("--activation", ca.activation, "hidden activation");
    tc->add_option("--constraint", ca.constraint, "bjorck | linf | spectral | none");
    tc->add_option("--objective", ca.objective, "hinge | ce");
    tc->add_option("--lipschitz", ca.lipschitz, "declared Lipschitz constant K");
    tc->add_option("--kappa", ca.kappa, "hinge margin as a multiple of K");
    tc->add_option("--depth", ca.depth, "hidden layer count");
    tc->add_option("--width", ca.width, "hidden layer width");
    tc->add_option("--steps", ca.steps, "Adam updates");
    tc->add_option("--batch", ca.batch, "mini-batch size");
    tc->add_option("--lr", ca.lr, "learning rate (0 = constraint default)");
    tc->add_option("--seed", ca.seed, "RNG seed");
    tc->add_option("--out", ca.out, "checkpoint output path");
    tc->add_option("--metrics", ca.metrics, "metrics CSV path");

    CertifyArgs ce;
    CLI::App* cf = app.add_subcommand("certify", "Margin-certified accuracy per epsilon");
    cf->add_option("--ckpt", ce.ckpt, "classifier checkpoint")->required();
    cf->add_option("--images", ce.images, "IDX image file");
    cf->add_option("--labels", ce.labels, "IDX label file");
    cf->add_option("--test-size", ce.test_size, "evaluation size");
    cf->add_option("--epsilons", ce.epsilons, "comma-separated radii");
    cf->add_option("--rule", ce.rule, "sound | paper");
    cf->add_option("--seed", ce.seed, "RNG seed");
    cf->add_option("--out", ce.out, "report CSV path");

    AttackArgs at;
    CLI::App* ak = app.add_subcommand("attack", "Gradient attacks against a checkpoint");
    ak->add_option("--ckpt", at.ckpt, "classifier checkpoint")->required();
    ak->add_option("--images", at.images, "IDX image file");
    ak->add_option("--labels", at.labels, "IDX label file");
    ak->add_option("--test-size", at.test_size, "evaluation size");
    ak->add_option("--method", at.method, "fgs | pgd");
    ak->add_option("--epsilon", at.epsilon, "l-inf budget");
    ak->add_option("--steps", at.steps, "PGD iterations");
    ak->add_option("--step-size", at.step_size, "PGD step (0 = epsilon/10)");
    ak->add_option("--restarts", at.restarts, "PGD restarts");
    ak->add_option("--seed", at.seed, "RNG seed");
    ak->add_option("--out", at.out, "per-example CSV path");

    DiagnoseArgs di;
    CLI::App* dg = app.add_subcommand("diagnose", "Orthonormality and Jacobian reports");
    dg->add_option("--ckpt", di.ckpt, "checkpoint")->required();
    dg->add_option("--report", di.report,
                   "jacobian-spectrum | activation-stats | orthonormality");
    dg->add_option("--images", di.images, "IDX image file");
    dg->add_option("--labels", di.labels, "IDX label file");
    dg->add_option("--test-size", di.test_size, "pool size for probe inputs");
    dg->add_option("--probes", di.probes, "probe count");
    dg->add_option("--seed", di.seed, "RNG seed");
    dg->add_option("--out", di.out, "CSV path ('-' = stdout)");

    LatticeArgs la;
    CLI::App* ld = app.add_subcommand("lattice-demo", "Pointwise max/min of two critics");
    ld->add_option("--f", la.f, "first checkpoint")->required();
    ld->add_option("--g", la.g, "second checkpoint")->required();
    ld->add_option("--op", la.op, "max | min");
    ld->add_option("--probe", la.probes, "probe count");
    ld->add_option("--seed", la.seed, "RNG seed");

    try {
        app.parse(argc, argv);
        if (tw->parsed()) return run_train_wasserstein(wa);
        if (tc->parsed()) return run_train_classify(ca);
        if (cf->parsed()) return run_certify(ce);
        if (ak->parsed()) return run_attack(at);
        if (dg->parsed()) return run_diagnose(di);
        if (ld->parsed()) return run_lattice_demo(la);
        return 2;  // unreachable given require_subcommand
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);  // prints help, exits 0
    } catch (const CLI::ParseError& e) {
        std::cerr << "lipnn: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "lipnn: " << e.what() << "\n";
        return 3;
    }
}

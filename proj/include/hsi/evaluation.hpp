#pragma once

// Stratified training draws, confusion-matrix accuracy measures and Monte
// Carlo averaging over seeded repetitions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "hsi/datacube.hpp"
#include "hsi/error.hpp"
#include "hsi/parallel.hpp"
#include "hsi/random.hpp"

namespace hsi {

/// Per class l with N_l labeled pixels, n_l = max(min_per_class,
/// round(proportion * N_l)) training pixels, rounding half away from zero.
struct SamplingScheme {
    double proportion = 0.10;
    std::size_t min_per_class = 3;
    std::uint64_t seed = 0;
};

struct TrainTestSplit {
    std::vector<std::size_t> train;  ///< ascending pixel indices
    std::vector<std::size_t> test;   ///< ascending pixel indices
};

inline std::size_t training_count(std::size_t class_size, const SamplingScheme &scheme) {
    const auto proportional = static_cast<std::size_t>(std::round(scheme.proportion * static_cast<double>(class_size)));
    return std::min(class_size, std::max(scheme.min_per_class, proportional));
}

/// Draws each class's training pixels uniformly without replacement by a
/// partial Fisher-Yates shuffle of its ascending pixel list, classes in
/// ascending label order, all from one Xoshiro256 seeded with scheme.seed.
inline TrainTestSplit draw_training_set(const LabelMap &labels, const SamplingScheme &scheme) {
    if (!(scheme.proportion > 0.0 && scheme.proportion <= 1.0))
        throw Error(ErrorKind::invalid_argument, "evaluation", "training proportion must lie in (0, 1]");
    if (scheme.min_per_class < 1) throw Error(ErrorKind::invalid_argument, "evaluation", "min_per_class must be >= 1");
    std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(labels.num_classes()) + 1);
    for (std::size_t i = 0; i < labels.size(); ++i) members[static_cast<std::size_t>(labels[i])].push_back(i);
    if (labels.num_classes() < 1) throw Error(ErrorKind::degenerate, "evaluation", "label map has no classes");
    Xoshiro256 rng(scheme.seed);
    std::vector<bool> is_train(labels.size(), false);
    for (std::size_t cls = 1; cls < members.size(); ++cls) {
        auto &pool = members[cls];
        if (pool.empty()) throw Error(ErrorKind::degenerate, "evaluation", "class " + std::to_string(cls) + " has no labeled pixels");
        if (pool.size() < scheme.min_per_class)
            warn("evaluation", "class " + std::to_string(cls) + " has only " + std::to_string(pool.size()) +
                                   " labeled pixels; all of them are used for training");
        const std::size_t n = training_count(pool.size(), scheme);
        for (std::size_t t = 0; t < n; ++t) {
            const std::size_t j = t + static_cast<std::size_t>(rng.bounded(pool.size() - t));
            std::swap(pool[t], pool[j]);
            is_train[pool[t]] = true;
        }
    }
    TrainTestSplit split;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 0) continue;
        (is_train[i] ? split.train : split.test).push_back(i);
    }
    return split;
}

/// counts(i, j): truth classes[i] predicted as classes[j].
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::vector<int> classes)
        : classes_(std::move(classes)), counts_(classes_.size() * classes_.size(), 0) {}

    ConfusionMatrix(std::vector<int> classes, const std::vector<std::vector<std::uint64_t>> &rows) : ConfusionMatrix(std::move(classes)) {
        if (rows.size() != size()) throw Error(ErrorKind::invalid_argument, "evaluation", "confusion matrix row count mismatch");
        for (std::size_t i = 0; i < size(); ++i) {
            if (rows[i].size() != size()) throw Error(ErrorKind::invalid_argument, "evaluation", "confusion matrix must be square");
            for (std::size_t j = 0; j < size(); ++j) at(i, j) = rows[i][j];
        }
    }

    std::size_t size() const { return classes_.size(); }
    const std::vector<int> &classes() const { return classes_; }
    std::uint64_t &at(std::size_t i, std::size_t j) { return counts_[i * size() + j]; }
    std::uint64_t at(std::size_t i, std::size_t j) const { return counts_[i * size() + j]; }

    std::uint64_t total() const {
        std::uint64_t s = 0;
        for (auto v : counts_) s += v;
        return s;
    }
    std::uint64_t trace() const {
        std::uint64_t s = 0;
        for (std::size_t i = 0; i < size(); ++i) s += at(i, i);
        return s;
    }
    std::uint64_t row_sum(std::size_t i) const {
        std::uint64_t s = 0;
        for (std::size_t j = 0; j < size(); ++j) s += at(i, j);
        return s;
    }
    std::uint64_t col_sum(std::size_t j) const {
        std::uint64_t s = 0;
        for (std::size_t i = 0; i < size(); ++i) s += at(i, j);
        return s;
    }

private:
    std::vector<int> classes_;
    std::vector<std::uint64_t> counts_;
};

/// Tallies truth vs prediction over the test pixels only.
inline ConfusionMatrix confusion(const LabelMap &pred, const LabelMap &truth, std::span<const std::size_t> test_indices,
                                 std::vector<int> classes) {
    if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
        throw Error(ErrorKind::invalid_argument, "evaluation", "prediction and truth differ in size");
    std::map<int, std::size_t> position;
    for (std::size_t i = 0; i < classes.size(); ++i) position[classes[i]] = i;
    ConfusionMatrix cm(std::move(classes));
    auto lookup = [&](int label) {
        auto it = position.find(label);
        if (it == position.end()) throw Error(ErrorKind::invalid_argument, "evaluation", "label " + std::to_string(label) + " is not in the class list");
        return it->second;
    };
    for (std::size_t idx : test_indices) {
        if (idx >= truth.size()) throw Error(ErrorKind::invalid_argument, "evaluation", "test index out of range");
        ++cm.at(lookup(truth[idx]), lookup(pred[idx]));
    }
    return cm;
}

/// Percent of test pixels labeled correctly.
inline double overall_accuracy(const ConfusionMatrix &cm) {
    const auto total = cm.total();
    if (total == 0) throw Error(ErrorKind::degenerate, "evaluation", "confusion matrix is empty");
    return 100.0 * static_cast<double>(cm.trace()) / static_cast<double>(total);
}

/// Per-class producer accuracy in percent; NaN for classes without test pixels.
inline std::vector<double> class_accuracies(const ConfusionMatrix &cm) {
    std::vector<double> acc(cm.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < cm.size(); ++i) {
        const auto row = cm.row_sum(i);
        if (row > 0) acc[i] = 100.0 * static_cast<double>(cm.at(i, i)) / static_cast<double>(row);
    }
    return acc;
}

/// Mean of the per-class accuracies. Classes with no test pixels are left out
/// of the mean, with a warning.
inline double average_accuracy(const ConfusionMatrix &cm) {
    if (cm.total() == 0) throw Error(ErrorKind::degenerate, "evaluation", "confusion matrix is empty");
    double sum = 0.0;
    std::size_t n = 0;
    const auto acc = class_accuracies(cm);
    for (std::size_t i = 0; i < acc.size(); ++i) {
        if (std::isnan(acc[i])) {
            warn("evaluation", "class " + std::to_string(cm.classes()[i]) + " has no test pixels; excluded from AA");
            continue;
        }
        sum += acc[i];
        ++n;
    }
    return sum / static_cast<double>(n);
}

/// Cohen's kappa, (p_o - p_e) / (1 - p_e). Defined as 0 (with a warning)
/// when p_e == 1. Evaluated as (T*trace - S) / (T^2 - S) with
/// S = sum_i row_i * col_i in integers, so the only rounding is the division.
inline double kappa(const ConfusionMatrix &cm) {
    const auto total = cm.total();
    if (total == 0) throw Error(ErrorKind::degenerate, "evaluation", "confusion matrix is empty");
    unsigned __int128 chance = 0;
    for (std::size_t i = 0; i < cm.size(); ++i) chance += static_cast<unsigned __int128>(cm.row_sum(i)) * cm.col_sum(i);
    const auto t = static_cast<unsigned __int128>(total);
    if (chance >= t * t) {
        warn("evaluation", "chance agreement is 1; kappa set to 0");
        return 0.0;
    }
    const auto agreed = t * cm.trace();
    const double den = static_cast<double>(t * t - chance);
    return agreed >= chance ? static_cast<double>(agreed - chance) / den : -static_cast<double>(chance - agreed) / den;
}

/// Scores of one sample -> train -> classify run.
struct RunMetrics {
    std::uint64_t seed = 0;
    std::size_t train_count = 0;
    std::size_t test_count = 0;
    double oa = 0.0;
    double aa = 0.0;
    double kappa = 0.0;
    std::vector<int> classes;
    std::vector<double> per_class;  ///< percent, NaN when undefined
};

inline RunMetrics score(const ConfusionMatrix &cm) {
    RunMetrics m;
    m.test_count = cm.total();
    m.oa = overall_accuracy(cm);
    m.aa = average_accuracy(cm);
    m.kappa = kappa(cm);
    m.classes = cm.classes();
    m.per_class = class_accuracies(cm);
    return m;
}

/// Means and sample standard deviations (n - 1 divisor; 0 for a single run)
/// over the runs. Per-class statistics skip runs where the class was undefined.
struct MetricsReport {
    std::size_t run_count = 0;
    double oa = 0.0, aa = 0.0, kappa = 0.0;
    double oa_std = 0.0, aa_std = 0.0, kappa_std = 0.0;
    std::vector<int> classes;
    std::vector<double> per_class_accuracy;
    std::vector<double> per_class_std;
    std::vector<RunMetrics> runs;
};

namespace detail {
inline std::pair<double, double> mean_std(const std::vector<double> &v) {
    if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    double sum = 0.0;
    for (double x : v) sum += x;
    const double mean = sum / static_cast<double>(v.size());
    if (v.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}
}  // namespace detail

inline MetricsReport summarize(std::vector<RunMetrics> runs) {
    MetricsReport r;
    r.run_count = runs.size();
    if (runs.empty()) return r;
    auto collect = [&](auto field) {
        std::vector<double> v;
        for (const auto &run : runs) v.push_back(field(run));
        return detail::mean_std(v);
    };
    std::tie(r.oa, r.oa_std) = collect([](const RunMetrics &m) { return m.oa; });
    std::tie(r.aa, r.aa_std) = collect([](const RunMetrics &m) { return m.aa; });
    std::tie(r.kappa, r.kappa_std) = collect([](const RunMetrics &m) { return m.kappa; });
    r.classes = runs.front().classes;
    for (std::size_t c = 0; c < r.classes.size(); ++c) {
        std::vector<double> v;
        for (const auto &run : runs)
            if (c < run.per_class.size() && !std::isnan(run.per_class[c])) v.push_back(run.per_class[c]);
        auto [m, s] = detail::mean_std(v);
        r.per_class_accuracy.push_back(m);
        r.per_class_std.push_back(s);
    }
    r.runs = std::move(runs);
    return r;
}

/// Runs `pipeline(seed)` for seeds base_seed + i, i < runs, and averages.
/// Runs are independent and may execute in parallel; results are collected
/// in run order. A failing run aborts with its index in the message.
inline MetricsReport monte_carlo(const std::function<RunMetrics(std::uint64_t seed)> &pipeline, std::size_t runs,
                                 std::uint64_t base_seed, int threads = 1) {
    if (runs < 1) throw Error(ErrorKind::invalid_argument, "evaluation", "Monte Carlo needs at least one run");
    std::vector<RunMetrics> results(runs);
    parallel_for(runs, threads, [&](std::size_t i) {
        const std::uint64_t seed = base_seed + i;
        try {
            results[i] = pipeline(seed);
        } catch (const Error &e) {
            throw Error(e.kind(), "evaluation", "run " + std::to_string(i) + " (seed " + std::to_string(seed) + ") failed: " + e.what());
        }
        results[i].seed = seed;
    });
    return summarize(std::move(results));
}

/// Aligned text table: a summary block laid out like a results table row
/// (OA, AA, K), then per-class accuracies.
inline void write_metrics_table(std::ostream &out, const MetricsReport &r, const std::string &case_name, double proportion) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "Training set: %.4g%% per class, %zu Monte Carlo run(s)\n\n", 100.0 * proportion, r.run_count);
    out << buf;
    std::snprintf(buf, sizeof buf, "%-28s %8s %8s %8s\n", "Input features to SVM", "OA", "AA", "K");
    out << buf;
    std::snprintf(buf, sizeof buf, "%-28s %8.2f %8.2f %8.2f\n", case_name.c_str(), r.oa, r.aa, 100.0 * r.kappa);
    out << buf;
    std::snprintf(buf, sizeof buf, "%-28s %8.2f %8.2f %8.2f\n", "  (std)", r.oa_std, r.aa_std, 100.0 * r.kappa_std);
    out << buf << "\n";
    std::snprintf(buf, sizeof buf, "%8s %12s %10s\n", "class", "accuracy", "std");
    out << buf;
    for (std::size_t c = 0; c < r.classes.size(); ++c) {
        std::snprintf(buf, sizeof buf, "%8d %12.2f %10.2f\n", r.classes[c], r.per_class_accuracy[c], r.per_class_std[c]);
        out << buf;
    }
}

/// One row per run, then "mean" and "std" summary rows.
inline void write_metrics_csv(std::ostream &out, const MetricsReport &r) {
    out << "run,seed,train_pixels,test_pixels,oa,aa,kappa";
    for (int c : r.classes) out << ",class_" << c;
    out << '\n';
    char buf[64];
    auto num = [&](double v) {
        if (std::isnan(v)) return std::string("nan");
        std::snprintf(buf, sizeof buf, "%.6f", v);
        return std::string(buf);
    };
    for (std::size_t i = 0; i < r.runs.size(); ++i) {
        const auto &m = r.runs[i];
        out << i << ',' << m.seed << ',' << m.train_count << ',' << m.test_count << ',' << num(m.oa) << ',' << num(m.aa) << ','
            << num(m.kappa);
        for (double v : m.per_class) out << ',' << num(v);
        out << '\n';
    }
    out << "mean,,,," << num(r.oa) << ',' << num(r.aa) << ',' << num(r.kappa);
    for (double v : r.per_class_accuracy) out << ',' << num(v);
    out << '\n';
    out << "std,,,," << num(r.oa_std) << ',' << num(r.aa_std) << ',' << num(r.kappa_std);
    for (double v : r.per_class_std) out << ',' << num(v);
    out << '\n';
}

}  // namespace hsi

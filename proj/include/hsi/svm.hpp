#pragma once

// Soft-margin C-SVC with a polynomial kernel, one-vs-one multiclass.
//
// The binary solver is SMO on the dual
//     min 0.5 a^T Q a - e^T a,  0 <= a_i <= C,  y^T a = 0,  Q_ij = y_i y_j K(x_i, x_j)
// with second-order working-set selection (Fan, Chen, Lin 2005) and no
// shrinking. Decision value: f(x) = sum_i a_i y_i K(x_i, x) + bias.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <list>
#include <map>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "hsi/datacube.hpp"
#include "hsi/energy_profile.hpp"
#include "hsi/error.hpp"
#include "hsi/parallel.hpp"

namespace hsi {

struct KernelParams {
    int degree = 3;
    std::optional<double> gamma;  ///< unset: 1 / feature dimension
    double coef0 = 0.0;
    double penalty_c = 1.0;

    /// Copy with gamma filled in for the given dimension; validates.
    KernelParams resolved(std::size_t dim) const {
        KernelParams p = *this;
        if (!p.gamma) {
            if (dim == 0) throw Error(ErrorKind::invalid_argument, "svm", "cannot derive gamma for zero-dimensional features");
            p.gamma = 1.0 / static_cast<double>(dim);
        }
        if (p.degree < 1) throw Error(ErrorKind::invalid_argument, "svm", "kernel degree must be >= 1");
        if (!(*p.gamma > 0.0)) throw Error(ErrorKind::invalid_argument, "svm", "gamma must be positive");
        if (!(p.penalty_c > 0.0)) throw Error(ErrorKind::invalid_argument, "svm", "penalty C must be positive");
        return p;
    }
};

struct SolverOptions {
    double tolerance = 1e-3;
    double cache_mb = 256.0;       ///< kernel row cache budget per binary problem
    std::size_t max_iterations = 0;  ///< 0: max(10^7, 100 l)
};

inline double powi(double base, int times) {
    double tmp = base, ret = 1.0;
    for (int t = times; t > 0; t /= 2) {
        if (t % 2 == 1) ret *= tmp;
        tmp *= tmp;
    }
    return ret;
}

inline double plain_dot(const double *x, const double *y, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}

/// (gamma x^T y + coef0)^degree. Params must be resolved.
inline double polynomial_kernel(std::span<const double> x, std::span<const double> y, const KernelParams &params) {
    if (x.size() != y.size()) throw Error(ErrorKind::invalid_argument, "svm", "kernel arguments differ in dimension");
    if (!params.gamma) throw Error(ErrorKind::invalid_argument, "svm", "kernel gamma is unresolved");
    return powi(*params.gamma * plain_dot(x.data(), y.data(), x.size()) + params.coef0, params.degree);
}

struct BinaryModel {
    int positive_label = +1;  ///< receives the vote when the decision value is > 0
    int negative_label = -1;
    RowMatrix support_vectors;
    Eigen::VectorXd coefs;  ///< alpha_i * y_i
    double bias = 0.0;
    KernelParams params;

    double decision(std::span<const double> x) const {
        double s = bias;
        for (Eigen::Index i = 0; i < support_vectors.rows(); ++i)
            s += coefs[i] * polynomial_kernel(
                                std::span<const double>(support_vectors.row(i).data(), static_cast<std::size_t>(support_vectors.cols())),
                                x, params);
        return s;
    }
};

/// Full dual solution, kept for diagnostics and invariant checks.
struct DualSolution {
    Eigen::VectorXd alpha;
    Eigen::VectorXd gradient;  ///< gradient of the dual objective at alpha
    double rho = 0.0;          ///< bias = -rho
    double max_violation = 0.0;
    std::size_t iterations = 0;
};

namespace detail {

// Q rows, either precomputed in full or held in an LRU cache.
class QMatrix {
public:
    QMatrix(const RowMatrix &x, const std::vector<std::int8_t> &y, const KernelParams &params, double cache_mb)
        : x_(x), y_(y), params_(params), l_(static_cast<std::size_t>(x.rows())) {
        diag_.resize(l_);
        for (std::size_t i = 0; i < l_; ++i) diag_[i] = kernel(i, i);
        const double row_bytes = static_cast<double>(l_) * sizeof(double);
        capacity_ = std::max<std::size_t>(2, static_cast<std::size_t>(cache_mb * 1024.0 * 1024.0 / row_bytes));
        if (capacity_ >= l_) {
            full_.resize(l_ * l_);
            for (std::size_t i = 0; i < l_; ++i) fill_row(i, full_.data() + i * l_);
        }
    }

    const double *row(std::size_t i) {
        if (!full_.empty()) return full_.data() + i * l_;
        auto it = index_.find(i);
        if (it != index_.end()) {
            lru_.splice(lru_.begin(), lru_, it->second);
            return it->second->second.data();
        }
        if (lru_.size() >= capacity_) {
            index_.erase(lru_.back().first);
            lru_.pop_back();
        }
        lru_.emplace_front(i, std::vector<double>(l_));
        fill_row(i, lru_.front().second.data());
        index_[i] = lru_.begin();
        return lru_.front().second.data();
    }

    const std::vector<double> &diagonal() const { return diag_; }

private:
    double kernel(std::size_t i, std::size_t j) const {
        return powi(*params_.gamma * plain_dot(x_.row(static_cast<Eigen::Index>(i)).data(),
                                               x_.row(static_cast<Eigen::Index>(j)).data(), static_cast<std::size_t>(x_.cols())) +
                        params_.coef0,
                    params_.degree);
    }

    void fill_row(std::size_t i, double *out) const {
        for (std::size_t j = 0; j < l_; ++j) out[j] = static_cast<double>(y_[i] * y_[j]) * kernel(i, j);
    }

    const RowMatrix &x_;
    const std::vector<std::int8_t> &y_;
    KernelParams params_;
    std::size_t l_;
    std::vector<double> diag_;
    std::vector<double> full_;
    std::size_t capacity_ = 0;
    std::list<std::pair<std::size_t, std::vector<double>>> lru_;
    std::unordered_map<std::size_t, std::list<std::pair<std::size_t, std::vector<double>>>::iterator> index_;
};

}  // namespace detail

/// Solves the binary dual. `labels` holds +1 / -1 per row of `x`.
inline DualSolution solve_dual(const RowMatrix &x, std::span<const int> labels, const KernelParams &raw_params,
                               const SolverOptions &options = {}) {
    const std::size_t l = static_cast<std::size_t>(x.rows());
    if (labels.size() != l) throw Error(ErrorKind::invalid_argument, "svm", "label count does not match sample count");
    if (l < 2) throw Error(ErrorKind::degenerate, "svm", "binary training needs at least 2 samples");
    std::vector<std::int8_t> y(l);
    bool has_pos = false, has_neg = false;
    for (std::size_t i = 0; i < l; ++i) {
        if (labels[i] != 1 && labels[i] != -1) throw Error(ErrorKind::invalid_argument, "svm", "binary labels must be +1 or -1");
        y[i] = static_cast<std::int8_t>(labels[i]);
        (labels[i] > 0 ? has_pos : has_neg) = true;
    }
    if (!has_pos || !has_neg) throw Error(ErrorKind::degenerate, "svm", "binary training needs both classes present");
    const KernelParams params = raw_params.resolved(static_cast<std::size_t>(x.cols()));
    const double c = params.penalty_c;
    constexpr double tau = 1e-12;
    const double inf = std::numeric_limits<double>::infinity();

    detail::QMatrix q(x, y, params, options.cache_mb);
    const auto &qd = q.diagonal();
    std::vector<double> alpha(l, 0.0), g(l, -1.0);
    auto upper = [&](std::size_t t) { return alpha[t] >= c; };
    auto lower = [&](std::size_t t) { return alpha[t] <= 0.0; };

    const std::size_t max_iter =
        options.max_iterations ? options.max_iterations : std::max<std::size_t>(10'000'000, 100 * l);
    DualSolution sol;
    std::size_t iter = 0;
    for (;;) {
        // working set: i maximizes -y G over I_up, j minimizes the second-order
        // objective decrease over I_low
        double gmax = -inf, gmax2 = -inf;
        std::ptrdiff_t i_idx = -1, j_idx = -1;
        for (std::size_t t = 0; t < l; ++t) {
            if (y[t] == 1) {
                if (!upper(t) && -g[t] >= gmax) gmax = -g[t], i_idx = static_cast<std::ptrdiff_t>(t);
            } else {
                if (!lower(t) && g[t] >= gmax) gmax = g[t], i_idx = static_cast<std::ptrdiff_t>(t);
            }
        }
        const double *qi = i_idx >= 0 ? q.row(static_cast<std::size_t>(i_idx)) : nullptr;
        double obj_min = inf;
        for (std::size_t t = 0; t < l; ++t) {
            if (y[t] == 1) {
                if (lower(t)) continue;
                const double grad_diff = gmax + g[t];
                gmax2 = std::max(gmax2, g[t]);
                if (grad_diff > 0 && qi) {
                    const auto i = static_cast<std::size_t>(i_idx);
                    double quad = qd[i] + qd[t] - 2.0 * y[i] * qi[t];
                    const double obj = -(grad_diff * grad_diff) / (quad > 0 ? quad : tau);
                    if (obj <= obj_min) obj_min = obj, j_idx = static_cast<std::ptrdiff_t>(t);
                }
            } else {
                if (upper(t)) continue;
                const double grad_diff = gmax - g[t];
                gmax2 = std::max(gmax2, -g[t]);
                if (grad_diff > 0 && qi) {
                    const auto i = static_cast<std::size_t>(i_idx);
                    double quad = qd[i] + qd[t] + 2.0 * y[i] * qi[t];
                    const double obj = -(grad_diff * grad_diff) / (quad > 0 ? quad : tau);
                    if (obj <= obj_min) obj_min = obj, j_idx = static_cast<std::ptrdiff_t>(t);
                }
            }
        }
        sol.max_violation = gmax + gmax2;
        if (gmax + gmax2 < options.tolerance || j_idx < 0) break;
        if (iter >= max_iter) {
            warn("svm", "reached the SMO iteration limit before the stopping tolerance");
            break;
        }
        ++iter;

        const auto i = static_cast<std::size_t>(i_idx), j = static_cast<std::size_t>(j_idx);
        qi = q.row(i);
        const double *qj = q.row(j);
        const double old_ai = alpha[i], old_aj = alpha[j];
        if (y[i] != y[j]) {
            double quad = qd[i] + qd[j] + 2.0 * qi[j];
            if (quad <= 0) quad = tau;
            const double delta = (-g[i] - g[j]) / quad;
            const double diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0) {
                if (alpha[j] < 0) alpha[j] = 0, alpha[i] = diff;
            } else {
                if (alpha[i] < 0) alpha[i] = 0, alpha[j] = -diff;
            }
            if (diff > 0) {
                if (alpha[i] > c) alpha[i] = c, alpha[j] = c - diff;
            } else {
                if (alpha[j] > c) alpha[j] = c, alpha[i] = c + diff;
            }
        } else {
            double quad = qd[i] + qd[j] - 2.0 * qi[j];
            if (quad <= 0) quad = tau;
            const double delta = (g[i] - g[j]) / quad;
            const double sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > c) {
                if (alpha[i] > c) alpha[i] = c, alpha[j] = sum - c;
            } else {
                if (alpha[j] < 0) alpha[j] = 0, alpha[i] = sum;
            }
            if (sum > c) {
                if (alpha[j] > c) alpha[j] = c, alpha[i] = sum - c;
            } else {
                if (alpha[i] < 0) alpha[i] = 0, alpha[j] = sum;
            }
        }
        const double dai = alpha[i] - old_ai, daj = alpha[j] - old_aj;
        for (std::size_t t = 0; t < l; ++t) g[t] += qi[t] * dai + qj[t] * daj;
    }
    sol.iterations = iter;

    // rho from free vectors, else the midpoint of the feasible interval
    double ub = inf, lb = -inf, sum_free = 0.0;
    std::size_t n_free = 0;
    for (std::size_t t = 0; t < l; ++t) {
        const double yg = y[t] * g[t];
        if (upper(t)) {
            if (y[t] == -1) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else if (lower(t)) {
            if (y[t] == 1) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else {
            ++n_free;
            sum_free += yg;
        }
    }
    sol.rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;
    sol.alpha = Eigen::Map<Eigen::VectorXd>(alpha.data(), static_cast<Eigen::Index>(l));
    sol.gradient = Eigen::Map<Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(l));
    return sol;
}

/// Trains one binary machine on rows of `x` with +1 / -1 labels.
inline BinaryModel train_binary(const RowMatrix &x, std::span<const int> labels, const KernelParams &params,
                                const SolverOptions &options = {}, DualSolution *solution = nullptr) {
    DualSolution sol = solve_dual(x, labels, params, options);
    BinaryModel m;
    m.params = params.resolved(static_cast<std::size_t>(x.cols()));
    std::vector<Eigen::Index> sv;
    for (Eigen::Index i = 0; i < sol.alpha.size(); ++i)
        if (sol.alpha[i] > 0.0) sv.push_back(i);
    if (sv.empty()) throw Error(ErrorKind::numerical, "svm", "training produced no support vectors");
    m.support_vectors.resize(static_cast<Eigen::Index>(sv.size()), x.cols());
    m.coefs.resize(static_cast<Eigen::Index>(sv.size()));
    for (std::size_t k = 0; k < sv.size(); ++k) {
        m.support_vectors.row(static_cast<Eigen::Index>(k)) = x.row(sv[k]);
        m.coefs[static_cast<Eigen::Index>(k)] = sol.alpha[sv[k]] * labels[static_cast<std::size_t>(sv[k])];
    }
    m.bias = -sol.rho;
    if (solution) *solution = std::move(sol);
    return m;
}

/// One-vs-one ensemble. Machines are ordered (0,1), (0,2), ..., (1,2), ...
/// over the sorted class list; the machine for (a, b) votes a on a positive
/// decision value.
struct SvmModel {
    std::vector<int> classes;
    std::vector<BinaryModel> machines;
    KernelParams params;  ///< resolved
    ScalingParams scaling;

    std::size_t dim() const { return scaling.dim(); }

    /// Deduplicated support vectors shared by all machines, built by
    /// index_support_vectors(); prediction evaluates each kernel once.
    RowMatrix pool;
    std::vector<std::vector<std::size_t>> machine_pool_index;

    void index_support_vectors() {
        std::map<std::vector<double>, std::size_t> seen;
        std::vector<std::vector<double>> rows;
        machine_pool_index.assign(machines.size(), {});
        for (std::size_t m = 0; m < machines.size(); ++m) {
            const auto &sv = machines[m].support_vectors;
            for (Eigen::Index r = 0; r < sv.rows(); ++r) {
                std::vector<double> row(sv.row(r).data(), sv.row(r).data() + sv.cols());
                auto [it, inserted] = seen.emplace(row, rows.size());
                if (inserted) rows.push_back(std::move(row));
                machine_pool_index[m].push_back(it->second);
            }
        }
        pool.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim()));
        for (std::size_t r = 0; r < rows.size(); ++r)
            for (std::size_t j = 0; j < dim(); ++j) pool(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = rows[r][j];
    }
};

inline std::size_t pair_count(std::size_t k) { return k * (k - 1) / 2; }

/// Trains every pairwise machine on the scaled training pixels. Machines are
/// independent and may train in parallel; each is solved sequentially.
inline SvmModel train_multiclass(const ScaledFeatures &profile, const LabelMap &labels, std::span<const std::size_t> train_indices,
                                 const KernelParams &params, const SolverOptions &options = {}, int threads = 1) {
    const FeatureMatrix &fm = profile.features;
    if (labels.rows() != fm.rows || labels.cols() != fm.cols)
        throw Error(ErrorKind::invalid_argument, "svm", "label map and features cover different rasters");
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t idx : train_indices) {
        if (idx >= fm.pixels()) throw Error(ErrorKind::invalid_argument, "svm", "training index out of range");
        const int label = labels[idx];
        if (label == 0) throw Error(ErrorKind::invalid_argument, "svm", "training pixel " + std::to_string(idx) + " is unlabeled");
        by_class[label].push_back(idx);
    }
    if (by_class.size() < 2) throw Error(ErrorKind::degenerate, "svm", "multiclass training needs at least 2 classes");

    SvmModel model;
    model.params = params.resolved(fm.dim());
    model.scaling = profile.params;
    for (const auto &[label, _] : by_class) model.classes.push_back(label);
    const std::size_t k = model.classes.size();
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = a + 1; b < k; ++b) pairs.emplace_back(a, b);
    model.machines.resize(pairs.size());
    parallel_for(pairs.size(), threads, [&](std::size_t m) {
        const auto [a, b] = pairs[m];
        const auto &ia = by_class[model.classes[a]];
        const auto &ib = by_class[model.classes[b]];
        RowMatrix x(static_cast<Eigen::Index>(ia.size() + ib.size()), fm.values.cols());
        std::vector<int> y;
        y.reserve(ia.size() + ib.size());
        Eigen::Index r = 0;
        for (std::size_t idx : ia) x.row(r++) = fm.values.row(static_cast<Eigen::Index>(idx)), y.push_back(1);
        for (std::size_t idx : ib) x.row(r++) = fm.values.row(static_cast<Eigen::Index>(idx)), y.push_back(-1);
        BinaryModel bm = train_binary(x, y, model.params, options);
        bm.positive_label = model.classes[a];
        bm.negative_label = model.classes[b];
        model.machines[m] = std::move(bm);
    });
    model.index_support_vectors();
    return model;
}

/// Votes of every machine; ties go to the lowest class label.
inline int predict(const SvmModel &model, std::span<const double> x) {
    if (x.size() != model.dim())
        throw Error(ErrorKind::invalid_argument, "svm",
                    "feature dimension " + std::to_string(x.size()) + " does not match model dimension " + std::to_string(model.dim()));
    if (model.machine_pool_index.size() != model.machines.size())
        throw Error(ErrorKind::invalid_argument, "svm", "model support vectors are not indexed");
    std::vector<double> kvals(static_cast<std::size_t>(model.pool.rows()));
    for (Eigen::Index s = 0; s < model.pool.rows(); ++s)
        kvals[static_cast<std::size_t>(s)] =
            polynomial_kernel(std::span<const double>(model.pool.row(s).data(), x.size()), x, model.params);
    std::map<int, int> votes;
    for (int label : model.classes) votes[label] = 0;
    for (std::size_t m = 0; m < model.machines.size(); ++m) {
        const auto &bm = model.machines[m];
        double dec = bm.bias;
        for (std::size_t t = 0; t < model.machine_pool_index[m].size(); ++t)
            dec += bm.coefs[static_cast<Eigen::Index>(t)] * kvals[model.machine_pool_index[m][t]];
        ++votes[dec > 0 ? bm.positive_label : bm.negative_label];
    }
    int best = model.classes.front(), best_votes = -1;
    for (const auto &[label, v] : votes)
        if (v > best_votes) best = label, best_votes = v;
    return best;
}

/// Predicts every pixel whose mask label is nonzero; background stays 0.
inline LabelMap classify_map(const SvmModel &model, const FeatureMatrix &scaled, const LabelMap &mask, int threads = 1) {
    if (mask.rows() != scaled.rows || mask.cols() != scaled.cols)
        throw Error(ErrorKind::invalid_argument, "svm", "mask and features cover different rasters");
    std::vector<int> out(mask.size(), 0);
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i] != 0) todo.push_back(i);
    constexpr std::size_t block = 256;
    parallel_for((todo.size() + block - 1) / block, threads, [&](std::size_t b) {
        for (std::size_t t = b * block; t < std::min(todo.size(), (b + 1) * block); ++t) {
            const std::size_t i = todo[t];
            out[i] = predict(model, std::span<const double>(scaled.values.row(static_cast<Eigen::Index>(i)).data(), scaled.dim()));
        }
    });
    const int max_class = std::max(mask.num_classes(), model.classes.empty() ? 0 : model.classes.back());
    return LabelMap(mask.rows(), mask.cols(), std::move(out), max_class);
}

// Model file, all little-endian:
//   "HSISVM\0\0" magic, uint64 version (1)
//   int64 degree, f64 gamma, f64 coef0, f64 C
//   uint64 dim; dim x (f64 min, f64 max) scaling
//   uint64 class count; int64 per class
//   uint64 pool size; pool size x dim f64
//   uint64 machine count; per machine: int64 pos label, int64 neg label,
//     f64 bias, uint64 sv count, sv count x (uint64 pool index, f64 coef)
inline constexpr char kModelMagic[8] = {'H', 'S', 'I', 'S', 'V', 'M', '\0', '\0'};
inline constexpr std::uint64_t kModelVersion = 1;

inline void save_model(const SvmModel &model, const std::filesystem::path &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "svm", "cannot write '" + path.string() + "'");
    using detail::put_f64;
    using detail::put_u64;
    auto put_i64 = [&](std::int64_t v) { put_u64(out, static_cast<std::uint64_t>(v)); };
    out.write(kModelMagic, 8);
    put_u64(out, kModelVersion);
    put_i64(model.params.degree);
    put_f64(out, model.params.gamma.value_or(0.0));
    put_f64(out, model.params.coef0);
    put_f64(out, model.params.penalty_c);
    put_u64(out, model.dim());
    for (std::size_t j = 0; j < model.dim(); ++j) {
        put_f64(out, model.scaling.min[static_cast<Eigen::Index>(j)]);
        put_f64(out, model.scaling.max[static_cast<Eigen::Index>(j)]);
    }
    put_u64(out, model.classes.size());
    for (int c : model.classes) put_i64(c);
    put_u64(out, static_cast<std::uint64_t>(model.pool.rows()));
    for (Eigen::Index r = 0; r < model.pool.rows(); ++r)
        for (Eigen::Index j = 0; j < model.pool.cols(); ++j) put_f64(out, model.pool(r, j));
    put_u64(out, model.machines.size());
    for (std::size_t m = 0; m < model.machines.size(); ++m) {
        const auto &bm = model.machines[m];
        put_i64(bm.positive_label);
        put_i64(bm.negative_label);
        put_f64(out, bm.bias);
        put_u64(out, static_cast<std::uint64_t>(bm.coefs.size()));
        for (Eigen::Index t = 0; t < bm.coefs.size(); ++t) {
            put_u64(out, model.machine_pool_index[m][static_cast<std::size_t>(t)]);
            put_f64(out, bm.coefs[t]);
        }
    }
    if (!out) throw Error(ErrorKind::io, "svm", "failed writing '" + path.string() + "'");
}

inline SvmModel load_model(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "svm", "cannot open '" + path.string() + "'");
    char magic[8];
    if (!in.read(magic, 8) || !std::equal(magic, magic + 8, kModelMagic))
        throw Error(ErrorKind::io, "svm", "'" + path.string() + "' is not a model file");
    using detail::get_f64;
    using detail::get_u64;
    const auto version = get_u64(in);
    if (version != kModelVersion) throw Error(ErrorKind::io, "svm", "unsupported model version " + std::to_string(version));
    auto get_i64 = [&] { return static_cast<std::int64_t>(get_u64(in)); };
    auto checked_count = [&](std::uint64_t v, std::uint64_t limit, const char *what) {
        if (v > limit) throw Error(ErrorKind::io, "svm", std::string("implausible ") + what + " in model file");
        return static_cast<std::size_t>(v);
    };
    SvmModel model;
    model.params.degree = static_cast<int>(get_i64());
    model.params.gamma = get_f64(in);
    model.params.coef0 = get_f64(in);
    model.params.penalty_c = get_f64(in);
    const std::size_t dim = checked_count(get_u64(in), 1u << 24, "dimension");
    model.scaling.min.resize(static_cast<Eigen::Index>(dim));
    model.scaling.max.resize(static_cast<Eigen::Index>(dim));
    for (std::size_t j = 0; j < dim; ++j) {
        model.scaling.min[static_cast<Eigen::Index>(j)] = get_f64(in);
        model.scaling.max[static_cast<Eigen::Index>(j)] = get_f64(in);
    }
    const std::size_t nclass = checked_count(get_u64(in), 1u << 16, "class count");
    for (std::size_t c = 0; c < nclass; ++c) model.classes.push_back(static_cast<int>(get_i64()));
    const std::size_t npool = checked_count(get_u64(in), 1u << 28, "support vector count");
    model.pool.resize(static_cast<Eigen::Index>(npool), static_cast<Eigen::Index>(dim));
    for (Eigen::Index r = 0; r < model.pool.rows(); ++r)
        for (Eigen::Index j = 0; j < model.pool.cols(); ++j) model.pool(r, j) = get_f64(in);
    const std::size_t nmach = checked_count(get_u64(in), 1u << 28, "machine count");
    if (nmach != pair_count(nclass)) throw Error(ErrorKind::io, "svm", "machine count does not match class count");
    const KernelParams params = model.params.resolved(dim);
    model.params = params;
    model.machines.resize(nmach);
    model.machine_pool_index.resize(nmach);
    for (std::size_t m = 0; m < nmach; ++m) {
        auto &bm = model.machines[m];
        bm.params = params;
        bm.positive_label = static_cast<int>(get_i64());
        bm.negative_label = static_cast<int>(get_i64());
        bm.bias = get_f64(in);
        const std::size_t nsv = checked_count(get_u64(in), npool, "machine support vector count");
        bm.coefs.resize(static_cast<Eigen::Index>(nsv));
        bm.support_vectors.resize(static_cast<Eigen::Index>(nsv), static_cast<Eigen::Index>(dim));
        for (std::size_t t = 0; t < nsv; ++t) {
            const std::size_t idx = checked_count(get_u64(in), npool - 1, "pool index");
            bm.coefs[static_cast<Eigen::Index>(t)] = get_f64(in);
            bm.support_vectors.row(static_cast<Eigen::Index>(t)) = model.pool.row(static_cast<Eigen::Index>(idx));
            model.machine_pool_index[m].push_back(idx);
        }
    }
    return model;
}

}  // namespace hsi

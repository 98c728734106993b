#pragma once

// Filter responses over principal-component planes, stacked per pixel.

#include <Eigen/Dense>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <vector>

#include "hsi/datacube.hpp"
#include "hsi/filter_design.hpp"
#include "hsi/parallel.hpp"
#include "hsi/spectral_reduction.hpp"

namespace hsi {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Per-pixel feature vectors: row p (row-major pixel order) holds pixel p.
struct FeatureMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    RowMatrix values;

    std::size_t pixels() const { return rows * cols; }
    std::size_t dim() const { return static_cast<std::size_t>(values.cols()); }
};

/// Feature (p, q) = filter q applied to component p, stored at column
/// p * filters + q.
struct EnergyProfile {
    FeatureMatrix features;
    std::size_t components = 0;
    std::size_t filters = 0;
};

/// Correlation (no kernel flip) of `image` with a c x c filter given in
/// row-major window order, mirror padded so the output keeps the input size.
inline Image apply_filter(const Image &image, std::span<const double> filter, std::size_t c) {
    if (filter.size() != c * c)
        throw Error(ErrorKind::invalid_argument, "energy_profile",
                    "filter length " + std::to_string(filter.size()) + " does not match window " + std::to_string(c) + "x" +
                        std::to_string(c));
    check_window(image, c, "energy_profile");
    const std::size_t h = c / 2;
    const std::size_t pr = image.rows() + 2 * h, pc = image.cols() + 2 * h;
    std::vector<double> padded(pr * pc);
    for (std::size_t r = 0; r < pr; ++r) {
        const std::size_t sr = mirror_index(static_cast<std::ptrdiff_t>(r) - static_cast<std::ptrdiff_t>(h), image.rows());
        for (std::size_t col = 0; col < pc; ++col)
            padded[r * pc + col] =
                image(sr, mirror_index(static_cast<std::ptrdiff_t>(col) - static_cast<std::ptrdiff_t>(h), image.cols()));
    }
    std::vector<double> out(image.size(), 0.0);
    for (std::size_t r = 0; r < image.rows(); ++r) {
        double *dst = out.data() + r * image.cols();
        for (std::size_t a = 0; a < c; ++a) {
            const double *src_row = padded.data() + (r + a) * pc;
            for (std::size_t b = 0; b < c; ++b) {
                const double w = filter[a * c + b];
                if (w == 0.0) continue;
                const double *src = src_row + b;
                for (std::size_t col = 0; col < image.cols(); ++col) dst[col] += w * src[col];
            }
        }
    }
    return Image(image.rows(), image.cols(), std::move(out));
}

inline Image apply_filter(const Image &image, const Eigen::VectorXd &filter, std::size_t c) {
    return apply_filter(image, std::span<const double>(filter.data(), static_cast<std::size_t>(filter.size())), c);
}

/// One filter set per component (all with the same filter count and window).
inline EnergyProfile build_profile(const PcStack &pcs, std::span<const FilterSet> filter_sets, int threads = 1) {
    if (pcs.k() == 0) throw Error(ErrorKind::invalid_argument, "energy_profile", "empty component stack");
    if (filter_sets.size() != pcs.k())
        throw Error(ErrorKind::invalid_argument, "energy_profile", "need one filter set per component");
    const std::size_t n = filter_sets.front().size();
    if (n == 0) throw Error(ErrorKind::invalid_argument, "energy_profile", "empty filter set");
    for (const auto &fs : filter_sets)
        if (fs.size() != n || fs.c != filter_sets.front().c)
            throw Error(ErrorKind::invalid_argument, "energy_profile", "filter sets differ in size or window");
    for (const auto &plane : pcs.planes)
        if (plane.rows() != pcs.rows || plane.cols() != pcs.cols)
            throw Error(ErrorKind::invalid_argument, "energy_profile", "component planes differ in size");
    EnergyProfile profile{{pcs.rows, pcs.cols, RowMatrix(static_cast<Eigen::Index>(pcs.rows * pcs.cols),
                                                         static_cast<Eigen::Index>(pcs.k() * n))},
                          pcs.k(), n};
    parallel_for(pcs.k() * n, threads, [&](std::size_t task) {
        const std::size_t p = task / n, q = task % n;
        const auto &fs = filter_sets[p];
        const Image response = apply_filter(pcs.planes[p], fs.filter(q), fs.c);
        auto values = response.values();
        for (std::size_t i = 0; i < values.size(); ++i)
            profile.features.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(task)) = values[i];
    });
    return profile;
}

/// The same filter set applied to every component.
inline EnergyProfile build_profile(const PcStack &pcs, const FilterSet &filters, int threads = 1) {
    std::vector<FilterSet> sets(pcs.k(), filters);
    return build_profile(pcs, std::span<const FilterSet>(sets), threads);
}

/// Raw component values as features (one column per component).
inline FeatureMatrix component_features(const PcStack &pcs) {
    FeatureMatrix fm{pcs.rows, pcs.cols, RowMatrix(static_cast<Eigen::Index>(pcs.rows * pcs.cols), static_cast<Eigen::Index>(pcs.k()))};
    for (std::size_t p = 0; p < pcs.k(); ++p) {
        auto v = pcs.planes[p].values();
        for (std::size_t i = 0; i < v.size(); ++i) fm.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p)) = v[i];
    }
    return fm;
}

/// Column-wise concatenation of two feature matrices over the same pixels.
inline FeatureMatrix concatenate(const FeatureMatrix &a, const FeatureMatrix &b) {
    if (a.rows != b.rows || a.cols != b.cols)
        throw Error(ErrorKind::invalid_argument, "energy_profile", "feature matrices cover different rasters");
    FeatureMatrix out{a.rows, a.cols, RowMatrix(a.values.rows(), a.values.cols() + b.values.cols())};
    out.values << a.values, b.values;
    return out;
}

/// Per-feature affine map fitted on training pixels: [min, max] -> [-1, 1].
struct ScalingParams {
    Eigen::VectorXd min;
    Eigen::VectorXd max;

    std::size_t dim() const { return static_cast<std::size_t>(min.size()); }
};

struct ScaledFeatures {
    FeatureMatrix features;
    ScalingParams params;
};

inline ScalingParams fit_scaling(const FeatureMatrix &fm, std::span<const std::size_t> train_indices) {
    if (train_indices.empty()) throw Error(ErrorKind::invalid_argument, "energy_profile", "scaling needs at least one training pixel");
    const auto d = fm.values.cols();
    ScalingParams sp{Eigen::VectorXd::Constant(d, std::numeric_limits<double>::infinity()),
                     Eigen::VectorXd::Constant(d, -std::numeric_limits<double>::infinity())};
    for (std::size_t idx : train_indices) {
        if (idx >= fm.pixels()) throw Error(ErrorKind::invalid_argument, "energy_profile", "training index out of range");
        const auto row = fm.values.row(static_cast<Eigen::Index>(idx));
        sp.min = sp.min.cwiseMin(row.transpose());
        sp.max = sp.max.cwiseMax(row.transpose());
    }
    return sp;
}

/// Scales one feature value; constant training features map to 0.
inline double scale_value(const ScalingParams &sp, Eigen::Index j, double v) {
    const double lo = sp.min[j], hi = sp.max[j];
    if (!(hi > lo)) return 0.0;
    return -1.0 + 2.0 * (v - lo) / (hi - lo);
}

inline FeatureMatrix apply_scaling(const ScalingParams &sp, const FeatureMatrix &fm) {
    if (sp.dim() != fm.dim()) throw Error(ErrorKind::invalid_argument, "energy_profile", "scaling dimension mismatch");
    FeatureMatrix out{fm.rows, fm.cols, RowMatrix(fm.values.rows(), fm.values.cols())};
    for (Eigen::Index i = 0; i < fm.values.rows(); ++i)
        for (Eigen::Index j = 0; j < fm.values.cols(); ++j) out.values(i, j) = scale_value(sp, j, fm.values(i, j));
    return out;
}

inline ScaledFeatures fit_feature_scaling(const FeatureMatrix &fm, std::span<const std::size_t> train_indices) {
    ScalingParams sp = fit_scaling(fm, train_indices);
    FeatureMatrix scaled = apply_scaling(sp, fm);
    return ScaledFeatures{std::move(scaled), std::move(sp)};
}

namespace detail {
inline void put_u64(std::ostream &out, std::uint64_t v) {
    unsigned char b[8];
    store_scalar(b, v, ByteOrder::little);
    out.write(reinterpret_cast<const char *>(b), 8);
}
inline void put_f64(std::ostream &out, double v) {
    unsigned char b[8];
    store_scalar(b, v, ByteOrder::little);
    out.write(reinterpret_cast<const char *>(b), 8);
}
inline std::uint64_t get_u64(std::istream &in) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char *>(b), 8)) throw Error(ErrorKind::io, "io", "unexpected end of file");
    return load_scalar<std::uint64_t>(b, ByteOrder::little);
}
inline double get_f64(std::istream &in) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char *>(b), 8)) throw Error(ErrorKind::io, "io", "unexpected end of file");
    return load_scalar<double>(b, ByteOrder::little);
}
}  // namespace detail

/// Binary dump: rows, cols, dim as little-endian uint64, then rows*cols*dim
/// little-endian doubles, pixel-major.
inline void write_profile(const FeatureMatrix &fm, const std::filesystem::path &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::io, "energy_profile", "cannot write '" + path.string() + "'");
    detail::put_u64(out, fm.rows);
    detail::put_u64(out, fm.cols);
    detail::put_u64(out, fm.dim());
    for (Eigen::Index i = 0; i < fm.values.rows(); ++i)
        for (Eigen::Index j = 0; j < fm.values.cols(); ++j) detail::put_f64(out, fm.values(i, j));
}

inline FeatureMatrix read_profile(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "energy_profile", "cannot open '" + path.string() + "'");
    FeatureMatrix fm;
    fm.rows = detail::get_u64(in);
    fm.cols = detail::get_u64(in);
    const std::uint64_t dim = detail::get_u64(in);
    const auto expected = 24 + fm.rows * fm.cols * dim * 8;
    if (std::filesystem::file_size(path) != expected)
        throw Error(ErrorKind::io, "energy_profile",
                    "profile size mismatch: expected " + std::to_string(expected) + " bytes, found " +
                        std::to_string(std::filesystem::file_size(path)));
    fm.values.resize(static_cast<Eigen::Index>(fm.rows * fm.cols), static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < fm.values.rows(); ++i)
        for (Eigen::Index j = 0; j < fm.values.cols(); ++j) fm.values(i, j) = detail::get_f64(in);
    return fm;
}

}  // namespace hsi

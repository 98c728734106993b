#pragma once

// Energy-maximizing orthogonal filter sets.
//
// Every pixel contributes one c x c neighborhood (mirror padded at the
// borders), vectorized row by row: element (a, b) of the window sits at index
// a * c + b. The filters are the leading eigenvectors of the covariance of
// those vectors; filter i maximizes the variance of its response subject to
// unit norm and orthogonality to filters 0..i-1, and that variance is the
// corresponding eigenvalue.

#include <Eigen/Dense>
#include <algorithm>
#include <cstdio>
#include <optional>
#include <ostream>
#include <vector>

#include "hsi/datacube.hpp"
#include "hsi/parallel.hpp"
#include "hsi/spectral_reduction.hpp"
#include "hsi/symmetric_eigen.hpp"

namespace hsi {

/// Symmetric (edge-repeating) reflection of an out-of-range index:
/// -1 -> 0, -2 -> 1, n -> n-1. Valid for offsets up to n.
inline std::size_t mirror_index(std::ptrdiff_t i, std::size_t n) {
    const auto sn = static_cast<std::ptrdiff_t>(n);
    if (i < 0) i = -i - 1;
    if (i >= sn) i = 2 * sn - i - 1;
    return static_cast<std::size_t>(i);
}

inline void check_window(const Image &image, std::size_t c, const char *module) {
    if (c == 0 || c % 2 == 0)
        throw Error(ErrorKind::invalid_argument, module, "window size " + std::to_string(c) + " must be odd");
    if (c > std::min(image.rows(), image.cols()))
        throw Error(ErrorKind::invalid_argument, module,
                    "window size " + std::to_string(c) + " exceeds image extent " + std::to_string(image.rows()) + "x" +
                        std::to_string(image.cols()));
}

/// Writes the vectorized window centered at pixel (row, col) into out[0..c*c).
inline void gather_patch(const Image &image, std::size_t c, std::size_t row, std::size_t col, double *out) {
    const auto h = static_cast<std::ptrdiff_t>(c / 2);
    const auto r0 = static_cast<std::ptrdiff_t>(row) - h;
    const auto c0 = static_cast<std::ptrdiff_t>(col) - h;
    const bool interior = r0 >= 0 && c0 >= 0 && row + c / 2 < image.rows() && col + c / 2 < image.cols();
    const double *data = image.values().data();
    for (std::size_t a = 0; a < c; ++a) {
        if (interior) {
            const double *src = data + (static_cast<std::size_t>(r0) + a) * image.cols() + static_cast<std::size_t>(c0);
            std::copy(src, src + c, out + a * c);
            continue;
        }
        const std::size_t rr = mirror_index(r0 + static_cast<std::ptrdiff_t>(a), image.rows());
        for (std::size_t b = 0; b < c; ++b)
            out[a * c + b] = data[rr * image.cols() + mirror_index(c0 + static_cast<std::ptrdiff_t>(b), image.cols())];
    }
}

/// One column per pixel (row-major pixel order), each the vectorized c x c
/// window around that pixel.
struct PatchMatrix {
    std::size_t c = 0;
    Eigen::MatrixXd columns;  ///< c*c x (rows*cols)

    std::size_t n_patches() const { return static_cast<std::size_t>(columns.cols()); }
};

inline PatchMatrix extract_patches(const Image &image, std::size_t c) {
    check_window(image, c, "filter_design");
    PatchMatrix pm{c, Eigen::MatrixXd(static_cast<Eigen::Index>(c * c), static_cast<Eigen::Index>(image.size()))};
    for (std::size_t r = 0; r < image.rows(); ++r)
        for (std::size_t col = 0; col < image.cols(); ++col)
            gather_patch(image, c, r, col, pm.columns.col(static_cast<Eigen::Index>(r * image.cols() + col)).data());
    return pm;
}

/// c*c x c*c patch covariance (divisor n_patches - 1).
struct CovarianceMatrix {
    std::size_t c = 0;
    Eigen::MatrixXd entries;
};

namespace detail {

struct MomentChunk {
    double count = 0;
    Eigen::VectorXd mean;
    Eigen::MatrixXd m2;  ///< lower triangle valid
};

// Chan et al. pairwise update of (count, mean, centered second moment).
inline void merge_moments(MomentChunk &acc, const MomentChunk &next) {
    if (next.count == 0) return;
    if (acc.count == 0) {
        acc = next;
        return;
    }
    const double n = acc.count + next.count;
    const Eigen::VectorXd delta = next.mean - acc.mean;
    acc.m2 += next.m2;
    acc.m2.selfadjointView<Eigen::Lower>().rankUpdate(delta, acc.count * next.count / n);
    acc.mean += delta * (next.count / n);
    acc.count = n;
}

inline constexpr std::size_t kPatchChunk = 512;

// Accumulates centered moments over n patches in fixed-size chunks; chunk
// statistics are computed in parallel and merged strictly in chunk order so
// the result does not depend on the thread count.
template <typename Fill>
CovarianceMatrix chunked_covariance(std::size_t c, std::size_t n, int threads, Fill &&fill) {
    const auto d = static_cast<Eigen::Index>(c * c);
    const std::size_t chunks = (n + kPatchChunk - 1) / kPatchChunk;
    const std::size_t wave = static_cast<std::size_t>(std::max(1, threads));
    MomentChunk total;
    for (std::size_t first = 0; first < chunks; first += wave) {
        const std::size_t count = std::min(wave, chunks - first);
        std::vector<MomentChunk> stats(count);
        parallel_for(count, threads, [&](std::size_t w) {
            const std::size_t begin = (first + w) * kPatchChunk;
            const std::size_t end = std::min(n, begin + kPatchChunk);
            Eigen::MatrixXd block(d, static_cast<Eigen::Index>(end - begin));
            for (std::size_t p = begin; p < end; ++p) fill(p, block.col(static_cast<Eigen::Index>(p - begin)).data());
            MomentChunk &s = stats[w];
            s.count = static_cast<double>(end - begin);
            s.mean = block.rowwise().mean();
            block.colwise() -= s.mean;
            s.m2 = Eigen::MatrixXd::Zero(d, d);
            s.m2.selfadjointView<Eigen::Lower>().rankUpdate(block);
        });
        for (const auto &s : stats) merge_moments(total, s);
    }
    CovarianceMatrix cov{c, Eigen::MatrixXd(total.m2.selfadjointView<Eigen::Lower>())};
    cov.entries /= static_cast<double>(n - 1);
    return cov;
}

}  // namespace detail

inline CovarianceMatrix patch_covariance(const PatchMatrix &patches, int threads = 1) {
    if (patches.n_patches() < 2) throw Error(ErrorKind::degenerate, "filter_design", "patch covariance needs at least 2 patches");
    const auto d = patches.columns.rows();
    return detail::chunked_covariance(patches.c, patches.n_patches(), threads, [&](std::size_t p, double *out) {
        const double *src = patches.columns.col(static_cast<Eigen::Index>(p)).data();
        std::copy(src, src + d, out);
    });
}

/// Same result as patch_covariance(extract_patches(image, c)) without
/// materializing the patch matrix.
inline CovarianceMatrix patch_covariance(const Image &image, std::size_t c, int threads = 1) {
    check_window(image, c, "filter_design");
    if (image.size() < 2) throw Error(ErrorKind::degenerate, "filter_design", "patch covariance needs at least 2 patches");
    return detail::chunked_covariance(c, image.size(), threads, [&](std::size_t p, double *out) {
        gather_patch(image, c, p / image.cols(), p % image.cols(), out);
    });
}

/// How many leading eigenvectors become filters. An explicit count wins;
/// otherwise the smallest n reaching `energy_fraction` of the trace, clamped
/// to [min_count, max_count] and to c*c.
struct FilterSelection {
    std::optional<std::size_t> count;
    double energy_fraction = 0.99;
    std::size_t min_count = 3;
    std::size_t max_count = 50;
};

struct FilterSet {
    std::size_t c = 0;
    Eigen::MatrixXd filters;   ///< c*c x n, column i is filter i
    Eigen::VectorXd energies;  ///< nonincreasing

    std::size_t size() const { return static_cast<std::size_t>(filters.cols()); }
    Eigen::VectorXd filter(std::size_t i) const { return filters.col(static_cast<Eigen::Index>(i)); }
};

inline std::size_t select_filter_count(const Eigen::VectorXd &energies, std::size_t c, const FilterSelection &selection) {
    const std::size_t max_filters = c * c;
    if (selection.count) {
        if (*selection.count < 1 || *selection.count > max_filters)
            throw Error(ErrorKind::invalid_argument, "filter_design",
                        "filter count " + std::to_string(*selection.count) + " outside [1, " + std::to_string(max_filters) + "]");
        return *selection.count;
    }
    if (!(selection.energy_fraction > 0.0 && selection.energy_fraction <= 1.0))
        throw Error(ErrorKind::invalid_argument, "filter_design", "filter energy fraction must lie in (0, 1]");
    const double total = energies.sum();
    const double target = selection.energy_fraction * total - 1e-12 * total;
    std::size_t n = max_filters;
    double cumulative = 0.0;
    for (Eigen::Index i = 0; i < energies.size(); ++i) {
        cumulative += energies[i];
        if (cumulative >= target) {
            n = static_cast<std::size_t>(i + 1);
            break;
        }
    }
    n = std::clamp(n, selection.min_count, std::max(selection.min_count, selection.max_count));
    return std::min(n, max_filters);
}

/// Filters from an already computed patch covariance.
inline FilterSet filters_from_covariance(const CovarianceMatrix &cov, const FilterSelection &selection = {}) {
    auto eig = symmetric_eigen(cov.entries);
    const double trace = cov.entries.trace();
    clamp_small_negative(eig.values, trace, "filter_design");
    if (!(eig.values[0] > 0.0)) throw Error(ErrorKind::degenerate, "filter_design", "no informative filters (all energies are zero)");
    const std::size_t n = select_filter_count(eig.values, cov.c, selection);
    return FilterSet{cov.c, eig.vectors.leftCols(static_cast<Eigen::Index>(n)), eig.values.head(static_cast<Eigen::Index>(n))};
}

inline FilterSet design_filter_set(const Image &image, std::size_t c, const FilterSelection &selection = {}, int threads = 1) {
    return filters_from_covariance(patch_covariance(image, c, threads), selection);
}

/// Energy spectrum followed by every filter reshaped to its c x c grid.
inline void write_filter_set(std::ostream &out, const FilterSet &fs) {
    char buf[64];
    out << "# filter set: window " << fs.c << "x" << fs.c << ", " << fs.size() << " filters\n";
    out << "# filter  energy\n";
    for (std::size_t i = 0; i < fs.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%8zu  %.9e\n", i + 1, fs.energies[static_cast<Eigen::Index>(i)]);
        out << buf;
    }
    for (std::size_t i = 0; i < fs.size(); ++i) {
        out << "\n# filter " << i + 1 << '\n';
        for (std::size_t a = 0; a < fs.c; ++a) {
            for (std::size_t b = 0; b < fs.c; ++b) {
                std::snprintf(buf, sizeof buf, "%s%+.5f", b ? " " : "",
                              fs.filters(static_cast<Eigen::Index>(a * fs.c + b), static_cast<Eigen::Index>(i)));
                out << buf;
            }
            out << '\n';
        }
    }
}

}  // namespace hsi

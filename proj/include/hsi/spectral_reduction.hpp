#pragma once

// Spectral principal components of a cube: pixels are observations, bands
// are variables.

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <vector>

#include "hsi/datacube.hpp"
#include "hsi/parallel.hpp"
#include "hsi/symmetric_eigen.hpp"

namespace hsi {

struct PcaModel {
    Eigen::VectorXd mean;          ///< mean spectrum, length b
    Eigen::VectorXd eigenvalues;   ///< nonincreasing, >= 0
    Eigen::MatrixXd eigenvectors;  ///< b x b, orthonormal columns

    std::size_t bands() const { return static_cast<std::size_t>(mean.size()); }
};

/// k projected planes; plane i is the projection onto component i.
struct PcStack {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<Image> planes;

    std::size_t k() const { return planes.size(); }
};

/// Clamps eigenvalues in [-tol, 0) to zero, tol = 1e-8 * trace. Anything more
/// negative means the covariance was not positive semidefinite.
inline void clamp_small_negative(Eigen::VectorXd &values, double trace, const char *module) {
    const double tol = 1e-8 * std::max(trace, std::numeric_limits<double>::min());
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        if (values[i] >= 0) continue;
        if (values[i] < -tol)
            throw Error(ErrorKind::numerical, module, "covariance has a significantly negative eigenvalue " + std::to_string(values[i]));
        values[i] = 0.0;
    }
}

inline PcaModel fit_spectral_pca(const HyperCube &cube) {
    const auto n = static_cast<Eigen::Index>(cube.pixels());
    const auto b = static_cast<Eigen::Index>(cube.bands());
    if (n < 2) throw Error(ErrorKind::degenerate, "spectral_reduction", "PCA needs at least 2 pixels");
    // band-sequential storage is a column-major (pixels x bands) matrix
    Eigen::Map<const Eigen::MatrixXd> x(cube.values().data(), n, b);
    PcaModel model;
    model.mean = x.colwise().mean().transpose();
    const Eigen::MatrixXd centered = x.rowwise() - model.mean.transpose();
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(b, b);
    cov.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose(), 1.0 / static_cast<double>(n - 1));
    cov = cov.selfadjointView<Eigen::Lower>();
    auto eig = symmetric_eigen(cov);
    clamp_small_negative(eig.values, cov.trace(), "spectral_reduction");
    model.eigenvalues = std::move(eig.values);
    model.eigenvectors = std::move(eig.vectors);
    return model;
}

/// Smallest k whose leading eigenvalues carry at least `fraction` of the total.
inline std::size_t select_components(const PcaModel &model, double fraction) {
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw Error(ErrorKind::invalid_argument, "spectral_reduction", "variance fraction must lie in (0, 1]");
    const double total = model.eigenvalues.sum();
    if (!(total > 0.0)) throw Error(ErrorKind::degenerate, "spectral_reduction", "cube has zero spectral variance");
    // absorb summation rounding so exact boundaries such as 9/10 >= 0.9 hold
    const double target = fraction * total - 1e-12 * total;
    double cumulative = 0.0;
    for (Eigen::Index i = 0; i < model.eigenvalues.size(); ++i) {
        cumulative += model.eigenvalues[i];
        if (cumulative >= target) return static_cast<std::size_t>(i + 1);
    }
    return static_cast<std::size_t>(model.eigenvalues.size());
}

/// Projects every pixel onto the first k components.
inline PcStack project(const HyperCube &cube, const PcaModel &model, std::size_t k, int threads = 1) {
    if (cube.bands() != model.bands())
        throw Error(ErrorKind::invalid_argument, "spectral_reduction", "cube band count does not match the PCA model");
    if (k < 1 || k > cube.bands())
        throw Error(ErrorKind::invalid_argument, "spectral_reduction",
                    "component count " + std::to_string(k) + " outside [1, " + std::to_string(cube.bands()) + "]");
    const std::size_t n = cube.pixels();
    PcStack stack{cube.rows(), cube.cols(), std::vector<Image>(k)};
    parallel_for(k, threads, [&](std::size_t i) {
        std::vector<double> plane(n, 0.0);
        for (std::size_t band = 0; band < cube.bands(); ++band) {
            const double w = model.eigenvectors(static_cast<Eigen::Index>(band), static_cast<Eigen::Index>(i));
            const double mu = model.mean[static_cast<Eigen::Index>(band)];
            auto s = cube.band(band);
            for (std::size_t p = 0; p < n; ++p) plane[p] += w * (s[p] - mu);
        }
        stack.planes[i] = Image(cube.rows(), cube.cols(), std::move(plane));
    });
    return stack;
}

/// Eigenvalue table with explained and cumulative variance percentages.
inline void write_eigenspectrum(std::ostream &out, const PcaModel &model, std::size_t selected) {
    const double total = model.eigenvalues.sum();
    out << "# spectral PCA: " << model.bands() << " bands, " << selected << " components retained\n";
    out << "# component  eigenvalue  explained_pct  cumulative_pct\n";
    double cumulative = 0.0;
    char line[128];
    for (Eigen::Index i = 0; i < model.eigenvalues.size(); ++i) {
        cumulative += model.eigenvalues[i];
        const double pct = total > 0 ? 100.0 * model.eigenvalues[i] / total : 0.0;
        const double cum = total > 0 ? 100.0 * cumulative / total : 0.0;
        std::snprintf(line, sizeof line, "%11lld  %.9e  %13.6f  %14.6f\n", static_cast<long long>(i + 1), model.eigenvalues[i],
                      pct, cum);
        out << line;
    }
}

}  // namespace hsi

#pragma once

// Synthetic textured scenes for tests and demos.
//
// The raster is tiled into square blocks; each block belongs to one class.
// A class has its own mean spectrum and an oriented stripe texture along a
// shared spectral axis. Per-pixel clutter inside the span of the class
// offsets makes single spectra ambiguous; a neighbourhood average is not.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "hsi/datacube.hpp"
#include "hsi/random.hpp"

namespace hsi {

struct SceneSpec {
    std::size_t rows = 64;
    std::size_t cols = 64;
    std::size_t bands = 10;
    int classes = 4;
    std::size_t tile = 32;          ///< block edge in pixels
    double stripe_period = 4.0;     ///< pixels per stripe cycle
    double texture_amplitude = 4.0;
    double spectral_separation = 1.0;   ///< spacing of class mean spectra
    std::size_t edge_buffer = 2;        ///< pixels this close to a block seam stay unlabeled
    double clutter = 1.0;               ///< per-pixel Gaussian jitter inside the class-offset subspace
    double noise = 0.05;                ///< per-band Gaussian noise sigma
    std::uint64_t seed = 1;
};

struct Scene {
    HyperCube cube;
    LabelMap labels;
};

inline double standard_normal(Xoshiro256 &rng) {
    // Box-Muller; u1 in (0, 1]
    const double u1 = 1.0 - rng.uniform();
    const double u2 = rng.uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline Scene make_textured_scene(const SceneSpec &spec) {
    Xoshiro256 rng(spec.seed);
    const std::size_t b = spec.bands;
    const auto k = static_cast<std::size_t>(spec.classes);

    // shared smooth "reflectance" baseline and texture direction
    std::vector<double> base(b), texture_dir(b);
    for (std::size_t j = 0; j < b; ++j) {
        const double t = static_cast<double>(j) / static_cast<double>(std::max<std::size_t>(1, b - 1));
        base[j] = 5.0 + 2.0 * std::sin(3.0 * t);
        texture_dir[j] = 1.0 + 0.5 * t;
    }
    double tnorm = 0.0;
    for (double v : texture_dir) tnorm += v * v;
    for (auto &v : texture_dir) v /= std::sqrt(tnorm);
    // class offsets: random directions scaled to the requested separation
    std::vector<std::vector<double>> offset(k, std::vector<double>(b));
    for (auto &o : offset) {
        double norm = 0.0;
        for (auto &v : o) {
            v = standard_normal(rng);
        }
        // keep spectra and texture on separate axes
        double d = 0.0;
        for (std::size_t j = 0; j < b; ++j) d += o[j] * texture_dir[j];
        for (std::size_t j = 0; j < b; ++j) {
            o[j] -= d * texture_dir[j];
            norm += o[j] * o[j];
        }
        for (auto &v : o) v *= spec.spectral_separation * std::sqrt(static_cast<double>(b)) / std::sqrt(norm);
    }
    // orthonormal basis of the offset span, for clutter
    std::vector<std::vector<double>> basis;
    for (const auto &o : offset) {
        std::vector<double> v = o;
        for (const auto &u : basis) {
            double d = 0.0;
            for (std::size_t j = 0; j < b; ++j) d += u[j] * v[j];
            for (std::size_t j = 0; j < b; ++j) v[j] -= d * u[j];
        }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        if (norm < 1e-12) continue;
        for (auto &x : v) x /= std::sqrt(norm);
        basis.push_back(std::move(v));
    }
    // stripe orientations evenly spread over [0, pi)
    std::vector<double> angle(k);
    for (std::size_t c = 0; c < k; ++c) angle[c] = std::numbers::pi * static_cast<double>(c) / static_cast<double>(k);

    std::vector<int> labels(spec.rows * spec.cols);
    std::vector<double> values(spec.rows * spec.cols * b);
    for (std::size_t r = 0; r < spec.rows; ++r) {
        for (std::size_t c = 0; c < spec.cols; ++c) {
            const std::size_t tr = r / spec.tile, tc = c / spec.tile;
            const std::size_t cls = (tc + 2 * tr) % k;
            const std::size_t dr = std::min(r % spec.tile, spec.tile - 1 - r % spec.tile);
            const std::size_t dc = std::min(c % spec.tile, spec.tile - 1 - c % spec.tile);
            const bool seam_r = (r % spec.tile < spec.tile / 2 ? tr > 0 : r / spec.tile + 1 < (spec.rows + spec.tile - 1) / spec.tile);
            const bool seam_c = (c % spec.tile < spec.tile / 2 ? tc > 0 : c / spec.tile + 1 < (spec.cols + spec.tile - 1) / spec.tile);
            const bool near_seam = (seam_r && dr < spec.edge_buffer) || (seam_c && dc < spec.edge_buffer);
            labels[r * spec.cols + c] = near_seam ? 0 : static_cast<int>(cls) + 1;
            const double phase =
                2.0 * std::numbers::pi *
                (static_cast<double>(c) * std::cos(angle[cls]) + static_cast<double>(r) * std::sin(angle[cls])) / spec.stripe_period;
            const double stripe = spec.texture_amplitude * std::cos(phase);
            std::vector<double> jitter(b, 0.0);
            if (spec.clutter > 0)
                for (const auto &u : basis) {
                    const double g = spec.clutter * standard_normal(rng);
                    for (std::size_t j = 0; j < b; ++j) jitter[j] += g * u[j];
                }
            for (std::size_t j = 0; j < b; ++j)
                values[(j * spec.rows + r) * spec.cols + c] =
                    base[j] + offset[cls][j] + jitter[j] + stripe * texture_dir[j] + spec.noise * standard_normal(rng);
        }
    }
    return Scene{HyperCube(spec.rows, spec.cols, b, std::move(values)), LabelMap(spec.rows, spec.cols, std::move(labels), spec.classes)};
}

}  // namespace hsi

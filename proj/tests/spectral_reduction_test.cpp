#include "hsi/spectral_reduction.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "test_support.hpp"

namespace hsi {
namespace {

// Two-loop covariance over pixels, bands as variables.
Eigen::MatrixXd brute_covariance(const HyperCube &cube) {
    const std::size_t n = cube.pixels(), b = cube.bands();
    std::vector<double> mean(b, 0.0);
    for (std::size_t j = 0; j < b; ++j) {
        for (std::size_t p = 0; p < n; ++p) mean[j] += cube.band(j)[p];
        mean[j] /= static_cast<double>(n);
    }
    Eigen::MatrixXd cov(b, b);
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < b; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < n; ++p) s += (cube.band(i)[p] - mean[i]) * (cube.band(j)[p] - mean[j]);
            cov(i, j) = s / static_cast<double>(n - 1);
        }
    return cov;
}

double sample_variance(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

PcaModel model_with(std::vector<double> eigenvalues) {
    PcaModel m;
    const auto b = static_cast<Eigen::Index>(eigenvalues.size());
    m.mean = Eigen::VectorXd::Zero(b);
    m.eigenvalues = Eigen::Map<Eigen::VectorXd>(eigenvalues.data(), b);
    m.eigenvectors = Eigen::MatrixXd::Identity(b, b);
    return m;
}

TEST(PcaTest, IdenticalSpectraGiveZeroEigenvalues) {
    std::vector<double> v;
    for (int b = 0; b < 4; ++b)
        for (int p = 0; p < 9; ++p) v.push_back(1.5 * b);
    const auto m = fit_spectral_pca(HyperCube(3, 3, 4, v));
    EXPECT_EQ(m.eigenvalues.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_THROW(select_components(m, 0.9), Error);
    const PcStack pcs = project(HyperCube(3, 3, 4, v), m, 4);
    for (const auto &plane : pcs.planes)
        for (double x : plane.values()) EXPECT_EQ(x, 0.0);
}

TEST(PcaTest, RankOneTwoBandCube) {
    // pixels (1,1), (-1,-1), (2,2), (-2,-2)
    const HyperCube cube(2, 2, 2, {1, -1, 2, -2, 1, -1, 2, -2});
    const auto m = fit_spectral_pca(cube);
    const double h = 1.0 / std::sqrt(2.0);
    EXPECT_NEAR(m.eigenvectors(0, 0), h, 1e-12);
    EXPECT_NEAR(m.eigenvectors(1, 0), h, 1e-12);
    EXPECT_NEAR(m.eigenvalues[1], 0.0, 1e-12);
    // var along (1,1)/sqrt2: values sqrt2*{1,-1,2,-2}, sum of squares 20, / 3
    EXPECT_NEAR(m.eigenvalues[0], 20.0 / 3.0, 1e-12);
}

TEST(PcaTest, CovarianceReconstructionMatchesBruteForce) {
    std::mt19937_64 gen(20);
    const HyperCube cube = testing::random_cube(gen, 20, 20, 6);
    const auto m = fit_spectral_pca(cube);
    const Eigen::MatrixXd rebuilt = m.eigenvectors * m.eigenvalues.asDiagonal() * m.eigenvectors.transpose();
    EXPECT_LT((rebuilt - brute_covariance(cube)).cwiseAbs().maxCoeff(), 1e-8);
    const auto b = m.eigenvectors.cols();
    EXPECT_LT((m.eigenvectors.transpose() * m.eigenvectors - Eigen::MatrixXd::Identity(b, b)).cwiseAbs().maxCoeff(), 1e-8);
    for (Eigen::Index i = 0; i + 1 < b; ++i) EXPECT_GE(m.eigenvalues[i], m.eigenvalues[i + 1]);
}

TEST(PcaTest, PlaneVarianceEqualsEigenvalue) {
    std::mt19937_64 gen(21);
    const HyperCube cube = testing::random_cube(gen, 17, 23, 8);
    const auto m = fit_spectral_pca(cube);
    const PcStack pcs = project(cube, m, 8, 3);
    for (std::size_t i = 0; i < 8; ++i) {
        const double lambda = m.eigenvalues[static_cast<Eigen::Index>(i)];
        EXPECT_NEAR(sample_variance(pcs.planes[i].values()), lambda, 1e-6 * std::max(lambda, 1e-3 * m.eigenvalues[0]));
    }
}

TEST(PcaTest, FullProjectionIsAnIsometry) {
    std::mt19937_64 gen(22);
    const HyperCube cube = testing::random_cube(gen, 6, 7, 5);
    const auto m = fit_spectral_pca(cube);
    const PcStack pcs = project(cube, m, 5);
    std::uniform_int_distribution<std::size_t> pick(0, cube.pixels() - 1);
    for (int t = 0; t < 50; ++t) {
        const std::size_t p = pick(gen), q = pick(gen);
        double d_spec = 0.0, d_pc = 0.0;
        for (std::size_t b = 0; b < 5; ++b) {
            d_spec += std::pow(cube.band(b)[p] - cube.band(b)[q], 2);
            d_pc += std::pow(pcs.planes[b].values()[p] - pcs.planes[b].values()[q], 2);
        }
        EXPECT_NEAR(std::sqrt(d_spec), std::sqrt(d_pc), 1e-8);
    }
}

TEST(PcaTest, ProjectionThreadsDoNotChangeResult) {
    std::mt19937_64 gen(23);
    const HyperCube cube = testing::random_cube(gen, 9, 9, 7);
    const auto m = fit_spectral_pca(cube);
    const PcStack a = project(cube, m, 4, 1), b = project(cube, m, 4, 4);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(a.planes[i].values()[5], b.planes[i].values()[5]);
}

TEST(PcaTest, RejectsDegenerateInputs) {
    EXPECT_THROW(fit_spectral_pca(HyperCube(1, 1, 3, {1, 2, 3})), Error);
    std::mt19937_64 gen(1);
    const HyperCube cube = testing::random_cube(gen, 4, 4, 3);
    const auto m = fit_spectral_pca(cube);
    EXPECT_THROW(project(cube, m, 0), Error);
    EXPECT_THROW(project(cube, m, 4), Error);
}

TEST(SelectComponentsTest, HandEnumeratedCases) {
    EXPECT_EQ(select_components(model_with({9, 1}), 0.9), 1u);          // 9/10 is exactly 0.9
    EXPECT_EQ(select_components(model_with({5, 3, 1, 1}), 0.9), 3u);    // 0.5, 0.8, 0.9
    EXPECT_EQ(select_components(model_with({5, 3, 1, 1}), 0.91), 4u);
    EXPECT_EQ(select_components(model_with({5, 3, 1, 1}), 0.5), 1u);
    EXPECT_EQ(select_components(model_with({4, 3, 2, 1}), 1.0), 4u);
    EXPECT_EQ(select_components(model_with({0.7, 0.2, 0.1}), 0.9), 2u);  // 0.7 + 0.2 sums to 0.8999... in binary; still k = 2
}

TEST(SelectComponentsTest, RejectsBadFractions) {
    EXPECT_THROW(select_components(model_with({1, 1}), 0.0), Error);
    EXPECT_THROW(select_components(model_with({1, 1}), 1.5), Error);
}

TEST(SelectComponentsTest, MonotoneInFraction) {
    std::mt19937_64 gen(4);
    std::exponential_distribution<double> ed(1.0);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> ev(12);
        for (auto &x : ev) x = ed(gen);
        std::sort(ev.rbegin(), ev.rend());
        const auto m = model_with(ev);
        std::size_t prev = 0;
        for (double f = 0.05; f <= 1.0; f += 0.05) {
            const std::size_t k = select_components(m, f);
            EXPECT_GE(k, prev);
            prev = k;
        }
    }
}

TEST(EigenspectrumTest, ReportsCumulativePercent) {
    std::ostringstream out;
    write_eigenspectrum(out, model_with({5, 3, 1, 1}), 3);
    const std::string s = out.str();
    EXPECT_NE(s.find("3 components retained"), std::string::npos);
    EXPECT_NE(s.find("90.000000"), std::string::npos);
}

}  // namespace
}  // namespace hsi

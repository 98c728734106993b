#include "hsi/energy_profile.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "test_support.hpp"

namespace hsi {
namespace {

using testing::TempDir;

// Sliding-window correlation with per-tap mirror folding (no padded copy).
Image correlation_oracle(const Image &im, const std::vector<double> &f, std::size_t c) {
    const long h = static_cast<long>(c / 2), rows = static_cast<long>(im.rows()), cols = static_cast<long>(im.cols());
    auto fold = [](long i, long n) {
        if (i < 0) return -i - 1;
        if (i >= n) return 2 * n - i - 1;
        return i;
    };
    std::vector<double> out(im.size());
    for (long r = 0; r < rows; ++r)
        for (long col = 0; col < cols; ++col) {
            double s = 0.0;
            for (long a = 0; a < static_cast<long>(c); ++a)
                for (long b = 0; b < static_cast<long>(c); ++b)
                    s += f[static_cast<std::size_t>(a) * c + static_cast<std::size_t>(b)] *
                         im(static_cast<std::size_t>(fold(r + a - h, rows)), static_cast<std::size_t>(fold(col + b - h, cols)));
            out[static_cast<std::size_t>(r * cols + col)] = s;
        }
    return Image(im.rows(), im.cols(), out);
}

std::vector<double> random_filter(std::mt19937_64 &gen, std::size_t c) {
    std::normal_distribution<double> nd;
    std::vector<double> f(c * c);
    for (auto &x : f) x = nd(gen);
    return f;
}

PcStack random_stack(std::mt19937_64 &gen, std::size_t k, std::size_t r, std::size_t c) {
    PcStack pcs{r, c, {}};
    for (std::size_t i = 0; i < k; ++i) pcs.planes.push_back(testing::textured_image(gen, r, c));
    return pcs;
}

FilterSet random_filter_set(std::mt19937_64 &gen, std::size_t c, std::size_t n) {
    FilterSet fs{c, Eigen::MatrixXd(c * c, n), Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n))};
    for (std::size_t q = 0; q < n; ++q) {
        auto f = random_filter(gen, c);
        fs.filters.col(static_cast<Eigen::Index>(q)) = Eigen::Map<Eigen::VectorXd>(f.data(), static_cast<Eigen::Index>(f.size()));
    }
    return fs;
}

TEST(ApplyFilterTest, DeltaFilterIsIdentity) {
    std::mt19937_64 gen(41);
    const Image im = testing::random_image(gen, 8, 9);
    for (std::size_t c : {1u, 3u, 5u}) {
        std::vector<double> delta(c * c, 0.0);
        delta[(c * c - 1) / 2] = 1.0;
        const Image out = apply_filter(im, delta, c);
        EXPECT_TRUE(std::equal(out.values().begin(), out.values().end(), im.values().begin()));
    }
}

TEST(ApplyFilterTest, ConstantImageScalesBySum) {
    std::mt19937_64 gen(42);
    const auto f = random_filter(gen, 3);
    const double sum = std::accumulate(f.begin(), f.end(), 0.0);
    const Image out = apply_filter(Image(4, 4, std::vector<double>(16, 2.0)), f, 3);
    for (double v : out.values()) EXPECT_NEAR(v, 2.0 * sum, 1e-12);
}

TEST(ApplyFilterTest, MatchesNestedLoopOracle) {
    std::mt19937_64 gen(43);
    const Image im = testing::random_image(gen, 6, 7);
    const auto f = random_filter(gen, 3);
    const Image got = apply_filter(im, f, 3), want = correlation_oracle(im, f, 3);
    for (std::size_t i = 0; i < im.size(); ++i) EXPECT_NEAR(got.values()[i], want.values()[i], 1e-12);
}

TEST(ApplyFilterTest, IsNotFlipped) {
    // a filter that only looks one column to the right
    const Image im(3, 3, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    const std::vector<double> right = {0, 0, 0, 0, 0, 1, 0, 0, 0};
    const Image out = apply_filter(im, right, 3);
    EXPECT_EQ(out(1, 0), 5.0);
    EXPECT_EQ(out(1, 1), 6.0);
    EXPECT_EQ(out(1, 2), 6.0);  // mirror repeats the edge
}

TEST(ApplyFilterTest, Linear) {
    std::mt19937_64 gen(44);
    const Image im = testing::random_image(gen, 9, 11);
    const auto f = random_filter(gen, 5), g = random_filter(gen, 5);
    const double alpha = 0.7, beta = -1.3;
    std::vector<double> mix(25);
    for (std::size_t i = 0; i < 25; ++i) mix[i] = alpha * f[i] + beta * g[i];
    const Image a = apply_filter(im, f, 5), b = apply_filter(im, g, 5), m = apply_filter(im, mix, 5);
    for (std::size_t i = 0; i < im.size(); ++i) EXPECT_NEAR(m.values()[i], alpha * a.values()[i] + beta * b.values()[i], 1e-10);
}

TEST(ApplyFilterTest, RejectsLengthMismatch) {
    EXPECT_THROW(apply_filter(Image(3, 3, std::vector<double>(9, 0)), std::vector<double>(8, 0), 3), Error);
}

TEST(BuildProfileTest, DoubleProfileLayout) {
    std::mt19937_64 gen(45);
    const PcStack pcs = random_stack(gen, 2, 10, 12);
    const FilterSet fs = random_filter_set(gen, 3, 3);
    const EnergyProfile prof = build_profile(pcs, fs, 2);
    ASSERT_EQ(prof.features.dim(), 6u);
    for (std::size_t p = 0; p < 2; ++p)
        for (std::size_t q = 0; q < 3; ++q) {
            const Image ref = apply_filter(pcs.planes[p], fs.filter(q), 3);
            for (std::size_t i = 0; i < ref.size(); ++i)
                EXPECT_EQ(prof.features.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p * 3 + q)), ref.values()[i]);
        }
}

TEST(BuildProfileTest, SingleDeltaFilterReproducesPlane) {
    std::mt19937_64 gen(46);
    const PcStack pcs = random_stack(gen, 1, 7, 7);
    FilterSet fs{3, Eigen::MatrixXd::Zero(9, 1), Eigen::VectorXd::Ones(1)};
    fs.filters(4, 0) = 1.0;
    const EnergyProfile prof = build_profile(pcs, fs);
    for (std::size_t i = 0; i < 49; ++i) EXPECT_EQ(prof.features.values(static_cast<Eigen::Index>(i), 0), pcs.planes[0].values()[i]);
}

TEST(BuildProfileTest, FilterPermutationPermutesColumns) {
    std::mt19937_64 gen(47);
    const PcStack pcs = random_stack(gen, 2, 9, 9);
    const FilterSet fs = random_filter_set(gen, 3, 4);
    const std::vector<Eigen::Index> perm = {2, 0, 3, 1};
    FilterSet shuffled = fs;
    for (Eigen::Index q = 0; q < 4; ++q) shuffled.filters.col(q) = fs.filters.col(perm[static_cast<std::size_t>(q)]);
    const auto a = build_profile(pcs, fs).features.values;
    const auto b = build_profile(pcs, shuffled).features.values;
    for (Eigen::Index p = 0; p < 2; ++p)
        for (Eigen::Index q = 0; q < 4; ++q) EXPECT_EQ(b.col(p * 4 + q), a.col(p * 4 + perm[static_cast<std::size_t>(q)]));
}

TEST(BuildProfileTest, DeterministicAcrossThreadCounts) {
    std::mt19937_64 gen(48);
    const PcStack pcs = random_stack(gen, 3, 15, 13);
    const FilterSet fs = random_filter_set(gen, 5, 4);
    EXPECT_EQ(build_profile(pcs, fs, 1).features.values, build_profile(pcs, fs, 5).features.values);
}

TEST(BuildProfileTest, FirstComponentVarianceEqualsEnergy) {
    std::mt19937_64 gen(49);
    const PcStack pcs = random_stack(gen, 2, 24, 24);
    const FilterSet fs = design_filter_set(pcs.planes[0], 5, FilterSelection{6});
    const auto prof = build_profile(pcs, fs);
    for (Eigen::Index q = 0; q < 6; ++q) {
        const auto col = prof.features.values.col(q);
        const double var = (col.array() - col.mean()).square().sum() / static_cast<double>(col.size() - 1);
        EXPECT_NEAR(var, fs.energies[q], 1e-6 * fs.energies[q]);
    }
}

TEST(BuildProfileTest, RejectsEmptyInputs) {
    std::mt19937_64 gen(50);
    EXPECT_THROW(build_profile(PcStack{4, 4, {}}, random_filter_set(gen, 3, 1)), Error);
    FilterSet empty{3, Eigen::MatrixXd(9, 0), Eigen::VectorXd(0)};
    EXPECT_THROW(build_profile(random_stack(gen, 1, 4, 4), empty), Error);
}

TEST(ScalingTest, MapsTrainingRangeToUnitInterval) {
    FeatureMatrix fm{1, 4, RowMatrix(4, 2)};
    fm.values << 0, 5, 10, 5, 20, 5, 5, 5;
    const std::vector<std::size_t> train = {0, 1};
    const ScaledFeatures s = fit_feature_scaling(fm, train);
    EXPECT_EQ(s.features.values(0, 0), -1.0);
    EXPECT_EQ(s.features.values(1, 0), 1.0);
    EXPECT_EQ(s.features.values(2, 0), 3.0);  // outside the training range
    EXPECT_EQ(s.features.values(3, 0), 0.0);
    for (Eigen::Index i = 0; i < 4; ++i) EXPECT_EQ(s.features.values(i, 1), 0.0);  // constant feature
}

TEST(ScalingTest, TrainingValuesStayInRange) {
    std::mt19937_64 gen(51);
    std::normal_distribution<double> nd;
    FeatureMatrix fm{10, 10, RowMatrix::NullaryExpr(100, 7, [&] { return nd(gen); })};
    std::vector<std::size_t> train;
    for (std::size_t i = 0; i < 100; i += 3) train.push_back(i);
    const ScaledFeatures s = fit_feature_scaling(fm, train);
    for (std::size_t i : train) {
        EXPECT_LE(s.features.values.row(static_cast<Eigen::Index>(i)).maxCoeff(), 1.0);
        EXPECT_GE(s.features.values.row(static_cast<Eigen::Index>(i)).minCoeff(), -1.0);
    }
    EXPECT_THROW(fit_feature_scaling(fm, std::vector<std::size_t>{}), Error);
}

TEST(ProfileFileTest, RoundTrip) {
    TempDir dir;
    std::mt19937_64 gen(52);
    std::normal_distribution<double> nd;
    FeatureMatrix fm{3, 5, RowMatrix::NullaryExpr(15, 4, [&] { return nd(gen); })};
    write_profile(fm, dir / "p.bin");
    EXPECT_EQ(std::filesystem::file_size(dir / "p.bin"), 24u + 15u * 4u * 8u);
    const FeatureMatrix back = read_profile(dir / "p.bin");
    EXPECT_EQ(back.rows, 3u);
    EXPECT_EQ(back.cols, 5u);
    EXPECT_EQ(back.values, fm.values);
}

TEST(ConcatenateTest, AppendsColumns) {
    FeatureMatrix a{1, 2, RowMatrix(2, 1)}, b{1, 2, RowMatrix(2, 2)};
    a.values << 1, 2;
    b.values << 3, 4, 5, 6;
    const FeatureMatrix c = concatenate(a, b);
    RowMatrix want(2, 3);
    want << 1, 3, 4, 2, 5, 6;
    EXPECT_EQ(c.values, want);
    EXPECT_THROW(concatenate(a, FeatureMatrix{2, 1, RowMatrix(2, 1)}), Error);
}

}  // namespace
}  // namespace hsi

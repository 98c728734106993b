#include "hsi/evaluation.hpp"

#include <gtest/gtest.h>

#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace hsi {
namespace {

// Collects warnings for the lifetime of the object.
class WarningCapture {
public:
    WarningCapture() {
        previous_ = set_warning_handler([this](std::string_view module, std::string_view msg) {
            messages.push_back(std::string(module) + ": " + std::string(msg));
        });
    }
    ~WarningCapture() { set_warning_handler(previous_); }
    bool contains(const std::string &needle) const {
        for (const auto &m : messages)
            if (m.find(needle) != std::string::npos) return true;
        return false;
    }
    std::vector<std::string> messages;

private:
    WarningHandler previous_;
};

// Indian Pines ground-truth class sizes, in table order.
const std::vector<std::size_t> kIndianPinesCounts = {46,  1428, 830, 237, 483, 730,  28,  478,
                                                      20,  972,  2455, 593, 205, 1265, 386, 93};

LabelMap label_map_with_counts(const std::vector<std::size_t> &counts, std::size_t background, std::uint64_t shuffle_seed) {
    std::vector<int> labels;
    for (std::size_t c = 0; c < counts.size(); ++c) labels.insert(labels.end(), counts[c], static_cast<int>(c) + 1);
    labels.insert(labels.end(), background, 0);
    std::mt19937_64 gen(shuffle_seed);
    std::shuffle(labels.begin(), labels.end(), gen);
    return LabelMap(1, labels.size(), labels, static_cast<int>(counts.size()));
}

TEST(RandomTest, SplitMixKnownAnswers) {
    SplitMix64 sm(1234567);
    EXPECT_EQ(sm.next(), 6457827717110365317ULL);
    EXPECT_EQ(sm.next(), 3203168211198807973ULL);
    EXPECT_EQ(sm.next(), 9817491932198370423ULL);
}

TEST(RandomTest, XoshiroFirstOutputFollowsDefinition) {
    SplitMix64 sm(42);
    sm.next();
    const std::uint64_t s1 = sm.next();
    const std::uint64_t t = s1 * 5;
    Xoshiro256 rng(42);
    EXPECT_EQ(rng(), ((t << 7) | (t >> 57)) * 9);
}

TEST(RandomTest, BoundedAndUniformRanges) {
    Xoshiro256 rng(7);
    std::vector<int> hist(5, 0);
    for (int i = 0; i < 5000; ++i) {
        const auto v = rng.bounded(5);
        ASSERT_LT(v, 5u);
        ++hist[v];
        const double u = rng.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
    }
    for (int h : hist) EXPECT_NEAR(h, 1000, 150);
}

TEST(TrainingCountTest, MinimumAndRounding) {
    SamplingScheme one{0.01, 3, 0}, five{0.05, 3, 0};
    EXPECT_EQ(training_count(20, one), 3u);      // Oats
    EXPECT_EQ(training_count(1428, five), 71u);  // 71.4
    EXPECT_EQ(training_count(2455, one), 25u);   // 24.55 rounds up
    EXPECT_EQ(training_count(50, SamplingScheme{0.05, 3, 0}), 3u);  // 2.5 rounds to 3
    EXPECT_EQ(training_count(90, SamplingScheme{0.05, 3, 0}), 5u);  // 4.5 rounds away from zero
    EXPECT_EQ(training_count(2, one), 2u);
    EXPECT_EQ(training_count(40, SamplingScheme{1.0, 3, 0}), 40u);
}

TEST(TrainingCountTest, IndianPinesTotals) {
    EXPECT_EQ(std::accumulate(kIndianPinesCounts.begin(), kIndianPinesCounts.end(), std::size_t{0}), 10249u);
    std::size_t total = 0;
    for (std::size_t n : kIndianPinesCounts) total += training_count(n, SamplingScheme{0.10, 3, 0});
    // hand rounding of each class: 5+143+83+24+48+73+3+48+3+97+246+59+21+127+39+9
    EXPECT_EQ(total, 1028u);
}

TEST(SamplingTest, StratifiedDisjointAndComplete) {
    const LabelMap labels = label_map_with_counts(kIndianPinesCounts, 500, 3);
    for (double p : {0.01, 0.05, 0.10, 0.125}) {
        const SamplingScheme scheme{p, 3, 11};
        const auto split = draw_training_set(labels, scheme);
        EXPECT_TRUE(std::is_sorted(split.train.begin(), split.train.end()));
        EXPECT_TRUE(std::is_sorted(split.test.begin(), split.test.end()));
        std::vector<std::size_t> per_class(17, 0);
        for (std::size_t i : split.train) ++per_class[static_cast<std::size_t>(labels[i])];
        EXPECT_EQ(per_class[0], 0u);
        for (std::size_t c = 0; c < 16; ++c) EXPECT_EQ(per_class[c + 1], training_count(kIndianPinesCounts[c], scheme));
        std::vector<std::size_t> all;
        std::set_union(split.train.begin(), split.train.end(), split.test.begin(), split.test.end(), std::back_inserter(all));
        EXPECT_EQ(all.size(), split.train.size() + split.test.size());
        EXPECT_EQ(all.size(), labels.labeled_count());
        for (std::size_t i : all) EXPECT_NE(labels[i], 0);
    }
}

TEST(SamplingTest, SameSeedSameDraw) {
    const LabelMap labels = label_map_with_counts({30, 40, 50}, 10, 4);
    const auto a = draw_training_set(labels, {0.2, 3, 99});
    const auto b = draw_training_set(labels, {0.2, 3, 99});
    const auto c = draw_training_set(labels, {0.2, 3, 100});
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.test, b.test);
    EXPECT_NE(a.train, c.train);
}

TEST(SamplingTest, DrawIsRoughlyUniform) {
    // every pixel of a 20-pixel class is picked about 5/20 of the time
    const LabelMap labels(1, 20, std::vector<int>(20, 1), 1);
    std::vector<int> hits(20, 0);
    for (std::uint64_t s = 0; s < 4000; ++s)
        for (std::size_t i : draw_training_set(labels, {0.25, 3, s}).train) ++hits[i];
    for (int h : hits) EXPECT_NEAR(h, 1000, 120);
}

TEST(SamplingTest, FullProportionLeavesNoTestPixels) {
    const LabelMap labels = label_map_with_counts({5, 7}, 3, 5);
    const auto split = draw_training_set(labels, {1.0, 3, 0});
    EXPECT_EQ(split.train.size(), 12u);
    EXPECT_TRUE(split.test.empty());
    const ConfusionMatrix cm = confusion(labels, labels, split.test, {1, 2});
    EXPECT_EQ(cm.total(), 0u);
}

TEST(SamplingTest, SmallClassWarnsAndErrors) {
    WarningCapture capture;
    const auto split = draw_training_set(label_map_with_counts({2, 10}, 0, 6), {0.1, 3, 0});
    EXPECT_EQ(split.train.size(), 5u);
    EXPECT_TRUE(capture.contains("class 1 has only 2"));
    EXPECT_THROW(draw_training_set(LabelMap(1, 4, {1, 1, 3, 3}, 3), {0.1, 3, 0}), Error);  // class 2 empty
    EXPECT_THROW(draw_training_set(LabelMap(1, 2, {1, 1}, 1), {0.0, 3, 0}), Error);
    EXPECT_THROW(draw_training_set(LabelMap(1, 2, {1, 1}, 1), {1.5, 3, 0}), Error);
}

TEST(ConfusionTest, Tally) {
    const LabelMap truth(1, 6, {1, 1, 1, 2, 2, 2}, 2);
    const LabelMap pred(1, 6, {1, 1, 2, 2, 1, 2}, 2);
    const std::vector<std::size_t> test = {0, 1, 2, 3, 4, 5};
    const ConfusionMatrix cm = confusion(pred, truth, test, {1, 2});
    EXPECT_EQ(cm.at(0, 0), 2u);
    EXPECT_EQ(cm.at(0, 1), 1u);
    EXPECT_EQ(cm.at(1, 0), 1u);
    EXPECT_EQ(cm.at(1, 1), 2u);
    EXPECT_EQ(confusion(truth, truth, test, {1, 2}).trace(), 6u);
    EXPECT_THROW(confusion(pred, truth, test, {1}), Error);
}

TEST(MetricsTest, HandWorkedTwoClass) {
    const ConfusionMatrix cm({1, 2}, {{2, 1}, {1, 2}});
    EXPECT_NEAR(overall_accuracy(cm), 66.67, 0.005);
    EXPECT_NEAR(average_accuracy(cm), 66.67, 0.005);
    EXPECT_EQ(kappa(cm), 1.0 / 3.0);
}

TEST(MetricsTest, PerfectDiagonal) {
    const ConfusionMatrix cm({1, 2, 3}, {{5, 0, 0}, {0, 7, 0}, {0, 0, 2}});
    EXPECT_EQ(overall_accuracy(cm), 100.0);
    EXPECT_EQ(average_accuracy(cm), 100.0);
    EXPECT_EQ(kappa(cm), 1.0);
}

TEST(MetricsTest, DegenerateChanceAgreement) {
    WarningCapture capture;
    const ConfusionMatrix cm({1, 2}, {{4, 0}, {0, 0}});
    EXPECT_EQ(kappa(cm), 0.0);
    EXPECT_TRUE(capture.contains("kappa set to 0"));
}

TEST(MetricsTest, ClassWithoutTestPixelsLeavesAverage) {
    WarningCapture capture;
    const ConfusionMatrix cm({1, 2, 3}, {{3, 1, 0}, {0, 0, 0}, {0, 0, 2}});
    EXPECT_DOUBLE_EQ(average_accuracy(cm), (75.0 + 100.0) / 2.0);
    EXPECT_TRUE(capture.contains("class 2 has no test pixels"));
    EXPECT_TRUE(std::isnan(class_accuracies(cm)[1]));
}

TEST(MetricsTest, EmptyMatrixIsAnError) {
    const ConfusionMatrix cm({1, 2});
    EXPECT_THROW(overall_accuracy(cm), Error);
    EXPECT_THROW(average_accuracy(cm), Error);
    EXPECT_THROW(kappa(cm), Error);
}

TEST(MetricsTest, RandomMatrixProperties) {
    std::mt19937_64 gen(81);
    std::uniform_int_distribution<int> count(0, 20);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t k = 2 + static_cast<std::size_t>(trial % 5);
        std::vector<int> classes(k);
        std::iota(classes.begin(), classes.end(), 1);
        std::vector<std::vector<std::uint64_t>> rows(k, std::vector<std::uint64_t>(k));
        for (auto &r : rows)
            for (auto &v : r) v = static_cast<std::uint64_t>(count(gen));
        rows[0][0] += 1;
        const ConfusionMatrix cm(classes, rows);
        const double oa = overall_accuracy(cm), kp = kappa(cm);
        EXPECT_GE(oa, 0.0);
        EXPECT_LE(oa, 100.0);
        EXPECT_LE(kp, 1.0);
        // p_o >= p_e exactly when kappa >= 0
        double pe = 0.0;
        for (std::size_t i = 0; i < k; ++i) pe += double(cm.row_sum(i)) * double(cm.col_sum(i));
        pe /= double(cm.total()) * double(cm.total());
        EXPECT_EQ(oa / 100.0 >= pe, kp >= 0.0);
        // simultaneous row/column permutation
        std::vector<std::size_t> perm(k);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), gen);
        std::vector<std::vector<std::uint64_t>> permuted(k, std::vector<std::uint64_t>(k));
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j) permuted[i][j] = rows[perm[i]][perm[j]];
        const ConfusionMatrix pm(classes, permuted);
        EXPECT_EQ(overall_accuracy(pm), oa);
        EXPECT_NEAR(kappa(pm), kp, 1e-12);
    }
}

RunMetrics fake_run(std::uint64_t seed) {
    // a seed-dependent confusion matrix
    Xoshiro256 rng(seed);
    std::vector<std::vector<std::uint64_t>> rows(3, std::vector<std::uint64_t>(3));
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) rows[i][j] = rng.bounded(10) + (i == j ? 20 : 0);
    RunMetrics m = score(ConfusionMatrix({1, 2, 3}, rows));
    m.train_count = 9;
    return m;
}

TEST(MonteCarloTest, SingleRunEqualsThatRun) {
    const MetricsReport r = monte_carlo(fake_run, 1, 5);
    const RunMetrics m = fake_run(5);
    EXPECT_EQ(r.oa, m.oa);
    EXPECT_EQ(r.aa, m.aa);
    EXPECT_EQ(r.kappa, m.kappa);
    EXPECT_EQ(r.oa_std, 0.0);
    EXPECT_EQ(r.per_class_accuracy, m.per_class);
}

TEST(MonteCarloTest, IdenticalRunsHaveZeroSpread) {
    const MetricsReport r = monte_carlo([](std::uint64_t) { return fake_run(3); }, 4, 0);
    EXPECT_EQ(r.oa, fake_run(3).oa);
    EXPECT_EQ(r.oa_std, 0.0);
    EXPECT_EQ(r.kappa_std, 0.0);
}

TEST(MonteCarloTest, DecomposesIntoIndividualRuns) {
    const MetricsReport r = monte_carlo(fake_run, 5, 100, 3);
    double oa = 0.0, aa = 0.0, kp = 0.0;
    std::vector<double> oas;
    for (std::uint64_t s = 100; s < 105; ++s) {
        const RunMetrics m = fake_run(s);
        oa += m.oa, aa += m.aa, kp += m.kappa;
        oas.push_back(m.oa);
    }
    EXPECT_EQ(r.oa, oa / 5.0);
    EXPECT_EQ(r.aa, aa / 5.0);
    EXPECT_EQ(r.kappa, kp / 5.0);
    double ss = 0.0;
    for (double v : oas) ss += (v - r.oa) * (v - r.oa);
    EXPECT_NEAR(r.oa_std, std::sqrt(ss / 4.0), 1e-12);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(r.runs[i].seed, 100 + i);
}

TEST(MonteCarloTest, ThreadCountDoesNotMatter) {
    const MetricsReport a = monte_carlo(fake_run, 7, 1, 1), b = monte_carlo(fake_run, 7, 1, 4);
    EXPECT_EQ(a.oa, b.oa);
    EXPECT_EQ(a.oa_std, b.oa_std);
    EXPECT_EQ(a.per_class_accuracy, b.per_class_accuracy);
}

TEST(MonteCarloTest, FailingRunNamesItsIndex) {
    try {
        monte_carlo(
            [](std::uint64_t seed) -> RunMetrics {
                if (seed == 12) throw Error(ErrorKind::numerical, "svm", "boom");
                return fake_run(seed);
            },
            4, 10);
        FAIL() << "expected an error";
    } catch (const Error &e) {
        EXPECT_NE(std::string(e.what()).find("run 2"), std::string::npos);
        EXPECT_EQ(e.kind(), ErrorKind::numerical);
    }
    EXPECT_THROW(monte_carlo(fake_run, 0, 0), Error);
}

TEST(ReportTest, CsvLayout) {
    const MetricsReport r = monte_carlo(fake_run, 2, 0);
    std::ostringstream out;
    write_metrics_csv(out, r);
    std::istringstream in(out.str());
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    ASSERT_EQ(lines.size(), 5u);
    EXPECT_EQ(lines[0], "run,seed,train_pixels,test_pixels,oa,aa,kappa,class_1,class_2,class_3");
    EXPECT_EQ(lines[1].rfind("0,0,9,", 0), 0u);
    EXPECT_EQ(lines[3].rfind("mean,,,,", 0), 0u);
    EXPECT_EQ(lines[4].rfind("std,,,,", 0), 0u);
    for (const auto &l : lines) EXPECT_EQ(std::count(l.begin(), l.end(), ','), 9);
}

TEST(ReportTest, TableHasSummaryRow) {
    const MetricsReport r = monte_carlo(fake_run, 3, 0);
    std::ostringstream out;
    write_metrics_table(out, r, "Energy profile", 0.05);
    const std::string text = out.str();
    EXPECT_NE(text.find("Training set: 5% per class, 3 Monte Carlo run(s)"), std::string::npos);
    EXPECT_NE(text.find("Energy profile"), std::string::npos);
    char expected[64];
    std::snprintf(expected, sizeof expected, "%8.2f", r.oa);
    EXPECT_NE(text.find(expected), std::string::npos);
}

}  // namespace
}  // namespace hsi

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "softbot/rng.hpp"

using softbot::Rng;

TEST(RngTest, SameStreamSameSequence) {
    Rng a = Rng::stream(5, {1, 2, 3});
    Rng b = Rng::stream(5, {1, 2, 3});
    for (int i = 0; i < 100; ++i) {
        EXPECT_EQ(a.next(), b.next());
    }
}

TEST(RngTest, TagsSeparateStreams) {
    Rng a = Rng::stream(5, {1, 2});
    Rng b = Rng::stream(5, {2, 1});
    Rng c = Rng::stream(6, {1, 2});
    const auto x = a.next();
    EXPECT_NE(x, b.next());
    EXPECT_NE(x, c.next());
}

TEST(RngTest, UniformInUnitInterval) {
    Rng rng(1);
    double sum = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const double u = rng.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        sum += u;
    }
    EXPECT_NEAR(sum / 100000, 0.5, 0.01);
}

TEST(RngTest, IndexIsUnbiased) {
    Rng rng(2);
    std::vector<int> counts(7, 0);
    const int n = 70000;
    for (int i = 0; i < n; ++i) {
        ++counts[rng.index(7)];
    }
    for (int c : counts) {
        EXPECT_NEAR(c, n / 7.0, 400.0);
    }
}

TEST(RngTest, NormalMoments) {
    Rng rng(3);
    double sum = 0.0;
    double sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double v = rng.normal(1.0, 2.0);
        sum += v;
        sq += v * v;
    }
    const double mean = sum / n;
    EXPECT_NEAR(mean, 1.0, 0.02);
    EXPECT_NEAR(std::sqrt(sq / n - mean * mean), 2.0, 0.02);
}

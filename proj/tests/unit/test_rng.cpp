#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "latpoison/rng.hpp"

using latpoison::Rng;

TEST(Rng, SameSeedSameStream) {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) {
        EXPECT_EQ(a.uniform(), b.uniform());
        EXPECT_EQ(a.normal(), b.normal());
    }
}

TEST(Rng, DifferentSeedsDiverge) {
    Rng a(1), b(2);
    EXPECT_NE(a.uniform(), b.uniform());
}

TEST(Rng, UniformInUnitInterval) {
    Rng rng(3);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
    }
}

TEST(Rng, NormalMoments) {
    Rng rng(5);
    const int n = 200000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        s += x;
        s2 += x * x;
    }
    const double mean = s / n;
    EXPECT_NEAR(mean, 0.0, 0.01);
    EXPECT_NEAR(s2 / n - mean * mean, 1.0, 0.01);
}

TEST(Rng, BelowIsInRangeAndCoversAll) {
    Rng rng(9);
    std::vector<int> hits(7, 0);
    for (int i = 0; i < 7000; ++i) {
        const auto k = rng.below(7);
        ASSERT_LT(k, 7u);
        ++hits[k];
    }
    for (int h : hits) {
        EXPECT_GT(h, 850);
        EXPECT_LT(h, 1150);
    }
}

TEST(Rng, BelowOneIsZero) {
    Rng rng(1);
    EXPECT_EQ(rng.below(1), 0u);
}

TEST(Rng, ShuffleIsPermutation) {
    Rng rng(11);
    std::vector<int> v(50);
    std::iota(v.begin(), v.end(), 0);
    rng.shuffle(std::span<int>(v));
    auto sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 50; ++i) {
        EXPECT_EQ(sorted[i], i);
    }
    EXPECT_FALSE(std::is_sorted(v.begin(), v.end()));
}

TEST(Rng, DeriveSeparatesStreams) {
    EXPECT_EQ(Rng::derive(1, 2), Rng::derive(1, 2));
    EXPECT_NE(Rng::derive(1, 2), Rng::derive(1, 3));
    EXPECT_NE(Rng::derive(1, 2), Rng::derive(2, 2));
}

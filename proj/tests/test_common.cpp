#include "securelearn/common.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>

using namespace securelearn;

TEST(Seeds, DeriveSeedIsAPureFunctionOfItsParts) {
    EXPECT_EQ(derive_seed(7, "split", "iris", 3), derive_seed(7, "split", "iris", 3));
    EXPECT_NE(derive_seed(7, "split", "iris", 3), derive_seed(7, "split", "iris", 4));
    EXPECT_NE(derive_seed(7, "split", "iris", 3), derive_seed(8, "split", "iris", 3));
    EXPECT_NE(derive_seed(7, "a", "b"), derive_seed(7, "b", "a"));
}

TEST(Rng, SameSeedSameStream) {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, UniformIndexStaysInRangeAndCoversIt) {
    Rng r(1);
    std::vector<int> hits(7, 0);
    for (int i = 0; i < 7000; ++i) {
        const auto v = r.uniform_index(7);
        ASSERT_LT(v, 7u);
        ++hits[v];
    }
    for (int h : hits) EXPECT_GT(h, 850);
    EXPECT_THROW(r.uniform_index(0), InvalidArgument);
}

TEST(Rng, Uniform01InUnitInterval) {
    Rng r(2);
    double lo = 1.0, hi = 0.0, sum = 0.0;
    for (int i = 0; i < 20000; ++i) {
        const double u = r.uniform01();
        lo = std::min(lo, u);
        hi = std::max(hi, u);
        sum += u;
    }
    EXPECT_GE(lo, 0.0);
    EXPECT_LT(hi, 1.0);
    EXPECT_NEAR(sum / 20000, 0.5, 0.01);
}

TEST(Rng, NormalMoments) {
    Rng r(3);
    double s = 0.0, ss = 0.0;
    const int n = 50000;
    for (int i = 0; i < n; ++i) {
        const double z = r.normal();
        s += z;
        ss += z * z;
    }
    EXPECT_NEAR(s / n, 0.0, 0.02);
    EXPECT_NEAR(ss / n, 1.0, 0.03);
}

TEST(Rng, PermutationAndSampling) {
    Rng r(4);
    auto p = r.permutation(50);
    std::sort(p.begin(), p.end());
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(p[i], i);

    const auto s = r.sample_without_replacement(20, 20);
    EXPECT_EQ(std::set<Index>(s.begin(), s.end()).size(), 20u);
    EXPECT_THROW(r.sample_without_replacement(3, 4), InvalidArgument);
}

TEST(Helpers, RoundHalfUp) {
    EXPECT_EQ(round_half_up(0.75, 150), 113u);
    EXPECT_EQ(round_half_up(0.10, 100), 10u);
    EXPECT_EQ(round_half_up(0.15, 113), 17u);
    EXPECT_EQ(round_half_up(0.5, 3), 2u);
    EXPECT_EQ(round_half_up(0.1, 4), 0u);
}

TEST(Helpers, ArgmaxTiesGoToSmallestIndex) {
    EXPECT_EQ(argmax_first(std::vector<int>{1, 3, 3, 2}), 1u);
    EXPECT_EQ(argmax_first(std::vector<double>{-5, -5}), 0u);
    EXPECT_EQ(argmax_first(std::vector<double>{0, 0, 0.1}), 2u);
}

TEST(Helpers, Hex64) {
    EXPECT_EQ(hex64(0), "0000000000000000");
    EXPECT_EQ(hex64(0xdeadbeefULL), "00000000deadbeef");
}

#include "fedaq/param_vector.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "fedaq/rng.hpp"

using namespace fedaq;

namespace {

ParamVector random_vector(SplitMix64& rng, std::size_t d, double scale) {
    std::vector<double> v(d);
    for (double& x : v) x = scale * (2.0 * rng.next_unit() - 1.0);
    return ParamVector(std::move(v));
}

}  // namespace

TEST(RangeOf, BasicMinMax) {
    const RangeStat rs = range_of(ParamVector({1.0, -2.0, 3.0}));
    EXPECT_EQ(rs.min, -2.0);
    EXPECT_EQ(rs.max, 3.0);
    EXPECT_EQ(rs.range, 5.0);
}

TEST(RangeOf, Singleton) {
    const RangeStat rs = range_of(ParamVector({7.0}));
    EXPECT_EQ(rs.min, 7.0);
    EXPECT_EQ(rs.max, 7.0);
    EXPECT_EQ(rs.range, 0.0);
}

TEST(RangeOf, ConstantVector) {
    EXPECT_EQ(range_of(ParamVector({0.25, 0.25, 0.25})).range, 0.0);
}

TEST(RangeOf, EmptyVectorRejected) {
    EXPECT_THROW(ParamVector(std::vector<double>{}), std::invalid_argument);
}

TEST(RangeOf, OverflowingRangeRejected) {
    const double huge = std::numeric_limits<double>::max();
    EXPECT_THROW(range_of(ParamVector({-huge, huge})), NumericError);
}

TEST(RangeOf, TranslationCovariant) {
    // Dyadic entries and shifts keep every addition exact, so the ranges
    // must agree bit for bit.
    SplitMix64 rng(11);
    const double grid = 0x1.0p-20;
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> values(1 + rep % 17);
        for (double& x : values) {
            x = grid * static_cast<double>(static_cast<std::int64_t>(rng.next_below(1 << 22)) -
                                           (1 << 21));
        }
        const ParamVector v(values);
        const double c =
            grid * static_cast<double>(static_cast<std::int64_t>(rng.next_below(1 << 22)) -
                                       (1 << 21));
        std::vector<double> shifted = v.values();
        for (double& x : shifted) x += c;
        EXPECT_EQ(range_of(ParamVector(shifted)).range, range_of(v).range);
    }
}

TEST(Combine, Subtraction) {
    const ParamVector out = combine(ParamVector({1, 2}), ParamVector({3, 4}), 1.0, -1.0);
    EXPECT_EQ(out.values(), (std::vector<double>{-2, -2}));
}

TEST(Combine, Identity) {
    const ParamVector out = combine(ParamVector({1, 1}), ParamVector({2, 2}), 1.0, 0.0);
    EXPECT_EQ(out.values(), (std::vector<double>{1, 1}));
}

TEST(Combine, SgdStepShape) {
    const ParamVector out = combine(ParamVector({0, 0}), ParamVector({1, -1}), 1.0, -0.01);
    EXPECT_DOUBLE_EQ(out[0], -0.01);
    EXPECT_DOUBLE_EQ(out[1], 0.01);
}

TEST(Combine, LengthMismatch) {
    EXPECT_THROW(combine(ParamVector({1}), ParamVector({1, 2}), 1, 1), std::invalid_argument);
}

TEST(Combine, NonFiniteResult) {
    const double huge = std::numeric_limits<double>::max();
    EXPECT_THROW(combine(ParamVector({huge}), ParamVector({huge}), 1.0, 1.0), NumericError);
}

TEST(Combine, NonFiniteInputRejectedAtConstruction) {
    EXPECT_THROW(ParamVector({1.0, std::nan("")}), NumericError);
    EXPECT_THROW(ParamVector({std::numeric_limits<double>::infinity()}), NumericError);
}

TEST(Combine, Bilinear) {
    SplitMix64 rng(23);
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t d = 1 + rep % 9;
        const ParamVector a = random_vector(rng, d, 3.0);
        const ParamVector b = random_vector(rng, d, 3.0);
        const double ca = rng.next_unit();
        const double cb = rng.next_unit();
        const double cc = rng.next_unit();
        const double cd = rng.next_unit();
        const ParamVector lhs =
            combine(combine(a, b, ca, cb), combine(a, b, cc, cd), 1.0, 1.0);
        const ParamVector rhs = combine(a, b, ca + cc, cb + cd);
        for (std::size_t j = 0; j < d; ++j) {
            EXPECT_NEAR(lhs[j], rhs[j], 1e-12 * (1.0 + std::abs(rhs[j])));
        }
    }
}

TEST(L2NormSq, Examples) {
    EXPECT_EQ(l2_norm_sq(ParamVector({3, 4})), 25.0);
    EXPECT_EQ(l2_norm_sq(ParamVector({0, 0, 0})), 0.0);
    EXPECT_EQ(l2_norm_sq(ParamVector({1, 1, 1, 1})), 4.0);
}

TEST(L2NormSq, SelfDifferenceIsZero) {
    SplitMix64 rng(31);
    for (int rep = 0; rep < 20; ++rep) {
        const ParamVector a = random_vector(rng, 1 + rep, 100.0);
        EXPECT_EQ(l2_norm_sq(combine(a, a, 1.0, -1.0)), 0.0);
    }
}

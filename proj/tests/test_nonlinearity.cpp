#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "largesol/errors.hpp"
#include "largesol/nonlinearity.hpp"

using namespace largesol;

TEST(Eval, PowerAndExpClosedForms) {
    EXPECT_DOUBLE_EQ(Nonlinearity::power(3)(2.0), 8.0);
    EXPECT_DOUBLE_EQ(Nonlinearity::power(3)(-2.0), -8.0);
    EXPECT_DOUBLE_EQ(Nonlinearity::exp(1)(0.0), 0.0);
    EXPECT_DOUBLE_EQ(Nonlinearity::power(3, 1.5)(0.0), 1.5);
}

TEST(Eval, CustomTableRefusesExtrapolation) {
    auto g = Nonlinearity::custom({-1, 0, 1}, {0, 0, 5});
    EXPECT_DOUBLE_EQ(g(0.5), 2.5);
    EXPECT_THROW(g(1.5), ExtrapolationError);
    EXPECT_THROW(Nonlinearity::custom({0, 1}, {2, 1}), InvalidArgument);
    EXPECT_THROW(Nonlinearity::power(1.0), InvalidArgument);
}

TEST(Eval, MonotoneOnSampledGrid) {
    for (const auto& g : {Nonlinearity::power(3), Nonlinearity::exp(2), Nonlinearity::power_log(0.5),
                          Nonlinearity::linear(), Nonlinearity::power(2, 1.0)}) {
        double prev = g(-20.0);
        for (int i = 1; i <= 4000; ++i) {
            double v = g(-20.0 + i * 0.01);
            EXPECT_LE(prev, v) << g.describe();
            prev = v;
        }
    }
}

TEST(Primitive, ClosedForms) {
    EXPECT_NEAR(Nonlinearity::power(3).primitive(1.0), 0.25, 1e-15);
    EXPECT_NEAR(Nonlinearity::exp(1).primitive(1.0), std::exp(1.0) - 2.0, 1e-14);
    EXPECT_EQ(Nonlinearity::power_log(1.0).primitive(0.0), 0.0);
    EXPECT_EQ(Nonlinearity::linear().primitive(0.0), 0.0);
    // t ln(t+1) integrates to ((t^2-1) ln(t+1))/2 - t^2/4 + t/2
    double t = 3.0;
    double exact = 0.5 * (t * t - 1.0) * std::log(t + 1.0) - t * t / 4.0 + t / 2.0;
    EXPECT_NEAR(Nonlinearity::power_log(1.0).primitive(t), exact, 1e-10);
}

TEST(Primitive, DerivativeMatchesG) {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> pick(0.05, 5.0);
    for (const auto& g : {Nonlinearity::power(3), Nonlinearity::exp(1), Nonlinearity::power_log(0.7, 0.5),
                          Nonlinearity::custom({0, 1, 2, 6}, {0, 1, 4, 9})}) {
        for (int i = 0; i < 100; ++i) {
            double t = pick(rng);
            double step = 1e-5 * std::max(1.0, t);
            double num = (g.primitive(t + step) - g.primitive(t - step)) / (2.0 * step);
            EXPECT_NEAR(num, g(t), 1e-6 * std::max(1.0, std::abs(g(t)))) << g.describe() << " t=" << t;
        }
    }
}

TEST(Ko, PowerClosedForm) {
    for (double q : {2.0, 3.0, 5.0}) {
        for (double a : {0.5, 1.0, 2.0}) {
            double exact = std::sqrt(q + 1.0) * (2.0 / (q - 1.0)) * std::pow(a, (1.0 - q) / 2.0);
            KoResult r = ko_integral(Nonlinearity::power(q), a);
            ASSERT_TRUE(r.converges);
            EXPECT_NEAR(r.value, exact, 1e-6 * exact) << "q=" << q << " a=" << a;
        }
    }
    EXPECT_NEAR(ko_integral(Nonlinearity::power(3), 1.0).value, 2.0, 2e-6);
}

TEST(Ko, ExponentialNearZeroBase) {
    // g(t) = e^t, so G = e^t - 1 and the integral from a is pi - 2 atan(sqrt(e^a - 1)).
    auto g = Nonlinearity::exp(1.0, 1.0);
    for (double a : {1e-8, 1e-12}) {
        double exact = M_PI - 2.0 * std::atan(std::sqrt(std::expm1(a)));
        KoResult r = ko_integral(g, a);
        ASSERT_TRUE(r.converges);
        EXPECT_NEAR(r.value, exact, 1e-6 * exact);
    }
    EXPECT_NEAR(ko_integral(g, 1e-12).value, M_PI, 1e-4);
}

TEST(Ko, LinearDiverges) {
    KoResult r = ko_integral(Nonlinearity::linear(), 1.0);
    EXPECT_FALSE(r.converges);
    EXPECT_TRUE(std::isinf(r.value));
}

TEST(Ko, InvalidBase) {
    EXPECT_THROW(ko_integral(Nonlinearity::power(3), 0.0), InvalidArgument);
    EXPECT_THROW(ko_integral(Nonlinearity::custom({0, 1, 2}, {0, 0, 1}), 1.0), InvalidArgument);
}

TEST(Analyze, PowerCubic) {
    NonlinearityReport r = analyze(Nonlinearity::power(3));
    EXPECT_TRUE(r.convex);
    EXPECT_TRUE(r.ko_holds);
    EXPECT_NEAR(r.ko_value, 2.0, 1e-6);
    ASSERT_TRUE(r.power_like_c.has_value());
    EXPECT_LE(*r.power_like_c, 4.0 + 1e-12);
    EXPECT_GE(*r.power_like_c, 3.9);
    ASSERT_TRUE(r.superadditive_L.has_value());
    EXPECT_LE(*r.superadditive_L, 1e-12);
}

TEST(Analyze, LinearFailsKo) {
    NonlinearityReport r = analyze(Nonlinearity::linear());
    EXPECT_FALSE(r.ko_holds);
    EXPECT_TRUE(std::isinf(r.ko_value));
}

TEST(Analyze, ConcaveTableIsNotConvex) {
    auto g = Nonlinearity::custom({0, 1, 2, 3}, {0, 2, 3, 3.5});
    NonlinearityReport r = analyze(g, 0.0, 3.0, 31);
    EXPECT_FALSE(r.convex);
    EXPECT_FALSE(r.ko_holds);
}

TEST(Tilde, OddFamiliesAreFixed) {
    auto g = Nonlinearity::power(3);
    auto t = tilde(g);
    EXPECT_EQ(t.family(), Family::Power);
    EXPECT_EQ(t.parameter(), 3.0);
    EXPECT_EQ(tilde(Nonlinearity::exp(1)).family(), Family::Exp);
    EXPECT_THROW(tilde(Nonlinearity::power(3, 1.0)), UnsupportedError);
}

TEST(Tilde, CustomTableReflects) {
    auto t = tilde(Nonlinearity::custom({-1, 0, 1}, {0, 0, 5}));
    EXPECT_DOUBLE_EQ(t(-1.0), -5.0);
    EXPECT_DOUBLE_EQ(t(0.0), 0.0);
    EXPECT_DOUBLE_EQ(t(1.0), 0.0);
}

TEST(Tilde, Involution) {
    auto g = Nonlinearity::custom({-2, -1, 0, 1, 3}, {-7, -1, 0, 0.5, 4});
    auto gg = tilde(tilde(g));
    for (int i = 0; i <= 100; ++i) {
        double s = -2.0 + i * 0.05;
        EXPECT_EQ(gg(s), g(s));
    }
    auto p = Nonlinearity::power_log(1.3);
    for (int i = 0; i <= 100; ++i) EXPECT_EQ(tilde(tilde(p))(-5.0 + 0.1 * i), p(-5.0 + 0.1 * i));
}

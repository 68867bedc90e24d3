#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "largesol/errors.hpp"
#include "largesol/radial.hpp"

using namespace largesol;

TEST(RadialLarge, CubicHalfLineIsExact) {
    RadialProblem p;
    p.geometry = HalfLine{10.0, std::sqrt(2.0) / 10.0};
    RadialProfile u = radial_large_solution(p);
    for (double x = 0.1; x <= 10.0; x *= 1.25) EXPECT_NEAR(u(x), std::sqrt(2.0) / x, 1e-6 * std::sqrt(2.0) / x);
    EXPECT_LE(u.ode_residual(p, 0.1, 10.0), 1e-8);
}

TEST(RadialLarge, ExpHalfLineIsExact) {
    RadialProblem p;
    p.g = Nonlinearity::exp(1.0, 1.0);  // e^u
    p.geometry = HalfLine{1.0, std::log(2.0)};
    RadialProfile u = radial_large_solution(p);
    for (double x = 0.1; x <= 1.0; x += 0.05) EXPECT_NEAR(u(x), std::log(2.0 / (x * x)), 1e-6);
}

TEST(RadialLarge, IntervalCenterByTwoParameterizations) {
    RadialProblem p;
    p.geometry = Ball{0.5, 0.0};
    const double shooting = radial_large_solution(p)(0.0);
    const double energy = segment_center_by_energy(p.g, 0.5);
    EXPECT_NEAR(shooting, energy, 1e-8);
    EXPECT_NEAR(energy, 3.708149354602743, 1e-9);
}

TEST(RadialLarge, DiskCenterAndBlowupRadius) {
    RadialProblem p;
    p.N = 2;
    p.geometry = Ball{1.0, 0.0};
    RadialProfile u = radial_large_solution(p);
    EXPECT_NEAR(u.blowup_radius, 1.0, 1e-8);
    EXPECT_GT(u(0.9), u(0.5));
    EXPECT_LE(u.ode_residual(p, 0.0, 0.99), 1e-8);
}

TEST(RadialLarge, LargerCenterBlowsUpSooner) {
    RadialProblem p;
    p.N = 2;
    p.geometry = Ball{1.0, 0.0};
    const double c1 = radial_large_solution(p)(0.0);
    p.geometry = Ball{0.5, 0.0};
    const double c2 = radial_large_solution(p)(0.0);
    EXPECT_GT(c2, c1);
}

TEST(RadialLarge, ExteriorDecays) {
    RadialProblem p;
    p.N = 2;
    p.geometry = Exterior{1.0, 6.0, 0.0};
    RadialProfile u = radial_large_solution(p);
    EXPECT_GT(u(1.5), u(3.0));
    EXPECT_GT(u(3.0), 0.0);
    EXPECT_NEAR(u(6.0), 0.0, 1e-9);
}

TEST(RadialLarge, LinearRefused) {
    RadialProblem p;
    p.g = Nonlinearity::linear();
    EXPECT_THROW(radial_large_solution(p), KoViolation);
}

TEST(RadialDirichlet, ConstantSolution) {
    RadialProblem p;
    p.N = 2;
    p.f = [](double) { return 1.0; };
    p.geometry = Ball{1.0, 1.0};
    RadialProfile u = radial_dirichlet(p);
    for (double r = 0.0; r <= 1.0; r += 0.1) EXPECT_NEAR(u(r), 1.0, 1e-10);
}

TEST(RadialDirichlet, SegmentReproducesCubicProfile) {
    const double eps = 0.05;
    RadialProblem p;
    p.geometry = Segment{eps, 1.0, std::sqrt(2.0) / eps, std::sqrt(2.0)};
    RadialProfile u = radial_dirichlet(p);
    for (double x = eps; x <= 1.0; x += 0.05) EXPECT_NEAR(u(x), std::sqrt(2.0) / x, 1e-6 * std::sqrt(2.0) / x);
}

TEST(RadialDirichlet, IncreasesInBoundaryValueAndSaturates) {
    RadialProblem p;
    p.N = 2;
    double prev = 0.0, prev_step = INFINITY;
    for (double m : {4.0, 8.0, 16.0}) {
        p.geometry = Ball{1.0, m};
        const double c = radial_dirichlet(p)(0.0);
        EXPECT_GT(c, prev);
        if (prev > 0.0) {
            EXPECT_LT(c - prev, prev_step);
            prev_step = c - prev;
        }
        prev = c;
    }
    p.geometry = Ball{1.0, 0.0};
    EXPECT_LT(prev, radial_large_solution(p)(0.0));
}

TEST(RadialProfile, CsvHeaderAndRows) {
    RadialProblem p;
    p.geometry = HalfLine{1.0, std::sqrt(2.0)};
    RadialProfile u = radial_large_solution(p);
    std::ostringstream os;
    u.write_csv(os, {0.5, 1.0});
    const std::string csv = os.str();
    EXPECT_EQ(csv.substr(0, 4), "r,u\n");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

TEST(ExactSolution, Values) {
    EXPECT_NEAR(exact_solution("cubic_halfline").u(1.0), 1.41421356237, 1e-10);
    EXPECT_NEAR(exact_solution("exp_halfline").u(1.0), 0.69314718056, 1e-10);
    EXPECT_DOUBLE_EQ(exact_solution("quadratic_poisson").u(0.5), 0.25);
    EXPECT_DOUBLE_EQ(exact_solution("harmonic_linear").du(0.3), 1.0);
    EXPECT_THROW(exact_solution("nope"), InvalidArgument);
}

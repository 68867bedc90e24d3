#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "largesol/ladders.hpp"

using namespace largesol;

namespace {

const Nonlinearity kCubic = Nonlinearity::power(3.0);

// Center value of the 1D large solution of u'' = u^3 on (0, 1), from the
// energy identity 1/2 = int_c^inf dt / sqrt((t^4 - c^4) / 2) (mpmath, 30 digits).
constexpr double kIntervalCenter = 3.708149354602743;

double max_gap(const Field& a, const Field& b) {
    double worst = 0.0;
    for (std::size_t k : a.grid().active()) worst = std::max(worst, std::abs(a[k] - b[k]));
    return worst;
}

}  // namespace

TEST(MCeiling, MatchesOneDimensionalProfile) {
    // For u^3 the 1D profile is sqrt(2)/x, so psi(h) = sqrt(2)/h.
    const double h = 1.0 / 64.0;
    const double c = m_ceiling(kCubic, h);
    EXPECT_GE(c, std::sqrt(2.0) / h * (1 - 1e-9));
    EXPECT_LT(c, 2.0 * std::sqrt(2.0) / h);
    EXPECT_EQ(std::exp2(std::round(std::log2(c))), c);
}

TEST(Maximal, IntervalMatchesOracleCenter) {
    DomainPtr d = build_domain(Shape::interval(0, 1), std::ldexp(1.0, -10));
    LadderResult r = maximal_solution(d, kCubic, Field(d, 0.0), Field(d, 0.0));
    EXPECT_NEAR(r.u.at({0.5, 0}), kIntervalCenter, 0.02 * kIntervalCenter);
    EXPECT_TRUE(r.trace.saturated);
    EXPECT_TRUE(r.trace.monotone_ok());
}

TEST(Maximal, IncreasesWithForcing) {
    DomainPtr d = build_domain(Shape::disk(0, 0, 1), 0.125);
    LadderResult u0 = maximal_solution(d, kCubic, Field(d, 0.0), Field(d, 0.0));
    LadderResult u1 = maximal_solution(d, kCubic, Field(d, 1.0), Field(d, 0.0));
    EXPECT_TRUE(check_comparison(u0.u, u1.u).leq);
}

TEST(Maximal, SandwichHoldsAtEveryLevel) {
    DomainPtr d = build_domain(Shape::disk(0, 0, 1), 0.0625);
    LadderOptions o;
    o.sandwich = true;
    LadderResult r = maximal_solution(d, kCubic, Field(d, 1.0), Field(d, 0.0), o);
    EXPECT_GT(r.trace.sandwich_checks, 0);
    EXPECT_EQ(r.trace.sandwich_failures, 0);
}

TEST(Maximal, RefusesLinear) {
    DomainPtr d = build_domain(Shape::interval(0, 1), 0.125);
    EXPECT_THROW(maximal_solution(d, Nonlinearity::linear(), Field(d, 0.0), Field(d, 0.0)), KoViolation);
}

TEST(MinimalAbove, ZeroForcingGivesZero) {
    DomainPtr d = build_domain(Shape::disk(0, 0, 1), 0.125);
    LadderResult r = minimal_solution_above(d, kCubic, Field(d, 0.0), Field(d, 0.0));
    EXPECT_LE(r.u.max_abs_active(), 1e-12);
}

TEST(MinimalAbove, UnitForcingStaysInUnitBand) {
    DomainPtr d = build_domain(Shape::disk(0, 0, 1), 0.0625);
    LadderResult r = minimal_solution_above(d, kCubic, Field(d, 1.0), Field(d, 0.0));
    EXPECT_GE(r.u.min_active(), 0.0);
    EXPECT_LE(r.u.max_active(), 1.0);
    EXPECT_TRUE(r.trace.monotone_ok());
    EXPECT_GT(r.trace.monotone.at("n_up").checks, 0);
}

TEST(MinimalAbove, MonotoneInForcing) {
    DomainPtr d = build_domain(Shape::disk(0, 0, 1), 0.0625);
    LadderResult a = minimal_solution_above(d, kCubic, Field(d, 0.5), Field(d, 0.0));
    LadderResult b = minimal_solution_above(d, kCubic, Field(d, 2.0), Field(d, 0.0));
    EXPECT_TRUE(check_comparison(a.u, b.u).leq);
}

TEST(MinimalLarge, IntervalAgreesWithMaximal) {
    DomainPtr d = build_domain(Shape::interval(0, 1), std::ldexp(1.0, -8));
    LadderResult lo = minimal_large_solution(d, kCubic, Field(d, 0.0));
    LadderResult hi = maximal_solution(d, kCubic, Field(d, 0.0), Field(d, 0.0));
    EXPECT_TRUE(check_comparison(lo.u, hi.u, lo.trace.probe.get(), 1e-10).leq);
    EXPECT_LE(max_gap(lo.u, hi.u), 1e-4 * hi.u.max_active());
    EXPECT_TRUE(lo.trace.monotone_ok());
}

TEST(MinimalLargeGeneral, BoundedDomainMatchesBoundedLadder) {
    const Shape s = Shape::interval(0, 1);
    const double h = std::ldexp(1.0, -7);
    DomainPtr d = build_domain(s, h);
    LadderResult a = minimal_large_solution(d, kCubic, Field(d, 0.0));
    LadderResult b = minimal_large_solution_general(s, h, kCubic, Forcing::constant(0.0), std::nullopt);
    EXPECT_NEAR(a.u.at({0.5, 0}), b.u.at({0.5, 0}), 1e-4 * a.u.at({0.5, 0}));
}

TEST(MinimalLargeGeneral, ExteriorDecaysAwayFromHole) {
    LadderOptions o;
    o.max_box_levels = 1;
    LadderResult r = minimal_large_solution_general(Shape::exterior(0, 0, 0.5, 2), 0.125, kCubic,
                                                    Forcing::constant(0.0), std::nullopt, o);
    EXPECT_GE(r.u.min_active(), 0.0);
    EXPECT_GT(r.u.at({0.75, 0}), r.u.at({1.5, 0}));
    EXPECT_NEAR(r.u.at({0.75, 0}), r.u.at({0, 0.75}), 1e-9);
}

TEST(Bvp, ZeroDataStaysZero) {
    DomainPtr d = build_domain(Shape::interval(0, 1), std::ldexp(1.0, -8));
    BvpResult r = minimal_supersolution_bvp(d, kCubic, Field(d, 0.0), Field(d, 0.0));
    EXPECT_FALSE(r.diverged);
    EXPECT_LE(r.u.max_abs_active(), 1e-12);
}

TEST(Bvp, BoundedForcingMatchesDirectSolve) {
    DomainPtr d = build_domain(Shape::interval(0, 1), std::ldexp(1.0, -10));
    BvpResult r = minimal_supersolution_bvp(d, kCubic, Field(d, 1.0), Field(d, 0.0));
    SemilinearResult direct = solve_semilinear_dirichlet(d, kCubic, Field(d, 1.0), Field(d, 0.0));
    EXPECT_FALSE(r.diverged);
    EXPECT_LE(max_gap(r.u, direct.u), 1e-4);
}

TEST(Bvp, SingularForcingDiverges) {
    DomainPtr d = build_domain(Shape::interval(0, 1), std::ldexp(1.0, -12));
    Field f = sample_forcing(Forcing::rho_power(1.0, 3.0), d).field;
    BvpResult r = minimal_supersolution_bvp(d, kCubic, f, Field(d, 0.0));
    EXPECT_TRUE(r.diverged);
    EXPECT_GT(r.boundary_max, 1e3);
}

TEST(WholeSpace, ConstantForcings) {
    const double h = 0.125;
    LadderResult zero = whole_space_solution(1, h, kCubic, Forcing::constant(0.0));
    EXPECT_LE(zero.u.max_abs_active(), 1e-4);
    LadderResult one = whole_space_solution(1, h, kCubic, Forcing::constant(1.0));
    for (std::size_t k : one.u.grid().active()) EXPECT_NEAR(one.u[k], 1.0, 1e-4);
}

TEST(WholeSpace, DualityInOneDimension) {
    const Forcing f = Forcing::parse("indicator(interval(0,1)) + -2*indicator(interval(-0.5,0.25))");
    const double h = 1.0 / 32.0;
    LadderResult a = whole_space_solution(1, h, kCubic, f);
    LadderResult b = whole_space_solution(1, h, tilde(kCubic), f.dual());
    const Lattice& lat = a.u.grid().lattice();
    for (std::size_t k : a.u.grid().active()) {
        Point p = lat.point(k);
        EXPECT_NEAR(a.u[k], -b.u.at({-p.x, -p.y}), 1e-8);
    }
    EXPECT_EQ(a.trace.sandwich_failures, 0);
}

TEST(Gap, ConvexCubicIsMonotone) {
    LadderOptions o;
    o.tol = 1e-3;
    GapReport r = uniqueness_gap(Shape::disk(0, 0, 1), 0.0625, kCubic, Forcing::constant(1.0), std::nullopt, o);
    EXPECT_TRUE(r.monotone_ok);
    EXPECT_LE(r.sup_gap_0, 5e-3);
    EXPECT_LE(r.sup_gap_f, r.sup_gap_0 + 1e-3);
    EXPECT_TRUE(r.warnings.empty());
}

TEST(Gap, ZeroForcingGapsCoincide) {
    LadderOptions o;
    o.tol = 1e-3;
    GapReport r = uniqueness_gap(Shape::disk(0, 0, 1), 0.125, kCubic, Forcing::constant(0.0), std::nullopt, o);
    EXPECT_EQ(r.gap_f.values(), r.gap_0.values());
}

TEST(Trace, CsvHasOneRowPerLevel) {
    DomainPtr d = build_domain(Shape::interval(0, 1), 0.0625);
    LadderResult r = maximal_solution(d, kCubic, Field(d, 0.0), Field(d, 0.0));
    std::ostringstream os;
    write_trace_csv(os, r.trace);
    const std::string csv = os.str();
    EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), r.trace.levels.size() + 1);
}

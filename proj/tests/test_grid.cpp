#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "largesol/errors.hpp"
#include "largesol/grid.hpp"

using namespace largesol;

TEST(BuildDomain, UnitIntervalQuarterSpacing) {
    auto d = build_domain(Shape::interval(0, 1), 0.25);
    ASSERT_EQ(d->active().size(), 3u);
    ASSERT_EQ(d->boundary().size(), 2u);
    const double expected[] = {0.25, 0.5, 0.25};
    for (std::size_t r = 0; r < 3; ++r) EXPECT_DOUBLE_EQ(d->rho(d->active()[r]), expected[r]);
    for (std::size_t k : d->boundary()) EXPECT_EQ(d->kind(k), NodeKind::Physical);
}

TEST(BuildDomain, DiskCenterDistance) {
    auto d = build_domain(Shape::disk(0, 0, 1), 0.5);
    long c = d->lattice().locate({0, 0});
    ASSERT_GE(c, 0);
    EXPECT_TRUE(d->is_active(static_cast<std::size_t>(c)));
    EXPECT_NEAR(d->rho(static_cast<std::size_t>(c)), 1.0, 0.5);
}

TEST(BuildDomain, AnnulusDistanceBound) {
    auto d = build_domain(Shape::annulus(0, 0, 0.5, 1.0), 0.1);
    for (std::size_t k : d->active()) EXPECT_LE(d->rho(k), 0.25 + 1e-12);
}

TEST(BuildDomain, NeighboursAreActiveOrBoundary) {
    for (const auto& s : {Shape::disk(0, 0, 1), Shape::annulus(0, 0, 0.3, 1), Shape::exterior(0, 0, 1, 3),
                          Shape::subtract(Shape::rectangle(-1, -1, 1, 1), Shape::disk(0.2, 0, 0.4))}) {
        auto d = build_domain(s, 0.05);
        std::array<std::size_t, 4> nb{};
        for (std::size_t k : d->active()) {
            int c = d->neighbours(k, nb);
            ASSERT_EQ(c, 4);
            for (int t = 0; t < c; ++t) {
                std::size_t q = nb[static_cast<std::size_t>(t)];
                EXPECT_TRUE(d->is_active(q) || d->is_boundary(q));
            }
            EXPECT_GT(d->rho(k), 0.0);
        }
    }
}

TEST(BuildDomain, ExteriorBoxIsArtificial) {
    auto d = build_domain(Shape::exterior(0, 0, 1, 2), 0.125);
    int physical = 0, artificial = 0;
    for (std::size_t k : d->boundary()) {
        Point p = d->lattice().point(k);
        double r = std::hypot(p.x, p.y);
        if (d->kind(k) == NodeKind::Artificial) {
            ++artificial;
            EXPECT_GT(r, 1.0);
        } else {
            ++physical;
            EXPECT_LE(r, 1.0 + 1e-12);
        }
    }
    EXPECT_GT(physical, 0);
    EXPECT_GT(artificial, 0);
    EXPECT_FALSE(d->bounded());
}

TEST(BuildDomain, PrimitiveRhoIsExact) {
    const double h = 1.0 / 32;
    auto d = build_domain(Shape::rectangle(0, 0, 2, 1), h);
    for (std::size_t k : d->active()) {
        Point p = d->lattice().point(k);
        double exact = std::min({p.x, 2 - p.x, p.y, 1 - p.y});
        EXPECT_NEAR(d->rho(k), exact, 1e-12);
    }
}

TEST(BuildDomain, CompositeRhoWithinSpacing) {
    const double h = 1.0 / 32;
    auto s = Shape::unite(Shape::disk(0, 0, 1), Shape::disk(3, 0, 1));
    auto d = build_domain(Shape::unite(Shape::disk(0, 0, 1), Shape::rectangle(0, -0.25, 2, 0.25)), h);
    for (std::size_t k : d->active()) {
        Point p = d->lattice().point(k);
        double disk = 1 - std::hypot(p.x, p.y);
        double rect = std::min({p.x, 2 - p.x, p.y + 0.25, 0.25 - p.y});
        if (disk > 0.3 && std::abs(p.y) > 0.5) {
            EXPECT_NEAR(d->rho(k), disk, h);
        }
        if (p.x > 1.3 && rect > 0) {
            EXPECT_NEAR(d->rho(k), rect, h);
        }
    }
    EXPECT_THROW(build_domain(s, h), DegenerateDomainError);
}

TEST(BuildDomain, DegenerateAndInvalid) {
    EXPECT_THROW(build_domain(Shape::interval(0, 0.1), 0.25), DegenerateDomainError);
    EXPECT_THROW(build_domain(Shape::disk(0, 0, 1), -1.0), InvalidArgument);
}

TEST(BuildDomain, MaskSymmetry) {
    auto d = build_domain(Shape::disk(0, 0, 1), 1.0 / 16);
    const Lattice& lat = d->lattice();
    for (std::size_t k = 0; k < lat.size(); ++k) {
        Point p = lat.point(k);
        for (Point q : {Point{-p.x, p.y}, Point{p.x, -p.y}, Point{p.y, p.x}}) {
            long m = lat.locate(q);
            ASSERT_GE(m, 0);
            EXPECT_EQ(d->kind(k), d->kind(static_cast<std::size_t>(m)));
        }
    }
}

TEST(Exhaustion, IntervalFirstLevel) {
    auto d = build_domain(Shape::interval(0, 1), 1.0 / 64);
    EXPECT_DOUBLE_EQ(d->delta0(), 0.125);
    auto e = exhaustion(d, 0);
    double lo = 1e9, hi = -1e9;
    for (std::size_t k : e->active()) {
        lo = std::min(lo, d->lattice().point(k).x);
        hi = std::max(hi, d->lattice().point(k).x);
    }
    EXPECT_NEAR(lo, 0.125, 1.0 / 64 + 1e-12);
    EXPECT_NEAR(hi, 0.875, 1.0 / 64 + 1e-12);
}

TEST(Exhaustion, NestedAndConverging) {
    auto d = build_domain(Shape::disk(0, 0, 1), 1.0 / 32);
    DomainPtr prev = exhaustion(d, 0);
    bool reached = false;
    for (int n = 1; n < 12; ++n) {
        auto cur = exhaustion(d, n);
        EXPECT_TRUE(prev->active_subset_of(*cur));
        if (!cur->same_active_set(*prev)) EXPECT_GT(cur->active().size(), prev->active().size());
        if (cur->same_active_set(*d)) reached = true;
        prev = cur;
    }
    EXPECT_TRUE(reached);
    EXPECT_TRUE(exhaustion(d, 3)->active_subset_of(*d));
}

TEST(Forcing, TruncationModes) {
    auto d = build_domain(Shape::interval(0, 1), 0.25);
    Field f(d, 3.0);
    for (std::size_t k : d->active()) {
        EXPECT_DOUBLE_EQ(truncate_forcing(f, 2.0)[k], 2.0);
        EXPECT_DOUBLE_EQ(truncate_forcing(f, 5.0)[k], 3.0);
    }
    Field s(d, 0.0);
    s[d->active()[1]] = -4.0;
    EXPECT_DOUBLE_EQ(truncate_forcing(s, 1.0, true)[d->active()[1]], -1.0);
    EXPECT_THROW(truncate_forcing(f, -1.0), InvalidArgument);
}

TEST(Forcing, SampledDescriptors) {
    auto d = build_domain(Shape::interval(0, 1), 0.25);
    auto c = sample_forcing(Forcing::parse("constant(1)"), d);
    for (std::size_t k : d->active()) EXPECT_EQ(c.field[k], 1.0);
    auto r = sample_forcing(Forcing::parse("rho_power(2)"), d);
    EXPECT_DOUBLE_EQ(r.field[d->active()[0]], 16.0);
    EXPECT_DOUBLE_EQ(r.field[d->active()[1]], 4.0);

    auto big = build_domain(Shape::rectangle(-2, -2, 2, 2), 0.25);
    auto ind = sample_forcing(Forcing::parse("indicator(disk(0,0,1))"), big);
    for (std::size_t k : big->active()) {
        Point p = big->lattice().point(k);
        EXPECT_EQ(ind.field[k], std::hypot(p.x, p.y) <= 1.0 ? 1.0 : 0.0);
    }
    auto sum = sample_forcing(Forcing::parse("2*constant(1) + -0.5*indicator(disk(0,0,1)) + 1e+0"), big);
    EXPECT_EQ(sum.field[static_cast<std::size_t>(big->lattice().locate({0, 0}))], 2.5);
    EXPECT_THROW(Forcing::parse("bogus(1)"), ParseError);
}

TEST(Forcing, ClampsHugeValues) {
    auto d = build_domain(Shape::interval(0, 1), 1.0 / 8);
    auto s = sample_forcing(Forcing::rho_power(1.0, 400.0), d);
    EXPECT_GT(s.clamped, 0u);
    for (std::size_t k : d->active()) EXPECT_LE(s.field[k], 1e300);
}

TEST(Forcing, DualReflectsAndNegates) {
    auto d = build_domain(Shape::disk(0, 0, 2), 0.25);
    auto f = Forcing::parse("indicator(disk(0.5,0.25,1))");
    auto a = sample_forcing(f, d).field;
    auto b = sample_forcing(f.dual(), d).field;
    for (std::size_t k : d->active()) {
        Point p = d->lattice().point(k);
        EXPECT_EQ(b[k], -a.at({-p.x, -p.y}));
    }
}

TEST(FieldDump, RoundTripIsExact) {
    auto d = build_domain(Shape::disk(0, 0, 1), 0.125);
    Field f(d, 0.0);
    for (std::size_t k : d->active()) f[k] = std::sin(1e3 * static_cast<double>(k)) / 3.0;
    for (std::size_t k : d->boundary()) f[k] = 1e6 + 1.0 / 7.0;
    std::stringstream ss;
    write_field(ss, f);
    std::string text = ss.str();
    EXPECT_EQ(text.rfind("# largesol-field v1\nnx=", 0), 0u);
    Field g = read_field(ss, d);
    EXPECT_EQ(f.values(), g.values());
    std::stringstream again;
    write_field(again, g);
    EXPECT_EQ(text, again.str());
}

TEST(FieldDump, OneDimensionalHeader) {
    auto d = build_domain(Shape::interval(0, 1), 0.25);
    std::stringstream ss;
    write_field(ss, Field(d, 1.0));
    std::string l1, l2, l3;
    std::getline(ss, l1);
    std::getline(ss, l2);
    std::getline(ss, l3);
    EXPECT_EQ(l2, "nx=7 ny=1 h=0.25 domain=interval(0,1)");
    EXPECT_EQ(l3, "0 0 -0.25 0 0 0");
}

TEST(Shapes, ParseAndName) {
    auto s = Shape::parse("difference(rectangle(-1,-1,1,1), disk(0,0,0.5))");
    EXPECT_EQ(s.name(), "difference(rectangle(-1,-1,1,1),disk(0,0,0.5))");
    EXPECT_EQ(Shape::parse(s.name()).name(), s.name());
    EXPECT_THROW(Shape::parse("disk(0,0)"), ParseError);
    EXPECT_THROW(Shape::parse("union(interval(0,1),disk(0,0,1))"), InvalidArgument);
    EXPECT_EQ(Shape::parse("exterior(0,0,1,4)").with_truncation(8).name(), "exterior(0,0,1,8)");
}

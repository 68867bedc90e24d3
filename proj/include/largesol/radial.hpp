#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "largesol/nonlinearity.hpp"

namespace largesol {

// Radial reduction u'' + ((N-1)/r) u' = g(u) - f(r).

struct Ball {
    double R = 1.0;
    double value = 0.0;  // u(R) for Dirichlet problems; ignored for large solutions
};

// Blow-up at r = R, u(L) = far_value at the far radius L > R.
struct Exterior {
    double R = 1.0;
    double L = 10.0;
    double far_value = 0.0;
};

// One-dimensional (0, L] with blow-up at 0 and u(L) = far_value.
struct HalfLine {
    double L = 1.0;
    double far_value = 0.0;
};

// Dirichlet values at both ends of [a, b].
struct Segment {
    double a = 0.0;
    double b = 1.0;
    double ua = 0.0;
    double ub = 0.0;
};

using RadialGeometry = std::variant<Ball, Exterior, HalfLine, Segment>;

struct RadialProblem {
    int N = 1;
    Nonlinearity g = Nonlinearity::power(3.0);
    std::function<double(double)> f;  // empty: f = 0
    RadialGeometry geometry = Ball{};
};

// Accepted integrator steps with quintic Hermite interpolation in between.
class RadialProfile {
public:
    double operator()(double r) const;
    double derivative(double r) const;
    double lo() const { return r_.front(); }
    double hi() const { return r_.back(); }
    std::size_t nodes() const { return r_.size(); }

    double shooting_parameter = 0.0;  // center value (Ball) or inward slope
    double blowup_radius = std::numeric_limits<double>::quiet_NaN();
    double bracket_width = 0.0;

    // Over the steps inside [a, b]: max of |u'(b) - u'(a) - int_a^b u''| / (1 + int_a^b |u''|),
    // with u'' taken from the equation along the interpolant.
    double ode_residual(const RadialProblem& p, double a, double b) const;

    void write_csv(std::ostream& os, const std::vector<double>& samples) const;

private:
    friend class RadialBuilder;
    std::vector<double> r_;
    std::vector<std::array<double, 3>> jet_;  // u, u', u'' at each step
    double series_r0_ = 0.0;  // below r0, the center expansion (Ball only)
    double series_c_ = 0.0;
    double series_a_ = 0.0;
};

RadialProfile radial_large_solution(const RadialProblem& p);
RadialProfile radial_dirichlet(const RadialProblem& p);

// N = 1, f = 0, blow-up at both ends of an interval of half-width `half_width`:
// the center value from half_width = int_c^inf dt / sqrt(2 (G(t) - G(c))).
double segment_center_by_energy(const Nonlinearity& g, double half_width);

struct ExactProfile {
    std::function<double(double)> u;
    std::function<double(double)> du;
};

// cubic_halfline, exp_halfline, harmonic_linear, quadratic_poisson
ExactProfile exact_solution(const std::string& tag);

}  // namespace largesol

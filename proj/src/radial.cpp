#include "largesol/radial.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <ostream>
#include <tuple>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/numeric/odeint.hpp>

#include "largesol/errors.hpp"

namespace largesol {

namespace {

using State = std::array<double, 2>;
namespace odeint = boost::numeric::odeint;

constexpr double kBlowup = 1e12;
constexpr double kGmax = 1e300;
constexpr int kBisections = 80;

double clamp_g(const Nonlinearity& g, double u) {
    double v = g(u);
    if (std::isnan(v)) return u > 0 ? kGmax : -kGmax;
    return std::clamp(v, -kGmax, kGmax);
}

double second_derivative(const RadialProblem& p, double r, double u, double du) {
    double damping = (p.N > 1 && r != 0.0) ? (p.N - 1) / r * du : 0.0;
    return clamp_g(p.g, u) - (p.f ? p.f(r) : 0.0) - damping;
}

std::string repr(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

enum class Outcome { Reached, Up, Down };

struct Shot {
    Outcome outcome = Outcome::Reached;
    double r_end = 0.0;  // target radius, or the extrapolated blow-up radius
    double u_end = 0.0;
    std::vector<double> r, u, du;
};

// Integrates from r0 toward r1 (either direction) with dopri5 at rtol 1e-10,
// stopping at |u| > 1e12 or |g(u)| >= 1e300.
Shot shoot(const RadialProblem& p, double r0, State y, double r1, bool record) {
    auto sys = [&p](const State& x, State& dxdt, double r) {
        dxdt[0] = x[1];
        dxdt[1] = second_derivative(p, r, x[0], x[1]);
    };
    auto stepper = odeint::make_controlled<odeint::runge_kutta_dopri5<State>>(1e-12, 1e-10);
    const double span = r1 - r0;
    const double dir = span > 0 ? 1.0 : -1.0;
    double r = r0;
    double dt = span * 1e-4;
    Shot s;
    auto push = [&] {
        if (!record) return;
        s.r.push_back(r);
        s.u.push_back(y[0]);
        s.du.push_back(y[1]);
    };
    push();
    double r_prev = r, u_prev = y[0];
    auto blown = [&](double u) {
        double gu = p.g(u);
        if (u > kBlowup || gu >= kGmax || (std::isnan(gu) && u > 0)) return Outcome::Up;
        if (u < -kBlowup || gu <= -kGmax || (std::isnan(gu) && u < 0)) return Outcome::Down;
        return Outcome::Reached;
    };
    auto finish_blowup = [&](Outcome o) {
        s.outcome = o;
        s.u_end = y[0];
        // The singularity is simple in 1/u; extrapolate the last two steps to 1/u = 0.
        double w1 = 1.0 / u_prev, w2 = 1.0 / y[0];
        s.r_end = (w1 != w2 && std::isfinite(w1)) ? r + (r - r_prev) * w2 / (w1 - w2) : r;
        return s;
    };
    for (long steps = 0; dir * (r1 - r) > 0.0; ++steps) {
        if (steps > 5'000'000) throw NumericalError("radial integration exceeded the step budget");
        if (dir * (r + dt - r1) > 0.0) dt = r1 - r;
        State trial = y;
        double r_trial = r;
        auto res = stepper.try_step(sys, trial, r_trial, dt);
        if (res == odeint::fail) {
            if (std::abs(dt) < 1e-15 * std::max(std::abs(r), std::abs(span))) {
                // Out of resolution in r: a blow-up if u is huge or still moving steeply.
                const double along = dir * y[1];
                if (y[0] > 1e6 || (along > 1e8 * (1.0 + std::abs(y[0])))) return finish_blowup(Outcome::Up);
                if (y[0] < -1e6 || (-along > 1e8 * (1.0 + std::abs(y[0])))) return finish_blowup(Outcome::Down);
                if (std::abs(r1 - r) > 1e-9 * std::abs(span))
                    throw NumericalError("radial integration stalled at r=" + repr(r));
                break;
            }
            continue;
        }
        r_prev = r;
        u_prev = y[0];
        y = trial;
        r = r_trial;
        push();
        if (Outcome o = blown(y[0]); o != Outcome::Reached) return finish_blowup(o);
    }
    s.outcome = Outcome::Reached;
    s.r_end = r1;
    s.u_end = y[0];
    return s;
}

void require_ko(const Nonlinearity& g) {
    for (double base : {1.0, 10.0, 100.0}) {
        try {
            if (ko_integral(g, base).converges) return;
            break;
        } catch (const InvalidArgument&) {
            continue;
        }
    }
    throw KoViolation("radial large solution needs the Keller-Osserman condition for g = " + g.describe());
}

// Bisection of a predicate that is false at lo and true at hi.
template <class Pred>
std::pair<double, double> bisect(double lo, double hi, Pred pred) {
    for (int i = 0; i < kBisections; ++i) {
        double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        (pred(mid) ? hi : lo) = mid;
    }
    return {lo, hi};
}

template <class Pred>
double expand_up(double start, Pred pred, const char* what) {
    double step = std::max(1.0, std::abs(start));
    double x = start + step;
    for (int i = 0; i < 200; ++i, step *= 2.0, x = start + step)
        if (pred(x)) return x;
    throw KoViolation(std::string("no bracket found for ") + what);
}

template <class Pred>
double expand_down(double start, Pred pred, const char* what) {
    double step = std::max(1.0, std::abs(start));
    double x = start - step;
    for (int i = 0; i < 200; ++i, step *= 2.0, x = start - step)
        if (!pred(x)) return x;
    throw NumericalError(std::string("no lower bracket found for ") + what);
}

struct Center {
    double r0, c, a;
};

Center center_start(const RadialProblem& p, double R, double c) {
    double r0 = 1e-6 * R;
    double a = (clamp_g(p.g, c) - (p.f ? p.f(0.0) : 0.0)) / p.N;
    return {r0, c, a};
}

Shot shoot_from_center(const RadialProblem& p, double R, double c, bool record) {
    Center s = center_start(p, R, c);
    State y{c + 0.5 * s.a * s.r0 * s.r0, s.a * s.r0};
    return shoot(p, s.r0, y, R, record);
}

// Quintic Hermite on one step from values, slopes and curvatures at both ends.
double quintic(double h, double t, const double* y0, const double* y1) {
    double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
    return y0[0] * (1 - 10 * t3 + 15 * t4 - 6 * t5) + h * y0[1] * (t - 6 * t3 + 8 * t4 - 3 * t5) +
           h * h * y0[2] * 0.5 * (t2 - 3 * t3 + 3 * t4 - t5) + y1[0] * (10 * t3 - 15 * t4 + 6 * t5) +
           h * y1[1] * (-4 * t3 + 7 * t4 - 3 * t5) + h * h * y1[2] * 0.5 * (t3 - 2 * t4 + t5);
}

double quintic_slope(double h, double t, const double* y0, const double* y1) {
    double t2 = t * t, t3 = t2 * t, t4 = t3 * t;
    return (y0[0] * (-30 * t2 + 60 * t3 - 30 * t4) + y1[0] * (30 * t2 - 60 * t3 + 30 * t4)) / h +
           y0[1] * (1 - 18 * t2 + 32 * t3 - 15 * t4) + y1[1] * (-12 * t2 + 28 * t3 - 15 * t4) +
           h * (y0[2] * 0.5 * (2 * t - 9 * t2 + 12 * t3 - 5 * t4) + y1[2] * 0.5 * (3 * t2 - 8 * t3 + 5 * t4));
}


}  // namespace

class RadialBuilder {
public:
    static RadialProfile build(const RadialProblem& p, Shot s) {
        if (s.r.size() < 2) throw NumericalError("radial integration produced fewer than two steps");
        if (s.r.front() > s.r.back()) {
            std::reverse(s.r.begin(), s.r.end());
            std::reverse(s.u.begin(), s.u.end());
            std::reverse(s.du.begin(), s.du.end());
        }
        RadialProfile out;
        out.r_ = std::move(s.r);
        out.jet_.resize(out.r_.size());
        for (std::size_t i = 0; i < out.r_.size(); ++i)
            out.jet_[i] = {s.u[i], s.du[i], second_derivative(p, out.r_[i], s.u[i], s.du[i])};
        return out;
    }
    static void set_series(RadialProfile& prof, const Center& c) {
        prof.series_r0_ = c.r0;
        prof.series_c_ = c.c;
        prof.series_a_ = c.a;
    }
};

double RadialProfile::operator()(double r) const {
    if (series_r0_ > 0.0 && r >= 0.0 && r < r_.front()) return series_c_ + 0.5 * series_a_ * r * r;
    if (r < r_.front() || r > r_.back()) throw InvalidArgument("radius " + repr(r) + " outside the profile range");
    auto it = std::upper_bound(r_.begin(), r_.end(), r);
    std::size_t i = it == r_.end() ? r_.size() - 2 : static_cast<std::size_t>(it - r_.begin()) - 1;
    double h = r_[i + 1] - r_[i];
    return quintic(h, (r - r_[i]) / h, jet_[i].data(), jet_[i + 1].data());
}

double RadialProfile::derivative(double r) const {
    if (series_r0_ > 0.0 && r >= 0.0 && r < r_.front()) return series_a_ * r;
    if (r < r_.front() || r > r_.back()) throw InvalidArgument("radius " + repr(r) + " outside the profile range");
    auto it = std::upper_bound(r_.begin(), r_.end(), r);
    std::size_t i = it == r_.end() ? r_.size() - 2 : static_cast<std::size_t>(it - r_.begin()) - 1;
    double h = r_[i + 1] - r_[i];
    return quintic_slope(h, (r - r_[i]) / h, jet_[i].data(), jet_[i + 1].data());
}

double RadialProfile::ode_residual(const RadialProblem& p, double a, double b) const {
    using boost::math::quadrature::gauss_kronrod;
    double worst = 0.0;
    for (std::size_t i = 0; i + 1 < r_.size(); ++i) {
        double lo = std::max(a, r_[i]), hi = std::min(b, r_[i + 1]);
        if (!(hi > lo)) continue;
        double h = r_[i + 1] - r_[i];
        auto u2 = [&](double r) {
            double t = (r - r_[i]) / h;
            double u = quintic(h, t, jet_[i].data(), jet_[i + 1].data());
            double du = quintic_slope(h, t, jet_[i].data(), jet_[i + 1].data());
            return second_derivative(p, r, u, du);
        };
        double integral = gauss_kronrod<double, 15>::integrate(u2, lo, hi, 0);
        double mass = gauss_kronrod<double, 15>::integrate([&](double r) { return std::abs(u2(r)); }, lo, hi, 0);
        double jump = derivative(hi) - derivative(lo);
        worst = std::max(worst, std::abs(jump - integral) / (1.0 + mass));
    }
    return worst;
}

void RadialProfile::write_csv(std::ostream& os, const std::vector<double>& samples) const {
    os << "r,u\n";
    for (double r : samples) os << repr(r) << ',' << repr((*this)(r)) << '\n';
}

RadialProfile radial_large_solution(const RadialProblem& p) {
    if (p.N < 1) throw InvalidArgument("radial problems need N >= 1");
    require_ko(p.g);
    if (const auto* ball = std::get_if<Ball>(&p.geometry)) {
        const double R = ball->R;
        if (!(R > 0.0)) throw InvalidArgument("ball radius must be positive");
        auto up = [&](double c) { return shoot_from_center(p, R, c, false).outcome == Outcome::Up; };
        double lo = up(0.0) ? expand_down(0.0, up, "the center value") : 0.0;
        double hi = expand_up(lo, up, "the center value");
        std::tie(lo, hi) = bisect(lo, hi, up);
        Shot s = shoot_from_center(p, R, hi, true);
        double r_blow = s.r_end;
        RadialProfile prof = RadialBuilder::build(p, std::move(s));
        RadialBuilder::set_series(prof, center_start(p, R, hi));
        prof.shooting_parameter = hi;
        prof.blowup_radius = r_blow;
        prof.bracket_width = hi - lo;
        return prof;
    }
    double R = 0.0, L = 0.0, far = 0.0;
    if (const auto* ext = std::get_if<Exterior>(&p.geometry)) {
        R = ext->R;
        L = ext->L;
        far = ext->far_value;
        if (!(R > 0.0 && L > R)) throw InvalidArgument("exterior problems need 0 < R < L");
    } else if (const auto* hl = std::get_if<HalfLine>(&p.geometry)) {
        if (p.N != 1) throw InvalidArgument("half-line problems are one-dimensional");
        L = hl->L;
        far = hl->far_value;
        if (!(L > 0.0)) throw InvalidArgument("half-line length must be positive");
    } else {
        throw InvalidArgument("segments carry Dirichlet data at both ends; use radial_dirichlet");
    }
    // Inward from L with slope -s: steeper descent blows up before reaching R.
    auto up = [&](double s) { return shoot(p, L, State{far, -s}, R, false).outcome == Outcome::Up; };
    if (up(0.0)) throw InvalidArgument("far value too large: the flat start already blows up before R");
    double hi = expand_up(0.0, up, "the inward slope");
    double lo = 0.0;
    std::tie(lo, hi) = bisect(lo, hi, up);
    Shot s = shoot(p, L, State{far, -hi}, R, true);
    double r_blow = s.r_end;
    RadialProfile prof = RadialBuilder::build(p, std::move(s));
    prof.shooting_parameter = hi;
    prof.blowup_radius = r_blow;
    prof.bracket_width = hi - lo;
    return prof;
}

RadialProfile radial_dirichlet(const RadialProblem& p) {
    if (p.N < 1) throw InvalidArgument("radial problems need N >= 1");
    auto end_value = [](const Shot& s) {
        switch (s.outcome) {
            case Outcome::Up:
                return std::numeric_limits<double>::infinity();
            case Outcome::Down:
                return -std::numeric_limits<double>::infinity();
            case Outcome::Reached:
                break;
        }
        return s.u_end;
    };
    auto solve = [&](auto shot, double target, double start, const char* what) {
        if (!std::isfinite(target)) throw InvalidArgument("Dirichlet value must be finite");
        auto above = [&](double x) { return end_value(shot(x, false)) > target; };
        double lo = above(start) ? expand_down(start, above, what) : start;
        double hi = expand_up(lo, above, what);
        std::tie(lo, hi) = bisect(lo, hi, above);
        // Take whichever bracket end lands closer to the target.
        Shot a = shot(lo, true), b = shot(hi, true);
        bool pick_hi = std::abs(end_value(b) - target) < std::abs(end_value(a) - target);
        return std::tuple<Shot, double, double>{pick_hi ? std::move(b) : std::move(a), pick_hi ? hi : lo, hi - lo};
    };
    if (const auto* ball = std::get_if<Ball>(&p.geometry)) {
        const double R = ball->R;
        if (!(R > 0.0)) throw InvalidArgument("ball radius must be positive");
        auto shot = [&](double c, bool rec) { return shoot_from_center(p, R, c, rec); };
        auto [s, c, width] = solve(shot, ball->value, ball->value, "the center value");
        RadialProfile prof = RadialBuilder::build(p, std::move(s));
        RadialBuilder::set_series(prof, center_start(p, R, c));
        prof.shooting_parameter = c;
        prof.bracket_width = width;
        return prof;
    }
    if (const auto* seg = std::get_if<Segment>(&p.geometry)) {
        if (!(seg->b > seg->a) || (p.N > 1 && !(seg->a > 0.0)))
            throw InvalidArgument("segment needs a < b (and a > 0 when N > 1)");
        auto shot = [&](double slope, bool rec) { return shoot(p, seg->a, State{seg->ua, slope}, seg->b, rec); };
        double guess = (seg->ub - seg->ua) / (seg->b - seg->a);
        auto [s, slope, width] = solve(shot, seg->ub, guess, "the initial slope");
        RadialProfile prof = RadialBuilder::build(p, std::move(s));
        prof.shooting_parameter = slope;
        prof.bracket_width = width;
        return prof;
    }
    throw InvalidArgument("Dirichlet problems are posed on a ball or a segment");
}

double segment_center_by_energy(const Nonlinearity& g, double half_width) {
    if (!(half_width > 0.0)) throw InvalidArgument("half-width must be positive");
    require_ko(g);
    boost::math::quadrature::exp_sinh<double> integrator;
    // G(c + d) - G(c) without cancellation for small d (Simpson is exact to O(d^5)).
    auto rise = [&](double c, double d) {
        if (d < 1e-3 * std::max(1.0, c)) return d / 6.0 * (g(c) + 4.0 * g(c + 0.5 * d) + g(c + d));
        return g.primitive(c + d) - g.primitive(c);
    };
    auto width = [&](double c) {
        // t = c + s^2 removes the inverse square root singularity at t = c.
        auto integrand = [&](double s) {
            double d = s * s;
            double e = rise(c, d);
            return e > 0.0 ? 2.0 * s / std::sqrt(2.0 * e) : 0.0;
        };
        return integrator.integrate(integrand, 1e-13);
    };
    double lo = 1e-8, hi = 1.0;
    while (width(hi) > half_width) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e150) throw NumericalError("energy parameterization failed to bracket the center value");
    }
    while (width(lo) < half_width) {
        lo *= 0.5;
        if (lo < 1e-300) throw NumericalError("energy parameterization failed to bracket the center value");
    }
    for (int i = 0; i < kBisections && hi - lo > 1e-15 * hi; ++i) {
        double mid = 0.5 * (lo + hi);
        (width(mid) > half_width ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

ExactProfile exact_solution(const std::string& tag) {
    if (tag == "cubic_halfline")
        return {[](double x) { return std::sqrt(2.0) / x; }, [](double x) { return -std::sqrt(2.0) / (x * x); }};
    if (tag == "exp_halfline")
        return {[](double x) { return std::log(2.0 / (x * x)); }, [](double x) { return -2.0 / x; }};
    if (tag == "harmonic_linear") return {[](double x) { return x; }, [](double) { return 1.0; }};
    if (tag == "quadratic_poisson")
        return {[](double x) { return x * (1.0 - x); }, [](double x) { return 1.0 - 2.0 * x; }};
    throw InvalidArgument("unknown exact solution tag '" + tag + "'");
}

}  // namespace largesol

#include "largesol/nonlinearity.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "largesol/errors.hpp"

namespace largesol {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class F>
double gk(F&& f, double lo, double hi, double tol = 1e-13) {
    using boost::math::quadrature::gauss_kronrod;
    return gauss_kronrod<double, 31>::integrate(f, lo, hi, 20, tol);
}

// e^x - 1 - x without cancellation for small x.
double expm1_minus_x(double x) {
    if (std::abs(x) < 1e-2) {
        double term = x * x / 2.0, sum = 0.0;
        for (int k = 3; k < 12; ++k) {
            sum += term;
            term *= x / k;
        }
        return sum;
    }
    return std::expm1(x) - x;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

Nonlinearity::Nonlinearity(Family f, double p, double s) : family_(f), param_(p), shift_(s) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw InvalidArgument("g.shift must be finite and >= 0");
}

Nonlinearity Nonlinearity::power(double q, double shift) {
    if (!(q > 1.0)) throw InvalidArgument("power family needs q > 1");
    return {Family::Power, q, shift};
}

Nonlinearity Nonlinearity::exp(double a, double shift) {
    if (!(a > 0.0)) throw InvalidArgument("exp family needs a > 0");
    return {Family::Exp, a, shift};
}

Nonlinearity Nonlinearity::power_log(double alpha, double shift) {
    if (!(alpha > 0.0)) throw InvalidArgument("powerlog family needs alpha > 0");
    return {Family::PowerLog, alpha, shift};
}

Nonlinearity Nonlinearity::linear(double shift) { return {Family::Linear, 1.0, shift}; }

Nonlinearity Nonlinearity::custom(std::vector<double> t, std::vector<double> g) {
    if (t.size() != g.size() || t.size() < 2)
        throw InvalidArgument("custom table needs at least two (t, g) rows");
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!std::isfinite(t[i]) || !std::isfinite(g[i]))
            throw InvalidArgument("custom table has non-finite entries");
        if (i > 0 && !(t[i] > t[i - 1])) throw InvalidArgument("custom table t must be strictly increasing");
        if (i > 0 && g[i] < g[i - 1]) throw InvalidArgument("custom table g must be nondecreasing");
    }
    Nonlinearity n{Family::Custom, 0.0, 0.0};
    n.t_ = std::move(t);
    n.g_ = std::move(g);
    if (n.t_.front() <= 0.0 && n.t_.back() >= 0.0 && n(0.0) < 0.0)
        throw InvalidArgument("custom table has g(0) < 0");
    return n;
}

Nonlinearity Nonlinearity::from_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open g table '" + path + "'");
    std::vector<double> t, g;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        double a, b;
        if (!(ls >> a >> b)) {
            if (t.empty() && lineno == 1) continue;  // header
            throw ParseError("malformed row in '" + path + "'", lineno);
        }
        t.push_back(a);
        g.push_back(b);
    }
    return custom(std::move(t), std::move(g));
}

std::size_t Nonlinearity::segment(double t) const {
    if (!(t >= t_.front() && t <= t_.back()))
        throw ExtrapolationError("custom g evaluated at " + fmt(t) + " outside its table [" +
                                 fmt(t_.front()) + ", " + fmt(t_.back()) + "]");
    auto it = std::upper_bound(t_.begin(), t_.end(), t);
    std::size_t i = static_cast<std::size_t>(it - t_.begin());
    return std::min(i, t_.size() - 1) - 1;
}

namespace {

// Small integer exponents dominate in practice; std::pow is several times slower.
double power_of(double x, double p) {
    switch (static_cast<int>(p)) {
        case 1:
            if (p == 1.0) return x;
            break;
        case 2:
            if (p == 2.0) return x * x;
            break;
        case 3:
            if (p == 3.0) return x * x * x;
            break;
        case 4:
            if (p == 4.0) return (x * x) * (x * x);
            break;
        default:
            break;
    }
    return std::pow(x, p);
}

}  // namespace

double Nonlinearity::odd_part(double t) const {
    double at = std::abs(t);
    switch (family_) {
        case Family::Power:
            return power_of(at, param_ - 1.0) * t;
        case Family::Exp:
            return std::copysign(std::expm1(param_ * at), t);
        case Family::PowerLog:
            return t * std::pow(std::log1p(at), param_);
        case Family::Linear:
            return t;
        case Family::Custom:
            break;
    }
    return 0.0;
}

double Nonlinearity::operator()(double t) const {
    if (family_ == Family::Custom) {
        std::size_t i = segment(t);
        double w = (t - t_[i]) / (t_[i + 1] - t_[i]);
        return g_[i] + w * (g_[i + 1] - g_[i]);
    }
    return odd_part(t) + shift_;
}

double Nonlinearity::derivative(double t) const {
    double at = std::abs(t);
    switch (family_) {
        case Family::Power:
            return param_ * power_of(at, param_ - 1.0);
        case Family::Exp:
            return param_ * std::exp(param_ * at);
        case Family::PowerLog: {
            if (at == 0.0) return 0.0;
            double l = std::log1p(at);
            return std::pow(l, param_) + param_ * at * std::pow(l, param_ - 1.0) / (1.0 + at);
        }
        case Family::Linear:
            return 1.0;
        case Family::Custom: {
            std::size_t i = segment(t);
            return (g_[i + 1] - g_[i]) / (t_[i + 1] - t_[i]);
        }
    }
    return 0.0;
}

double Nonlinearity::primitive(double t) const {
    if (!(t >= 0.0)) throw InvalidArgument("primitive needs t >= 0");
    switch (family_) {
        case Family::Power:
            return std::pow(t, param_ + 1.0) / (param_ + 1.0) + shift_ * t;
        case Family::Exp:
            return expm1_minus_x(param_ * t) / param_ + shift_ * t;
        case Family::Linear:
            return 0.5 * t * t + shift_ * t;
        case Family::PowerLog: {
            if (t == 0.0) return 0.0;
            auto f = [this](double s) { return odd_part(s); };
            return gk(f, 0.0, t) + shift_ * t;
        }
        case Family::Custom: {
            segment(0.0);
            segment(t);
            double sum = 0.0;
            for (std::size_t i = 0; i + 1 < t_.size(); ++i) {
                double a = std::max(t_[i], 0.0), b = std::min(t_[i + 1], t);
                if (b <= a) continue;
                sum += 0.5 * ((*this)(a) + (*this)(b)) * (b - a);
            }
            return sum;
        }
    }
    return 0.0;
}

double Nonlinearity::max_slope(double lo, double hi) const {
    if (hi < lo) std::swap(lo, hi);
    if (family_ == Family::Custom) {
        lo = std::max(lo, t_.front());
        hi = std::min(hi, t_.back());
        double best = 0.0;
        for (std::size_t i = 0; i + 1 < t_.size(); ++i) {
            if (t_[i + 1] < lo || t_[i] > hi) continue;
            best = std::max(best, (g_[i + 1] - g_[i]) / (t_[i + 1] - t_[i]));
        }
        return best;
    }
    double amax = std::max(std::abs(lo), std::abs(hi));
    if (family_ != Family::PowerLog) return derivative(amax);
    double best = 0.0;
    for (int i = 0; i <= 64; ++i) best = std::max(best, derivative(lo + (hi - lo) * i / 64.0));
    return 1.05 * std::max(best, derivative(amax));
}

std::string Nonlinearity::describe() const {
    std::string s;
    switch (family_) {
        case Family::Power:
            s = "power(q=" + fmt(param_) + ")";
            break;
        case Family::Exp:
            s = "exp(a=" + fmt(param_) + ")";
            break;
        case Family::PowerLog:
            s = "powerlog(alpha=" + fmt(param_) + ")";
            break;
        case Family::Linear:
            s = "linear";
            break;
        case Family::Custom:
            return "custom(" + std::to_string(t_.size()) + " rows)";
    }
    if (shift_ != 0.0) s += "+" + fmt(shift_);
    return s;
}

KoResult ko_integral(const Nonlinearity& g, double base) {
    if (!(base > 0.0) || !std::isfinite(base)) throw InvalidArgument("KO base must be positive");
    if (!(g.primitive(base) > 0.0)) throw InvalidArgument("invalid KO base: g vanishes on [0, base]");

    constexpr double eps = 0.05;
    auto integrand = [&g](double t) {
        double G = g.primitive(t);
        return std::isfinite(G) ? 1.0 / std::sqrt(G) : 0.0;
    };

    double total = 0.0, prev = -1.0, prev_ratio = -1.0;
    int slow = 0;
    double lo = base;
    for (int decade = 0; decade < 400; ++decade) {
        double hi = lo * 10.0;
        if (!(hi < 1e300)) break;
        // logarithmic variable keeps each decade smooth for the quadrature
        auto in_log = [&](double s) {
            double t = std::exp(s);
            return integrand(t) * t;
        };
        double piece = gk(in_log, std::log(lo), std::log(hi), 1e-12);
        total += piece;
        if (piece == 0.0 || piece <= 1e-12 * total) return {true, total};
        if (prev > 0.0) {
            double ratio = piece / prev;
            double decay = 1.0 - std::log10(ratio);  // local exponent p of t^{-p}
            if (lo >= std::max(base, 1.0)) {
                slow = decay < 1.0 + eps ? slow + 1 : 0;
                if (slow >= 3) return {false, kInf};
            }
            if (decay > 1.0 + eps) {
                double tail = piece * ratio / (1.0 - ratio);
                bool stable = prev_ratio > 0.0 && std::abs(ratio - prev_ratio) <= 1e-9 * ratio;
                if (stable || tail <= 1e-9 * total) return {true, total + tail};
            }
            prev_ratio = ratio;
        }
        prev = piece;
        lo = hi;
    }
    return {false, kInf};
}

NonlinearityReport analyze(const Nonlinearity& g, double lo, double hi, int n_samples) {
    if (n_samples < 3) throw InvalidArgument("analyze needs n_samples >= 3");
    if (!(hi > lo)) throw InvalidArgument("analyze needs a nonempty sample range");
    if (g.family() == Family::Custom) {
        lo = std::max(lo, g.table_t().front());
        hi = std::min(hi, g.table_t().back());
    }
    NonlinearityReport rep;
    try {
        KoResult ko = ko_integral(g, 1.0);
        rep.ko_holds = ko.converges;
        rep.ko_value = ko.value;
    } catch (const Error&) {
        rep.ko_holds = false;
        rep.ko_value = kInf;
    }

    std::vector<double> ts(static_cast<std::size_t>(n_samples)), gs(ts.size());
    double scale = 1.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        ts[i] = lo + (hi - lo) * static_cast<double>(i) / (n_samples - 1);
        gs[i] = g(ts[i]);
        scale = std::max(scale, std::abs(gs[i]));
    }
    rep.convex = true;
    for (std::size_t i = 1; i + 1 < ts.size(); ++i)
        if (gs[i - 1] - 2.0 * gs[i] + gs[i + 1] < -1e-12 * scale) rep.convex = false;

    std::vector<double> pos;
    for (double t : ts)
        if (t >= 0.0) pos.push_back(t);
    double L = -kInf, c = 1.0;
    bool finite = !pos.empty(), positive = true;
    for (std::size_t i = 0; i < pos.size(); ++i) {
        for (std::size_t j = i; j < pos.size(); ++j) {
            double a = pos[i], b = pos[j];
            if (a + b > hi) break;
            double ga = g(a), gb = g(b), gab = g(a + b);
            if (!std::isfinite(ga + gb + gab)) finite = false;
            L = std::max(L, ga + gb - gab);
            if (a > 0.0 && b > 0.0) {
                if (!(ga > 0.0 && gb > 0.0 && gab > 0.0)) {
                    positive = false;
                    continue;
                }
                c = std::max({c, gab / (ga + gb), (ga + gb) / gab});
            }
        }
    }
    if (finite && std::isfinite(L)) rep.superadditive_L = L;
    if (positive && finite) rep.power_like_c = c;
    return rep;
}

Nonlinearity tilde(const Nonlinearity& g) {
    if (g.family() == Family::Custom) {
        const auto& t = g.table_t();
        const auto& v = g.table_g();
        if (t.front() <= 0.0 && t.back() >= 0.0 && g(0.0) != 0.0)
            throw UnsupportedError("tilde needs g(0) = 0");
        std::vector<double> rt(t.size()), rg(t.size());
        for (std::size_t i = 0; i < t.size(); ++i) {
            rt[i] = -t[t.size() - 1 - i];
            rg[i] = -v[t.size() - 1 - i];
        }
        return Nonlinearity::custom(std::move(rt), std::move(rg));
    }
    if (g.shift() != 0.0) throw UnsupportedError("tilde needs g(0) = 0 (shift must be 0)");
    return g;
}

}  // namespace largesol

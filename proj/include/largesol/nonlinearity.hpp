#pragma once

#include <optional>
#include <string>
#include <vector>

namespace largesol {

enum class Family { Power, Exp, PowerLog, Linear, Custom };

// Absorption term g. Closed-form families are odd in t before the shift is
// added; Custom is a nondecreasing table with piecewise-linear interpolation.
class Nonlinearity {
public:
    static Nonlinearity power(double q, double shift = 0.0);
    static Nonlinearity exp(double a, double shift = 0.0);
    static Nonlinearity power_log(double alpha, double shift = 0.0);
    static Nonlinearity linear(double shift = 0.0);
    static Nonlinearity custom(std::vector<double> t, std::vector<double> g);
    static Nonlinearity from_csv(const std::string& path);

    double operator()(double t) const;
    double derivative(double t) const;
    // G(t) = integral of g over [0, t], t >= 0.
    double primitive(double t) const;
    // Upper bound of g' on [lo, hi], used as the Picard shift.
    double max_slope(double lo, double hi) const;

    Family family() const noexcept { return family_; }
    double parameter() const noexcept { return param_; }
    double shift() const noexcept { return shift_; }
    const std::vector<double>& table_t() const noexcept { return t_; }
    const std::vector<double>& table_g() const noexcept { return g_; }
    std::string describe() const;

private:
    Nonlinearity(Family f, double p, double s);
    double odd_part(double t) const;
    std::size_t segment(double t) const;

    Family family_;
    double param_ = 0.0;
    double shift_ = 0.0;
    std::vector<double> t_, g_;
};

struct KoResult {
    bool converges = false;
    double value = 0.0;  // +inf when divergent
};

struct NonlinearityReport {
    bool ko_holds = false;
    double ko_value = 0.0;
    bool convex = false;
    std::optional<double> superadditive_L;
    std::optional<double> power_like_c;
};

// Integral of G^{-1/2} over [base, inf).
KoResult ko_integral(const Nonlinearity& g, double base);

NonlinearityReport analyze(const Nonlinearity& g, double lo = 0.0, double hi = 10.0,
                           int n_samples = 64);

// t -> -g(-t); requires g(0) = 0.
Nonlinearity tilde(const Nonlinearity& g);

}  // namespace largesol

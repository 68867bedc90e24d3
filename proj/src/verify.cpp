#include "largesol/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "largesol/config.hpp"
#include "largesol/elliptic.hpp"
#include "largesol/ladders.hpp"
#include "largesol/radial.hpp"
#include "largesol/run.hpp"

#ifndef LARGESOL_CONFIG_DIR
#define LARGESOL_CONFIG_DIR "configs"
#endif

namespace largesol {

using nlohmann::json;

namespace {

// Collects named sub-checks; the criterion passes when all of them do.
struct Clauses {
    explicit Clauses(CriterionResult& r) : res(r) {}

    CriterionResult& res;
    std::ostringstream detail;

    void add(const std::string& name, bool ok, const std::string& note) {
        res.metrics["clauses"][name] = ok;
        if (detail.tellp() > 0) detail << "; ";
        detail << name << (ok ? " ok" : " FAILED") << " (" << note << ")";
    }
    void finish() {
        res.passed = true;
        for (const auto& [name, ok] : res.metrics["clauses"].items()) res.passed = res.passed && ok.get<bool>();
        res.detail = detail.str();
    }
};

std::string num(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

SolveOptions solve_options(const VerifyOptions& o) {
    SolveOptions s;
    if (o.tamper_rtol) {
        s.rtol = *o.tamper_rtol;
        s.polish = false;
    }
    return s;
}

LadderOptions ladder_options(const VerifyOptions& o, double tol = 1e-4) {
    LadderOptions l;
    l.tol = tol;
    l.solve = solve_options(o);
    return l;
}

void ko_closed_forms(CriterionResult& res, const VerifyOptions&) {
    Clauses c(res);
    double worst = 0.0;
    for (double q : {2.0, 3.0, 5.0})
        for (double a : {0.5, 1.0, 2.0}) {
            const double exact = std::sqrt(q + 1.0) * (2.0 / (q - 1.0)) * std::pow(a, (1.0 - q) / 2.0);
            KoResult r = ko_integral(Nonlinearity::power(q), a);
            worst = std::max(worst, r.converges ? std::abs(r.value / exact - 1.0) : INFINITY);
        }
    res.metrics["power_worst_rel"] = json_number(worst);
    c.add("power", worst <= 1e-6, "worst relative error " + num(worst));

    // g(t) = e^t: G(t) = e^t - 1 and the integral from a -> 0 tends to pi.
    KoResult e = ko_integral(Nonlinearity::exp(1.0, 1.0), 1e-12);
    const double err = std::abs(e.value - std::numbers::pi);
    res.metrics["exp_value"] = json_number(e.value);
    c.add("exp", e.converges && err <= 1e-4, "value " + num(e.value));

    KoResult lin = ko_integral(Nonlinearity::linear(), 1.0);
    res.metrics["linear_converges"] = lin.converges;
    c.add("linear", !lin.converges, lin.converges ? "reported convergent" : "diverges");
    c.finish();
}

// Solve on (1/16, 1) with exact boundary values; relative error on [1/4, 1].
double exact_1d_error(const Nonlinearity& g, double forcing, const ExactProfile& exact, double h,
                      const VerifyOptions& o) {
    DomainPtr d = build_domain(Shape::interval(0.0625, 1.0), h);
    const Lattice& lat = d->lattice();
    Field b(d, 0.0);
    for (std::size_t k : d->boundary()) b[k] = exact.u(lat.point(k).x);
    SemilinearResult r = solve_semilinear_dirichlet(d, g, Field(d, forcing), b, nullptr, solve_options(o));
    double worst = 0.0;
    for (std::size_t k : d->active()) {
        const double x = lat.point(k).x;
        if (x >= 0.25) worst = std::max(worst, std::abs(r.u[k] / exact.u(x) - 1.0));
    }
    return worst;
}

void exact_1d(CriterionResult& res, const VerifyOptions& o, const Nonlinearity& g, double forcing,
              const std::string& tag) {
    Clauses c(res);
    const ExactProfile exact = exact_solution(tag);
    const double coarse = exact_1d_error(g, forcing, exact, std::ldexp(1.0, -10), o);
    const double fine = exact_1d_error(g, forcing, exact, std::ldexp(1.0, -11), o);
    const double ratio = fine / coarse;
    res.metrics["rel_error_h10"] = coarse;
    res.metrics["rel_error_h11"] = fine;
    res.metrics["ratio"] = ratio;
    c.add("accuracy", coarse <= 0.01, "max relative error " + num(coarse) + " at h=2^-10");
    c.add("halving", ratio >= 0.35 && ratio <= 0.65, "error ratio " + num(ratio) + " when h halves");
    c.finish();
}

void exact_cubic(CriterionResult& res, const VerifyOptions& o) {
    exact_1d(res, o, Nonlinearity::power(3.0), 0.0, "cubic_halfline");
}

// e^u - 1 = -1 is the same equation as e^u = 0.
void exact_exponential(CriterionResult& res, const VerifyOptions& o) {
    exact_1d(res, o, Nonlinearity::exp(1.0), -1.0, "exp_halfline");
}

void sandwich(CriterionResult& res, const VerifyOptions& o) {
    Clauses c(res);
    DomainPtr d = build_domain(Shape::disk(0, 0, 1), std::ldexp(1.0, -7));
    LadderOptions opts = ladder_options(o);
    opts.sandwich = true;
    LadderResult r = maximal_solution(d, Nonlinearity::power(3.0), Field(d, 1.0), Field(d, 0.0), opts);
    res.metrics["checks"] = r.trace.sandwich_checks;
    res.metrics["failures"] = r.trace.sandwich_failures;
    res.metrics["worst"] = r.trace.sandwich_worst;
    c.add("sandwich", r.trace.sandwich_checks > 0 && r.trace.sandwich_failures == 0,
          std::to_string(r.trace.sandwich_failures) + " of " + std::to_string(r.trace.sandwich_checks) +
              " levels violated, worst " + num(r.trace.sandwich_worst));
    c.finish();
}

void ladder_monotonicity(CriterionResult& res, const VerifyOptions& o) {
    Clauses c(res);
    namespace fs = std::filesystem;
    std::vector<fs::path> files;
    if (fs::is_directory(o.config_dir))
        for (const auto& e : fs::directory_iterator(o.config_dir))
            if (e.path().extension() == ".cfg") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::map<std::string, int> coverage;
    int runs = 0;
    for (const auto& path : files) {
        ExperimentConfig cfg = parse_config(path.string());
        if (cfg.mode == Mode::KoCheck || cfg.mode == Mode::Solve || cfg.mode == Mode::Oracle ||
            cfg.mode == Mode::Verify)
            continue;
        RunOutcome out = execute(cfg);
        ++runs;
        const std::string name = path.stem().string();
        if (!out.trace) {
            c.add(name, false, "no trace");
            continue;
        }
        int checks = 0, violations = 0;
        double worst = 0.0;
        for (const auto& [key, log] : out.trace->monotone) {
            coverage[key] += log.checks;
            checks += log.checks;
            violations += log.violations;
            worst = std::max(worst, log.worst);
        }
        res.metrics["configs"][name] = {{"checks", checks}, {"violations", violations}};
        c.add(name, violations == 0, std::to_string(checks) + " checks, worst " + num(worst));
    }
    for (const char* key : {"m", "k", "n_down", "n_up", "R"}) {
        res.metrics["coverage"][key] = coverage[key];
        c.add(std::string("covers_") + key, coverage[key] > 0, std::to_string(coverage[key]) + " checks");
    }
    c.add("configs_found", runs > 0, std::to_string(runs) + " ladder configs in " + o.config_dir);
    c.finish();
}

void oracle_equivalence(CriterionResult& res, const VerifyOptions& o) {
    Clauses c(res);
    RadialProblem p;
    p.N = 2;
    p.geometry = Ball{1.0, 0.0};
    const double center = radial_large_solution(p)(0.0);
    res.metrics["oracle_center"] = center;
    std::vector<double> errors;
    for (int e : {6, 7, 8}) {
        DomainPtr d = build_domain(Shape::disk(0, 0, 1), std::ldexp(1.0, -e));
        LadderResult r = maximal_solution(d, Nonlinearity::power(3.0), Field(d, 0.0), Field(d, 0.0), ladder_options(o));
        const double value = r.u.at({0, 0});
        errors.push_back(std::abs(value - center));
        res.metrics["center_h" + std::to_string(e)] = value;
    }
    const double rel = errors.back() / center;
    // With three equally spaced levels the least-squares slope is the end-to-end one.
    const double order = (std::log2(errors[0]) - std::log2(errors[2])) / 2.0;
    res.metrics["relative_error_h8"] = rel;
    res.metrics["order"] = order;
    c.add("center", rel <= 0.02, "relative error " + num(rel) + " at h=2^-8");
    c.add("order", order >= 1.0, "empirical order " + num(order) + " over h=2^-6..2^-8");
    c.finish();
}

void uniqueness(CriterionResult& res, const VerifyOptions& o) {
    Clauses c(res);
    const double tol = 1e-3;
    const double h = std::ldexp(1.0, -6);
    const Shape disk = Shape::disk(0, 0, 1);
    const Nonlinearity g = Nonlinearity::power(3.0);
    for (const char* f : {"0", "1", "rho_power(1)"}) {
        GapReport r = uniqueness_gap(disk, h, g, Forcing::parse(f), std::nullopt, ladder_options(o, tol));
        res.metrics[f] = {{"sup_gap_f", r.sup_gap_f}, {"sup_gap_0", r.sup_gap_0}, {"monotone_ok", r.monotone_ok}};
        if (std::string(f) == "0")
            c.add("sup_gap_0", r.sup_gap_0 <= 5 * tol, "sup gap " + num(r.sup_gap_0));
        else
            c.add(std::string("monotone_") + f, r.monotone_ok, "sup gap_f " + num(r.sup_gap_f));
    }
    c.finish();
}

void dichotomy(CriterionResult& res, const VerifyOptions& o) {
    Clauses c(res);
    const double tol = 1e-4;
    DomainPtr d = build_domain(Shape::interval(0, 1), std::ldexp(1.0, -21));
    const Nonlinearity g = Nonlinearity::power(3.0);
    const Field zero(d, 0.0);

    BvpResult one = minimal_supersolution_bvp(d, g, Field(d, 1.0), zero, ladder_options(o, tol));
    SemilinearResult direct = solve_semilinear_dirichlet(d, g, Field(d, 1.0), zero, nullptr, solve_options(o));
    double diff = 0.0;
    for (std::size_t k : d->active()) diff = std::max(diff, std::abs(one.u[k] - direct.u[k]));
    res.metrics["f1_diverged"] = one.diverged;
    res.metrics["f1_vs_direct"] = diff;
    c.add("bounded", !one.diverged && diff <= tol, "diverged=" + std::to_string(one.diverged) + ", gap to direct solve " + num(diff));

    Field f = sample_forcing(Forcing::rho_power(1.0, 3.0), d).field;
    BvpResult blow = minimal_supersolution_bvp(d, g, f, zero, ladder_options(o, tol));
    res.metrics["rho3_diverged"] = blow.diverged;
    res.metrics["rho3_boundary_max"] = blow.boundary_max;
    c.add("divergent", blow.diverged && blow.boundary_max > 1e6,
          "diverged=" + std::to_string(blow.diverged) + ", boundary max " + num(blow.boundary_max));
    c.finish();
}

void whole_space(CriterionResult& res, const VerifyOptions& o) {
    Clauses c(res);
    const double tol = 1e-4;
    const double h = 1.0 / 16.0;
    const Nonlinearity g = Nonlinearity::power(3.0);
    const LadderOptions opts = ladder_options(o, tol);

    LadderResult zero = whole_space_solution(2, h, g, Forcing::constant(0.0), opts);
    res.metrics["f0_max_abs"] = zero.u.max_abs_active();
    c.add("f0", zero.u.max_abs_active() <= tol, "max |u| " + num(zero.u.max_abs_active()));

    LadderResult one = whole_space_solution(2, h, g, Forcing::constant(1.0), opts);
    double dev = 0.0;
    for (std::size_t k : one.u.grid().active()) dev = std::max(dev, std::abs(one.u[k] - 1.0));
    res.metrics["f1_max_dev"] = dev;
    c.add("f1", dev <= tol, "max |u-1| " + num(dev));

    LadderOptions wide = opts;
    wide.R0 = 2.0;
    wide.R_max = 8.0;
    try {
        LadderResult ind = whole_space_solution(2, h, g, Forcing::indicator(Shape::disk(0, 0, 1)), wide);
        double change = INFINITY;
        for (const LevelRecord& rec : ind.trace.levels)
            if (std::abs(rec.R - 8.0) < 1e-12) change = rec.interior_delta;
        res.metrics["indicator_R4_R8_change"] = json_number(change);
        res.metrics["sandwich_checks"] = ind.trace.sandwich_checks;
        c.add("R_change", change <= tol, "change between R=4 and R=8 " + num(change));
        c.add("sandwich", ind.trace.sandwich_checks > 0 && ind.trace.sandwich_failures == 0,
              std::to_string(ind.trace.sandwich_checks) + " levels, worst " + num(ind.trace.sandwich_worst));
    } catch (const ConsistencyError& e) {
        c.add("sandwich", false, e.what());
    }
    c.finish();
}

void duality(CriterionResult& res, const VerifyOptions& o) {
    Clauses c(res);
    const Nonlinearity g = Nonlinearity::power(3.0);
    const Forcing f = Forcing::parse("indicator(disk(0.5,0,0.5)) + -2*indicator(disk(-0.4,0.5,0.4))");
    for (int dim : {1, 2}) {
        const double h = dim == 1 ? std::ldexp(1.0, -6) : 1.0 / 16.0;
        LadderResult a = whole_space_solution(dim, h, g, f, ladder_options(o));
        LadderResult b = whole_space_solution(dim, h, tilde(g), f.dual(), ladder_options(o));
        const Lattice& lat = a.u.grid().lattice();
        double worst = 0.0;
        for (std::size_t k : a.u.grid().active()) {
            Point p = lat.point(k);
            worst = std::max(worst, std::abs(a.u[k] + b.u.at({-p.x, -p.y})));
        }
        const std::string key = "dim" + std::to_string(dim);
        res.metrics[key] = worst;
        c.add(key, worst <= 1e-8, "max |u + u~(-x)| " + num(worst));
    }
    c.finish();
}

// Gauss-Seidel sweeps with an exact scalar solve (bisection) per node.
std::vector<double> brute_force_solution(const std::vector<double>& start, const Nonlinearity& g,
                                         const std::vector<double>& f, double h, double lo, double hi) {
    std::vector<double> u = start;
    const double ih2 = 1.0 / (h * h);
    for (int sweep = 0; sweep < 20000; ++sweep) {
        double change = 0.0;
        for (std::size_t i = 1; i + 1 < u.size(); ++i) {
            auto F = [&](double v) { return (2.0 * v - u[i - 1] - u[i + 1]) * ih2 + g(v) - f[i]; };
            double a = lo, b = hi;
            for (int it = 0; it < 200 && b - a > 1e-15 * (1.0 + std::abs(a)); ++it) {
                const double mid = 0.5 * (a + b);
                (F(mid) > 0.0 ? b : a) = mid;
            }
            const double v = 0.5 * (a + b);
            change = std::max(change, std::abs(v - u[i]));
            u[i] = v;
        }
        if (change <= 1e-14) break;
    }
    return u;
}

void comparison_principle(CriterionResult& res, const VerifyOptions& o) {
    Clauses c(res);
    std::mt19937_64 rng(20240611);
    std::uniform_int_distribution<int> size(5, 10);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int trials = 200;
    int agree = 0;
    double worst_solution_gap = 0.0;
    std::string first_failure;
    for (int t = 0; t < trials; ++t) {
        const int n = size(rng);
        const double h = 1.0 / (n + 1);
        // Nondecreasing table through the origin with flat stretches.
        std::vector<double> tt, gg;
        for (int i = -8; i <= 8; ++i) tt.push_back(5.0 * i);
        gg.assign(tt.size(), 0.0);
        for (std::size_t i = 9; i < tt.size(); ++i) gg[i] = gg[i - 1] + (unit(rng) < 0.3 ? 0.0 : 20.0 * unit(rng));
        for (int i = 7; i >= 0; --i) gg[i] = gg[i + 1] - (unit(rng) < 0.3 ? 0.0 : 20.0 * unit(rng));
        gg.back() = std::max(gg.back(), 15.0);
        gg.front() = std::min(gg.front(), -15.0);
        const Nonlinearity g = Nonlinearity::custom(tt, gg);

        DomainPtr d = build_domain(Shape::interval(0, 1), h);
        const Lattice& lat = d->lattice();
        std::vector<std::size_t> order(d->active());
        order.insert(order.end(), d->boundary().begin(), d->boundary().end());
        std::sort(order.begin(), order.end(), [&](auto a, auto b) { return lat.point(a).x < lat.point(b).x; });

        Field f(d, 0.0), bdata(d, 0.0);
        for (std::size_t k : d->active()) f[k] = 20.0 * unit(rng) - 10.0;
        for (std::size_t k : d->boundary()) bdata[k] = 6.0 * unit(rng) - 3.0;

        bool ok = true;
        std::string why;
        SemilinearResult sol = solve_semilinear_dirichlet(d, g, f, bdata, nullptr, solve_options(o));

        std::vector<double> fv, start;
        for (std::size_t k : order) {
            fv.push_back(f[k]);
            start.push_back(bdata[k]);
        }
        const std::vector<double> bf = brute_force_solution(start, g, fv, h, -38.0, 38.0);
        double gap = 0.0;
        for (std::size_t i = 0; i < order.size(); ++i) gap = std::max(gap, std::abs(bf[i] - sol.u[order[i]]));
        worst_solution_gap = std::max(worst_solution_gap, gap);
        if (gap > 1e-8) {
            ok = false;
            why = "solver and enumeration differ by " + num(gap);
        }

        // Concave bumps: u - bump is a subsolution, u + bump a supersolution.
        const DiscreteOperator op(d);
        for (int pair = 0; pair < 3 && ok; ++pair) {
            const double a = unit(rng), b = unit(rng);
            Field sub(d, 0.0), super(d, 0.0);
            for (std::size_t k : order) {
                const double x = lat.point(k).x;
                const double bump = a * x * (1.0 - x) + 0.1 * b;
                sub[k] = sol.u[k] - bump;
                super[k] = sol.u[k] + bump;
            }
            ResidualField rs = residual(op, g, f, sub), rp = residual(op, g, f, super);
            Comparison below = check_comparison(sub, sol.u), above = check_comparison(super, sol.u);
            bool bf_below = true;
            for (std::size_t i = 0; i < order.size(); ++i)
                bf_below = bf_below && sub[order[i]] <= bf[i] + 1e-9 && super[order[i]] >= bf[i] - 1e-9;
            if (!rs.subsolution || !rp.supersolution || !below.leq || !above.geq || !bf_below) {
                ok = false;
                why = "sub/super ordering mismatch";
            }
        }
        if (ok)
            ++agree;
        else if (first_failure.empty())
            first_failure = "trial " + std::to_string(t) + ": " + why;
    }
    res.metrics["agree"] = agree;
    res.metrics["trials"] = trials;
    res.metrics["worst_solution_gap"] = worst_solution_gap;
    c.add("trials", agree == trials,
          std::to_string(agree) + "/" + std::to_string(trials) + " agree" +
              (first_failure.empty() ? "" : ", " + first_failure));
    c.finish();
}

using Check = void (*)(CriterionResult&, const VerifyOptions&);

struct Criterion {
    const char* name;
    Check check;
};

const Criterion kCriteria[] = {
    {"ko_closed_forms", ko_closed_forms},
    {"exact_cubic_1d", exact_cubic},
    {"exact_exponential_1d", exact_exponential},
    {"sandwich", sandwich},
    {"ladder_monotonicity", ladder_monotonicity},
    {"oracle_equivalence", oracle_equivalence},
    {"uniqueness_gap", uniqueness},
    {"dichotomy", dichotomy},
    {"whole_space", whole_space},
    {"duality", duality},
    {"comparison_principle", comparison_principle},
};

}  // namespace

bool VerifyReport::passed() const {
    return std::all_of(results.begin(), results.end(), [](const CriterionResult& r) { return r.passed; });
}

std::vector<int> suite_criteria(bool full) {
    if (!full) return {1, 2, 3, 11};
    return {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
}

std::string criterion_name(int id) {
    if (id < 1 || id > 11) throw InvalidArgument("criterion id must be in 1..11");
    return kCriteria[id - 1].name;
}

CriterionResult run_criterion(int id, const VerifyOptions& opts) {
    CriterionResult res;
    res.id = id;
    res.name = criterion_name(id);
    const auto t0 = std::chrono::steady_clock::now();
    try {
        kCriteria[id - 1].check(res, opts);
    } catch (const std::exception& e) {
        res.passed = false;
        res.detail = std::string("error: ") + e.what();
    }
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

VerifyReport verify(const VerifyOptions& opts, const std::function<void(const CriterionResult&)>& on_result) {
    VerifyReport rep;
    rep.suite = opts.full ? "full" : "fast";
    for (int id : suite_criteria(opts.full)) {
        rep.results.push_back(run_criterion(id, opts));
        if (on_result) on_result(rep.results.back());
    }
    return rep;
}

json report_json(const VerifyReport& report) {
    json out = {{"suite", report.suite}, {"passed", report.passed()}};
    json list = json::array();
    for (const CriterionResult& r : report.results)
        list.push_back({{"id", r.id}, {"name", r.name}, {"passed", r.passed}, {"detail", r.detail}, {"metrics", r.metrics}});
    out["criteria"] = list;
    return out;
}

std::string default_config_dir() {
    if (const char* env = std::getenv("LARGESOL_CONFIG_DIR")) return env;
    return LARGESOL_CONFIG_DIR;
}

}  // namespace largesol

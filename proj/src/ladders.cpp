#include "largesol/ladders.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <ostream>
#include <thread>

namespace largesol {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMonotoneTol = 1e-10;

std::string repr(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void require_ko(const Nonlinearity& g, const std::string& who) {
    bool ok = false;
    for (double base : {1.0, 10.0, 100.0}) {
        try {
            ok = ko_integral(g, base).converges;
            break;
        } catch (const InvalidArgument&) {
            continue;
        } catch (const Error&) {
            break;
        }
    }
    if (!ok) throw KoViolation(who + ": g = " + g.describe() + " fails the Keller-Osserman condition");
}

void require_nonnegative(const Field& f, const std::string& who) {
    for (std::size_t k : f.grid().active())
        if (f[k] < 0.0) throw PreconditionError(who + " needs f >= 0");
}

void require_subsolution(const DomainPtr& d, const Nonlinearity& g, const Field& V, const std::string& who) {
    DiscreteOperator op(d);
    Field zero(d, 0.0);
    ResidualField r = residual(op, g, zero, V);
    Eigen::VectorXd mag = op.stencil_magnitude(V);
    const auto& act = d->active();
    for (std::size_t i = 0; i < act.size(); ++i) {
        std::size_t k = act[i];
        double scale = 1.0 + std::abs(g(V[k])) + mag[static_cast<Eigen::Index>(i)];
        if (r.values[k] > 1e-9 * scale)
            throw PreconditionError(who + ": V is not a discrete subsolution (residual " + repr(r.values[k]) + ")");
    }
}

double probe_delta(const Field& a, const Field& b, const GridDomain& probe) {
    double d = 0.0;
    for (std::size_t k : probe.active()) d = std::max(d, std::abs(a[k] - b[k]));
    return d;
}

// Expects lower <= upper on `nodes`.
void check_order(MonotoneLog& log, const Field& lower, const Field& upper, const std::vector<std::size_t>& nodes) {
    ++log.checks;
    double worst = 0.0;
    for (std::size_t k : nodes) {
        double scale = std::max({1.0, std::abs(lower[k]), std::abs(upper[k])});
        worst = std::max(worst, (lower[k] - upper[k]) / scale);
    }
    log.worst = std::max(log.worst, worst);
    if (worst > kMonotoneTol) ++log.violations;
}

std::vector<std::size_t> common_active(const GridDomain& a, const GridDomain& b) {
    std::vector<std::size_t> out;
    for (std::size_t k : a.active())
        if (b.is_active(k)) out.push_back(k);
    return out;
}

// Values of u on its own nodes, fallback elsewhere on d.
Field blend(const Field& u, const DomainPtr& d, const Field& fallback) {
    Field out(d, 0.0);
    const GridDomain& src = u.grid();
    auto put = [&](std::size_t k) {
        out[k] = (src.is_active(k) || src.is_boundary(k)) ? u[k] : fallback[k];
    };
    for (std::size_t k : d->active()) put(k);
    for (std::size_t k : d->boundary()) put(k);
    return out;
}

DomainPtr exhaustion_or(const DomainPtr& root, int n, const DomainPtr& fallback) {
    if (n < 0) return fallback;
    try {
        return exhaustion(root, n);
    } catch (const DegenerateDomainError&) {
        return fallback;
    }
}

double max_active(const Field& f, const GridDomain& d) {
    double m = 0.0;
    for (std::size_t k : d.active()) m = std::max(m, f[k]);
    return m;
}

// The t with g(t) = v for nondecreasing g (the local balance of absorption
// and forcing), by bisection; clamped to g's range on bounded tables.
double equilibrium(const Nonlinearity& g, double v) {
    auto safe = [&](double t) {
        try {
            return g(t);
        } catch (const ExtrapolationError&) {
            return std::numeric_limits<double>::quiet_NaN();
        }
    };
    if (safe(0.0) == v) return 0.0;
    double lo = -1.0, hi = 1.0;
    for (int i = 0; i < 1100 && !(safe(lo) <= v); ++i) {
        if (std::isnan(safe(lo * 2.0))) break;
        lo *= 2.0;
    }
    for (int i = 0; i < 1100 && !(safe(hi) >= v); ++i) {
        if (std::isnan(safe(hi * 2.0))) break;
        hi *= 2.0;
    }
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        (safe(mid) < v ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

struct Stage {
    Field u;
    double m = 0.0;
};

// Dyadic m-ladder on one operator; stops after two consecutive probe deltas
// <= tol/4 or at the grid ceiling.
Stage m_ladder(const DiscreteOperator& op, const Nonlinearity& g, const Field& f, const GridDomain& probe,
               const std::function<Field(double)>& data, const Field* warm, double m_start,
               const LadderOptions& opts, LadderTrace& tr, LevelRecord tmpl,
               const std::vector<std::size_t>* layer = nullptr) {
    Field prev;
    bool have = false;
    int small = 0;
    double m = m_start;
    for (int lvl = 0;; ++lvl) {
        Field bd = data(m);
        const Field* init = have ? &prev : warm;
        SemilinearResult r = solve_semilinear_dirichlet(op, g, f, bd, init, opts.solve);
        double delta = have ? probe_delta(prev, r.u, probe) : (warm ? probe_delta(*warm, r.u, probe) : kInf);
        if (have) {
            check_order(tr.monotone["m"], prev, r.u, op.domain()->active());
            small = delta <= opts.tol / 4.0 ? small + 1 : 0;
        }
        LevelRecord rec = tmpl;
        rec.m = m;
        rec.interior_delta = delta;
        rec.iterations = r.report.iterations;
        rec.residual = r.report.final_residual;
        tr.levels.push_back(rec);
        if (layer) {
            double b = 0.0;
            for (std::size_t k : *layer) b = std::max(b, r.u[k]);
            tr.boundary_layer_max.push_back(b);
        }
        prev = std::move(r.u);
        have = true;
        if (m >= tr.m_ceiling) {
            tr.m_ceiling_reached = true;
            break;
        }
        if (small >= 2 && !opts.force_m_ceiling) break;
        if (lvl + 1 >= opts.max_levels) break;
        m *= 2.0;
    }
    return {std::move(prev), m};
}

void append_identical_level(LadderTrace& tr) {
    if (tr.levels.empty()) return;
    LevelRecord rec = tr.levels.back();
    rec.interior_delta = 0.0;
    rec.iterations = 0;
    tr.levels.push_back(rec);
}

}  // namespace

void LadderTrace::merge_checks(const LadderTrace& inner) {
    for (const auto& [key, log] : inner.monotone) {
        MonotoneLog& mine = monotone[key];
        mine.checks += log.checks;
        mine.violations += log.violations;
        mine.worst = std::max(mine.worst, log.worst);
    }
    sandwich_checks += inner.sandwich_checks;
    sandwich_failures += inner.sandwich_failures;
    sandwich_worst = std::max(sandwich_worst, inner.sandwich_worst);
}

bool LadderTrace::monotone_ok() const {
    return std::all_of(monotone.begin(), monotone.end(), [](const auto& kv) { return kv.second.violations == 0; });
}

void write_trace_csv(std::ostream& os, const LadderTrace& trace) {
    os << "level,m,k,n,R,interior_delta,iterations,residual\n";
    for (std::size_t i = 0; i < trace.levels.size(); ++i) {
        const LevelRecord& r = trace.levels[i];
        os << i << ',' << repr(r.m) << ',' << repr(r.k) << ',' << r.n << ',' << repr(r.R) << ','
           << repr(r.interior_delta) << ',' << r.iterations << ',' << repr(r.residual) << '\n';
    }
}

double m_ceiling(const Nonlinearity& g, double h) {
    if (!(h > 0.0)) throw InvalidArgument("m_ceiling needs h > 0");
    auto reach = [&](double a) {
        try {
            KoResult r = ko_integral(g, a);
            return r.converges ? r.value / std::sqrt(2.0) : kInf;
        } catch (const InvalidArgument&) {
            return kInf;
        }
    };
    double lo = 1.0, hi = 1.0;
    if (reach(1.0) > h) {
        while (reach(hi) > h) {
            hi *= 2.0;
            if (hi > 1e300) throw KoViolation("no finite boundary ceiling: KO integral does not decay");
        }
        lo = hi / 2.0;
    } else {
        while (lo > 1e-300 && reach(lo) <= h) lo /= 2.0;
        hi = lo * 2.0;
    }
    for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
        double mid = std::sqrt(lo * hi);
        (reach(mid) > h ? lo : hi) = mid;
    }
    return std::max(1.0, std::exp2(std::ceil(std::log2(hi) - 1e-12)));
}

Field sample_field(const Forcing& desc, const DomainPtr& domain) {
    Field out(domain, 0.0);
    const Lattice& lat = domain->lattice();
    auto put = [&](std::size_t k) {
        double v = desc.value(lat.point(k), domain->rho(k));
        if (std::isnan(v)) throw InvalidArgument("descriptor is NaN at a node");
        out[k] = std::clamp(v, -1e300, 1e300);
    };
    for (std::size_t k : domain->active()) put(k);
    for (std::size_t k : domain->boundary()) put(k);
    return out;
}

Field default_subsolution(const Nonlinearity& g, const DomainPtr& domain) {
    auto safe = [&](double t, double& v) {
        try {
            v = g(t);
            return true;
        } catch (const ExtrapolationError&) {
            return false;
        }
    };
    double v = 0.0;
    if (safe(0.0, v) && v <= 0.0) return Field(domain, 0.0);
    for (double t = -1.0; t >= -1e8; t *= 2.0) {
        if (!safe(t, v)) break;
        if (v <= 0.0) {
            double lo = t, hi = t / 2.0 > -1.0 ? 0.0 : t / 2.0;
            for (int it = 0; it < 200; ++it) {
                double mid = 0.5 * (lo + hi);
                double gm;
                if (!safe(mid, gm)) break;
                (gm <= 0.0 ? lo : hi) = mid;
            }
            return Field(domain, lo);
        }
    }
    if (domain->bounded())
        return solve_semilinear_dirichlet(domain, g, Field(domain, 0.0), Field(domain, 0.0)).u;
    throw PreconditionError("no default subsolution: supply V for this unbounded domain");
}

// ---------------------------------------------------------------- maximal

LadderResult maximal_solution(const DomainPtr& domain, const Nonlinearity& g, const Field& f, const Field& V,
                              const LadderOptions& opts) {
    const std::string who = "maximal_solution";
    if (domain->level() != -1) throw InvalidArgument(who + " needs a root domain");
    require_ko(g, who);
    require_nonnegative(f, who);
    require_subsolution(domain, g, V, who);

    LadderTrace tr;
    tr.m_ceiling = m_ceiling(g, domain->h());
    tr.probe = exhaustion_or(domain, opts.n_start - 2, domain);
    double m_floor = std::max(opts.m0, opts.m_floor);
    const Field zero(domain, 0.0);

    Field u_prev, v_prev;
    DomainPtr dom_prev;
    int n_small = 0;
    for (int n = opts.n_start; n < opts.n_start + opts.max_levels; ++n) {
        DomainPtr dn;
        try {
            dn = exhaustion(domain, n);
        } catch (const DegenerateDomainError&) {
            continue;
        }
        if (dom_prev && dn->same_active_set(*dom_prev)) {
            append_identical_level(tr);
            tr.outer_deltas.push_back(0.0);
            tr.saturated = true;
            tr.notes.push_back("exhaustion reached the grid domain at n=" + std::to_string(n - 1));
            break;
        }
        DomainPtr probe_n = exhaustion_or(domain, n - 2, dn);
        DiscreteOperator op(dn);
        Field warm;
        bool have_warm = false;
        if (dom_prev) {
            warm = u_prev.rehome(dn, m_floor);
            have_warm = true;
        }
        const double fmax = max_active(f, *dn);
        double k = opts.k0;
        Field stage_prev;
        bool have_stage = false;
        int k_small = 0;
        for (int kl = 0; kl < opts.max_levels; ++kl) {
            Field fk = truncate_forcing(f, k);
            LevelRecord tmpl;
            tmpl.k = k;
            tmpl.n = n;
            auto data = [&](double m) { return Field(dn, m); };
            Stage st = m_ladder(op, g, fk, *probe_n, data, have_warm ? &warm : nullptr, m_floor, opts, tr, tmpl);
            m_floor = st.m;
            if (have_stage) {
                check_order(tr.monotone["k"], stage_prev, st.u, dn->active());
                k_small = probe_delta(stage_prev, st.u, *probe_n) <= opts.tol / 4.0 ? k_small + 1 : 0;
            }
            if (opts.sandwich) {
                Field vwarm = v_prev.size() ? v_prev.rehome(dn, st.m) : st.u;
                SemilinearResult v = solve_semilinear_dirichlet(op, g, zero, Field(dn, st.m), &vwarm, opts.solve);
                Field w = solve_linear_dirichlet(op, fk, Field(dn, 0.0));
                double worst = 0.0;
                for (std::size_t q : dn->active()) {
                    double scale = std::max(1.0, std::abs(v.u[q]) + std::abs(w[q]));
                    worst = std::max({worst, (v.u[q] - st.u[q]) / scale, (st.u[q] - v.u[q] - w[q]) / scale});
                }
                ++tr.sandwich_checks;
                if (worst > 1e-10) ++tr.sandwich_failures;
                tr.sandwich_worst = std::max(tr.sandwich_worst, worst);
                v_prev = std::move(v.u);
            }
            warm = st.u;
            have_warm = true;
            stage_prev = std::move(st.u);
            have_stage = true;
            if (k >= fmax || k_small >= 2) break;
            k *= 2.0;
        }
        if (dom_prev) {
            check_order(tr.monotone["n_down"], stage_prev, u_prev, dom_prev->active());
            double delta = probe_delta(stage_prev, u_prev, *tr.probe);
            tr.outer_deltas.push_back(delta);
            n_small = delta <= opts.tol ? n_small + 1 : 0;
        }
        u_prev = std::move(stage_prev);
        dom_prev = dn;
        if (n_small >= 2) {
            tr.saturated = true;
            break;
        }
    }
    if (!dom_prev) throw DegenerateDomainError(who + ": every exhaustion level is empty");
    return {std::move(u_prev), std::move(tr)};
}

// ---------------------------------------------------------------- minimal above V

LadderResult minimal_solution_above(const DomainPtr& domain, const Nonlinearity& g, const Field& f,
                                    const Field& V, const LadderOptions& opts) {
    const std::string who = "minimal_solution_above";
    if (domain->level() != -1) throw InvalidArgument(who + " needs a root domain");
    require_ko(g, who);
    require_nonnegative(f, who);
    require_subsolution(domain, g, V, who);

    LadderTrace tr;
    tr.probe = exhaustion_or(domain, opts.n_start - 2, domain);
    Field u_prev;
    DomainPtr dom_prev;
    int small = 0;
    for (int n = opts.n_start; n < opts.n_start + opts.max_levels; ++n) {
        DomainPtr dn;
        try {
            dn = exhaustion(domain, n);
        } catch (const DegenerateDomainError&) {
            continue;
        }
        if (dom_prev && dn->same_active_set(*dom_prev)) {
            append_identical_level(tr);
            tr.outer_deltas.push_back(0.0);
            tr.saturated = true;
            break;
        }
        Field bd = blend(V, dn, V);
        Field warm = dom_prev ? blend(u_prev, dn, V) : bd;
        SemilinearResult r = solve_semilinear_dirichlet(DiscreteOperator(dn), g, f, bd, &warm, opts.solve);
        double delta = dom_prev ? probe_delta(u_prev, r.u, *tr.probe) : kInf;
        if (dom_prev) {
            check_order(tr.monotone["n_up"], u_prev, r.u, dom_prev->active());
            tr.outer_deltas.push_back(delta);
            small = delta <= opts.tol ? small + 1 : 0;
        }
        LevelRecord rec;
        rec.n = n;
        rec.interior_delta = delta;
        rec.iterations = r.report.iterations;
        rec.residual = r.report.final_residual;
        tr.levels.push_back(rec);
        u_prev = std::move(r.u);
        dom_prev = dn;
        if (small >= 2) {
            tr.saturated = true;
            break;
        }
    }
    if (!dom_prev) throw DegenerateDomainError(who + ": every exhaustion level is empty");
    return {std::move(u_prev), std::move(tr)};
}

// ---------------------------------------------------------------- minimal large, bounded

LadderResult minimal_large_solution(const DomainPtr& domain, const Nonlinearity& g, const Field& f,
                                    const LadderOptions& opts) {
    const std::string who = "minimal_large_solution";
    if (!domain->bounded())
        throw UnsupportedError(who + " needs a bounded domain; use minimal_large_solution_general");
    if (domain->level() != -1) throw InvalidArgument(who + " needs a root domain");
    require_ko(g, who);
    require_nonnegative(f, who);

    LadderTrace tr;
    tr.m_ceiling = m_ceiling(g, domain->h());
    tr.probe = exhaustion_or(domain, opts.n_start - 2, domain);
    DiscreteOperator op(domain);
    std::vector<std::size_t> layer;
    for (std::size_t k : domain->active())
        if (domain->rho(k) <= 2.0 * domain->h()) layer.push_back(k);

    const double fmax = max_active(f, *domain);
    double m_floor = std::max(opts.m0, opts.m_floor);
    double k = opts.k0;
    Field prev;
    bool have = false;
    int small = 0;
    for (int kl = 0; kl < opts.max_levels; ++kl) {
        Field fk = truncate_forcing(f, k);
        LevelRecord tmpl;
        tmpl.k = k;
        auto data = [&](double m) { return Field(domain, m); };
        Stage st = m_ladder(op, g, fk, *tr.probe, data, have ? &prev : nullptr, m_floor, opts, tr, tmpl, &layer);
        m_floor = st.m;
        if (have) {
            check_order(tr.monotone["k"], prev, st.u, domain->active());
            double delta = probe_delta(prev, st.u, *tr.probe);
            tr.outer_deltas.push_back(delta);
            small = delta <= opts.tol / 4.0 ? small + 1 : 0;
        }
        prev = std::move(st.u);
        have = true;
        if (k >= fmax) {
            append_identical_level(tr);
            tr.saturated = true;
            break;
        }
        if (small >= 2) {
            tr.saturated = true;
            break;
        }
        k *= 2.0;
    }
    return {std::move(prev), std::move(tr)};
}

// ---------------------------------------------------------------- minimal large, general

LadderResult minimal_large_solution_general(const Shape& shape, double h, const Nonlinearity& g,
                                            const Forcing& f, const std::optional<Forcing>& V,
                                            const LadderOptions& opts) {
    const std::string who = "minimal_large_solution_general";
    require_ko(g, who);
    const bool bounded = shape.bounded();
    const double L0 = shape.truncation();

    LadderTrace tr;
    tr.m_ceiling = m_ceiling(g, h);
    double m_floor = std::max(opts.m0, opts.m_floor);
    Field u_prev_j;
    DomainPtr probe0;
    int j_small = 0;
    const int jmax = bounded ? 0 : opts.max_box_levels;
    for (int j = 0; j <= jmax; ++j) {
        const double Lj = bounded ? 0.0 : std::ldexp(L0, j);
        Shape sj = bounded ? shape : shape.with_truncation(Lj);
        DomainPtr root = build_domain(sj, h);
        Field fj = sample_forcing(f, root).field;
        require_nonnegative(fj, who);
        Field Vj = V ? sample_field(*V, root) : default_subsolution(g, root);
        require_subsolution(root, g, Vj, who);
        LadderResult above = minimal_solution_above(root, g, Field(root, 0.0), Vj, opts);
        tr.merge_checks(above.trace);
        const Field V0 = blend(above.u, root, Vj);
        DomainPtr probe = exhaustion_or(root, opts.n_start - 2, root);
        if (!probe0) {
            probe0 = probe;
            tr.probe = probe0;
        }

        std::vector<Field> last_by_n;
        Field u_m_prev;
        int m_small = 0;
        double m = m_floor;
        for (int ml = 0; ml < opts.max_levels; ++ml, m *= 2.0) {
            auto data = [&](const DomainPtr& dn) {
                Field bd(dn, 0.0);
                for (std::size_t k : dn->boundary())
                    bd[k] = dn->kind(k) == NodeKind::Artificial ? V0[k] : std::max(m, V0[k]);
                return bd;
            };
            Field u_n;
            DomainPtr dom_prev;
            int n_small = 0;
            std::size_t slot = 0;
            for (int n = opts.n_start; n < opts.n_start + opts.max_levels; ++n) {
                DomainPtr dn;
                try {
                    dn = exhaustion(root, n);
                } catch (const DegenerateDomainError&) {
                    continue;
                }
                if (dom_prev && dn->same_active_set(*dom_prev)) break;
                Field bd = data(dn);
                Field warm;
                if (slot < last_by_n.size() && last_by_n[slot].grid().same_active_set(*dn))
                    warm = blend(last_by_n[slot], dn, bd);
                else
                    warm = dom_prev ? blend(u_n, dn, bd) : bd;
                SemilinearResult r = solve_semilinear_dirichlet(DiscreteOperator(dn), g, fj, bd, &warm, opts.solve);
                double delta = dom_prev ? probe_delta(u_n, r.u, *probe) : kInf;
                LevelRecord rec;
                rec.m = m;
                rec.n = n;
                rec.R = Lj;
                rec.interior_delta = delta;
                rec.iterations = r.report.iterations;
                rec.residual = r.report.final_residual;
                tr.levels.push_back(rec);
                if (dom_prev) n_small = delta <= opts.tol ? n_small + 1 : 0;
                if (slot < last_by_n.size())
                    last_by_n[slot] = r.u;
                else
                    last_by_n.push_back(r.u);
                ++slot;
                u_n = std::move(r.u);
                dom_prev = dn;
                if (n_small >= 2) break;
            }
            if (u_m_prev.size()) {
                auto nodes = common_active(u_m_prev.grid(), u_n.grid());
                check_order(tr.monotone["m"], u_m_prev, u_n, nodes);
                double delta = probe_delta(u_m_prev, u_n, *probe);
                m_small = delta <= opts.tol / 4.0 ? m_small + 1 : 0;
            }
            u_m_prev = std::move(u_n);
            if (m >= tr.m_ceiling) {
                tr.m_ceiling_reached = true;
                break;
            }
            if (m_small >= 2 && !opts.force_m_ceiling) break;
        }
        m_floor = std::min(m, tr.m_ceiling);

        if (u_prev_j.size()) {
            double delta = 0.0;
            const Lattice& lat = probe0->lattice();
            for (std::size_t k : probe0->active()) {
                Point p = lat.point(k);
                delta = std::max(delta, std::abs(u_m_prev.at(p) - u_prev_j.at(p)));
            }
            tr.outer_deltas.push_back(delta);
            j_small = delta <= opts.tol ? j_small + 1 : 0;
        }
        u_prev_j = std::move(u_m_prev);
        if (bounded || j_small >= 2) {
            tr.saturated = true;
            break;
        }
    }
    return {std::move(u_prev_j), std::move(tr)};
}

// ---------------------------------------------------------------- bvp

BvpResult minimal_supersolution_bvp(const DomainPtr& domain, const Nonlinearity& g, const Field& f,
                                    const Field& hdata, const LadderOptions& opts) {
    const std::string who = "minimal_supersolution_bvp";
    if (!domain->bounded()) throw UnsupportedError(who + " needs a bounded domain");
    require_nonnegative(f, who);
    for (std::size_t k : domain->boundary())
        if (!std::isfinite(hdata[k])) throw InvalidArgument(who + " needs finite boundary data");

    BvpResult out;
    LadderTrace& tr = out.trace;
    tr.probe = exhaustion_or(domain, opts.n_start - 2, domain);
    DiscreteOperator op(domain);
    std::vector<std::size_t> layer;
    std::array<std::size_t, 4> nb{};
    for (std::size_t k : domain->active()) {
        int c = domain->neighbours(k, nb);
        for (int t = 0; t < c; ++t)
            if (domain->is_boundary(nb[static_cast<std::size_t>(t)])) {
                layer.push_back(k);
                break;
            }
    }
    auto layer_max = [&](const Field& u) {
        double b = -kInf;
        for (std::size_t k : layer) b = std::max(b, u[k]);
        return b;
    };

    const double fmax = max_active(f, *domain);
    double k = opts.k0;
    Field prev;
    bool have = false;
    int interior_small = 0;
    std::vector<double> growth;
    bool boundary_settled = false;
    for (int kl = 0; kl < opts.max_levels; ++kl) {
        Field fk = truncate_forcing(f, k);
        SemilinearResult r = solve_semilinear_dirichlet(op, g, fk, hdata, have ? &prev : nullptr, opts.solve);
        double delta = have ? probe_delta(prev, r.u, *tr.probe) : kInf;
        double bmax = layer_max(r.u);
        tr.boundary_layer_max.push_back(bmax);
        if (have) {
            check_order(tr.monotone["k"], prev, r.u, domain->active());
            interior_small = delta <= opts.tol ? interior_small + 1 : 0;
            double bdelta = 0.0;
            for (std::size_t q : layer) bdelta = std::max(bdelta, std::abs(r.u[q] - prev[q]));
            growth.push_back(bmax - tr.boundary_layer_max[tr.boundary_layer_max.size() - 2]);
            boundary_settled = bdelta <= opts.tol;
        }
        LevelRecord rec;
        rec.k = k;
        rec.interior_delta = delta;
        rec.iterations = r.report.iterations;
        rec.residual = r.report.final_residual;
        tr.levels.push_back(rec);
        prev = std::move(r.u);
        have = true;
        if (k >= fmax) {
            append_identical_level(tr);
            interior_small = std::max(interior_small, 2);
            break;
        }
        if (interior_small >= 2 && boundary_settled) break;
        k *= 2.0;
    }
    tr.saturated = interior_small >= 2;
    const double probe_max = max_active(prev, *tr.probe);
    out.boundary_max = layer_max(prev);
    bool growing = growth.size() >= 3 &&
                   std::all_of(growth.end() - 3, growth.end(), [&](double d) { return d > opts.tol; });
    out.diverged = tr.saturated && growing && out.boundary_max > probe_max;
    if (out.diverged) tr.notes.push_back("boundary-adjacent values grow with k while the interior saturates");
    out.u = std::move(prev);
    return out;
}

// ---------------------------------------------------------------- whole space

LadderResult whole_space_solution(int dim, double h, const Nonlinearity& g, const Forcing& f,
                                  const LadderOptions& opts) {
    const std::string who = "whole_space_solution";
    if (dim != 1 && dim != 2) throw InvalidArgument(who + " supports dimension 1 or 2");
    if (g(0.0) != 0.0) throw UnsupportedError(who + " needs g(0) = 0");
    const Nonlinearity gt = tilde(g);
    require_ko(g, who);
    require_ko(gt, who + " (reflected g)");
    const Forcing fa = f.absolute();
    const Forcing ft = f.dual();
    const Forcing fta = ft.absolute();
    auto ball = [dim](double R) { return dim == 1 ? Shape::interval(-R, R) : Shape::disk(0, 0, R); };

    LadderTrace tr;
    tr.probe = build_domain(ball(opts.R0 / 2.0), h);
    tr.m_ceiling = m_ceiling(g, h);
    Field u_prev;
    int small = 0;
    for (double R = opts.R0; R <= opts.R_max * (1.0 + 1e-12); R *= 2.0) {
        DomainPtr dom = build_domain(ball(R), h);
        const Lattice& lat = dom->lattice();
        LadderResult U = maximal_solution(dom, g, sample_forcing(fa, dom).field, Field(dom, 0.0), opts);
        LadderResult W = maximal_solution(dom, gt, sample_forcing(fta, dom).field, Field(dom, 0.0), opts);
        tr.merge_checks(U.trace);
        tr.merge_checks(W.trace);
        const GridDomain& Ud = U.u.grid();
        const GridDomain& Wd = W.u.grid();
        auto defined = [](const GridDomain& d, long k) {
            return k >= 0 && (d.is_active(static_cast<std::size_t>(k)) || d.is_boundary(static_cast<std::size_t>(k)));
        };

        Field bd(dom, 0.0);
        for (std::size_t k : dom->boundary()) {
            Point p = lat.point(k);
            long mk = lat.locate({-p.x, -p.y});
            double lo = defined(Wd, mk) ? -W.u[static_cast<std::size_t>(mk)] : -kInf;
            double hi = defined(Ud, static_cast<long>(k)) ? U.u[k] : kInf;
            bd[k] = std::clamp(equilibrium(g, f.value(p, dom->rho(k))), lo, hi);
        }
        Field fR = sample_forcing(f, dom).field;
        SemilinearResult r = solve_semilinear_dirichlet(DiscreteOperator(dom), g, fR, bd, nullptr, opts.solve);

        double worst = 0.0;
        for (std::size_t k : dom->active()) {
            double scale = std::max(1.0, std::abs(r.u[k]));
            if (Ud.is_active(k)) worst = std::max(worst, (r.u[k] - U.u[k]) / scale);
            Point p = lat.point(k);
            long mk = lat.locate({-p.x, -p.y});
            if (mk >= 0 && Wd.is_active(static_cast<std::size_t>(mk)))
                worst = std::max(worst, (-W.u[static_cast<std::size_t>(mk)] - r.u[k]) / scale);
        }
        ++tr.sandwich_checks;
        tr.sandwich_worst = std::max(tr.sandwich_worst, worst);
        if (worst > 1e-10) {
            ++tr.sandwich_failures;
            throw ConsistencyError(who + ": sandwich -W(-x) <= u <= U violated by " + repr(worst) + " at R=" + repr(R));
        }

        double delta = kInf;
        if (u_prev.size()) {
            delta = 0.0;
            const Lattice& pl = tr.probe->lattice();
            for (std::size_t k : tr.probe->active()) {
                Point p = pl.point(k);
                delta = std::max(delta, std::abs(r.u.at(p) - u_prev.at(p)));
            }
            if (fR.min_active() >= 0.0) {
                Field mapped(u_prev.domain(), 0.0);
                const Lattice& ol = u_prev.grid().lattice();
                for (std::size_t k : u_prev.grid().active()) mapped[k] = r.u.at(ol.point(k));
                check_order(tr.monotone["R"], u_prev, mapped, u_prev.grid().active());
            }
            small = delta <= opts.tol ? small + 1 : 0;
            tr.outer_deltas.push_back(delta);
        }
        LevelRecord rec;
        rec.R = R;
        rec.m = U.trace.levels.empty() ? 0.0 : U.trace.levels.back().m;
        rec.interior_delta = delta;
        rec.iterations = r.report.iterations;
        rec.residual = r.report.final_residual;
        tr.levels.push_back(rec);
        u_prev = std::move(r.u);
        if (small >= 2) {
            tr.saturated = true;
            break;
        }
    }
    return {std::move(u_prev), std::move(tr)};
}

// ---------------------------------------------------------------- gap

void run_parallel(std::vector<std::function<void()>>& tasks) {
    unsigned cap = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("LARGESOL_THREADS")) {
        int v = std::atoi(env);
        if (v >= 1) cap = static_cast<unsigned>(v);
    }
    std::vector<std::exception_ptr> errors(tasks.size());
    for (std::size_t start = 0; start < tasks.size(); start += cap) {
        std::size_t end = std::min(tasks.size(), start + cap);
        if (end - start == 1) {
            try {
                tasks[start]();
            } catch (...) {
                errors[start] = std::current_exception();
            }
            continue;
        }
        std::vector<std::thread> pool;
        for (std::size_t i = start; i < end; ++i)
            pool.emplace_back([&, i] {
                try {
                    tasks[i]();
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            });
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

GapReport uniqueness_gap(const Shape& shape, double h, const Nonlinearity& g, const Forcing& f,
                         const std::optional<Forcing>& V, const LadderOptions& opts) {
    GapReport rep;
    DomainPtr root = build_domain(shape, h);
    LadderOptions o = opts;
    o.force_m_ceiling = true;
    const double ceiling = m_ceiling(g, h);
    NonlinearityReport nl = analyze(g, 0.0, ceiling, 64);
    rep.convex = nl.convex;
    if (!nl.convex) rep.warnings.push_back("g is not convex on the sampled range; the gap inequality may fail");

    Field f_field = sample_forcing(f, root).field;
    Field V_field = V ? sample_field(*V, root) : default_subsolution(g, root);
    const bool f_zero = f_field.max_abs_active() == 0.0;
    const Forcing zero_f = Forcing::constant(0.0);

    LadderResult uf, lf, u0, l0;
    std::vector<std::function<void()>> tasks;
    tasks.emplace_back([&] { uf = maximal_solution(root, g, f_field, V_field, o); });
    tasks.emplace_back([&] { lf = minimal_large_solution_general(shape, h, g, f, V, o); });
    if (!f_zero) {
        tasks.emplace_back([&] { u0 = maximal_solution(root, g, Field(root, 0.0), V_field, o); });
        tasks.emplace_back([&] { l0 = minimal_large_solution_general(shape, h, g, zero_f, V, o); });
    }
    run_parallel(tasks);
    if (f_zero) {
        u0 = uf;
        l0 = lf;
    }
    for (const auto* r : {&uf, &lf, &u0, &l0}) rep.trace.merge_checks(r->trace);
    rep.trace.probe = exhaustion_or(root, o.n_start - 2, root);
    rep.trace.m_ceiling = ceiling;

    const GridDomain& probe = *rep.trace.probe;
    rep.gap_f = Field(rep.trace.probe, 0.0);
    rep.gap_0 = Field(rep.trace.probe, 0.0);
    rep.monotone_ok = true;
    rep.min_gap = kInf;
    for (std::size_t k : probe.active()) {
        double gf = uf.u[k] - lf.u[k];
        double g0 = u0.u[k] - l0.u[k];
        rep.gap_f[k] = gf;
        rep.gap_0[k] = g0;
        rep.sup_gap_f = std::max(rep.sup_gap_f, gf);
        rep.sup_gap_0 = std::max(rep.sup_gap_0, g0);
        rep.min_gap = std::min({rep.min_gap, gf, g0});
        if (gf > g0 + 1e-10) rep.monotone_ok = false;
    }
    rep.upper_f = std::move(uf.u);
    rep.lower_f = std::move(lf.u);
    rep.upper_0 = std::move(u0.u);
    rep.lower_0 = std::move(l0.u);
    return rep;
}

}  // namespace largesol

#include "largesol/run.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "largesol/elliptic.hpp"
#include "largesol/errors.hpp"
#include "largesol/radial.hpp"
#include "largesol/verify.hpp"

namespace largesol {

namespace fs = std::filesystem;
using nlohmann::json;

json json_number(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    return v;
}

namespace {

json trace_json(const LadderTrace& tr) {
    json out;
    out["levels"] = tr.levels.size();
    out["saturated"] = tr.saturated;
    out["m_ceiling"] = json_number(tr.m_ceiling);
    out["m_ceiling_reached"] = tr.m_ceiling_reached;
    json mono = json::object();
    for (const auto& [key, log] : tr.monotone)
        mono[key] = {{"checks", log.checks}, {"violations", log.violations}, {"worst", json_number(log.worst)}};
    out["monotone"] = mono;
    out["monotone_ok"] = tr.monotone_ok();
    if (tr.sandwich_checks > 0)
        out["sandwich"] = {{"checks", tr.sandwich_checks},
                           {"failures", tr.sandwich_failures},
                           {"worst", json_number(tr.sandwich_worst)}};
    if (!tr.outer_deltas.empty()) out["final_outer_delta"] = json_number(tr.outer_deltas.back());
    if (!tr.levels.empty()) out["final_interior_delta"] = json_number(tr.levels.back().interior_delta);
    if (!tr.notes.empty()) out["notes"] = tr.notes;
    return out;
}

json field_json(const Field& u) {
    return {{"max", json_number(u.max_active())}, {"min", json_number(u.min_active())},
            {"active_nodes", u.grid().active().size()}};
}

LadderOptions ladder_options(const ExperimentConfig& cfg) {
    LadderOptions o;
    o.tol = cfg.tol;
    o.sandwich = cfg.sandwich;
    o.R0 = cfg.R0;
    o.R_max = cfg.R_max;
    o.max_box_levels = cfg.max_box_levels;
    return o;
}

Field boundary_data(const std::string& desc, const DomainPtr& d, const std::string& base_dir) {
    return sample_field(Forcing::parse(desc, base_dir), d);
}

RunOutcome run_oracle(const ExperimentConfig& cfg) {
    RadialProblem p;
    p.N = cfg.N;
    p.g = make_nonlinearity(cfg);
    Forcing f = Forcing::parse(cfg.forcing, cfg.base_dir);
    if (!(f.is_constant() && f.value({0.0, 0.0}, std::numeric_limits<double>::quiet_NaN()) == 0.0))
        p.f = [f](double r) { return f.value({r, 0.0}, std::numeric_limits<double>::quiet_NaN()); };
    double lo_default = 0.0, hi_default = 0.0;
    if (cfg.geometry == "ball") {
        p.geometry = Ball{cfg.R, cfg.value};
        hi_default = cfg.condition == "large" ? 0.99 * cfg.R : cfg.R;
    } else if (cfg.geometry == "exterior") {
        p.geometry = Exterior{cfg.R, cfg.L, cfg.far_value};
        lo_default = cfg.R + 0.01 * (cfg.L - cfg.R);
        hi_default = cfg.L;
    } else if (cfg.geometry == "halfline") {
        p.geometry = HalfLine{cfg.L, cfg.far_value};
        lo_default = 0.01 * cfg.L;
        hi_default = cfg.L;
    } else if (cfg.geometry == "segment") {
        p.geometry = Segment{cfg.seg_a, cfg.seg_b, cfg.ua, cfg.ub};
        lo_default = cfg.seg_a;
        hi_default = cfg.seg_b;
    } else {
        throw InvalidArgument("unknown oracle geometry '" + cfg.geometry + "'");
    }
    RadialProfile prof;
    if (cfg.condition == "large")
        prof = radial_large_solution(p);
    else if (cfg.condition == "dirichlet")
        prof = radial_dirichlet(p);
    else
        throw InvalidArgument("oracle condition must be large or dirichlet");

    const double lo = cfg.r_min.value_or(std::max(lo_default, prof.lo())), hi = cfg.r_max.value_or(std::min(hi_default, prof.hi()));
    if (cfg.samples < 2 || !(hi > lo)) throw InvalidArgument("oracle sampling range is empty");
    std::vector<double> rs;
    for (int i = 0; i < cfg.samples; ++i) rs.push_back(lo + (hi - lo) * i / (cfg.samples - 1));
    std::ostringstream csv;
    prof.write_csv(csv, rs);

    RunOutcome out;
    json& s = out.summary;
    s["shooting_parameter"] = prof.shooting_parameter;
    s["bracket_width"] = prof.bracket_width;
    s["blowup_radius"] = json_number(prof.blowup_radius);
    s["ode_residual"] = prof.ode_residual(p, lo, hi);
    s["sample_range"] = {lo, hi};
    if (cfg.geometry == "ball") s["center_value"] = prof(0.0);
    out.profile_csv = csv.str();
    return out;
}

}  // namespace

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ParseError*>(&e)) return kExitUsage;
    if (dynamic_cast<const PreconditionError*>(&e)) return kExitPrecondition;
    if (dynamic_cast<const NumericalError*>(&e)) return kExitConvergence;
    return kExitConvergence;
}

RunOutcome execute(const ExperimentConfig& cfg) {
    if (cfg.mode == Mode::Oracle) return run_oracle(cfg);
    if (cfg.mode == Mode::Verify) {
        VerifyOptions vo;
        vo.full = cfg.suite == "full";
        vo.config_dir = default_config_dir();
        VerifyReport rep = verify(vo);
        RunOutcome out;
        out.summary["report"] = report_json(rep);
        out.summary["passed"] = rep.passed();
        out.exit_code = rep.passed() ? kExitOk : kExitUsage;
        return out;
    }

    const Nonlinearity g = make_nonlinearity(cfg);
    RunOutcome out;
    json& s = out.summary;
    if (cfg.mode == Mode::KoCheck) {
        KoResult ko = ko_integral(g, cfg.ko_base);
        s["ko_holds"] = ko.converges;
        s["ko_value"] = json_number(ko.value);
        NonlinearityReport rep = analyze(g);
        s["convex"] = rep.convex;
        if (rep.superadditive_L) s["superadditive_L"] = *rep.superadditive_L;
        if (rep.power_like_c) s["power_like_c"] = *rep.power_like_c;
        return out;
    }

    const LadderOptions opts = ladder_options(cfg);
    const Forcing forcing = Forcing::parse(cfg.forcing, cfg.base_dir);
    if (cfg.mode == Mode::WholeSpace) {
        LadderResult r = whole_space_solution(cfg.dim, cfg.h, g, forcing, opts);
        s["trace"] = trace_json(r.trace);
        s["field"] = field_json(r.u);
        s["center_value"] = r.u.at({0.0, 0.0});
        out.trace = std::move(r.trace);
        out.field = std::move(r.u);
        return out;
    }

    const Shape shape = Shape::parse(cfg.shape);
    if (cfg.mode == Mode::Gap) {
        std::optional<Forcing> V;
        if (cfg.V) V = Forcing::parse(*cfg.V, cfg.base_dir);
        LadderOptions o = opts;
        GapReport rep = uniqueness_gap(shape, cfg.h, g, forcing, V, o);
        s["sup_gap_f"] = rep.sup_gap_f;
        s["sup_gap_0"] = rep.sup_gap_0;
        s["min_gap"] = json_number(rep.min_gap);
        s["monotone_ok"] = rep.monotone_ok;
        s["convex"] = rep.convex;
        s["warnings"] = rep.warnings;
        s["trace"] = trace_json(rep.trace);
        out.trace = std::move(rep.trace);
        out.field = std::move(rep.gap_f);
        return out;
    }

    if (cfg.mode == Mode::MinimalLarge && !shape.bounded()) {
        std::optional<Forcing> V;
        if (cfg.V) V = Forcing::parse(*cfg.V, cfg.base_dir);
        LadderResult r = minimal_large_solution_general(shape, cfg.h, g, forcing, V, opts);
        s["trace"] = trace_json(r.trace);
        s["field"] = field_json(r.u);
        out.trace = std::move(r.trace);
        out.field = std::move(r.u);
        return out;
    }

    if (cfg.mode == Mode::MinimalLarge && cfg.V)
        throw InvalidArgument("V applies to minimal-large only on domains with an exterior part");
    const DomainPtr dom = build_domain(shape, cfg.h);
    ForcingSample sampled = sample_forcing(forcing, dom);
    s["forcing_clamped_nodes"] = sampled.clamped;
    auto subsolution = [&] { return cfg.V ? sample_field(Forcing::parse(*cfg.V, cfg.base_dir), dom) : default_subsolution(g, dom); };

    switch (cfg.mode) {
        case Mode::Solve: {
            SemilinearResult r = solve_semilinear_dirichlet(dom, g, sampled.field, boundary_data(cfg.bdata, dom, cfg.base_dir));
            s["iterations"] = r.report.iterations;
            s["final_residual"] = r.report.final_residual;
            s["scaled_residual"] = r.report.scaled_residual;
            s["method"] = r.report.method == Method::Newton ? "newton" : "picard";
            s["field"] = field_json(r.u);
            LadderTrace tr;
            LevelRecord rec;
            rec.interior_delta = std::numeric_limits<double>::infinity();
            rec.iterations = r.report.iterations;
            rec.residual = r.report.final_residual;
            tr.levels.push_back(rec);
            out.trace = std::move(tr);
            out.field = std::move(r.u);
            return out;
        }
        case Mode::Maximal:
        case Mode::MinimalAbove:
        case Mode::MinimalLarge: {
            LadderResult r = cfg.mode == Mode::Maximal        ? maximal_solution(dom, g, sampled.field, subsolution(), opts)
                             : cfg.mode == Mode::MinimalAbove ? minimal_solution_above(dom, g, sampled.field, subsolution(), opts)
                                                              : minimal_large_solution(dom, g, sampled.field, opts);
            s["trace"] = trace_json(r.trace);
            s["field"] = field_json(r.u);
            out.trace = std::move(r.trace);
            out.field = std::move(r.u);
            return out;
        }
        case Mode::Bvp: {
            BvpResult r = minimal_supersolution_bvp(dom, g, sampled.field, boundary_data(cfg.bdata, dom, cfg.base_dir), opts);
            s["diverged"] = r.diverged;
            s["boundary_max"] = r.boundary_max;
            s["trace"] = trace_json(r.trace);
            s["field"] = field_json(r.u);
            out.trace = std::move(r.trace);
            out.field = std::move(r.u);
            return out;
        }
        default:
            break;
    }
    throw InvalidArgument("mode " + to_string(cfg.mode) + " is not dispatchable");
}

int run(const ExperimentConfig& cfg, std::ostream& err) {
    const auto t0 = std::chrono::steady_clock::now();
    RunOutcome out;
    try {
        out = execute(cfg);
    } catch (const std::exception& e) {
        out.summary["error"] = e.what();
        out.exit_code = exit_code_for(e);
        if (const auto* ce = dynamic_cast<const ConvergenceError*>(&e)) {
            out.summary["best_scaled_residual"] = ce->report.scaled_residual;
            out.field = ce->best;
        }
        err << "largesol: " << e.what() << '\n';
    }
    json summary = {{"mode", to_string(cfg.mode)},
                    {"g", cfg.g_family},
                    {"tol", cfg.tol},
                    {"exit_code", out.exit_code}};
    if (!cfg.shape.empty()) summary["shape"] = cfg.shape;
    if (cfg.h > 0.0) summary["h"] = cfg.h;
    if (cfg.mode != Mode::KoCheck && cfg.mode != Mode::Verify) summary["forcing"] = cfg.forcing;
    summary["results"] = out.summary;
    summary["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    fs::create_directories(cfg.output_dir);
    const fs::path dir(cfg.output_dir);
    std::ofstream(dir / "summary.json") << summary.dump(2) << '\n';
    if (out.trace) {
        std::ofstream os(dir / "trace.csv");
        write_trace_csv(os, *out.trace);
    }
    if (out.field) {
        std::ofstream os(dir / "field.dat");
        write_field(os, *out.field);
    }
    if (out.profile_csv) std::ofstream(dir / "profile.csv") << *out.profile_csv;
    return out.exit_code;
}

}  // namespace largesol

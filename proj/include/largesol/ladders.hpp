#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "largesol/elliptic.hpp"
#include "largesol/grid.hpp"
#include "largesol/nonlinearity.hpp"

namespace largesol {

struct LevelRecord {
    double m = 0.0;
    double k = 0.0;
    int n = -1;
    double R = 0.0;
    double interior_delta = 0.0;  // +inf on the first level of a ladder
    int iterations = 0;
    double residual = 0.0;
};

// Nodewise check of one monotone direction across consecutive levels.
struct MonotoneLog {
    int checks = 0;
    int violations = 0;
    double worst = 0.0;  // largest violation divided by the node scale
};

struct LadderTrace {
    std::vector<LevelRecord> levels;
    bool saturated = false;
    DomainPtr probe;
    std::map<std::string, MonotoneLog> monotone;  // keyed by "m", "k", "n_down", "n_up", "R"
    double m_ceiling = 0.0;
    bool m_ceiling_reached = false;
    int sandwich_checks = 0;
    int sandwich_failures = 0;
    double sandwich_worst = 0.0;
    std::vector<double> boundary_layer_max;  // blow-up witness per level, where recorded
    std::vector<double> outer_deltas;  // probe change of the outermost ladder per level
    std::vector<std::string> notes;

    void merge_checks(const LadderTrace& inner);
    bool monotone_ok() const;
};

void write_trace_csv(std::ostream& os, const LadderTrace& trace);

struct LadderOptions {
    double tol = 1e-4;
    SolveOptions solve;
    double m0 = 1.0;
    double k0 = 1.0;
    double m_floor = 0.0;          // m-ladders start at max(m0, m_floor)
    bool force_m_ceiling = false;  // keep doubling m until the grid ceiling
    bool sandwich = false;         // check v_n <= u_{n,k} <= v_n + w_{n,k} at every level
    int n_start = 2;
    int max_levels = 80;           // per ladder
    int max_box_levels = 3;        // truncation-box doublings for unbounded domains
    double R0 = 2.0;
    double R_max = 8.0;
};

struct LadderResult {
    Field u;
    LadderTrace trace;
};

// Smallest dyadic m >= psi(h), where psi solves int_psi^inf dt / sqrt(2 G(t)) = h:
// the one-dimensional large solution's value at distance h from the boundary.
double m_ceiling(const Nonlinearity& g, double h);

// Constant r0 with g(r0) <= 0 when one exists, else the solution of the
// absorption equation with zero data on a bounded domain.
Field default_subsolution(const Nonlinearity& g, const DomainPtr& domain);

LadderResult maximal_solution(const DomainPtr& domain, const Nonlinearity& g, const Field& f, const Field& V,
                              const LadderOptions& opts = {});

LadderResult minimal_solution_above(const DomainPtr& domain, const Nonlinearity& g, const Field& f,
                                    const Field& V, const LadderOptions& opts = {});

LadderResult minimal_large_solution(const DomainPtr& domain, const Nonlinearity& g, const Field& f,
                                    const LadderOptions& opts = {});

// V: descriptor evaluated on every node; nullopt selects default_subsolution.
LadderResult minimal_large_solution_general(const Shape& shape, double h, const Nonlinearity& g,
                                            const Forcing& f, const std::optional<Forcing>& V,
                                            const LadderOptions& opts = {});

struct BvpResult {
    Field u;
    LadderTrace trace;
    bool diverged = false;
    double boundary_max = 0.0;
};

BvpResult minimal_supersolution_bvp(const DomainPtr& domain, const Nonlinearity& g, const Field& f,
                                    const Field& hdata, const LadderOptions& opts = {});

LadderResult whole_space_solution(int dim, double h, const Nonlinearity& g, const Forcing& f,
                                  const LadderOptions& opts = {});

struct GapReport {
    Field gap_f;  // on the probe nodes, zero elsewhere
    Field gap_0;
    bool monotone_ok = false;
    double sup_gap_f = 0.0;
    double sup_gap_0 = 0.0;
    double min_gap = 0.0;  // most negative entry of either gap
    bool convex = true;
    std::vector<std::string> warnings;
    LadderTrace trace;  // merged checks of the four runs
    Field upper_f, lower_f, upper_0, lower_0;
};

GapReport uniqueness_gap(const Shape& shape, double h, const Nonlinearity& g, const Forcing& f,
                         const std::optional<Forcing>& V, const LadderOptions& opts = {});

// Descriptor evaluated on active and boundary nodes.
Field sample_field(const Forcing& desc, const DomainPtr& domain);

// Runs tasks with at most LARGESOL_THREADS workers (default: hardware threads).
void run_parallel(std::vector<std::function<void()>>& tasks);

}  // namespace largesol

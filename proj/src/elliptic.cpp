#include "largesol/elliptic.hpp"

#include <Eigen/OrderingMethods>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace largesol {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();


std::string where(const GridDomain& d, std::size_t k) {
    Point p = d.lattice().point(k);
    std::ostringstream os;
    os.precision(6);
    os << "at x=" << p.x;
    if (d.dim() == 2) os << ", y=" << p.y;
    return os.str();
}

}  // namespace

// ---------------------------------------------------------------- operator

DiscreteOperator::DiscreteOperator(DomainPtr domain) : domain_(std::move(domain)) {
    const GridDomain& d = *domain_;
    if (d.active().empty()) throw DegenerateDomainError("operator on an empty interior");
    const double h2 = d.h() * d.h();
    diag_ = 2.0 * d.dim() / h2;
    off_ = -1.0 / h2;
    const std::size_t n = d.active().size();
    boundary_coupling_.assign(n, {});
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(n * (1 + 2 * static_cast<std::size_t>(d.dim())));
    std::array<std::size_t, 4> nb{};
    for (std::size_t r = 0; r < n; ++r) {
        std::size_t k = d.active()[r];
        trip.emplace_back(static_cast<int>(r), static_cast<int>(r), diag_);
        int c = d.neighbours(k, nb);
        for (int t = 0; t < c; ++t) {
            std::size_t q = nb[static_cast<std::size_t>(t)];
            long a = d.active_index(q);
            if (a >= 0)
                trip.emplace_back(static_cast<int>(r), static_cast<int>(a), off_);
            else
                boundary_coupling_[r].push_back(q);
        }
    }
    matrix_.resize(static_cast<int>(n), static_cast<int>(n));
    matrix_.setFromTriplets(trip.begin(), trip.end());
    matrix_.makeCompressed();

    tridiagonal_ = d.dim() == 1;
    if (!tridiagonal_) {
        Eigen::SparseMatrix<double> colmajor = matrix_;
        Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> perm;
        Eigen::AMDOrdering<int> amd;
        amd(colmajor, perm);
        // Unknown i goes to position order_[i] of the permuted system.
        order_.assign(n, 0);
        for (int i = 0; i < static_cast<int>(n); ++i) order_[static_cast<std::size_t>(perm.indices()[i])] = i;
    }
}

Eigen::VectorXd DiscreteOperator::boundary_rhs(const Field& data) const {
    const std::size_t n = unknowns();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t q : boundary_coupling_[r]) b[static_cast<Eigen::Index>(r)] -= off_ * data[q];
    return b;
}

Eigen::VectorXd DiscreteOperator::apply(const Field& u) const {
    const auto& act = domain_->active();
    Eigen::VectorXd x(static_cast<Eigen::Index>(act.size()));
    for (std::size_t r = 0; r < act.size(); ++r) x[static_cast<Eigen::Index>(r)] = u[act[r]];
    Eigen::VectorXd y = matrix_ * x;
    return y - boundary_rhs(u);
}

Eigen::VectorXd DiscreteOperator::stencil_magnitude(const Field& u) const {
    const GridDomain& d = *domain_;
    const auto& act = d.active();
    Eigen::VectorXd s(static_cast<Eigen::Index>(act.size()));
    std::array<std::size_t, 4> nb{};
    for (std::size_t r = 0; r < act.size(); ++r) {
        std::size_t k = act[r];
        double m = diag_ * std::abs(u[k]);
        int c = d.neighbours(k, nb);
        for (int t = 0; t < c; ++t) m -= off_ * std::abs(u[nb[static_cast<std::size_t>(t)]]);
        s[static_cast<Eigen::Index>(r)] = m;
    }
    return s;
}

// ---------------------------------------------------------------- solver

struct DiscreteOperator::Solver::Impl {
    const DiscreteOperator& op;
    // tridiagonal path
    std::vector<double> lower, upper, cprime, denom;
    // sparse path
    Eigen::SparseMatrix<double> permuted;
    std::vector<Eigen::Index> diag_pos;
    std::vector<double> base_values;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::NaturalOrdering<int>> ldlt;

    explicit Impl(const DiscreteOperator& o) : op(o) {
        const std::size_t n = op.unknowns();
        if (op.tridiagonal_) {
            lower.assign(n, 0.0);
            upper.assign(n, 0.0);
            const auto& act = op.domain_->active();
            for (std::size_t r = 1; r < n; ++r)
                if (act[r] == act[r - 1] + 1) lower[r] = upper[r - 1] = op.off_;
            cprime.assign(n, 0.0);
            denom.assign(n, 0.0);
            return;
        }
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(static_cast<std::size_t>(op.matrix_.nonZeros()));
        for (int r = 0; r < op.matrix_.outerSize(); ++r)
            for (Matrix::InnerIterator it(op.matrix_, r); it; ++it)
                trip.emplace_back(op.order_[static_cast<std::size_t>(it.row())],
                                  op.order_[static_cast<std::size_t>(it.col())], it.value());
        permuted.resize(static_cast<int>(n), static_cast<int>(n));
        permuted.setFromTriplets(trip.begin(), trip.end());
        permuted.makeCompressed();
        base_values.assign(permuted.valuePtr(), permuted.valuePtr() + permuted.nonZeros());
        diag_pos.assign(n, 0);
        for (int c = 0; c < permuted.outerSize(); ++c) {
            for (Eigen::Index p = permuted.outerIndexPtr()[c]; p < permuted.outerIndexPtr()[c + 1]; ++p)
                if (permuted.innerIndexPtr()[p] == c) diag_pos[static_cast<std::size_t>(c)] = p;
        }
        ldlt.analyzePattern(permuted);
    }

    void factor(const Eigen::VectorXd& shift) {
        const std::size_t n = op.unknowns();
        if (op.tridiagonal_) {
            for (std::size_t r = 0; r < n; ++r) {
                double b = op.diag_ + shift[static_cast<Eigen::Index>(r)];
                double den = r == 0 ? b : b - lower[r] * cprime[r - 1];
                denom[r] = den;
                cprime[r] = upper[r] / den;
            }
            return;
        }
        std::copy(base_values.begin(), base_values.end(), permuted.valuePtr());
        for (std::size_t i = 0; i < n; ++i)
            permuted.valuePtr()[diag_pos[static_cast<std::size_t>(op.order_[i])]] += shift[static_cast<Eigen::Index>(i)];
        ldlt.factorize(permuted);
        if (ldlt.info() != Eigen::Success) throw NumericalError("sparse factorization failed");
    }

    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
        const std::size_t n = op.unknowns();
        Eigen::VectorXd x(static_cast<Eigen::Index>(n));
        if (op.tridiagonal_) {
            std::vector<double> d(n);
            for (std::size_t r = 0; r < n; ++r) {
                double v = rhs[static_cast<Eigen::Index>(r)];
                d[r] = r == 0 ? v / denom[0] : (v - lower[r] * d[r - 1]) / denom[r];
            }
            x[static_cast<Eigen::Index>(n - 1)] = d[n - 1];
            for (std::size_t r = n - 1; r-- > 0;)
                x[static_cast<Eigen::Index>(r)] = d[r] - cprime[r] * x[static_cast<Eigen::Index>(r + 1)];
            return x;
        }
        Eigen::VectorXd bp(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) bp[op.order_[i]] = rhs[static_cast<Eigen::Index>(i)];
        Eigen::VectorXd y = ldlt.solve(bp);
        for (std::size_t i = 0; i < n; ++i) x[static_cast<Eigen::Index>(i)] = y[op.order_[i]];
        return x;
    }
};

DiscreteOperator::Solver::Solver(const DiscreteOperator& op) : impl_(std::make_unique<Impl>(op)) {}
DiscreteOperator::Solver::~Solver() = default;
void DiscreteOperator::Solver::factor(const Eigen::VectorXd& shift) { impl_->factor(shift); }
Eigen::VectorXd DiscreteOperator::Solver::solve(const Eigen::VectorXd& rhs) const { return impl_->solve(rhs); }

// ---------------------------------------------------------------- linear

namespace {

void require_same_lattice(const GridDomain& d, const Field& f, const char* what) {
    if (f.size() != d.lattice().size() || !f.grid().lattice().compatible(d.lattice()))
        throw DomainMismatch(std::string(what) + " is not on the operator's lattice");
}

Eigen::VectorXd gather(const GridDomain& d, const Field& f) {
    const auto& act = d.active();
    Eigen::VectorXd v(static_cast<Eigen::Index>(act.size()));
    for (std::size_t r = 0; r < act.size(); ++r) v[static_cast<Eigen::Index>(r)] = f[act[r]];
    return v;
}

Field scatter(const DomainPtr& d, const Eigen::VectorXd& x, const Field& bdata) {
    Field out(d, 0.0);
    for (std::size_t k : d->boundary()) out[k] = bdata[k];
    const auto& act = d->active();
    for (std::size_t r = 0; r < act.size(); ++r) out[act[r]] = x[static_cast<Eigen::Index>(r)];
    return out;
}

}  // namespace

Field solve_linear_dirichlet(const DiscreteOperator& op, const Field& f, const Field& bdata) {
    const GridDomain& d = *op.domain();
    require_same_lattice(d, f, "forcing");
    require_same_lattice(d, bdata, "boundary data");
    for (std::size_t k : d.active())
        if (!std::isfinite(f[k])) throw InvalidArgument("forcing is not finite " + where(d, k));
    for (std::size_t k : d.boundary())
        if (!std::isfinite(bdata[k])) throw InvalidArgument("boundary data is not finite " + where(d, k));

    Eigen::VectorXd fv = gather(d, f);
    Eigen::VectorXd rhs = fv + op.boundary_rhs(bdata);
    DiscreteOperator::Solver solver(op);
    solver.factor(Eigen::VectorXd::Zero(rhs.size()));
    Eigen::VectorXd x = solver.solve(rhs);
    // Backward-error target: 1e-11 relative to the terms balanced in each row.
    for (int step = 0; step < 3; ++step) {
        Eigen::VectorXd r = rhs - op.matrix() * x;
        Field tmp = scatter(op.domain(), x, bdata);
        Eigen::VectorXd mag = op.stencil_magnitude(tmp);
        double worst = 0.0;
        for (Eigen::Index i = 0; i < r.size(); ++i)
            worst = std::max(worst, std::abs(r[i]) / (1.0 + std::abs(fv[i]) + mag[i]));
        if (worst <= 1e-14) break;
        x += solver.solve(r);
    }
    return scatter(op.domain(), x, bdata);
}

Field solve_linear_dirichlet(const DomainPtr& domain, const Field& f, const Field& bdata) {
    return solve_linear_dirichlet(DiscreteOperator(domain), f, bdata);
}

// ---------------------------------------------------------------- semilinear

namespace {

// Boundary contribution of |data| to the stencil magnitude, fixed per solve.
Eigen::VectorXd abs_boundary_term(const DiscreteOperator& op, const Field& bdata) {
    Field mag = bdata;
    for (std::size_t k : op.domain()->boundary()) mag[k] = std::abs(mag[k]);
    return op.boundary_rhs(mag).cwiseAbs();
}

struct Evaluation {
    Eigen::VectorXd F;
    double scaled = kInf;
    double raw = kInf;
    bool finite = false;
    std::size_t bad_node = 0;
};

// One pass over the rows: F = A x - b - f + g(x) and the per-row scale
// 1 + |f| + |g(x)| + (|A||x| + |A_b||data|).
Evaluation evaluate(const DiscreteOperator& op, const Nonlinearity& g, const Eigen::VectorXd& fv,
                    const Eigen::VectorXd& b, const Eigen::VectorXd& x, const Eigen::VectorXd& abs_boundary) {
    const auto& A = op.matrix();
    const int* outer = A.outerIndexPtr();
    const int* inner = A.innerIndexPtr();
    const double* val = A.valuePtr();
    Evaluation e;
    e.F.resize(x.size());
    e.scaled = 0.0;
    e.raw = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double gi = g(x[i]);
        if (!std::isfinite(gi) || std::abs(gi) > 1e300) {
            e.bad_node = op.domain()->active()[static_cast<std::size_t>(i)];
            e.scaled = e.raw = kInf;
            return e;
        }
        double ax = 0.0, mag = abs_boundary[i];
        for (int p = outer[i]; p < outer[i + 1]; ++p) {
            ax += val[p] * x[inner[p]];
            mag += std::abs(val[p] * x[inner[p]]);
        }
        const double Fi = ax - b[i] - fv[i] + gi;
        e.F[i] = Fi;
        e.scaled = std::max(e.scaled, std::abs(Fi) / (1.0 + std::abs(fv[i]) + std::abs(gi) + mag));
        e.raw = std::max(e.raw, std::abs(Fi));
    }
    e.finite = std::isfinite(e.raw);
    return e;
}

}  // namespace

SemilinearResult solve_semilinear_dirichlet(const DiscreteOperator& op, const Nonlinearity& g, const Field& f,
                                            const Field& bdata, const Field* initial,
                                            const SolveOptions& options) {
    const DomainPtr& dom = op.domain();
    const GridDomain& d = *dom;
    require_same_lattice(d, f, "forcing");
    require_same_lattice(d, bdata, "boundary data");
    for (std::size_t k : d.boundary())
        if (!std::isfinite(bdata[k])) throw InvalidArgument("boundary data is not finite " + where(d, k));
    for (std::size_t k : d.active())
        if (!std::isfinite(f[k])) throw InvalidArgument("forcing is not finite " + where(d, k));

    const Eigen::VectorXd fv = gather(d, f);
    const Eigen::VectorXd b = op.boundary_rhs(bdata);
    Eigen::VectorXd x;
    if (initial) {
        require_same_lattice(d, *initial, "initial guess");
        x = gather(d, *initial);
    } else {
        Field shifted = f;
        const double g0 = g(0.0);
        for (std::size_t k : d.active()) shifted[k] -= g0;
        x = gather(d, solve_linear_dirichlet(op, shifted, bdata));
    }

    SolveReport rep;
    const Eigen::VectorXd scale = abs_boundary_term(op, bdata);
    Evaluation cur = evaluate(op, g, fv, b, x, scale);
    if (!cur.finite) throw OverflowError("g overflows on the initial iterate " + where(d, cur.bad_node), cur.bad_node);

    Eigen::VectorXd best = x;
    double best_scaled = cur.scaled;
    DiscreteOperator::Solver solver(op);
    Eigen::VectorXd shift(x.size());
    int bad_streak = 0;
    bool converged = cur.scaled <= options.rtol;
    int polish_left = options.polish ? 4 : 0;

    auto newton_step = [&](bool polishing) -> bool {
        for (Eigen::Index i = 0; i < x.size(); ++i) shift[i] = g.derivative(x[i]);
        solver.factor(shift);
        Eigen::VectorXd dx = solver.solve(-cur.F);
        double t = 1.0;
        for (int ls = 0; ls < 12; ++ls, t *= 0.5) {
            Eigen::VectorXd trial = x + t * dx;
            Evaluation e = evaluate(op, g, fv, b, trial, scale);
            bool better = polishing ? e.finite && e.raw < cur.raw : e.finite && e.scaled < cur.scaled;
            if (better) {
                x = std::move(trial);
                cur = std::move(e);
                return true;
            }
        }
        if (polishing) return false;
        Eigen::VectorXd trial = x + dx;
        Evaluation e = evaluate(op, g, fv, b, trial, scale);
        if (e.finite) {
            x = std::move(trial);
            cur = std::move(e);
        }
        return false;
    };

    while (!converged && rep.iterations < options.max_iter) {
        ++rep.iterations;
        if (rep.method == Method::Newton) {
            if (newton_step(false)) {
                bad_streak = 0;
            } else {
                ++rep.monotone_descent_violations;
                if (++bad_streak >= 5) rep.method = Method::PicardFallback;
            }
        } else {
            const double lambda = std::max(g.max_slope(x.minCoeff(), x.maxCoeff()), 0.0);
            shift.setConstant(lambda);
            solver.factor(shift);
            Eigen::VectorXd gx(x.size());
            for (Eigen::Index i = 0; i < x.size(); ++i) gx[i] = g(x[i]);
            Eigen::VectorXd rhs = fv + b - gx + lambda * x;
            Eigen::VectorXd next = solver.solve(rhs);
            Evaluation e = evaluate(op, g, fv, b, next, scale);
            if (!e.finite) throw OverflowError("g overflows during Picard iteration " + where(d, e.bad_node), e.bad_node);
            if (e.scaled > cur.scaled) ++rep.monotone_descent_violations;
            x = std::move(next);
            cur = std::move(e);
        }
        if (cur.scaled < best_scaled) {
            best_scaled = cur.scaled;
            best = x;
        }
        converged = cur.scaled <= options.rtol;
    }
    if (!converged) {
        rep.final_residual = cur.raw;
        rep.scaled_residual = best_scaled;
        throw ConvergenceError("semilinear solve did not converge in " + std::to_string(options.max_iter) +
                                   " iterations (scaled residual " + std::to_string(best_scaled) + ")",
                               scatter(dom, best, bdata), rep);
    }
    while (polish_left-- > 0 && cur.raw > 0.0) {
        double before = cur.raw;
        if (!newton_step(true)) break;
        ++rep.iterations;
        if (cur.raw > 0.5 * before) break;
    }
    rep.final_residual = cur.raw;
    rep.scaled_residual = cur.scaled;
    return {scatter(dom, x, bdata), rep};
}

SemilinearResult solve_semilinear_dirichlet(const DomainPtr& domain, const Nonlinearity& g, const Field& f,
                                            const Field& bdata, const Field* initial,
                                            const SolveOptions& options) {
    return solve_semilinear_dirichlet(DiscreteOperator(domain), g, f, bdata, initial, options);
}

ResidualField residual(const DiscreteOperator& op, const Nonlinearity& g, const Field& f, const Field& u) {
    const GridDomain& d = *op.domain();
    require_same_lattice(d, u, "field");
    require_same_lattice(d, f, "forcing");
    Eigen::VectorXd lap = op.apply(u);
    ResidualField out{Field(op.domain(), 0.0), std::vector<NodeSign>(d.lattice().size(), NodeSign::Zero), true, true};
    for (std::size_t k : d.boundary()) out.values[k] = 0.0;
    const auto& act = d.active();
    for (std::size_t r = 0; r < act.size(); ++r) {
        std::size_t k = act[r];
        double v = lap[static_cast<Eigen::Index>(r)] + g(u[k]) - f[k];
        out.values[k] = v;
        out.sign[k] = v < 0.0 ? NodeSign::Sub : (v > 0.0 ? NodeSign::Super : NodeSign::Zero);
        if (v > 0.0) out.subsolution = false;
        if (v < 0.0) out.supersolution = false;
    }
    return out;
}

Comparison check_comparison(const Field& u1, const Field& u2, const GridDomain* probe, double rel_tol) {
    const GridDomain& d1 = u1.grid();
    if (u1.size() != u2.size() || !d1.lattice().compatible(u2.grid().lattice()))
        throw DomainMismatch("check_comparison needs fields on the same lattice");
    const std::vector<std::size_t>* nodes = &d1.active();
    if (probe) {
        if (probe->lattice().size() != u1.size()) throw DomainMismatch("probe is not on the fields' lattice");
        nodes = &probe->active();
    } else if (!d1.same_active_set(u2.grid())) {
        throw DomainMismatch("check_comparison needs fields on the same domain");
    }
    double scale = 1.0;
    for (std::size_t k : *nodes) scale = std::max({scale, std::abs(u1[k]), std::abs(u2[k])});
    Comparison c;
    c.max_excess = -kInf;
    c.max_deficit = -kInf;
    for (std::size_t k : *nodes) {
        c.max_excess = std::max(c.max_excess, u1[k] - u2[k]);
        c.max_deficit = std::max(c.max_deficit, u2[k] - u1[k]);
    }
    const double tol = rel_tol * scale;
    c.leq = c.max_excess <= tol;
    c.geq = c.max_deficit <= tol;
    return c;
}

}  // namespace largesol

#pragma once

#include <Eigen/Sparse>
#include <memory>
#include <optional>
#include <vector>

#include "largesol/errors.hpp"
#include "largesol/grid.hpp"
#include "largesol/nonlinearity.hpp"

namespace largesol {

// -Delta_h on the active nodes of a domain: diagonal 2N/h^2, couplings -1/h^2.
// Boundary nodes enter only through the right-hand side.
class DiscreteOperator {
public:
    using Matrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

    explicit DiscreteOperator(DomainPtr domain);

    const DomainPtr& domain() const noexcept { return domain_; }
    const Matrix& matrix() const noexcept { return matrix_; }
    std::size_t unknowns() const noexcept { return domain_->active().size(); }
    double diagonal() const noexcept { return diag_; }

    // Contribution of boundary data to each active row.
    Eigen::VectorXd boundary_rhs(const Field& data) const;
    // (-Delta_h u) at active nodes, boundary values taken from u itself.
    Eigen::VectorXd apply(const Field& u) const;
    // Per-row magnitude of the stencil terms, used to scale residuals.
    Eigen::VectorXd stencil_magnitude(const Field& u) const;

    class Solver;

private:
    DomainPtr domain_;
    Matrix matrix_;
    double diag_ = 0.0, off_ = 0.0;
    std::vector<std::vector<std::size_t>> boundary_coupling_;  // per active row
    std::vector<int> order_;  // fill-reducing order: position of each unknown
    bool tridiagonal_ = false;
};

// Factorizations of A + diag(d) sharing one symbolic analysis.
class DiscreteOperator::Solver {
public:
    explicit Solver(const DiscreteOperator& op);
    ~Solver();
    Solver(const Solver&) = delete;
    Solver& operator=(const Solver&) = delete;

    void factor(const Eigen::VectorXd& shift);
    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

enum class Method { Newton, PicardFallback };

struct SolveReport {
    int iterations = 0;
    double final_residual = 0.0;   // max |(-Delta_h u + g(u) - f)_i|
    double scaled_residual = 0.0;  // max |r_i| / (1 + magnitude of the terms in row i)
    Method method = Method::Newton;
    int monotone_descent_violations = 0;
};

struct SolveOptions {
    double rtol = 1e-9;
    int max_iter = 200;
    bool polish = true;
};

struct ConvergenceError : NumericalError {
    ConvergenceError(const std::string& what, Field best_iterate, SolveReport report)
        : NumericalError(what), best(std::move(best_iterate)), report(report) {}
    Field best;
    SolveReport report;
};

// -Delta_h w = f on active nodes, w = bdata on boundary nodes.
Field solve_linear_dirichlet(const DiscreteOperator& op, const Field& f, const Field& bdata);
Field solve_linear_dirichlet(const DomainPtr& domain, const Field& f, const Field& bdata);

struct SemilinearResult {
    Field u;
    SolveReport report;
};

// Damped Newton with a monotone Picard fallback. `initial` is a warm start on
// the same lattice; its boundary values are replaced by bdata.
SemilinearResult solve_semilinear_dirichlet(const DiscreteOperator& op, const Nonlinearity& g,
                                            const Field& f, const Field& bdata,
                                            const Field* initial = nullptr,
                                            const SolveOptions& options = {});
SemilinearResult solve_semilinear_dirichlet(const DomainPtr& domain, const Nonlinearity& g,
                                            const Field& f, const Field& bdata,
                                            const Field* initial = nullptr,
                                            const SolveOptions& options = {});

enum class NodeSign : std::int8_t { Sub = -1, Zero = 0, Super = 1 };

struct ResidualField {
    Field values;                // -Delta_h u + g(u) - f on active nodes
    std::vector<NodeSign> sign;  // per lattice node, Zero off the active set
    bool subsolution = false;    // all active residuals <= 0
    bool supersolution = false;  // all active residuals >= 0
};

ResidualField residual(const DiscreteOperator& op, const Nonlinearity& g, const Field& f, const Field& u);

enum class Ordering { Leq, Geq, Equal, Incomparable };

struct Comparison {
    bool leq = false;
    bool geq = false;
    double max_excess = 0.0;   // max(u1 - u2)
    double max_deficit = 0.0;  // max(u2 - u1)
    Ordering ordering() const {
        if (leq && geq) return Ordering::Equal;
        if (leq) return Ordering::Leq;
        if (geq) return Ordering::Geq;
        return Ordering::Incomparable;
    }
};

// Nodewise ordering with tolerance 1e-12 * scale on the active nodes of u1's
// domain, or of `probe` when given (same lattice required).
Comparison check_comparison(const Field& u1, const Field& u2, const GridDomain* probe = nullptr,
                            double rel_tol = 1e-12);

}  // namespace largesol

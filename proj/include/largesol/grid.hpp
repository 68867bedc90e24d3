#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace largesol {

struct Point {
    double x = 0.0, y = 0.0;
};

// Shape descriptor with a signed distance function (negative inside). Exterior
// shapes carry a truncation box whose boundary is artificial, not physical.
class Shape {
public:
    static Shape interval(double a, double b);
    static Shape rectangle(double x0, double y0, double x1, double y1);
    static Shape disk(double cx, double cy, double r);
    static Shape annulus(double cx, double cy, double r_in, double r_out);
    static Shape exterior(double cx, double cy, double r, double half_box);
    static Shape unite(const Shape& a, const Shape& b);
    static Shape subtract(const Shape& a, const Shape& b);
    // Text form, e.g. "disk(0,0,1)" or "difference(rectangle(-1,-1,1,1),disk(0,0,0.5))".
    static Shape parse(const std::string& text);

    int dim() const;
    double phi(Point p) const;
    double physical_phi(Point p) const;
    std::array<double, 4> bbox() const;  // xmin, ymin, xmax, ymax
    Point anchor() const;
    bool primitive() const;
    bool bounded() const;
    double truncation() const;  // half box of the first exterior part, 0 if none
    Shape with_truncation(double half_box) const;
    std::string name() const;

    struct Node;

private:
    explicit Shape(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
    std::shared_ptr<const Node> node_;
};

struct Lattice {
    int dim = 1;
    long nx = 0, ny = 1;
    double h = 0.0;
    Point anchor;
    long i0 = 0, j0 = 0;  // node (i, j) sits at anchor + ((i0 + i) h, (j0 + j) h)

    std::size_t size() const { return static_cast<std::size_t>(nx * ny); }
    std::size_t index(long i, long j) const { return static_cast<std::size_t>(j * nx + i); }
    long col(std::size_t k) const { return static_cast<long>(k) % nx; }
    long row(std::size_t k) const { return static_cast<long>(k) / nx; }
    Point point(std::size_t k) const;
    // Lattice index of the node at p, or -1 when p is not a node of this lattice.
    long locate(Point p) const;
    bool compatible(const Lattice& other) const;
};

enum class NodeKind : std::uint8_t { Outside, Active, Physical, Artificial };

class GridDomain;
using DomainPtr = std::shared_ptr<const GridDomain>;

class GridDomain {
public:
    const Lattice& lattice() const noexcept { return lattice_; }
    double h() const noexcept { return lattice_.h; }
    int dim() const noexcept { return lattice_.dim; }
    NodeKind kind(std::size_t k) const { return kind_[k]; }
    bool is_active(std::size_t k) const { return kind_[k] == NodeKind::Active; }
    bool is_boundary(std::size_t k) const {
        return kind_[k] == NodeKind::Physical || kind_[k] == NodeKind::Artificial;
    }
    const std::vector<std::size_t>& active() const noexcept { return active_; }
    const std::vector<std::size_t>& boundary() const noexcept { return boundary_; }
    long active_index(std::size_t k) const { return active_index_[k]; }
    double rho(std::size_t k) const { return (*rho_)[k]; }
    double max_rho() const noexcept { return max_rho_; }
    double delta0() const noexcept { return delta0_; }
    int level() const noexcept { return level_; }
    const Shape& shape() const noexcept { return shape_; }
    std::string name() const;
    bool bounded() const noexcept { return shape_.bounded(); }
    // Axis neighbours (2 per dimension) that lie on the lattice.
    int neighbours(std::size_t k, std::array<std::size_t, 4>& out) const;
    bool same_active_set(const GridDomain& other) const;
    bool active_subset_of(const GridDomain& other) const;

    friend DomainPtr build_domain(const Shape& shape, double h);
    friend DomainPtr exhaustion(const DomainPtr& domain, int n);

private:
    GridDomain() = default;
    void classify_boundary(const std::vector<bool>& artificial);

    Shape shape_ = Shape::interval(0, 1);
    Lattice lattice_;
    std::vector<NodeKind> kind_;
    std::vector<std::size_t> active_, boundary_;
    std::vector<long> active_index_;
    std::shared_ptr<const std::vector<double>> rho_;
    std::shared_ptr<const std::vector<bool>> artificial_;  // inside the physical region but cut off
    double max_rho_ = 0.0, delta0_ = 0.0;
    int level_ = -1;
    DomainPtr root_;
};

DomainPtr build_domain(const Shape& shape, double h);
// Nodes of the root domain with rho > delta0 * 2^-n.
DomainPtr exhaustion(const DomainPtr& domain, int n);

// Values on every lattice node; boundary nodes carry Dirichlet data, nodes
// outside the domain hold 0.
class Field {
public:
    Field() = default;
    explicit Field(DomainPtr d, double fill = 0.0);
    Field(DomainPtr d, std::vector<double> values);

    const DomainPtr& domain() const noexcept { return domain_; }
    const GridDomain& grid() const noexcept { return *domain_; }
    double& operator[](std::size_t k) { return values_[k]; }
    double operator[](std::size_t k) const { return values_[k]; }
    std::vector<double>& values() noexcept { return values_; }
    const std::vector<double>& values() const noexcept { return values_; }
    std::size_t size() const noexcept { return values_.size(); }

    double max_abs_active() const;
    double max_active() const;
    double min_active() const;
    // Value at physical point p (must be a node of this lattice).
    double at(Point p) const;
    // Same values re-homed on another domain over the same lattice; nodes not
    // covered by this field's domain take `fill`.
    Field rehome(DomainPtr d, double fill) const;

private:
    DomainPtr domain_;
    std::vector<double> values_;
};

void write_field(std::ostream& os, const Field& f);
Field read_field(std::istream& is, const DomainPtr& domain);

class Forcing {
public:
    struct Term;

    static Forcing constant(double c);
    static Forcing rho_power(double coeff, double beta);
    static Forcing indicator(const Shape& s, double coeff = 1.0);
    // Descriptor grammar: term ('+' term)*, term := [coeff '*'] primitive, with
    // primitives constant(c), rho_power(beta), indicator(shape),
    // radial(path[,cx,cy]), table(path) or a bare number.
    static Forcing parse(const std::string& text, const std::string& base_dir = ".");

    // x -> -f(-x)
    Forcing dual() const;
    Forcing absolute() const;
    // Evaluation at a node; rho is the node's distance to the physical boundary.
    double value(Point p, double rho) const;
    bool is_constant() const;
    // Radial profile about `center` when every term is radially symmetric about it.
    bool radial_about(Point center) const;
    std::string describe() const;

private:
    std::vector<std::shared_ptr<const Term>> terms_;
    bool reflect_ = false, negate_ = false, absolute_ = false;
};

struct ForcingSample {
    Field field;
    std::size_t clamped = 0;
};

ForcingSample sample_forcing(const Forcing& f, const DomainPtr& domain);
// min(f, k), or min(|f|, k) sign f in signed mode.
Field truncate_forcing(const Field& f, double k, bool signed_mode = false);

}  // namespace largesol

#include "largesol/grid.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <queue>
#include <sstream>

#include "largesol/errors.hpp"

namespace largesol {

namespace {

std::string repr(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_number(const std::string& s) {
    double v = 0.0;
    std::size_t b = s.find_first_not_of(" \t"), e = s.find_last_not_of(" \t");
    if (b == std::string::npos) throw ParseError("empty number");
    const char* first = s.data() + b;
    const char* last = s.data() + e + 1;
    if (*first == '+') ++first;
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last) throw ParseError("malformed number '" + s + "'");
    return v;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n"), e = s.find_last_not_of(" \t\r\n");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

// Splits "name(a,b(c,d),e)" into name and top-level arguments.
std::pair<std::string, std::vector<std::string>> split_call(const std::string& text) {
    std::string s = trim(text);
    auto open = s.find('(');
    if (open == std::string::npos || s.back() != ')') throw ParseError("expected name(...) in '" + s + "'");
    std::string name = trim(s.substr(0, open));
    std::vector<std::string> args;
    int depth = 0;
    std::string cur;
    for (std::size_t i = open + 1; i + 1 < s.size(); ++i) {
        char c = s[i];
        if (c == '(') ++depth;
        if (c == ')') --depth;
        if (depth < 0) throw ParseError("unbalanced parentheses in '" + s + "'");
        if (c == ',' && depth == 0) {
            args.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (depth != 0) throw ParseError("unbalanced parentheses in '" + s + "'");
    if (!trim(cur).empty() || !args.empty()) args.push_back(trim(cur));
    return {name, args};
}

}  // namespace

// ---------------------------------------------------------------- Shape

struct Shape::Node {
    enum class Kind { Interval, Rectangle, Disk, Annulus, Exterior, Union, Difference };
    Kind kind;
    std::array<double, 5> p{};
    std::shared_ptr<const Node> a, b;
};

using Kind = Shape::Node::Kind;

namespace {

double node_phi(const Shape::Node& n, Point q, bool physical) {
    switch (n.kind) {
        case Kind::Interval:
            return std::max(n.p[0] - q.x, q.x - n.p[1]);
        case Kind::Rectangle: {
            double dx = std::max(n.p[0] - q.x, q.x - n.p[2]);
            double dy = std::max(n.p[1] - q.y, q.y - n.p[3]);
            if (dx > 0.0 || dy > 0.0) return std::hypot(std::max(dx, 0.0), std::max(dy, 0.0));
            return std::max(dx, dy);
        }
        case Kind::Disk:
            return std::hypot(q.x - n.p[0], q.y - n.p[1]) - n.p[2];
        case Kind::Annulus: {
            double r = std::hypot(q.x - n.p[0], q.y - n.p[1]);
            return std::max(n.p[2] - r, r - n.p[3]);
        }
        case Kind::Exterior: {
            double inner = n.p[2] - std::hypot(q.x - n.p[0], q.y - n.p[1]);
            if (physical) return inner;
            double box = std::max(std::abs(q.x - n.p[0]), std::abs(q.y - n.p[1])) - n.p[3];
            return std::max(inner, box);
        }
        case Kind::Union:
            return std::min(node_phi(*n.a, q, physical), node_phi(*n.b, q, physical));
        case Kind::Difference:
            return std::max(node_phi(*n.a, q, physical), -node_phi(*n.b, q, physical));
    }
    return 0.0;
}

int node_dim(const Shape::Node& n) {
    switch (n.kind) {
        case Kind::Interval:
            return 1;
        case Kind::Union:
        case Kind::Difference: {
            int da = node_dim(*n.a), db = node_dim(*n.b);
            if (da != db) throw InvalidArgument("composite shape mixes 1D and 2D parts");
            return da;
        }
        default:
            return 2;
    }
}

std::array<double, 4> node_bbox(const Shape::Node& n) {
    switch (n.kind) {
        case Kind::Interval:
            return {n.p[0], 0.0, n.p[1], 0.0};
        case Kind::Rectangle:
            return {n.p[0], n.p[1], n.p[2], n.p[3]};
        case Kind::Disk:
            return {n.p[0] - n.p[2], n.p[1] - n.p[2], n.p[0] + n.p[2], n.p[1] + n.p[2]};
        case Kind::Annulus:
            return {n.p[0] - n.p[3], n.p[1] - n.p[3], n.p[0] + n.p[3], n.p[1] + n.p[3]};
        case Kind::Exterior:
            return {n.p[0] - n.p[3], n.p[1] - n.p[3], n.p[0] + n.p[3], n.p[1] + n.p[3]};
        case Kind::Union: {
            auto a = node_bbox(*n.a), b = node_bbox(*n.b);
            return {std::min(a[0], b[0]), std::min(a[1], b[1]), std::max(a[2], b[2]), std::max(a[3], b[3])};
        }
        case Kind::Difference:
            return node_bbox(*n.a);
    }
    return {};
}

std::string node_name(const Shape::Node& n) {
    auto args = [&](int count) {
        std::string s;
        for (int i = 0; i < count; ++i) s += (i ? "," : "") + repr(n.p[static_cast<std::size_t>(i)]);
        return s;
    };
    switch (n.kind) {
        case Kind::Interval:
            return "interval(" + args(2) + ")";
        case Kind::Rectangle:
            return "rectangle(" + args(4) + ")";
        case Kind::Disk:
            return "disk(" + args(3) + ")";
        case Kind::Annulus:
            return "annulus(" + args(4) + ")";
        case Kind::Exterior:
            return "exterior(" + args(4) + ")";
        case Kind::Union:
            return "union(" + node_name(*n.a) + "," + node_name(*n.b) + ")";
        case Kind::Difference:
            return "difference(" + node_name(*n.a) + "," + node_name(*n.b) + ")";
    }
    return {};
}

}  // namespace

Shape Shape::interval(double a, double b) {
    if (!(b > a)) throw InvalidArgument("interval needs a < b");
    return Shape(std::make_shared<Node>(Node{Kind::Interval, {a, b}, nullptr, nullptr}));
}

Shape Shape::rectangle(double x0, double y0, double x1, double y1) {
    if (!(x1 > x0 && y1 > y0)) throw InvalidArgument("rectangle needs x0 < x1 and y0 < y1");
    return Shape(std::make_shared<Node>(Node{Kind::Rectangle, {x0, y0, x1, y1}, nullptr, nullptr}));
}

Shape Shape::disk(double cx, double cy, double r) {
    if (!(r > 0.0)) throw InvalidArgument("disk needs R > 0");
    return Shape(std::make_shared<Node>(Node{Kind::Disk, {cx, cy, r}, nullptr, nullptr}));
}

Shape Shape::annulus(double cx, double cy, double r_in, double r_out) {
    if (!(r_in > 0.0 && r_out > r_in)) throw InvalidArgument("annulus needs 0 < r_in < r_out");
    return Shape(std::make_shared<Node>(Node{Kind::Annulus, {cx, cy, r_in, r_out}, nullptr, nullptr}));
}

Shape Shape::exterior(double cx, double cy, double r, double half_box) {
    if (!(r > 0.0 && half_box > r)) throw InvalidArgument("exterior needs 0 < R < L");
    return Shape(std::make_shared<Node>(Node{Kind::Exterior, {cx, cy, r, half_box}, nullptr, nullptr}));
}

Shape Shape::unite(const Shape& a, const Shape& b) {
    return Shape(std::make_shared<Node>(Node{Kind::Union, {}, a.node_, b.node_}));
}

Shape Shape::subtract(const Shape& a, const Shape& b) {
    return Shape(std::make_shared<Node>(Node{Kind::Difference, {}, a.node_, b.node_}));
}

Shape Shape::parse(const std::string& text) {
    auto [name, args] = split_call(text);
    auto nums = [&](std::size_t count) {
        if (args.size() != count)
            throw ParseError(name + " expects " + std::to_string(count) + " arguments");
        std::vector<double> v;
        for (const auto& a : args) v.push_back(parse_number(a));
        return v;
    };
    if (name == "interval") {
        auto v = nums(2);
        return interval(v[0], v[1]);
    }
    if (name == "rectangle") {
        auto v = nums(4);
        return rectangle(v[0], v[1], v[2], v[3]);
    }
    if (name == "disk") {
        auto v = nums(3);
        return disk(v[0], v[1], v[2]);
    }
    if (name == "annulus") {
        auto v = nums(4);
        return annulus(v[0], v[1], v[2], v[3]);
    }
    if (name == "exterior") {
        auto v = nums(4);
        return exterior(v[0], v[1], v[2], v[3]);
    }
    if (name == "union" || name == "difference") {
        if (args.size() != 2) throw ParseError(name + " expects two shapes");
        Shape a = parse(args[0]), b = parse(args[1]);
        Shape s = name == "union" ? unite(a, b) : subtract(a, b);
        s.dim();
        return s;
    }
    throw ParseError("unknown shape '" + name + "'");
}

int Shape::dim() const { return node_dim(*node_); }
double Shape::phi(Point p) const { return node_phi(*node_, p, false); }
double Shape::physical_phi(Point p) const { return node_phi(*node_, p, true); }
std::array<double, 4> Shape::bbox() const { return node_bbox(*node_); }
std::string Shape::name() const { return node_name(*node_); }

Point Shape::anchor() const {
    const Node* n = node_.get();
    while (n->kind == Kind::Union || n->kind == Kind::Difference) n = n->a.get();
    switch (n->kind) {
        case Kind::Interval:
            return {n->p[0], 0.0};
        case Kind::Rectangle:
            return {n->p[0], n->p[1]};
        default:
            return {n->p[0], n->p[1]};
    }
}

bool Shape::primitive() const { return node_->kind != Kind::Union && node_->kind != Kind::Difference; }

double Shape::truncation() const {
    const Node* n = node_.get();
    if (n->kind == Kind::Exterior) return n->p[3];
    if (n->kind == Kind::Union || n->kind == Kind::Difference) {
        double t = Shape(n->a).truncation();
        return t > 0.0 ? t : Shape(n->b).truncation();
    }
    return 0.0;
}

bool Shape::bounded() const { return truncation() == 0.0; }

Shape Shape::with_truncation(double half_box) const {
    const Node& n = *node_;
    switch (n.kind) {
        case Kind::Exterior:
            return exterior(n.p[0], n.p[1], n.p[2], half_box);
        case Kind::Union:
            return unite(Shape(n.a).with_truncation(half_box), Shape(n.b).with_truncation(half_box));
        case Kind::Difference:
            return subtract(Shape(n.a).with_truncation(half_box), Shape(n.b).with_truncation(half_box));
        default:
            return *this;
    }
}

// ---------------------------------------------------------------- Lattice

Point Lattice::point(std::size_t k) const {
    Point p{anchor.x + static_cast<double>(i0 + col(k)) * h, 0.0};
    if (dim == 2) p.y = anchor.y + static_cast<double>(j0 + row(k)) * h;
    return p;
}

long Lattice::locate(Point p) const {
    double fi = (p.x - anchor.x) / h, fj = dim == 2 ? (p.y - anchor.y) / h : 0.0;
    long gi = std::lround(fi), gj = std::lround(fj);
    if (std::abs(fi - static_cast<double>(gi)) > 1e-7 || std::abs(fj - static_cast<double>(gj)) > 1e-7)
        return -1;
    long i = gi - i0, j = dim == 2 ? gj - j0 : 0;
    if (i < 0 || i >= nx || j < 0 || j >= ny) return -1;
    return static_cast<long>(index(i, j));
}

bool Lattice::compatible(const Lattice& o) const {
    if (dim != o.dim || std::abs(h - o.h) > 1e-14 * h) return false;
    auto integral = [&](double d) { return std::abs(d / h - std::round(d / h)) < 1e-9; };
    return integral(anchor.x - o.anchor.x) && integral(anchor.y - o.anchor.y);
}

// ---------------------------------------------------------------- GridDomain

std::string GridDomain::name() const {
    std::string s = shape_.name();
    if (level_ >= 0) s += "#n=" + std::to_string(level_);
    return s;
}

int GridDomain::neighbours(std::size_t k, std::array<std::size_t, 4>& out) const {
    int c = 0;
    long i = lattice_.col(k), j = lattice_.row(k);
    if (i > 0) out[static_cast<std::size_t>(c++)] = k - 1;
    if (i + 1 < lattice_.nx) out[static_cast<std::size_t>(c++)] = k + 1;
    if (lattice_.dim == 2) {
        if (j > 0) out[static_cast<std::size_t>(c++)] = k - static_cast<std::size_t>(lattice_.nx);
        if (j + 1 < lattice_.ny) out[static_cast<std::size_t>(c++)] = k + static_cast<std::size_t>(lattice_.nx);
    }
    return c;
}

bool GridDomain::same_active_set(const GridDomain& o) const {
    return lattice_.size() == o.lattice_.size() && active_ == o.active_;
}

bool GridDomain::active_subset_of(const GridDomain& o) const {
    if (lattice_.size() != o.lattice_.size()) return false;
    for (std::size_t k : active_)
        if (!o.is_active(k)) return false;
    return true;
}

void GridDomain::classify_boundary(const std::vector<bool>& artificial) {
    active_.clear();
    boundary_.clear();
    active_index_.assign(lattice_.size(), -1);
    std::array<std::size_t, 4> nb{};
    for (std::size_t k = 0; k < lattice_.size(); ++k) {
        if (kind_[k] == NodeKind::Active) {
            active_index_[k] = static_cast<long>(active_.size());
            active_.push_back(k);
            continue;
        }
        kind_[k] = NodeKind::Outside;
    }
    for (std::size_t k = 0; k < lattice_.size(); ++k) {
        if (kind_[k] == NodeKind::Active) continue;
        int c = neighbours(k, nb);
        for (int t = 0; t < c; ++t) {
            if (kind_[nb[static_cast<std::size_t>(t)]] == NodeKind::Active) {
                kind_[k] = artificial[k] ? NodeKind::Artificial : NodeKind::Physical;
                boundary_.push_back(k);
                break;
            }
        }
    }
}

namespace {

std::vector<double> fast_marching(const GridDomain& d, const Shape& shape,
                                  const std::vector<bool>& inside) {
    const Lattice& lat = d.lattice();
    const double h = lat.h;
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(lat.size(), inf);
    std::vector<char> done(lat.size(), 0);
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    for (std::size_t k = 0; k < lat.size(); ++k) {
        if (!inside[k]) {
            dist[k] = 0.0;
            continue;
        }
        double a = -shape.physical_phi(lat.point(k));
        if (a <= 1.5 * h) {
            dist[k] = a;
            heap.push({a, k});
        }
    }
    std::array<std::size_t, 4> nb{};
    auto axis_min = [&](std::size_t k, int axis) {
        long i = lat.col(k), j = lat.row(k);
        double best = inf;
        if (axis == 0) {
            if (i > 0 && done[k - 1]) best = std::min(best, dist[k - 1]);
            if (i + 1 < lat.nx && done[k + 1]) best = std::min(best, dist[k + 1]);
        } else {
            auto nx = static_cast<std::size_t>(lat.nx);
            if (j > 0 && done[k - nx]) best = std::min(best, dist[k - nx]);
            if (j + 1 < lat.ny && done[k + nx]) best = std::min(best, dist[k + nx]);
        }
        return best;
    };
    while (!heap.empty()) {
        auto [v, k] = heap.top();
        heap.pop();
        if (done[k] || v > dist[k]) continue;
        done[k] = 1;
        int c = d.neighbours(k, nb);
        for (int t = 0; t < c; ++t) {
            std::size_t q = nb[static_cast<std::size_t>(t)];
            if (!inside[q] || done[q]) continue;
            double a = axis_min(q, 0), b = lat.dim == 2 ? axis_min(q, 1) : inf;
            double u;
            if (std::abs(a - b) >= h || !std::isfinite(a) || !std::isfinite(b))
                u = std::min(a, b) + h;
            else
                u = 0.5 * (a + b + std::sqrt(2.0 * h * h - (a - b) * (a - b)));
            if (u < dist[q]) {
                dist[q] = u;
                heap.push({u, q});
            }
        }
    }
    for (std::size_t k = 0; k < lat.size(); ++k)
        if (!inside[k]) dist[k] = 0.0;
    return dist;
}

void check_connected(const GridDomain& d) {
    const auto& act = d.active();
    std::vector<char> seen(d.lattice().size(), 0);
    std::vector<std::size_t> stack{act.front()};
    seen[act.front()] = 1;
    std::size_t count = 0;
    std::array<std::size_t, 4> nb{};
    while (!stack.empty()) {
        std::size_t k = stack.back();
        stack.pop_back();
        ++count;
        int c = d.neighbours(k, nb);
        for (int t = 0; t < c; ++t) {
            std::size_t q = nb[static_cast<std::size_t>(t)];
            if (!seen[q] && d.is_active(q)) {
                seen[q] = 1;
                stack.push_back(q);
            }
        }
    }
    if (count != act.size())
        throw DegenerateDomainError("active region of " + d.name() + " is not connected at h=" +
                                    repr(d.h()));
}

}  // namespace

DomainPtr build_domain(const Shape& shape, double h) {
    if (!(h > 0.0) || !std::isfinite(h)) throw InvalidArgument("grid spacing must be positive");
    auto d = std::shared_ptr<GridDomain>(new GridDomain());
    d->shape_ = shape;
    Lattice& lat = d->lattice_;
    lat.dim = shape.dim();
    lat.h = h;
    lat.anchor = shape.anchor();
    auto bb = shape.bbox();
    auto lo = [&](double v, double a) { return static_cast<long>(std::floor((v - a) / h)) - 1; };
    auto hi = [&](double v, double a) { return static_cast<long>(std::ceil((v - a) / h)) + 1; };
    lat.i0 = lo(bb[0], lat.anchor.x);
    lat.nx = hi(bb[2], lat.anchor.x) - lat.i0 + 1;
    if (lat.dim == 2) {
        lat.j0 = lo(bb[1], lat.anchor.y);
        lat.ny = hi(bb[3], lat.anchor.y) - lat.j0 + 1;
    }
    if (static_cast<double>(lat.nx) * static_cast<double>(lat.ny) > 6.4e7)
        throw InvalidArgument("grid too large: " + std::to_string(lat.nx) + "x" + std::to_string(lat.ny));

    const double eps = 1e-12 * h;
    std::vector<bool> artificial(lat.size(), false), inside(lat.size(), false);
    d->kind_.assign(lat.size(), NodeKind::Outside);
    for (std::size_t k = 0; k < lat.size(); ++k) {
        Point p = lat.point(k);
        double pp = shape.physical_phi(p);
        inside[k] = pp < -eps;
        if (shape.phi(p) < -eps)
            d->kind_[k] = NodeKind::Active;
        else
            artificial[k] = inside[k];
    }
    d->classify_boundary(artificial);
    if (d->active_.empty())
        throw DegenerateDomainError("no interior node for " + shape.name() + " at h=" + repr(h));

    std::vector<double> rho;
    if (shape.primitive()) {
        rho.assign(lat.size(), 0.0);
        for (std::size_t k = 0; k < lat.size(); ++k)
            if (inside[k]) rho[k] = std::max(0.0, -shape.physical_phi(lat.point(k)));
    } else {
        rho = fast_marching(*d, shape, inside);
    }
    for (std::size_t k : d->active_) d->max_rho_ = std::max(d->max_rho_, rho[k]);
    d->delta0_ = d->max_rho_ / 4.0;
    d->rho_ = std::make_shared<const std::vector<double>>(std::move(rho));
    d->artificial_ = std::make_shared<const std::vector<bool>>(std::move(artificial));
    check_connected(*d);
    return d;
}

DomainPtr exhaustion(const DomainPtr& domain, int n) {
    if (n < 0) throw InvalidArgument("exhaustion level must be >= 0");
    DomainPtr root = domain->root_ ? domain->root_ : domain;
    auto d = std::shared_ptr<GridDomain>(new GridDomain());
    d->shape_ = root->shape_;
    d->lattice_ = root->lattice_;
    d->rho_ = root->rho_;
    d->artificial_ = root->artificial_;
    d->max_rho_ = root->max_rho_;
    d->delta0_ = root->delta0_;
    d->level_ = n;
    d->root_ = root;
    const double delta = std::ldexp(root->delta0_, -n);
    d->kind_.assign(root->lattice_.size(), NodeKind::Outside);
    for (std::size_t k : root->active_)
        if ((*root->rho_)[k] > delta) d->kind_[k] = NodeKind::Active;
    d->classify_boundary(*root->artificial_);
    if (d->active_.empty())
        throw DegenerateDomainError("exhaustion level " + std::to_string(n) + " of " + root->name() +
                                    " is empty");
    return d;
}

// ---------------------------------------------------------------- Field

Field::Field(DomainPtr d, double fill) : domain_(std::move(d)), values_(domain_->lattice().size(), 0.0) {
    for (std::size_t k : domain_->active()) values_[k] = fill;
    for (std::size_t k : domain_->boundary()) values_[k] = fill;
}

Field::Field(DomainPtr d, std::vector<double> values) : domain_(std::move(d)), values_(std::move(values)) {
    if (values_.size() != domain_->lattice().size()) throw DomainMismatch("field size does not match lattice");
}

double Field::max_abs_active() const {
    double m = 0.0;
    for (std::size_t k : domain_->active()) m = std::max(m, std::abs(values_[k]));
    return m;
}

double Field::max_active() const {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t k : domain_->active()) m = std::max(m, values_[k]);
    return m;
}

double Field::min_active() const {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t k : domain_->active()) m = std::min(m, values_[k]);
    return m;
}

double Field::at(Point p) const {
    long k = domain_->lattice().locate(p);
    if (k < 0) throw DomainMismatch("point is not a node of the field's lattice");
    return values_[static_cast<std::size_t>(k)];
}

Field Field::rehome(DomainPtr d, double fill) const {
    if (d->lattice().size() != values_.size() || !d->lattice().compatible(domain_->lattice()))
        throw DomainMismatch("rehome needs the same lattice");
    Field out(d, fill);
    auto copy = [&](std::size_t k) {
        if (domain_->is_active(k) || domain_->is_boundary(k)) out.values_[k] = values_[k];
    };
    for (std::size_t k : d->active()) copy(k);
    for (std::size_t k : d->boundary()) copy(k);
    return out;
}

void write_field(std::ostream& os, const Field& f) {
    const GridDomain& d = f.grid();
    const Lattice& lat = d.lattice();
    os << "# largesol-field v1\n";
    os << "nx=" << lat.nx << " ny=" << lat.ny << " h=" << repr(lat.h) << " domain=" << d.name() << "\n";
    std::string line;
    for (std::size_t k = 0; k < lat.size(); ++k) {
        Point p = lat.point(k);
        line = std::to_string(lat.col(k));
        line += ' ';
        line += std::to_string(lat.row(k));
        line += ' ';
        line += repr(p.x);
        line += ' ';
        line += repr(p.y);
        line += ' ';
        line += repr(f[k]);
        line += d.is_active(k) ? " 1\n" : " 0\n";
        os << line;
    }
}

Field read_field(std::istream& is, const DomainPtr& domain) {
    const Lattice& lat = domain->lattice();
    std::string line;
    if (!std::getline(is, line) || line != "# largesol-field v1") throw ParseError("missing field header", 1);
    if (!std::getline(is, line)) throw ParseError("missing field geometry line", 2);
    std::istringstream hs(line);
    std::string nx, ny, h, name;
    hs >> nx >> ny >> h >> name;
    if (nx != "nx=" + std::to_string(lat.nx) || ny != "ny=" + std::to_string(lat.ny) ||
        h != "h=" + repr(lat.h) || name != "domain=" + domain->name())
        throw DomainMismatch("field dump does not match domain " + domain->name());
    Field out(domain, 0.0);
    std::size_t count = 0;
    int lineno = 2;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        long i, j;
        std::string xs, ys, vs;
        int act;
        if (!(ls >> i >> j >> xs >> ys >> vs >> act)) throw ParseError("malformed field row", lineno);
        if (i < 0 || i >= lat.nx || j < 0 || j >= lat.ny) throw ParseError("node index out of range", lineno);
        std::size_t k = lat.index(i, j);
        if ((act != 0) != domain->is_active(k)) throw DomainMismatch("active flag mismatch at line " + std::to_string(lineno));
        out[k] = parse_number(vs);
        ++count;
    }
    if (count != lat.size()) throw ParseError("field dump has " + std::to_string(count) + " rows");
    return out;
}

// ---------------------------------------------------------------- Forcing

struct Forcing::Term {
    enum class Kind { Constant, RhoPower, Indicator, Radial, Table } kind = Kind::Constant;
    double coeff = 1.0;
    double param = 0.0;
    std::shared_ptr<Shape> shape;
    std::vector<double> r, f;
    Point center;
    double table_h = 0.0;
    std::map<std::pair<long, long>, double> table;
    std::string text;

    double eval(Point p, double rho) const {
        switch (kind) {
            case Kind::Constant:
                return coeff * param;
            case Kind::RhoPower:
                if (std::isnan(rho)) throw InvalidArgument("rho_power forcing needs a grid domain");
                return coeff * std::pow(rho, -param);
            case Kind::Indicator:
                return shape->phi(p) <= 0.0 ? coeff : 0.0;
            case Kind::Radial: {
                double s = std::hypot(p.x - center.x, p.y - center.y);
                if (s <= r.front()) return coeff * f.front();
                if (s >= r.back()) return coeff * f.back();
                auto it = std::upper_bound(r.begin(), r.end(), s);
                std::size_t i = static_cast<std::size_t>(it - r.begin()) - 1;
                double w = (s - r[i]) / (r[i + 1] - r[i]);
                return coeff * (f[i] + w * (f[i + 1] - f[i]));
            }
            case Kind::Table: {
                auto it = table.find({std::lround(p.x / table_h), std::lround(p.y / table_h)});
                if (it == table.end()) throw InvalidArgument("table forcing has no value at a domain node");
                return coeff * it->second;
            }
        }
        return 0.0;
    }
};

namespace {

using Term = Forcing::Term;

std::vector<std::string> split_terms(const std::string& s) {
    std::vector<std::string> out;
    int depth = 0;
    std::string cur;
    for (std::size_t i = 0; i < s.size(); ++i) {
        char c = s[i];
        if (c == '(') ++depth;
        if (c == ')') --depth;
        bool exponent = i > 0 && (s[i - 1] == 'e' || s[i - 1] == 'E') && i > 1 &&
                        (std::isdigit(static_cast<unsigned char>(s[i - 2])) || s[i - 2] == '.');
        if (c == '+' && depth == 0 && !exponent && !trim(cur).empty()) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!trim(cur).empty()) out.push_back(trim(cur));
    if (out.empty()) throw ParseError("empty forcing descriptor");
    return out;
}

std::string join_path(const std::string& base, const std::string& p) {
    if (p.empty() || p[0] == '/' || base.empty()) return p;
    return base + "/" + p;
}

Term parse_term(const std::string& text, const std::string& base_dir) {
    Term t;
    t.text = text;
    std::string body = text;
    int depth = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '(') ++depth;
        if (text[i] == ')') --depth;
        if (text[i] == '*' && depth == 0) {
            t.coeff = parse_number(text.substr(0, i));
            body = trim(text.substr(i + 1));
            break;
        }
    }
    if (body.find('(') == std::string::npos) {
        t.kind = Term::Kind::Constant;
        t.param = parse_number(body);
        return t;
    }
    auto [name, args] = split_call(body);
    if (name == "constant") {
        if (args.size() != 1) throw ParseError("constant expects one argument");
        t.kind = Term::Kind::Constant;
        t.param = parse_number(args[0]);
    } else if (name == "rho_power") {
        if (args.size() != 1) throw ParseError("rho_power expects one argument (beta)");
        t.kind = Term::Kind::RhoPower;
        t.param = parse_number(args[0]);
    } else if (name == "indicator") {
        if (args.size() != 1) throw ParseError("indicator expects one shape");
        t.kind = Term::Kind::Indicator;
        t.shape = std::make_shared<Shape>(Shape::parse(args[0]));
    } else if (name == "radial") {
        if (args.size() != 1 && args.size() != 3) throw ParseError("radial expects path[,cx,cy]");
        t.kind = Term::Kind::Radial;
        if (args.size() == 3) t.center = {parse_number(args[1]), parse_number(args[2])};
        std::string path = join_path(base_dir, args[0]);
        std::ifstream in(path);
        if (!in) throw ParseError("cannot open radial profile '" + path + "'");
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::replace(line.begin(), line.end(), ',', ' ');
            std::istringstream ls(line);
            double a, b;
            if (!(ls >> a >> b)) {
                if (t.r.empty()) continue;
                throw ParseError("malformed radial profile row in '" + path + "'");
            }
            if (!t.r.empty() && !(a > t.r.back())) throw ParseError("radial profile r must increase");
            t.r.push_back(a);
            t.f.push_back(b);
        }
        if (t.r.size() < 2) throw ParseError("radial profile needs two rows");
    } else if (name == "table") {
        if (args.size() != 1) throw ParseError("table expects one path");
        t.kind = Term::Kind::Table;
        std::string path = join_path(base_dir, args[0]);
        std::ifstream in(path);
        if (!in) throw ParseError("cannot open forcing table '" + path + "'");
        std::string line;
        std::getline(in, line);
        if (line != "# largesol-field v1") throw ParseError("forcing table is not a field dump");
        std::getline(in, line);
        auto hp = line.find("h=");
        if (hp == std::string::npos) throw ParseError("forcing table lacks h");
        t.table_h = parse_number(line.substr(hp + 2, line.find(' ', hp) - hp - 2));
        while (std::getline(in, line)) {
            std::istringstream ls(line);
            long i, j;
            std::string xs, ys, vs;
            int act;
            if (!(ls >> i >> j >> xs >> ys >> vs >> act)) continue;
            double x = parse_number(xs), y = parse_number(ys);
            t.table[{std::lround(x / t.table_h), std::lround(y / t.table_h)}] = parse_number(vs);
        }
    } else {
        throw ParseError("unknown forcing '" + name + "'");
    }
    return t;
}

}  // namespace

Forcing Forcing::constant(double c) {
    Forcing f;
    auto t = std::make_shared<Term>();
    t->param = c;
    t->text = "constant(" + repr(c) + ")";
    f.terms_.push_back(t);
    return f;
}

Forcing Forcing::rho_power(double coeff, double beta) {
    Forcing f;
    auto t = std::make_shared<Term>();
    t->kind = Term::Kind::RhoPower;
    t->coeff = coeff;
    t->param = beta;
    t->text = (coeff != 1.0 ? repr(coeff) + "*" : std::string()) + "rho_power(" + repr(beta) + ")";
    f.terms_.push_back(t);
    return f;
}

Forcing Forcing::indicator(const Shape& s, double coeff) {
    Forcing f;
    auto t = std::make_shared<Term>();
    t->kind = Term::Kind::Indicator;
    t->coeff = coeff;
    t->shape = std::make_shared<Shape>(s);
    t->text = (coeff != 1.0 ? repr(coeff) + "*" : std::string()) + "indicator(" + s.name() + ")";
    f.terms_.push_back(t);
    return f;
}

Forcing Forcing::parse(const std::string& text, const std::string& base_dir) {
    Forcing f;
    for (const auto& piece : split_terms(text))
        f.terms_.push_back(std::make_shared<Term>(parse_term(piece, base_dir)));
    return f;
}

Forcing Forcing::dual() const {
    if (absolute_) throw UnsupportedError("dual of an absolute-value forcing");
    Forcing f = *this;
    f.reflect_ = !reflect_;
    f.negate_ = !negate_;
    return f;
}

Forcing Forcing::absolute() const {
    Forcing f = *this;
    f.absolute_ = true;
    return f;
}

double Forcing::value(Point p, double rho) const {
    Point q = reflect_ ? Point{-p.x, -p.y} : p;
    double v = 0.0;
    for (const auto& t : terms_) v += t->eval(q, rho);
    if (negate_) v = -v;
    if (absolute_) v = std::abs(v);
    return v;
}

bool Forcing::is_constant() const {
    return std::all_of(terms_.begin(), terms_.end(), [](const auto& t) { return t->kind == Term::Kind::Constant; });
}

bool Forcing::radial_about(Point c) const {
    if (reflect_ && (c.x != 0.0 || c.y != 0.0)) return false;
    for (const auto& t : terms_) {
        switch (t->kind) {
            case Term::Kind::Constant:
                break;
            case Term::Kind::Radial:
                if (t->center.x != c.x || t->center.y != c.y) return false;
                break;
            case Term::Kind::Indicator: {
                auto bb = t->shape->bbox();
                bool circular = t->shape->primitive() && t->shape->name().rfind("disk", 0) == 0;
                bool annular = t->shape->primitive() && t->shape->name().rfind("annulus", 0) == 0;
                if (!(circular || annular) || 0.5 * (bb[0] + bb[2]) != c.x || 0.5 * (bb[1] + bb[3]) != c.y)
                    return false;
                break;
            }
            default:
                return false;
        }
    }
    return true;
}

std::string Forcing::describe() const {
    std::string s;
    for (const auto& t : terms_) s += (s.empty() ? "" : "+") + t->text;
    if (reflect_) s = "dual(" + s + ")";
    if (absolute_) s = "abs(" + s + ")";
    return s;
}

ForcingSample sample_forcing(const Forcing& f, const DomainPtr& domain) {
    ForcingSample out{Field(domain, 0.0), 0};
    const Lattice& lat = domain->lattice();
    for (std::size_t k : domain->active()) {
        double v = f.value(lat.point(k), domain->rho(k));
        if (std::isnan(v)) throw InvalidArgument("forcing is NaN at a node");
        if (std::abs(v) > 1e300) {
            v = std::copysign(1e300, v);
            ++out.clamped;
        }
        out.field[k] = v;
    }
    for (std::size_t k : domain->boundary()) out.field[k] = 0.0;
    return out;
}

Field truncate_forcing(const Field& f, double k, bool signed_mode) {
    if (!(k >= 0.0)) throw InvalidArgument("invalid truncation level k < 0");
    Field out = f;
    for (std::size_t n : f.grid().active()) {
        double v = f[n];
        out[n] = signed_mode ? std::copysign(std::min(std::abs(v), k), v) : std::min(v, k);
    }
    return out;
}

}  // namespace largesol

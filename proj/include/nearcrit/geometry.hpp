#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "nearcrit/common.hpp"

namespace nearcrit {

enum class LatticeKind : std::uint8_t {
    TriangularSite = 0,  // site percolation; labels on vertices
    SquareBond = 1,      // bond percolation; labels on edges
};

enum class DomainKind : std::uint8_t {
    Torus = 0,  // side 2M, both directions identified
    Box = 1,    // side 2M, open boundary
};

struct LatticeSpec {
    LatticeKind kind = LatticeKind::TriangularSite;
    DomainKind domain = DomainKind::Torus;
    std::uint32_t n = 0;             // mesh eta = 1/n, n >= 2
    std::uint32_t side_sites = 0;    // 2M/eta, so M = side_sites/(2n)

    double eta() const { return 1.0 / static_cast<double>(n); }
    double half_side() const { return 0.5 * side_sites * eta(); }  // M

    static LatticeSpec make(LatticeKind kind, std::uint32_t n, double m,
                            DomainKind domain = DomainKind::Torus) {
        if (n < 2) throw ConfigError("lattice mesh requires n >= 2");
        double sides = 2.0 * m * n;
        double rounded = std::round(sides);
        if (m <= 0.0 || std::abs(sides - rounded) > 1e-9 || rounded < 2.0)
            throw ConfigError("domain half-side M must be a positive multiple of eta");
        LatticeSpec s;
        s.kind = kind;
        s.domain = domain;
        s.n = n;
        s.side_sites = static_cast<std::uint32_t>(rounded);
        return s;
    }
};

// The triangular lattice is stored as a square grid with one added diagonal
// (+1,+1); this triangulates every unit cell and gives each interior site six
// neighbors, which is graph-isomorphic to the triangular lattice. Sites sit at
// positions (i*eta - M, j*eta - M), so the domain is the square [-M, M)^2 and
// box grids, annuli and rendering all use plain axis-aligned coordinates.
// Square-bond keeps the same site layout with 4-neighbor adjacency and carries
// its labels on edges (2 per site: +x and +y).
class Geometry {
public:
    explicit Geometry(const LatticeSpec& spec) : spec_(spec) {
        w_ = spec.side_sites;
        h_ = spec.side_sites;
        site_count_ = static_cast<std::size_t>(w_) * h_;
        if (spec.kind == LatticeKind::TriangularSite) {
            offsets_ = {{{1, 0}, {1, 1}, {0, 1}, {-1, 0}, {-1, -1}, {0, -1}}};
            degree_ = 6;
            edge_dirs_ = 3;  // +x, +x+y, +y
        } else {
            offsets_ = {{{1, 0}, {0, 1}, {-1, 0}, {0, -1}, {0, 0}, {0, 0}}};
            degree_ = 4;
            edge_dirs_ = 2;  // +x, +y
        }
        edge_count_ = 0;
        for (EdgeId e = 0; e < max_edge_id(); ++e)
            if (edge_exists(e)) ++edge_count_;
    }

    const LatticeSpec& spec() const { return spec_; }
    std::size_t site_count() const { return site_count_; }
    std::size_t edge_count() const { return edge_count_; }
    std::uint32_t side() const { return w_; }
    double eta() const { return spec_.eta(); }
    double half_side() const { return spec_.half_side(); }
    bool torus() const { return spec_.domain == DomainKind::Torus; }
    int degree() const { return degree_; }
    int edge_dirs() const { return edge_dirs_; }

    SiteId site_at(std::uint32_t i, std::uint32_t j) const {
        return static_cast<SiteId>(j) * w_ + i;
    }
    std::uint32_t col(SiteId s) const { return s % w_; }
    std::uint32_t row(SiteId s) const { return s / w_; }

    Point position(SiteId s) const {
        check_site(s);
        return {col(s) * eta() - half_side(), row(s) * eta() - half_side()};
    }

    // Neighbor in cyclic direction d (counterclockwise starting at +x);
    // returns kNullSite across a box boundary.
    SiteId neighbor(SiteId s, int d) const {
        std::int64_t i = static_cast<std::int64_t>(col(s)) + offsets_[d][0];
        std::int64_t j = static_cast<std::int64_t>(row(s)) + offsets_[d][1];
        if (torus()) {
            i = wrap(i, w_);
            j = wrap(j, h_);
        } else if (i < 0 || i >= w_ || j < 0 || j >= h_) {
            return kNullSite;
        }
        return site_at(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
    }

    // Neighbors in a fixed counterclockwise cyclic order; deterministic.
    std::vector<SiteId> neighbors(SiteId s) const {
        check_site(s);
        std::vector<SiteId> out;
        out.reserve(degree_);
        for (int d = 0; d < degree_; ++d) {
            SiteId t = neighbor(s, d);
            if (t != kNullSite) out.push_back(t);
        }
        return out;
    }

    // Edges are identified as site * edge_dirs + dir, dir indexing the
    // positive offsets {+x, +x+y, +y} (triangular) or {+x, +y} (square).
    EdgeId max_edge_id() const { return static_cast<EdgeId>(site_count_ * edge_dirs_); }

    bool edge_exists(EdgeId e) const {
        if (e >= max_edge_id()) return false;
        return edge_other(e) != kNullSite;
    }
    SiteId edge_base(EdgeId e) const { return static_cast<SiteId>(e / edge_dirs_); }
    SiteId edge_other(EdgeId e) const {
        int dir = static_cast<int>(e % edge_dirs_);
        int d = (spec_.kind == LatticeKind::TriangularSite) ? dir : (dir == 0 ? 0 : 1);
        return neighbor(edge_base(e), d);
    }

    // Edge id joining adjacent sites, or a usage error if not adjacent.
    EdgeId edge_between(SiteId a, SiteId b) const {
        check_site(a);
        check_site(b);
        for (int dir = 0; dir < edge_dirs_; ++dir) {
            EdgeId e = static_cast<EdgeId>(a) * edge_dirs_ + dir;
            if (edge_exists(e) && edge_other(e) == b) return e;
            EdgeId f = static_cast<EdgeId>(b) * edge_dirs_ + dir;
            if (edge_exists(f) && edge_other(f) == a) return f;
        }
        throw UsageError("edge_between: sites are not adjacent");
    }

    // Torus-aware displacement taking the minimal image per coordinate.
    Point displacement(SiteId from, SiteId to) const {
        Point a = position(from), b = position(to);
        double dx = b.x - a.x, dy = b.y - a.y;
        if (torus()) {
            double side = 2.0 * half_side();
            dx -= side * std::round(dx / side);
            dy -= side * std::round(dy / side);
        }
        return {dx, dy};
    }

    double linf_distance(SiteId a, SiteId b) const {
        Point d = displacement(a, b);
        return std::max(std::abs(d.x), std::abs(d.y));
    }

    void check_site(SiteId s) const {
        if (s >= site_count_) throw UsageError("site id out of range");
    }

private:
    static std::int64_t wrap(std::int64_t v, std::int64_t m) {
        v %= m;
        return v < 0 ? v + m : v;
    }

    LatticeSpec spec_;
    std::uint32_t w_ = 0, h_ = 0;
    std::size_t site_count_ = 0;
    std::size_t edge_count_ = 0;
    std::array<std::array<int, 2>, 6> offsets_{};
    int degree_ = 0;
    int edge_dirs_ = 0;
};

inline Geometry build_geometry(const LatticeSpec& spec) { return Geometry(spec); }

// Dyadic box grid of Definition-style nested coverings: each site belongs to
// the r/2-cell containing it, and its r-square is centered on that cell. The
// family of r-squares (one per r/2-cell) is an overlapping covering; sites sit
// at distance >= r/4 from the boundary of their own r-square and the squares
// are nested across dyadic scales.
class BoxGrid {
public:
    BoxGrid(const Geometry& g, double r) : geom_(&g), r_(r) {
        if (!is_dyadic(r)) throw UsageError("box grid scale must be dyadic");
        double side = 2.0 * g.half_side();
        if (r > side) throw UsageError("box grid scale exceeds domain side");
        double cells = side / (0.5 * r);
        cells_per_side_ = static_cast<std::uint32_t>(std::round(cells));
        if (std::abs(cells - cells_per_side_) > 1e-9)
            throw UsageError("box grid scale must divide the domain side");
    }

    double scale() const { return r_; }
    std::uint32_t cells_per_side() const { return cells_per_side_; }
    std::size_t cell_count() const {
        return static_cast<std::size_t>(cells_per_side_) * cells_per_side_;
    }

    std::uint32_t cell_of(SiteId s) const {
        Point p = geom_->position(s);
        double half = 0.5 * r_;
        auto idx = [&](double v) {
            auto k = static_cast<std::int64_t>(std::floor((v + geom_->half_side()) / half));
            if (k < 0) k = 0;
            if (k >= cells_per_side_) k = cells_per_side_ - 1;
            return static_cast<std::uint32_t>(k);
        };
        return idx(p.y) * cells_per_side_ + idx(p.x);
    }

    // Center of the r-square associated with a cell (= the cell center).
    Point cell_center(std::uint32_t cell) const {
        std::uint32_t ci = cell % cells_per_side_;
        std::uint32_t cj = cell / cells_per_side_;
        double half = 0.5 * r_;
        double m = geom_->half_side();
        return {-m + (ci + 0.5) * half, -m + (cj + 0.5) * half};
    }

    // L-infinity distance from a site to the boundary of its r-square.
    double margin(SiteId s) const {
        Point c = cell_center(cell_of(s));
        Point p = geom_->position(s);
        double dx = std::abs(p.x - c.x), dy = std::abs(p.y - c.y);
        return 0.5 * r_ - std::max(dx, dy);
    }

    bool square_contains(std::uint32_t cell, Point p) const {
        Point c = cell_center(cell);
        return std::abs(p.x - c.x) <= 0.5 * r_ && std::abs(p.y - c.y) <= 0.5 * r_;
    }

private:
    const Geometry* geom_;
    double r_;
    std::uint32_t cells_per_side_ = 0;
};

inline BoxGrid box_cover(const Geometry& g, double r) { return BoxGrid(g, r); }

}  // namespace nearcrit

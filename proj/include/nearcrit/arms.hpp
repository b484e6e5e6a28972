#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "nearcrit/geometry.hpp"

namespace nearcrit {

// Arm events between the boundaries of concentric axis-aligned boxes.
//
// On the triangulated lattice, the alternating 2j-arm event between the
// boundary pieces of an annulus is equivalent to the annulus having at least
// j distinct open crossing clusters (equivalently, j distinct closed ones):
// two distinct same-color crossing clusters force an opposite-color radial
// crossing in each sector between them, and conversely an open connection
// between two alternating open arms would trap one of the dual arms. Counting
// crossing clusters is therefore an exact detector.
//
// For a two-threshold near-critical window (primal arms with labels <= p',
// dual arms with labels > p, p < p'), the detector evaluates both one-sided
// counts: j distinct primal-medium crossing clusters guarantee pure dual arms
// between them, and vice versa. Configurations whose arms are entangled
// through window-interval sites in both media simultaneously are not counted;
// at coinciding thresholds the detector is exact.
//
// Monochromatic events need genuinely vertex-disjoint crossings and are
// decided by a unit-vertex-capacity max-flow (Menger).

struct Annulus {
    Point center;
    double inner_r = 0.0;  // L-infinity radius of the inner box
    double outer_r = 0.0;  // L-infinity radius of the outer box
};

class ArmWorkspace {
public:
    void reset(std::size_t n) {
        if (stamp_.size() < n) {
            stamp_.assign(n, 0);
            value_.assign(n, 0);
        }
        if (++epoch_ == 0) {
            std::fill(stamp_.begin(), stamp_.end(), 0);
            epoch_ = 1;
        }
    }
    bool visited(std::size_t i) const { return stamp_[i] == epoch_; }
    void visit(std::size_t i) { stamp_[i] = epoch_; }
    void set_value(std::size_t i, std::uint32_t v) {
        stamp_[i] = epoch_;
        value_[i] = v;
    }
    std::uint32_t value(std::size_t i) const {
        return visited(i) ? value_[i] : kNullCluster;
    }
    std::vector<SiteId>& queue() { return queue_; }

private:
    std::vector<std::uint32_t> stamp_;
    std::vector<std::uint32_t> value_;
    std::uint32_t epoch_ = 0;
    std::vector<SiteId> queue_;
};

namespace detail {

inline double torus_delta(double d, double side, bool torus) {
    if (torus) d -= side * std::round(d / side);
    return d;
}

inline double linf_from(const Geometry& g, SiteId s, Point c) {
    Point p = g.position(s);
    double side = 2.0 * g.half_side();
    double dx = torus_delta(p.x - c.x, side, g.torus());
    double dy = torus_delta(p.y - c.y, side, g.torus());
    return std::max(std::abs(dx), std::abs(dy));
}

// Crossings are anchored by lattice adjacency, not by distance bands: a path
// connects the annulus boundaries iff it holds a site adjacent to the inner
// box and one adjacent to the complement of the outer box. This is the
// convention under which the triangulation crossing duality is exact; pure
// L-infinity rings admit diagonal corner slips past a wall's endpoint.
inline bool adjacent_inside(const Geometry& g, SiteId s, Point c, double inner_r) {
    for (int d = 0; d < g.degree(); ++d) {
        SiteId t = g.neighbor(s, d);
        if (t != kNullSite && linf_from(g, t, c) <= inner_r + 1e-12) return true;
    }
    return false;
}

inline bool adjacent_outside(const Geometry& g, SiteId s, Point c, double outer_r) {
    for (int d = 0; d < g.degree(); ++d) {
        SiteId t = g.neighbor(s, d);
        if (t == kNullSite) return true;  // box-domain edge counts as outside
        if (linf_from(g, t, c) > outer_r + 1e-12) return true;
    }
    return false;
}

// Enumerate sites of the closed box |pos - center|_inf <= radius, calling
// fn(site). Handles torus wrap; on a box domain clips to the domain.
template <typename Fn>
void for_box_sites(const Geometry& g, Point center, double radius, Fn&& fn) {
    double eta = g.eta();
    double m = g.half_side();
    auto lo_i = static_cast<std::int64_t>(std::ceil((center.x - radius + m) / eta - 1e-9));
    auto hi_i = static_cast<std::int64_t>(std::floor((center.x + radius + m) / eta + 1e-9));
    auto lo_j = static_cast<std::int64_t>(std::ceil((center.y - radius + m) / eta - 1e-9));
    auto hi_j = static_cast<std::int64_t>(std::floor((center.y + radius + m) / eta + 1e-9));
    std::int64_t side = g.side();
    if (!g.torus()) {
        lo_i = std::max<std::int64_t>(lo_i, 0);
        hi_i = std::min<std::int64_t>(hi_i, side - 1);
        lo_j = std::max<std::int64_t>(lo_j, 0);
        hi_j = std::min<std::int64_t>(hi_j, side - 1);
    } else {
        if (hi_i - lo_i >= side) { lo_i = 0; hi_i = side - 1; }
        if (hi_j - lo_j >= side) { lo_j = 0; hi_j = side - 1; }
    }
    for (std::int64_t j = lo_j; j <= hi_j; ++j) {
        auto jj = static_cast<std::uint32_t>(((j % side) + side) % side);
        for (std::int64_t i = lo_i; i <= hi_i; ++i) {
            auto ii = static_cast<std::uint32_t>(((i % side) + side) % side);
            fn(g.site_at(ii, jj));
        }
    }
}

// Minimal unit-capacity max flow on an explicit residual edge list.
class UnitFlow {
public:
    void init(std::uint32_t nodes) {
        head_.assign(nodes, -1);
        to_.clear();
        next_.clear();
        cap_.clear();
    }
    void add_edge(std::uint32_t u, std::uint32_t v, std::uint8_t cap) {
        push(u, v, cap);
        push(v, u, 0);
    }
    // Augment up to `limit` units from s to t; returns achieved flow.
    int run(std::uint32_t s, std::uint32_t t, int limit) {
        int flow = 0;
        std::vector<std::int32_t> pre_edge(head_.size());
        std::vector<std::uint32_t> q;
        while (flow < limit) {
            std::fill(pre_edge.begin(), pre_edge.end(), -1);
            q.clear();
            q.push_back(s);
            pre_edge[s] = -2;
            bool reached = false;
            for (std::size_t h = 0; h < q.size() && !reached; ++h) {
                std::uint32_t u = q[h];
                for (std::int32_t e = head_[u]; e >= 0; e = next_[e]) {
                    if (!cap_[e]) continue;
                    std::uint32_t v = to_[e];
                    if (pre_edge[v] != -1) continue;
                    pre_edge[v] = e;
                    if (v == t) { reached = true; break; }
                    q.push_back(v);
                }
            }
            if (!reached) break;
            for (std::uint32_t v = t; v != s;) {
                std::int32_t e = pre_edge[v];
                cap_[e] -= 1;
                cap_[e ^ 1] += 1;
                v = to_[e ^ 1];
            }
            ++flow;
        }
        return flow;
    }

private:
    void push(std::uint32_t u, std::uint32_t v, std::uint8_t cap) {
        to_.push_back(v);
        cap_.push_back(cap);
        next_.push_back(head_[u]);
        head_[u] = static_cast<std::int32_t>(to_.size() - 1);
    }
    std::vector<std::int32_t> head_;
    std::vector<std::uint32_t> to_;
    std::vector<std::int32_t> next_;
    std::vector<std::uint8_t> cap_;
};

}  // namespace detail

// Number of distinct clusters of sites satisfying `in_color` that cross the
// annulus (contain both a site on the innermost ring and one on the outermost
// ring). Stops counting at `max_needed`.
template <typename ColorFn>
int count_crossing_clusters(const Geometry& g, ColorFn&& in_color, const Annulus& a,
                            int max_needed, ArmWorkspace& ws) {
    double eta = g.eta();
    double seed_band = a.inner_r + 1.5 * eta;
    double reach_band = a.outer_r - 1.5 * eta;
    ws.reset(g.site_count());
    std::vector<SiteId> seeds;
    detail::for_box_sites(g, a.center, std::min(seed_band, a.outer_r), [&](SiteId s) {
        double d = detail::linf_from(g, s, a.center);
        if (d > a.inner_r + 1e-12 && d <= seed_band && in_color(s) &&
            detail::adjacent_inside(g, s, a.center, a.inner_r))
            seeds.push_back(s);
    });
    int found = 0;
    auto& q = ws.queue();
    for (SiteId seed : seeds) {
        if (ws.visited(seed)) continue;
        ws.visit(seed);
        q.clear();
        q.push_back(seed);
        bool reaches_outer = false;
        for (std::size_t h = 0; h < q.size(); ++h) {
            SiteId s = q[h];
            double d = detail::linf_from(g, s, a.center);
            if (d > reach_band && detail::adjacent_outside(g, s, a.center, a.outer_r)) {
                reaches_outer = true;
                if (found + 1 >= max_needed) return found + 1;
            }
            for (int dir = 0; dir < g.degree(); ++dir) {
                SiteId t = g.neighbor(s, dir);
                if (t == kNullSite || ws.visited(t)) continue;
                double dt = detail::linf_from(g, t, a.center);
                if (dt <= a.inner_r + 1e-12 || dt > a.outer_r + 1e-12) continue;
                if (!in_color(t)) continue;
                ws.visit(t);
                q.push_back(t);
            }
        }
        if (reaches_outer) ++found;
    }
    return found;
}

// Maximum number of vertex-disjoint crossings within the `in_color` medium,
// up to `needed` (Menger via unit-vertex-capacity flow with split vertices).
template <typename ColorFn>
int count_disjoint_crossings(const Geometry& g, ColorFn&& in_color, const Annulus& a,
                             int needed, ArmWorkspace& ws) {
    std::vector<SiteId> sites;
    detail::for_box_sites(g, a.center, a.outer_r, [&](SiteId s) {
        double d = detail::linf_from(g, s, a.center);
        if (d > a.inner_r + 1e-12 && d <= a.outer_r + 1e-12 && in_color(s)) sites.push_back(s);
    });
    ws.reset(g.site_count());
    for (std::uint32_t k = 0; k < sites.size(); ++k) ws.set_value(sites[k], k);

    const auto n = static_cast<std::uint32_t>(sites.size());
    // Nodes: 2k in/out per site, then source, sink.
    detail::UnitFlow flow;
    flow.init(2 * n + 2);
    const std::uint32_t src = 2 * n, snk = 2 * n + 1;
    for (std::uint32_t k = 0; k < n; ++k) {
        flow.add_edge(2 * k, 2 * k + 1, 1);  // vertex capacity
        if (detail::adjacent_inside(g, sites[k], a.center, a.inner_r))
            flow.add_edge(src, 2 * k, 1);
        if (detail::adjacent_outside(g, sites[k], a.center, a.outer_r))
            flow.add_edge(2 * k + 1, snk, 1);
        for (int dir = 0; dir < g.degree(); ++dir) {
            SiteId t = g.neighbor(sites[k], dir);
            if (t == kNullSite) continue;
            std::uint32_t kt = ws.value(t);
            if (kt == kNullCluster) continue;
            flow.add_edge(2 * k + 1, 2 * kt, 1);
        }
    }
    return flow.run(src, snk, needed);
}

// Cyclic palettes supported by the detector.
enum class ArmPalette : std::uint8_t {
    Alternating = 0,    // O,C,O,C,... (k even); k = 1 is the one-arm event
    Monochromatic = 1,  // all arms primal
};

// Static (single-threshold) arm event.
template <typename OpenFn>
bool arm_event(const Geometry& g, OpenFn&& open, const Annulus& a, int k,
               ArmPalette palette, ArmWorkspace& ws) {
    if (a.inner_r >= a.outer_r) return true;  // degenerate annulus, by convention
    auto closed = [&](SiteId s) { return !open(s); };
    if (palette == ArmPalette::Monochromatic) {
        if (k == 1) return count_crossing_clusters(g, open, a, 1, ws) >= 1;
        return count_disjoint_crossings(g, open, a, k, ws) >= k;
    }
    if (k == 1) return count_crossing_clusters(g, open, a, 1, ws) >= 1;
    if (k % 2 != 0) throw UsageError("alternating palette requires even arm count");
    int j = k / 2;
    if (k == 2)
        return count_crossing_clusters(g, open, a, 1, ws) >= 1 &&
               count_crossing_clusters(g, closed, a, 1, ws) >= 1;
    return count_crossing_clusters(g, open, a, j, ws) >= j;
}

// Near-critical window arm event: primal arms live in {label <= p_hi}, dual
// arms in {label > p_lo}.
template <typename LabelFn>
bool window_arm_event(const Geometry& g, LabelFn&& label, double p_lo, double p_hi,
                      const Annulus& a, int k, ArmPalette palette, ArmWorkspace& ws) {
    if (a.inner_r >= a.outer_r) return true;
    auto primal = [&](SiteId s) { return label(s) <= p_hi; };
    auto dual = [&](SiteId s) { return label(s) > p_lo; };
    if (palette == ArmPalette::Monochromatic) {
        if (k == 1) return count_crossing_clusters(g, primal, a, 1, ws) >= 1;
        return count_disjoint_crossings(g, primal, a, k, ws) >= k;
    }
    if (k == 1) return count_crossing_clusters(g, primal, a, 1, ws) >= 1;
    if (k % 2 != 0) throw UsageError("alternating palette requires even arm count");
    int j = k / 2;
    if (k == 2)
        return count_crossing_clusters(g, primal, a, 1, ws) >= 1 &&
               count_crossing_clusters(g, dual, a, 1, ws) >= 1;
    return count_crossing_clusters(g, primal, a, j, ws) >= j ||
           count_crossing_clusters(g, dual, a, j, ws) >= j;
}

// Alternating 4-arm event anchored at a single site: arms emanate from the
// site itself and reach the boundary ring of the box of radius `outer_r`
// around `anchor_center`. For a closed site this holds iff at least two
// distinct boundary-reaching open clusters of the box are lattice-adjacent to
// it (the sectors between them then carry the closed arms through the site),
// and symmetrically for an open site.
template <typename OpenFn>
bool four_arm_at_site(const Geometry& g, OpenFn&& open, SiteId x, Point anchor_center,
                      double outer_r, ArmWorkspace& ws) {
    bool x_open = open(x);
    auto opposite = [&](SiteId s) { return s != x && open(s) == !x_open; };
    double eta = g.eta();
    double reach_band = outer_r - 1.5 * eta;
    ws.reset(g.site_count());
    auto& q = ws.queue();
    int found = 0;
    for (int dir = 0; dir < g.degree(); ++dir) {
        SiteId seed = g.neighbor(x, dir);
        if (seed == kNullSite || ws.visited(seed) || !opposite(seed)) continue;
        if (detail::linf_from(g, seed, anchor_center) > outer_r + 1e-12) continue;
        ws.visit(seed);
        q.clear();
        q.push_back(seed);
        bool reaches = false;
        for (std::size_t h = 0; h < q.size(); ++h) {
            SiteId s = q[h];
            if (!reaches && detail::linf_from(g, s, anchor_center) > reach_band &&
                detail::adjacent_outside(g, s, anchor_center, outer_r))
                reaches = true;
            for (int d2 = 0; d2 < g.degree(); ++d2) {
                SiteId t = g.neighbor(s, d2);
                if (t == kNullSite || ws.visited(t) || !opposite(t)) continue;
                if (detail::linf_from(g, t, anchor_center) > outer_r + 1e-12) continue;
                ws.visit(t);
                q.push_back(t);
            }
        }
        if (reaches && ++found >= 2) return true;
    }
    return false;
}

}  // namespace nearcrit

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "nearcrit/arms.hpp"
#include "nearcrit/ensemble.hpp"
#include "nearcrit/forest.hpp"
#include "nearcrit/geometry.hpp"

namespace nearcrit {

// epsilon-important (pivotal) sites, switch processes, enhanced networks with
// cluster routers, and the cut-off forest / tree / invasion constructions.
// All of this operates on the vertex-labeled (triangular-site) lattice.

struct ImportantSite {
    SiteId site = kNullSite;
    bool open = false;       // color in the lambda configuration
    std::uint32_t cell = 0;  // enclosing epsilon-grid cell
};

struct SwitchEvent {
    SiteId site = kNullSite;
    double t = 0.0;  // level in (lambda, lambda'] at which the site opens
    std::uint32_t index = 0;
};

// A site is epsilon-important when the alternating 4-arm event holds from the
// site out to the boundary of the 3-epsilon box concentric with the site's
// epsilon-grid cell. For a closed site this is equivalent to at least two
// distinct boundary-reaching open clusters of that box being lattice-adjacent
// to it, and symmetrically for an open site, which is what the detector
// computes from one two-color cluster labeling per box.
inline std::vector<ImportantSite> find_important(const Geometry& g,
                                                 const ConfigView& config,
                                                 double epsilon) {
    if (g.spec().kind != LatticeKind::TriangularSite)
        throw UsageError("find_important requires the vertex-labeled lattice");
    if (epsilon <= 0.0) throw UsageError("epsilon must be positive");
    double side = 2.0 * g.half_side();
    if (3.0 * epsilon > side + 1e-12)
        throw UsageError("epsilon too large: 3*epsilon must fit in the domain");
    double cells_d = side / epsilon;
    auto cells = static_cast<std::uint32_t>(std::round(cells_d));
    if (std::abs(cells_d - cells) > 1e-9)
        throw UsageError("epsilon must divide the domain side");

    double eta = g.eta();
    double m = g.half_side();
    std::vector<ImportantSite> out;

    // Per-box scratch: local cluster ids (stamped) and boundary-reach flags.
    ArmWorkspace ws;
    std::vector<std::uint8_t> reach;
    std::vector<SiteId> queue;
    std::vector<SiteId> box_sites;

    for (std::uint32_t cj = 0; cj < cells; ++cj) {
        for (std::uint32_t ci = 0; ci < cells; ++ci) {
            Point center{-m + (ci + 0.5) * epsilon, -m + (cj + 0.5) * epsilon};
            double outer_r = 1.5 * epsilon;
            double reach_band = outer_r - 1.5 * eta;

            box_sites.clear();
            detail::for_box_sites(g, center, outer_r, [&](SiteId s) {
                box_sites.push_back(s);
            });
            ws.reset(g.site_count());
            reach.clear();

            // Label all same-color components of the box, both colors.
            for (SiteId seed : box_sites) {
                if (ws.visited(seed)) continue;
                auto cid = static_cast<std::uint32_t>(reach.size());
                bool seed_open = config.site_open(seed);
                ws.set_value(seed, cid);
                queue.clear();
                queue.push_back(seed);
                bool touches = false;
                for (std::size_t h = 0; h < queue.size(); ++h) {
                    SiteId s = queue[h];
                    if (!touches && detail::linf_from(g, s, center) > reach_band &&
                        detail::adjacent_outside(g, s, center, outer_r))
                        touches = true;
                    for (int dir = 0; dir < g.degree(); ++dir) {
                        SiteId t = g.neighbor(s, dir);
                        if (t == kNullSite || ws.visited(t)) continue;
                        if (detail::linf_from(g, t, center) > outer_r + 1e-12) continue;
                        if (config.site_open(t) != seed_open) continue;
                        ws.set_value(t, cid);
                        queue.push_back(t);
                    }
                }
                reach.push_back(touches ? 1 : 0);
            }

            // Candidates: sites of the central epsilon-cell.
            double half_cell = 0.5 * epsilon;
            for (SiteId x : box_sites) {
                Point p = g.position(x);
                double dx = detail::torus_delta(p.x - center.x, side, g.torus());
                double dy = detail::torus_delta(p.y - center.y, side, g.torus());
                // Half-open cell membership: [-half_cell, half_cell) per axis.
                if (dx < -half_cell - 1e-12 || dx >= half_cell - 1e-12) continue;
                if (dy < -half_cell - 1e-12 || dy >= half_cell - 1e-12) continue;
                bool x_open = config.site_open(x);
                std::uint32_t found[2] = {kNullCluster, kNullCluster};
                int distinct = 0;
                for (int dir = 0; dir < g.degree() && distinct < 2; ++dir) {
                    SiteId t = g.neighbor(x, dir);
                    if (t == kNullSite) continue;
                    std::uint32_t cid = ws.value(t);
                    if (cid == kNullCluster || !reach[cid]) continue;
                    if (config.site_open(t) == x_open) continue;
                    if (cid == found[0] || cid == found[1]) continue;
                    found[distinct++] = cid;
                }
                if (distinct >= 2)
                    out.push_back({x, x_open, cj * cells + ci});
            }
        }
    }
    std::sort(out.begin(), out.end(),
              [](const ImportantSite& a, const ImportantSite& b) { return a.site < b.site; });
    return out;
}

// Closed important sites whose label falls inside the window, i.e. exactly
// the pivotals that switch to open between lambda and lambda'; times come
// from the labels themselves (the natural coupling).
inline std::vector<SwitchEvent> switches(const LabelField& labels,
                                         const std::vector<ImportantSite>& important,
                                         const Window& window, const Calibration& cal) {
    double p_lo = lambda_to_p(window.lambda_lo, cal);
    double p_hi = lambda_to_p(window.lambda_hi, cal);
    std::vector<SwitchEvent> out;
    for (const ImportantSite& is : important) {
        if (is.open) continue;
        double u = labels.site_label(is.site);
        if (u > p_lo && u <= p_hi)
            out.push_back({is.site, p_to_lambda(u, cal), 0});
    }
    std::sort(out.begin(), out.end(),
              [](const SwitchEvent& a, const SwitchEvent& b) { return a.t < b.t; });
    for (std::uint32_t i = 0; i < out.size(); ++i) out[i].index = i;
    return out;
}

struct Router {
    std::uint32_t cluster = 0;  // cluster id in the X-removed labeling
    SiteId site = kNullSite;    // canonical representative: leftmost of the lowermost
    Point pos;
};

// Bipartite pivotal-router graph: routers represent open clusters of the
// lambda configuration with the pivotal set removed; a pivotal connects to a
// router iff it is lattice-adjacent to that cluster.
struct EnhancedNetwork {
    std::vector<ImportantSite> pivotals;
    std::vector<Router> routers;
    std::vector<std::vector<std::uint32_t>> routers_of_pivotal;  // sorted, distinct
};

inline EnhancedNetwork build_network(const Geometry& g, const ConfigView& config,
                                     const std::vector<ImportantSite>& pivotals) {
    if (g.spec().kind != LatticeKind::TriangularSite)
        throw UsageError("build_network requires the vertex-labeled lattice");
    std::size_t n = g.site_count();
    std::vector<std::uint8_t> in_x(n, 0);
    for (const auto& p : pivotals) in_x[p.site] = 1;

    // Open clusters of omega^lambda with X removed.
    std::vector<std::uint32_t> cluster_of(n, kNullCluster);
    std::vector<SiteId> rep;
    std::vector<SiteId> queue;
    for (SiteId root = 0; root < n; ++root) {
        if (cluster_of[root] != kNullCluster || in_x[root] || !config.site_open(root))
            continue;
        auto c = static_cast<std::uint32_t>(rep.size());
        cluster_of[root] = c;
        SiteId r = root;
        queue.clear();
        queue.push_back(root);
        for (std::size_t h = 0; h < queue.size(); ++h) {
            SiteId s = queue[h];
            if (s < r) r = s;
            for (int dir = 0; dir < g.degree(); ++dir) {
                SiteId t = g.neighbor(s, dir);
                if (t == kNullSite || cluster_of[t] != kNullCluster) continue;
                if (in_x[t] || !config.site_open(t)) continue;
                cluster_of[t] = c;
                queue.push_back(t);
            }
        }
        rep.push_back(r);
    }

    EnhancedNetwork net;
    net.pivotals = pivotals;
    net.routers_of_pivotal.resize(pivotals.size());
    std::vector<std::uint32_t> router_of_cluster(rep.size(), kNullCluster);
    for (std::size_t pi = 0; pi < pivotals.size(); ++pi) {
        auto& adj = net.routers_of_pivotal[pi];
        for (int dir = 0; dir < g.degree(); ++dir) {
            SiteId t = g.neighbor(pivotals[pi].site, dir);
            if (t == kNullSite) continue;
            std::uint32_t c = cluster_of[t];
            if (c == kNullCluster) continue;
            if (router_of_cluster[c] == kNullCluster) {
                router_of_cluster[c] = static_cast<std::uint32_t>(net.routers.size());
                net.routers.push_back({c, rep[c], g.position(rep[c])});
            }
            adj.push_back(router_of_cluster[c]);
        }
        std::sort(adj.begin(), adj.end());
        adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
    }
    return net;
}

struct CutoffEdge {
    std::uint32_t r1 = 0, r2 = 0;
    double label = 0.0;          // lambda, or the switch time t in (lambda, lambda']
    bool is_lambda = true;       // provenance: step-2 tree edge vs switch event
    SiteId via_pivotal = kNullSite;
    std::int32_t event_index = -1;
    bool loop() const { return r1 == r2; }
};

// Cut-off spanning forest on routers: step-1/2 spanning trees of the
// open-pivotal connectivity labeled lambda, switch edges labeled by their
// times, cycles broken by deleting the largest label. `graph_edges` keeps the
// full labeled multigraph (including loops) for the invasion variant.
struct CutoffForest {
    const Geometry* geom = nullptr;
    double lambda = 0.0;
    std::vector<Router> routers;
    std::vector<CutoffEdge> graph_edges;   // steps 1-3 multigraph
    std::vector<CutoffEdge> forest_edges;  // after the cycle rule
    std::vector<std::uint32_t> component;  // per router, on the forest

    // Drawing of an edge: router -> pivotal -> router, unwrapped on the torus.
    PolylinePath draw(const CutoffEdge& e) const {
        PolylinePath p;
        p.metric = geom->torus() ? PathMetric::TorusFlat : PathMetric::Plane;
        double side = 2.0 * geom->half_side();
        p.period = geom->torus() ? side : 0.0;
        Point a = routers[e.r1].pos;
        Point x = geom->position(e.via_pivotal);
        Point b = routers[e.r2].pos;
        auto step = [&](Point from, Point to) {
            double dx = detail::torus_delta(to.x - from.x, side, geom->torus());
            double dy = detail::torus_delta(to.y - from.y, side, geom->torus());
            return Point{from.x + dx, from.y + dy};
        };
        p.points.push_back(a);
        Point xm = step(a, x);
        p.points.push_back(xm);
        p.points.push_back(step(xm, b));
        return p;
    }
};

inline CutoffForest cutoff_forest(const Geometry& g, const EnhancedNetwork& net,
                                  const std::vector<SwitchEvent>& events, double lambda) {
    CutoffForest f;
    f.geom = &g;
    f.lambda = lambda;
    f.routers = net.routers;

    // Map pivotal site -> index for event attachment.
    std::vector<std::pair<SiteId, std::uint32_t>> by_site;
    by_site.reserve(net.pivotals.size());
    for (std::uint32_t i = 0; i < net.pivotals.size(); ++i)
        by_site.push_back({net.pivotals[i].site, i});
    std::sort(by_site.begin(), by_site.end());
    auto pivotal_index = [&](SiteId s) -> std::uint32_t {
        auto it = std::lower_bound(by_site.begin(), by_site.end(),
                                   std::make_pair(s, std::uint32_t{0}));
        if (it == by_site.end() || it->first != s)
            throw IntegrityError("switch event site is absent from the network");
        return it->second;
    };

    // Step 1: lambda-edges through open pivotals, ordered by pivotal site id.
    for (std::uint32_t pi = 0; pi < net.pivotals.size(); ++pi) {
        if (!net.pivotals[pi].open) continue;
        const auto& rs = net.routers_of_pivotal[pi];
        for (std::size_t a = 0; a < rs.size(); ++a)
            for (std::size_t b = a + 1; b < rs.size(); ++b)
                f.graph_edges.push_back(
                    {rs[a], rs[b], lambda, true, net.pivotals[pi].site, -1});
    }
    // Step 3: switch edges in time order; single-router events become loops.
    for (const SwitchEvent& ev : events) {
        std::uint32_t pi = pivotal_index(ev.site);
        if (net.pivotals[pi].open)
            throw IntegrityError("switch event attached to an open pivotal");
        const auto& rs = net.routers_of_pivotal[pi];
        if (rs.size() == 1)
            f.graph_edges.push_back({rs[0], rs[0], ev.t, false, ev.site,
                                     static_cast<std::int32_t>(ev.index)});
        for (std::size_t a = 0; a < rs.size(); ++a)
            for (std::size_t b = a + 1; b < rs.size(); ++b)
                f.graph_edges.push_back({rs[a], rs[b], ev.t, false, ev.site,
                                         static_cast<std::int32_t>(ev.index)});
    }

    // Steps 2+4 as one Kruskal pass: lambda-edges precede all switch edges and
    // keep their deterministic order, so the lambda-forest is the step-2
    // choice and later cycles drop the largest label.
    detail::UnionFind uf(f.routers.size());
    for (const CutoffEdge& e : f.graph_edges) {
        if (e.loop()) continue;
        if (uf.unite(e.r1, e.r2)) f.forest_edges.push_back(e);
    }
    f.component.assign(f.routers.size(), 0);
    for (std::uint32_t r = 0; r < f.routers.size(); ++r) f.component[r] = uf.find(r);
    return f;
}

// Giant component of a cut-off forest per the covering/diameter rule: the
// unique component within distance s of every point of the torus while all
// other components have diameter at most s. When no component qualifies the
// result is a degenerate single-point tree at the domain center.
struct CutoffTree {
    const Geometry* geom = nullptr;
    bool degenerate = false;
    double lambda = 0.0;
    Point center;                         // position of the degenerate point
    std::vector<std::uint32_t> vertices;  // router indices into the forest
    std::vector<Router> routers;          // forest router table (copy)
    std::vector<CutoffEdge> edges;

    std::uint32_t nearest_vertex(Point p) const {
        if (degenerate || vertices.empty()) return kNullCluster;
        double side = 2.0 * geom->half_side();
        double best = 1e300;
        std::uint32_t arg = kNullCluster;
        for (std::uint32_t v : vertices) {
            Point q = routers[v].pos;
            double dx = detail::torus_delta(q.x - p.x, side, geom->torus());
            double dy = detail::torus_delta(q.y - p.y, side, geom->torus());
            double d = std::max(std::abs(dx), std::abs(dy));
            SiteId cur = arg == kNullCluster ? kNullSite : routers[arg].site;
            if (d < best - 1e-15 || (std::abs(d - best) <= 1e-15 && routers[v].site < cur)) {
                best = d;
                arg = v;
            }
        }
        return arg;
    }

    // Router-to-router path (vertex sequence) inside the tree.
    std::vector<std::uint32_t> path_vertices(std::uint32_t a, std::uint32_t b) const;
    PolylinePath draw_path(const std::vector<std::uint32_t>& verts) const;
    std::vector<const CutoffEdge*> path_edges(std::uint32_t a, std::uint32_t b) const;
};

namespace detail {

inline double point_segment_dist_torus(Point p, Point a, Point b, double side, bool torus) {
    // Minimize over torus images of p relative to the (unwrapped) segment.
    double best = 1e300;
    int range = torus ? 1 : 0;
    for (int kx = -range; kx <= range; ++kx) {
        for (int ky = -range; ky <= range; ++ky) {
            double px = p.x + kx * side, py = p.y + ky * side;
            double vx = b.x - a.x, vy = b.y - a.y;
            double wx = px - a.x, wy = py - a.y;
            double vv = vx * vx + vy * vy;
            double t = vv > 0 ? std::clamp((wx * vx + wy * vy) / vv, 0.0, 1.0) : 0.0;
            double dx = wx - t * vx, dy = wy - t * vy;
            best = std::min(best, std::hypot(dx, dy));
        }
    }
    return best;
}

}  // namespace detail

inline CutoffTree giant(const CutoffForest& f, double s) {
    if (s <= 0.0) throw UsageError("giant: scale s must be positive");
    const Geometry& g = *f.geom;
    double side = 2.0 * g.half_side();

    CutoffTree degen;
    degen.geom = &g;
    degen.degenerate = true;
    degen.lambda = f.lambda;
    degen.center = {0.0, 0.0};
    if (f.routers.empty()) return degen;

    // Group routers by forest component.
    std::vector<std::uint32_t> comps;
    for (std::uint32_t r = 0; r < f.routers.size(); ++r) comps.push_back(f.component[r]);
    std::sort(comps.begin(), comps.end());
    comps.erase(std::unique(comps.begin(), comps.end()), comps.end());

    auto comp_points = [&](std::uint32_t c) {
        std::vector<Point> pts;
        for (std::uint32_t r = 0; r < f.routers.size(); ++r)
            if (f.component[r] == c) pts.push_back(f.routers[r].pos);
        for (const CutoffEdge& e : f.forest_edges)
            if (f.component[e.r1] == c) {
                PolylinePath pl = f.draw(e);
                pts.insert(pts.end(), pl.points.begin(), pl.points.end());
            }
        return pts;
    };
    // Diameter test with early exit at the threshold s.
    auto diam_exceeds = [&](const std::vector<Point>& pts, double limit) {
        for (std::size_t i = 0; i < pts.size(); ++i)
            for (std::size_t j = i + 1; j < pts.size(); ++j) {
                double dx = detail::torus_delta(pts[j].x - pts[i].x, side, g.torus());
                double dy = detail::torus_delta(pts[j].y - pts[i].y, side, g.torus());
                if (std::max(std::abs(dx), std::abs(dy)) > limit) return true;
            }
        return false;
    };

    // Coverage test on a grid of spacing <= s/2.
    auto covers = [&](std::uint32_t c) {
        int k = std::max(2, static_cast<int>(std::ceil(side / (0.5 * s))));
        std::vector<std::pair<Point, Point>> segs;
        for (const CutoffEdge& e : f.forest_edges)
            if (f.component[e.r1] == c) {
                PolylinePath pl = f.draw(e);
                for (std::size_t i = 1; i < pl.points.size(); ++i)
                    segs.push_back({pl.points[i - 1], pl.points[i]});
            }
        std::vector<Point> verts;
        for (std::uint32_t r = 0; r < f.routers.size(); ++r)
            if (f.component[r] == c) verts.push_back(f.routers[r].pos);
        for (int gy = 0; gy < k; ++gy) {
            for (int gx = 0; gx < k; ++gx) {
                Point p{-g.half_side() + (gx + 0.5) * side / k,
                        -g.half_side() + (gy + 0.5) * side / k};
                double best = 1e300;
                for (const Point& v : verts) {
                    double dx = detail::torus_delta(v.x - p.x, side, g.torus());
                    double dy = detail::torus_delta(v.y - p.y, side, g.torus());
                    best = std::min(best, std::hypot(dx, dy));
                    if (best <= s) break;
                }
                if (best > s)
                    for (const auto& sg : segs) {
                        best = std::min(best, detail::point_segment_dist_torus(
                                                  p, sg.first, sg.second, side, g.torus()));
                        if (best <= s) break;
                    }
                if (best > s) return false;
            }
        }
        return true;
    };

    // A qualifying component requires every other component to have diameter
    // at most s, so at most one over-sized component can exist and it is then
    // the only candidate; with none over-sized, all components compete on the
    // coverage test and uniqueness must still hold.
    std::vector<std::uint32_t> large;
    for (std::uint32_t c : comps)
        if (diam_exceeds(comp_points(c), s)) large.push_back(c);
    std::uint32_t giant_comp = kNullCluster;
    if (large.size() > 1) return degen;
    if (large.size() == 1) {
        if (!covers(large[0])) return degen;
        giant_comp = large[0];
    } else {
        for (std::uint32_t c : comps) {
            if (!covers(c)) continue;
            if (giant_comp != kNullCluster) return degen;  // uniqueness fails
            giant_comp = c;
        }
        if (giant_comp == kNullCluster) return degen;
    }

    CutoffTree t;
    t.geom = &g;
    t.degenerate = false;
    t.lambda = f.lambda;
    t.routers = f.routers;
    for (std::uint32_t r = 0; r < f.routers.size(); ++r)
        if (f.component[r] == giant_comp) t.vertices.push_back(r);
    for (const CutoffEdge& e : f.forest_edges)
        if (f.component[e.r1] == giant_comp) t.edges.push_back(e);
    return t;
}

inline std::vector<std::uint32_t> CutoffTree::path_vertices(std::uint32_t a,
                                                            std::uint32_t b) const {
    if (degenerate) throw UsageError("path query on a degenerate tree");
    // BFS parents over the tree edges.
    std::vector<std::vector<std::pair<std::uint32_t, const CutoffEdge*>>> adj(routers.size());
    for (const CutoffEdge& e : edges) {
        adj[e.r1].push_back({e.r2, &e});
        adj[e.r2].push_back({e.r1, &e});
    }
    std::vector<std::int64_t> prev(routers.size(), -1);
    std::vector<std::uint32_t> q{a};
    prev[a] = a;
    for (std::size_t h = 0; h < q.size() && prev[b] < 0; ++h) {
        std::uint32_t u = q[h];
        for (auto& [v, e] : adj[u])
            if (prev[v] < 0) {
                prev[v] = u;
                q.push_back(v);
            }
    }
    if (prev[b] < 0) throw UsageError("routers are not connected in the tree");
    std::vector<std::uint32_t> path{b};
    for (std::uint32_t v = b; v != a; v = static_cast<std::uint32_t>(prev[v]))
        path.push_back(static_cast<std::uint32_t>(prev[v]));
    std::reverse(path.begin(), path.end());
    return path;
}

inline std::vector<const CutoffEdge*> CutoffTree::path_edges(std::uint32_t a,
                                                             std::uint32_t b) const {
    auto verts = path_vertices(a, b);
    std::vector<const CutoffEdge*> out;
    for (std::size_t i = 1; i < verts.size(); ++i) {
        for (const CutoffEdge& e : edges) {
            if ((e.r1 == verts[i - 1] && e.r2 == verts[i]) ||
                (e.r2 == verts[i - 1] && e.r1 == verts[i])) {
                out.push_back(&e);
                break;
            }
        }
    }
    return out;
}

inline PolylinePath CutoffTree::draw_path(const std::vector<std::uint32_t>& verts) const {
    PolylinePath p;
    const Geometry& g = *geom;
    double side = 2.0 * g.half_side();
    p.metric = g.torus() ? PathMetric::TorusFlat : PathMetric::Plane;
    p.period = g.torus() ? side : 0.0;
    if (verts.empty()) return p;
    Point cur = routers[verts[0]].pos;
    p.points.push_back(cur);
    for (std::size_t i = 1; i < verts.size(); ++i) {
        Point next = routers[verts[i]].pos;
        double dx = detail::torus_delta(next.x - cur.x, side, g.torus());
        double dy = detail::torus_delta(next.y - cur.y, side, g.torus());
        cur = {cur.x + dx, cur.y + dy};
        p.points.push_back(cur);
    }
    return p;
}

// Cut-off invasion trees on the steps-1-3 router multigraph.
struct InvasionTarget {
    enum class Kind : std::uint8_t { BoundaryBand = 0, PointBand = 1 };
    Kind kind = Kind::BoundaryBand;
    Point point;  // for PointBand

    static InvasionTarget boundary() { return {}; }
    static InvasionTarget around(Point p) { return {Kind::PointBand, p}; }
};

struct CutoffInvasionResult {
    CutoffTree tree;
    // Step indices at which a target router was first absorbed, under the
    // two stopping conventions for simultaneous lambda-batches; -1 if never.
    // The returned tree follows the complete-the-batch convention; the vertex
    // count at the immediate hit records the other one.
    std::int64_t hit_step_immediate = -1;
    std::int64_t hit_step_batch = -1;
    std::size_t vertices_at_immediate_hit = 0;
    std::vector<double> invaded_labels;
};

inline CutoffInvasionResult cutoff_invasion(const CutoffForest& f, Point origin,
                                            const InvasionTarget& target, double s) {
    const Geometry& g = *f.geom;
    double side = 2.0 * g.half_side();
    CutoffInvasionResult res;
    res.tree.geom = &g;
    res.tree.lambda = f.lambda;
    res.tree.degenerate = true;
    res.tree.center = {0.0, 0.0};

    CutoffTree gi = giant(f, s);
    if (gi.degenerate) return res;  // degenerate invasion tree

    auto torus_dist = [&](Point a, Point b) {
        double dx = detail::torus_delta(a.x - b.x, side, g.torus());
        double dy = detail::torus_delta(a.y - b.y, side, g.torus());
        return std::hypot(dx, dy);
    };
    auto boundary_dist = [&](Point p) {
        // Distance to the identified boundary of [-M, M)^2 (the torus seam).
        double m = g.half_side();
        double dx = std::abs(detail::torus_delta(p.x + m, side, true));
        double dy = std::abs(detail::torus_delta(p.y + m, side, true));
        return std::min(dx, dy);
    };

    // Origin router: closest to the origin point, ties by representative site.
    std::uint32_t origin_router = kNullCluster;
    double best = 1e300;
    for (std::uint32_t v : gi.vertices) {
        double d = torus_dist(f.routers[v].pos, origin);
        if (d < best - 1e-15 ||
            (std::abs(d - best) <= 1e-15 &&
             (origin_router == kNullCluster || f.routers[v].site < f.routers[origin_router].site))) {
            best = d;
            origin_router = v;
        }
    }

    std::vector<std::uint8_t> is_target(f.routers.size(), 0);
    bool any_target = false;
    for (std::uint32_t v : gi.vertices) {
        double d = target.kind == InvasionTarget::Kind::BoundaryBand
                       ? boundary_dist(f.routers[v].pos)
                       : torus_dist(f.routers[v].pos, target.point);
        if (d <= s) {
            is_target[v] = 1;
            any_target = true;
        }
    }

    res.tree.degenerate = false;
    res.tree.routers = f.routers;
    res.tree.vertices.push_back(origin_router);
    if (!any_target || is_target[origin_router]) {
        if (is_target[origin_router]) {
            res.hit_step_immediate = 0;
            res.hit_step_batch = 0;
        }
        return res;  // just the origin router
    }

    // Invasion on the multigraph restricted to the giant component. All
    // frontier edges labeled exactly lambda are absorbed in one step; switch
    // edges of one event share a time and are likewise absorbed together.
    std::vector<std::uint8_t> in_giant(f.routers.size(), 0);
    for (std::uint32_t v : gi.vertices) in_giant[v] = 1;
    std::vector<std::uint8_t> invaded(f.routers.size(), 0);
    invaded[origin_router] = 1;

    std::vector<std::vector<const CutoffEdge*>> adj(f.routers.size());
    for (const CutoffEdge& e : f.graph_edges) {
        if (e.loop() || !in_giant[e.r1] || !in_giant[e.r2]) continue;
        adj[e.r1].push_back(&e);
        adj[e.r2].push_back(&e);
    }
    std::vector<const CutoffEdge*> frontier = adj[origin_router];

    std::int64_t step = 0;
    bool stop_after_batch = false;
    while (!stop_after_batch && !frontier.empty()) {
        // Drop edges that became internal.
        frontier.erase(std::remove_if(frontier.begin(), frontier.end(),
                                      [&](const CutoffEdge* e) {
                                          return invaded[e->r1] && invaded[e->r2];
                                      }),
                       frontier.end());
        if (frontier.empty()) break;
        bool has_lambda = false;
        double min_t = 1e300;
        for (const CutoffEdge* e : frontier) {
            if (e->is_lambda) has_lambda = true;
            else min_t = std::min(min_t, e->label);
        }
        ++step;
        std::vector<std::uint32_t> fresh_vertices;
        for (const CutoffEdge* e : frontier) {
            if (!(has_lambda ? e->is_lambda : (e->label == min_t))) continue;
            std::uint32_t fresh = invaded[e->r1] ? e->r2 : e->r1;
            if (invaded[fresh]) continue;  // another batch edge reached it first
            invaded[fresh] = 1;
            fresh_vertices.push_back(fresh);
            res.tree.vertices.push_back(fresh);
            res.tree.edges.push_back(*e);
            res.invaded_labels.push_back(e->label);
            if (is_target[fresh]) {
                if (res.hit_step_immediate < 0) {
                    res.hit_step_immediate = step;
                    res.vertices_at_immediate_hit = res.tree.vertices.size();
                }
                stop_after_batch = true;
            }
        }
        for (std::uint32_t v : fresh_vertices)
            for (const CutoffEdge* e : adj[v])
                if (!invaded[e->r1] || !invaded[e->r2]) frontier.push_back(e);
        if (stop_after_batch) res.hit_step_batch = step;
    }
    return res;
}

}  // namespace nearcrit

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "nearcrit/forest.hpp"
#include "nearcrit/pivnet.hpp"

namespace nearcrit {

// Comparison machinery for immersed trees: discrete Frechet distance for
// paths, certified lower/upper bounds for trees with more leaves, and a
// truncated forest metric over matched leaf tuples.

namespace detail {

inline double point_dist(Point a, Point b, PathMetric m, double period) {
    switch (m) {
        case PathMetric::Plane:
            return std::hypot(a.x - b.x, a.y - b.y);
        case PathMetric::TorusFlat: {
            double dx = torus_delta(a.x - b.x, period, true);
            double dy = torus_delta(a.y - b.y, period, true);
            return std::hypot(dx, dy);
        }
        case PathMetric::CompactifiedPlane: {
            // Chordal distance on the sphere via stereographic projection.
            double na = 1.0 + a.x * a.x + a.y * a.y;
            double nb = 1.0 + b.x * b.x + b.y * b.y;
            return 2.0 * std::hypot(a.x - b.x, a.y - b.y) / std::sqrt(na * nb);
        }
    }
    return 0.0;
}

}  // namespace detail

// Discrete Frechet distance between two polylines (dynamic programming over
// monotone vertex couplings). Symmetric by construction: every DP value is a
// max/min selection from the same pairwise distance set.
inline double frechet(const PolylinePath& p1, const PolylinePath& p2) {
    if (p1.metric != p2.metric)
        throw UsageError("frechet: metric tags differ");
    if (p1.metric == PathMetric::TorusFlat && p1.period != p2.period)
        throw UsageError("frechet: torus periods differ");
    if (p1.points.empty() || p2.points.empty())
        throw UsageError("frechet: empty path");
    const auto& a = p1.points;
    const auto& b = p2.points;
    const std::size_t n = a.size(), m = b.size();
    std::vector<double> prev(m), cur(m);
    for (std::size_t j = 0; j < m; ++j) {
        double d = detail::point_dist(a[0], b[j], p1.metric, p1.period);
        prev[j] = j == 0 ? d : std::max(prev[j - 1], d);
    }
    for (std::size_t i = 1; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            double d = detail::point_dist(a[i], b[j], p1.metric, p1.period);
            double reach;
            if (j == 0) reach = prev[0];
            else reach = std::min({prev[j], prev[j - 1], cur[j - 1]});
            cur[j] = std::max(reach, d);
        }
        std::swap(prev, cur);
    }
    return prev[m - 1];
}

// Insert intermediate points so consecutive polyline points are at most
// max_step apart (in the unwrapped coordinates).
inline PolylinePath densify(const PolylinePath& p, double max_step) {
    PolylinePath out;
    out.metric = p.metric;
    out.period = p.period;
    if (p.points.empty()) return out;
    out.points.push_back(p.points[0]);
    for (std::size_t i = 1; i < p.points.size(); ++i) {
        Point a = p.points[i - 1], b = p.points[i];
        double len = std::hypot(b.x - a.x, b.y - a.y);
        int pieces = std::max(1, static_cast<int>(std::ceil(len / max_step)));
        for (int k = 1; k <= pieces; ++k) {
            double t = static_cast<double>(k) / pieces;
            out.points.push_back({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)});
        }
    }
    return out;
}

// Reference-tree shape: leaves 0..leaf_count-1 in tuple order, internal
// vertices after them; `code` is a canonical serialization used for the
// matched-shape equality check.
struct TreeShape {
    int leaf_count = 0;
    int vertex_count = 0;
    std::vector<std::pair<int, int>> edges;
    std::string code;

    friend bool operator==(const TreeShape& a, const TreeShape& b) {
        return a.code == b.code;
    }
};

struct ImmersedTree {
    TreeShape shape;
    std::vector<PolylinePath> edge_paths;  // parallel to shape.edges
    std::vector<Point> leaf_positions;     // tuple order
};

namespace detail {

// Canonical serialization of a rooted shape: root at leaf 0, children ordered
// by the minimal leaf index in their subtree.
inline std::string shape_code(int leaf_count, int vertex_count,
                              const std::vector<std::pair<int, int>>& edges) {
    std::string out = std::to_string(leaf_count) + ":";
    std::vector<std::vector<int>> adj(vertex_count);
    for (auto [u, v] : edges) {
        adj[u].push_back(v);
        adj[v].push_back(u);
    }
    std::vector<int> min_leaf(vertex_count, 1 << 30);
    auto min_pass = [&](auto&& self, int v, int parent) -> int {
        int best = v < leaf_count ? v : (1 << 30);
        for (int w : adj[v])
            if (w != parent) best = std::min(best, self(self, w, v));
        min_leaf[v] = best;
        return best;
    };
    auto emit = [&](auto&& self, int v, int parent) -> void {
        out += v < leaf_count ? "L" + std::to_string(v) : "I";
        out += "(";
        std::vector<int> kids;
        for (int w : adj[v])
            if (w != parent) kids.push_back(w);
        std::sort(kids.begin(), kids.end(),
                  [&](int a, int b) { return min_leaf[a] < min_leaf[b]; });
        for (int w : kids) self(self, w, v);
        out += ")";
    };
    if (vertex_count > 0) {
        min_pass(min_pass, 0, -1);
        emit(emit, 0, -1);
    }
    return out;
}

}  // namespace detail

// (lower, upper) distance bounds between two immersed trees of identical
// shape and leaf correspondence. The lower bound is the Hausdorff distance
// between the images; the upper bound is the maximum per-reference-edge
// Frechet distance, which dominates any global reparametrization family.
struct TreeDistBounds {
    double lower = 0.0;
    double upper = 0.0;
};

inline double hausdorff_points(const std::vector<Point>& a, const std::vector<Point>& b,
                               PathMetric m, double period) {
    auto directed = [&](const std::vector<Point>& s, const std::vector<Point>& t) {
        double worst = 0.0;
        for (const Point& p : s) {
            double best = 1e300;
            for (const Point& q : t) {
                best = std::min(best, detail::point_dist(p, q, m, period));
                if (best <= worst) break;
            }
            worst = std::max(worst, best);
        }
        return worst;
    };
    return std::max(directed(a, b), directed(b, a));
}

inline TreeDistBounds tree_dist(const ImmersedTree& t1, const ImmersedTree& t2) {
    if (!(t1.shape == t2.shape))
        throw UsageError("tree_dist: reference shapes differ");
    if (t1.edge_paths.size() != t2.edge_paths.size())
        throw UsageError("tree_dist: edge decomposition mismatch");
    TreeDistBounds b;
    std::vector<Point> img1, img2;
    PathMetric m = PathMetric::Plane;
    double period = 0.0;
    if (!t1.edge_paths.empty()) {
        m = t1.edge_paths[0].metric;
        period = t1.edge_paths[0].period;
    }
    for (std::size_t i = 0; i < t1.edge_paths.size(); ++i) {
        b.upper = std::max(b.upper, frechet(t1.edge_paths[i], t2.edge_paths[i]));
        img1.insert(img1.end(), t1.edge_paths[i].points.begin(), t1.edge_paths[i].points.end());
        img2.insert(img2.end(), t2.edge_paths[i].points.begin(), t2.edge_paths[i].points.end());
    }
    if (t1.edge_paths.empty()) {
        img1 = t1.leaf_positions;
        img2 = t2.leaf_positions;
        for (std::size_t i = 0; i < img1.size(); ++i)
            b.upper = std::max(b.upper, detail::point_dist(img1[i], img2[i], m, period));
    }
    b.lower = hausdorff_points(img1, img2, m, period);
    // Guard against float noise in the sampled Hausdorff.
    b.lower = std::min(b.lower, b.upper);
    return b;
}

// Graded sample of immersed trees extracted from a spanning tree (or cut-off
// tree) at given leaf tuples.
struct ForestSample {
    int ell_max = 0;
    PathMetric metric = PathMetric::Plane;
    double period = 0.0;
    std::vector<Point> leaf_points;                       // the ell = 1 layer
    std::vector<std::vector<ImmersedTree>> trees_by_ell;  // index ell-2
    std::vector<std::vector<int>> tuple_sizes;            // bookkeeping for protocol checks
};

namespace detail {

// Steiner subtree of pairwise tree paths, decomposed into reference shape and
// per-edge polylines. VertexKey identifies tree vertices, PathFn yields the
// vertex sequence between two of them, PosFn the embedding position.
template <typename PathFn, typename PosFn>
ImmersedTree build_immersed(const std::vector<std::uint64_t>& leaves, PathFn&& path_between,
                            PosFn&& position, PathMetric metric, double period) {
    ImmersedTree t;
    const int ell = static_cast<int>(leaves.size());
    t.shape.leaf_count = ell;
    for (std::uint64_t v : leaves) t.leaf_positions.push_back(position(v));

    if (ell == 1) {
        t.shape.vertex_count = 1;
        t.shape.code = detail::shape_code(1, 1, {});
        return t;
    }

    // Union of pairwise paths as an adjacency map over tree vertices.
    std::map<std::uint64_t, std::set<std::uint64_t>> adj;
    for (std::size_t i = 0; i < leaves.size(); ++i) {
        for (std::size_t j = i + 1; j < leaves.size(); ++j) {
            std::vector<std::uint64_t> seq = path_between(leaves[i], leaves[j]);
            for (std::size_t k = 1; k < seq.size(); ++k) {
                adj[seq[k - 1]].insert(seq[k]);
                adj[seq[k]].insert(seq[k - 1]);
            }
            adj[seq[0]];  // ensure singleton paths register the vertex
        }
    }

    // Reference vertices: leaves and branch vertices (degree >= 3).
    std::map<std::uint64_t, int> ref_id;
    int next_id = 0;
    for (std::uint64_t v : leaves)
        if (!ref_id.count(v)) ref_id[v] = next_id++;
    // Duplicate leaves collapse onto one reference vertex; keep tuple order
    // for positions but identify them in the shape.
    std::vector<std::uint64_t> internals;
    for (auto& [v, nb] : adj)
        if (!ref_id.count(v) && nb.size() >= 3) internals.push_back(v);
    std::sort(internals.begin(), internals.end());
    for (std::uint64_t v : internals) ref_id[v] = next_id++;
    t.shape.vertex_count = next_id;

    // Walk from each reference vertex through degree-2 chains.
    std::set<std::pair<std::uint64_t, std::uint64_t>> used;
    for (auto& [start, nbrs] : adj) {
        if (!ref_id.count(start)) continue;
        for (std::uint64_t first : nbrs) {
            if (used.count({start, first})) continue;
            std::vector<std::uint64_t> walk{start};
            std::uint64_t prev = start, cur = first;
            used.insert({start, first});
            while (true) {
                walk.push_back(cur);
                if (ref_id.count(cur)) break;
                const auto& nb = adj[cur];
                std::uint64_t nxt = 0;
                for (std::uint64_t w : nb)
                    if (w != prev) { nxt = w; break; }
                used.insert({cur, nxt});
                prev = cur;
                cur = nxt;
            }
            used.insert({walk[walk.size() - 1], walk[walk.size() - 2]});
            int u = ref_id[start], v = ref_id[walk.back()];
            // Orient each reference edge from the smaller id so matched trees
            // decompose identically.
            if (u > v) {
                std::reverse(walk.begin(), walk.end());
                std::swap(u, v);
            }
            PolylinePath pl;
            pl.metric = metric;
            pl.period = period;
            Point p0 = position(walk[0]);
            pl.points.push_back(p0);
            for (std::size_t k = 1; k < walk.size(); ++k) {
                Point a = position(walk[k - 1]), b = position(walk[k]);
                double dx = torus_delta(b.x - a.x, period, period > 0);
                double dy = torus_delta(b.y - a.y, period, period > 0);
                p0 = {p0.x + dx, p0.y + dy};
                pl.points.push_back(p0);
            }
            t.shape.edges.push_back({u, v});
            t.edge_paths.push_back(std::move(pl));
        }
    }
    // Canonical edge order for matched comparison.
    std::vector<std::size_t> order(t.shape.edges.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return t.shape.edges[a] < t.shape.edges[b];
    });
    std::vector<std::pair<int, int>> edges;
    std::vector<PolylinePath> paths;
    for (std::size_t i : order) {
        edges.push_back(t.shape.edges[i]);
        paths.push_back(std::move(t.edge_paths[i]));
    }
    t.shape.edges = std::move(edges);
    t.edge_paths = std::move(paths);
    t.shape.code = detail::shape_code(t.shape.leaf_count, t.shape.vertex_count, t.shape.edges);
    return t;
}

}  // namespace detail

// Extraction from a spanning tree: leaves snap to the nearest lattice site.
inline ForestSample extract_sample(const SpanningTree& tree,
                                   const std::vector<std::vector<Point>>& leaf_tuples,
                                   int ell_max) {
    if (ell_max < 2) throw UsageError("extract_sample requires ell_max >= 2");
    const Geometry& g = tree.geometry();
    double side = 2.0 * g.half_side();
    auto snap = [&](Point p) -> std::uint64_t {
        double eta = g.eta();
        auto wrap = [&](double v) {
            double u = (v + g.half_side()) / eta;
            auto k = static_cast<std::int64_t>(std::llround(u));
            std::int64_t s = g.side();
            if (g.torus()) { k %= s; if (k < 0) k += s; }
            else k = std::clamp<std::int64_t>(k, 0, s - 1);
            return static_cast<std::uint32_t>(k);
        };
        return g.site_at(wrap(p.x), wrap(p.y));
    };

    ForestSample fs;
    fs.ell_max = ell_max;
    fs.trees_by_ell.resize(ell_max - 1);
    fs.tuple_sizes.resize(ell_max - 1);
    PathMetric metric = g.torus() ? PathMetric::TorusFlat : PathMetric::Plane;
    double period = g.torus() ? side : 0.0;
    fs.metric = metric;
    fs.period = period;
    for (const auto& tuple : leaf_tuples) {
        if (static_cast<int>(tuple.size()) < 2 || static_cast<int>(tuple.size()) > ell_max)
            throw UsageError("leaf tuple size out of range");
        std::vector<std::uint64_t> leaves;
        for (Point p : tuple) {
            std::uint64_t v = snap(p);
            leaves.push_back(v);
            fs.leaf_points.push_back(g.position(static_cast<SiteId>(v)));
        }
        auto path_fn = [&](std::uint64_t a, std::uint64_t b) {
            auto sites = tree.path_sites(static_cast<SiteId>(a), static_cast<SiteId>(b));
            return std::vector<std::uint64_t>(sites.begin(), sites.end());
        };
        auto pos_fn = [&](std::uint64_t v) { return g.position(static_cast<SiteId>(v)); };
        int ell = static_cast<int>(tuple.size());
        fs.trees_by_ell[ell - 2].push_back(
            detail::build_immersed(leaves, path_fn, pos_fn, metric, period));
        fs.tuple_sizes[ell - 2].push_back(ell);
    }
    return fs;
}

// Extraction from a cut-off tree: leaves snap to the nearest router; a
// degenerate tree yields single-point trees at the domain center. Polylines
// are densified to the lattice mesh so Hausdorff bounds are comparable with
// spanning-tree paths.
inline ForestSample extract_sample(const CutoffTree& tree,
                                   const std::vector<std::vector<Point>>& leaf_tuples,
                                   int ell_max) {
    if (ell_max < 2) throw UsageError("extract_sample requires ell_max >= 2");
    const Geometry& g = *tree.geom;
    double side = 2.0 * g.half_side();
    ForestSample fs;
    fs.ell_max = ell_max;
    fs.trees_by_ell.resize(ell_max - 1);
    fs.tuple_sizes.resize(ell_max - 1);
    PathMetric metric = g.torus() ? PathMetric::TorusFlat : PathMetric::Plane;
    double period = g.torus() ? side : 0.0;
    fs.metric = metric;
    fs.period = period;

    for (const auto& tuple : leaf_tuples) {
        if (static_cast<int>(tuple.size()) < 2 || static_cast<int>(tuple.size()) > ell_max)
            throw UsageError("leaf tuple size out of range");
        int ell = static_cast<int>(tuple.size());
        if (tree.degenerate) {
            ImmersedTree t;
            t.shape.leaf_count = ell;
            t.shape.vertex_count = 1;
            t.shape.code = detail::shape_code(ell, 1, {});
            for (int i = 0; i < ell; ++i) {
                t.leaf_positions.push_back(tree.center);
                fs.leaf_points.push_back(tree.center);
            }
            fs.trees_by_ell[ell - 2].push_back(std::move(t));
            fs.tuple_sizes[ell - 2].push_back(ell);
            continue;
        }
        std::vector<std::uint64_t> leaves;
        for (Point p : tuple) {
            std::uint32_t v = tree.nearest_vertex(p);
            leaves.push_back(v);
            fs.leaf_points.push_back(tree.routers[v].pos);
        }
        auto path_fn = [&](std::uint64_t a, std::uint64_t b) {
            auto verts = tree.path_vertices(static_cast<std::uint32_t>(a),
                                            static_cast<std::uint32_t>(b));
            return std::vector<std::uint64_t>(verts.begin(), verts.end());
        };
        auto pos_fn = [&](std::uint64_t v) {
            return tree.routers[static_cast<std::uint32_t>(v)].pos;
        };
        ImmersedTree t = detail::build_immersed(leaves, path_fn, pos_fn, metric, period);
        for (auto& pl : t.edge_paths) pl = densify(pl, g.eta());
        fs.trees_by_ell[ell - 2].push_back(std::move(t));
        fs.tuple_sizes[ell - 2].push_back(ell);
    }
    return fs;
}

struct OmegaDistance {
    double lower = 0.0;
    double upper = 0.0;
    int shape_mismatches = 0;  // matched tuples skipped due to shape difference
};

// Truncated forest distance: sum over ell of 2^-ell times the matched-tuple
// maximum of the tree distance (upper bounds summed separately from lower
// bounds); the ell = 1 term is the Hausdorff distance between leaf sets.
inline OmegaDistance d_omega_truncated(const ForestSample& f1, const ForestSample& f2) {
    if (f1.ell_max != f2.ell_max)
        throw UsageError("d_omega_truncated: truncation depths differ");
    for (std::size_t k = 0; k < f1.trees_by_ell.size(); ++k)
        if (f1.trees_by_ell[k].size() != f2.trees_by_ell[k].size())
            throw UsageError("d_omega_truncated: tuple counts differ (unmatched protocol)");

    OmegaDistance out;
    PathMetric metric = f1.metric;
    double period = f1.period;
    double l1 = f1.leaf_points.empty() && f2.leaf_points.empty()
                    ? 0.0
                    : hausdorff_points(f1.leaf_points, f2.leaf_points, metric, period);
    out.lower += 0.5 * l1;
    out.upper += 0.5 * l1;

    for (std::size_t k = 0; k < f1.trees_by_ell.size(); ++k) {
        double weight = std::ldexp(1.0, -(static_cast<int>(k) + 2));  // 2^-(ell)
        double worst_lower = 0.0, worst_upper = 0.0;
        for (std::size_t i = 0; i < f1.trees_by_ell[k].size(); ++i) {
            const ImmersedTree& a = f1.trees_by_ell[k][i];
            const ImmersedTree& b = f2.trees_by_ell[k][i];
            if (!(a.shape == b.shape)) {
                ++out.shape_mismatches;
                continue;
            }
            TreeDistBounds d = tree_dist(a, b);
            worst_lower = std::max(worst_lower, d.lower);
            worst_upper = std::max(worst_upper, d.upper);
        }
        out.lower += weight * worst_lower;
        out.upper += weight * worst_upper;
    }
    return out;
}

}  // namespace nearcrit

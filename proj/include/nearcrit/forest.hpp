#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <optional>
#include <queue>
#include <vector>

#include "nearcrit/ensemble.hpp"
#include "nearcrit/geometry.hpp"

namespace nearcrit {

enum class PathMetric : std::uint8_t {
    TorusFlat = 0,
    Plane = 1,
    CompactifiedPlane = 2,
};

// Piecewise-linear path in the embedding. On a torus the stored points are
// unwrapped along the path (each segment is the minimal representative of its
// step), so the polyline is a homotopy-faithful lift; `period` carries the
// torus side for distance computations.
struct PolylinePath {
    std::vector<Point> points;
    PathMetric metric = PathMetric::Plane;
    double period = 0.0;  // torus side (2M) when metric == TorusFlat
};

struct StopRule {
    enum class Kind : std::uint8_t { FullSpanning = 0, Boundary = 1, Target = 2 };
    Kind kind = Kind::FullSpanning;
    SiteId target = kNullSite;

    static StopRule full_spanning() { return {}; }
    static StopRule boundary() { return {Kind::Boundary, kNullSite}; }
    static StopRule target_site(SiteId s) { return {Kind::Target, s}; }
};

// Spanning tree (or forest, on disconnected inputs) with a rooted parent map
// for O(path length) queries.
class SpanningTree {
public:
    SpanningTree(const Geometry& g, std::vector<EdgeId> edges,
                 std::vector<double> accept_labels)
        : geom_(&g), edges_(std::move(edges)), accept_labels_(std::move(accept_labels)) {
        build_structure();
    }

    const Geometry& geometry() const { return *geom_; }
    const std::vector<EdgeId>& edges() const { return edges_; }
    const std::vector<double>& accept_labels() const { return accept_labels_; }
    std::size_t component_count() const { return component_count_; }
    bool forest_warning() const { return component_count_ > 1; }

    SiteId parent(SiteId s) const { return parent_[s]; }
    std::uint32_t depth(SiteId s) const { return depth_[s]; }
    std::uint32_t component(SiteId s) const { return comp_[s]; }

    // Tree neighbors of a site.
    std::pair<const SiteId*, const SiteId*> tree_neighbors(SiteId s) const {
        return {adj_.data() + adj_start_[s], adj_.data() + adj_start_[s + 1]};
    }
    int tree_degree(SiteId s) const {
        return static_cast<int>(adj_start_[s + 1] - adj_start_[s]);
    }

    // Site sequence of the unique simple path between x and y.
    std::vector<SiteId> path_sites(SiteId x, SiteId y) const {
        geom_->check_site(x);
        geom_->check_site(y);
        if (comp_[x] != comp_[y])
            throw UsageError("tree_path endpoints lie in different components");
        std::vector<SiteId> up_x{x}, up_y{y};
        SiteId a = x, b = y;
        while (depth_[a] > depth_[b]) { a = parent_[a]; up_x.push_back(a); }
        while (depth_[b] > depth_[a]) { b = parent_[b]; up_y.push_back(b); }
        while (a != b) {
            a = parent_[a]; up_x.push_back(a);
            b = parent_[b]; up_y.push_back(b);
        }
        up_x.insert(up_x.end(), up_y.rbegin() + 1, up_y.rend());
        return up_x;
    }

private:
    void build_structure() {
        std::size_t n = geom_->site_count();
        std::vector<std::uint32_t> deg(n + 1, 0);
        for (EdgeId e : edges_) {
            ++deg[geom_->edge_base(e)];
            ++deg[geom_->edge_other(e)];
        }
        adj_start_.assign(n + 1, 0);
        for (std::size_t i = 0; i < n; ++i) adj_start_[i + 1] = adj_start_[i] + deg[i];
        adj_.resize(adj_start_[n]);
        std::vector<std::uint32_t> fill(adj_start_.begin(), adj_start_.end() - 1);
        for (EdgeId e : edges_) {
            SiteId u = geom_->edge_base(e), v = geom_->edge_other(e);
            adj_[fill[u]++] = v;
            adj_[fill[v]++] = u;
        }
        parent_.assign(n, kNullSite);
        depth_.assign(n, 0);
        comp_.assign(n, kNullCluster);
        component_count_ = 0;
        std::vector<SiteId> queue;
        for (SiteId root = 0; root < n; ++root) {
            if (comp_[root] != kNullCluster) continue;
            auto c = static_cast<std::uint32_t>(component_count_++);
            comp_[root] = c;
            queue.clear();
            queue.push_back(root);
            for (std::size_t h = 0; h < queue.size(); ++h) {
                SiteId s = queue[h];
                for (std::uint32_t k = adj_start_[s]; k < adj_start_[s + 1]; ++k) {
                    SiteId t = adj_[k];
                    if (comp_[t] != kNullCluster) continue;
                    comp_[t] = c;
                    parent_[t] = s;
                    depth_[t] = depth_[s] + 1;
                    queue.push_back(t);
                }
            }
        }
    }

    const Geometry* geom_;
    std::vector<EdgeId> edges_;
    std::vector<double> accept_labels_;
    std::vector<SiteId> parent_;
    std::vector<std::uint32_t> depth_;
    std::vector<std::uint32_t> comp_;
    std::vector<std::uint32_t> adj_start_;
    std::vector<SiteId> adj_;
    std::size_t component_count_ = 0;
};

namespace detail {

class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n), rank_(n, 0) {
        for (std::size_t i = 0; i < n; ++i) parent_[i] = static_cast<std::uint32_t>(i);
    }
    std::uint32_t find(std::uint32_t x) {
        std::uint32_t root = x;
        while (parent_[root] != root) root = parent_[root];
        while (parent_[x] != root) {
            std::uint32_t next = parent_[x];
            parent_[x] = root;
            x = next;
        }
        return root;
    }
    bool unite(std::uint32_t a, std::uint32_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        if (rank_[a] < rank_[b]) std::swap(a, b);
        parent_[b] = a;
        if (rank_[a] == rank_[b]) ++rank_[a];
        return true;
    }

private:
    std::vector<std::uint32_t> parent_;
    std::vector<std::uint8_t> rank_;
};

inline std::uint64_t double_bits(double v) {
    std::uint64_t b;
    std::memcpy(&b, &v, sizeof b);
    return b;  // monotone for non-negative doubles
}

// Edge sort key: scalar label on the edge-labeled lattice, otherwise the hi
// component; ties in hi (edges sharing their max endpoint) are broken by lo
// in a second pass over the short equal runs.
struct EdgeItem {
    std::uint64_t key;
    EdgeId edge;
};

inline void sort_edges_by_label(const Geometry& g, const LabelField& labels,
                                std::vector<EdgeItem>& items) {
    std::sort(items.begin(), items.end(),
              [](const EdgeItem& a, const EdgeItem& b) { return a.key < b.key; });
    if (!labels.site_carriers()) return;
    auto lo_of = [&](EdgeId e) {
        return std::min(labels.site_label(g.edge_base(e)), labels.site_label(g.edge_other(e)));
    };
    std::size_t i = 0;
    while (i < items.size()) {
        std::size_t j = i + 1;
        while (j < items.size() && items[j].key == items[i].key) ++j;
        if (j - i > 1)
            std::sort(items.begin() + i, items.begin() + j,
                      [&](const EdgeItem& a, const EdgeItem& b) {
                          return lo_of(a.edge) < lo_of(b.edge);
                      });
        i = j;
    }
}

inline std::uint64_t edge_sort_key(const Geometry& g, const LabelField& labels, EdgeId e) {
    if (labels.site_carriers()) {
        double hi = std::max(labels.site_label(g.edge_base(e)),
                             labels.site_label(g.edge_other(e)));
        return double_bits(hi);
    }
    return double_bits(labels.edge_label(e));
}

inline double edge_accept_label(const Geometry& g, const LabelField& labels, EdgeId e) {
    if (labels.site_carriers())
        return std::max(labels.site_label(g.edge_base(e)), labels.site_label(g.edge_other(e)));
    return labels.edge_label(e);
}

// Lexicographic comparison of full edge labels (hi, lo) or scalars.
inline bool edge_label_less(const Geometry& g, const LabelField& labels, EdgeId a, EdgeId b) {
    if (!labels.site_carriers()) return labels.edge_label(a) < labels.edge_label(b);
    double ha = std::max(labels.site_label(g.edge_base(a)), labels.site_label(g.edge_other(a)));
    double hb = std::max(labels.site_label(g.edge_base(b)), labels.site_label(g.edge_other(b)));
    if (ha != hb) return ha < hb;
    double la = std::min(labels.site_label(g.edge_base(a)), labels.site_label(g.edge_other(a)));
    double lb = std::min(labels.site_label(g.edge_base(b)), labels.site_label(g.edge_other(b)));
    return la < lb;
}

}  // namespace detail

// Ascending Kruskal under the strict total label order; equivalent to deleting
// the highest-label edge from every cycle. Depends only on the label ordering.
inline SpanningTree mst_kruskal(const Geometry& g, const LabelField& labels) {
    std::vector<detail::EdgeItem> items;
    items.reserve(g.max_edge_id());
    for (EdgeId e = 0; e < g.max_edge_id(); ++e)
        if (g.edge_exists(e)) items.push_back({detail::edge_sort_key(g, labels, e), e});
    detail::sort_edges_by_label(g, labels, items);
    detail::UnionFind uf(g.site_count());
    std::vector<EdgeId> tree;
    std::vector<double> accept;
    tree.reserve(g.site_count() - 1);
    accept.reserve(g.site_count() - 1);
    for (const auto& it : items) {
        SiteId u = g.edge_base(it.edge), v = g.edge_other(it.edge);
        if (uf.unite(u, v)) {
            tree.push_back(it.edge);
            accept.push_back(detail::edge_accept_label(g, labels, it.edge));
        }
    }
    return SpanningTree(g, std::move(tree), std::move(accept));
}

// Kruskal restricted to the subgraph induced by `sites`; the remaining sites
// stay as isolated components. Used by small-instance oracles.
inline SpanningTree mst_kruskal(const Geometry& g, const LabelField& labels,
                                const std::vector<SiteId>& sites) {
    std::vector<std::uint8_t> in(g.site_count(), 0);
    for (SiteId s : sites) in[s] = 1;
    std::vector<detail::EdgeItem> items;
    for (EdgeId e = 0; e < g.max_edge_id(); ++e) {
        if (!g.edge_exists(e)) continue;
        if (!in[g.edge_base(e)] || !in[g.edge_other(e)]) continue;
        items.push_back({detail::edge_sort_key(g, labels, e), e});
    }
    detail::sort_edges_by_label(g, labels, items);
    detail::UnionFind uf(g.site_count());
    std::vector<EdgeId> tree;
    std::vector<double> accept;
    for (const auto& it : items) {
        if (uf.unite(g.edge_base(it.edge), g.edge_other(it.edge))) {
            tree.push_back(it.edge);
            accept.push_back(detail::edge_accept_label(g, labels, it.edge));
        }
    }
    return SpanningTree(g, std::move(tree), std::move(accept));
}

struct InvasionResult {
    SpanningTree tree;
    std::vector<double> trace;  // accepted label values (hi on vertex-labeled)
    bool reached_stop = false;
};

// Greedy frontier-minimum growth from `start`: repeatedly absorb the boundary
// edge with the smallest label. Binary min-heap with lazy deletion.
inline InvasionResult invade(const Geometry& g, const LabelField& labels, SiteId start,
                             const StopRule& stop) {
    g.check_site(start);
    if (stop.kind == StopRule::Kind::Boundary && g.torus())
        throw UsageError("boundary stop rule requires a box domain");
    if (stop.kind == StopRule::Kind::Target) g.check_site(stop.target);

    struct HeapEntry {
        std::uint64_t key;
        double lo;  // lexicographic tiebreak (0 on edge-labeled lattices)
        EdgeId edge;
        bool operator>(const HeapEntry& o) const {
            if (key != o.key) return key > o.key;
            return lo > o.lo;
        }
    };
    std::priority_queue<HeapEntry, std::vector<HeapEntry>, std::greater<>> heap;
    std::vector<std::uint8_t> in_tree(g.site_count(), 0);

    auto push_site_edges = [&](SiteId s) {
        for (int dir = 0; dir < g.degree(); ++dir) {
            SiteId t = g.neighbor(s, dir);
            if (t == kNullSite || in_tree[t]) continue;
            EdgeId e = g.edge_between(s, t);
            double lo = labels.site_carriers()
                            ? std::min(labels.site_label(s), labels.site_label(t))
                            : 0.0;
            heap.push({detail::edge_sort_key(g, labels, e), lo, e});
        }
    };

    std::vector<EdgeId> tree_edges;
    std::vector<double> trace;
    in_tree[start] = 1;
    push_site_edges(start);
    bool reached = stop.kind == StopRule::Kind::Target && start == stop.target;
    auto on_boundary = [&](SiteId s) {
        std::uint32_t i = g.col(s), j = g.row(s);
        return i == 0 || j == 0 || i + 1 == g.side() || j + 1 == g.side();
    };
    if (stop.kind == StopRule::Kind::Boundary && on_boundary(start)) reached = true;

    while (!reached && !heap.empty()) {
        HeapEntry top = heap.top();
        heap.pop();
        SiteId u = g.edge_base(top.edge), v = g.edge_other(top.edge);
        SiteId fresh = kNullSite;
        if (in_tree[u] && !in_tree[v]) fresh = v;
        else if (in_tree[v] && !in_tree[u]) fresh = u;
        else continue;  // lazily dropped: edge became internal
        in_tree[fresh] = 1;
        tree_edges.push_back(top.edge);
        trace.push_back(detail::edge_accept_label(g, labels, top.edge));
        if (stop.kind == StopRule::Kind::Target && fresh == stop.target) { reached = true; break; }
        if (stop.kind == StopRule::Kind::Boundary && on_boundary(fresh)) { reached = true; break; }
        push_site_edges(fresh);
    }

    if (stop.kind == StopRule::Kind::Target && !reached)
        throw IntegrityError("invasion exhausted its component without reaching the target");

    InvasionResult r{SpanningTree(g, std::move(tree_edges), std::move(trace)), {}, reached};
    r.trace = r.tree.accept_labels();
    return r;
}

// Unique simple tree path as a polyline; unwrapped on the torus.
inline PolylinePath tree_path(const SpanningTree& tree, SiteId x, SiteId y) {
    const Geometry& g = tree.geometry();
    std::vector<SiteId> sites = tree.path_sites(x, y);
    PolylinePath p;
    p.metric = g.torus() ? PathMetric::TorusFlat : PathMetric::Plane;
    p.period = g.torus() ? 2.0 * g.half_side() : 0.0;
    p.points.reserve(sites.size());
    Point cur = g.position(sites.front());
    p.points.push_back(cur);
    for (std::size_t i = 1; i < sites.size(); ++i) {
        Point d = g.displacement(sites[i - 1], sites[i]);
        cur = {cur.x + d.x, cur.y + d.y};
        p.points.push_back(cur);
    }
    return p;
}

// Cluster labeling of one threshold configuration. On the vertex-labeled
// lattice clusters are open-site components; closed sites get the null id.
// On the edge-labeled lattice clusters are open-edge components; sites with
// no open incident edge get the null id.
struct ClusterLabeling {
    double p = 0.0;
    std::vector<std::uint32_t> cluster_of;  // kNullCluster when not in a cluster
    std::vector<std::uint64_t> size;        // sites per cluster
    std::vector<double> diameter;           // L-inf, embedding units; 2M if wrapping
    std::vector<SiteId> representative;     // leftmost of the lowermost sites
    std::vector<double> bbox_lo_x, bbox_lo_y, bbox_hi_x, bbox_hi_y;  // unwrapped

    std::size_t cluster_count() const { return size.size(); }
};

inline ClusterLabeling clusters_at(const Geometry& g, const ConfigView& config) {
    bool site_mode = config.labels().site_carriers();
    std::size_t n = g.site_count();
    ClusterLabeling out;
    out.p = config.p();
    out.cluster_of.assign(n, kNullCluster);

    std::vector<double> off_x(n, 0.0), off_y(n, 0.0);
    std::vector<SiteId> queue;
    double side = 2.0 * g.half_side();

    auto member = [&](SiteId s) {
        if (site_mode) return config.site_open(s);
        for (int dir = 0; dir < g.degree(); ++dir) {
            SiteId t = g.neighbor(s, dir);
            if (t == kNullSite) continue;
            if (config.edge_open(g.edge_between(s, t))) return true;
        }
        return false;
    };
    auto step_ok = [&](SiteId s, SiteId t) {
        if (site_mode) return config.site_open(t);
        return config.edge_open(g.edge_between(s, t));
    };

    for (SiteId root = 0; root < n; ++root) {
        if (out.cluster_of[root] != kNullCluster) continue;
        if (!member(root)) continue;
        auto c = static_cast<std::uint32_t>(out.size.size());
        out.cluster_of[root] = c;
        off_x[root] = 0.0;
        off_y[root] = 0.0;
        queue.clear();
        queue.push_back(root);
        std::uint64_t count = 0;
        double lo_x = 0, hi_x = 0, lo_y = 0, hi_y = 0;
        bool wraps = false;
        SiteId rep = root;
        for (std::size_t h = 0; h < queue.size(); ++h) {
            SiteId s = queue[h];
            ++count;
            if (s < rep) rep = s;
            lo_x = std::min(lo_x, off_x[s]);
            hi_x = std::max(hi_x, off_x[s]);
            lo_y = std::min(lo_y, off_y[s]);
            hi_y = std::max(hi_y, off_y[s]);
            for (int dir = 0; dir < g.degree(); ++dir) {
                SiteId t = g.neighbor(s, dir);
                if (t == kNullSite || !step_ok(s, t)) continue;
                Point d = g.displacement(s, t);
                if (out.cluster_of[t] == c) {
                    if (std::abs(off_x[s] + d.x - off_x[t]) > 1e-9 ||
                        std::abs(off_y[s] + d.y - off_y[t]) > 1e-9)
                        wraps = true;
                    continue;
                }
                if (out.cluster_of[t] != kNullCluster) continue;
                out.cluster_of[t] = c;
                off_x[t] = off_x[s] + d.x;
                off_y[t] = off_y[s] + d.y;
                queue.push_back(t);
            }
        }
        double diam = wraps ? side : std::max(hi_x - lo_x, hi_y - lo_y);
        Point rp = g.position(root);
        out.size.push_back(count);
        out.diameter.push_back(diam);
        out.representative.push_back(rep);
        out.bbox_lo_x.push_back(rp.x + lo_x);
        out.bbox_lo_y.push_back(rp.y + lo_y);
        out.bbox_hi_x.push_back(rp.x + hi_x);
        out.bbox_hi_y.push_back(rp.y + hi_y);
    }
    return out;
}

// True iff every site of the tree path between x and y lies in the p-cluster
// of x (and, on the edge-labeled lattice, every path edge is open at p).
inline bool path_in_cluster_check(const SpanningTree& tree, const LabelField& labels,
                                  double p, SiteId x, SiteId y,
                                  const ClusterLabeling& clusters) {
    const Geometry& g = tree.geometry();
    std::uint32_t cx = clusters.cluster_of[x], cy = clusters.cluster_of[y];
    if (cx == kNullCluster || cy == kNullCluster || cx != cy)
        throw UsageError("path_in_cluster_check requires open endpoints in one cluster");
    std::vector<SiteId> sites = tree.path_sites(x, y);
    for (SiteId s : sites)
        if (clusters.cluster_of[s] != cx) return false;
    if (!labels.site_carriers()) {
        for (std::size_t i = 1; i < sites.size(); ++i) {
            EdgeId e = g.edge_between(sites[i - 1], sites[i]);
            if (labels.edge_label(e) > p) return false;
        }
    }
    return true;
}

inline bool path_in_cluster_check(const SpanningTree& tree, const LabelField& labels,
                                  double p, SiteId x, SiteId y) {
    ClusterLabeling clusters = clusters_at(tree.geometry(), config_at(labels, p));
    return path_in_cluster_check(tree, labels, p, x, y, clusters);
}

}  // namespace nearcrit

#pragma once

// Brute-force reference implementations used as oracles. These deliberately
// avoid the library's algorithmic machinery: spanning trees are enumerated
// exhaustively, clusters are labeled by plain BFS over explicit adjacency,
// arm events are decided by backtracking over literal disjoint paths, and the
// Frechet distance is minimaxed over every monotone coupling.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <vector>

#include "nearcrit/ensemble.hpp"
#include "nearcrit/forest.hpp"
#include "nearcrit/geometry.hpp"

namespace oracle {

using nearcrit::EdgeId;
using nearcrit::Geometry;
using nearcrit::Point;
using nearcrit::SiteId;

struct LabeledEdge {
    EdgeId id;
    SiteId u, v;
    double hi, lo;  // lo = 0 for scalar labels
};

inline std::vector<LabeledEdge> collect_edges(const Geometry& g,
                                              const nearcrit::LabelField& labels,
                                              const std::vector<SiteId>& sites) {
    std::set<SiteId> in(sites.begin(), sites.end());
    std::vector<LabeledEdge> out;
    for (EdgeId e = 0; e < g.max_edge_id(); ++e) {
        if (!g.edge_exists(e)) continue;
        SiteId u = g.edge_base(e), v = g.edge_other(e);
        if (!in.count(u) || !in.count(v)) continue;
        LabeledEdge le{e, u, v, 0.0, 0.0};
        if (labels.site_carriers()) {
            le.hi = std::max(labels.site_label(u), labels.site_label(v));
            le.lo = std::min(labels.site_label(u), labels.site_label(v));
        } else {
            le.hi = labels.edge_label(e);
        }
        out.push_back(le);
    }
    return out;
}

// All spanning trees of the (small) graph by recursive edge inclusion with a
// connectivity prune; calls fn on each tree (as a vector of edge indices).
inline void enumerate_spanning_trees(std::size_t n_vertices,
                                     const std::vector<std::pair<int, int>>& edges,
                                     const std::function<void(const std::vector<int>&)>& fn) {
    std::vector<int> chosen;
    std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t next,
                                                            std::size_t need) {
        if (need == 0) {
            // Verify acyclicity + connectivity over the involved vertices.
            std::map<int, int> parent;
            std::function<int(int)> find = [&](int x) {
                while (parent[x] != x) x = parent[x] = parent[parent[x]];
                return x;
            };
            for (auto [u, v] : edges) {
                if (!parent.count(u)) parent[u] = u;
                if (!parent.count(v)) parent[v] = v;
            }
            int merges = 0;
            for (int ei : chosen) {
                int ru = find(edges[ei].first), rv = find(edges[ei].second);
                if (ru == rv) return;  // cycle
                parent[ru] = rv;
                ++merges;
            }
            if (static_cast<std::size_t>(merges) + 1 != n_vertices) return;
            fn(chosen);
            return;
        }
        if (next >= edges.size() || edges.size() - next < need) return;
        chosen.push_back(static_cast<int>(next));
        rec(next + 1, need - 1);
        chosen.pop_back();
        rec(next + 1, need);
    };
    if (n_vertices >= 1) rec(0, n_vertices - 1);
}

// The spanning tree whose descending-sorted label sequence is lexicographically
// minimal (ties impossible with distinct labels). Labels compared as (hi, lo).
inline std::vector<EdgeId> mst_by_enumeration(const std::vector<LabeledEdge>& edges,
                                              const std::vector<SiteId>& sites) {
    std::vector<std::pair<int, int>> simple;
    std::map<SiteId, int> idx;
    for (SiteId s : sites) {
        int k = static_cast<int>(idx.size());
        idx[s] = k;
    }
    for (const auto& e : edges) simple.push_back({idx.at(e.u), idx.at(e.v)});

    using Key = std::vector<std::pair<double, double>>;
    bool found = false;
    Key best_key;
    std::vector<int> best_tree;
    enumerate_spanning_trees(sites.size(), simple, [&](const std::vector<int>& tree) {
        Key key;
        for (int ei : tree) key.push_back({edges[ei].hi, edges[ei].lo});
        std::sort(key.begin(), key.end(), std::greater<>());
        if (!found || key < best_key) {
            found = true;
            best_key = key;
            best_tree = tree;
        }
    });
    std::vector<EdgeId> out;
    for (int ei : best_tree) out.push_back(edges[ei].id);
    std::sort(out.begin(), out.end());
    return out;
}

// Plain BFS cluster labeling over an explicit open predicate (site mode).
inline std::vector<std::uint32_t> bfs_site_clusters(const Geometry& g,
                                                    const std::function<bool(SiteId)>& open) {
    std::vector<std::uint32_t> label(g.site_count(), nearcrit::kNullCluster);
    std::uint32_t next = 0;
    for (SiteId root = 0; root < g.site_count(); ++root) {
        if (!open(root) || label[root] != nearcrit::kNullCluster) continue;
        std::vector<SiteId> q{root};
        label[root] = next;
        for (std::size_t h = 0; h < q.size(); ++h) {
            for (SiteId t : g.neighbors(q[h])) {
                if (!open(t) || label[t] != nearcrit::kNullCluster) continue;
                label[t] = next;
                q.push_back(t);
            }
        }
        ++next;
    }
    return label;
}

// Exhaustive minimax over all monotone couplings of two point sequences.
inline double frechet_by_enumeration(const std::vector<double>& dist_matrix,
                                     std::size_t n, std::size_t m) {
    // dist_matrix is n*m row-major; explore all monotone lattice paths.
    double best = 1e300;
    std::vector<std::pair<std::size_t, std::size_t>> stack;
    std::function<void(std::size_t, std::size_t, double)> rec =
        [&](std::size_t i, std::size_t j, double cur) {
            cur = std::max(cur, dist_matrix[i * m + j]);
            if (cur >= best) return;
            if (i + 1 == n && j + 1 == m) {
                best = cur;
                return;
            }
            if (i + 1 < n) rec(i + 1, j, cur);
            if (j + 1 < m) rec(i, j + 1, cur);
            if (i + 1 < n && j + 1 < m) rec(i + 1, j + 1, cur);
        };
    rec(0, 0, 0.0);
    return best;
}

// Literal arm-path enumerator: searches for k pairwise-disjoint simple paths
// from the inner ring to the outer ring of the annulus, with prescribed
// colors in the cyclic order of their inner endpoints (all palette rotations
// are tried). Exponential; small patches only.
class ArmPathSearch {
public:
    ArmPathSearch(const Geometry& g, std::function<bool(SiteId)> open, Point center,
                  double inner_r, double outer_r)
        : g_(&g), open_(std::move(open)), center_(center), inner_r_(inner_r),
          outer_r_(outer_r) {
        auto adjacent_in = [&](SiteId s) {
            for (SiteId t : g.neighbors(s))
                if (dist(t) <= inner_r_ + 1e-12) return true;
            return false;
        };
        auto adjacent_out = [&](SiteId s) {
            if (g.neighbors(s).size() < static_cast<std::size_t>(g.degree())) return true;
            for (SiteId t : g.neighbors(s))
                if (dist(t) > outer_r_ + 1e-12) return true;
            return false;
        };
        for (SiteId s = 0; s < g.site_count(); ++s) {
            double d = dist(s);
            if (d > inner_r_ + 1e-12 && d <= outer_r_ + 1e-12) {
                member_.insert(s);
                if (adjacent_in(s)) inner_ring_.push_back(s);
                if (adjacent_out(s)) outer_ring_.insert(s);
            }
        }
        std::sort(inner_ring_.begin(), inner_ring_.end(),
                  [&](SiteId a, SiteId b) { return angle(a) < angle(b); });
    }

    // Restrict the allowed arm starting sites (kept in angular order).
    void restrict_starts(const std::set<SiteId>& allowed) {
        std::vector<SiteId> kept;
        for (SiteId s : inner_ring_)
            if (allowed.count(s)) kept.push_back(s);
        inner_ring_ = std::move(kept);
    }

    // Replace the starting ring entirely; `ordered` must already be in cyclic
    // order (e.g. a site's neighbors counterclockwise around it).
    void set_starts(const std::vector<SiteId>& ordered) { inner_ring_ = ordered; }

    // Remove one site from the searchable region (punctured-box events).
    void exclude(SiteId s) { member_.erase(s); }

    // palette[i]: true = open arm, false = closed arm, interpreted cyclically.
    bool exists(const std::vector<bool>& palette) {
        const std::size_t k = palette.size();
        if (inner_ring_.size() < k) return false;
        for (std::size_t rot = 0; rot < k; ++rot) {
            std::vector<bool> rotated(k);
            for (std::size_t i = 0; i < k; ++i) rotated[i] = palette[(i + rot) % k];
            starts_.assign(k, 0);
            used_.clear();
            if (choose_starts(rotated, 0, 0)) return true;
        }
        return false;
    }

private:
    double dist(SiteId s) const {
        auto [dx, dy] = delta(s);
        return std::max(std::abs(dx), std::abs(dy));
    }
    double angle(SiteId s) const {
        auto [dx, dy] = delta(s);
        return std::atan2(dy, dx);
    }
    std::pair<double, double> delta(SiteId s) const {
        Point p = g_->position(s);
        double side = 2.0 * g_->half_side();
        double dx = p.x - center_.x, dy = p.y - center_.y;
        if (g_->torus()) {
            dx -= side * std::round(dx / side);
            dy -= side * std::round(dy / side);
        }
        return {dx, dy};
    }

    bool choose_starts(const std::vector<bool>& palette, std::size_t arm,
                       std::size_t from) {
        if (arm == palette.size()) return grow_arm(palette, 0);
        for (std::size_t i = from; i < inner_ring_.size(); ++i) {
            SiteId s = inner_ring_[i];
            if (open_(s) != palette[arm]) continue;
            starts_[arm] = s;
            if (choose_starts(palette, arm + 1, i + 1)) return true;
        }
        return false;
    }

    bool grow_arm(const std::vector<bool>& palette, std::size_t arm) {
        if (arm == palette.size()) return true;
        SiteId s = starts_[arm];
        if (used_.count(s)) return false;
        used_.insert(s);
        bool ok = extend(s, palette, arm);
        used_.erase(s);
        return ok;
    }

    bool extend(SiteId tip, const std::vector<bool>& palette, std::size_t arm) {
        if (outer_ring_.count(tip)) return grow_arm(palette, arm + 1);
        for (SiteId t : g_->neighbors(tip)) {
            if (!member_.count(t) || used_.count(t)) continue;
            if (open_(t) != palette[arm]) continue;
            used_.insert(t);
            bool ok = extend(t, palette, arm);
            used_.erase(t);
            if (ok) return true;
        }
        return false;
    }

    const Geometry* g_;
    std::function<bool(SiteId)> open_;
    Point center_;
    double inner_r_, outer_r_;
    std::set<SiteId> member_;
    std::vector<SiteId> inner_ring_;
    std::set<SiteId> outer_ring_;
    std::set<SiteId> used_;
    std::vector<SiteId> starts_;
};

}  // namespace oracle

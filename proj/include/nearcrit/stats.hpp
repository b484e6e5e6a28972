#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "nearcrit/arms.hpp"
#include "nearcrit/ensemble.hpp"
#include "nearcrit/forest.hpp"
#include "nearcrit/threads.hpp"

namespace nearcrit {

// Estimators for arm probabilities and exponents, near-critical stability
// ratios, the cluster-volume law, the degree census and trunk box counts.

struct ArmSpec {
    int k = 1;
    ArmPalette palette = ArmPalette::Alternating;
    std::vector<std::pair<double, double>> radii;  // (r, R) pairs
    Window window;                                 // lambda = lambda' means static
    std::uint64_t samples = 0;

    void validate(const Geometry& g) const {
        if (k < 1) throw UsageError("arm count must be >= 1");
        if (samples == 0) throw UsageError("sample count must be positive");
        if (radii.empty()) throw UsageError("no radius pairs given");
        for (auto [r, R] : radii) {
            if (r > R) throw UsageError("arm radii require r <= R");
            if (R > g.half_side() + 1e-12)
                throw UsageError("arm radius exceeds the domain half-side");
        }
    }
};

struct ArmRadiusEstimate {
    double r = 0.0, R = 0.0;
    std::uint64_t hits = 0, samples = 0;
    double freq = 0.0, ci_lo = 0.0, ci_hi = 0.0;
};

struct ArmEstimate {
    std::vector<ArmRadiusEstimate> per_radius;
};

struct LogLogFit {
    double slope = 0.0;
    double stderr_slope = 0.0;
    int points = 0;
};

// Least squares slope of log(y) against log(x), skipping non-positive values.
inline LogLogFit fit_loglog(const std::vector<double>& xs, const std::vector<double>& ys) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (xs[i] > 0.0 && ys[i] > 0.0) {
            lx.push_back(std::log(xs[i]));
            ly.push_back(std::log(ys[i]));
        }
    }
    auto n = static_cast<int>(lx.size());
    if (n < 3) throw UsageError("log-log fit needs at least 3 usable scales");
    double mx = 0, my = 0;
    for (int i = 0; i < n; ++i) { mx += lx[i]; my += ly[i]; }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    if (sxx == 0.0) throw UsageError("log-log fit has degenerate scales");
    LogLogFit f;
    f.slope = sxy / sxx;
    f.points = n;
    double ss = 0;
    for (int i = 0; i < n; ++i) {
        double resid = ly[i] - my - f.slope * (lx[i] - mx);
        ss += resid * resid;
    }
    f.stderr_slope = n > 2 ? std::sqrt(ss / (n - 2) / sxx) : 0.0;
    return f;
}

namespace detail {

template <typename EventFn>
ArmEstimate run_arm_samples(const ArmSpec& spec, std::uint64_t seed, EventFn&& event) {
    unsigned t = thread_count();
    std::vector<std::vector<std::uint64_t>> hits(t, std::vector<std::uint64_t>(spec.radii.size(), 0));
    parallel_chunks(spec.samples, [&](unsigned ti, std::uint64_t b, std::uint64_t e) {
        ArmWorkspace ws;
        for (std::uint64_t it = b; it < e; ++it) {
            std::uint64_t key = label_stream(rng::derive(seed, it));
            for (std::size_t ri = 0; ri < spec.radii.size(); ++ri)
                if (event(key, spec.radii[ri].first, spec.radii[ri].second, ws))
                    ++hits[ti][ri];
        }
    }, t);
    ArmEstimate out;
    for (std::size_t ri = 0; ri < spec.radii.size(); ++ri) {
        ArmRadiusEstimate e;
        e.r = spec.radii[ri].first;
        e.R = spec.radii[ri].second;
        e.samples = spec.samples;
        for (unsigned ti = 0; ti < t; ++ti) e.hits += hits[ti][ri];
        e.freq = static_cast<double>(e.hits) / static_cast<double>(spec.samples);
        binomial_ci(e.hits, e.samples, e.ci_lo, e.ci_hi);
        out.per_radius.push_back(e);
    }
    return out;
}

}  // namespace detail

// Monte Carlo arm-event frequencies at the domain center, fresh labels per
// sample (evaluated lazily inside the outer box only).
inline ArmEstimate arm_probability(const ArmSpec& spec, const Geometry& g,
                                   const Calibration& cal, std::uint64_t seed) {
    if (g.spec().kind != LatticeKind::TriangularSite)
        throw UsageError("arm estimation requires the vertex-labeled lattice");
    spec.validate(g);
    double p_lo = lambda_to_p(spec.window.lambda_lo, cal);
    double p_hi = lambda_to_p(spec.window.lambda_hi, cal);
    if (p_lo <= 0.0 || p_hi >= 1.0)
        throw UsageError("window maps outside (0,1); shrink |lambda| or the mesh");
    Point center{0.0, 0.0};
    auto event = [&](std::uint64_t key, double r, double R, ArmWorkspace& ws) {
        Annulus a{center, r, R};
        auto label = [&](SiteId s) { return rng::u01(rng::at(key, s)); };
        if (spec.window.is_static()) {
            auto open = [&](SiteId s) { return label(s) <= p_lo; };
            return arm_event(g, open, a, spec.k, spec.palette, ws);
        }
        return window_arm_event(g, label, p_lo, p_hi, a, spec.k, spec.palette, ws);
    };
    return detail::run_arm_samples(spec, seed, event);
}

struct StabilityRatio {
    double r = 0.0, R = 0.0;
    double freq_window = 0.0, freq_critical = 0.0;
    double ratio = 0.0;
    bool unbounded = false;  // zero critical hits at this radius pair
    std::uint64_t hits_window = 0, hits_critical = 0, samples = 0;
};

// Paired near-critical / critical arm frequencies on shared labels.
inline std::vector<StabilityRatio> stability_ratio(const ArmSpec& spec, const Geometry& g,
                                                   const Calibration& cal,
                                                   std::uint64_t seed) {
    if (g.spec().kind != LatticeKind::TriangularSite)
        throw UsageError("arm estimation requires the vertex-labeled lattice");
    spec.validate(g);
    double p_lo = lambda_to_p(spec.window.lambda_lo, cal);
    double p_hi = lambda_to_p(spec.window.lambda_hi, cal);
    if (p_lo <= 0.0 || p_hi >= 1.0)
        throw UsageError("window maps outside (0,1); shrink |lambda| or the mesh");
    Point center{0.0, 0.0};

    unsigned t = thread_count();
    std::size_t nr = spec.radii.size();
    std::vector<std::vector<std::uint64_t>> hits_w(t, std::vector<std::uint64_t>(nr, 0));
    std::vector<std::vector<std::uint64_t>> hits_c(t, std::vector<std::uint64_t>(nr, 0));
    parallel_chunks(spec.samples, [&](unsigned ti, std::uint64_t b, std::uint64_t e) {
        ArmWorkspace ws;
        for (std::uint64_t it = b; it < e; ++it) {
            std::uint64_t key = detail::label_stream(rng::derive(seed, it));
            auto label = [&](SiteId s) { return rng::u01(rng::at(key, s)); };
            auto open_crit = [&](SiteId s) { return label(s) <= kPc; };
            for (std::size_t ri = 0; ri < nr; ++ri) {
                Annulus a{center, spec.radii[ri].first, spec.radii[ri].second};
                if (arm_event(g, open_crit, a, spec.k, spec.palette, ws)) ++hits_c[ti][ri];
                if (!spec.window.is_static() &&
                    window_arm_event(g, label, p_lo, p_hi, a, spec.k, spec.palette, ws))
                    ++hits_w[ti][ri];
            }
        }
    }, t);

    std::vector<StabilityRatio> out;
    for (std::size_t ri = 0; ri < nr; ++ri) {
        StabilityRatio sr;
        sr.r = spec.radii[ri].first;
        sr.R = spec.radii[ri].second;
        sr.samples = spec.samples;
        for (unsigned ti = 0; ti < t; ++ti) {
            sr.hits_window += hits_w[ti][ri];
            sr.hits_critical += hits_c[ti][ri];
        }
        if (spec.window.is_static()) sr.hits_window = sr.hits_critical;
        sr.freq_window = static_cast<double>(sr.hits_window) / spec.samples;
        sr.freq_critical = static_cast<double>(sr.hits_critical) / spec.samples;
        if (sr.hits_critical == 0) sr.unbounded = true;
        else sr.ratio = sr.freq_window / sr.freq_critical;
        out.push_back(sr);
    }
    return out;
}

// Cluster-volume law: clusters of diameter >= rho must carry at least
// (rho/eta)^(91/48 - zeta) sites (or (rho/r)^... r-squares in r-volume mode).
struct VolumeReport {
    std::vector<double> ratios;  // per qualifying cluster
    double min_ratio = 0.0;
    double pass_fraction = 0.0;  // fraction of qualifying clusters with ratio >= 1
    std::uint64_t qualifying = 0;
};

inline VolumeReport cluster_volume_law(const Geometry& g, const ConfigView& config,
                                       double rho, double zeta,
                                       double r_volume_scale = 0.0) {
    constexpr double kExponent = 91.0 / 48.0;
    if (zeta <= 0.0 || zeta >= kExponent)
        throw UsageError("zeta must lie in (0, 91/48)");
    if (rho > 2.0 * g.half_side())
        throw UsageError("rho exceeds the domain side");
    ClusterLabeling cl = clusters_at(g, config);

    VolumeReport rep;
    double threshold_exp = kExponent - zeta;
    std::vector<std::uint64_t> rcells;  // cluster -> distinct r-cells, when in r-volume mode
    if (r_volume_scale > 0.0) {
        BoxGrid grid(g, r_volume_scale);
        std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
        for (SiteId s = 0; s < g.site_count(); ++s) {
            std::uint32_t c = cl.cluster_of[s];
            if (c != kNullCluster) pairs.push_back({c, grid.cell_of(s)});
        }
        std::sort(pairs.begin(), pairs.end());
        pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
        rcells.assign(cl.cluster_count(), 0);
        for (auto& pr : pairs) ++rcells[pr.first];
    }
    double passes = 0.0;
    rep.min_ratio = 1e300;
    for (std::size_t c = 0; c < cl.cluster_count(); ++c) {
        if (cl.diameter[c] < rho) continue;
        double volume, base;
        if (r_volume_scale > 0.0) {
            volume = static_cast<double>(rcells[c]);
            base = rho / r_volume_scale;
        } else {
            volume = static_cast<double>(cl.size[c]);
            base = rho / g.eta();
        }
        double ratio = volume / std::pow(base, threshold_exp);
        rep.ratios.push_back(ratio);
        rep.min_ratio = std::min(rep.min_ratio, ratio);
        if (ratio >= 1.0) passes += 1.0;
        ++rep.qualifying;
    }
    if (rep.qualifying == 0) rep.min_ratio = 0.0;
    else rep.pass_fraction = passes / static_cast<double>(rep.qualifying);
    return rep;
}

// -------- annulus degree machinery (degree census and trunk boxes) --------

namespace detail {

// Per-box annulus degree of a spanning tree: number of connected components
// of the tree restricted to the annulus between the r-square boundary and the
// concentric box of radius rho that touch both boundary rings. Components are
// discovered by a multi-source BFS along tree edges from the ring seeds, with
// union-find over seed classes; for typical boxes all seeds merge quickly and
// the test exits on the cheap side.
class AnnulusDegreeScan {
public:
    explicit AnnulusDegreeScan(const SpanningTree& tree)
        : tree_(&tree), g_(&tree.geometry()) {
        stamp_.assign(g_->site_count(), 0);
        cls_.assign(g_->site_count(), 0);
    }

    struct BoxResult {
        int degree = 0;
        std::vector<SiteId> crossing_reps;  // one site per crossing component
    };

    // With early_two the scan returns as soon as all seed classes have merged
    // into one (degree is then <= 1 and reported as such without resolving
    // outer reach); callers that only test "degree >= 2" use this fast path.
    BoxResult run(Point center, double inner_r, double outer_r, bool early_two) {
        double eta = g_->eta();
        double seed_band = inner_r + 1.5 * eta;
        double reach_band = outer_r - 1.5 * eta;
        bump();
        seeds_.clear();
        for_box_sites(*g_, center, std::min(seed_band, outer_r), [&](SiteId s) {
            double d = linf_from(*g_, s, center);
            if (d > inner_r + 1e-12 && d <= seed_band &&
                adjacent_inside(*g_, s, center, inner_r))
                seeds_.push_back(s);
        });
        const auto nseed = static_cast<std::uint32_t>(seeds_.size());
        uf_parent_.resize(nseed);
        for (std::uint32_t i = 0; i < nseed; ++i) uf_parent_[i] = i;
        reach_.assign(nseed, 0);
        reach_rep_.assign(nseed, kNullSite);

        queue_.clear();
        std::uint32_t live_classes = nseed;
        for (std::uint32_t i = 0; i < nseed; ++i) {
            SiteId s = seeds_[i];
            stamp_[s] = epoch_;
            cls_[s] = i;
            queue_.push_back(s);
        }
        // BFS along tree edges; classes merge when fronts touch.
        for (std::size_t h = 0; h < queue_.size(); ++h) {
            SiteId s = queue_[h];
            std::uint32_t c = find(cls_[s]);
            double d = linf_from(*g_, s, center);
            if (d > reach_band && !reach_[c] &&
                adjacent_outside(*g_, s, center, outer_r)) {
                reach_[c] = 1;
                reach_rep_[c] = s;
            }
            auto [nb, ne] = tree_->tree_neighbors(s);
            for (const SiteId* it = nb; it != ne; ++it) {
                SiteId t = *it;
                double dt = linf_from(*g_, t, center);
                if (dt <= inner_r + 1e-12 || dt > outer_r + 1e-12) continue;
                if (stamp_[t] == epoch_) {
                    std::uint32_t ct = find(cls_[t]);
                    if (ct != c) {
                        merge_classes(c, ct);
                        c = find(c);
                        --live_classes;
                        if (early_two && live_classes <= 1) return {1, {}};
                    }
                    continue;
                }
                stamp_[t] = epoch_;
                cls_[t] = cls_[s];
                queue_.push_back(t);
            }
        }
        // Exhausted: count distinct classes that reached the outer ring.
        BoxResult res;
        for (std::uint32_t i = 0; i < nseed; ++i) {
            if (find(i) != i) continue;
            if (reach_[i]) {
                ++res.degree;
                res.crossing_reps.push_back(reach_rep_[i]);
            }
        }
        return res;
    }

private:
    void bump() {
        if (++epoch_ == 0) {
            std::fill(stamp_.begin(), stamp_.end(), 0);
            epoch_ = 1;
        }
    }
    std::uint32_t find(std::uint32_t x) {
        while (uf_parent_[x] != x) {
            uf_parent_[x] = uf_parent_[uf_parent_[x]];
            x = uf_parent_[x];
        }
        return x;
    }
    void merge_classes(std::uint32_t a, std::uint32_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (b < a) std::swap(a, b);
        uf_parent_[b] = a;
        if (reach_[b] && !reach_[a]) {
            reach_[a] = 1;
            reach_rep_[a] = reach_rep_[b];
        }
    }

    const SpanningTree* tree_;
    const Geometry* g_;
    std::vector<std::uint32_t> stamp_, cls_;
    std::uint32_t epoch_ = 0;
    std::vector<SiteId> queue_, seeds_;
    std::vector<std::uint32_t> uf_parent_;
    std::vector<std::uint8_t> reach_;
    std::vector<SiteId> reach_rep_;
};

}  // namespace detail

struct DegreeCensus {
    double r = 0.0, rho = 0.0;
    std::vector<int> degree_of_box;          // per BoxGrid cell
    std::uint64_t boxes_with_degree[7] = {};  // index d: boxes with degree >= d (d = 2..6 used)
    std::uint64_t pinching_boxes = 0;         // >= 2 groups of size >= 2
    std::uint64_t type21_boxes = 0;           // >= 2 groups, largest of size >= 2
    std::vector<std::vector<int>> group_sizes_of_box;
};

// Annulus-degree census over all r-squares of the dyadic grid: crossings of
// the (r/2-margin) annulus grouped by connectivity inside the rho-box.
inline DegreeCensus degree_census(const SpanningTree& tree, double r, double rho) {
    const Geometry& g = tree.geometry();
    if (r > rho / 4.0 + 1e-12) throw UsageError("census requires r <= rho/4");
    if (rho > g.half_side() + 1e-12)
        throw UsageError("census requires rho <= domain half-side");
    BoxGrid grid(g, r);
    DegreeCensus out;
    out.r = r;
    out.rho = rho;
    out.degree_of_box.assign(grid.cell_count(), 0);
    out.group_sizes_of_box.resize(grid.cell_count());

    detail::AnnulusDegreeScan scan(tree);
    ArmWorkspace rho_ws;
    for (std::uint32_t cell = 0; cell < grid.cell_count(); ++cell) {
        Point center = grid.cell_center(cell);
        auto res = scan.run(center, 0.5 * r, rho, /*early_two=*/false);
        out.degree_of_box[cell] = res.degree;
        for (int d = 2; d <= 6; ++d)
            if (res.degree >= d) ++out.boxes_with_degree[d];
        if (res.degree < 2) continue;

        // Group crossings by tree connectivity inside the rho-box.
        rho_ws.reset(g.site_count());
        std::uint32_t next = 0;
        std::vector<SiteId> q;
        for (SiteId rep : res.crossing_reps) {
            if (rho_ws.visited(rep)) continue;
            rho_ws.set_value(rep, next++);
            q.clear();
            q.push_back(rep);
            for (std::size_t h = 0; h < q.size(); ++h) {
                SiteId s = q[h];
                auto [nb, ne] = tree.tree_neighbors(s);
                for (const SiteId* it = nb; it != ne; ++it) {
                    SiteId t2 = *it;
                    if (rho_ws.visited(t2)) continue;
                    if (detail::linf_from(g, t2, center) > rho + 1e-12) continue;
                    rho_ws.set_value(t2, rho_ws.value(s));
                    q.push_back(t2);
                }
            }
        }
        std::vector<int> sizes(next, 0);
        for (SiteId rep : res.crossing_reps) ++sizes[rho_ws.value(rep)];
        std::sort(sizes.begin(), sizes.end(), std::greater<>());
        int big = 0;
        for (int sz : sizes)
            if (sz >= 2) ++big;
        if (big >= 2) ++out.pinching_boxes;
        if (sizes.size() >= 2 && sizes[0] >= 2) ++out.type21_boxes;
        out.group_sizes_of_box[cell] = std::move(sizes);
    }
    return out;
}

// Boxes whose annulus-degree is at least 2 (same scan, early-decided).
inline std::vector<std::uint32_t> trunk_boxes(const SpanningTree& tree, double rho,
                                              double r) {
    const Geometry& g = tree.geometry();
    if (r > rho / 4.0 + 1e-12) throw UsageError("trunk boxes require r <= rho/4");
    if (rho > g.half_side() + 1e-12)
        throw UsageError("trunk boxes require rho <= domain half-side");
    BoxGrid grid(g, r);
    std::vector<std::uint32_t> out;
    detail::AnnulusDegreeScan scan(tree);
    for (std::uint32_t cell = 0; cell < grid.cell_count(); ++cell) {
        auto res = scan.run(grid.cell_center(cell), 0.5 * r, rho, /*early_two=*/true);
        if (res.degree >= 2) out.push_back(cell);
    }
    return out;
}

struct BoxCountCurve {
    double rho = 0.0;
    std::vector<double> r_scales;
    std::vector<std::uint64_t> counts;
};

inline LogLogFit minkowski_fit(const BoxCountCurve& curve) {
    if (curve.r_scales.size() < 3)
        throw UsageError("minkowski fit needs at least 3 scales");
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < curve.r_scales.size(); ++i) {
        xs.push_back(1.0 / curve.r_scales[i]);
        ys.push_back(static_cast<double>(curve.counts[i]));
    }
    return fit_loglog(xs, ys);
}

}  // namespace nearcrit

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "nearcrit/stats.hpp"
#include "oracles.hpp"

using namespace nearcrit;

TEST_CASE("log-log fit recovers exact power laws") {
    std::vector<double> xs, ys;
    for (double r : {0.25, 0.125, 0.0625, 0.03125}) {
        xs.push_back(1.0 / r);
        ys.push_back(std::pow(1.0 / r, 1.5));
    }
    LogLogFit f = fit_loglog(xs, ys);
    REQUIRE_THAT(f.slope, Catch::Matchers::WithinAbs(1.5, 1e-9));
    REQUIRE(f.stderr_slope < 1e-9);

    std::vector<double> flat(xs.size(), 7.0);
    LogLogFit f0 = fit_loglog(xs, flat);
    REQUIRE_THAT(f0.slope, Catch::Matchers::WithinAbs(0.0, 1e-12));

    REQUIRE_THROWS_AS(fit_loglog({1.0, 2.0}, {1.0, 2.0}), UsageError);
    REQUIRE_THROWS_AS(fit_loglog({1.0, 1.0, 1.0}, {1.0, 2.0, 3.0}), UsageError);
}

TEST_CASE("minkowski fit wraps the box-count curve") {
    BoxCountCurve c;
    c.rho = 0.25;
    for (double r : {0.25, 0.125, 0.0625}) {
        c.r_scales.push_back(r);
        c.counts.push_back(static_cast<std::uint64_t>(std::llround(std::pow(1.0 / r, 1.5))));
    }
    REQUIRE_THAT(minkowski_fit(c).slope, Catch::Matchers::WithinAbs(1.5, 0.02));
    BoxCountCurve bad;
    bad.rho = 0.25;
    REQUIRE_THROWS_AS(minkowski_fit(bad), UsageError);
}

TEST_CASE("one-arm frequency at doubling scale is RSW-sane") {
    Geometry g(LatticeSpec::make(LatticeKind::TriangularSite, 16, 1.0));
    ArmSpec spec;
    spec.k = 1;
    spec.palette = ArmPalette::Alternating;
    spec.window = Window(0.0, 0.0);
    spec.samples = 600;
    spec.radii = {{0.25, 0.5}};
    Calibration cal = Calibration::theoretical(g.eta());
    ArmEstimate est = arm_probability(spec, g, cal, 99);
    REQUIRE(est.per_radius[0].freq > 0.01);
    REQUIRE(est.per_radius[0].freq < 0.99);
    REQUIRE(est.per_radius[0].ci_lo <= est.per_radius[0].freq);
    REQUIRE(est.per_radius[0].freq <= est.per_radius[0].ci_hi);
}

TEST_CASE("degenerate radius pair has frequency one") {
    Geometry g(LatticeSpec::make(LatticeKind::TriangularSite, 8, 1.0));
    ArmSpec spec;
    spec.k = 4;
    spec.samples = 10;
    spec.radii = {{0.5, 0.5}};
    spec.window = Window(0.0, 0.0);
    ArmEstimate est = arm_probability(spec, g, Calibration::theoretical(g.eta()), 1);
    REQUIRE(est.per_radius[0].freq == 1.0);
}

TEST_CASE("radii beyond the domain are rejected") {
    Geometry g(LatticeSpec::make(LatticeKind::TriangularSite, 8, 1.0));
    ArmSpec spec;
    spec.k = 1;
    spec.samples = 1;
    spec.radii = {{0.5, 1.5}};
    REQUIRE_THROWS_AS(arm_probability(spec, g, Calibration::theoretical(g.eta()), 1),
                      UsageError);
}

TEST_CASE("stability ratio is exactly one for a static window") {
    Geometry g(LatticeSpec::make(LatticeKind::TriangularSite, 16, 1.0));
    ArmSpec spec;
    spec.k = 4;
    spec.palette = ArmPalette::Alternating;
    spec.window = Window(0.0, 0.0);
    spec.samples = 300;
    spec.radii = {{0.125, 0.5}, {0.25, 0.5}};
    auto ratios = stability_ratio(spec, g, Calibration::theoretical(g.eta()), 5);
    for (const auto& sr : ratios) {
        if (sr.unbounded) continue;
        REQUIRE(sr.ratio == 1.0);
        REQUIRE(sr.hits_window == sr.hits_critical);
    }
}

TEST_CASE("near-critical monotonicity is not asserted, only stability reported") {
    Geometry g(LatticeSpec::make(LatticeKind::TriangularSite, 16, 1.0));
    ArmSpec spec;
    spec.k = 4;
    spec.palette = ArmPalette::Alternating;
    spec.window = Window(-1.0, 1.0);
    spec.samples = 400;
    spec.radii = {{0.25, 0.5}};
    auto ratios = stability_ratio(spec, g, Calibration::theoretical(g.eta()), 5);
    REQUIRE(ratios.size() == 1);
    REQUIRE(ratios[0].samples == 400);
    if (!ratios[0].unbounded) REQUIRE(ratios[0].ratio >= 0.0);
}

TEST_CASE("cluster volume law on extreme configurations") {
    Geometry g(LatticeSpec::make(LatticeKind::TriangularSite, 16, 1.0));
    LabelField f = sample_labels(g, 3);
    // Fully open: a single wrapping cluster passes for any zeta > 0.
    VolumeReport full = cluster_volume_law(g, config_at(f, 1.0), 0.25, 0.1);
    REQUIRE(full.qualifying == 1);
    REQUIRE(full.pass_fraction == 1.0);
    // Empty: no qualifying clusters, empty report.
    VolumeReport empty = cluster_volume_law(g, config_at(f, 0.0), 0.25, 0.1);
    REQUIRE(empty.qualifying == 0);
    REQUIRE(empty.ratios.empty());
    REQUIRE_THROWS_AS(cluster_volume_law(g, config_at(f, 0.5), 0.25, 0.0), UsageError);
}

TEST_CASE("volume law pass is monotone in zeta") {
    Geometry g(LatticeSpec::make(LatticeKind::TriangularSite, 32, 1.0));
    LabelField f = sample_labels(g, 9);
    ConfigView cfg = config_at(f, 0.5);
    VolumeReport lo = cluster_volume_law(g, cfg, 0.25, 0.05);
    VolumeReport hi = cluster_volume_law(g, cfg, 0.25, 0.30);
    REQUIRE(lo.qualifying == hi.qualifying);
    for (std::size_t i = 0; i < lo.ratios.size(); ++i) {
        REQUIRE(hi.ratios[i] >= lo.ratios[i]);
        if (lo.ratios[i] >= 1.0) REQUIRE(hi.ratios[i] >= 1.0);
    }
}

TEST_CASE("r-volume variant counts grid squares") {
    Geometry g(LatticeSpec::make(LatticeKind::TriangularSite, 16, 1.0));
    LabelField f = sample_labels(g, 3);
    VolumeReport rep = cluster_volume_law(g, config_at(f, 1.0), 0.25, 0.1, 0.125);
    REQUIRE(rep.qualifying == 1);
    // The single wrapping cluster intersects every r-cell.
    BoxGrid grid(g, 0.125);
    double base = 0.25 / 0.125;
    double want = grid.cell_count() / std::pow(base, 91.0 / 48.0 - 0.1);
    REQUIRE_THAT(rep.ratios[0], Catch::Matchers::WithinRel(want, 1e-12));
}

namespace {

// A spanning "tree" consisting of one horizontal line of sites; all other
// sites stay isolated. Handy for census semantics.
SpanningTree line_tree(const Geometry& g, std::uint32_t row, std::uint32_t i0,
                       std::uint32_t i1) {
    std::vector<EdgeId> edges;
    for (std::uint32_t i = i0; i < i1; ++i)
        edges.push_back(g.edge_between(g.site_at(i, row), g.site_at(i + 1, row)));
    return SpanningTree(g, std::move(edges), {});
}

}  // namespace

TEST_CASE("census of a straight path: degree 2, one group, no pinching") {
    Geometry g(LatticeSpec::make(LatticeKind::TriangularSite, 32, 1.0));
    SpanningTree t = line_tree(g, 32, 0, 63);  // nearly full row at y = 0
    double rho = 0.25, r = rho / 4.0;
    DegreeCensus cs = degree_census(t, r, rho);
    BoxGrid grid(g, r);
    // A box centered on the middle of the path.
    bool found_deg2 = false;
    for (std::uint32_t cell = 0; cell < grid.cell_count(); ++cell) {
        Point c = grid.cell_center(cell);
        if (std::abs(c.y - 0.0) < 0.02 && std::abs(c.x) < 0.5) {
            if (cs.degree_of_box[cell] == 2) {
                found_deg2 = true;
                REQUIRE(cs.group_sizes_of_box[cell].size() == 1);  // one group of two
            }
        }
    }
    REQUIRE(found_deg2);
    REQUIRE(cs.pinching_boxes == 0);
}

TEST_CASE("leaf-tip boxes have degree 1 and are not trunk boxes") {
    Geometry g(LatticeSpec::make(LatticeKind::TriangularSite, 32, 1.0));
    SpanningTree t = line_tree(g, 32, 8, 56);
    double rho = 0.25, r = rho / 4.0;
    auto trunk = trunk_boxes(t, rho, r);
    std::set<std::uint32_t> trunk_set(trunk.begin(), trunk.end());
    BoxGrid grid(g, r);
    // Box at the left tip of the path.
    Point tip = g.position(g.site_at(8, 32));
    for (std::uint32_t cell = 0; cell < grid.cell_count(); ++cell) {
        Point c = grid.cell_center(cell);
        if (std::abs(c.x - tip.x) < r / 4 && std::abs(c.y - tip.y) < r / 4)
            REQUIRE(trunk_set.count(cell) == 0);
    }
    // Middle boxes are trunk boxes.
    bool mid_found = false;
    for (std::uint32_t cell : trunk) {
        Point c = grid.cell_center(cell);
        if (std::abs(c.x) < 0.3 && std::abs(c.y) < 0.05) mid_found = true;
    }
    REQUIRE(mid_found);
}

TEST_CASE("three-branch star: degree 3, one group") {
    Geometry g(LatticeSpec::make(LatticeKind::TriangularSite, 32, 1.0));
    std::vector<EdgeId> edges;
    SiteId c = g.site_at(32, 32);
    // Branches east, north, and west, each 20 sites long.
    for (int k = 0; k < 20; ++k) {
        edges.push_back(g.edge_between(g.site_at(32 + k, 32), g.site_at(33 + k, 32)));
        edges.push_back(g.edge_between(g.site_at(32, 32 + k), g.site_at(32, 33 + k)));
        edges.push_back(g.edge_between(g.site_at(32 - k, 32), g.site_at(31 - k, 32)));
    }
    SpanningTree t(g, std::move(edges), {});
    double rho = 0.25, r = rho / 4.0;
    DegreeCensus cs = degree_census(t, r, rho);
    BoxGrid grid(g, r);
    std::uint32_t cell = grid.cell_of(c);
    REQUIRE(cs.degree_of_box[cell] == 3);
    REQUIRE(cs.group_sizes_of_box[cell].size() == 1);
    REQUIRE(cs.group_sizes_of_box[cell][0] == 3);
}

TEST_CASE("trunk boxes equal census boxes of degree at least two") {
    Geometry g(LatticeSpec::make(LatticeKind::TriangularSite, 16, 1.0));
    LabelField f = sample_labels(g, 19);
    SpanningTree t = mst_kruskal(g, f);
    double rho = 0.25, r = rho / 4.0;
    DegreeCensus cs = degree_census(t, r, rho);
    auto trunk = trunk_boxes(t, rho, r);
    std::set<std::uint32_t> want;
    for (std::uint32_t cell = 0; cell < cs.degree_of_box.size(); ++cell)
        if (cs.degree_of_box[cell] >= 2) want.insert(cell);
    REQUIRE(std::set<std::uint32_t>(trunk.begin(), trunk.end()) == want);
}

TEST_CASE("census grouping is a partition of the crossings") {
    Geometry g(LatticeSpec::make(LatticeKind::TriangularSite, 16, 1.0));
    LabelField f = sample_labels(g, 55);
    SpanningTree t = mst_kruskal(g, f);
    DegreeCensus cs = degree_census(t, 0.0625, 0.25);
    for (std::uint32_t cell = 0; cell < cs.degree_of_box.size(); ++cell) {
        if (cs.degree_of_box[cell] < 2) continue;
        int total = 0;
        for (int sz : cs.group_sizes_of_box[cell]) total += sz;
        REQUIRE(total == cs.degree_of_box[cell]);
    }
}

TEST_CASE("trunk box count is stable under a grid shift (factor 9)") {
    Geometry g(LatticeSpec::make(LatticeKind::TriangularSite, 32, 1.0));
    LabelField f = sample_labels(g, 71);
    SpanningTree t = mst_kruskal(g, f);
    double rho = 0.25, r = rho / 4.0;
    auto base = trunk_boxes(t, rho, r);

    // Shifted grid: same scan with centers moved by r/3.
    detail::AnnulusDegreeScan scan(t);
    BoxGrid grid(g, r);
    std::size_t shifted = 0;
    for (std::uint32_t cell = 0; cell < grid.cell_count(); ++cell) {
        Point c = grid.cell_center(cell);
        c.x += r / 3.0;
        c.y += r / 3.0;
        auto res = scan.run(c, 0.5 * r, rho, true);
        if (res.degree >= 2) ++shifted;
    }
    REQUIRE(base.size() <= 9 * std::max<std::size_t>(shifted, 1));
    REQUIRE(shifted <= 9 * std::max<std::size_t>(base.size(), 1));
}

TEST_CASE("census scale preconditions") {
    Geometry g(LatticeSpec::make(LatticeKind::TriangularSite, 16, 1.0));
    LabelField f = sample_labels(g, 1);
    SpanningTree t = mst_kruskal(g, f);
    REQUIRE_THROWS_AS(degree_census(t, 0.25, 0.25), UsageError);   // r > rho/4
    REQUIRE_THROWS_AS(degree_census(t, 0.125, 2.0), UsageError);   // rho > M
    REQUIRE_THROWS_AS(trunk_boxes(t, 0.25, 0.25), UsageError);
}

#pragma once

#include <cstdio>
#include <fstream>
#include <string>

#include "nearcrit/forest.hpp"
#include "nearcrit/pivnet.hpp"

namespace nearcrit {

struct RenderStyle {
    double pixels_per_unit = 256.0;
    double stroke_width = 0.6;       // in pixels
    std::string stroke = "#1a1a1a";
    std::string highlight = "#d62728";
    double highlight_width = 1.8;
};

namespace detail {

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

}  // namespace detail

// Spanning tree as one <line> element per tree edge (minimal-image segment;
// seam-crossing edges run out of the viewport). An optional highlight path is
// drawn as a <polyline> on top.
inline void render_tree(const SpanningTree& tree, const RenderStyle& style,
                        const std::string& path,
                        const PolylinePath* highlight = nullptr) {
    const Geometry& g = tree.geometry();
    double m = g.half_side();
    double k = style.pixels_per_unit;
    auto px = [&](double v) { return detail::fmt((v + m) * k); };

    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open SVG output: " + path);
    double size = 2.0 * m * k;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << detail::fmt(size)
        << "\" height=\"" << detail::fmt(size) << "\" viewBox=\"0 0 " << detail::fmt(size)
        << " " << detail::fmt(size) << "\">\n";
    out << "<g stroke=\"" << style.stroke << "\" stroke-width=\""
        << detail::fmt(style.stroke_width) << "\" stroke-linecap=\"round\">\n";
    for (EdgeId e : tree.edges()) {
        SiteId u = g.edge_base(e);
        Point a = g.position(u);
        Point d = g.displacement(u, g.edge_other(e));
        out << "<line x1=\"" << px(a.x) << "\" y1=\"" << px(a.y) << "\" x2=\""
            << px(a.x + d.x) << "\" y2=\"" << px(a.y + d.y) << "\"/>\n";
    }
    out << "</g>\n";
    if (highlight && highlight->points.size() >= 2) {
        out << "<polyline fill=\"none\" stroke=\"" << style.highlight
            << "\" stroke-width=\"" << detail::fmt(style.highlight_width) << "\" points=\"";
        for (std::size_t i = 0; i < highlight->points.size(); ++i) {
            if (i) out << " ";
            out << px(highlight->points[i].x) << "," << px(highlight->points[i].y);
        }
        out << "\"/>\n";
    }
    out << "</svg>\n";
    if (!out) throw IoError("short write on SVG output: " + path);
}

// Cut-off tree rendering: one <polyline> per edge (router - pivotal -
// router); a degenerate tree renders as a single marker dot.
inline void render_tree(const CutoffTree& tree, const RenderStyle& style,
                        const std::string& path) {
    const Geometry& g = *tree.geom;
    double m = g.half_side();
    double k = style.pixels_per_unit;
    auto px = [&](double v) { return detail::fmt((v + m) * k); };

    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open SVG output: " + path);
    double size = 2.0 * m * k;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << detail::fmt(size)
        << "\" height=\"" << detail::fmt(size) << "\" viewBox=\"0 0 " << detail::fmt(size)
        << " " << detail::fmt(size) << "\">\n";
    if (tree.degenerate) {
        out << "<circle cx=\"" << px(tree.center.x) << "\" cy=\"" << px(tree.center.y)
            << "\" r=\"" << detail::fmt(3.0) << "\" fill=\"" << style.stroke << "\"/>\n";
    } else {
        out << "<g fill=\"none\" stroke=\"" << style.stroke << "\" stroke-width=\""
            << detail::fmt(style.stroke_width) << "\">\n";
        CutoffForest shim;
        shim.geom = tree.geom;
        shim.routers = tree.routers;
        for (const CutoffEdge& e : tree.edges) {
            PolylinePath pl = shim.draw(e);
            out << "<polyline points=\"";
            for (std::size_t i = 0; i < pl.points.size(); ++i) {
                if (i) out << " ";
                out << px(pl.points[i].x) << "," << px(pl.points[i].y);
            }
            out << "\"/>\n";
        }
        out << "</g>\n";
    }
    out << "</svg>\n";
    if (!out) throw IoError("short write on SVG output: " + path);
}

}  // namespace nearcrit

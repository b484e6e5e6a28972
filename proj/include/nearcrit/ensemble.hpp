#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <vector>

#include "nearcrit/arms.hpp"
#include "nearcrit/geometry.hpp"
#include "nearcrit/rng.hpp"

namespace nearcrit {

// One Unif(0,1) label per carrier: sites on the triangular lattice, edges on
// the square lattice. The single label array simultaneously encodes every
// percolation level, the minimal spanning tree and invasion.
class LabelField {
public:
    LabelField(const Geometry& g, std::uint64_t seed, std::vector<double> values)
        : geom_(&g), seed_(seed), values_(std::move(values)) {}

    const Geometry& geometry() const { return *geom_; }
    std::uint64_t seed() const { return seed_; }
    std::size_t carrier_count() const { return values_.size(); }
    const std::vector<double>& values() const { return values_; }

    bool site_carriers() const {
        return geom_->spec().kind == LatticeKind::TriangularSite;
    }

    double site_label(SiteId s) const {
        geom_->check_site(s);
        return values_[s];
    }
    double edge_label(EdgeId e) const { return values_[e]; }

    // Replace values (strictly increasing relabelings for order-invariance
    // experiments). Length must match.
    LabelField with_values(std::vector<double> v) const {
        if (v.size() != values_.size()) throw UsageError("label array length mismatch");
        return LabelField(*geom_, seed_, std::move(v));
    }

private:
    const Geometry* geom_;
    std::uint64_t seed_;
    std::vector<double> values_;
};

// Lexicographic edge label on the vertex-labeled lattice.
struct EdgeLexLabel {
    double hi = 0.0;
    double lo = 0.0;
    friend bool operator<(const EdgeLexLabel& a, const EdgeLexLabel& b) {
        if (a.hi != b.hi) return a.hi < b.hi;
        return a.lo < b.lo;
    }
    friend bool operator==(const EdgeLexLabel& a, const EdgeLexLabel& b) {
        return a.hi == b.hi && a.lo == b.lo;
    }
};

namespace detail {

inline std::uint64_t label_stream(std::uint64_t seed) {
    return rng::derive(seed, 0x4c4142454c53ULL);  // carrier label stream
}

}  // namespace detail

// Deterministic function of (geometry, seed); each carrier's value comes from
// a counter-based draw keyed by its index, so the field does not depend on
// evaluation order. Bit-identical duplicate labels (possible with 53-bit
// draws) are nudged upward by one ulp so the ordering is a strict total order.
inline LabelField sample_labels(const Geometry& g, std::uint64_t seed) {
    std::size_t n = (g.spec().kind == LatticeKind::TriangularSite)
                        ? g.site_count()
                        : static_cast<std::size_t>(g.max_edge_id());
    std::uint64_t key = detail::label_stream(seed);
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = rng::uniform(key, i);

    // Distinctness check on the raw bit patterns; collisions are rare enough
    // that the slow path almost never runs. Within a run of equal values the
    // carrier with the smallest index keeps its label and the later ones are
    // nudged up by one ulp at a time until free.
    std::vector<std::pair<std::uint64_t, std::uint32_t>> order(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint64_t b;
        std::memcpy(&b, &values[i], sizeof b);
        order[i] = {b, static_cast<std::uint32_t>(i)};
    }
    std::sort(order.begin(), order.end());
    std::vector<std::uint32_t> to_fix;
    for (std::size_t i = 0; i + 1 < n;) {
        std::size_t j = i + 1;
        while (j < n && order[j].first == order[i].first) ++j;
        for (std::size_t k = i + 1; k < j; ++k) to_fix.push_back(order[k].second);
        i = j;
    }
    if (!to_fix.empty()) {
        std::sort(to_fix.begin(), to_fix.end());
        std::vector<std::uint64_t> extra;
        auto occupied = [&](std::uint64_t b) {
            bool in_base = std::binary_search(
                order.begin(), order.end(), std::make_pair(b, std::uint32_t{0}),
                [](const auto& x, const auto& y) { return x.first < y.first; });
            return in_base || std::find(extra.begin(), extra.end(), b) != extra.end();
        };
        for (std::uint32_t idx : to_fix) {
            double v = values[idx];
            std::uint64_t b;
            do {
                v = std::nextafter(v, 1.0);
                std::memcpy(&b, &v, sizeof b);
            } while (occupied(b));
            values[idx] = v;
            extra.push_back(b);
        }
    }
    return LabelField(g, seed, std::move(values));
}

// Lazily evaluated site label identical to what sample_labels would produce
// (ignoring the measure-zero nudge path); used by Monte Carlo loops that only
// touch a small window of a large virtual field.
inline double lazy_site_label(std::uint64_t seed, SiteId s) {
    return rng::uniform(detail::label_stream(seed), s);
}

inline EdgeLexLabel edge_lex_label(const LabelField& labels, SiteId a, SiteId b) {
    if (!labels.site_carriers())
        throw UsageError("edge_lex_label applies to vertex-labeled lattices only");
    labels.geometry().edge_between(a, b);  // adjacency check
    double va = labels.site_label(a), vb = labels.site_label(b);
    return {std::max(va, vb), std::min(va, vb)};
}

// Near-critical reparametrization. Theoretical mode pins r(eta) = eta^{3/4}
// (constant 1); measured mode estimates the alternating 4-arm frequency to
// distance 1 and sets r(eta) = eta^2 / alpha4_hat.
struct Calibration {
    enum class Mode : std::uint8_t { Theoretical = 0, Measured = 1 };
    Mode mode = Mode::Theoretical;
    double r_eta = 0.0;
    double alpha4_hat = 0.0;  // measured mode only
    std::uint64_t samples = 0;
    double ci_lo = 0.0, ci_hi = 0.0;  // 95% binomial interval on alpha4

    static Calibration theoretical(double eta) {
        Calibration c;
        c.mode = Mode::Theoretical;
        c.r_eta = std::pow(eta, 0.75);
        return c;
    }
};

inline constexpr double kPc = 0.5;  // exact for triangular-site and square-bond

inline double lambda_to_p(double lambda, const Calibration& cal) {
    double p;
    if (lambda >= 0.0)
        p = kPc + (1.0 - std::exp(-lambda * cal.r_eta));
    else
        p = kPc - (1.0 - std::exp(lambda * cal.r_eta));
    return std::clamp(p, 0.0, 1.0);
}

inline double p_to_lambda(double p, const Calibration& cal) {
    if (p <= 0.0 || p >= 1.0)
        throw UsageError("p_to_lambda: threshold at 0 or 1 maps to an infinite level");
    if (p >= kPc) {
        double q = 1.0 - (p - kPc);
        return -std::log(q) / cal.r_eta;
    }
    double q = 1.0 - (kPc - p);
    return std::log(q) / cal.r_eta;
}

struct Window {
    double lambda_lo = 0.0;
    double lambda_hi = 0.0;
    Window() = default;
    Window(double lo, double hi) : lambda_lo(lo), lambda_hi(hi) {
        if (!(lo <= hi)) throw UsageError("window requires lambda <= lambda'");
    }
    bool is_static() const { return lambda_lo == lambda_hi; }
};

// Zero-copy threshold view of one label field: a carrier is open iff its
// label is <= p. On the vertex-labeled lattice an edge is open iff both
// endpoints are (hi <= p). Monotone in p by construction.
class ConfigView {
public:
    ConfigView(const LabelField& labels, double p) : labels_(&labels), p_(p) {
        if (p < 0.0 || p > 1.0) throw UsageError("threshold outside [0,1]");
    }

    const LabelField& labels() const { return *labels_; }
    const Geometry& geometry() const { return labels_->geometry(); }
    double p() const { return p_; }

    bool site_open(SiteId s) const {
        if (!labels_->site_carriers())
            throw UsageError("site_open applies to vertex-labeled lattices only");
        return labels_->site_label(s) <= p_;
    }

    bool edge_open(EdgeId e) const {
        const Geometry& g = geometry();
        if (!g.edge_exists(e)) throw UsageError("edge id out of range");
        if (labels_->site_carriers()) {
            double a = labels_->site_label(g.edge_base(e));
            double b = labels_->site_label(g.edge_other(e));
            return std::max(a, b) <= p_;
        }
        return labels_->edge_label(e) <= p_;
    }

private:
    const LabelField* labels_;
    double p_;
};

inline ConfigView config_at(const LabelField& labels, double p) {
    return ConfigView(labels, p);
}

// Wilson 95% score interval.
inline void binomial_ci(std::uint64_t hits, std::uint64_t n, double& lo, double& hi) {
    if (n == 0) { lo = 0.0; hi = 1.0; return; }
    const double z = 1.959963984540054;
    double ph = static_cast<double>(hits) / n;
    double z2 = z * z;
    double denom = 1.0 + z2 / n;
    double center = (ph + z2 / (2.0 * n)) / denom;
    double half = z * std::sqrt(ph * (1.0 - ph) / n + z2 / (4.0 * n * n)) / denom;
    lo = std::max(0.0, center - half);
    hi = std::min(1.0, center + half);
}

// Monte Carlo estimate of alpha4(eta, 1): frequency of the alternating 4-arm
// event from the central site to distance 1 at criticality, with fresh labels
// per sample. Requires domain side >= 2 so the radius-1 box fits.
inline Calibration calibrate_r(const Geometry& g, std::uint64_t samples,
                               std::uint64_t seed) {
    if (g.spec().kind != LatticeKind::TriangularSite)
        throw UsageError("calibration is defined on the vertex-labeled lattice");
    if (2.0 * g.half_side() < 2.0)
        throw ConfigError("calibration needs domain side >= 2");
    SiteId center = g.site_at(g.side() / 2, g.side() / 2);
    Point cpos = g.position(center);
    // The outer box is pulled in by one lattice step so that a boundary layer
    // exists outside it (arms anchor by adjacency to the complement).
    double outer_r = 1.0 - g.eta();
    ArmWorkspace ws;
    std::uint64_t hits = 0;
    for (std::uint64_t it = 0; it < samples; ++it) {
        std::uint64_t key = detail::label_stream(rng::derive(seed, it));
        auto open = [&](SiteId s) { return rng::uniform(key, s) <= kPc; };
        if (four_arm_at_site(g, open, center, cpos, outer_r, ws)) ++hits;
    }
    if (hits == 0)
        throw CalibrationError(
            "no 4-arm events observed; increase the sample count or the mesh");
    Calibration c;
    c.mode = Calibration::Mode::Measured;
    c.samples = samples;
    c.alpha4_hat = static_cast<double>(hits) / static_cast<double>(samples);
    binomial_ci(hits, samples, c.ci_lo, c.ci_hi);
    double eta = g.eta();
    c.r_eta = eta * eta / c.alpha4_hat;
    return c;
}

}  // namespace nearcrit

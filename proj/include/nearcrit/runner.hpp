#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nearcrit/ensemble.hpp"
#include "nearcrit/forest.hpp"
#include "nearcrit/geometry.hpp"
#include "nearcrit/pivnet.hpp"
#include "nearcrit/snapshot.hpp"
#include "nearcrit/stats.hpp"
#include "nearcrit/svg.hpp"
#include "nearcrit/threads.hpp"
#include "nearcrit/treespace.hpp"

namespace nearcrit {

enum class Experiment : std::uint8_t {
    Mst, Invade, Cutoff, CutoffInvade, Compare, Arms, Census, Dimension,
    Volume, Calibrate, Render,
};

inline Experiment experiment_from_name(const std::string& s) {
    if (s == "mst") return Experiment::Mst;
    if (s == "invade") return Experiment::Invade;
    if (s == "cutoff") return Experiment::Cutoff;
    if (s == "cutoff-invade") return Experiment::CutoffInvade;
    if (s == "compare") return Experiment::Compare;
    if (s == "arms") return Experiment::Arms;
    if (s == "census") return Experiment::Census;
    if (s == "dimension") return Experiment::Dimension;
    if (s == "volume") return Experiment::Volume;
    if (s == "calibrate") return Experiment::Calibrate;
    if (s == "render") return Experiment::Render;
    throw ConfigError("unknown experiment: " + s);
}

inline const char* experiment_name(Experiment e) {
    switch (e) {
        case Experiment::Mst: return "mst";
        case Experiment::Invade: return "invade";
        case Experiment::Cutoff: return "cutoff";
        case Experiment::CutoffInvade: return "cutoff-invade";
        case Experiment::Compare: return "compare";
        case Experiment::Arms: return "arms";
        case Experiment::Census: return "census";
        case Experiment::Dimension: return "dimension";
        case Experiment::Volume: return "volume";
        case Experiment::Calibrate: return "calibrate";
        case Experiment::Render: return "render";
    }
    return "?";
}

struct RunConfig {
    Experiment experiment = Experiment::Mst;
    LatticeKind lattice = LatticeKind::TriangularSite;
    DomainKind domain = DomainKind::Torus;
    std::uint32_t n = 64;
    double m = 1.0;
    std::uint64_t seed = 1;
    std::uint32_t replicas = 1;
    std::string out_dir = "out";

    // Experiment parameters (all optional with experiment-specific defaults).
    std::vector<double> epsilons;       // cutoff / compare
    Window window{-1.0, 1.0};
    double rho = 0.25;
    std::vector<double> r_list;
    double s = 0.25;
    double zeta = 0.1;
    double p = 0.5;                     // volume threshold level
    int arm_k = 1;
    ArmPalette palette = ArmPalette::Alternating;
    std::uint64_t samples = 1000;
    StopRule stop = StopRule::full_spanning();
    std::uint32_t pairs = 10;           // compare: sampled leaf pairs per replica
    int ell_max = 2;
    Calibration::Mode calibration_mode = Calibration::Mode::Theoretical;

    LatticeSpec lattice_spec() const { return LatticeSpec::make(lattice, n, m, domain); }
};

namespace detail {

inline std::string fmt_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stod(item));
    }
    return out;
}

}  // namespace detail

// Flat key=value configuration files; '#' starts a comment.
inline RunConfig parse_config(std::istream& in) {
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            auto b = s.find_first_not_of(" \t\r");
            auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (!key.empty()) kv[key] = val;
    }

    RunConfig c;
    auto has = [&](const char* k) { return kv.count(k) > 0; };
    auto str = [&](const char* k) { return kv.at(k); };
    if (has("experiment")) c.experiment = experiment_from_name(str("experiment"));
    if (has("lattice")) {
        std::string v = str("lattice");
        if (v == "triangular") c.lattice = LatticeKind::TriangularSite;
        else if (v == "square") c.lattice = LatticeKind::SquareBond;
        else throw ConfigError("lattice must be 'triangular' or 'square'");
    }
    if (has("domain")) {
        std::string v = str("domain");
        if (v == "torus") c.domain = DomainKind::Torus;
        else if (v == "box") c.domain = DomainKind::Box;
        else throw ConfigError("domain must be 'torus' or 'box'");
    }
    try {
        if (has("n")) c.n = static_cast<std::uint32_t>(std::stoul(str("n")));
        if (has("m")) c.m = std::stod(str("m"));
        if (has("seed")) c.seed = std::stoull(str("seed"));
        if (has("replicas")) c.replicas = static_cast<std::uint32_t>(std::stoul(str("replicas")));
        if (has("out")) c.out_dir = str("out");
        if (has("epsilon")) c.epsilons = {std::stod(str("epsilon"))};
        if (has("epsilon_list")) c.epsilons = detail::parse_double_list(str("epsilon_list"));
        if (has("lambda_lo") || has("lambda_hi")) {
            double lo = has("lambda_lo") ? std::stod(str("lambda_lo")) : c.window.lambda_lo;
            double hi = has("lambda_hi") ? std::stod(str("lambda_hi")) : c.window.lambda_hi;
            c.window = Window(lo, hi);
        }
        if (has("rho")) c.rho = std::stod(str("rho"));
        if (has("r_list")) c.r_list = detail::parse_double_list(str("r_list"));
        if (has("s")) c.s = std::stod(str("s"));
        if (has("zeta")) c.zeta = std::stod(str("zeta"));
        if (has("p")) c.p = std::stod(str("p"));
        if (has("k")) c.arm_k = std::stoi(str("k"));
        if (has("samples")) c.samples = std::stoull(str("samples"));
        if (has("pairs")) c.pairs = static_cast<std::uint32_t>(std::stoul(str("pairs")));
        if (has("ell_max")) c.ell_max = std::stoi(str("ell_max"));
    } catch (const std::invalid_argument&) {
        throw ConfigError("malformed numeric value in config");
    } catch (const std::out_of_range&) {
        throw ConfigError("numeric value out of range in config");
    }
    if (has("palette")) {
        std::string v = str("palette");
        if (v == "alternating") c.palette = ArmPalette::Alternating;
        else if (v == "monochromatic") c.palette = ArmPalette::Monochromatic;
        else throw ConfigError("palette must be 'alternating' or 'monochromatic'");
    }
    if (has("stop")) {
        std::string v = str("stop");
        if (v == "full") c.stop = StopRule::full_spanning();
        else if (v == "boundary") c.stop = StopRule::boundary();
        else if (v.rfind("target:", 0) == 0)
            c.stop = StopRule::target_site(static_cast<SiteId>(std::stoul(v.substr(7))));
        else throw ConfigError("stop must be 'full', 'boundary' or 'target:<site>'");
    }
    if (has("calibration")) {
        std::string v = str("calibration");
        if (v == "theoretical") c.calibration_mode = Calibration::Mode::Theoretical;
        else if (v == "measured") c.calibration_mode = Calibration::Mode::Measured;
        else throw ConfigError("calibration must be 'theoretical' or 'measured'");
    }
    if (c.replicas < 1) throw ConfigError("replicas must be >= 1");
    return c;
}

inline RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    return parse_config(in);
}

// ---------------------------------------------------------------------------

namespace detail {

class Csv {
public:
    explicit Csv(std::vector<std::string> columns) : columns_(std::move(columns)) {
        for (std::size_t i = 0; i < columns_.size(); ++i) {
            if (i) body_ += ",";
            body_ += columns_[i];
        }
        body_ += "\n";
    }
    void row(const std::vector<std::string>& cells) {
        if (cells.size() != columns_.size())
            throw IntegrityError("CSV row width mismatch");
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) body_ += ",";
            body_ += cells[i];
        }
        body_ += "\n";
    }
    void write(const std::string& path) const {
        std::ofstream out(path, std::ios::trunc | std::ios::binary);
        if (!out) throw IoError("cannot open CSV output: " + path);
        out << body_;
        if (!out) throw IoError("short write on CSV output: " + path);
    }

private:
    std::vector<std::string> columns_;
    std::string body_;
};

inline std::string cell(double v) { return fmt_full(v); }
inline std::string cell(std::uint64_t v) { return std::to_string(v); }
inline std::string cell(std::int64_t v) { return std::to_string(v); }
inline std::string cell(std::uint32_t v) { return std::to_string(v); }
inline std::string cell(int v) { return std::to_string(v); }

// Per-replica pipeline state shared by the cutoff-style experiments.
struct CutoffPipeline {
    LabelField labels;
    double p_lo = 0.0;
    std::vector<ImportantSite> important;
    std::vector<SwitchEvent> events;
    EnhancedNetwork network;
    CutoffForest forest;

    static CutoffPipeline build(const Geometry& g, std::uint64_t replica_seed,
                                const Window& w, const Calibration& cal, double eps) {
        CutoffPipeline pl{sample_labels(g, replica_seed), 0.0, {}, {}, {}, {}};
        pl.p_lo = lambda_to_p(w.lambda_lo, cal);
        ConfigView config = config_at(pl.labels, pl.p_lo);
        pl.important = find_important(g, config, eps);
        pl.events = switches(pl.labels, pl.important, w, cal);
        pl.network = build_network(g, config, pl.important);
        pl.forest = cutoff_forest(g, pl.network, pl.events, w.lambda_lo);
        return pl;
    }
};

}  // namespace detail

struct RunResult {
    int exit_code = 0;
    std::string results_csv;
    std::string summary_json;
};

// Executes one experiment configuration: writes results.csv, summary.json and
// any experiment-specific artifacts under the output directory. Replica i
// runs with seed derive(master_seed, i); replicas execute on the worker pool
// and are merged in index order, so outputs are bit-identical regardless of
// scheduling.
inline RunResult run(const RunConfig& cfg) {
    namespace fs = std::filesystem;
    const Geometry geom(cfg.lattice_spec());
    fs::create_directories(cfg.out_dir);
    std::string csv_path = cfg.out_dir + "/results.csv";
    std::string json_path = cfg.out_dir + "/summary.json";

    Calibration cal = cfg.calibration_mode == Calibration::Mode::Theoretical
                          ? Calibration::theoretical(geom.eta())
                          : calibrate_r(geom, cfg.samples, rng::derive(cfg.seed, 0xCAB));

    nlohmann::json summary;
    summary["schema_version"] = 1;
    summary["experiment"] = experiment_name(cfg.experiment);
    summary["seed"] = cfg.seed;
    summary["replicas"] = cfg.replicas;
    summary["n"] = cfg.n;
    summary["m"] = cfg.m;
    summary["r_eta"] = cal.r_eta;

    auto replica_seed = [&](std::uint32_t i) { return rng::derive(cfg.seed, i); };

    switch (cfg.experiment) {
        case Experiment::Mst: {
            detail::Csv csv({"replica", "seed", "sites", "edge_count", "components",
                             "max_accept_label"});
            struct Row { std::uint64_t seed, edges, comps; double maxl; };
            std::vector<Row> rows(cfg.replicas);
            parallel_chunks(cfg.replicas, [&](unsigned, std::uint64_t b, std::uint64_t e) {
                for (std::uint64_t i = b; i < e; ++i) {
                    LabelField labels = sample_labels(geom, replica_seed(i));
                    SpanningTree t = mst_kruskal(geom, labels);
                    double maxl = 0;
                    for (double v : t.accept_labels()) maxl = std::max(maxl, v);
                    rows[i] = {replica_seed(i), t.edges().size(), t.component_count(), maxl};
                }
            });
            for (std::uint32_t i = 0; i < cfg.replicas; ++i)
                csv.row({detail::cell(std::uint64_t{i}), detail::cell(rows[i].seed),
                         detail::cell(std::uint64_t{geom.site_count()}),
                         detail::cell(rows[i].edges), detail::cell(rows[i].comps),
                         detail::cell(rows[i].maxl)});
            csv.write(csv_path);
            summary["sites"] = geom.site_count();
            break;
        }

        case Experiment::Invade: {
            detail::Csv csv({"replica", "seed", "edges", "max_accept_label",
                             "tail_fraction_above", "threshold", "reached_stop"});
            const double threshold = 0.52;
            struct Row { std::uint64_t seed, edges; double maxl, tail; bool reached; };
            std::vector<Row> rows(cfg.replicas);
            parallel_chunks(cfg.replicas, [&](unsigned, std::uint64_t b, std::uint64_t e) {
                for (std::uint64_t i = b; i < e; ++i) {
                    LabelField labels = sample_labels(geom, replica_seed(i));
                    SiteId start = geom.site_at(geom.side() / 2, geom.side() / 2);
                    InvasionResult r = invade(geom, labels, start, cfg.stop);
                    double maxl = 0, above = 0;
                    std::size_t half = r.trace.size() / 2;
                    for (std::size_t k2 = 0; k2 < r.trace.size(); ++k2) {
                        maxl = std::max(maxl, r.trace[k2]);
                        if (k2 >= half && r.trace[k2] > threshold) above += 1.0;
                    }
                    double tail = r.trace.size() > half
                                      ? above / static_cast<double>(r.trace.size() - half)
                                      : 0.0;
                    rows[i] = {replica_seed(i), r.trace.size(), maxl, tail, r.reached_stop};
                }
            });
            double mean_tail = 0;
            for (std::uint32_t i = 0; i < cfg.replicas; ++i) {
                csv.row({detail::cell(std::uint64_t{i}), detail::cell(rows[i].seed),
                         detail::cell(rows[i].edges), detail::cell(rows[i].maxl),
                         detail::cell(rows[i].tail), detail::cell(threshold),
                         detail::cell(int(rows[i].reached))});
                mean_tail += rows[i].tail;
            }
            csv.write(csv_path);
            summary["mean_tail_fraction_above"] = mean_tail / cfg.replicas;
            summary["tail_threshold"] = threshold;
            break;
        }

        case Experiment::Cutoff: {
            if (cfg.epsilons.empty()) throw ConfigError("cutoff requires epsilon");
            detail::Csv csv({"replica", "epsilon", "pivotals", "switches", "routers",
                             "graph_edges", "forest_edges", "components", "giant_degenerate",
                             "giant_vertices"});
            struct Row {
                double eps; std::uint64_t piv, sw, routers, ge, fe, comps, gv; bool degen;
            };
            std::vector<std::vector<Row>> rows(cfg.replicas);
            parallel_chunks(cfg.replicas, [&](unsigned, std::uint64_t b, std::uint64_t e) {
                for (std::uint64_t i = b; i < e; ++i) {
                    for (double eps : cfg.epsilons) {
                        auto pl = detail::CutoffPipeline::build(geom, replica_seed(i),
                                                                cfg.window, cal, eps);
                        CutoffTree t = giant(pl.forest, cfg.s);
                        std::vector<std::uint32_t> comps = pl.forest.component;
                        std::sort(comps.begin(), comps.end());
                        comps.erase(std::unique(comps.begin(), comps.end()), comps.end());
                        rows[i].push_back({eps, pl.important.size(), pl.events.size(),
                                           pl.forest.routers.size(), pl.forest.graph_edges.size(),
                                           pl.forest.forest_edges.size(), comps.size(),
                                           t.vertices.size(), t.degenerate});
                    }
                }
            });
            for (std::uint32_t i = 0; i < cfg.replicas; ++i)
                for (const Row& r : rows[i])
                    csv.row({detail::cell(std::uint64_t{i}), detail::cell(r.eps),
                             detail::cell(r.piv), detail::cell(r.sw), detail::cell(r.routers),
                             detail::cell(r.ge), detail::cell(r.fe), detail::cell(r.comps),
                             detail::cell(int(r.degen)), detail::cell(r.gv)});
            csv.write(csv_path);
            break;
        }

        case Experiment::CutoffInvade: {
            if (cfg.epsilons.empty()) throw ConfigError("cutoff-invade requires epsilon");
            detail::Csv csv({"replica", "epsilon", "tree_vertices", "tree_edges",
                             "hit_step_immediate", "hit_step_batch",
                             "vertices_at_immediate_hit", "degenerate"});
            struct Row {
                double eps; std::uint64_t tv, te, vimm; std::int64_t hi, hb; bool degen;
            };
            std::vector<std::vector<Row>> rows(cfg.replicas);
            parallel_chunks(cfg.replicas, [&](unsigned, std::uint64_t b, std::uint64_t e) {
                for (std::uint64_t i = b; i < e; ++i) {
                    for (double eps : cfg.epsilons) {
                        auto pl = detail::CutoffPipeline::build(geom, replica_seed(i),
                                                                cfg.window, cal, eps);
                        auto res = cutoff_invasion(pl.forest, Point{0.0, 0.0},
                                                   InvasionTarget::boundary(), cfg.s);
                        rows[i].push_back({eps, res.tree.vertices.size(), res.tree.edges.size(),
                                           res.vertices_at_immediate_hit, res.hit_step_immediate,
                                           res.hit_step_batch, res.tree.degenerate});
                    }
                }
            });
            for (std::uint32_t i = 0; i < cfg.replicas; ++i)
                for (const Row& r : rows[i])
                    csv.row({detail::cell(std::uint64_t{i}), detail::cell(r.eps),
                             detail::cell(r.tv), detail::cell(r.te), detail::cell(r.hi),
                             detail::cell(r.hb), detail::cell(r.vimm),
                             detail::cell(int(r.degen))});
            csv.write(csv_path);
            break;
        }

        case Experiment::Compare: {
            if (cfg.epsilons.empty()) throw ConfigError("compare requires epsilon_list");
            detail::Csv csv({"replica", "epsilon", "pairs_sampled", "pairs_used",
                             "mean_path_distance", "switch_agree_fraction",
                             "giant_degenerate"});
            struct Row {
                double eps; std::uint64_t sampled, used; double mean_d, agree; bool degen;
            };
            std::vector<std::vector<Row>> rows(cfg.replicas);
            parallel_chunks(cfg.replicas, [&](unsigned, std::uint64_t b, std::uint64_t e) {
                for (std::uint64_t i = b; i < e; ++i) {
                    LabelField labels = sample_labels(geom, replica_seed(i));
                    double p_lo = lambda_to_p(cfg.window.lambda_lo, cal);
                    double p_hi = lambda_to_p(cfg.window.lambda_hi, cal);
                    ConfigView config = config_at(labels, p_lo);
                    SpanningTree mst = mst_kruskal(geom, labels);
                    ClusterLabeling clusters = clusters_at(geom, config);
                    for (double eps : cfg.epsilons) {
                        auto important = find_important(geom, config, eps);
                        auto events = switches(labels, important, cfg.window, cal);
                        auto network = build_network(geom, config, important);
                        auto forest = cutoff_forest(geom, network, events, cfg.window.lambda_lo);
                        CutoffTree tree = giant(forest, cfg.s);
                        Row row{eps, cfg.pairs, 0, 0.0, 0.0, tree.degenerate};
                        if (!tree.degenerate) {
                            std::vector<std::uint8_t> in_window(geom.site_count(), 0);
                            for (const auto& ev : events) in_window[ev.site] = 1;
                            rng::Sequence seq(rng::derive(replica_seed(i),
                                                          0x504152 + static_cast<std::uint64_t>(eps * 1e6)));
                            double sum_d = 0, agree = 0;
                            for (std::uint32_t pr = 0; pr < cfg.pairs; ++pr) {
                                Point a{(seq.next_u01() * 2 - 1) * geom.half_side(),
                                        (seq.next_u01() * 2 - 1) * geom.half_side()};
                                Point bpt{(seq.next_u01() * 2 - 1) * geom.half_side(),
                                          (seq.next_u01() * 2 - 1) * geom.half_side()};
                                std::uint32_t r1 = tree.nearest_vertex(a);
                                std::uint32_t r2 = tree.nearest_vertex(bpt);
                                if (r1 == r2) continue;
                                SiteId s1 = tree.routers[r1].site, s2 = tree.routers[r2].site;
                                std::uint32_t c1 = clusters.cluster_of[s1];
                                std::uint32_t c2 = clusters.cluster_of[s2];
                                if (c1 == kNullCluster || c2 == kNullCluster || c1 == c2) continue;
                                // MST path trimmed between the two clusters.
                                auto sites = mst.path_sites(s1, s2);
                                std::size_t lo = 0, hi = sites.size() - 1;
                                for (std::size_t k2 = 0; k2 < sites.size(); ++k2)
                                    if (clusters.cluster_of[sites[k2]] == c1) lo = k2;
                                for (std::size_t k2 = sites.size(); k2-- > 0;)
                                    if (clusters.cluster_of[sites[k2]] == c2) hi = k2;
                                if (hi <= lo) continue;
                                std::vector<SiteId> trimmed(sites.begin() + lo,
                                                            sites.begin() + hi + 1);
                                PolylinePath mst_path;
                                mst_path.metric = geom.torus() ? PathMetric::TorusFlat
                                                               : PathMetric::Plane;
                                mst_path.period = geom.torus() ? 2.0 * geom.half_side() : 0.0;
                                Point cur = geom.position(trimmed[0]);
                                mst_path.points.push_back(cur);
                                for (std::size_t k2 = 1; k2 < trimmed.size(); ++k2) {
                                    Point d = geom.displacement(trimmed[k2 - 1], trimmed[k2]);
                                    cur = {cur.x + d.x, cur.y + d.y};
                                    mst_path.points.push_back(cur);
                                }
                                auto verts = tree.path_vertices(r1, r2);
                                PolylinePath cut_path = densify(tree.draw_path(verts),
                                                                8.0 * geom.eta());
                                sum_d += frechet(mst_path, cut_path);
                                // Switch sites used by the two paths.
                                std::vector<SiteId> mst_sw, cut_sw;
                                for (SiteId s2v : trimmed)
                                    if (in_window[s2v]) mst_sw.push_back(s2v);
                                for (const CutoffEdge* epp : tree.path_edges(r1, r2))
                                    if (!epp->is_lambda) cut_sw.push_back(epp->via_pivotal);
                                std::sort(mst_sw.begin(), mst_sw.end());
                                std::sort(cut_sw.begin(), cut_sw.end());
                                cut_sw.erase(std::unique(cut_sw.begin(), cut_sw.end()),
                                             cut_sw.end());
                                if (mst_sw == cut_sw) agree += 1.0;
                                ++row.used;
                            }
                            if (row.used) {
                                row.mean_d = sum_d / static_cast<double>(row.used);
                                row.agree = agree / static_cast<double>(row.used);
                            }
                        }
                        rows[i].push_back(row);
                    }
                }
            });
            nlohmann::json per_eps = nlohmann::json::array();
            for (std::size_t ei = 0; ei < cfg.epsilons.size(); ++ei) {
                double sum_d = 0, sum_agree = 0;
                std::uint64_t used_reps = 0, degen = 0, pairs_used = 0;
                for (std::uint32_t i = 0; i < cfg.replicas; ++i) {
                    const Row& r = rows[i][ei];
                    if (r.degen) { ++degen; continue; }
                    if (r.used == 0) continue;
                    sum_d += r.mean_d;
                    sum_agree += r.agree * static_cast<double>(r.used);
                    pairs_used += r.used;
                    ++used_reps;
                }
                nlohmann::json je;
                je["epsilon"] = cfg.epsilons[ei];
                je["replicas_used"] = used_reps;
                je["degenerate_replicas"] = degen;
                je["mean_path_distance"] = used_reps ? sum_d / used_reps : 0.0;
                je["switch_agree_fraction"] =
                    pairs_used ? sum_agree / static_cast<double>(pairs_used) : 0.0;
                je["pairs_used"] = pairs_used;
                per_eps.push_back(je);
            }
            summary["per_epsilon"] = per_eps;
            for (std::uint32_t i = 0; i < cfg.replicas; ++i)
                for (const Row& r : rows[i])
                    csv.row({detail::cell(std::uint64_t{i}), detail::cell(r.eps),
                             detail::cell(std::uint64_t{r.sampled}), detail::cell(r.used),
                             detail::cell(r.mean_d), detail::cell(r.agree),
                             detail::cell(int(r.degen))});
            csv.write(csv_path);
            break;
        }

        case Experiment::Arms: {
            if (cfg.r_list.empty()) throw ConfigError("arms requires r_list");
            ArmSpec spec;
            spec.k = cfg.arm_k;
            spec.palette = cfg.palette;
            spec.window = cfg.window;
            spec.samples = cfg.samples;
            double outer = cfg.rho;
            for (double r : cfg.r_list) spec.radii.push_back({r, outer});
            detail::Csv csv({"r", "R", "samples", "hits_critical", "freq_critical",
                             "hits_window", "freq_window", "ratio", "unbounded"});
            auto ratios = stability_ratio(spec, geom, cal, cfg.seed);
            std::vector<double> xs, ys;
            for (const auto& sr : ratios) {
                csv.row({detail::cell(sr.r), detail::cell(sr.R), detail::cell(sr.samples),
                         detail::cell(sr.hits_critical), detail::cell(sr.freq_critical),
                         detail::cell(sr.hits_window), detail::cell(sr.freq_window),
                         detail::cell(sr.ratio), detail::cell(int(sr.unbounded))});
                xs.push_back(sr.r);
                ys.push_back(sr.freq_critical);
            }
            csv.write(csv_path);
            try {
                LogLogFit fit = fit_loglog(xs, ys);
                summary["critical_slope"] = fit.slope;
                summary["critical_slope_stderr"] = fit.stderr_slope;
            } catch (const UsageError&) {
                summary["critical_slope"] = nullptr;
            }
            double rmin = 1e300, rmax = 0;
            bool any = false;
            for (const auto& sr : ratios)
                if (!sr.unbounded && !cfg.window.is_static()) {
                    rmin = std::min(rmin, sr.ratio);
                    rmax = std::max(rmax, sr.ratio);
                    any = true;
                }
            if (any) {
                summary["ratio_min"] = rmin;
                summary["ratio_max"] = rmax;
                summary["ratio_spread"] = rmax / rmin;
            }
            break;
        }

        case Experiment::Census: {
            if (cfg.r_list.empty()) throw ConfigError("census requires r_list");
            detail::Csv csv({"replica", "r", "rho", "boxes", "deg_ge_2", "deg_ge_3",
                             "deg_ge_4", "deg_ge_5", "deg_ge_6", "pinching", "type21"});
            struct Row { double r; std::uint64_t boxes, d[5], pinch, t21; };
            std::vector<std::vector<Row>> rows(cfg.replicas);
            parallel_chunks(cfg.replicas, [&](unsigned, std::uint64_t b, std::uint64_t e) {
                for (std::uint64_t i = b; i < e; ++i) {
                    LabelField labels = sample_labels(geom, replica_seed(i));
                    SpanningTree t = mst_kruskal(geom, labels);
                    for (double r : cfg.r_list) {
                        DegreeCensus cs = degree_census(t, r, cfg.rho);
                        Row row{r, cs.degree_of_box.size(), {}, cs.pinching_boxes,
                                cs.type21_boxes};
                        for (int d = 2; d <= 6; ++d) row.d[d - 2] = cs.boxes_with_degree[d];
                        rows[i].push_back(row);
                    }
                }
            });
            for (std::uint32_t i = 0; i < cfg.replicas; ++i)
                for (const Row& r : rows[i])
                    csv.row({detail::cell(std::uint64_t{i}), detail::cell(r.r),
                             detail::cell(cfg.rho), detail::cell(r.boxes),
                             detail::cell(r.d[0]), detail::cell(r.d[1]), detail::cell(r.d[2]),
                             detail::cell(r.d[3]), detail::cell(r.d[4]),
                             detail::cell(r.pinch), detail::cell(r.t21)});
            csv.write(csv_path);
            nlohmann::json per_r = nlohmann::json::array();
            for (std::size_t ri = 0; ri < cfg.r_list.size(); ++ri) {
                double pinch = 0, deg5 = 0;
                for (std::uint32_t i = 0; i < cfg.replicas; ++i) {
                    pinch += static_cast<double>(rows[i][ri].pinch);
                    deg5 += static_cast<double>(rows[i][ri].d[3]);
                }
                nlohmann::json jr;
                jr["r"] = cfg.r_list[ri];
                jr["mean_pinching"] = pinch / cfg.replicas;
                jr["mean_deg_ge_5"] = deg5 / cfg.replicas;
                per_r.push_back(jr);
            }
            summary["per_r"] = per_r;
            break;
        }

        case Experiment::Dimension: {
            if (cfg.r_list.empty()) throw ConfigError("dimension requires r_list");
            detail::Csv csv({"replica", "r", "rho", "trunk_boxes"});
            std::vector<std::vector<std::uint64_t>> counts(
                cfg.replicas, std::vector<std::uint64_t>(cfg.r_list.size(), 0));
            parallel_chunks(cfg.replicas, [&](unsigned, std::uint64_t b, std::uint64_t e) {
                for (std::uint64_t i = b; i < e; ++i) {
                    LabelField labels = sample_labels(geom, replica_seed(i));
                    SpanningTree t = mst_kruskal(geom, labels);
                    for (std::size_t ri = 0; ri < cfg.r_list.size(); ++ri)
                        counts[i][ri] = trunk_boxes(t, cfg.rho, cfg.r_list[ri]).size();
                }
            });
            for (std::uint32_t i = 0; i < cfg.replicas; ++i)
                for (std::size_t ri = 0; ri < cfg.r_list.size(); ++ri)
                    csv.row({detail::cell(std::uint64_t{i}), detail::cell(cfg.r_list[ri]),
                             detail::cell(cfg.rho), detail::cell(counts[i][ri])});
            csv.write(csv_path);
            BoxCountCurve curve;
            curve.rho = cfg.rho;
            for (std::size_t ri = 0; ri < cfg.r_list.size(); ++ri) {
                double mean = 0;
                for (std::uint32_t i = 0; i < cfg.replicas; ++i)
                    mean += static_cast<double>(counts[i][ri]);
                curve.r_scales.push_back(cfg.r_list[ri]);
                curve.counts.push_back(
                    static_cast<std::uint64_t>(std::llround(mean / cfg.replicas)));
            }
            LogLogFit fit = minkowski_fit(curve);
            summary["slope"] = fit.slope;
            summary["slope_stderr"] = fit.stderr_slope;
            break;
        }

        case Experiment::Volume: {
            detail::Csv csv({"replica", "rho", "zeta", "qualifying", "min_ratio",
                             "pass_fraction"});
            struct Row { std::uint64_t q; double minr, pf; };
            std::vector<Row> rows(cfg.replicas);
            parallel_chunks(cfg.replicas, [&](unsigned, std::uint64_t b, std::uint64_t e) {
                for (std::uint64_t i = b; i < e; ++i) {
                    LabelField labels = sample_labels(geom, replica_seed(i));
                    VolumeReport rep = cluster_volume_law(geom, config_at(labels, cfg.p),
                                                          cfg.rho, cfg.zeta);
                    rows[i] = {rep.qualifying, rep.min_ratio, rep.pass_fraction};
                }
            });
            double pooled_pass = 0, pooled_total = 0;
            for (std::uint32_t i = 0; i < cfg.replicas; ++i) {
                csv.row({detail::cell(std::uint64_t{i}), detail::cell(cfg.rho),
                         detail::cell(cfg.zeta), detail::cell(rows[i].q),
                         detail::cell(rows[i].minr), detail::cell(rows[i].pf)});
                pooled_pass += rows[i].pf * static_cast<double>(rows[i].q);
                pooled_total += static_cast<double>(rows[i].q);
            }
            csv.write(csv_path);
            summary["pooled_pass_fraction"] =
                pooled_total > 0 ? pooled_pass / pooled_total : 1.0;
            break;
        }

        case Experiment::Calibrate: {
            Calibration c = calibrate_r(geom, cfg.samples, cfg.seed);
            detail::Csv csv({"samples", "alpha4_hat", "ci_lo", "ci_hi", "r_eta"});
            csv.row({detail::cell(c.samples), detail::cell(c.alpha4_hat),
                     detail::cell(c.ci_lo), detail::cell(c.ci_hi), detail::cell(c.r_eta)});
            csv.write(csv_path);
            summary["alpha4_hat"] = c.alpha4_hat;
            summary["alpha4_ci"] = {c.ci_lo, c.ci_hi};
            summary["r_eta_measured"] = c.r_eta;
            break;
        }

        case Experiment::Render: {
            LabelField labels = sample_labels(geom, replica_seed(0));
            SpanningTree t = mst_kruskal(geom, labels);
            RenderStyle style;
            render_tree(t, style, cfg.out_dir + "/tree.svg");
            detail::Csv csv({"replica", "edges", "svg"});
            csv.row({detail::cell(std::uint64_t{0}),
                     detail::cell(std::uint64_t{t.edges().size()}), "tree.svg"});
            csv.write(csv_path);
            break;
        }
    }

    std::ofstream js(json_path, std::ios::trunc | std::ios::binary);
    if (!js) throw IoError("cannot open summary output: " + json_path);
    js << summary.dump(2) << "\n";

    RunResult res;
    res.results_csv = csv_path;
    res.summary_json = json_path;
    return res;
}

}  // namespace nearcrit

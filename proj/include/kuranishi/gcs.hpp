#pragma once

// Good coordinate systems: extraction from a presentation (the half-ball
// construction with restricted/inverted changes), shrinking, strong
// shrinking sequences, the strongly-intersecting shrink loop, grouping by a
// total order partition, and inducing a presentation back.
//
// The order on the index set is the lexicographic (bundle dim, |G|, id)
// total order; it refines the paper's non-antisymmetric relation and is
// stored explicitly as a boolean table.

#include "kuranishi/identification.hpp"
#include "kuranishi/presentation.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace kur {

enum class ChangeProvenance { RESTRICTED, INVERTED };

struct GcsChange {
    CoordinateChange cc;
    ChangeProvenance provenance = ChangeProvenance::RESTRICTED;
};

struct GoodCoordinateSystem {
    std::vector<KuranishiChart> charts;                 // restricted charts, chart id = seed label
    std::map<std::pair<std::string, std::string>, GcsChange> changes;  // keyed (from,to), from <= to in the order
    std::vector<std::vector<bool>> leq;                 // order table over chart indices
    XPoints x;                                          // the label metric, carried along

    int index_of(const std::string& id) const {
        for (size_t i = 0; i < charts.size(); ++i)
            if (charts[i].id == id) return static_cast<int>(i);
        throw std::runtime_error("gcs: unknown chart '" + id + "'");
    }

    bool order_leq(int a, int b) const { return leq[static_cast<size_t>(a)][static_cast<size_t>(b)]; }

    const GcsChange* change(const std::string& from, const std::string& to) const {
        auto it = changes.find({from, to});
        return it == changes.end() ? nullptr : &it->second;
    }

    GlueInput glue_input() const {
        GlueInput g;
        for (const auto& c : charts) g.charts.push_back(&c);
        for (const auto& [k, gc] : changes) g.changes.push_back(&gc.cc);
        return g;
    }

    std::vector<BoxUnion> bases() const {
        std::vector<BoxUnion> b;
        for (const auto& c : charts) b.push_back(c.base);
        return b;
    }

    std::vector<int> dims() const {
        std::vector<int> d;
        for (const auto& c : charts) d.push_back(c.dim());
        return d;
    }

    // coverage label sets intersect?
    bool coverages_meet(int a, int b) const {
        for (const auto& fa : charts[static_cast<size_t>(a)].footprint)
            if (charts[static_cast<size_t>(b)].covers(fa.label)) return true;
        return false;
    }

    // I(G) off-diagonal pairs in order direction
    std::vector<std::pair<int, int>> index_pairs() const {
        std::vector<std::pair<int, int>> out;
        for (int a = 0; a < static_cast<int>(charts.size()); ++a)
            for (int b = 0; b < static_cast<int>(charts.size()); ++b)
                if (a != b && order_leq(a, b) && coverages_meet(a, b)) out.emplace_back(a, b);
        return out;
    }
};

// lexicographic (bundle dim, |G|, id) order table
inline std::vector<std::vector<bool>> build_order(const std::vector<KuranishiChart>& charts) {
    auto key = [](const KuranishiChart& c) { return std::make_tuple(c.fiber_rank, c.group.size(), c.id); };
    size_t n = charts.size();
    std::vector<std::vector<bool>> leq(n, std::vector<bool>(n, false));
    for (size_t a = 0; a < n; ++a)
        for (size_t b = 0; b < n; ++b) leq[a][b] = key(charts[a]) <= key(charts[b]);
    return leq;
}

struct NotCovering : std::runtime_error {
    explicit NotCovering(const std::string& w) : std::runtime_error(w) {}
};
struct BallTooLarge : std::runtime_error {
    explicit BallTooLarge(const std::string& w) : std::runtime_error(w) {}
};
struct BallConfigUnrealizable : std::runtime_error {
    explicit BallConfigUnrealizable(const std::string& w) : std::runtime_error(w) {}
};

// --------------------------------------------------------------------------
// extract_gcs: the proof of the existence theorem, verbatim in the finite
// model. Charts are restricted by deleting the zeros outside the half-ball;
// changes are assembled by restriction when the source label is covered by
// the target chart, by exact inversion of the reverse change otherwise.
// --------------------------------------------------------------------------

inline GoodCoordinateSystem extract_gcs(const KuranishiPresentation& p, const std::map<std::string, Rat>& radii,
                                        const std::vector<std::string>& seeds) {
    // pre: each seed ball stays inside its chart's coverage
    for (const auto& s : seeds) {
        const KuranishiChart& c = p.chart(s);
        Rat r = radii.at(s);
        for (const auto& l : p.x.ball(s, r))
            if (!c.covers(l))
                throw BallTooLarge("extract_gcs: B_" + rat_str(r) + "(" + s + ") exits the coverage at label " + l);
    }
    // pre: the half-balls cover X
    for (const auto& l : p.x.labels) {
        bool covered = false;
        for (const auto& s : seeds)
            if (p.x.d(s, l) < radii.at(s) / 2) covered = true;
        if (!covered) throw NotCovering("extract_gcs: half-balls miss label " + l);
    }

    GoodCoordinateSystem g;
    g.x = p.x;
    // restricted charts: U_s = V_s minus the zero points outside B_{r/2}(s)
    for (const auto& s : seeds) {
        const KuranishiChart& c = p.chart(s);
        Rat half = radii.at(s) / 2;
        KuranishiChart rc = c;
        for (const auto& fp : c.footprint) {
            if (p.x.d(s, fp.label) < half) continue;
            for (const RatVec& orb : c.group.orbit(fp.point)) rc.base = subtract_point(rc.base, orb);
        }
        rc.footprint.clear();
        for (const auto& fp : c.footprint)
            if (p.x.d(s, fp.label) < half) rc.footprint.push_back(fp);
        g.charts.push_back(std::move(rc));
    }
    g.leq = build_order(g.charts);

    // changes over I(G)
    for (auto [yi, xi] : g.charts.size() ? GoodCoordinateSystem{g.charts, {}, g.leq, g.x}.index_pairs()
                                         : std::vector<std::pair<int, int>>{}) {
        const KuranishiChart& cy = g.charts[static_cast<size_t>(yi)];
        const KuranishiChart& cx = g.charts[static_cast<size_t>(xi)];
        const std::string& y = cy.id;
        const std::string& xid = cx.id;
        if (p.chart(xid).covers(y)) {
            // cases (a)/(b): restrict the presentation change y -> x
            const CoordinateChange* orig = p.change(y, xid);
            if (!orig) throw BallConfigUnrealizable("extract_gcs: required change " + y + "->" + xid + " absent");
            GcsChange gc;
            gc.provenance = ChangeProvenance::RESTRICTED;
            gc.cc = *orig;
            gc.cc.domain = intersect(intersect(orig->domain, cy.base), affine_preimage(orig->base_map, cx.base));
            g.changes[{y, xid}] = std::move(gc);
        } else {
            // case (c): invert the reverse change; needs equal dimension and
            // group size, which the proof derives — anything else means the
            // input was inconsistent
            const CoordinateChange* rev = p.change(xid, y);
            if (!rev || cy.dim() != cx.dim() || cy.fiber_rank != cx.fiber_rank || cy.group.size() != cx.group.size())
                throw BallConfigUnrealizable("extract_gcs: pair (" + y + "," + xid +
                                             ") needs an inverted change but dimensions/groups do not permit");
            BoxUnion uyx = intersect(intersect(rev->domain, cx.base), affine_preimage(rev->base_map, cy.base));
            GcsChange gc;
            gc.provenance = ChangeProvenance::INVERTED;
            gc.cc.from_id = y;
            gc.cc.to_id = xid;
            gc.cc.base_map = rev->base_map.inverse_affine();
            gc.cc.bundle_map = inverse(rev->bundle_map);
            gc.cc.domain = affine_image_square(rev->base_map, uyx);
            if (!rev->group_hom.empty()) {
                // invert the isomorphism
                gc.cc.group_hom.assign(rev->group_hom.size(), -1);
                for (size_t i = 0; i < rev->group_hom.size(); ++i)
                    gc.cc.group_hom[static_cast<size_t>(rev->group_hom[i])] = static_cast<int>(i);
            }
            g.changes[{y, xid}] = std::move(gc);
        }
    }
    return g;
}

// structural checks of Def. LEVEL0GCS at grid resolution: order/dim
// compatibility, coverage union, nonempty domains, change validity and the
// tangent bundle condition, INVERTED provenance restrictions
inline void check_gcs_structure(const GoodCoordinateSystem& g, const Rat& grid_step) {
    std::set<std::string> covered;
    for (const auto& c : g.charts)
        for (const auto& fp : c.footprint) covered.insert(fp.label);
    for (const auto& l : g.x.labels)
        if (!covered.count(l)) throw std::runtime_error("gcs: coverage union misses label " + l);

    for (int a = 0; a < static_cast<int>(g.charts.size()); ++a)
        for (int b = 0; b < static_cast<int>(g.charts.size()); ++b)
            if (g.charts[static_cast<size_t>(a)].fiber_rank < g.charts[static_cast<size_t>(b)].fiber_rank &&
                !(g.order_leq(a, b) && !g.order_leq(b, a)))
                throw std::runtime_error("gcs: order incompatible with bundle dimension");

    for (const auto& [key, gc] : g.changes) {
        const KuranishiChart& src = g.charts[static_cast<size_t>(g.index_of(key.first))];
        const KuranishiChart& tgt = g.charts[static_cast<size_t>(g.index_of(key.second))];
        if (gc.cc.domain.empty()) throw std::runtime_error("gcs: empty change domain " + key.first + "->" + key.second);
        validate_cc(gc.cc, src, tgt);
        auto tb = check_tangent_bundle(gc.cc, src, tgt, grid_step);
        if (!tb.pass) throw std::runtime_error("gcs: tangent bundle condition fails for " + key.first + "->" + key.second);
        if (gc.provenance == ChangeProvenance::INVERTED &&
            (src.dim() != tgt.dim() || src.group.size() != tgt.group.size()))
            throw std::runtime_error("gcs: INVERTED change across unequal dimension/group");
    }
}

// --------------------------------------------------------------------------
// shrink_gcs
// --------------------------------------------------------------------------

struct CoverageLost : std::runtime_error {
    explicit CoverageLost(const std::string& w) : std::runtime_error(w) {}
};
struct IndexSetChanged : std::runtime_error {
    explicit IndexSetChanged(const std::string& w) : std::runtime_error(w) {}
};

inline GoodCoordinateSystem shrink_gcs(const GoodCoordinateSystem& g, const std::vector<BoxUnion>& spec) {
    GoodCoordinateSystem out = g;
    for (size_t i = 0; i < g.charts.size(); ++i) {
        out.charts[i] = restrict_chart(g.charts[i], spec[i]);  // checks invariance + subset
        // the seed label must survive; charts whose id is not an X label
        // (fiber-product charts) must keep a nonempty coverage instead
        bool had_seed = g.charts[i].covers(g.charts[i].id);
        if (had_seed && !out.charts[i].covers(g.charts[i].id))
            throw CoverageLost("shrink_gcs: chart " + g.charts[i].id + " lost its seed label");
        if (!had_seed && !g.charts[i].footprint.empty() && out.charts[i].footprint.empty())
            throw CoverageLost("shrink_gcs: chart " + g.charts[i].id + " lost its coverage");
    }
    // I must not change: previously intersecting coverages still intersect
    for (int a = 0; a < static_cast<int>(g.charts.size()); ++a)
        for (int b = 0; b < static_cast<int>(g.charts.size()); ++b)
            if (a != b && g.coverages_meet(a, b) && !out.coverages_meet(a, b))
                throw IndexSetChanged("shrink_gcs: coverage pair (" + g.charts[static_cast<size_t>(a)].id + "," +
                                      g.charts[static_cast<size_t>(b)].id + ") emptied");
    // restrict changes per Def. CCRESTRICTED
    for (auto& [key, gc] : out.changes) {
        int yi = out.index_of(key.first), xi = out.index_of(key.second);
        gc.cc.domain = intersect(intersect(gc.cc.domain, spec[static_cast<size_t>(yi)]),
                                 affine_preimage(gc.cc.base_map, spec[static_cast<size_t>(xi)]));
    }
    return out;
}

// --------------------------------------------------------------------------
// strong_shrinking_sequence: nested precompact shrinkings built by insetting
// boxes around the footprint zeros, margins decreasing geometrically. The
// per-coordinate half-width at step j is
//     min(margin / 2^{j-1}, clearance * (1/2 + 2^{-(j+1)}))
// so members nest precompactly and the intersection of the closures collapses
// onto the zero set.
// --------------------------------------------------------------------------

struct MarginTooLarge : std::runtime_error {
    explicit MarginTooLarge(const std::string& w) : std::runtime_error(w) {}
};

namespace gcs_detail {

inline BoxUnion zero_boxes(const KuranishiChart& c, const Rat& margin, int j) {
    BoxUnion out(c.dim());
    Rat mj = margin / rat_pow(Rat(2), static_cast<unsigned>(j - 1));
    for (const auto& fp : c.footprint) {
        for (const RatVec& z : c.group.orbit(fp.point)) {
            // clearance per coordinate: distance to the bounds of a box of the
            // base containing z (the most roomy one)
            Box best;
            std::optional<Rat> best_clear;
            for (const Box& b : c.base.boxes) {
                bool in = true;
                Rat cl;
                bool first = true;
                for (size_t i = 0; i < z.size(); ++i) {
                    if (!b[i].contains_open(z[i])) { in = false; break; }
                    Rat ci = std::min(b[i].lo ? Rat(z[i] - *b[i].lo) : Rat(1000000), b[i].hi ? Rat(*b[i].hi - z[i]) : Rat(1000000));
                    cl = first ? ci : std::min(cl, ci);
                    first = false;
                }
                if (in && (!best_clear || cl > *best_clear)) {
                    best = b;
                    best_clear = cl;
                }
            }
            if (!best_clear) throw MarginTooLarge("strong_shrinking_sequence: zero off the base");
            Box nb(z.size());
            for (size_t i = 0; i < z.size(); ++i) {
                Rat cl = std::min(best[i].lo ? Rat(z[i] - *best[i].lo) : Rat(1000000),
                                  best[i].hi ? Rat(*best[i].hi - z[i]) : Rat(1000000));
                Rat cap = cl * (Rat(1, 2) + Rat(1) / rat_pow(Rat(2), static_cast<unsigned>(j + 1)));
                Rat h = std::min(mj, cap);
                if (h <= 0) throw MarginTooLarge("strong_shrinking_sequence: no room around a zero");
                nb[i] = Ival{z[i] - h, z[i] + h};
            }
            out.boxes.push_back(nb);
        }
    }
    return out;
}

}  // namespace gcs_detail

inline std::vector<GoodCoordinateSystem> strong_shrinking_sequence(const GoodCoordinateSystem& g, int k,
                                                                   const Rat& margin) {
    for (const auto& c : g.charts)
        if (!bounded(c.base)) throw std::runtime_error("strong_shrinking_sequence: base unbounded");
    std::vector<GoodCoordinateSystem> seq;
    for (int j = 1; j <= k; ++j) {
        std::vector<BoxUnion> spec;
        for (const auto& c : g.charts) spec.push_back(gcs_detail::zero_boxes(c, margin, j));
        seq.push_back(shrink_gcs(g, spec));
    }
    // precompact nesting: closures of member j+1 sit inside member j, member 1
    // inside the ambient bases
    for (int j = 0; j < k; ++j)
        for (size_t i = 0; i < g.charts.size(); ++i) {
            const BoxUnion& outer = (j == 0) ? g.charts[i].base : seq[static_cast<size_t>(j - 1)].charts[i].base;
            if (!closure_subset(seq[static_cast<size_t>(j)].charts[i].base, outer))
                throw MarginTooLarge("strong_shrinking_sequence: member " + std::to_string(j + 1) + " not precompact");
        }
    // grid check of the collapse onto the zero set: every grid point of the
    // last member lies within margin/2^{k-1} of a footprint zero
    if (k >= 1) {
        Rat reach = margin / rat_pow(Rat(2), static_cast<unsigned>(k - 1));
        for (size_t i = 0; i < g.charts.size(); ++i) {
            const auto& c = seq.back().charts[i];
            Rat step = std::max(Rat(reach / 4), Rat(1, 64));
            for (const RatVec& p : grid_points(c.base, step)) {
                bool nearz = false;
                for (const auto& fp : g.charts[i].footprint)
                    for (const RatVec& z : g.charts[i].group.orbit(fp.point))
                        if (linf_dist(p, z) < reach) nearz = true;
                if (!nearz) throw MarginTooLarge("strong_shrinking_sequence: member k drifts off the zero set");
            }
        }
    }
    return seq;
}

// --------------------------------------------------------------------------
// strongly_intersecting_shrink: walk down a shrinking sequence until the
// probe finds no pair of charts whose bases meet in M(K)|_G while their
// coverages are disjoint in X.
// --------------------------------------------------------------------------

struct IterationBudgetExceeded : std::runtime_error {
    explicit IterationBudgetExceeded(const std::string& w) : std::runtime_error(w) {}
};

struct StronglyIntersectingResult {
    GoodCoordinateSystem gcs;
    int iterations = 0;  // 0 = input already passed
};

// probe: glue with the FULL presentation relation (chains may run through
// regions outside the current bases, per the definition of M(K)|_G), then
// demand that classes meeting two current bases imply intersecting coverages
inline std::optional<std::pair<int, int>> strongly_intersecting_witness(const GoodCoordinateSystem& g,
                                                                        const KuranishiPresentation& p,
                                                                        const Rat& grid_step) {
    GlueInput gi = p.glue_input();
    // seed the full identification with samples of the current bases at a
    // step fine enough for the current shrinking scale
    std::vector<std::vector<RatVec>> extra(gi.charts.size());
    std::vector<int> gcs_of_chart(gi.charts.size(), -1);
    for (size_t ci = 0; ci < gi.charts.size(); ++ci) {
        for (int a = 0; a < static_cast<int>(g.charts.size()); ++a)
            if (g.charts[static_cast<size_t>(a)].id == gi.charts[ci]->id) gcs_of_chart[ci] = a;
        if (gcs_of_chart[ci] >= 0) {
            const BoxUnion& cur = g.charts[static_cast<size_t>(gcs_of_chart[ci])].base;
            Rat step = std::min(grid_step, Rat(shortest_bounded_side(cur) / 4));
            extra[ci] = grid_points(cur, step);
        }
    }
    // close the seeds under change preimages so chains through regions
    // outside the current bases are realized on samples
    for (size_t pass = 0; pass < gi.charts.size(); ++pass) {
        bool grew = false;
        for (const CoordinateChange* cc : gi.changes) {
            int fi = gi.chart_index(cc->from_id), ti = gi.chart_index(cc->to_id);
            std::vector<RatVec> add;
            for (const RatVec& y : extra[static_cast<size_t>(ti)]) {
                auto x = cc->base_map.preimage_point(y);
                if (!x || !cc->domain.contains(*x)) continue;
                bool dup = false;
                for (const RatVec& e : extra[static_cast<size_t>(fi)])
                    if (e == *x) { dup = true; break; }
                if (!dup) add.push_back(*x);
            }
            if (!add.empty()) {
                grew = true;
                auto& dst = extra[static_cast<size_t>(fi)];
                dst.insert(dst.end(), add.begin(), add.end());
            }
        }
        if (!grew) break;
    }
    IdentificationSpace id(gi, grid_step, extra);
    for (int r : id.class_representatives()) {
        const auto& mem = id.class_members(static_cast<size_t>(r));
        // the GCS charts whose current base this class meets
        std::vector<int> hits;
        for (size_t m : mem) {
            int a = gcs_of_chart[static_cast<size_t>(id.sample(m).chart)];
            if (a < 0) continue;
            if (g.charts[static_cast<size_t>(a)].base.contains(id.sample(m).x)) hits.push_back(a);
        }
        std::sort(hits.begin(), hits.end());
        hits.erase(std::unique(hits.begin(), hits.end()), hits.end());
        for (size_t i = 0; i < hits.size(); ++i)
            for (size_t j = i + 1; j < hits.size(); ++j)
                if (!g.coverages_meet(hits[i], hits[j])) return std::make_pair(hits[i], hits[j]);
    }
    return std::nullopt;
}

inline StronglyIntersectingResult strongly_intersecting_shrink(const GoodCoordinateSystem& g,
                                                               const KuranishiPresentation& p, const Rat& grid_step,
                                                               int max_iters, const Rat& margin = Rat(1, 4)) {
    StronglyIntersectingResult res;
    if (!strongly_intersecting_witness(g, p, grid_step)) {
        res.gcs = g;
        res.iterations = 0;
        return res;
    }
    auto seq = strong_shrinking_sequence(g, max_iters, margin);
    for (int j = 0; j < max_iters; ++j) {
        if (!strongly_intersecting_witness(seq[static_cast<size_t>(j)], p, grid_step)) {
            res.gcs = seq[static_cast<size_t>(j)];
            res.iterations = j + 1;
            return res;
        }
    }
    auto w = strongly_intersecting_witness(seq.back(), p, grid_step);
    throw IterationBudgetExceeded("strongly_intersecting_shrink: witness persists at pair (" +
                                  g.charts[static_cast<size_t>(w->first)].id + "," +
                                  g.charts[static_cast<size_t>(w->second)].id + ")");
}

// closure of the change table under composition (Corollary after COORDEXIST):
// whenever two listed changes compose with nonempty domain, the direct change
// is listed too
inline bool changes_closed_under_composition(const GoodCoordinateSystem& g) {
    for (const auto& [k1, c1] : g.changes)
        for (const auto& [k2, c2] : g.changes) {
            if (c2.cc.to_id != c1.cc.from_id) continue;
            BoxUnion dom = intersect(c2.cc.domain, affine_preimage(c2.cc.base_map, c1.cc.domain));
            if (dom.empty()) continue;
            if (c2.cc.from_id == c1.cc.to_id) continue;  // composes to a self-change
            if (!g.change(c2.cc.from_id, c1.cc.to_id)) return false;
        }
    return true;
}

// --------------------------------------------------------------------------
// Grouping by a total order partition.
// --------------------------------------------------------------------------

struct MixedDimensionBlock : std::runtime_error {
    explicit MixedDimensionBlock(const std::string& w) : std::runtime_error(w) {}
};
struct OrderNotInduced : std::runtime_error {
    explicit OrderNotInduced(const std::string& w) : std::runtime_error(w) {}
};

struct OrderPartition {
    std::vector<std::vector<std::string>> blocks;  // chart ids per block, in block order
};

struct GroupedGcs {
    const GoodCoordinateSystem* base = nullptr;
    OrderPartition part;
    // per ordered block pair (i,j), the component changes realizing the
    // block-level coordinate change U_{alpha beta} = ⊔_y ∪_x U_xy
    std::map<std::pair<int, int>, std::vector<const GcsChange*>> block_changes;
};

inline GroupedGcs group_by_partition(const GoodCoordinateSystem& g, const OrderPartition& part) {
    GroupedGcs out;
    out.base = &g;
    out.part = part;
    // blocks are dimension-constant
    for (const auto& blk : part.blocks) {
        if (blk.empty()) throw MixedDimensionBlock("group_by_partition: empty block");
        int d = g.charts[static_cast<size_t>(g.index_of(blk[0]))].fiber_rank;
        for (const auto& id : blk)
            if (g.charts[static_cast<size_t>(g.index_of(id))].fiber_rank != d)
                throw MixedDimensionBlock("group_by_partition: block mixes bundle dimensions");
    }
    // partition covers the index set exactly once
    {
        std::set<std::string> seen;
        for (const auto& blk : part.blocks)
            for (const auto& id : blk)
                if (!seen.insert(id).second) throw OrderNotInduced("group_by_partition: duplicated index");
        if (seen.size() != g.charts.size()) throw OrderNotInduced("group_by_partition: partition misses indices");
    }
    // induced order well-defined: cross-block relations must be uniform
    int nb = static_cast<int>(part.blocks.size());
    for (int i = 0; i < nb; ++i)
        for (int j = 0; j < nb; ++j) {
            if (i == j) continue;
            std::optional<bool> rel;
            for (const auto& yi : part.blocks[static_cast<size_t>(i)])
                for (const auto& xj : part.blocks[static_cast<size_t>(j)]) {
                    bool r = g.order_leq(g.index_of(yi), g.index_of(xj));
                    if (!rel) rel = r;
                    else if (*rel != r)
                        throw OrderNotInduced("group_by_partition: order not constant across blocks " +
                                              std::to_string(i) + "," + std::to_string(j));
                }
            if (i < j && !(*rel)) {
                // blocks must be listed in the induced order
                throw OrderNotInduced("group_by_partition: block list conflicts with the induced order");
            }
        }
    // block-level changes assembled from the component changes
    for (int i = 0; i < nb; ++i)
        for (int j = 0; j < nb; ++j) {
            if (i == j) continue;
            std::vector<const GcsChange*> comps;
            for (const auto& yi : part.blocks[static_cast<size_t>(i)])
                for (const auto& xj : part.blocks[static_cast<size_t>(j)])
                    if (const GcsChange* gc = g.change(yi, xj)) comps.push_back(gc);
            if (!comps.empty()) out.block_changes[{i, j}] = std::move(comps);
        }
    return out;
}

inline OrderPartition partition_singletons(const GoodCoordinateSystem& g) {
    OrderPartition p;
    std::vector<int> order(g.charts.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return g.order_leq(a, b) && !g.order_leq(b, a) ? true
                                                               : g.order_leq(b, a) && !g.order_leq(a, b) ? false
                                                               : a < b; });
    for (int i : order) p.blocks.push_back({g.charts[static_cast<size_t>(i)].id});
    return p;
}

inline OrderPartition partition_by_dimension(const GoodCoordinateSystem& g) {
    std::map<int, std::vector<std::string>> bydim;
    for (const auto& c : g.charts) bydim[c.fiber_rank].push_back(c.id);
    OrderPartition p;
    for (auto& [d, ids] : bydim) {
        std::sort(ids.begin(), ids.end());
        p.blocks.push_back(ids);
    }
    return p;
}

// --------------------------------------------------------------------------
// induce_kuranishi: per label, the smallest covering index provides the chart.
// --------------------------------------------------------------------------

inline KuranishiPresentation induce_kuranishi(const GoodCoordinateSystem& g) {
    KuranishiPresentation p;
    p.x = g.x;
    // smallest covering chart per label
    std::map<std::string, int> owner;
    for (const auto& l : g.x.labels) {
        int best = -1;
        for (int i = 0; i < static_cast<int>(g.charts.size()); ++i) {
            if (!g.charts[static_cast<size_t>(i)].covers(l)) continue;
            if (best < 0 || (g.order_leq(i, best) && !g.order_leq(best, i)) ||
                (g.order_leq(i, best) && g.order_leq(best, i) && i < best))
                best = i;
        }
        if (best < 0) throw std::runtime_error("induce_kuranishi: label uncovered");
        owner[l] = best;
    }
    // chart per label: the full owning chart, rebased at the label
    for (const auto& l : g.x.labels) {
        KuranishiChart c = g.charts[static_cast<size_t>(owner[l])];
        c.id = l;
        p.charts.push_back(std::move(c));
    }
    // changes: for labels q != p with q covered by p's chart, restrict the
    // GCS change owner(q) -> owner(p); smallest-ownership makes the direction
    // consistent with the order
    for (const auto& q : g.x.labels)
        for (const auto& pl : g.x.labels) {
            if (q == pl) continue;
            const KuranishiChart& cp = p.chart(pl);
            if (!cp.covers(q)) continue;
            int oq = owner[q], op = owner[pl];
            CoordinateChange cc;
            if (oq == op) {
                cc.from_id = q;
                cc.to_id = pl;
                cc.domain = g.charts[static_cast<size_t>(oq)].base;
                cc.base_map = Affine::identity(g.charts[static_cast<size_t>(oq)].dim());
                cc.bundle_map = Mat::identity(g.charts[static_cast<size_t>(oq)].fiber_rank);
                for (int gi = 0; gi < g.charts[static_cast<size_t>(oq)].group.size(); ++gi) cc.group_hom.push_back(gi);
            } else {
                const GcsChange* gc = g.change(g.charts[static_cast<size_t>(oq)].id, g.charts[static_cast<size_t>(op)].id);
                if (!gc)
                    throw std::runtime_error("induce_kuranishi: missing GCS change for labels " + q + "->" + pl);
                cc = gc->cc;
                cc.from_id = q;
                cc.to_id = pl;
            }
            p.changes.push_back(std::move(cc));
        }
    return p;
}

}  // namespace kur

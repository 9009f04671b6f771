#pragma once

// The identification space as a sampled quotient: a union-find over rational
// grid samples of all chart bases, glued by group elements and coordinate
// changes. All gluing edges are exact (affine images of rational points are
// rational and get added as samples), so FAIL witnesses certify exactly.
//
// On top of it: the maximal-domain recomputation behind the maximality
// condition, interior/jumping classification of classes relative to a
// shrinking, and the Hausdorffness probe in the relative topology.
//
// Probe soundness at a fixed resolution: two distinct classes that share a
// chart are separated by that chart's own topology, so candidate
// non-Hausdorff pairs are exactly the chart-disjoint class pairs; such a
// pair FAILs when third classes straddle both of its charts at every delta
// of the schedule (the D_{x+}-carved neighborhoods of the relative
// topology).

#include "kuranishi/chart.hpp"

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace kur {

struct TopologyProbeConfig {
    Rat grid_step = Rat(1, 20);
    std::vector<Rat> delta_schedule = {Rat(1, 2), Rat(1, 4), Rat(1, 8), Rat(1, 16)};
    int pair_budget = 200000;

    void check() const {
        for (size_t i = 1; i < delta_schedule.size(); ++i)
            if (!(delta_schedule[i] < delta_schedule[i - 1]) || delta_schedule[i] <= 0)
                throw std::invalid_argument("TopologyProbeConfig: schedule must be strictly decreasing, positive");
    }
};

namespace detail {

struct PtKey {
    std::vector<std::pair<std::int64_t, std::int64_t>> nd;
    bool operator==(const PtKey& o) const { return nd == o.nd; }
};

struct PtKeyHash {
    size_t operator()(const PtKey& k) const {
        size_t h = 1469598103934665603ull;
        for (auto& [n, d] : k.nd) {
            h = (h ^ static_cast<size_t>(n)) * 1099511628211ull;
            h = (h ^ static_cast<size_t>(d)) * 1099511628211ull;
        }
        return h;
    }
};

inline PtKey key_of(const RatVec& v) {
    PtKey k;
    k.nd.reserve(v.size());
    for (const Rat& r : v) {
        BigInt n = numerator(r), d = denominator(r);
        if (n < std::numeric_limits<std::int64_t>::min() || n > std::numeric_limits<std::int64_t>::max() ||
            d > std::numeric_limits<std::int64_t>::max())
            throw std::runtime_error("identification: coordinate out of the supported desk-scale range");
        k.nd.emplace_back(n.convert_to<std::int64_t>(), d.convert_to<std::int64_t>());
    }
    return k;
}

}  // namespace detail

// Input shape shared by presentations and good coordinate systems: a chart
// list plus directed coordinate changes between charts (ids resolve into the
// list). Self-changes are implicit identities and not stored.
struct GlueInput {
    std::vector<const KuranishiChart*> charts;
    std::vector<const CoordinateChange*> changes;

    int chart_index(const std::string& id) const {
        for (size_t i = 0; i < charts.size(); ++i)
            if (charts[i]->id == id) return static_cast<int>(i);
        throw std::runtime_error("GlueInput: unknown chart id '" + id + "'");
    }
};

class IdentificationSpace {
public:
    struct Sample {
        int chart = -1;
        RatVec x;
    };

    // Builds the sampled quotient. Extra per-chart points (footprints, probe
    // targets) may be passed in; images under changes are added as exact
    // samples so the glued relation closes without tolerance matching.
    IdentificationSpace(const GlueInput& in, const Rat& grid_step,
                        const std::vector<std::vector<RatVec>>& extra = {})
        : in_(in), step_(grid_step) {
        index_.resize(in.charts.size());
        for (size_t ci = 0; ci < in.charts.size(); ++ci) {
            const KuranishiChart& c = *in.charts[ci];
            for (const RatVec& p : grid_points(c.base, grid_step)) add_point(static_cast<int>(ci), p);
            for (const auto& fp : c.footprint) add_point(static_cast<int>(ci), fp.point);
            if (ci < extra.size())
                for (const RatVec& p : extra[ci])
                    if (c.base.contains(p)) add_point(static_cast<int>(ci), p);
        }
        // worklist closure: orbits and change-images of every sample
        size_t head = 0;
        while (head < pts_.size()) {
            size_t i = head++;
            glue_from(i);
        }
        canonicalize();
    }

    size_t size() const { return pts_.size(); }
    const Sample& sample(size_t i) const { return pts_[i]; }

    int find(size_t i) const {
        int r = parent_[i];
        while (r != parent_[static_cast<size_t>(r)]) r = parent_[static_cast<size_t>(r)];
        return r;
    }

    std::optional<size_t> lookup(int chart, const RatVec& p) const {
        auto it = index_[static_cast<size_t>(chart)].find(detail::key_of(p));
        if (it == index_[static_cast<size_t>(chart)].end()) return std::nullopt;
        return it->second;
    }

    bool same_class(size_t a, size_t b) const { return find(a) == find(b); }

    // All samples in the class of i (by scan over the precomputed buckets).
    const std::vector<size_t>& class_members(size_t i) const { return members_.at(static_cast<size_t>(find(i))); }

    std::vector<int> class_charts(size_t i) const {
        std::vector<int> cs;
        for (size_t m : class_members(i)) cs.push_back(pts_[m].chart);
        std::sort(cs.begin(), cs.end());
        cs.erase(std::unique(cs.begin(), cs.end()), cs.end());
        return cs;
    }

    std::vector<size_t> samples_of_chart(int chart) const {
        std::vector<size_t> out;
        for (size_t i = 0; i < pts_.size(); ++i)
            if (pts_[i].chart == chart) out.push_back(i);
        return out;
    }

    std::vector<int> class_representatives() const {
        std::vector<int> reps;
        for (auto& [r, _] : members_) reps.push_back(static_cast<int>(r));
        std::sort(reps.begin(), reps.end());
        return reps;
    }

    // CSV export: chart_id, coords..., class_id, flag
    void export_csv(std::ostream& os, const std::vector<std::string>& flags = {}) const {
        int dimmax = 0;
        for (const auto* c : in_.charts) dimmax = std::max(dimmax, c->base.dim);
        os << "chart_id";
        for (int i = 0; i < dimmax; ++i) os << ",x" << i;
        os << ",class_id,flag\n";
        for (size_t i = 0; i < pts_.size(); ++i) {
            os << in_.charts[static_cast<size_t>(pts_[i].chart)]->id;
            for (int k = 0; k < dimmax; ++k)
                os << "," << (k < static_cast<int>(pts_[i].x.size()) ? rat_str(pts_[i].x[static_cast<size_t>(k)]) : "");
            os << "," << find(i) << "," << (i < flags.size() ? flags[i] : "") << "\n";
        }
    }

private:
    void add_point(int chart, const RatVec& p) {
        auto key = detail::key_of(p);
        auto [it, fresh] = index_[static_cast<size_t>(chart)].emplace(key, pts_.size());
        if (!fresh) return;
        pts_.push_back({chart, p});
        parent_.push_back(static_cast<int>(pts_.size()) - 1);
    }

    void unite(size_t a, size_t b) {
        int ra = find(a), rb = find(b);
        if (ra == rb) return;
        // canonical representative: lexicographically smallest (chart, coords)
        if (lex_less(static_cast<size_t>(rb), static_cast<size_t>(ra))) std::swap(ra, rb);
        parent_[static_cast<size_t>(rb)] = ra;
    }

    bool lex_less(size_t a, size_t b) const {
        if (pts_[a].chart != pts_[b].chart) return pts_[a].chart < pts_[b].chart;
        for (size_t i = 0; i < pts_[a].x.size(); ++i) {
            if (pts_[a].x[i] < pts_[b].x[i]) return true;
            if (pts_[b].x[i] < pts_[a].x[i]) return false;
        }
        return false;
    }

    void glue_from(size_t i) {
        int ci = pts_[i].chart;
        const KuranishiChart& c = *in_.charts[static_cast<size_t>(ci)];
        for (const SignedPerm& g : c.group.base) {
            if (g.is_identity()) continue;
            RatVec gp = g.apply(pts_[i].x);
            if (!c.base.contains(gp)) continue;
            size_t before = pts_.size();
            add_point(ci, gp);
            size_t j = *lookup(ci, gp);
            unite(i, j);
            (void)before;
        }
        for (const CoordinateChange* cc : in_.changes) {
            if (in_.chart_index(cc->from_id) != ci) continue;
            if (!cc->domain.contains(pts_[i].x)) continue;
            int tj = in_.chart_index(cc->to_id);
            RatVec img = cc->base_map.apply(pts_[i].x);
            if (!in_.charts[static_cast<size_t>(tj)]->base.contains(img)) continue;
            add_point(tj, img);
            unite(i, *lookup(tj, img));
        }
    }

    void canonicalize() {
        // path-compress onto lexicographic minima, then bucket members
        for (size_t i = 0; i < pts_.size(); ++i) {
            int r = find(i);
            size_t m = static_cast<size_t>(r);
            // representative = lexicographic min of the class
            // (ensured incrementally by unite; compress now)
            parent_[i] = static_cast<int>(m);
        }
        members_.clear();
        for (size_t i = 0; i < pts_.size(); ++i) members_[static_cast<size_t>(find(i))].push_back(i);
    }

    GlueInput in_;
    Rat step_;
    std::vector<Sample> pts_;
    std::vector<int> parent_;
    std::vector<std::unordered_map<detail::PtKey, size_t, detail::PtKeyHash>> index_;
    std::map<size_t, std::vector<size_t>> members_;
};

// --------------------------------------------------------------------------
// Maximal domain of the coordinate change (q_index -> p_index) per the
// equivalent formulation of the maximality condition: the samples of U_q
// whose class meets chart p.
// --------------------------------------------------------------------------

struct MaximalDomainReport {
    std::vector<RatVec> computed;        // sampled t_q^{-1}(t_q(U_q) ∩ t_p(U_p))
    std::vector<RatVec> missing_from_declared;  // computed \ declared
    std::vector<RatVec> declared_only;          // declared-domain samples not recomputed
    bool equals_declared() const { return missing_from_declared.empty() && declared_only.empty(); }
};

inline MaximalDomainReport maximal_domain(const IdentificationSpace& id, const GlueInput& in, int q_index,
                                          int p_index, const BoxUnion* declared) {
    MaximalDomainReport rep;
    for (size_t i : id.samples_of_chart(q_index)) {
        bool meets_p = false;
        for (size_t m : id.class_members(i))
            if (id.sample(m).chart == p_index) { meets_p = true; break; }
        if (q_index == p_index) meets_p = true;  // V_pp = V_p
        if (!meets_p) continue;
        rep.computed.push_back(id.sample(i).x);
        if (declared && !declared->contains(id.sample(i).x)) rep.missing_from_declared.push_back(id.sample(i).x);
    }
    if (declared) {
        for (size_t i : id.samples_of_chart(q_index)) {
            if (!declared->contains(id.sample(i).x)) continue;
            bool meets_p = (q_index == p_index);
            for (size_t m : id.class_members(i))
                if (id.sample(m).chart == p_index) { meets_p = true; break; }
            if (!meets_p) rep.declared_only.push_back(id.sample(i).x);
        }
    }
    (void)in;
    return rep;
}

// --------------------------------------------------------------------------
// Interior / jumping classification of a class of the shrunken system g'
// relative to the ambient g: i_z from open membership in g' bases, j_z from
// closure membership taken in the ambient bases.
// --------------------------------------------------------------------------

enum class PointKind { INTERIOR, JUMPING };

struct ClassNotInShrinking : std::runtime_error {
    explicit ClassNotInShrinking(const std::string& w) : std::runtime_error(w) {}
};

// dims[i] = bundle dimension of chart i (the order-by-dimension proxy).
inline PointKind classify_point(const IdentificationSpace& ambient_id, const GlueInput& ambient,
                                const std::vector<BoxUnion>& shrunken_bases, const std::vector<int>& dims,
                                int chart, const RatVec& point) {
    auto sid = ambient_id.lookup(chart, point);
    if (!sid) throw ClassNotInShrinking("classify_point: point is not a sample of the ambient identification");
    if (!shrunken_bases[static_cast<size_t>(chart)].contains(point))
        throw ClassNotInShrinking("classify_point: point escaped the shrinking");

    int i_z = -1, j_z = -1;
    for (size_t m : ambient_id.class_members(*sid)) {
        int c = ambient_id.sample(m).chart;
        const RatVec& x = ambient_id.sample(m).x;
        if (shrunken_bases[static_cast<size_t>(c)].contains(x)) i_z = std::max(i_z, dims[static_cast<size_t>(c)]);
        if (shrunken_bases[static_cast<size_t>(c)].closure_contains(x) &&
            ambient.charts[static_cast<size_t>(c)]->base.contains(x))
            j_z = std::max(j_z, dims[static_cast<size_t>(c)]);
    }
    if (i_z < 0) throw ClassNotInShrinking("classify_point: class not in the shrinking");
    return (i_z < j_z) ? PointKind::JUMPING : PointKind::INTERIOR;
}

// --------------------------------------------------------------------------
// Hausdorff probe.
// --------------------------------------------------------------------------

struct HausdorffWitness {
    int chart1 = -1, chart2 = -1;
    RatVec point1, point2;                      // the non-separable pair
    std::vector<std::pair<RatVec, RatVec>> straddles;  // per delta: straddling members
};

struct HausdorffReport {
    bool pass = true;
    Rat grid_step;
    std::optional<HausdorffWitness> witness;
    int pairs_examined = 0;
};

struct PairBudgetExceeded : std::runtime_error {
    explicit PairBudgetExceeded(const std::string& w) : std::runtime_error(w) {}
};

// `order_leq(a,b)` gives the total order of the system; `declared_domain(y,x)`
// returns the declared change domain for y<=x pairs with a change (used for
// the D carving), or nullptr.
template <typename LeqFn, typename DomFn>
inline HausdorffReport hausdorff_probe(const GlueInput& shrunk, const std::vector<BoxUnion>& shrunk_bases,
                                       const TopologyProbeConfig& cfg, LeqFn&& order_leq, DomFn&& declared_domain) {
    cfg.check();
    HausdorffReport rep;
    rep.grid_step = cfg.grid_step;

    // resolution floor: below two grid steps no off-class witness can exist
    std::vector<Rat> schedule = cfg.delta_schedule;
    for (Rat& d : schedule) d = std::max(d, Rat(2 * cfg.grid_step));
    schedule.erase(std::unique(schedule.begin(), schedule.end()), schedule.end());

    IdentificationSpace id(shrunk, cfg.grid_step);
    const int ncharts = static_cast<int>(shrunk.charts.size());

    // D-carved regions: chart base minus closures of higher-chart change domains
    std::vector<BoxUnion> carved;
    for (int c = 0; c < ncharts; ++c) {
        BoxUnion d = shrunk_bases[static_cast<size_t>(c)];
        for (int y = 0; y < ncharts; ++y) {
            if (y == c || !order_leq(c, y) || order_leq(y, c)) continue;  // strictly higher only
            if (const BoxUnion* dom = declared_domain(c, y)) d = subtract_closed(d, *dom);
        }
        carved.push_back(d);
    }

    // cross-chart gluing edges: (sample in chart a) ~ (sample in chart b)
    struct Edge {
        size_t a, b;
    };
    std::vector<Edge> edges;
    for (int r : id.class_representatives()) {
        const auto& mem = id.class_members(static_cast<size_t>(r));
        for (size_t i = 0; i < mem.size(); ++i)
            for (size_t j = i + 1; j < mem.size(); ++j)
                if (id.sample(mem[i]).chart != id.sample(mem[j]).chart) edges.push_back({mem[i], mem[j]});
    }

    const Rat dmin = schedule.back();
    auto near = [&](const RatVec& a, const RatVec& b, const Rat& d) { return linf_dist(a, b) < d; };

    // candidate centers near edge endpoints whose class misses the opposite chart
    std::set<std::pair<size_t, size_t>> seen;
    for (const Edge& e : edges) {
        for (int side = 0; side < 2; ++side) {
            size_t ea = side ? e.b : e.a;
            size_t eb = side ? e.a : e.b;
            int x1 = id.sample(ea).chart, x2 = id.sample(eb).chart;
            for (size_t u1 : id.samples_of_chart(x1)) {
                if (!near(id.sample(u1).x, id.sample(ea).x, dmin)) continue;
                auto cs1 = id.class_charts(u1);
                if (std::find(cs1.begin(), cs1.end(), x2) != cs1.end()) continue;  // shares chart x2: separated there
                for (size_t u2 : id.samples_of_chart(x2)) {
                    if (!near(id.sample(u2).x, id.sample(eb).x, dmin)) continue;
                    if (id.same_class(u1, u2)) continue;
                    auto cs2 = id.class_charts(u2);
                    // candidate pairs share no chart at all
                    bool common = false;
                    for (int c : cs1)
                        if (std::find(cs2.begin(), cs2.end(), c) != cs2.end()) common = true;
                    if (common) continue;
                    auto pr = std::make_pair(std::min(static_cast<size_t>(id.find(u1)), static_cast<size_t>(id.find(u2))),
                                             std::max(static_cast<size_t>(id.find(u1)), static_cast<size_t>(id.find(u2))));
                    if (!seen.insert(pr).second) continue;
                    if (++rep.pairs_examined > cfg.pair_budget)
                        throw PairBudgetExceeded("hausdorff_probe: pair budget exceeded");

                    // center-side carving: skip the carve when the center itself
                    // sits outside its carved region (jumping-boundary points
                    // have no carved basis)
                    bool carve1 = carved[static_cast<size_t>(x1)].contains(id.sample(u1).x);
                    bool carve2 = carved[static_cast<size_t>(x2)].contains(id.sample(u2).x);

                    std::vector<std::pair<RatVec, RatVec>> strads;
                    bool all_levels = true;
                    for (const Rat& d : schedule) {
                        bool found = false;
                        for (const Edge& w : edges) {
                            for (int ws = 0; ws < 2 && !found; ++ws) {
                                size_t wa = ws ? w.b : w.a;
                                size_t wb = ws ? w.a : w.b;
                                if (id.sample(wa).chart != x1 || id.sample(wb).chart != x2) continue;
                                if (id.same_class(wa, u1) || id.same_class(wa, u2)) continue;
                                if (!near(id.sample(wa).x, id.sample(u1).x, d)) continue;
                                if (!near(id.sample(wb).x, id.sample(u2).x, d)) continue;
                                if (carve1 && !carved[static_cast<size_t>(x1)].contains(id.sample(wa).x)) continue;
                                if (carve2 && !carved[static_cast<size_t>(x2)].contains(id.sample(wb).x)) continue;
                                strads.emplace_back(id.sample(wa).x, id.sample(wb).x);
                                found = true;
                            }
                            if (found) break;
                        }
                        if (!found) { all_levels = false; break; }
                    }
                    if (all_levels) {
                        rep.pass = false;
                        HausdorffWitness wit;
                        wit.chart1 = x1;
                        wit.chart2 = x2;
                        wit.point1 = id.sample(u1).x;
                        wit.point2 = id.sample(u2).x;
                        wit.straddles = strads;
                        rep.witness = wit;
                        return rep;
                    }
                }
            }
        }
    }
    return rep;
}

}  // namespace kur

#pragma once

// Kuranishi charts and coordinate changes in the affine class, and the local
// checks: exact evaluation, jacobians, equivariance, chart restriction,
// composition with group witnesses, and the tangent bundle condition.

#include "kuranishi/box.hpp"
#include "kuranishi/group.hpp"
#include "kuranishi/newton.hpp"
#include "kuranishi/poly.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace kur {

struct FootprintPoint {
    std::string label;
    RatVec point;
};

struct KuranishiChart {
    std::string id;  // doubles as the base label of the chart
    BoxUnion base;
    int fiber_rank = 0;
    GroupAction group;
    PolySection section;
    std::vector<FootprintPoint> footprint;

    int dim() const { return base.dim; }

    std::vector<std::string> coverage() const {
        std::vector<std::string> labels;
        for (const auto& fp : footprint) labels.push_back(fp.label);
        std::sort(labels.begin(), labels.end());
        labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
        return labels;
    }

    bool covers(const std::string& label) const {
        for (const auto& fp : footprint)
            if (fp.label == label) return true;
        return false;
    }

    std::optional<RatVec> representative(const std::string& label) const {
        for (const auto& fp : footprint)
            if (fp.label == label) return fp.point;
        return std::nullopt;
    }
};

struct PointOutsideBase : std::runtime_error {
    explicit PointOutsideBase(const std::string& what) : std::runtime_error(what) {}
};

inline RatVec eval_section(const KuranishiChart& chart, const RatVec& point) {
    if (!chart.base.contains(point))
        throw PointOutsideBase("eval_section: point " + vec_str(point) + " outside base of chart " + chart.id);
    return chart.section.eval(point);
}

inline Mat jacobian(const PolySection& section, const RatVec& point) { return section.jacobian(point); }

// --------------------------------------------------------------------------
// Equivariance. The symbolic check (per generator, as polynomial identities)
// is the authority; the grid pass cross-checks the evaluator against it.
// --------------------------------------------------------------------------

struct EquivarianceWitness {
    int group_element = -1;
    RatVec point;
    RatVec mismatch;
};

struct EquivarianceReport {
    bool pass = true;
    std::optional<EquivarianceWitness> witness;
    Rat grid_step;
};

inline EquivarianceReport check_equivariance(const KuranishiChart& chart, const Rat& grid_step) {
    EquivarianceReport rep;
    rep.grid_step = grid_step;
    for (int gi = 0; gi < chart.group.size(); ++gi) {
        const SignedPerm& g = chart.group.base[static_cast<size_t>(gi)];
        const SignedPerm& gf = chart.group.fiber[static_cast<size_t>(gi)];
        PolySection lhs = chart.section.compose_affine(g.affine());
        PolySection rhs = chart.section.postcompose(gf.matrix());
        if (!(lhs == rhs)) {
            rep.pass = false;
            // exhibit a concrete witness point for the report
            for (const RatVec& p : grid_points(chart.base, grid_step)) {
                RatVec a = lhs.eval(p), b = rhs.eval(p);
                if (a != b) {
                    rep.witness = EquivarianceWitness{gi, p, a - b};
                    break;
                }
            }
            if (!rep.witness) rep.witness = EquivarianceWitness{gi, some_point(chart.base), {}};
            return rep;
        }
    }
    // sanity cross-check of the evaluator on the grid (must agree with the
    // symbolic verdict; a failure here is an implementation bug)
    for (const RatVec& p : grid_points(chart.base, grid_step)) {
        for (int gi = 0; gi < chart.group.size(); ++gi) {
            RatVec gp = chart.group.base[static_cast<size_t>(gi)].apply(p);
            if (!chart.base.contains(gp)) continue;
            RatVec a = chart.section.eval(gp);
            RatVec b = chart.group.fiber[static_cast<size_t>(gi)].apply(chart.section.eval(p));
            if (a != b) throw std::runtime_error("check_equivariance: grid disagrees with symbolic verdict");
        }
    }
    return rep;
}

// Chart well-formedness used by presentation validation: group table closed,
// base invariant, section equivariant, footprint points are exact zeros in
// distinct orbits.
inline void validate_chart(const KuranishiChart& chart, const Rat& grid_step) {
    if (chart.section.base_dim != chart.dim() || chart.section.fiber_rank != chart.fiber_rank)
        throw std::runtime_error("chart " + chart.id + ": section arity mismatch");
    GroupAction g = chart.group;
    g.check_and_build_table();
    if (!chart.group.preserves(chart.base)) throw std::runtime_error("chart " + chart.id + ": base not group-invariant");
    auto eq = check_equivariance(chart, grid_step);
    if (!eq.pass) throw std::runtime_error("chart " + chart.id + ": section not equivariant");
    for (const auto& fp : chart.footprint) {
        if (!chart.base.contains(fp.point))
            throw std::runtime_error("chart " + chart.id + ": footprint point outside base");
        RatVec v = chart.section.eval(fp.point);
        for (const Rat& c : v)
            if (c != 0) throw std::runtime_error("chart " + chart.id + ": footprint representative of '" + fp.label +
                                                 "' is not an exact zero");
    }
    for (size_t i = 0; i < chart.footprint.size(); ++i)
        for (size_t j = i + 1; j < chart.footprint.size(); ++j) {
            if (chart.footprint[i].label == chart.footprint[j].label) continue;
            if (chart.group.same_orbit(chart.footprint[i].point, chart.footprint[j].point))
                throw std::runtime_error("chart " + chart.id + ": distinct labels share a group orbit");
        }
}

// --------------------------------------------------------------------------
// Coordinate changes.
// --------------------------------------------------------------------------

struct CoordinateChange {
    std::string from_id, to_id;
    BoxUnion domain;        // subset of the source base
    Affine base_map;        // x |-> A x + b, injective, monomial in practice
    Mat bundle_map;         // base-constant, fiberwise injective
    std::vector<int> group_hom;  // source element index -> target element index

    bool trivial_hom() const { return group_hom.empty(); }
};

struct RankDeficientEmbedding : std::runtime_error {
    explicit RankDeficientEmbedding(const std::string& what) : std::runtime_error(what) {}
};

// Full validity of a pre-coordinate change: injectivity, exact intertwining
// (as a polynomial identity; equivalent to the sample-grid check since the
// domain is open), equivariance on generators, footprint label agreement.
inline void validate_cc(const CoordinateChange& cc, const KuranishiChart& src, const KuranishiChart& tgt) {
    if (rank(cc.base_map.A) != cc.base_map.A.cols())
        throw RankDeficientEmbedding("change " + cc.from_id + "->" + cc.to_id + ": base map not injective");
    if (rank(cc.bundle_map) != cc.bundle_map.cols())
        throw std::runtime_error("change " + cc.from_id + "->" + cc.to_id + ": bundle map not injective");
    if (!subset(cc.domain, src.base))
        throw std::runtime_error("change " + cc.from_id + "->" + cc.to_id + ": domain not inside source base");

    PolySection lhs = src.section.postcompose(cc.bundle_map);
    PolySection rhs = tgt.section.compose_affine(cc.base_map);
    if (!(lhs == rhs))
        throw std::runtime_error("change " + cc.from_id + "->" + cc.to_id + ": sections do not intertwine");

    // equivariance: base_map ∘ g = hom(g) ∘ base_map (and the fiber analogue)
    for (int gi = 0; gi < src.group.size(); ++gi) {
        int hi = cc.trivial_hom() ? 0 : cc.group_hom[static_cast<size_t>(gi)];
        if (hi < 0 || hi >= tgt.group.size())
            throw std::runtime_error("change " + cc.from_id + "->" + cc.to_id + ": group_hom out of range");
        Affine left = cc.base_map.compose(src.group.base[static_cast<size_t>(gi)].affine());
        Affine right = tgt.group.base[static_cast<size_t>(hi)].affine().compose(cc.base_map);
        if (!(left == right))
            throw std::runtime_error("change " + cc.from_id + "->" + cc.to_id + ": base map not equivariant");
        Mat fl = cc.bundle_map * src.group.fiber[static_cast<size_t>(gi)].matrix();
        Mat fr = tgt.group.fiber[static_cast<size_t>(hi)].matrix() * cc.bundle_map;
        if (!(fl == fr))
            throw std::runtime_error("change " + cc.from_id + "->" + cc.to_id + ": bundle map not equivariant");
    }

    // footprint labels carry over on the domain
    for (const auto& fp : src.footprint) {
        if (!cc.domain.contains(fp.point)) continue;
        RatVec img = cc.base_map.apply(fp.point);
        auto rep = tgt.representative(fp.label);
        if (!rep)
            throw std::runtime_error("change " + cc.from_id + "->" + cc.to_id + ": label '" + fp.label +
                                     "' missing in target footprint");
        if (!tgt.group.same_orbit(img, *rep))
            throw std::runtime_error("change " + cc.from_id + "->" + cc.to_id + ": label '" + fp.label +
                                     "' maps off its target orbit");
    }
}

struct NotInvariant : std::runtime_error {
    explicit NotInvariant(const std::string& w) : std::runtime_error(w) {}
};
struct NotSubset : std::runtime_error {
    explicit NotSubset(const std::string& w) : std::runtime_error(w) {}
};

inline KuranishiChart restrict_chart(const KuranishiChart& chart, const BoxUnion& sub) {
    if (!subset(sub, chart.base)) throw NotSubset("restrict_chart: sub is not a subset of the base");
    if (!chart.group.preserves(sub)) throw NotInvariant("restrict_chart: sub is not group-invariant");
    KuranishiChart out = chart;
    out.base = sub;
    out.footprint.clear();
    for (const auto& fp : chart.footprint)
        if (sub.contains(fp.point)) out.footprint.push_back(fp);
    return out;
}

struct EmptyComposite : std::runtime_error {
    explicit EmptyComposite(const std::string& w) : std::runtime_error(w) {}
};

struct ComposeResult {
    CoordinateChange composite;
    // group element of the target with composite = h ∘ direct, when a direct
    // change was supplied and a witness exists
    std::optional<int> witness;
};

// cc_qr: r -> q, cc_pq: q -> p; composite r -> p over the common domain.
inline ComposeResult compose_ccs(const CoordinateChange& cc_pq, const CoordinateChange& cc_qr,
                                 const KuranishiChart& tgt, const CoordinateChange* direct) {
    if (cc_qr.to_id != cc_pq.from_id) throw std::invalid_argument("compose_ccs: ids do not chain");
    ComposeResult out;
    CoordinateChange& c = out.composite;
    c.from_id = cc_qr.from_id;
    c.to_id = cc_pq.to_id;
    c.base_map = cc_pq.base_map.compose(cc_qr.base_map);
    c.bundle_map = cc_pq.bundle_map * cc_qr.bundle_map;
    c.domain = intersect(cc_qr.domain, affine_preimage(cc_qr.base_map, cc_pq.domain));
    if (!cc_qr.group_hom.empty() && !cc_pq.group_hom.empty()) {
        c.group_hom.resize(cc_qr.group_hom.size());
        for (size_t i = 0; i < cc_qr.group_hom.size(); ++i)
            c.group_hom[i] = cc_pq.group_hom[static_cast<size_t>(cc_qr.group_hom[i])];
    }
    if (c.domain.empty()) throw EmptyComposite("compose_ccs: composite domain is empty");

    if (direct) {
        for (int hi = 0; hi < tgt.group.size(); ++hi) {
            Affine cand = tgt.group.base[static_cast<size_t>(hi)].affine().compose(direct->base_map);
            Mat candb = tgt.group.fiber[static_cast<size_t>(hi)].matrix() * direct->bundle_map;
            if (cand == c.base_map && candb == c.bundle_map) {
                out.witness = hi;
                break;
            }
        }
    }
    return out;
}

// --------------------------------------------------------------------------
// Tangent bundle condition. Zeros of the target section on the embedded
// image are the base_map images of the source zeros (exact intertwining plus
// injectivity of the bundle map); the normal linearization is the target
// jacobian restricted to the orthogonal complement of im(A) and projected to
// the quotient by im(bundle_map).
// --------------------------------------------------------------------------

struct TangentBundleReport {
    bool pass = true;
    bool vacuous = false;  // no normal directions (equal dimensions)
    struct Failure {
        RatVec zero;       // source coordinates of the offending zero
        double det = 0;
    };
    std::optional<Failure> witness;
    std::vector<double> dets;  // |det| of the normal linearization per zero
};

inline Mat normal_linearization(const CoordinateChange& cc, const KuranishiChart& tgt, const RatVec& target_zero) {
    Mat nframe = orth_complement(cc.base_map.A);      // normal directions in the base
    Mat qframe = orth_complement(cc.bundle_map);      // complement of the bundle image
    Mat j = tgt.section.jacobian(target_zero);
    // project fiberwise to the quotient: coordinates of J*n in the qframe basis
    Mat qproj = inverse(qframe.transposed() * qframe) * qframe.transposed();
    return qproj * (j * nframe);
}

inline TangentBundleReport check_tangent_bundle(const CoordinateChange& cc, const KuranishiChart& src,
                                                const KuranishiChart& tgt, const Rat& grid_step) {
    if (rank(cc.base_map.A) != cc.base_map.A.cols())
        throw RankDeficientEmbedding("check_tangent_bundle: base map not injective");
    TangentBundleReport rep;
    int normal_dims = tgt.dim() - src.dim();
    if (normal_dims == 0) {
        rep.vacuous = true;
        return rep;
    }

    // zeros of the source section on the domain; their images exhaust the
    // target zeros on base_map(domain)
    std::vector<RatVec> zeros;
    for (const auto& fp : src.footprint)
        if (cc.domain.contains(fp.point)) zeros.push_back(fp.point);
    if (src.dim() == src.fiber_rank) {
        for (const auto& z : find_zeros(src.section, cc.domain, grid_step)) {
            RatVec approx(z.point.size());
            for (size_t i = 0; i < z.point.size(); ++i) approx[i] = snap(z.point[i], 1LL << 40);
            bool dup = false;
            for (const RatVec& w : zeros)
                if (to_double(linf_dist(w, approx)) < 1e-6) { dup = true; break; }
            if (!dup && cc.domain.contains(approx)) zeros.push_back(approx);
        }
    }

    for (const RatVec& z : zeros) {
        RatVec tz = cc.base_map.apply(z);
        Mat nl = normal_linearization(cc, tgt, tz);
        double d = std::abs(to_double(det(nl)));
        rep.dets.push_back(d);
        double scale = std::max(1.0, to_eigen(nl).norm());
        if (d <= kTolRank * scale) {
            rep.pass = false;
            rep.witness = TangentBundleReport::Failure{z, d};
            return rep;
        }
    }
    return rep;
}

}  // namespace kur

#pragma once

// Level-1 structures in the affine class. For a monomial-affine coordinate
// change the embedded image spans a subset of the target coordinates, so:
//
//   - the tubular neighborhood W is (image region) x (normal intervals),
//     an exact box union;
//   - the tubular projection pi resets the normal coordinates to the pins
//     b_i, a total affine map;
//   - the subbundle extension Etilde is the constant column span of the
//     bundle map, pi-tilde the identity on that frame, and pi-hat the exact
//     orthogonal projector onto the span.
//
// Composite pairs inherit their W from routes through intermediates, which
// makes the COMPATIBILITYONE identities hold by construction; the checker
// re-verifies them independently as exact affine/matrix identities with a
// group witness.

#include "kuranishi/gcs.hpp"
#include "kuranishi/newton.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace kur {

struct NoRoomToShrink : std::runtime_error {
    explicit NoRoomToShrink(const std::string& w) : std::runtime_error(w) {}
};
struct TransversalityUnachievable : std::runtime_error {
    explicit TransversalityUnachievable(const std::string& w) : std::runtime_error(w) {}
};
struct InductionBlocked : std::runtime_error {
    explicit InductionBlocked(const std::string& w) : std::runtime_error(w) {}
};

// --------------------------------------------------------------------------
// TubularData: the normal-coordinate bookkeeping of one monomial embedding.
// --------------------------------------------------------------------------

struct TubularData {
    std::vector<int> image_coords;               // target coords hit by the embedding (per source coord)
    std::vector<std::pair<int, Rat>> normal_pins;  // remaining target coords and their pinned values
    BoxUnion W;                                   // tubular neighborhood in the target
    Affine pi;                                    // total affine projection onto the embedded image
    Mat normal_frame;                             // columns: the normal coordinate directions

    bool trivial() const { return normal_pins.empty(); }
};

namespace l1_detail {

inline TubularData tubular_frame(const Affine& base_map) {
    TubularData t;
    auto cols = base_map.monomial_cols();
    std::vector<bool> hit(static_cast<size_t>(base_map.codom_dim()), false);
    for (auto& [row, scale] : cols) {
        t.image_coords.push_back(row);
        hit[static_cast<size_t>(row)] = true;
    }
    for (int i = 0; i < base_map.codom_dim(); ++i)
        if (!hit[static_cast<size_t>(i)]) t.normal_pins.emplace_back(i, base_map.b[static_cast<size_t>(i)]);

    int n = base_map.codom_dim();
    t.pi.A = Mat(n, n);
    t.pi.b = RatVec(static_cast<size_t>(n), Rat(0));
    for (int i : t.image_coords) t.pi.A(i, i) = 1;
    for (auto& [i, c] : t.normal_pins) t.pi.b[static_cast<size_t>(i)] = c;

    t.normal_frame = Mat(n, static_cast<int>(t.normal_pins.size()));
    for (size_t k = 0; k < t.normal_pins.size(); ++k) t.normal_frame(t.normal_pins[k].first, static_cast<int>(k)) = 1;
    return t;
}

// boxes over the embedded image of `domain` with free normal coordinates
inline BoxUnion image_cylinder(const Affine& base_map, const BoxUnion& domain, const TubularData& t) {
    BoxUnion out(base_map.codom_dim());
    auto cols = base_map.monomial_cols();
    for (const Box& d : domain.boxes) {
        Box b(static_cast<size_t>(base_map.codom_dim()));  // all-unbounded by default
        for (size_t j = 0; j < cols.size(); ++j) {
            auto [row, scale] = cols[j];
            Rat off = base_map.b[static_cast<size_t>(row)];
            auto map = [&](const std::optional<Rat>& x) -> std::optional<Rat> {
                return x ? std::optional<Rat>(scale * (*x) + off) : std::nullopt;
            };
            if (scale > 0)
                b[static_cast<size_t>(row)] = Ival{map(d[j].lo), map(d[j].hi)};
            else
                b[static_cast<size_t>(row)] = Ival{map(d[j].hi), map(d[j].lo)};
        }
        out.boxes.push_back(b);
    }
    (void)t;
    return out;
}

// bound the free normal coordinates of `cyl` by (pin - r, pin + r)
inline BoxUnion bound_normals(const BoxUnion& cyl, const TubularData& t, const std::vector<Rat>& radii) {
    BoxUnion out = cyl;
    for (Box& b : out.boxes)
        for (size_t k = 0; k < t.normal_pins.size(); ++k) {
            auto [i, c] = t.normal_pins[k];
            Ival want{c - radii[k], c + radii[k]};
            Ival cur = b[static_cast<size_t>(i)];
            Ival merged;
            merged.lo = cur.lo ? std::optional<Rat>(std::max(*cur.lo, *want.lo)) : want.lo;
            merged.hi = cur.hi ? std::optional<Rat>(std::min(*cur.hi, *want.hi)) : want.hi;
            b[static_cast<size_t>(i)] = merged;
        }
    // drop collapsed boxes
    BoxUnion clean(out.dim);
    for (const Box& b : out.boxes)
        if (box_valid(b)) clean.boxes.push_back(b);
    return clean;
}

}  // namespace l1_detail

// --------------------------------------------------------------------------
// Level-1 coordinate change.
// --------------------------------------------------------------------------

struct Level1CoordinateChange {
    CoordinateChange cc;   // the restricted underlying coordinate change
    TubularData tub;
    Mat etilde;            // constant frame of the subbundle extension (= bundle_map columns)
    Mat pi_hat;            // exact orthogonal projector of the target fiber onto span(etilde)
    std::vector<Rat> fiber_radii;  // per normal coordinate, kept for rebuild experiments

    bool trivial() const { return tub.trivial(); }
};

namespace l1_detail {

inline BoxUnion tub_cylinder(const Level1CoordinateChange& l1, const BoxUnion& region_in_source) {
    if (l1.trivial()) return intersect(affine_image_square(l1.cc.base_map, region_in_source), l1.tub.W);
    return intersect(image_cylinder(l1.cc.base_map, region_in_source, l1.tub), l1.tub.W);
}

}  // namespace l1_detail

struct Level1Certificates {
    bool no_leaked_zeros = true;     // (2)(c): zeros of s_tgt in W lie on the image
    bool quotient_zero_exact = true; // (3)(c): quotient section vanishes only on the image
    double min_sigma = 0;            // (3)(d): smallest sigma_min of the quotient linearization
    bool orbit_sheets_ok = true;     // (2)(d): group copies of W disjoint or equal
    bool pass(double tol = kTolRank) const {
        return no_leaked_zeros && quotient_zero_exact && orbit_sheets_ok && min_sigma > tol;
    }
};

// Exact-plus-certified verification of definition LEVEL1CCHANGE items (2)(c),
// (2)(d), (3)(b-d) for one built change.
inline Level1Certificates level1_certificates(const Level1CoordinateChange& l1, const KuranishiChart& src,
                                              const KuranishiChart& tgt, const Rat& grid_step) {
    Level1Certificates cert;
    if (l1.trivial()) {
        cert.min_sigma = 1.0;
        return cert;
    }
    const TubularData& t = l1.tub;

    // (3)(b) holds by representation: etilde equals the bundle image frame.
    // quotient projector onto the complement of span(etilde)
    Mat qframe = orth_complement(l1.etilde);
    Mat qproj = inverse(qframe.transposed() * qframe) * qframe.transposed();
    PolySection quotient = tgt.section.postcompose(qproj);

    // (2)(c)+(3)(c) on the exact side: footprint zeros of the target inside W
    // must lie on the image (normal coordinates at their pins)
    for (const auto& fp : tgt.footprint) {
        if (!l1.tub.W.contains(fp.point)) continue;
        for (auto& [i, c] : t.normal_pins)
            if (fp.point[static_cast<size_t>(i)] != c) cert.no_leaked_zeros = false;
    }

    // (2)(c) certified: Newton zeros of the full target section inside W
    if (tgt.dim() == tgt.fiber_rank) {
        for (const auto& z : find_zeros(tgt.section, l1.tub.W, grid_step)) {
            for (auto& [i, c] : t.normal_pins)
                if (std::abs(z.point[static_cast<size_t>(i)] - to_double(c)) > 1e-7) cert.no_leaked_zeros = false;
        }
    }

    // (3)(c)+(3)(d): on each normal slice through a sampled image point the
    // quotient system is square; its Newton zeros must sit at the pins, and
    // its linearization there must clear the rank threshold
    auto domain_samples = grid_points(l1.cc.domain, grid_step);
    // always include the source footprint zeros in the sample set
    for (const auto& fp : src.footprint)
        if (l1.cc.domain.contains(fp.point)) domain_samples.push_back(fp.point);
    int nn = static_cast<int>(t.normal_pins.size());
    cert.min_sigma = 1e30;
    for (const RatVec& x : domain_samples) {
        RatVec base_pt = l1.cc.base_map.apply(x);
        // slice parametrization u -> base_pt + normal_frame * u
        Affine slice{t.normal_frame, base_pt};
        PolySection qslice = quotient.compose_affine(slice);
        if (qslice.fiber_rank == nn && nn > 0) {
            // Newton from a few seeds in the radius box
            auto jac = qslice.jacobian_polys();
            std::vector<std::vector<double>> seeds;
            std::vector<double> r0(static_cast<size_t>(nn));
            for (int k = 0; k < nn; ++k) r0[static_cast<size_t>(k)] = 0.5 * to_double(l1.fiber_radii[static_cast<size_t>(k)]);
            seeds.push_back(std::vector<double>(static_cast<size_t>(nn), 0.0));
            seeds.push_back(r0);
            for (double& v : r0) v = -v;
            seeds.push_back(r0);
            for (auto& s : seeds) {
                auto sol = newton_solve(qslice, jac, s);
                if (!sol) continue;
                bool inside = true;
                for (int k = 0; k < nn; ++k)
                    if (std::abs((*sol)[static_cast<size_t>(k)]) > to_double(l1.fiber_radii[static_cast<size_t>(k)]))
                        inside = false;
                if (!inside) continue;
                for (double v : *sol)
                    if (std::abs(v) > 1e-7) cert.quotient_zero_exact = false;
            }
        }
        // linearization over the image point
        Mat nl = qproj * (tgt.section.jacobian(base_pt) * t.normal_frame);
        double sv = smallest_singular_value(to_eigen(nl));
        cert.min_sigma = std::min(cert.min_sigma, sv);
    }
    if (domain_samples.empty()) cert.min_sigma = 1.0;

    // (2)(d): group translates of W are disjoint or equal
    for (const SignedPerm& g : tgt.group.base) {
        if (g.is_identity()) continue;
        BoxUnion gw = g.map_boxes(l1.tub.W);
        if (!disjoint(gw, l1.tub.W) && !set_equal(gw, l1.tub.W)) cert.orbit_sheets_ok = false;
    }
    return cert;
}

// --------------------------------------------------------------------------
// build_level1_cc: the existence proposition, affine-specialized. Returns the
// level-1 change together with the adjusted target base (the strong-open-
// neighborhood trick edits only the target chart).
// --------------------------------------------------------------------------

struct BuiltLevel1 {
    Level1CoordinateChange l1;
    BoxUnion new_target_base;
};

inline BuiltLevel1 build_level1_cc(const CoordinateChange& cc_in, const KuranishiChart& src, const KuranishiChart& tgt,
                                   const Rat& grid_step, const std::optional<BoxUnion>& w_cap = std::nullopt) {
    BuiltLevel1 out;
    Level1CoordinateChange& l1 = out.l1;
    l1.cc = cc_in;
    l1.tub = l1_detail::tubular_frame(cc_in.base_map);
    l1.etilde = cc_in.bundle_map;
    l1.pi_hat = orth_projector(cc_in.bundle_map);
    out.new_target_base = tgt.base;

    if (l1.trivial()) {
        // equal dimensions: W is the image itself, all projections identities
        l1.tub.W = affine_image_square(cc_in.base_map, cc_in.domain);
        return out;
    }

    // initial fiber radii: half the minimum clearance of each pin inside the
    // target boxes met by the image cylinder
    BoxUnion cyl = l1_detail::image_cylinder(cc_in.base_map, cc_in.domain, l1.tub);
    std::vector<Rat> radii;
    for (auto& [i, c] : l1.tub.normal_pins) {
        std::optional<Rat> clr;
        for (const Box& b : tgt.base.boxes) {
            bool meets = !intersect(BoxUnion(tgt.base.dim, {b}), cyl).empty();
            if (!meets) continue;
            if (!b[static_cast<size_t>(i)].contains_open(c)) continue;
            Rat lo = b[static_cast<size_t>(i)].lo ? Rat(c - *b[static_cast<size_t>(i)].lo) : Rat(1000000);
            Rat hi = b[static_cast<size_t>(i)].hi ? Rat(*b[static_cast<size_t>(i)].hi - c) : Rat(1000000);
            Rat m = std::min(lo, hi);
            if (!clr || m < *clr) clr = m;
        }
        if (!clr || *clr <= 0) throw NoRoomToShrink("build_level1_cc: pin has no clearance in the target base");
        radii.push_back(*clr / 2);
    }

    // transversality loop: halve radii until the certificates pass
    for (int attempt = 0;; ++attempt) {
        l1.fiber_radii = radii;
        l1.tub.W = l1_detail::bound_normals(cyl, l1.tub, radii);
        if (w_cap) l1.tub.W = intersect(l1.tub.W, *w_cap);
        auto cert = level1_certificates(l1, src, tgt, grid_step);
        if (cert.pass()) break;
        if (!cert.orbit_sheets_ok && attempt > 0 && cert.min_sigma > kTolRank && cert.no_leaked_zeros &&
            cert.quotient_zero_exact) {
            // sheets keep colliding: radii halving is the only lever here too
        }
        if (attempt >= 20) {
            if (cert.min_sigma <= kTolRank)
                throw TransversalityUnachievable("build_level1_cc: quotient linearization singular on the image");
            throw NoRoomToShrink("build_level1_cc: certificates failed after 20 halvings");
        }
        for (Rat& r : radii) r /= 2;
    }

    // strong open neighborhood: carve the full cylinder out of the target
    // base and put W back, so pi-fibers in the new base are complete
    out.new_target_base = box_union_union(subtract_closed(tgt.base, cyl), l1.tub.W);
    return out;
}

// --------------------------------------------------------------------------
// Compatibility of a level-1 triple, checked as exact identities.
// --------------------------------------------------------------------------

struct Level1CompatReport {
    bool pass = true;
    bool vacuous = false;
    int witness = 0;  // target group element index h with composite = h ∘ direct
    std::string failed_identity;
};

struct EmptyCommonDomain : std::runtime_error {
    explicit EmptyCommonDomain(const std::string& w) : std::runtime_error(w) {}
};

namespace l1_detail {

// canonical pushforward of a source-chart self-map through a monomial
// embedding: conjugate on the image coordinates, identity on the rest
inline Affine pushforward(const Affine& emb, const Affine& map_in_source) {
    int n = emb.codom_dim();
    auto cols = emb.monomial_cols();
    // build the square completion phi-bar and the extended map ⊕ identity
    Affine phibar{Mat(n, n), emb.b};
    Affine ext{Mat(n, n), RatVec(static_cast<size_t>(n), Rat(0))};
    std::vector<bool> hit(static_cast<size_t>(n), false);
    for (size_t j = 0; j < cols.size(); ++j) {
        phibar.A(cols[j].first, static_cast<int>(j)) = cols[j].second;
        hit[static_cast<size_t>(cols[j].first)] = true;
        for (int k = 0; k < map_in_source.A.cols(); ++k)
            ext.A(static_cast<int>(j), k) = map_in_source.A(static_cast<int>(j), k);
        ext.b[j] = map_in_source.b[j];
    }
    int extra = emb.dom_dim();
    for (int i = 0; i < n; ++i)
        if (!hit[static_cast<size_t>(i)]) {
            phibar.A(i, extra) = 1;
            phibar.b[static_cast<size_t>(i)] = 0;
            ext.A(extra, extra) = 1;
            ++extra;
        }
    return phibar.compose(ext).compose(phibar.inverse_affine());
}

// pi^{-1}(phi(region)) ∩ W for one level-1 change: the cylinder over the
// embedded image of a source region, bounded by the change's tubular W
inline BoxUnion tub_cylinder(const Level1CoordinateChange& l1, const BoxUnion& region_in_source);

}  // namespace l1_detail

// Triple over (gamma,beta), (gamma,alpha), (beta,alpha); identities (1)-(3)
// of COMPATIBILITYONE with h the group witness in the top chart.
inline Level1CompatReport check_level1_compat(const Level1CoordinateChange& gb, const Level1CoordinateChange& ga,
                                              const Level1CoordinateChange& ba, const KuranishiChart& top,
                                              const Rat& grid_step) {
    Level1CompatReport rep;

    // common domain U'_{xyz} in the gamma chart
    BoxUnion common = intersect(intersect(ga.cc.domain, gb.cc.domain), affine_preimage(gb.cc.base_map, ba.cc.domain));
    if (common.empty()) {
        rep.vacuous = true;
        return rep;
    }

    // (1) composition witness
    Affine comp_base = ba.cc.base_map.compose(gb.cc.base_map);
    Mat comp_bundle = ba.cc.bundle_map * gb.cc.bundle_map;
    int h = -1;
    for (int hi = 0; hi < top.group.size(); ++hi) {
        Affine cand = top.group.base[static_cast<size_t>(hi)].affine().compose(ga.cc.base_map);
        Mat candb = top.group.fiber[static_cast<size_t>(hi)].matrix() * ga.cc.bundle_map;
        if (cand == comp_base && candb == comp_bundle) { h = hi; break; }
    }
    if (h < 0) {
        rep.pass = false;
        rep.failed_identity = "composition-witness";
        return rep;
    }
    rep.witness = h;
    Affine ha = top.group.base[static_cast<size_t>(h)].affine();
    Affine hinv = top.group.base[static_cast<size_t>(h)].inverse().affine();
    Mat hf = top.group.fiber[static_cast<size_t>(h)].matrix();
    Mat hfinv = top.group.fiber[static_cast<size_t>(h)].inverse().matrix();

    // (2a) pi-composition: ((phi_ba)_* pi_gb) ∘ pi_ba = pi_ga ∘ h^{-1}
    if (!ba.trivial() || !gb.trivial()) {
        Affine pi_gb = gb.trivial() ? Affine::identity(gb.cc.base_map.dom_dim()) : gb.tub.pi;
        Affine pushed = l1_detail::pushforward(ba.cc.base_map, pi_gb);
        Affine lhs = pushed.compose(ba.trivial() ? Affine::identity(top.dim()) : ba.tub.pi);
        Affine rhs = (ga.trivial() ? Affine::identity(top.dim()) : ga.tub.pi).compose(hinv);
        if (!(lhs == rhs)) {
            rep.pass = false;
            rep.failed_identity = "pi-composition";
            return rep;
        }
    }

    // (2b) Etilde pullback: pitilde_ba^{-1}(phihat_ba(Etilde_gb)) = h(Etilde_ga)
    {
        Mat lhs = ba.cc.bundle_map * gb.etilde;  // constant frames: pulling back along pitilde is the identity
        Mat rhs = hf * ga.etilde;
        if (!same_span(lhs, rhs)) {
            rep.pass = false;
            rep.failed_identity = "etilde-pullback";
            return rep;
        }
    }

    // (2c) pitilde-composition: with constant frames both sides are the
    // identity on the span from (2b); nothing further to compare exactly.

    // (2d) region identity over the common domain:
    //   pi_ba^{-1}(phi_ba(pi_gb^{-1}(phi_gb(U ∩ U)))) = h(pi_ga^{-1}(phi_ga(U ∩ U)))
    {
        BoxUnion uu = intersect(ga.cc.domain, gb.cc.domain);
        BoxUnion lhs = l1_detail::tub_cylinder(ba, l1_detail::tub_cylinder(gb, uu));
        BoxUnion rhs = affine_image_square(ha, l1_detail::tub_cylinder(ga, uu));
        if (!set_equal(lhs, rhs)) {
            rep.pass = false;
            rep.failed_identity = "tubular-region";
            return rep;
        }
    }

    // (3) pihat-composition: ((pitilde_ba)^*((phihat_ba)_* pihat_gb)) ∘ pihat_ba = pihat_ga ∘ h^{-1}
    {
        Mat B = ba.cc.bundle_map;
        Mat pushed = B * gb.pi_hat * inverse(B.transposed() * B) * B.transposed();
        Mat lhs = pushed * ba.pi_hat;
        Mat rhs = ga.pi_hat * hfinv;
        if (!(lhs == rhs)) {
            rep.pass = false;
            rep.failed_identity = "pihat-composition";
            return rep;
        }
    }

    (void)grid_step;
    return rep;
}

// --------------------------------------------------------------------------
// Level-1 good coordinate system: the inductive construction up the order.
// --------------------------------------------------------------------------

struct Level1GCS {
    GoodCoordinateSystem gcs;  // the precompactly shrunken underlying system
    std::map<std::pair<std::string, std::string>, Level1CoordinateChange> table;
    std::map<std::tuple<std::string, std::string, std::string>, int> witnesses;  // h_{xyz} per verified triple

    const Level1CoordinateChange* l1(const std::string& from, const std::string& to) const {
        auto it = table.find({from, to});
        return it == table.end() ? nullptr : &it->second;
    }
};

// Precompact inset of every base that keeps all footprint zeros with
// clearance; the margin is capped per chart by half the minimal zero
// clearance.
inline std::vector<BoxUnion> precompact_inset(const GoodCoordinateSystem& g, const Rat& margin) {
    std::vector<BoxUnion> spec;
    for (const auto& c : g.charts) {
        Rat cap = margin;
        for (const auto& fp : c.footprint)
            for (const RatVec& z : c.group.orbit(fp.point))
                for (const Box& b : c.base.boxes) {
                    bool in = true;
                    for (size_t i = 0; i < z.size(); ++i)
                        if (!b[i].contains_open(z[i])) in = false;
                    if (!in) continue;
                    for (size_t i = 0; i < z.size(); ++i) {
                        if (b[i].lo) cap = std::min(cap, Rat((z[i] - *b[i].lo) / 2));
                        if (b[i].hi) cap = std::min(cap, Rat((*b[i].hi - z[i]) / 2));
                    }
                }
        if (cap <= 0) throw NoRoomToShrink("precompact_inset: a zero sits on the base boundary");
        spec.push_back(inset(c.base, cap));
    }
    return spec;
}

// Builds a level-1 structure on a strongly intersecting, Hausdorff-probed,
// totally ordered GCS. Induction up the order, per target; per target the
// incoming pairs are handled in descending source order, and a composite
// pair's fiber radii are DERIVED per normal coordinate from its routes
// through intermediates (the affine stand-in for the metric-recovery steps),
// which makes the compatibility identities exact by construction. Domains of
// previously built changes are never shrunk. If a derived radius fails its
// certificates, the whole build restarts at half scale.
inline Level1GCS build_level1_gcs(const GoodCoordinateSystem& g, const Rat& margin, const Rat& grid_step,
                                  const std::optional<std::vector<BoxUnion>>& prescribed_inner = std::nullopt,
                                  const Rat& fiber_scale = Rat(1)) {
    for (int restart = 0; restart < 20; ++restart) {
        Rat scale = fiber_scale / rat_pow(Rat(2), static_cast<unsigned>(restart));
        Level1GCS out;
        out.gcs = shrink_gcs(g, precompact_inset(g, margin));
        if (prescribed_inner) {
            // CONTROLLINGTHESIZE: the shrinking must contain the prescribed bases
            for (size_t i = 0; i < out.gcs.charts.size(); ++i)
                if (!subset((*prescribed_inner)[i], out.gcs.charts[i].base))
                    throw NoRoomToShrink("build_level1_gcs: prescribed inner shrinking does not fit");
        }

        std::vector<int> order(out.gcs.charts.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            if (out.gcs.order_leq(a, b) && !out.gcs.order_leq(b, a)) return true;
            if (out.gcs.order_leq(b, a) && !out.gcs.order_leq(a, b)) return false;
            return a < b;
        });
        std::vector<int> pos(order.size());
        for (size_t i = 0; i < order.size(); ++i) pos[static_cast<size_t>(order[i])] = static_cast<int>(i);

        bool retry = false;
        for (int ai : order) {
            if (retry) break;
            const std::string aid = out.gcs.charts[static_cast<size_t>(ai)].id;
            std::vector<int> sources;
            for (auto& [yi, xi] : out.gcs.index_pairs())
                if (xi == ai) sources.push_back(yi);
            std::sort(sources.begin(), sources.end(),
                      [&](int a, int b) { return pos[static_cast<size_t>(a)] > pos[static_cast<size_t>(b)]; });

            std::vector<BoxUnion> cylinders;
            for (int bi : sources) {
                const std::string bid = out.gcs.charts[static_cast<size_t>(bi)].id;
                const KuranishiChart& src = out.gcs.charts[static_cast<size_t>(bi)];
                const KuranishiChart& tgtc = out.gcs.charts[static_cast<size_t>(ai)];
                const GcsChange* gc = out.gcs.change(bid, aid);
                if (!gc) throw InductionBlocked("build_level1_gcs: missing change " + bid + "->" + aid);

                Level1CoordinateChange l1;
                l1.cc = gc->cc;
                l1.tub = l1_detail::tubular_frame(gc->cc.base_map);
                l1.etilde = gc->cc.bundle_map;
                l1.pi_hat = orth_projector(gc->cc.bundle_map);

                if (l1.trivial()) {
                    l1.tub.W = affine_image_square(gc->cc.base_map, gc->cc.domain);
                    out.table[{bid, aid}] = std::move(l1);
                    continue;
                }

                // radii: derived from routes through intermediates when they
                // exist, fresh (scaled clearance) otherwise
                std::vector<std::optional<Rat>> derived(l1.tub.normal_pins.size());
                for (int di : sources) {
                    if (pos[static_cast<size_t>(di)] <= pos[static_cast<size_t>(bi)]) continue;
                    const std::string did = out.gcs.charts[static_cast<size_t>(di)].id;
                    const Level1CoordinateChange* bd = out.l1(bid, did);
                    const Level1CoordinateChange* da = out.l1(did, aid);
                    if (!bd || !da) continue;
                    // coords normal to d: copy da's radii; coords from d-coords
                    // normal to b: push bd's radii through the d->a scales
                    std::map<int, Rat> route;
                    if (!da->trivial())
                        for (size_t k = 0; k < da->tub.normal_pins.size(); ++k)
                            route[da->tub.normal_pins[k].first] = da->fiber_radii[k];
                    auto dacols = da->cc.base_map.monomial_cols();
                    if (!bd->trivial())
                        for (size_t k = 0; k < bd->tub.normal_pins.size(); ++k) {
                            auto [dj, c] = bd->tub.normal_pins[k];
                            auto [row, s] = dacols[static_cast<size_t>(dj)];
                            route[row] = rat_abs(s) * bd->fiber_radii[k];
                        }
                    for (size_t k = 0; k < l1.tub.normal_pins.size(); ++k) {
                        auto it = route.find(l1.tub.normal_pins[k].first);
                        if (it == route.end())
                            throw InductionBlocked("build_level1_gcs: route misses a normal coordinate");
                        if (derived[k] && *derived[k] != it->second)
                            throw InductionBlocked("build_level1_gcs: conflicting route radii at (" + bid + "," + did +
                                                   "," + aid + ")");
                        derived[k] = it->second;
                    }
                }

                BoxUnion cyl = l1_detail::image_cylinder(gc->cc.base_map, gc->cc.domain, l1.tub);
                std::vector<Rat> radii(l1.tub.normal_pins.size());
                bool any_fresh = false;
                for (size_t k = 0; k < radii.size(); ++k) {
                    if (derived[k]) {
                        radii[k] = *derived[k];
                        continue;
                    }
                    any_fresh = true;
                    auto [i, c] = l1.tub.normal_pins[k];
                    std::optional<Rat> clr;
                    for (const Box& b : tgtc.base.boxes) {
                        if (intersect(BoxUnion(tgtc.base.dim, {b}), cyl).empty()) continue;
                        if (!b[static_cast<size_t>(i)].contains_open(c)) continue;
                        Rat lo = b[static_cast<size_t>(i)].lo ? Rat(c - *b[static_cast<size_t>(i)].lo) : Rat(1000000);
                        Rat hi = b[static_cast<size_t>(i)].hi ? Rat(*b[static_cast<size_t>(i)].hi - c) : Rat(1000000);
                        Rat m = std::min(lo, hi);
                        if (!clr || m < *clr) clr = m;
                    }
                    if (!clr || *clr <= 0) throw NoRoomToShrink("build_level1_gcs: no clearance at a pin of " + aid);
                    radii[k] = *clr / 2 * scale;
                }
                (void)any_fresh;

                l1.fiber_radii = radii;
                l1.tub.W = l1_detail::bound_normals(cyl, l1.tub, radii);
                auto cert = level1_certificates(l1, src, tgtc, grid_step);
                if (!cert.pass()) {
                    if (cert.min_sigma <= kTolRank && cert.no_leaked_zeros && cert.quotient_zero_exact &&
                        cert.orbit_sheets_ok && restart >= 19)
                        throw TransversalityUnachievable("build_level1_gcs: quotient singular at (" + bid + "," + aid + ")");
                    retry = true;
                    break;
                }
                cylinders.push_back(cyl);
                out.table[{bid, aid}] = std::move(l1);
            }
            if (retry) break;

            // strong-neighborhood carve of the target, once per target: remove
            // the full cylinders, put the W's back
            if (!cylinders.empty()) {
                KuranishiChart& tgtc = out.gcs.charts[static_cast<size_t>(ai)];
                BoxUnion nb = tgtc.base;
                for (const BoxUnion& cyl : cylinders) nb = subtract_closed(nb, cyl);
                for (auto& [key, l1r] : out.table)
                    if (key.second == aid) nb = box_union_union(nb, l1r.tub.W);
                if (prescribed_inner && !subset((*prescribed_inner)[static_cast<size_t>(ai)], nb))
                    throw NoRoomToShrink("build_level1_gcs: carving would cut the prescribed inner shrinking");
                for (const auto& fp : out.gcs.charts[static_cast<size_t>(ai)].footprint)
                    if (!nb.contains(fp.point))
                        throw NoRoomToShrink("build_level1_gcs: carving lost a zero of " + aid);
                tgtc.base = nb;
                // re-restrict domains of changes into the adjusted target
                for (auto& [key, gcm] : out.gcs.changes) {
                    if (key.second != aid) continue;
                    int yi = out.gcs.index_of(key.first);
                    gcm.cc.domain = intersect(intersect(gcm.cc.domain, out.gcs.charts[static_cast<size_t>(yi)].base),
                                              affine_preimage(gcm.cc.base_map, tgtc.base));
                    auto it = out.table.find(key);
                    if (it != out.table.end()) it->second.cc.domain = gcm.cc.domain;
                }
            }
        }
        if (retry) continue;

        // verify every triple independently and record the witnesses
        for (auto& [kgb, gb] : out.table)
            for (auto& [kba, ba] : out.table) {
                if (kgb.second != kba.first) continue;
                auto it = out.table.find({kgb.first, kba.second});
                if (it == out.table.end()) continue;
                const KuranishiChart& top = out.gcs.charts[static_cast<size_t>(out.gcs.index_of(kba.second))];
                auto rep = check_level1_compat(gb, it->second, ba, top, grid_step);
                if (!rep.vacuous && !rep.pass)
                    throw InductionBlocked("build_level1_gcs: compatibility fails at (" + kgb.first + "," + kgb.second +
                                           "," + kba.second + "): " + rep.failed_identity);
                if (!rep.vacuous) out.witnesses[{kgb.first, kgb.second, kba.second}] = rep.witness;
            }
        return out;
    }
    throw NoRoomToShrink("build_level1_gcs: certificates failed after 20 scale halvings");
}

// --------------------------------------------------------------------------
// Level-1 Kuranishi embeddings (per-index chart embeddings between two GCS
// with a common order), affine-specialized: Pi is the coordinate reset onto
// the embedded image over the whole target base.
// --------------------------------------------------------------------------

struct NotConcerted : std::runtime_error {
    explicit NotConcerted(const std::string& w) : std::runtime_error(w) {}
};

struct KuranishiEmbedding {
    const GoodCoordinateSystem* src = nullptr;
    const GoodCoordinateSystem* tgt = nullptr;
    std::map<std::string, CoordinateChange> emb;  // per index: domain = the whole source base
};

struct Level1ChartEmbedding {
    CoordinateChange emb;
    TubularData tub;   // W = the whole target base (a cylinder over the image)
    Mat ftilde;        // constant frame of the embedded subbundle
    Mat pi_hat;
};

struct Level1Embedding {
    KuranishiEmbedding kemb;
    std::map<std::string, Level1ChartEmbedding> charts;
};

inline Level1Embedding build_level1_embedding(const KuranishiEmbedding& kemb, const Level1GCS& base_level1) {
    Level1Embedding out;
    out.kemb = kemb;
    // concertedness: orders agree on intersecting pairs. With a common index
    // set and both orders built lexicographically this is a table audit.
    for (auto [yi, xi] : kemb.src->index_pairs()) {
        int ty = kemb.tgt->index_of(kemb.src->charts[static_cast<size_t>(yi)].id);
        int tx = kemb.tgt->index_of(kemb.src->charts[static_cast<size_t>(xi)].id);
        if (!kemb.tgt->order_leq(ty, tx))
            throw NotConcerted("build_level1_embedding: order flips across the embedding at (" +
                               kemb.src->charts[static_cast<size_t>(yi)].id + "," +
                               kemb.src->charts[static_cast<size_t>(xi)].id + ")");
    }

    for (const auto& [id, cc] : kemb.emb) {
        const KuranishiChart& tgtc = kemb.tgt->charts[static_cast<size_t>(kemb.tgt->index_of(cc.to_id))];
        Level1ChartEmbedding ce;
        ce.emb = cc;
        ce.tub = l1_detail::tubular_frame(cc.base_map);
        ce.ftilde = cc.bundle_map;
        ce.pi_hat = orth_projector(cc.bundle_map);
        // W must be the whole target base, which therefore has to be a
        // cylinder over the embedded image: base == pi^{-1}(pi(base))
        ce.tub.W = tgtc.base;
        if (!ce.tub.trivial()) {
            BoxUnion cyl(tgtc.base.dim);
            for (const Box& b : tgtc.base.boxes) {
                Box nb = b;
                for (auto& [i, c] : ce.tub.normal_pins) nb[static_cast<size_t>(i)] = Ival{std::nullopt, std::nullopt};
                cyl.boxes.push_back(nb);
            }
            // pi(base) extended freely must reproduce the base up to the
            // normal intervals of the base itself: verify fiber completeness
            if (!set_equal(intersect(cyl, tgtc.base), tgtc.base))
                throw NoRoomToShrink("build_level1_embedding: target base is not a cylinder over the image");
        }
        out.charts[id] = std::move(ce);
    }

    // level-1 squares commute up to witnesses: for every pair in I, the two
    // routes source-change-then-embed and embed-then-target-change agree
    for (auto [yi, xi] : kemb.src->index_pairs()) {
        const std::string& y = kemb.src->charts[static_cast<size_t>(yi)].id;
        const std::string& x = kemb.src->charts[static_cast<size_t>(xi)].id;
        const GcsChange* s = kemb.src->change(y, x);
        const GcsChange* t = kemb.tgt->change(y, x);
        if (!s || !t) throw NotConcerted("build_level1_embedding: missing change " + y + "->" + x);
        const KuranishiChart& topc = kemb.tgt->charts[static_cast<size_t>(kemb.tgt->index_of(x))];
        Affine route1 = out.charts.at(x).emb.base_map.compose(s->cc.base_map);
        Affine route2 = t->cc.base_map.compose(out.charts.at(y).emb.base_map);
        bool ok = false;
        for (int hi = 0; hi < topc.group.size(); ++hi)
            if (topc.group.base[static_cast<size_t>(hi)].affine().compose(route2) == route1) ok = true;
        if (!ok) throw NotConcerted("build_level1_embedding: square at (" + y + "," + x + ") does not commute");
    }
    (void)base_level1;
    return out;
}

}  // namespace kur

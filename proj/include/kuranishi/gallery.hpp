#pragma once

// The example gallery. Each scene is a finitely presented Kuranishi
// structure over a labeled point set with exact rational data, plus default
// pipeline parameters (extraction radii, shrinking margin, grid step).
//
// Counterexample scenes keep every chart and change individually valid; the
// failures they exhibit are properties of the collection (maximality /
// topological matching), which is what validate_presentation probes.

#include "kuranishi/presentation.hpp"

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace kur {

struct Scene {
    std::string name;
    KuranishiPresentation pres;
    std::map<std::string, Rat> radii;  // default extraction radii per label
    Rat grid = Rat(1, 20);
    Rat margin = Rat(1, 4);            // default shrinking margin
};

struct UnknownGallery : std::runtime_error {
    explicit UnknownGallery(const std::string& w) : std::runtime_error(w) {}
};

namespace gallery_detail {

inline GroupAction z2_line() {
    SignedPerm neg = SignedPerm::identity(1);
    neg.sign[0] = -1;
    GroupAction g;
    g.dim = g.fiber_dim = 1;
    g.base = {SignedPerm::identity(1), neg};
    g.fiber = {SignedPerm::identity(1), neg};
    g.check_and_build_table();
    return g;
}

// lambda(a) = (a^2-1)(a^2-9): even, zeros -3,-1,1,3 — the polynomial stand-in
// for the strip's periodic profile on the window (-4,4)
inline Poly strip_lambda(int nvars, int var) {
    Poly a = Poly::var(nvars, var);
    return (a * a - Poly::constant(nvars, Rat(1))) * (a * a - Poly::constant(nvars, Rat(9)));
}

// f(u) = u(u-2)(u-4): the shared axis profile of the chain-type scenes
inline Poly chain_axis(int nvars, int var) {
    Poly u = Poly::var(nvars, var);
    return u * (u - Poly::constant(nvars, Rat(2))) * (u - Poly::constant(nvars, Rat(4)));
}

// g(t) = t^2 (t-2)^2: both zeros degenerate; each perturbs into a +/- pair
inline Poly jump_axis(int nvars, int var) {
    Poly t = Poly::var(nvars, var);
    Poly t2 = t - Poly::constant(nvars, Rat(2));
    return t * t * t2 * t2;
}

inline CoordinateChange axis_change(const std::string& from, const std::string& to, const BoxUnion& dom, int src_dim,
                                    int tgt_dim, int src_rank, int tgt_rank) {
    // the straight axis inclusion (x_1..x_k) |-> (x_1..x_k, 0..0), fibers alike
    CoordinateChange cc;
    cc.from_id = from;
    cc.to_id = to;
    cc.domain = dom;
    cc.base_map = Affine{Mat(tgt_dim, src_dim), RatVec(static_cast<size_t>(tgt_dim), Rat(0))};
    for (int i = 0; i < src_dim; ++i) cc.base_map.A(i, i) = 1;
    cc.bundle_map = Mat(tgt_rank, src_rank);
    for (int i = 0; i < src_rank; ++i) cc.bundle_map(i, i) = 1;
    return cc;
}

}  // namespace gallery_detail

inline Scene make_scene(const std::string& name) {
    using namespace gallery_detail;
    Scene sc;
    sc.name = name;

    if (name == "EX-Z2") {
        // single chart, s = z^2 as a real map; local degree 2 at the origin
        KuranishiChart c;
        c.id = "p";
        c.base = BoxUnion(2, {box2(Rat(-2), Rat(2), Rat(-2), Rat(2))});
        c.fiber_rank = 2;
        c.group = GroupAction::trivial(2, 2);
        Poly x = Poly::var(2, 0), y = Poly::var(2, 1);
        c.section = PolySection::make(2, {x * x - y * y, (x * y) * Rat(2)});
        c.footprint = {{"p", {Rat(0), Rat(0)}}};
        sc.pres.charts = {c};
        sc.pres.x.labels = {"p"};
        sc.radii = {{"p", Rat(1)}};
        return sc;
    }

    if (name == "EX-SYM") {
        // s(t) = t with the sign flip on base and fiber; one fixed transverse
        // zero with stabilizer of order 2
        KuranishiChart c;
        c.id = "f";
        c.base = BoxUnion(1, {box1(Rat(-1), Rat(1))});
        c.fiber_rank = 1;
        c.group = z2_line();
        c.section = PolySection::make(1, {Poly::var(1, 0)});
        c.footprint = {{"f", {Rat(0)}}};
        sc.pres.charts = {c};
        sc.pres.x.labels = {"f"};
        sc.radii = {{"f", Rat(1)}};
        return sc;
    }

    if (name == "EX-JUMP") {
        // 1-dim chart glued along the axis of a 2-dim chart; both zeros of
        // the axis profile are degenerate, so the signed count is 0
        KuranishiChart cm;
        cm.id = "m";
        cm.base = BoxUnion(1, {box1(Rat(-1), Rat(1))});
        cm.fiber_rank = 1;
        cm.group = GroupAction::trivial(1, 1);
        cm.section = PolySection::make(1, {jump_axis(1, 0)});
        cm.footprint = {{"m", {Rat(0)}}};

        KuranishiChart cn;
        cn.id = "n";
        cn.base = BoxUnion(2, {box2(Rat(-1), Rat(3), Rat(-1), Rat(1))});
        cn.fiber_rank = 2;
        cn.group = GroupAction::trivial(2, 2);
        cn.section = PolySection::make(2, {jump_axis(2, 0), Poly::var(2, 1)});
        cn.footprint = {{"m", {Rat(0), Rat(0)}}, {"n", {Rat(2), Rat(0)}}};

        sc.pres.charts = {cm, cn};
        sc.pres.changes = {axis_change("m", "n", cm.base, 1, 2, 1, 2)};
        sc.pres.x.labels = {"m", "n"};
        sc.pres.x.set("m", "n", Rat(1));
        sc.radii = {{"m", Rat(1)}, {"n", Rat(3)}};
        return sc;
    }

    if (name == "EX-CHAIN" || name == "EX-FIG3") {
        // three charts of dims 1 < 2 < 3 sharing the axis profile u(u-2)(u-4).
        // EX-CHAIN's metric keeps all extracted coverages pairwise
        // intersecting; EX-FIG3's metric spreads the labels so extraction
        // yields composable changes with no direct (a,c) change.
        KuranishiChart ca;
        ca.id = "a";
        ca.base = BoxUnion(1, {box1(Rat(-1), Rat(1))});
        ca.fiber_rank = 1;
        ca.group = GroupAction::trivial(1, 1);
        ca.section = PolySection::make(1, {chain_axis(1, 0)});
        ca.footprint = {{"a", {Rat(0)}}};

        KuranishiChart cb;
        cb.id = "b";
        cb.base = BoxUnion(2, {box2(Rat(-1), Rat(3), Rat(-1), Rat(1))});
        cb.fiber_rank = 2;
        cb.group = GroupAction::trivial(2, 2);
        cb.section = PolySection::make(2, {chain_axis(2, 0), Poly::var(2, 1)});
        cb.footprint = {{"a", {Rat(0), Rat(0)}}, {"b", {Rat(2), Rat(0)}}};

        KuranishiChart cc3;
        cc3.id = "c";
        cc3.base = BoxUnion(3, {Box{Ival{Rat(-1), Rat(5)}, Ival{Rat(-1), Rat(1)}, Ival{Rat(-1), Rat(1)}}});
        cc3.fiber_rank = 3;
        cc3.group = GroupAction::trivial(3, 3);
        cc3.section = PolySection::make(3, {chain_axis(3, 0), Poly::var(3, 1), Poly::var(3, 2)});
        cc3.footprint = {{"a", {Rat(0), Rat(0), Rat(0)}}, {"b", {Rat(2), Rat(0), Rat(0)}}, {"c", {Rat(4), Rat(0), Rat(0)}}};

        sc.pres.charts = {ca, cb, cc3};
        sc.pres.changes = {axis_change("a", "b", ca.base, 1, 2, 1, 2), axis_change("a", "c", ca.base, 1, 3, 1, 3),
                           axis_change("b", "c", cb.base, 2, 3, 2, 3)};
        sc.pres.x.labels = {"a", "b", "c"};
        if (name == "EX-CHAIN") {
            sc.pres.x.set("a", "b", Rat(1));
            sc.pres.x.set("b", "c", Rat(3));
            sc.pres.x.set("a", "c", Rat(4));
            sc.radii = {{"a", Rat(1)}, {"b", Rat(5, 2)}, {"c", Rat(9)}};
        } else {
            sc.pres.x.set("a", "b", Rat(1));
            sc.pres.x.set("b", "c", Rat(5));
            sc.pres.x.set("a", "c", Rat(6));
            sc.radii = {{"a", Rat(1)}, {"b", Rat(4)}, {"c", Rat(11)}};
        }
        return sc;
    }

    if (name == "EX-FIG4") {
        // three 1-dim charts along t(t^2-4); coverages collapse to singletons
        // under small extraction radii while the bases stay glued, the
        // non-identification-matching picture
        Poly t = Poly::var(1, 0);
        Poly f = t * (t * t - Poly::constant(1, Rat(4)));
        auto line = [&](const std::string& id, Rat lo, Rat hi, std::vector<FootprintPoint> fps) {
            KuranishiChart c;
            c.id = id;
            c.base = BoxUnion(1, {box1(lo, hi)});
            c.fiber_rank = 1;
            c.group = GroupAction::trivial(1, 1);
            c.section = PolySection::make(1, {f});
            c.footprint = std::move(fps);
            return c;
        };
        KuranishiChart cx = line("x", Rat(-3), Rat(1), {{"x", {Rat(-2)}}, {"z", {Rat(0)}}});
        KuranishiChart cy = line("y", Rat(-1), Rat(3), {{"z", {Rat(0)}}, {"y", {Rat(2)}}});
        KuranishiChart cz = line("z", Rat(-1), Rat(1), {{"z", {Rat(0)}}});
        sc.pres.charts = {cx, cy, cz};
        sc.pres.changes = {axis_change("z", "x", cz.base, 1, 1, 1, 1), axis_change("z", "y", cz.base, 1, 1, 1, 1)};
        sc.pres.x.labels = {"x", "y", "z"};
        sc.pres.x.set("x", "z", Rat(1));
        sc.pres.x.set("z", "y", Rat(1));
        sc.pres.x.set("x", "y", Rat(2));
        sc.radii = {{"x", Rat(1)}, {"y", Rat(1)}, {"z", Rat(1)}};
        return sc;
    }

    if (name == "EX-FIG8") {
        // a line glued into a 3-dim chart along part of its axis; the domain
        // boundary sits inside both charts, the non-Hausdorff pair of the
        // figure, cured by strong shrinking
        Poly t1 = Poly::var(1, 0);
        Poly prof1 = t1 * (t1 - Poly::constant(1, Rat(3)));
        KuranishiChart cp;
        cp.id = "p";
        cp.base = BoxUnion(1, {box1(Rat(-2), Rat(2))});
        cp.fiber_rank = 1;
        cp.group = GroupAction::trivial(1, 1);
        cp.section = PolySection::make(1, {prof1});
        cp.footprint = {{"p", {Rat(0)}}};

        Poly t3 = Poly::var(3, 0);
        Poly prof3 = t3 * (t3 - Poly::constant(3, Rat(3)));
        KuranishiChart cq;
        cq.id = "q";
        cq.base = BoxUnion(3, {Box{Ival{Rat(-4), Rat(4)}, Ival{Rat(-1), Rat(1)}, Ival{Rat(-1), Rat(1)}}});
        cq.fiber_rank = 3;
        cq.group = GroupAction::trivial(3, 3);
        cq.section = PolySection::make(3, {prof3, Poly::var(3, 1), Poly::var(3, 2)});
        cq.footprint = {{"p", {Rat(0), Rat(0), Rat(0)}}, {"q", {Rat(3), Rat(0), Rat(0)}}};

        sc.pres.charts = {cp, cq};
        sc.pres.changes = {axis_change("p", "q", BoxUnion(1, {box1(Rat(-1), Rat(1))}), 1, 3, 1, 3)};
        sc.pres.x.labels = {"p", "q"};
        sc.pres.x.set("p", "q", Rat(1));
        sc.radii = {{"p", Rat(1)}, {"q", Rat(3)}};
        sc.margin = Rat(15, 8);
        return sc;
    }

    if (name == "EX-STRIP") {
        // the folded strip: V_x and V_y overlap in the middle, the 1-dim end
        // chart glues the far ends together with a flip (lambda is even, so
        // both intertwinings are exact). V_xy additionally has a closed box
        // removed; the identification survives through the reverse change.
        KuranishiChart cx;
        cx.id = "x";
        cx.base = BoxUnion(2, {box2(Rat(-4), Rat(2), Rat(-1), Rat(1))});
        cx.fiber_rank = 2;
        cx.group = GroupAction::trivial(2, 2);
        cx.section = PolySection::make(2, {strip_lambda(2, 0), Poly::var(2, 1)});
        cx.footprint = {{"z", {Rat(-3), Rat(0)}}, {"x", {Rat(-1), Rat(0)}}, {"y", {Rat(1), Rat(0)}}};

        KuranishiChart cy;
        cy.id = "y";
        cy.base = BoxUnion(2, {box2(Rat(-2), Rat(4), Rat(-1), Rat(1))});
        cy.fiber_rank = 2;
        cy.group = GroupAction::trivial(2, 2);
        cy.section = PolySection::make(2, {strip_lambda(2, 0), Poly::var(2, 1)});
        cy.footprint = {{"x", {Rat(-1), Rat(0)}}, {"y", {Rat(1), Rat(0)}}, {"z", {Rat(3), Rat(0)}}};

        KuranishiChart cz;
        cz.id = "z";
        cz.base = BoxUnion(1, {box1(Rat(-1), Rat(1))});
        cz.fiber_rank = 1;
        cz.group = GroupAction::trivial(1, 1);
        {
            Affine shift{Mat(1, 1), {Rat(-3)}};
            shift.A(0, 0) = 1;
            cz.section = PolySection::make(1, {strip_lambda(1, 0).compose_affine(shift)});  // lambda(a-3)
        }
        cz.footprint = {{"z", {Rat(0)}}};

        // z -> x: a |-> (a-3, 0)
        CoordinateChange zx;
        zx.from_id = "z";
        zx.to_id = "x";
        zx.domain = cz.base;
        zx.base_map = Affine{Mat(2, 1), {Rat(-3), Rat(0)}};
        zx.base_map.A(0, 0) = 1;
        zx.bundle_map = Mat(2, 1);
        zx.bundle_map(0, 0) = 1;

        // z -> y: a |-> (3-a, 0), the flipped end (needs lambda even)
        CoordinateChange zy;
        zy.from_id = "z";
        zy.to_id = "y";
        zy.domain = cz.base;
        zy.base_map = Affine{Mat(2, 1), {Rat(3), Rat(0)}};
        zy.base_map.A(0, 0) = -1;
        zy.bundle_map = Mat(2, 1);
        zy.bundle_map(0, 0) = 1;

        BoxUnion overlap(2, {box2(Rat(-2), Rat(2), Rat(-1), Rat(1))});
        // y -> x over the overlap with the closed box [-1/4,1/4]^2 removed
        CoordinateChange yx = axis_change("y", "x", overlap, 2, 2, 2, 2);
        yx.domain = subtract_closed(overlap, BoxUnion(2, {box2(Rat(-1, 4), Rat(1, 4), Rat(-1, 4), Rat(1, 4))}));
        // x -> y over the full overlap
        CoordinateChange xy = axis_change("x", "y", overlap, 2, 2, 2, 2);

        sc.pres.charts = {cx, cy, cz};
        sc.pres.changes = {zx, zy, yx, xy};
        sc.pres.x.labels = {"x", "y", "z"};
        sc.pres.x.set("x", "y", Rat(2));
        sc.pres.x.set("x", "z", Rat(2));
        sc.pres.x.set("y", "z", Rat(2));
        sc.radii = {{"x", Rat(1)}, {"y", Rat(1)}, {"z", Rat(1)}};
        return sc;
    }

    if (name == "EX-DISKS" || name == "EX-PUNCT") {
        // the paper's two disks sharing the zero z, approximated by plus-shaped
        // box unions. EX-DISKS mediates through a 1-dim segment chart;
        // EX-PUNCT through a punctured 2-dim copy. Both fail matching at the
        // pair (x, y).
        BoxUnion plus(2, {box2(Rat(-2), Rat(2), Rat(-1, 2), Rat(1, 2)), box2(Rat(-1, 2), Rat(1, 2), Rat(-2), Rat(2))});
        Poly a2 = Poly::var(2, 0);
        Poly axis2 = a2 * (a2 - Poly::constant(2, Rat(1)));

        KuranishiChart cx;
        cx.id = "x";
        cx.base = plus;
        cx.fiber_rank = 2;
        cx.group = GroupAction::trivial(2, 2);
        cx.section = PolySection::make(2, {axis2, Poly::var(2, 1)});
        cx.footprint = {{"x", {Rat(0), Rat(0)}}, {"z", {Rat(1), Rat(0)}}};

        KuranishiChart cy = cx;
        cy.id = "y";
        cy.footprint = {{"y", {Rat(0), Rat(0)}}, {"z", {Rat(1), Rat(0)}}};

        KuranishiChart cz;
        if (name == "EX-DISKS") {
            cz.id = "z";
            cz.base = BoxUnion(1, {box1(Rat(0), Rat(2))});
            cz.fiber_rank = 1;
            cz.group = GroupAction::trivial(1, 1);
            Poly a1 = Poly::var(1, 0);
            cz.section = PolySection::make(1, {a1 * (a1 - Poly::constant(1, Rat(1)))});
            cz.footprint = {{"z", {Rat(1)}}};
            sc.pres.changes = {axis_change("z", "x", cz.base, 1, 2, 1, 2), axis_change("z", "y", cz.base, 1, 2, 1, 2)};
        } else {
            cz.id = "z";
            cz.base = subtract_point(plus, {Rat(0), Rat(0)});
            cz.fiber_rank = 2;
            cz.group = GroupAction::trivial(2, 2);
            cz.section = cx.section;
            cz.footprint = {{"z", {Rat(1), Rat(0)}}};
            sc.pres.changes = {axis_change("z", "x", cz.base, 2, 2, 2, 2), axis_change("z", "y", cz.base, 2, 2, 2, 2)};
        }

        sc.pres.charts = {cx, cy, cz};
        sc.pres.x.labels = {"x", "y", "z"};
        sc.pres.x.set("x", "z", Rat(1));
        sc.pres.x.set("y", "z", Rat(1));
        sc.pres.x.set("x", "y", Rat(2));
        sc.radii = {{"x", Rat(1)}, {"y", Rat(1)}, {"z", Rat(1)}};
        return sc;
    }

    throw UnknownGallery("unknown gallery scene '" + name + "'");
}

inline std::vector<std::string> gallery_names() {
    return {"EX-STRIP", "EX-DISKS", "EX-PUNCT", "EX-FIG3", "EX-FIG4", "EX-FIG8", "EX-Z2", "EX-JUMP", "EX-SYM", "EX-CHAIN"};
}

}  // namespace kur

// Level-1 machinery: tubular data construction, certificates, compatibility
// of triples, the inductive level-1 GCS build, and level-1 embeddings.

#include <catch2/catch_amalgamated.hpp>

#include "kuranishi/gallery.hpp"
#include "kuranishi/level1.hpp"

using namespace kur;

namespace {

Level1GCS chain_level1(const Rat& fiber_scale = Rat(1)) {
    Scene sc = make_scene("EX-CHAIN");
    auto g = extract_gcs(sc.pres, sc.radii, sc.pres.x.labels);
    auto si = strongly_intersecting_shrink(g, sc.pres, Rat(1, 8), 6);
    return build_level1_gcs(si.gcs, Rat(1, 4), Rat(1, 8), std::nullopt, fiber_scale);
}

}  // namespace

TEST_CASE("build_level1_cc") {
    SECTION("same-dimension change has trivial level-1 data") {
        Scene sc = make_scene("EX-STRIP");
        const auto& pres = sc.pres;
        const CoordinateChange* xy = pres.change("x", "y");
        auto built = build_level1_cc(*xy, pres.chart("x"), pres.chart("y"), Rat(1, 8));
        CHECK(built.l1.trivial());
        CHECK(set_equal(built.l1.tub.W, affine_image_square(xy->base_map, xy->domain)));
        CHECK(built.l1.pi_hat == Mat::identity(2));
    }

    SECTION("EX-JUMP: W = segment x (-r,r), pi resets the normal, quotient derivative 1") {
        Scene sc = make_scene("EX-JUMP");
        const auto& pres = sc.pres;
        const CoordinateChange* mn = pres.change("m", "n");
        auto built = build_level1_cc(*mn, pres.chart("m"), pres.chart("n"), Rat(1, 10));
        const Level1CoordinateChange& l1 = built.l1;
        REQUIRE_FALSE(l1.trivial());
        REQUIRE(l1.tub.normal_pins.size() == 1);
        CHECK(l1.tub.normal_pins[0].first == 1);
        CHECK(l1.tub.normal_pins[0].second == Rat(0));
        // pi(t,u) = (t,0)
        CHECK(l1.tub.pi.apply({Rat(1, 3), Rat(1, 7)}) == RatVec{Rat(1, 3), Rat(0)});
        // Etilde = span{(1,0)}
        CHECK(same_span(l1.etilde, Mat::from_cols({{Rat(1), Rat(0)}})));
        // W is the expected product box
        Rat r = l1.fiber_radii[0];
        CHECK(r > 0);
        CHECK(set_equal(l1.tub.W, BoxUnion(2, {box2(Rat(-1), Rat(1), -r, r)})));
        auto cert = level1_certificates(l1, pres.chart("m"), pres.chart("n"), Rat(1, 10));
        CHECK(cert.pass());
        CHECK(cert.min_sigma == Catch::Approx(1.0));
    }

    SECTION("EX-STRIP (z->y): a strip around the embedded curve with no extra zeros") {
        Scene sc = make_scene("EX-STRIP");
        const auto& pres = sc.pres;
        const CoordinateChange* zy = pres.change("z", "y");
        auto built = build_level1_cc(*zy, pres.chart("z"), pres.chart("y"), Rat(1, 10));
        const Level1CoordinateChange& l1 = built.l1;
        REQUIRE_FALSE(l1.trivial());
        auto cert = level1_certificates(l1, pres.chart("z"), pres.chart("y"), Rat(1, 10));
        CHECK(cert.pass());
        CHECK(cert.no_leaked_zeros);  // s_y's second component is b, nonzero off the axis
        // the strip sits around the flipped image (2,4) x {0}
        CHECK(l1.tub.W.contains({Rat(3), Rat(0)}));
        CHECK_FALSE(l1.tub.W.contains({Rat(0), Rat(0)}));
    }

    SECTION("strong-neighborhood carve keeps fibers complete in the new base") {
        Scene sc = make_scene("EX-JUMP");
        const auto& pres = sc.pres;
        auto built = build_level1_cc(*pres.change("m", "n"), pres.chart("m"), pres.chart("n"), Rat(1, 10));
        // over the image region the new base equals W: points above the
        // radius were carved away
        Rat r = built.l1.fiber_radii[0];
        CHECK(built.new_target_base.contains({Rat(0), Rat(r / 2)}));
        CHECK_FALSE(built.new_target_base.contains({Rat(0), Rat(r + Rat(1, 100))}));
        // away from the image the base survives
        CHECK(built.new_target_base.contains({Rat(2), Rat(1, 2)}));
    }
}

TEST_CASE("check_level1_compat") {
    SECTION("identity triple passes with identity witness") {
        Scene sc = make_scene("EX-Z2");
        const KuranishiChart& c = sc.pres.charts[0];
        CoordinateChange id;
        id.from_id = id.to_id = "p";
        id.domain = c.base;
        id.base_map = Affine::identity(2);
        id.bundle_map = Mat::identity(2);
        auto built = build_level1_cc(id, c, c, Rat(1, 8));
        auto rep = check_level1_compat(built.l1, built.l1, built.l1, c, Rat(1, 8));
        CHECK(rep.pass);
        CHECK(rep.witness == 0);
    }

    SECTION("EX-CHAIN level-1 output passes the unique triple, independently re-checked") {
        auto l1g = chain_level1();
        const auto* ab = l1g.l1("a", "b");
        const auto* ac = l1g.l1("a", "c");
        const auto* bc = l1g.l1("b", "c");
        REQUIRE(ab);
        REQUIRE(ac);
        REQUIRE(bc);
        const KuranishiChart& top = l1g.gcs.charts[static_cast<size_t>(l1g.gcs.index_of("c"))];
        auto rep = check_level1_compat(*ab, *ac, *bc, top, Rat(1, 8));
        CHECK_FALSE(rep.vacuous);
        CHECK(rep.pass);
        CHECK(l1g.witnesses.size() == 1);
    }

    SECTION("perturbed Etilde fails at the pullback equality") {
        auto l1g = chain_level1();
        Level1CoordinateChange bad = *l1g.l1("a", "c");
        bad.etilde = Mat::from_cols({{Rat(1), Rat(1), Rat(0)}});  // tilted span
        const KuranishiChart& top = l1g.gcs.charts[static_cast<size_t>(l1g.gcs.index_of("c"))];
        auto rep = check_level1_compat(*l1g.l1("a", "b"), bad, *l1g.l1("b", "c"), top, Rat(1, 8));
        REQUIRE_FALSE(rep.pass);
        CHECK(rep.failed_identity == "etilde-pullback");
    }
}

TEST_CASE("build_level1_gcs") {
    SECTION("single-index system is trivially level-1") {
        Scene sc = make_scene("EX-Z2");
        auto g = extract_gcs(sc.pres, sc.radii, sc.pres.x.labels);
        auto l1g = build_level1_gcs(g, Rat(1, 4), Rat(1, 10));
        CHECK(l1g.table.empty());
        CHECK(l1g.gcs.charts.size() == 1);
    }

    SECTION("EX-CHAIN: full level-1 structure with exact certificates") {
        auto l1g = chain_level1();
        REQUIRE(l1g.table.size() == 3);
        for (const auto& [key, l1] : l1g.table) {
            const KuranishiChart& src = l1g.gcs.charts[static_cast<size_t>(l1g.gcs.index_of(key.first))];
            const KuranishiChart& tgt = l1g.gcs.charts[static_cast<size_t>(l1g.gcs.index_of(key.second))];
            auto cert = level1_certificates(l1, src, tgt, Rat(1, 8));
            INFO(key.first + "->" + key.second);
            CHECK(cert.pass());
            CHECK(cert.min_sigma > 1e-8);
            // projection laws: pi_hat restricted to the span is the identity
            CHECK(l1.pi_hat * l1.etilde == l1.etilde);
            CHECK(l1.pi_hat * l1.pi_hat == l1.pi_hat);
        }
    }

    SECTION("the induction never modifies previously built domain charts") {
        Scene sc = make_scene("EX-CHAIN");
        auto g = extract_gcs(sc.pres, sc.radii, sc.pres.x.labels);
        auto si = strongly_intersecting_shrink(g, sc.pres, Rat(1, 8), 6);
        auto inset0 = precompact_inset(si.gcs, Rat(1, 4));
        auto l1g = build_level1_gcs(si.gcs, Rat(1, 4), Rat(1, 8));
        // charts a and b should keep exactly their phase-0 inset bases in the
        // coordinates below the top chart: a is never a carve target with
        // incoming pairs... a has none, b is carved once as a target but its
        // domain role for (b,c) is frozen afterwards. The chart a base is
        // untouched:
        CHECK(set_equal(l1g.gcs.charts[static_cast<size_t>(l1g.gcs.index_of("a"))].base,
                        inset0[static_cast<size_t>(si.gcs.index_of("a"))]));
    }

    SECTION("prescribed inner shrinking is contained (controlling the size)") {
        Scene sc = make_scene("EX-CHAIN");
        auto g = extract_gcs(sc.pres, sc.radii, sc.pres.x.labels);
        auto si = strongly_intersecting_shrink(g, sc.pres, Rat(1, 8), 6);
        std::vector<BoxUnion> inner;
        for (const auto& c : si.gcs.charts) {
            BoxUnion u(c.dim());
            for (const auto& fp : c.footprint) {
                Box b(fp.point.size());
                for (size_t i = 0; i < fp.point.size(); ++i) b[i] = Ival{fp.point[i] - Rat(1, 8), fp.point[i] + Rat(1, 8)};
                u.boxes.push_back(b);
            }
            inner.push_back(u);
        }
        auto l1g = build_level1_gcs(si.gcs, Rat(1, 4), Rat(1, 8), inner);
        for (size_t i = 0; i < inner.size(); ++i) CHECK(subset(inner[i], l1g.gcs.charts[i].base));
    }

    SECTION("rebuilding at a different fiber radius yields valid data") {
        auto l1a = chain_level1(Rat(1));
        auto l1b = chain_level1(Rat(1, 2));
        const auto* wa = l1a.l1("a", "b");
        const auto* wb = l1b.l1("a", "b");
        REQUIRE(wa);
        REQUIRE(wb);
        CHECK(wb->fiber_radii[0] == wa->fiber_radii[0] / 2);
    }
}

TEST_CASE("build_level1_embedding") {
    SECTION("identity embedding: Pi is the identity per index") {
        Scene sc = make_scene("EX-Z2");
        auto g = extract_gcs(sc.pres, sc.radii, sc.pres.x.labels);
        auto l1g = build_level1_gcs(g, Rat(1, 4), Rat(1, 10));
        KuranishiEmbedding ke;
        ke.src = &l1g.gcs;
        ke.tgt = &l1g.gcs;
        CoordinateChange id;
        id.from_id = id.to_id = "p";
        id.domain = l1g.gcs.charts[0].base;
        id.base_map = Affine::identity(2);
        id.bundle_map = Mat::identity(2);
        ke.emb["p"] = id;
        auto emb = build_level1_embedding(ke, l1g);
        CHECK(emb.charts.at("p").tub.trivial());
        CHECK(emb.charts.at("p").pi_hat == Mat::identity(2));
    }

    SECTION("EX-Z2 into its stabilization: Pi drops the last coordinate") {
        Scene sc = make_scene("EX-Z2");
        auto g = extract_gcs(sc.pres, sc.radii, sc.pres.x.labels);
        auto l1g = build_level1_gcs(g, Rat(1, 4), Rat(1, 10));

        // stabilized copy: U x (-1,1), E ⊕ R, s ⊕ u
        GoodCoordinateSystem stab = l1g.gcs;
        KuranishiChart& c = stab.charts[0];
        KuranishiChart orig = c;
        c.base = BoxUnion(3, [&] {
            std::vector<Box> bs;
            for (const Box& b : orig.base.boxes) {
                Box nb = b;
                nb.push_back(Ival{Rat(-1), Rat(1)});
                bs.push_back(nb);
            }
            return bs;
        }());
        c.fiber_rank = 3;
        c.group = GroupAction::trivial(3, 3);
        {
            Poly x = Poly::var(3, 0), y = Poly::var(3, 1), u = Poly::var(3, 2);
            c.section = PolySection::make(3, {x * x - y * y, (x * y) * Rat(2), u});
        }
        c.footprint = {{"p", {Rat(0), Rat(0), Rat(0)}}};
        stab.leq = build_order(stab.charts);

        KuranishiEmbedding ke;
        ke.src = &l1g.gcs;
        ke.tgt = &stab;
        CoordinateChange e;
        e.from_id = e.to_id = "p";
        e.domain = l1g.gcs.charts[0].base;
        e.base_map = Affine{Mat(3, 2), {Rat(0), Rat(0), Rat(0)}};
        e.base_map.A(0, 0) = 1;
        e.base_map.A(1, 1) = 1;
        e.bundle_map = Mat(3, 2);
        e.bundle_map(0, 0) = 1;
        e.bundle_map(1, 1) = 1;
        ke.emb["p"] = e;

        auto emb = build_level1_embedding(ke, l1g);
        const auto& ce = emb.charts.at("p");
        REQUIRE_FALSE(ce.tub.trivial());
        // Pi = drop-last-coordinate
        CHECK(ce.tub.pi.apply({Rat(1, 3), Rat(1, 5), Rat(1, 2)}) == RatVec{Rat(1, 3), Rat(1, 5), Rat(0)});
        // Ftilde = first-two-components subbundle
        CHECK(same_span(ce.ftilde, Mat::from_cols({{Rat(1), Rat(0), Rat(0)}, {Rat(0), Rat(1), Rat(0)}})));
        // W is the whole target base
        CHECK(set_equal(ce.tub.W, stab.charts[0].base));
    }

    SECTION("EX-CHAIN into its one-step stabilization: squares commute with identity witnesses") {
        auto l1g = chain_level1();
        // stabilize every chart by one extra coordinate u with section u
        GoodCoordinateSystem stab = l1g.gcs;
        for (auto& c : stab.charts) {
            KuranishiChart orig = c;
            std::vector<Box> bs;
            for (const Box& b : orig.base.boxes) {
                Box nb = b;
                nb.push_back(Ival{Rat(-1), Rat(1)});
                bs.push_back(nb);
            }
            c.base = BoxUnion(orig.dim() + 1, bs);
            c.fiber_rank = orig.fiber_rank + 1;
            c.group = GroupAction::trivial(orig.dim() + 1, orig.fiber_rank + 1);
            std::vector<Poly> comps;
            Affine drop{Mat(orig.dim(), orig.dim() + 1), RatVec(static_cast<size_t>(orig.dim()), Rat(0))};
            for (int i = 0; i < orig.dim(); ++i) drop.A(i, i) = 1;
            for (const Poly& p : orig.section.components) comps.push_back(p.compose_affine(drop));
            comps.push_back(Poly::var(orig.dim() + 1, orig.dim()));
            c.section = PolySection::make(orig.dim() + 1, comps);
            for (auto& fp : c.footprint) fp.point.push_back(Rat(0));
        }
        stab.leq = build_order(stab.charts);
        // target changes: the stabilized axis inclusions
        for (auto& [key, gc] : stab.changes) {
            const KuranishiChart& src = l1g.gcs.charts[static_cast<size_t>(l1g.gcs.index_of(key.first))];
            const KuranishiChart& tgt = l1g.gcs.charts[static_cast<size_t>(l1g.gcs.index_of(key.second))];
            CoordinateChange nc;
            nc.from_id = key.first;
            nc.to_id = key.second;
            // base map: old columns plus u |-> u in the last slots
            nc.base_map = Affine{Mat(tgt.dim() + 1, src.dim() + 1), RatVec(static_cast<size_t>(tgt.dim() + 1), Rat(0))};
            for (int i = 0; i < tgt.dim(); ++i) nc.base_map.b[static_cast<size_t>(i)] = gc.cc.base_map.b[static_cast<size_t>(i)];
            for (int i = 0; i < tgt.dim(); ++i)
                for (int j = 0; j < src.dim(); ++j) nc.base_map.A(i, j) = gc.cc.base_map.A(i, j);
            nc.base_map.A(tgt.dim(), src.dim()) = 1;
            nc.bundle_map = Mat(tgt.fiber_rank + 1, src.fiber_rank + 1);
            for (int i = 0; i < tgt.fiber_rank; ++i)
                for (int j = 0; j < src.fiber_rank; ++j) nc.bundle_map(i, j) = gc.cc.bundle_map(i, j);
            nc.bundle_map(tgt.fiber_rank, src.fiber_rank) = 1;
            // domain: the stabilized domain
            std::vector<Box> bs;
            for (const Box& b : gc.cc.domain.boxes) {
                Box nb = b;
                nb.push_back(Ival{Rat(-1), Rat(1)});
                bs.push_back(nb);
            }
            nc.domain = BoxUnion(src.dim() + 1, bs);
            gc.cc = nc;
        }

        KuranishiEmbedding ke;
        ke.src = &l1g.gcs;
        ke.tgt = &stab;
        for (const auto& c : l1g.gcs.charts) {
            CoordinateChange e;
            e.from_id = e.to_id = c.id;
            e.domain = c.base;
            e.base_map = Affine{Mat(c.dim() + 1, c.dim()), RatVec(static_cast<size_t>(c.dim() + 1), Rat(0))};
            for (int i = 0; i < c.dim(); ++i) e.base_map.A(i, i) = 1;
            e.bundle_map = Mat(c.fiber_rank + 1, c.fiber_rank);
            for (int i = 0; i < c.fiber_rank; ++i) e.bundle_map(i, i) = 1;
            ke.emb[c.id] = e;
        }
        // target bases must be cylinders over the images: they are products
        // base x (-1,1) by construction
        REQUIRE_NOTHROW(build_level1_embedding(ke, l1g));
    }
}

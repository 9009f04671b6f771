// Good-coordinate-system machinery: extraction, shrinking, strong
// sequences, the strongly intersecting loop, grouping, inducing back.

#include <catch2/catch_amalgamated.hpp>

#include "kuranishi/gallery.hpp"
#include "kuranishi/gcs.hpp"

using namespace kur;

namespace {

GoodCoordinateSystem extract_scene(const std::string& name) {
    Scene sc = make_scene(name);
    std::vector<std::string> seeds = sc.pres.x.labels;
    return extract_gcs(sc.pres, sc.radii, seeds);
}

}  // namespace

TEST_CASE("extract_gcs") {
    SECTION("single chart covering all of X: |S|=1, no nontrivial changes") {
        auto g = extract_scene("EX-Z2");
        CHECK(g.charts.size() == 1);
        CHECK(g.changes.empty());
        REQUIRE_NOTHROW(check_gcs_structure(g, Rat(1, 10)));
    }

    SECTION("EX-CHAIN: |S|=3 with three RESTRICTED changes") {
        auto g = extract_scene("EX-CHAIN");
        REQUIRE(g.charts.size() == 3);
        REQUIRE(g.changes.size() == 3);
        for (const auto& [k, gc] : g.changes) CHECK(gc.provenance == ChangeProvenance::RESTRICTED);
        // all coverages pairwise intersect
        for (int a = 0; a < 3; ++a)
            for (int b = a + 1; b < 3; ++b) CHECK(g.coverages_meet(a, b));
        REQUIRE_NOTHROW(check_gcs_structure(g, Rat(1, 10)));
        // extraction deleted no zero here: every label stays covered by all
        // charts that covered it
        CHECK(g.charts[2].footprint.size() == 3);
    }

    SECTION("EX-FIG3: extraction deletes the far zero and no (a,c) change arises") {
        auto g = extract_scene("EX-FIG3");
        REQUIRE(g.charts.size() == 3);
        CHECK(g.changes.size() == 2);
        CHECK(g.change("a", "b"));
        CHECK(g.change("b", "c"));
        CHECK_FALSE(g.change("a", "c"));
        // chart c lost its a-zero: base punctured at the origin
        int ci = g.index_of("c");
        CHECK_FALSE(g.charts[static_cast<size_t>(ci)].base.contains({Rat(0), Rat(0), Rat(0)}));
        CHECK(g.charts[static_cast<size_t>(ci)].base.contains({Rat(1, 10), Rat(0), Rat(0)}));
        // composable pair without a direct change: not closed under composition
        CHECK_FALSE(changes_closed_under_composition(g));
        REQUIRE_NOTHROW(check_gcs_structure(g, Rat(1, 10)));
    }

    SECTION("case (c): equal-dimension pair assembles an INVERTED change") {
        // two 1-dim charts u,v sharing label w; u not covered by v's chart;
        // radii force the pair (u,v) while only the change v->u exists
        KuranishiPresentation p;
        Poly t = Poly::var(1, 0);
        Poly f = t * (t - Poly::constant(1, Rat(2)));
        KuranishiChart cu;
        cu.id = "u";
        cu.base = BoxUnion(1, {box1(Rat(-1), Rat(3))});
        cu.fiber_rank = 1;
        cu.group = GroupAction::trivial(1, 1);
        cu.section = PolySection::make(1, {f});
        cu.footprint = {{"u", {Rat(0)}}, {"w", {Rat(2)}}};
        KuranishiChart cv;
        cv.id = "v";
        cv.base = BoxUnion(1, {box1(Rat(1), Rat(3))});
        cv.fiber_rank = 1;
        cv.group = GroupAction::trivial(1, 1);
        cv.section = PolySection::make(1, {f});
        cv.footprint = {{"w", {Rat(2)}}, {"v", {Rat(5, 2)}}};
        // make v its own label's zero: add v's zero to f? instead place label
        // v at 5/2 -- not a zero of f, so use a separate profile for cv
        Poly fv = f * (t - Poly::constant(1, Rat(5, 2)));
        cv.section = PolySection::make(1, {fv});
        // then cu's section must match across the change; use fv for both
        cu.section = PolySection::make(1, {fv});
        cu.footprint = {{"u", {Rat(0)}}, {"w", {Rat(2)}}, {"v", {Rat(5, 2)}}};

        CoordinateChange vu;  // v -> u: inclusion
        vu.from_id = "v";
        vu.to_id = "u";
        vu.domain = cv.base;
        vu.base_map = Affine::identity(1);
        vu.bundle_map = Mat::identity(1);

        p.charts = {cu, cv};
        p.changes = {vu};
        p.x.labels = {"u", "w", "v"};
        p.x.set("u", "w", Rat(2));
        p.x.set("w", "v", Rat(1, 2));
        p.x.set("u", "v", Rat(5, 2));
        REQUIRE_NOTHROW(p.check_structure(Rat(1, 4)));

        // order: equal dim and |G|, id tiebreak: u <= v. Coverages after
        // halving: r_u = 1: {u}; need them to intersect: r_u = 9/2 covers w.
        std::map<std::string, Rat> radii = {{"u", Rat(9, 2)}, {"v", Rat(3, 2)}};
        auto g = extract_gcs(p, radii, {"u", "v"});
        const GcsChange* gc = g.change("u", "v");
        REQUIRE(gc);
        CHECK(gc->provenance == ChangeProvenance::INVERTED);
        REQUIRE_NOTHROW(check_gcs_structure(g, Rat(1, 10)));

        SECTION("BallConfigUnrealizable when the reverse change is absent") {
            KuranishiPresentation bad = p;
            bad.changes.clear();  // structurally invalid; extraction is attempted anyway
            CHECK_THROWS_AS(extract_gcs(bad, radii, {"u", "v"}), BallConfigUnrealizable);
        }
    }

    SECTION("extraction errors") {
        Scene sc = make_scene("EX-CHAIN");
        std::map<std::string, Rat> small = sc.radii;
        small["a"] = Rat(1, 100);
        // a's half-ball covers a, but dropping the seed...
        CHECK_THROWS_AS(extract_gcs(sc.pres, small, {"a"}), NotCovering);
        std::map<std::string, Rat> big = sc.radii;
        big["b"] = Rat(100);  // exits X_b = {a,b}
        CHECK_THROWS_AS(extract_gcs(sc.pres, big, sc.pres.x.labels), BallTooLarge);
    }
}

TEST_CASE("shrink_gcs") {
    auto g = extract_scene("EX-CHAIN");

    SECTION("identity spec returns the same GCS") {
        auto s = shrink_gcs(g, g.bases());
        for (size_t i = 0; i < g.charts.size(); ++i) CHECK(set_equal(s.charts[i].base, g.charts[i].base));
        for (const auto& [k, gc] : s.changes) CHECK(set_equal(gc.cc.domain, g.change(k.first, k.second)->cc.domain));
    }

    SECTION("half-radius boxes around all zeros keep I") {
        std::vector<BoxUnion> spec;
        for (const auto& c : g.charts) {
            BoxUnion u(c.dim());
            for (const auto& fp : c.footprint) {
                Box b(fp.point.size());
                for (size_t i = 0; i < fp.point.size(); ++i) b[i] = Ival{fp.point[i] - Rat(1, 2), fp.point[i] + Rat(1, 2)};
                u.boxes.push_back(b);
            }
            spec.push_back(u);
        }
        auto s = shrink_gcs(g, spec);
        CHECK(s.changes.size() == g.changes.size());
        for (const auto& [k, gc] : s.changes) CHECK_FALSE(gc.cc.domain.empty());
    }

    SECTION("emptying a coverage pair raises IndexSetChanged") {
        std::vector<BoxUnion> spec = g.bases();
        // restrict chart b to a box around its own zero (2,0) only: label a
        // leaves chart b's coverage, so the (a,b) pair dies
        spec[static_cast<size_t>(g.index_of("b"))] = BoxUnion(2, {box2(Rat(3, 2), Rat(5, 2), Rat(-1, 2), Rat(1, 2))});
        CHECK_THROWS_AS(shrink_gcs(g, spec), IndexSetChanged);
    }

    SECTION("idempotent and monotone: twice equals once with the intersection spec") {
        std::vector<BoxUnion> spec1 = g.bases(), spec2 = g.bases();
        spec1[0] = BoxUnion(1, {box1(Rat(-3, 4), Rat(3, 4))});
        spec2[0] = BoxUnion(1, {box1(Rat(-1, 2), Rat(5, 8))});
        std::vector<BoxUnion> speci;
        for (size_t i = 0; i < spec1.size(); ++i) speci.push_back(intersect(spec1[i], spec2[i]));
        auto s12 = shrink_gcs(shrink_gcs(g, spec1), speci);
        auto si = shrink_gcs(g, speci);
        for (size_t i = 0; i < g.charts.size(); ++i) CHECK(set_equal(s12.charts[i].base, si.charts[i].base));
        for (const auto& [k, gc] : s12.changes)
            CHECK(set_equal(gc.cc.domain, si.change(k.first, k.second)->cc.domain));
    }
}

TEST_CASE("strong_shrinking_sequence") {
    SECTION("k=0 gives the empty list") {
        auto g = extract_scene("EX-Z2");
        CHECK(strong_shrinking_sequence(g, 0, Rat(1, 4)).empty());
    }

    SECTION("single chart s(t)=t on (-1,1), margin 1/4, k=3: nested dyadic boxes") {
        KuranishiPresentation p;
        KuranishiChart c;
        c.id = "o";
        c.base = BoxUnion(1, {box1(Rat(-1), Rat(1))});
        c.fiber_rank = 1;
        c.group = GroupAction::trivial(1, 1);
        c.section = PolySection::make(1, {Poly::var(1, 0)});
        c.footprint = {{"o", {Rat(0)}}};
        p.charts = {c};
        p.x.labels = {"o"};
        auto g = extract_gcs(p, {{"o", Rat(1)}}, {"o"});
        auto seq = strong_shrinking_sequence(g, 3, Rat(1, 4));
        REQUIRE(seq.size() == 3);
        // U(j) = (-1/4 * 2^{1-j}, 1/4 * 2^{1-j}): clearance cap is inactive here
        Rat expect = Rat(1, 4);
        for (int j = 0; j < 3; ++j) {
            CHECK(set_equal(seq[static_cast<size_t>(j)].charts[0].base, BoxUnion(1, {box1(-expect, expect)})));
            expect /= 2;
        }
    }

    SECTION("members are pairwise precompactly nested") {
        auto g = extract_scene("EX-JUMP");
        auto seq = strong_shrinking_sequence(g, 3, Rat(1, 4));
        for (size_t j = 1; j < seq.size(); ++j)
            for (size_t i = 0; i < g.charts.size(); ++i)
                CHECK(closure_subset(seq[j].charts[i].base, seq[j - 1].charts[i].base));
    }
}

TEST_CASE("strongly_intersecting_shrink") {
    SECTION("already strongly intersecting input returns at iteration 0") {
        Scene sc = make_scene("EX-CHAIN");
        auto g = extract_scene("EX-CHAIN");
        auto res = strongly_intersecting_shrink(g, sc.pres, Rat(1, 8), 6);
        CHECK(res.iterations == 0);
        CHECK(changes_closed_under_composition(res.gcs));
    }

    SECTION("EX-FIG4: bases stop meeting away from X after shrinking") {
        Scene sc = make_scene("EX-FIG4");
        auto g = extract_scene("EX-FIG4");
        // extraction makes all three coverages singletons while the bases
        // still glue along (-1,1): a witness exists
        REQUIRE(strongly_intersecting_witness(g, sc.pres, Rat(1, 8)).has_value());
        auto res = strongly_intersecting_shrink(g, sc.pres, Rat(1, 8), 6);
        CHECK(res.iterations >= 1);
        CHECK_FALSE(strongly_intersecting_witness(res.gcs, sc.pres, Rat(1, 8)).has_value());
        CHECK(changes_closed_under_composition(res.gcs));
    }

    SECTION("EX-FIG3: composable-without-direct resolved by shrinking") {
        Scene sc = make_scene("EX-FIG3");
        auto g = extract_scene("EX-FIG3");
        CHECK_FALSE(changes_closed_under_composition(g));
        auto res = strongly_intersecting_shrink(g, sc.pres, Rat(1, 8), 6);
        CHECK(changes_closed_under_composition(res.gcs));
    }

    SECTION("matching-violating input exhausts the budget (EX-DISKS)") {
        // topological matching is the hypothesis of the strongly intersecting
        // proposition: the common x/y approach through the z chart survives
        // every zero-centered shrinking
        Scene sc = make_scene("EX-DISKS");
        auto g = extract_scene("EX-DISKS");
        REQUIRE(strongly_intersecting_witness(g, sc.pres, Rat(1, 8)).has_value());
        CHECK_THROWS_AS(strongly_intersecting_shrink(g, sc.pres, Rat(1, 8), 4), IterationBudgetExceeded);
    }

    SECTION("EX-STRIP: the extraction separates the fold, probe resolves") {
        // the maximality violation lives away from the extracted zeros, so a
        // zero-centered shrinking separates the offending identifications
        Scene sc = make_scene("EX-STRIP");
        auto g = extract_scene("EX-STRIP");
        REQUIRE(strongly_intersecting_witness(g, sc.pres, Rat(1, 8)).has_value());
        auto res = strongly_intersecting_shrink(g, sc.pres, Rat(1, 8), 6);
        CHECK(res.iterations >= 1);
    }
}

TEST_CASE("group_by_partition") {
    auto g = extract_scene("EX-CHAIN");

    SECTION("singleton partition is isomorphic to the input") {
        auto gp = group_by_partition(g, partition_singletons(g));
        CHECK(gp.part.blocks.size() == g.charts.size());
        CHECK(gp.block_changes.size() == g.changes.size());
    }

    SECTION("partition by bundle dimension agrees with the dimension order") {
        auto part = partition_by_dimension(g);
        auto gp = group_by_partition(g, part);
        for (size_t i = 0; i + 1 < gp.part.blocks.size(); ++i) {
            int da = g.charts[static_cast<size_t>(g.index_of(gp.part.blocks[i][0]))].fiber_rank;
            int db = g.charts[static_cast<size_t>(g.index_of(gp.part.blocks[i + 1][0]))].fiber_rank;
            CHECK(da < db);
        }
    }

    SECTION("two same-dimension charts in one block form a 2-component chart") {
        // augment EX-CHAIN with a sibling 3-dim chart covering a new label d
        Scene sc = make_scene("EX-CHAIN");
        KuranishiPresentation p = sc.pres;
        KuranishiChart cd = p.chart("c");
        cd.id = "d";
        cd.base = BoxUnion(3, {Box{Ival{Rat(3), Rat(5)}, Ival{Rat(-1), Rat(1)}, Ival{Rat(-1), Rat(1)}}});
        cd.footprint = {{"c", {Rat(4), Rat(0), Rat(0)}}};
        // d's own label: the section has no further zero, so reuse label c as
        // base? charts must cover their own id; instead give d the label "c"?
        // Keep it honest: a genuine fourth label d at the zero u=4 cannot
        // exist (only three zeros). Use the existing zero: base label "c" is
        // taken, so test the partition machinery on a GCS built by hand.
        GoodCoordinateSystem gg = extract_scene("EX-CHAIN");
        KuranishiChart twin = gg.charts[static_cast<size_t>(gg.index_of("c"))];
        twin.id = "c2";
        gg.charts.push_back(twin);
        gg.leq = build_order(gg.charts);
        OrderPartition part;
        part.blocks = {{"a"}, {"b"}, {"c", "c2"}};
        auto gp = group_by_partition(gg, part);
        CHECK(gp.part.blocks[2].size() == 2);

        OrderPartition mixed;
        mixed.blocks = {{"a", "b"}, {"c", "c2"}};
        CHECK_THROWS_AS(group_by_partition(gg, mixed), MixedDimensionBlock);
    }
}

TEST_CASE("induce_kuranishi") {
    SECTION("single-chart GCS induces a single-chart presentation") {
        auto g = extract_scene("EX-Z2");
        auto p = induce_kuranishi(g);
        CHECK(p.charts.size() == 1);
        REQUIRE_NOTHROW(p.check_structure(Rat(1, 4)));
    }

    SECTION("EX-CHAIN: three labels, smallest covering index owns each") {
        auto g = extract_scene("EX-CHAIN");
        auto p = induce_kuranishi(g);
        REQUIRE(p.charts.size() == 3);
        CHECK(p.chart("a").dim() == 1);  // a owned by chart a
        CHECK(p.chart("b").dim() == 2);  // b first covered by chart b
        CHECK(p.chart("c").dim() == 3);
        REQUIRE_NOTHROW(p.check_structure(Rat(1, 4)));
        auto rep = validate_presentation(p, Rat(1, 8));
        CHECK(rep.all_pass());
    }

    SECTION("round trip with the same radii reproduces the index pairs") {
        Scene sc = make_scene("EX-CHAIN");
        auto g = extract_scene("EX-CHAIN");
        auto p2 = induce_kuranishi(g);
        auto g2 = extract_gcs(p2, sc.radii, p2.x.labels);
        auto pairs1 = g.index_pairs();
        auto pairs2 = g2.index_pairs();
        REQUIRE(pairs1.size() == pairs2.size());
        for (size_t i = 0; i < pairs1.size(); ++i) {
            CHECK(g.charts[static_cast<size_t>(pairs1[i].first)].id == g2.charts[static_cast<size_t>(pairs2[i].first)].id);
            CHECK(g.charts[static_cast<size_t>(pairs1[i].second)].id == g2.charts[static_cast<size_t>(pairs2[i].second)].id);
        }
    }
}

TEST_CASE("hausdorff probe over the GCS pipeline") {
    Scene sc = make_scene("EX-FIG8");
    auto g = extract_gcs(sc.pres, sc.radii, sc.pres.x.labels);
    REQUIRE_NOTHROW(check_gcs_structure(g, Rat(1, 10)));

    auto probe = [&](const GoodCoordinateSystem& shrunk) {
        GlueInput gi = shrunk.glue_input();
        TopologyProbeConfig cfg;
        cfg.grid_step = Rat(1, 20);
        return hausdorff_probe(
            gi, shrunk.bases(), cfg, [&](int a, int b) { return g.order_leq(a, b); },
            [&](int y, int x) -> const BoxUnion* {
                const GcsChange* gc =
                    shrunk.change(shrunk.charts[static_cast<size_t>(y)].id, shrunk.charts[static_cast<size_t>(x)].id);
                return gc ? &gc->cc.domain : nullptr;
            });
    };

    auto seq = strong_shrinking_sequence(g, 3, sc.margin);

    SECTION("member 1 still exhibits the boundary pair: CERTIFIED-FAIL") {
        auto rep = probe(seq[0]);
        REQUIRE_FALSE(rep.pass);
        REQUIRE(rep.witness.has_value());
        // the witness pair straddles the two charts at the domain boundary
        CHECK(rep.witness->chart1 != rep.witness->chart2);
        bool at_boundary = rat_abs(rep.witness->point1[0]) == Rat(1) || rat_abs(rep.witness->point2[0]) == Rat(1);
        CHECK(at_boundary);
    }

    SECTION("member 3 passes at resolution") {
        auto rep = probe(seq[2]);
        CHECK(rep.pass);
    }

    SECTION("single chart passes") {
        auto gz = extract_scene("EX-Z2");
        auto rep = probe(gz);
        CHECK(rep.pass);
    }
}

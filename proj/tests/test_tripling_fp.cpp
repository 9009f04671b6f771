// Tripling, nesting, concertedness, admissibility, fiber products.

#include <catch2/catch_amalgamated.hpp>

#include "kuranishi/degree.hpp"
#include "kuranishi/gallery.hpp"
#include "kuranishi/perturbation.hpp"
#include "kuranishi/tripling.hpp"

using namespace kur;

namespace {

Level1GCS scene_level1(const std::string& name, const Rat& grid) {
    Scene sc = make_scene(name);
    auto g = extract_gcs(sc.pres, sc.radii, sc.pres.x.labels);
    auto si = strongly_intersecting_shrink(g, sc.pres, grid, 6);
    return build_level1_gcs(si.gcs, Rat(1, 4), grid);
}

// a single-chart GCS around one chart (for stabilization targets)
GoodCoordinateSystem single_chart_gcs(KuranishiChart c, const XPoints& x) {
    GoodCoordinateSystem g;
    g.x = x;
    g.charts = {std::move(c)};
    g.leq = build_order(g.charts);
    return g;
}

// stabilize a chart by k extra coordinates on (-1,1) with section components
// equal to those coordinates
KuranishiChart stabilize(const KuranishiChart& c, int k, const std::string& suffix = "") {
    KuranishiChart s = c;
    s.id = c.id + suffix;
    std::vector<Box> bs;
    for (const Box& b : c.base.boxes) {
        Box nb = b;
        for (int i = 0; i < k; ++i) nb.push_back(Ival{Rat(-1), Rat(1)});
        bs.push_back(nb);
    }
    s.base = BoxUnion(c.dim() + k, bs);
    s.fiber_rank = c.fiber_rank + k;
    s.group = GroupAction::trivial(c.dim() + k, c.fiber_rank + k);
    Affine drop{Mat(c.dim(), c.dim() + k), RatVec(static_cast<size_t>(c.dim()), Rat(0))};
    for (int i = 0; i < c.dim(); ++i) drop.A(i, i) = 1;
    std::vector<Poly> comps;
    for (const Poly& p : c.section.components) comps.push_back(p.compose_affine(drop));
    for (int i = 0; i < k; ++i) comps.push_back(Poly::var(c.dim() + k, c.dim() + i));
    s.section = PolySection::make(c.dim() + k, comps);
    s.footprint.clear();
    for (auto fp : c.footprint) {
        for (int i = 0; i < k; ++i) fp.point.push_back(Rat(0));
        s.footprint.push_back(fp);
    }
    return s;
}

CoordinateChange stabilizing_embedding(const KuranishiChart& src, const KuranishiChart& tgt) {
    CoordinateChange e;
    e.from_id = src.id;
    e.to_id = tgt.id;
    e.domain = src.base;
    e.base_map = Affine{Mat(tgt.dim(), src.dim()), RatVec(static_cast<size_t>(tgt.dim()), Rat(0))};
    for (int i = 0; i < src.dim(); ++i) e.base_map.A(i, i) = 1;
    e.bundle_map = Mat(tgt.fiber_rank, src.fiber_rank);
    for (int i = 0; i < src.fiber_rank; ++i) e.bundle_map(i, i) = 1;
    return e;
}

}  // namespace

TEST_CASE("build_tripling") {
    SECTION("|S| = 1: the family is {{p}} with U = the base") {
        auto l1g = scene_level1("EX-Z2", Rat(1, 10));
        auto tr = build_tripling(l1g);
        REQUIRE(tr.index.subsets.size() == 1);
        CHECK(tr.index.subsets[0] == std::vector<std::string>{"p"});
        CHECK(set_equal(tr.index.u_t.at({"p"}), l1g.gcs.charts[0].base));
    }

    SECTION("EX-JUMP: S_S = {{m},{n},{m,n}} with U_{m,n} inside the tubular orbit") {
        auto l1g = scene_level1("EX-JUMP", Rat(1, 10));
        auto tr = build_tripling(l1g);
        std::vector<std::vector<std::string>> expect = {{"m"}, {"m", "n"}, {"n"}};
        std::sort(tr.index.subsets.begin(), tr.index.subsets.end());
        CHECK(tr.index.subsets == expect);
        CHECK(subset(tr.index.u_t.at({"m", "n"}), tr.cover.u3.at({"m", "n"})));
        // the tripling conditions per the definition
        const auto& u1 = tr.cover.u1.at({"m", "n"});
        const auto& u2 = tr.cover.u2.at({"m", "n"});
        const Level1CoordinateChange* l1 = l1g.l1("m", "n");
        // (a): U_beta \ domain ⊂ U1
        CHECK(subset(subtract_closed(l1g.gcs.charts[static_cast<size_t>(l1g.gcs.index_of("m"))].base, l1->cc.domain), u1));
        // (d): restricted change U1 -> U2 empty
        CHECK(intersect(intersect(l1->cc.domain, u1), affine_preimage(l1->cc.base_map, u2)).empty());
    }

    SECTION("EX-CHAIN: membership matches the brute-force definition on all 7 subsets") {
        auto l1g = scene_level1("EX-CHAIN", Rat(1, 8));
        auto tr = build_tripling(l1g);
        // independent recomputation: subsets T with I(T, max T) = T \ {max T}
        // and a grid-certified nonempty intersection of the U3 pieces
        std::vector<std::string> ids = {"a", "b", "c"};
        std::set<std::vector<std::string>> expected;
        for (unsigned mask = 1; mask < 8; ++mask) {
            std::vector<std::string> t;
            for (int i = 0; i < 3; ++i)
                if (mask & (1u << i)) t.push_back(ids[static_cast<size_t>(i)]);
            bool adm = true;
            for (size_t i = 0; i + 1 < t.size(); ++i)
                if (!l1g.l1(t[i], t.back())) adm = false;
            if (!adm) continue;
            // grid nonemptiness of the U3 intersection
            BoxUnion probe = l1g.gcs.charts[static_cast<size_t>(l1g.gcs.index_of(t.back()))].base;
            for (size_t i = 0; i + 1 < t.size(); ++i) probe = intersect(probe, tr.cover.u3.at({t[i], t.back()}));
            if (probe.empty() || grid_points(probe, Rat(1, 16)).empty()) continue;
            expected.insert(t);
        }
        std::set<std::vector<std::string>> got(tr.index.subsets.begin(), tr.index.subsets.end());
        // the builder may prune subsets whose full U_T formula empties, never
        // the other way: got ⊆ expected, and the three singletons plus the
        // full chain must be present
        for (const auto& t : got) CHECK(expected.count(t) == 1);
        CHECK(got.count({"a"}) == 1);
        CHECK(got.count({"b"}) == 1);
        CHECK(got.count({"c"}) == 1);
        CHECK(got.count({"a", "b", "c"}) == 1);

        SECTION("U_T is a cylinder over its projections (strong neighborhood property)") {
            CHECK(verify_ut_cylinders(tr));
        }
        SECTION("the tripled system chart-refines the input") {
            for (const auto& t : tr.index.subsets) {
                const BoxUnion& ut = tr.index.u_t.at(t);
                CHECK(subset(ut, l1g.gcs.charts[static_cast<size_t>(l1g.gcs.index_of(t.back()))].base));
            }
        }
    }
}

TEST_CASE("verify_nesting") {
    SECTION("singleton family passes vacuously") {
        auto l1g = scene_level1("EX-Z2", Rat(1, 10));
        auto tr = build_tripling(l1g);
        CHECK(verify_nesting(tr, Rat(1, 10)).pass);
    }
    SECTION("EX-CHAIN tripling passes on all pairs") {
        auto l1g = scene_level1("EX-CHAIN", Rat(1, 8));
        auto tr = build_tripling(l1g);
        CHECK(verify_nesting(tr, Rat(1, 8)).pass);
    }
    SECTION("corrupting U1/U2 back to the full bases breaks nesting") {
        auto l1g = scene_level1("EX-JUMP", Rat(1, 10));
        auto tr = build_tripling(l1g);
        // violate (d): let the {m} and {n} charts grow back to the full bases
        int im = tr.refined.gcs.index_of("{m}");
        int in = tr.refined.gcs.index_of("{n}");
        tr.refined.gcs.charts[static_cast<size_t>(im)].base =
            l1g.gcs.charts[static_cast<size_t>(l1g.gcs.index_of("m"))].base;
        tr.refined.gcs.charts[static_cast<size_t>(in)].base =
            l1g.gcs.charts[static_cast<size_t>(l1g.gcs.index_of("n"))].base;
        const Level1CoordinateChange* l1 = l1g.l1("m", "n");
        GcsChange bad;
        bad.cc = l1->cc;
        bad.cc.from_id = "{m}";
        bad.cc.to_id = "{n}";
        tr.refined.gcs.changes[{"{m}", "{n}"}] = bad;
        auto rep = verify_nesting(tr, Rat(1, 10));
        REQUIRE_FALSE(rep.pass);
        CHECK(rep.witness.find("{m}") != std::string::npos);
    }
}

TEST_CASE("admissible_reorder") {
    OrderTable o;
    o.ids = {"a", "b", "c"};
    auto mk = [&](std::vector<std::vector<int>> rows) {
        OrderTable t;
        t.ids = o.ids;
        for (auto& r : rows) {
            std::vector<bool> br;
            for (int v : r) br.push_back(v != 0);
            t.leq.push_back(br);
        }
        return t;
    };
    OrderTable asc = mk({{1, 1, 1}, {0, 1, 1}, {0, 0, 1}});
    OrderTable desc = mk({{1, 0, 0}, {1, 1, 0}, {1, 1, 1}});

    SECTION("identical triple orders return the common order") {
        auto res = admissible_reorder(asc, asc, asc, [](const std::string&, const std::string&) { return true; });
        CHECK(res.pass);
        CHECK(res.common.get("a", "c"));
        CHECK_FALSE(res.common.get("c", "a"));
    }
    SECTION("conflict on a non-intersecting pair is unconstrained") {
        auto res = admissible_reorder(asc, asc, desc,
                                      [](const std::string& x, const std::string& y) {
                                          return !((x == "a" && y == "c") || (x == "c" && y == "a"));
                                      });
        // a,b and b,c still conflict between asc and desc
        CHECK_FALSE(res.pass);
        auto res2 = admissible_reorder(asc, asc, desc, [](const std::string&, const std::string&) { return false; });
        CHECK(res2.pass);
    }
    SECTION("a genuinely conflicting intersecting pair is reported") {
        auto res = admissible_reorder(asc, asc, desc, [](const std::string&, const std::string&) { return true; });
        REQUIRE_FALSE(res.pass);
        CHECK_FALSE(res.obstructions.empty());
    }
}

TEST_CASE("concert_embedding") {
    SECTION("already-concerted input: reindexed copy with agreeing orders") {
        auto l1g = scene_level1("EX-CHAIN", Rat(1, 8));
        // identity-shaped embedding: one-step stabilization of every chart
        GoodCoordinateSystem tgt = l1g.gcs;
        for (auto& c : tgt.charts) c = stabilize(c, 1);
        tgt.leq = build_order(tgt.charts);
        for (auto& [key, gc] : tgt.changes) {
            const GcsChange* src = l1g.gcs.change(key.first, key.second);
            CoordinateChange nc = src->cc;
            int sd = src->cc.base_map.dom_dim(), td = src->cc.base_map.codom_dim();
            nc.base_map = Affine{Mat(td + 1, sd + 1), RatVec(static_cast<size_t>(td + 1), Rat(0))};
            for (int i = 0; i < td; ++i) nc.base_map.b[static_cast<size_t>(i)] = src->cc.base_map.b[static_cast<size_t>(i)];
            for (int i = 0; i < td; ++i)
                for (int j = 0; j < sd; ++j) nc.base_map.A(i, j) = src->cc.base_map.A(i, j);
            nc.base_map.A(td, sd) = 1;
            nc.bundle_map = Mat(src->cc.bundle_map.rows() + 1, src->cc.bundle_map.cols() + 1);
            for (int i = 0; i < src->cc.bundle_map.rows(); ++i)
                for (int j = 0; j < src->cc.bundle_map.cols(); ++j) nc.bundle_map(i, j) = src->cc.bundle_map(i, j);
            nc.bundle_map(src->cc.bundle_map.rows(), src->cc.bundle_map.cols()) = 1;
            std::vector<Box> bs;
            for (const Box& b : src->cc.domain.boxes) {
                Box nb = b;
                nb.push_back(Ival{Rat(-1), Rat(1)});
                bs.push_back(nb);
            }
            nc.domain = BoxUnion(sd + 1, bs);
            gc.cc = nc;
        }
        KuranishiEmbedding ke;
        ke.src = &l1g.gcs;
        ke.tgt = &tgt;
        for (const auto& c : l1g.gcs.charts)
            ke.emb[c.id] = stabilizing_embedding(c, tgt.charts[static_cast<size_t>(tgt.index_of(c.id))]);
        auto ce = concert_embedding(ke, l1g);
        CHECK(concerted(ce));
        // every tripled chart goes to the target of its own source max
        for (const auto& [id, t] : ce.tripled.subset_of_chart) CHECK(ce.tgt_chart_of.at(id) == t.back());
    }

    SECTION("the conflict square resolves by the subset order") {
        // src: EX-JUMP (m 1-dim <= n 2-dim); targets: m stabilized by 2 (rank
        // 3), n kept (rank 2): the raw embedding reverses the order
        auto l1g = scene_level1("EX-JUMP", Rat(1, 10));
        const KuranishiChart& cm = l1g.gcs.charts[static_cast<size_t>(l1g.gcs.index_of("m"))];
        const KuranishiChart& cn = l1g.gcs.charts[static_cast<size_t>(l1g.gcs.index_of("n"))];

        GoodCoordinateSystem tgt;
        tgt.x = l1g.gcs.x;
        KuranishiChart mt = stabilize(cm, 2);
        KuranishiChart nt = cn;
        tgt.charts = {mt, nt};
        tgt.leq = build_order(tgt.charts);
        // target change n -> m (2-dim into the 3-dim stabilized chart)
        {
            GcsChange gc;
            gc.cc.from_id = "n";
            gc.cc.to_id = "m";
            gc.cc.base_map = Affine{Mat(3, 2), RatVec(3, Rat(0))};
            gc.cc.base_map.A(0, 0) = 1;
            gc.cc.base_map.A(1, 1) = 1;
            gc.cc.bundle_map = Mat(3, 2);
            gc.cc.bundle_map(0, 0) = 1;
            gc.cc.bundle_map(1, 1) = 1;
            gc.cc.domain = intersect(nt.base, affine_preimage(gc.cc.base_map, mt.base));
            tgt.changes[{"n", "m"}] = gc;
        }
        KuranishiEmbedding ke;
        ke.src = &l1g.gcs;
        ke.tgt = &tgt;
        ke.emb["m"] = stabilizing_embedding(cm, mt);
        CoordinateChange en;
        en.from_id = en.to_id = "n";
        en.domain = cn.base;
        en.base_map = Affine::identity(2);
        en.bundle_map = Mat::identity(2);
        ke.emb["n"] = en;

        // the raw embedding is not concerted
        CHECK_THROWS_AS(build_level1_embedding(ke, l1g), NotConcerted);
        // tripling concerts it: {m,n} routes into the target max (m side)
        auto ce = concert_embedding(ke, l1g);
        CHECK(concerted(ce));
        CHECK(ce.tgt_chart_of.at("{m,n}") == "m");
        CHECK(ce.tgt_chart_of.at("{n}") == "n");
    }
}

TEST_CASE("fiber_product") {
    SECTION("identity pair: the diagonal with dim d + d - d") {
        auto l1g = scene_level1("EX-Z2", Rat(1, 10));
        auto tr = build_tripling(l1g);
        const KuranishiChart& c = l1g.gcs.charts[0];
        GoodCoordinateSystem t1 = single_chart_gcs(c, l1g.gcs.x);
        KuranishiEmbedding e1;
        e1.src = &l1g.gcs;
        e1.tgt = &t1;
        CoordinateChange idc;
        idc.from_id = idc.to_id = "p";
        idc.domain = c.base;
        idc.base_map = Affine::identity(2);
        idc.bundle_map = Mat::identity(2);
        e1.emb["p"] = idc;
        auto fp = fiber_product(tr, e1, e1, Rat(1, 10));
        REQUIRE(fp.gcs.charts.size() == 1);
        CHECK(fp.records.at("FP{p}").fp_dim == 2);  // 2 + 2 - 2
        CHECK(fp.gcs.charts[0].dim() == 2);
        CHECK(fp.gcs.charts[0].section == c.section);
    }

    SECTION("EX-Z2 stabilized two ways: (x,y,u,w) with section (x^2-y^2, 2xy, u, w), count 2") {
        auto l1g = scene_level1("EX-Z2", Rat(1, 10));
        auto tr = build_tripling(l1g);
        const KuranishiChart& c = l1g.gcs.charts[0];
        KuranishiChart cu = stabilize(c, 1, "");
        KuranishiChart cw = stabilize(c, 1, "");
        GoodCoordinateSystem t1 = single_chart_gcs(cu, l1g.gcs.x);
        GoodCoordinateSystem t2 = single_chart_gcs(cw, l1g.gcs.x);
        KuranishiEmbedding e1, e2;
        e1.src = e2.src = &l1g.gcs;
        e1.tgt = &t1;
        e2.tgt = &t2;
        e1.emb["p"] = stabilizing_embedding(c, cu);
        e2.emb["p"] = stabilizing_embedding(c, cw);
        auto fp = fiber_product(tr, e1, e2, Rat(1, 10));
        REQUIRE(fp.gcs.charts.size() == 1);
        const KuranishiChart& f = fp.gcs.charts[0];
        CHECK(f.dim() == 4);
        CHECK(f.fiber_rank == 4);
        {
            Poly x = Poly::var(4, 0), y = Poly::var(4, 1), u = Poly::var(4, 2), w = Poly::var(4, 3);
            PolySection expect = PolySection::make(4, {x * x - y * y, (x * y) * Rat(2), u, w});
            CHECK(f.section == expect);
        }
        // count through the full engine equals the oracle
        Level1GCS fpl1 = build_level1_gcs(fp.gcs, Rat(1, 4), Rat(1, 5));
        auto pert = global_perturb(fpl1, 9, Rat(1, 5));
        auto zs = zero_set(fpl1, pert, Rat(1, 5));
        CHECK(signed_count(fpl1, zs, {}) == Rat(2));
        CHECK(section_degree(f.section, f.base.boxes[0], Rat(1, 5)) == 2);
    }

    SECTION("the (6,6,2) pair: fp dims 10 and 6, change direction follows inclusion") {
        // parent: chart p (2-dim, rank 2) inside chart q (6-dim, rank 6)
        KuranishiPresentation pres;
        Poly t6 = Poly::var(6, 0);
        std::vector<Poly> comps6 = {t6 * (t6 - Poly::constant(6, Rat(2)))};
        for (int i = 1; i < 6; ++i) comps6.push_back(Poly::var(6, i));
        KuranishiChart cq;
        cq.id = "q";
        {
            Box b(6, Ival{Rat(-1), Rat(1)});
            b[0] = Ival{Rat(-1), Rat(3)};
            cq.base = BoxUnion(6, {b});
        }
        cq.fiber_rank = 6;
        cq.group = GroupAction::trivial(6, 6);
        cq.section = PolySection::make(6, comps6);
        cq.footprint = {{"p", RatVec(6, Rat(0))}, {"q", [] {
                             RatVec v(6, Rat(0));
                             v[0] = 2;
                             return v;
                         }()}};
        Poly t2v = Poly::var(2, 0);
        KuranishiChart cp;
        cp.id = "p";
        cp.base = BoxUnion(2, {box2(Rat(-1), Rat(1), Rat(-1), Rat(1))});
        cp.fiber_rank = 2;
        cp.group = GroupAction::trivial(2, 2);
        cp.section = PolySection::make(2, {t2v * (t2v - Poly::constant(2, Rat(2))), Poly::var(2, 1)});
        cp.footprint = {{"p", {Rat(0), Rat(0)}}};
        CoordinateChange pq;
        pq.from_id = "p";
        pq.to_id = "q";
        pq.domain = cp.base;
        pq.base_map = Affine{Mat(6, 2), RatVec(6, Rat(0))};
        pq.base_map.A(0, 0) = 1;
        pq.base_map.A(1, 1) = 1;
        pq.bundle_map = Mat(6, 2);
        pq.bundle_map(0, 0) = 1;
        pq.bundle_map(1, 1) = 1;
        pres.charts = {cp, cq};
        pres.changes = {pq};
        pres.x.labels = {"p", "q"};
        pres.x.set("p", "q", Rat(1));
        REQUIRE_NOTHROW(pres.check_structure(Rat(1, 2)));

        auto g = extract_gcs(pres, {{"p", Rat(1)}, {"q", Rat(3)}}, {"p", "q"});
        auto l1g = build_level1_gcs(g, Rat(1, 4), Rat(1, 2));
        auto tr = build_tripling(l1g);

        // both embeddings: stabilize p by 4 (rank 2 -> 6), keep q
        const KuranishiChart& lp = l1g.gcs.charts[static_cast<size_t>(l1g.gcs.index_of("p"))];
        const KuranishiChart& lq = l1g.gcs.charts[static_cast<size_t>(l1g.gcs.index_of("q"))];
        auto make_side = [&]() {
            GoodCoordinateSystem tgt;
            tgt.x = pres.x;
            KuranishiChart pt = stabilize(lp, 4);
            tgt.charts = {pt, lq};
            tgt.leq = build_order(tgt.charts);
            GcsChange gc;
            gc.cc.from_id = "p";
            gc.cc.to_id = "q";
            gc.cc.base_map = Affine::identity(6);
            gc.cc.bundle_map = Mat::identity(6);
            gc.cc.domain = intersect(pt.base, lq.base);
            tgt.changes[{"p", "q"}] = gc;
            return tgt;
        };
        GoodCoordinateSystem t1 = make_side(), t2 = make_side();
        KuranishiEmbedding e1, e2;
        e1.src = e2.src = &l1g.gcs;
        e1.tgt = &t1;
        e2.tgt = &t2;
        e1.emb["p"] = stabilizing_embedding(lp, t1.charts[static_cast<size_t>(t1.index_of("p"))]);
        e2.emb["p"] = stabilizing_embedding(lp, t2.charts[static_cast<size_t>(t2.index_of("p"))]);
        CoordinateChange qid;
        qid.from_id = qid.to_id = "q";
        qid.domain = lq.base;
        qid.base_map = Affine::identity(6);
        qid.bundle_map = Mat::identity(6);
        e1.emb["q"] = qid;
        e2.emb["q"] = qid;

        auto fp = fiber_product(tr, e1, e2, Rat(1, 2));
        CHECK(fp.records.at("FP{p}").fp_dim == 10);   // 6 + 6 - 2
        CHECK(fp.records.at("FP{q}").fp_dim == 6);    // 6 + 6 - 6
        CHECK(fp.records.at("FP{p,q}").fp_dim == 10);
        // the change direction follows inclusion: {q} (dim 6) into {p,q} (dim 10)
        CHECK(fp.gcs.change("FP{q}", "FP{p,q}"));
        // dimension monotone under inclusion, and order by fp dimension
        int iq = fp.gcs.index_of("FP{q}");
        int ipq = fp.gcs.index_of("FP{p,q}");
        CHECK(fp.gcs.order_leq(iq, ipq));
        CHECK_FALSE(fp.gcs.order_leq(ipq, iq));

        SECTION("every induced fp change passes validation and the tangent bundle check") {
            for (const auto& [key, gc] : fp.gcs.changes) {
                const KuranishiChart& src = fp.gcs.charts[static_cast<size_t>(fp.gcs.index_of(key.first))];
                const KuranishiChart& tgt = fp.gcs.charts[static_cast<size_t>(fp.gcs.index_of(key.second))];
                REQUIRE_NOTHROW(validate_cc(gc.cc, src, tgt));
                auto tb = check_tangent_bundle(gc.cc, src, tgt, Rat(shortest_bounded_side(gc.cc.domain) / 2));
                INFO(key.first + "->" + key.second);
                CHECK(tb.pass);
            }
        }
    }

    SECTION("EX-CHAIN-derived pair: dims monotone, induced changes validate") {
        auto l1g = scene_level1("EX-CHAIN", Rat(1, 8));
        auto tr = build_tripling(l1g);
        // identity pair
        GoodCoordinateSystem tcopy = l1g.gcs;
        KuranishiEmbedding e1;
        e1.src = &l1g.gcs;
        e1.tgt = &tcopy;
        for (const auto& c : l1g.gcs.charts) {
            CoordinateChange idc;
            idc.from_id = idc.to_id = c.id;
            idc.domain = c.base;
            idc.base_map = Affine::identity(c.dim());
            idc.bundle_map = Mat::identity(c.fiber_rank);
            e1.emb[c.id] = idc;
        }
        auto fp = fiber_product(tr, e1, e1, Rat(1, 8));
        for (const auto& [ida, ra] : fp.records)
            for (const auto& [idb, rb] : fp.records) {
                if (std::includes(rb.T.begin(), rb.T.end(), ra.T.begin(), ra.T.end()))
                    CHECK(ra.fp_dim <= rb.fp_dim);
            }
        for (const auto& [key, gc] : fp.gcs.changes) {
            const KuranishiChart& src = fp.gcs.charts[static_cast<size_t>(fp.gcs.index_of(key.first))];
            const KuranishiChart& tgt = fp.gcs.charts[static_cast<size_t>(fp.gcs.index_of(key.second))];
            REQUIRE_NOTHROW(validate_cc(gc.cc, src, tgt));
            auto tb = check_tangent_bundle(gc.cc, src, tgt, Rat(shortest_bounded_side(gc.cc.domain) / 2));
            INFO(key.first + "->" + key.second);
            CHECK(tb.pass);
        }
    }
}

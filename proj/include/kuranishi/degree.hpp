#pragma once

// Standalone topological degree computer: the acceptance-side oracle. It
// never touches the perturbation machinery; inputs are a polynomial section
// and a box, outputs an integer (or, for equivariant counts, a rational).
//
//   1-dim: boundary sign comparison,
//   2-dim: winding number along a sampled loop,
//   n-dim: signed preimages of a pseudorandom regular value
//          (dense grid seeds + Newton),
//   and a product rule for sections that split over disjoint variable
//   groups, which covers stabilized fiber products.

#include "kuranishi/newton.hpp"
#include "kuranishi/chart.hpp"
#include "kuranishi/poly.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

namespace kur {

// degree of a scalar polynomial on an interval via boundary signs
inline int degree_1d(const Poly& f, const Rat& lo, const Rat& hi) {
    Rat a = f.eval({lo}), b = f.eval({hi});
    if (a == 0 || b == 0) throw std::runtime_error("degree_1d: zero on the boundary");
    int sa = a < 0 ? -1 : 1, sb = b < 0 ? -1 : 1;
    return (sb - sa) / 2;
}

// winding number of s along the boundary loop of [-R,R]^2, sampled
inline int winding_2d(const PolySection& s, const Rat& radius, int samples = 1024) {
    if (s.base_dim != 2 || s.fiber_rank != 2) throw std::invalid_argument("winding_2d: need a 2->2 section");
    double R = to_double(radius);
    auto point_on_loop = [&](double t) {  // t in [0,4): four box edges
        double x, y;
        int e = static_cast<int>(t);
        double u = t - e;
        switch (e) {
            case 0: x = -R + 2 * R * u; y = -R; break;
            case 1: x = R; y = -R + 2 * R * u; break;
            case 2: x = R - 2 * R * u; y = R; break;
            default: x = -R; y = R - 2 * R * u; break;
        }
        return std::pair<double, double>{x, y};
    };
    double total = 0, prev = 0;
    bool first = true;
    for (int i = 0; i <= samples; ++i) {
        double t = 4.0 * i / samples;
        if (t >= 4.0) t = 0;
        auto [x, y] = point_on_loop(t);
        auto v = s.eval_d({x, y});
        double ang = std::atan2(v[1], v[0]);
        if (!first) {
            double d = ang - prev;
            while (d > std::numbers::pi) d -= 2 * std::numbers::pi;
            while (d < -std::numbers::pi) d += 2 * std::numbers::pi;
            total += d;
        }
        prev = ang;
        first = false;
    }
    return static_cast<int>(std::llround(total / (2 * std::numbers::pi)));
}

// n-dim: signed count of preimages of a pseudorandom regular value
inline int degree_regular_value(const PolySection& s, const BoxUnion& domain, const Rat& step,
                                unsigned value_seed = 7) {
    if (s.base_dim != s.fiber_rank) throw std::invalid_argument("degree_regular_value: not square");
    // deterministic pseudorandom small value
    auto mix = [](unsigned& st) {
        st = st * 1664525u + 1013904223u;
        return (st >> 8) % 2001;
    };
    unsigned st = value_seed;
    RatVec value(static_cast<size_t>(s.fiber_rank));
    for (int i = 0; i < s.fiber_rank; ++i) value[static_cast<size_t>(i)] = Rat(static_cast<int>(mix(st)) - 1000, 100000);
    PolySection shifted = s;
    for (int i = 0; i < s.fiber_rank; ++i)
        shifted.components[static_cast<size_t>(i)] =
            shifted.components[static_cast<size_t>(i)] - Poly::constant(s.base_dim, value[static_cast<size_t>(i)]);
    int total = 0;
    for (const auto& z : find_zeros(shifted, domain, step)) {
        if (z.sigma_min <= kTolRank) throw std::runtime_error("degree_regular_value: value not regular, reseed");
        total += z.det > 0 ? 1 : -1;
    }
    return total;
}

// variable groups of a section: connected components of the bipartite
// variable/component incidence; exact
struct SectionSplit {
    std::vector<std::vector<int>> var_groups;
    std::vector<std::vector<int>> comp_groups;
};

inline SectionSplit split_section(const PolySection& s) {
    int n = s.base_dim;
    std::vector<int> parent(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) parent[static_cast<size_t>(i)] = i;
    std::function<int(int)> find = [&](int a) { return parent[static_cast<size_t>(a)] == a ? a : parent[static_cast<size_t>(a)] = find(parent[static_cast<size_t>(a)]); };
    std::vector<std::vector<int>> vars_of_comp(static_cast<size_t>(s.fiber_rank));
    for (int c = 0; c < s.fiber_rank; ++c) {
        std::vector<bool> used(static_cast<size_t>(n), false);
        for (const Monomial& m : s.components[static_cast<size_t>(c)].terms())
            for (int v = 0; v < n; ++v)
                if (m.exps[static_cast<size_t>(v)]) used[static_cast<size_t>(v)] = true;
        for (int v = 0; v < n; ++v)
            if (used[static_cast<size_t>(v)]) vars_of_comp[static_cast<size_t>(c)].push_back(v);
        for (size_t k = 1; k < vars_of_comp[static_cast<size_t>(c)].size(); ++k)
            parent[static_cast<size_t>(find(vars_of_comp[static_cast<size_t>(c)][k]))] =
                find(vars_of_comp[static_cast<size_t>(c)][0]);
    }
    std::map<int, int> group_of_root;
    SectionSplit out;
    for (int v = 0; v < n; ++v) {
        int r = find(v);
        if (!group_of_root.count(r)) {
            group_of_root[r] = static_cast<int>(out.var_groups.size());
            out.var_groups.emplace_back();
            out.comp_groups.emplace_back();
        }
        out.var_groups[static_cast<size_t>(group_of_root[r])].push_back(v);
    }
    for (int c = 0; c < s.fiber_rank; ++c) {
        if (vars_of_comp[static_cast<size_t>(c)].empty())
            throw std::runtime_error("split_section: constant component has no degree");
        int r = find(vars_of_comp[static_cast<size_t>(c)][0]);
        // a component must use variables of a single group
        for (int v : vars_of_comp[static_cast<size_t>(c)])
            if (find(v) != r) throw std::runtime_error("split_section: component straddles groups");
        out.comp_groups[static_cast<size_t>(group_of_root[r])].push_back(c);
    }
    return out;
}

// Degree of a vdim-0 section over a single box, splitting into independent
// variable groups and dispatching per group dimension.
inline int section_degree(const PolySection& s, const Box& domain, const Rat& step) {
    if (s.base_dim != s.fiber_rank) throw std::invalid_argument("section_degree: not square");
    auto split = split_section(s);
    int total = 1;
    for (size_t gi = 0; gi < split.var_groups.size(); ++gi) {
        const auto& vars = split.var_groups[gi];
        const auto& comps = split.comp_groups[gi];
        if (vars.size() != comps.size()) throw std::runtime_error("section_degree: group not square");
        // restrict to the group: substitute the group variables, others at 0
        int k = static_cast<int>(vars.size());
        Affine sub{Mat(s.base_dim, k), RatVec(static_cast<size_t>(s.base_dim), Rat(0))};
        for (int j = 0; j < k; ++j) sub.A(vars[static_cast<size_t>(j)], j) = 1;
        std::vector<Poly> comps_g;
        for (int c : comps) comps_g.push_back(s.components[static_cast<size_t>(c)].compose_affine(sub));
        PolySection sg = PolySection::make(k, comps_g);
        Box bg;
        for (int v : vars) bg.push_back(domain[static_cast<size_t>(v)]);
        int deg;
        if (k == 1)
            deg = degree_1d(sg.components[0], *bg[0].lo, *bg[0].hi);
        else if (k == 2) {
            Rat R = std::min(rat_abs(*bg[0].lo), std::min(*bg[0].hi, std::min(rat_abs(*bg[1].lo), *bg[1].hi)));
            deg = winding_2d(sg, R / 2);
        } else
            deg = degree_regular_value(sg, BoxUnion(k, {bg}), step);
        total *= deg;
    }
    return total;
}

// The gallery-facing oracle: the degree of a scene's top chart over the
// "essential" box, divided by the global stabilizer order of a fixed zero
// when the chart carries a group (the equivariant count convention).
struct DegreeOracleResult {
    Rat count;
    int raw_degree = 0;
};

inline DegreeOracleResult scene_degree_oracle(const KuranishiChart& top, const Rat& step) {
    if (top.base.boxes.size() != 1)
        throw std::runtime_error("scene_degree_oracle: expects a single-box top chart");
    DegreeOracleResult r;
    r.raw_degree = section_degree(top.section, top.base.boxes[0], step);
    r.count = Rat(r.raw_degree);
    if (top.group.size() > 1) r.count /= top.group.size();
    return r;
}

}  // namespace kur

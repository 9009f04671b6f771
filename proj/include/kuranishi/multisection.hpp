#pragma once

// Multisections: weighted finite branch lists of bump-supported local
// sections. A bump term evaluates as bump(pre(z)) * vec with `pre` a total
// affine map into the bump's parameter box, so lifting through a level-1
// change is pre-composition with the exact affine retraction phi^{-1} ∘ pi
// and post-composition of vec with the bundle map.
//
// The bump profile is the quintic smoothstep, piecewise polynomial and C^2;
// evaluation at rational points is exact off nothing (the pieces are
// polynomial on rational breakpoints).

#include "kuranishi/chart.hpp"
#include "kuranishi/level1.hpp"

#include <cstdint>
#include <vector>

namespace kur {

// quintic smoothstep S(u) = 6u^5 - 15u^4 + 10u^3 on [0,1]
inline Rat smoothstep(const Rat& u) {
    if (u <= 0) return Rat(0);
    if (u >= 1) return Rat(1);
    Rat u2 = u * u, u3 = u2 * u;
    return u3 * (Rat(6) * u2 - Rat(15) * u + Rat(10));
}
inline double smoothstep_d(double u) {
    if (u <= 0) return 0;
    if (u >= 1) return 1;
    return u * u * u * (6 * u * u - 15 * u + 10);
}
inline double smoothstep_deriv_d(double u) {
    if (u <= 0 || u >= 1) return 0;
    return 30.0 * u * u * (u - 1) * (u - 1);
}

// symmetric bump profile on [0,1]: rises on [0,1/2], falls on [1/2,1]
inline Rat bump_profile(const Rat& u) { return u <= Rat(1, 2) ? smoothstep(2 * u) : smoothstep(2 - 2 * u); }
inline double bump_profile_d(double u) { return u <= 0.5 ? smoothstep_d(2 * u) : smoothstep_d(2 - 2 * u); }
inline double bump_profile_deriv_d(double u) {
    return u <= 0.5 ? 2 * smoothstep_deriv_d(2 * u) : -2 * smoothstep_deriv_d(2 - 2 * u);
}

struct BumpTerm {
    Affine pre;   // chart coords -> bump parameter coords
    Box box;      // bounded support box in parameter coords
    RatVec vec;   // constant fiber vector

    Rat bump_at(const RatVec& param) const {
        Rat acc(1);
        for (size_t i = 0; i < box.size(); ++i) {
            Rat u = (param[i] - *box[i].lo) / (*box[i].hi - *box[i].lo);
            Rat p = bump_profile(u);
            if (p == 0) return Rat(0);
            acc *= p;
        }
        return acc;
    }

    RatVec eval(const RatVec& z) const {
        Rat b = bump_at(pre.apply(z));
        RatVec v(vec.size(), Rat(0));
        for (size_t i = 0; i < vec.size(); ++i) v[i] = b * vec[i];
        return v;
    }

    void eval_d(const std::vector<double>& z, std::vector<double>& out) const {
        std::vector<double> p(static_cast<size_t>(pre.codom_dim()), 0.0);
        for (int i = 0; i < pre.codom_dim(); ++i) {
            p[static_cast<size_t>(i)] = to_double(pre.b[static_cast<size_t>(i)]);
            for (int j = 0; j < pre.dom_dim(); ++j)
                if (pre.A(i, j) != 0) p[static_cast<size_t>(i)] += to_double(pre.A(i, j)) * z[static_cast<size_t>(j)];
        }
        double b = 1;
        for (size_t i = 0; i < box.size(); ++i) {
            double lo = to_double(*box[i].lo), hi = to_double(*box[i].hi);
            double u = (p[i] - lo) / (hi - lo);
            double f = bump_profile_d(u);
            if (f == 0) { b = 0; break; }
            b *= f;
        }
        for (size_t i = 0; i < vec.size(); ++i) out[i] += b * to_double(vec[i]);
    }

    // d/dz of bump(pre(z)) * vec, accumulated into `jac` (rank x dim)
    void jac_d(const std::vector<double>& z, std::vector<std::vector<double>>& jac) const {
        size_t npar = box.size();
        std::vector<double> p(npar, 0.0), u(npar), prof(npar), dprof(npar);
        for (size_t i = 0; i < npar; ++i) {
            p[i] = to_double(pre.b[i]);
            for (int j = 0; j < pre.dom_dim(); ++j)
                if (pre.A(static_cast<int>(i), j) != 0) p[i] += to_double(pre.A(static_cast<int>(i), j)) * z[static_cast<size_t>(j)];
            double lo = to_double(*box[i].lo), hi = to_double(*box[i].hi);
            u[i] = (p[i] - lo) / (hi - lo);
            prof[i] = bump_profile_d(u[i]);
            dprof[i] = bump_profile_deriv_d(u[i]) / (hi - lo);
        }
        for (size_t k = 0; k < npar; ++k) {
            double grad_k = dprof[k];
            for (size_t i = 0; i < npar; ++i)
                if (i != k) grad_k *= prof[i];
            if (grad_k == 0) continue;
            for (int j = 0; j < pre.dom_dim(); ++j) {
                double a = to_double(pre.A(static_cast<int>(k), j));
                if (a == 0) continue;
                for (size_t r = 0; r < vec.size(); ++r) jac[r][static_cast<size_t>(j)] += grad_k * a * to_double(vec[r]);
            }
        }
    }
};

// one branch of a multisection: a weighted local section
struct MsBranch {
    Rat weight;
    std::vector<BumpTerm> terms;

    RatVec eval(const RatVec& z, int rank) const {
        RatVec v(static_cast<size_t>(rank), Rat(0));
        for (const BumpTerm& t : terms) {
            RatVec tv = t.eval(z);
            for (size_t i = 0; i < v.size(); ++i) v[i] += tv[i];
        }
        return v;
    }
};

struct Multisection {
    int base_dim = 0;
    int fiber_rank = 0;
    bool symmetrized = false;
    std::vector<MsBranch> branches;
    BoxUnion support;  // union of the support regions, tracked for bookkeeping

    bool empty() const { return branches.empty(); }

    Rat weight_sum() const {
        Rat s(0);
        for (const auto& b : branches) s += b.weight;
        return s;
    }
};

// symmetrize a single local section over the chart's group with equal
// rational weights: branches g . tau, tau(g^{-1} z) mapped by the fiber action
inline Multisection symmetrize(const std::vector<BumpTerm>& tau, const KuranishiChart& chart) {
    Multisection ms;
    ms.base_dim = chart.dim();
    ms.fiber_rank = chart.fiber_rank;
    ms.symmetrized = true;
    ms.support = BoxUnion(chart.dim());
    int n = chart.group.size();
    for (int gi = 0; gi < n; ++gi) {
        const SignedPerm& g = chart.group.base[static_cast<size_t>(gi)];
        const SignedPerm& gf = chart.group.fiber[static_cast<size_t>(gi)];
        MsBranch br;
        br.weight = Rat(1, n);
        for (const BumpTerm& t : tau) {
            BumpTerm gt = t;
            gt.pre = t.pre.compose(g.inverse().affine());
            gt.vec = gf.matrix() * t.vec;
            br.terms.push_back(std::move(gt));
        }
        ms.branches.push_back(std::move(br));
        // support: group image of the pulled-back boxes
        for (const BumpTerm& t : tau) {
            BoxUnion sup = affine_preimage(t.pre, BoxUnion(static_cast<int>(t.box.size()), {t.box}));
            ms.support = box_union_union(ms.support, g.map_boxes(intersect(sup, chart.base)));
        }
    }
    return ms;
}

struct SupportEscapesDomain : std::runtime_error {
    explicit SupportEscapesDomain(const std::string& w) : std::runtime_error(w) {}
};

// (pi, pi-tilde)^* tau: pull every branch back through the exact affine
// retraction phi^{-1} ∘ pi and push the fiber vectors через the bundle map.
// On the carved target base the formula is globally valid: within the new
// base, the cylinder over the image region is exactly W.
inline Multisection lift_perturbation(const Level1CoordinateChange& l1, const Multisection& tau) {
    if (!tau.empty() && !subset(tau.support, l1.cc.domain))
        throw SupportEscapesDomain("lift_perturbation: support escapes the change domain");
    Multisection out;
    out.base_dim = l1.cc.base_map.codom_dim();
    out.fiber_rank = l1.cc.bundle_map.rows();
    out.symmetrized = tau.symmetrized;
    if (tau.empty()) return out;

    // retraction r = phi^{-1} ∘ pi as a total affine map on the target
    auto cols = l1.cc.base_map.monomial_cols();
    Affine r{Mat(l1.cc.base_map.dom_dim(), out.base_dim), RatVec(static_cast<size_t>(l1.cc.base_map.dom_dim()), Rat(0))};
    for (size_t j = 0; j < cols.size(); ++j) {
        auto [row, scale] = cols[j];
        r.A(static_cast<int>(j), row) = Rat(1) / scale;
        r.b[j] = -l1.cc.base_map.b[static_cast<size_t>(row)] / scale;
    }

    for (const MsBranch& br : tau.branches) {
        MsBranch nb;
        nb.weight = br.weight;
        for (const BumpTerm& t : br.terms) {
            BumpTerm nt;
            nt.pre = t.pre.compose(r);
            nt.box = t.box;
            nt.vec = l1.cc.bundle_map * t.vec;
            nb.terms.push_back(std::move(nt));
        }
        out.branches.push_back(std::move(nb));
    }
    // support: the tubular cylinder over the image of the source support
    out.support = l1_detail::tub_cylinder(l1, tau.support);
    return out;
}

// counter-based splittable PRNG (splitmix64 over a composed key)
struct SplitMix {
    std::uint64_t state;
    explicit SplitMix(std::uint64_t seed) : state(seed) {}
    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }
};

inline std::uint64_t prng_key(std::uint64_t seed, std::uint64_t chart, std::uint64_t branch) {
    SplitMix a(seed * 0x100000001b3ull + chart);
    SplitMix b(a.next() + branch);
    return b.next();
}

// small rational draw in (-1/2, 1/2) with denominator 1000
inline Rat draw_rat(SplitMix& rng) { return Rat(static_cast<long long>(rng.next() % 999) - 499, 1000); }

}  // namespace kur

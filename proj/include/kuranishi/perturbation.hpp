#pragma once

// The perturbation engine: effective sheets (base section plus chosen
// multisection branches), the genericity trick, the global induction by the
// order, zero extraction with cross-chart deduplication, orientation
// consistency, and the signed count.

#include "kuranishi/multisection.hpp"

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace kur {

// one effective sheet: s + sum of one chosen branch per listed multisection
struct Sheet {
    const PolySection* base = nullptr;
    std::vector<const MsBranch*> chosen;
    Rat weight{1};

    std::vector<double> eval_d(const std::vector<double>& z) const {
        auto v = base->eval_d(z);
        for (const MsBranch* br : chosen)
            for (const BumpTerm& t : br->terms) t.eval_d(z, v);
        return v;
    }

    RatVec eval(const RatVec& z) const {
        RatVec v = base->eval(z);
        for (const MsBranch* br : chosen) {
            RatVec bv = br->eval(z, base->fiber_rank);
            for (size_t i = 0; i < v.size(); ++i) v[i] += bv[i];
        }
        return v;
    }

    void jac_d(const std::vector<double>& z, std::vector<std::vector<double>>& jac,
               const std::vector<std::vector<Poly>>& base_jac) const {
        int r = base->fiber_rank, n = base->base_dim;
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < n; ++j) jac[static_cast<size_t>(i)][static_cast<size_t>(j)] =
                base_jac[static_cast<size_t>(i)][static_cast<size_t>(j)].eval_d(z);
        for (const MsBranch* br : chosen)
            for (const BumpTerm& t : br->terms) t.jac_d(z, jac);
    }
};

// all sheets of a chart: the product of branch choices over the listed
// multisections
inline std::vector<Sheet> sheets_of(const PolySection& base, const std::vector<const Multisection*>& mss) {
    std::vector<Sheet> out;
    out.push_back(Sheet{&base, {}, Rat(1)});
    for (const Multisection* ms : mss) {
        if (!ms || ms->empty()) continue;
        std::vector<Sheet> next;
        for (const Sheet& s : out)
            for (const MsBranch& br : ms->branches) {
                Sheet ns = s;
                ns.chosen.push_back(&br);
                ns.weight *= br.weight;
                next.push_back(std::move(ns));
            }
        out = std::move(next);
    }
    return out;
}

// Newton for sheets (the polynomial solver does not know about bump terms)
inline std::optional<std::vector<double>> sheet_newton(const Sheet& sh, const std::vector<std::vector<Poly>>& base_jac,
                                                       std::vector<double> x, const NewtonConfig& cfg = {}) {
    int n = sh.base->base_dim;
    if (sh.base->fiber_rank != n) return std::nullopt;
    Eigen::MatrixXd J(n, n);
    Eigen::VectorXd f(n);
    std::vector<std::vector<double>> jac(static_cast<size_t>(n), std::vector<double>(static_cast<size_t>(n)));
    for (int it = 0; it < cfg.max_iters; ++it) {
        auto fx = sh.eval_d(x);
        double res = 0;
        for (int i = 0; i < n; ++i) {
            f(i) = fx[static_cast<size_t>(i)];
            res = std::max(res, std::abs(f(i)));
        }
        if (res < cfg.tol) return x;
        sh.jac_d(x, jac, base_jac);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) J(i, j) = jac[static_cast<size_t>(i)][static_cast<size_t>(j)];
        Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
        if (!lu.isInvertible()) {
            for (int i = 0; i < n; ++i) x[static_cast<size_t>(i)] += 1e-7 * (i + 1);
            continue;
        }
        Eigen::VectorXd dx = lu.solve(f);
        if (!std::isfinite(dx.norm()) || dx.norm() > 1e6) return std::nullopt;
        for (int i = 0; i < n; ++i) x[static_cast<size_t>(i)] -= dx(i);
    }
    auto fx = sh.eval_d(x);
    for (double v : fx)
        if (std::abs(v) >= cfg.tol) return std::nullopt;
    return x;
}

struct SheetZero {
    std::vector<double> point;
    double det = 0;
    double sigma_min = 0;
    double residual = 0;
};

inline std::vector<SheetZero> sheet_zeros(const Sheet& sh, const BoxUnion& region, const Rat& step,
                                          const NewtonConfig& cfg = {}) {
    std::vector<SheetZero> out;
    auto base_jac = sh.base->jacobian_polys();
    int n = sh.base->base_dim;
    std::vector<std::vector<double>> jac(static_cast<size_t>(n), std::vector<double>(static_cast<size_t>(n)));
    for (const RatVec& seed : grid_points(region, capped_step(region, step))) {
        auto sol = sheet_newton(sh, base_jac, to_doubles(seed), cfg);
        if (!sol) continue;
        RatVec approx(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) approx[static_cast<size_t>(i)] = snap((*sol)[static_cast<size_t>(i)], 1LL << 40);
        if (!region.closure_contains(approx)) continue;
        bool dup = false;
        for (const SheetZero& z : out) {
            double d = 0;
            for (int i = 0; i < n; ++i) d = std::max(d, std::abs(z.point[static_cast<size_t>(i)] - (*sol)[static_cast<size_t>(i)]));
            if (d < cfg.min_sep) { dup = true; break; }
        }
        if (dup) continue;
        SheetZero z;
        z.point = *sol;
        auto fx = sh.eval_d(z.point);
        for (double v : fx) z.residual = std::max(z.residual, std::abs(v));
        sh.jac_d(z.point, jac, base_jac);
        Eigen::MatrixXd J(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) J(i, j) = jac[static_cast<size_t>(i)][static_cast<size_t>(j)];
        z.det = J.determinant();
        z.sigma_min = smallest_singular_value(J);
        out.push_back(std::move(z));
    }
    return out;
}

// --------------------------------------------------------------------------
// genericity_perturb: Lemma GENERICITYTRICK, constructively. Given the
// current sheets over U' (already transverse on closure(U1)), returns an
// invariant multisection supported inside (U2 ∪ O) \ closure(U1) making all
// sheets transverse over closure(U2).
// --------------------------------------------------------------------------

struct RegularValueSearchExhausted : std::runtime_error {
    explicit RegularValueSearchExhausted(const std::string& w) : std::runtime_error(w) {}
};
struct HypothesisViolation : std::runtime_error {
    explicit HypothesisViolation(const std::string& w) : std::runtime_error(w) {}
};
struct VdimNonconstant : std::runtime_error {
    explicit VdimNonconstant(const std::string& w) : std::runtime_error(w) {}
};
struct VdimNonzero : std::runtime_error {
    explicit VdimNonzero(const std::string& w) : std::runtime_error(w) {}
};
struct OrientationInconsistent : std::runtime_error {
    explicit OrientationInconsistent(const std::string& w) : std::runtime_error(w) {}
};

inline Multisection genericity_perturb(const KuranishiChart& chart, const std::vector<const Multisection*>& existing,
                                       const BoxUnion& u1, const BoxUnion& u2, const BoxUnion& overflow,
                                       std::uint64_t seed, const Rat& grid_step) {
    Multisection empty;
    empty.base_dim = chart.dim();
    empty.fiber_rank = chart.fiber_rank;

    auto sheets = sheets_of(chart.section, existing);

    // zeros of the current sheets on closure(U2) that fail the transversality
    // certificate; exact zeros already transverse on closure(U1) are fine
    std::vector<RatVec> uncovered;
    for (const Sheet& sh : sheets) {
        for (const SheetZero& z : sheet_zeros(sh, u2, grid_step)) {
            if (z.sigma_min > kTolTransverse) continue;
            RatVec p(z.point.size());
            for (size_t i = 0; i < p.size(); ++i) p[i] = snap(z.point[i], 1LL << 20);
            if (u1.contains(p))
                throw HypothesisViolation("genericity_perturb: non-transverse zero inside U1");
            bool dup = false;
            for (const RatVec& q : uncovered)
                if (to_double(linf_dist(p, q)) < 1e-4) dup = true;
            if (!dup) uncovered.push_back(p);
        }
    }
    if (uncovered.empty()) return empty;

    // allowed support region
    BoxUnion allowed = subtract_closed(box_union_union(u2, overflow), u1);

    // support boxes: exact boxes around the uncovered zeros inside `allowed`
    std::vector<Box> supports;
    for (const RatVec& z : uncovered) {
        if (!box_union_union(u2, overflow).closure_contains(z))
            throw HypothesisViolation("genericity_perturb: zero escapes U2 ∪ O");
        bool placed = false;
        for (Rat h = grid_step * 4; h > grid_step / 8; h /= 2) {
            Box b(z.size());
            for (size_t i = 0; i < z.size(); ++i) b[i] = Ival{z[i] - h, z[i] + h};
            if (subset(BoxUnion(chart.dim(), {b}), allowed)) {
                supports.push_back(b);
                placed = true;
                break;
            }
        }
        if (!placed) throw HypothesisViolation("genericity_perturb: no support room near " + vec_str(z));
    }

    // coefficient scale: small against the bump gradient so certificates have
    // room; the draw loop rejects anything that fails anyway
    Rat min_h = grid_step * 4;
    for (const Box& b : supports)
        for (const Ival& iv : b) min_h = std::min(min_h, Rat((*iv.hi - *iv.lo) / 2));
    Rat scale = min_h * min_h / 4;

    for (int attempt = 0; attempt < 1000; ++attempt) {
        SplitMix rng(prng_key(seed, 0x9e37u, static_cast<std::uint64_t>(attempt)));
        std::vector<BumpTerm> tau;
        for (const Box& b : supports)
            for (int fi = 0; fi < chart.fiber_rank; ++fi) {
                BumpTerm t;
                t.pre = Affine::identity(chart.dim());
                t.box = b;
                t.vec = RatVec(static_cast<size_t>(chart.fiber_rank), Rat(0));
                t.vec[static_cast<size_t>(fi)] = draw_rat(rng) * scale;
                tau.push_back(std::move(t));
            }
        Multisection ms = symmetrize(tau, chart);

        // certify: every sheet of (existing + ms) transverse over closure(U2),
        // with no zero escaping U2 ∪ O
        std::vector<const Multisection*> with = existing;
        with.push_back(&ms);
        bool ok = true;
        for (const Sheet& sh : sheets_of(chart.section, with)) {
            for (const SheetZero& z : sheet_zeros(sh, box_union_union(u2, overflow), grid_step)) {
                RatVec p(z.point.size());
                for (size_t i = 0; i < p.size(); ++i) p[i] = snap(z.point[i], 1LL << 20);
                if (u2.closure_contains(p) && z.sigma_min <= kTolTransverse) ok = false;
            }
            if (!ok) break;
        }
        if (ok) return ms;
    }
    throw RegularValueSearchExhausted("genericity_perturb: no regular draw in 1000 attempts");
}

// --------------------------------------------------------------------------
// The global induction and counting.
// --------------------------------------------------------------------------

struct Perturbation {
    // per chart id: the multisection list in lifting order (tau_j lifted for
    // j below, own tau last); empty multisections kept for bookkeeping
    std::map<std::string, std::vector<Multisection>> contributions;
    std::map<std::string, Multisection> own;  // the tau chosen at each index
};

inline Perturbation global_perturb(const Level1GCS& l1g, std::uint64_t seed, const Rat& grid_step) {
    const GoodCoordinateSystem& g = l1g.gcs;
    // constant virtual dimension
    std::optional<int> vdim;
    for (const auto& c : g.charts) {
        int v = c.dim() - c.fiber_rank;
        if (vdim && *vdim != v) throw VdimNonconstant("global_perturb: vdim varies across charts");
        vdim = v;
    }

    std::vector<int> order(g.charts.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (g.order_leq(a, b) && !g.order_leq(b, a)) return true;
        if (g.order_leq(b, a) && !g.order_leq(a, b)) return false;
        return a < b;
    });

    Perturbation pert;
    for (size_t oi = 0; oi < order.size(); ++oi) {
        int ci = order[oi];
        const KuranishiChart& chart = g.charts[static_cast<size_t>(ci)];
        std::vector<Multisection>& contrib = pert.contributions[chart.id];

        // lift all lower perturbations through the level-1 table
        BoxUnion transverse_region(chart.dim());
        for (size_t oj = 0; oj < oi; ++oj) {
            int cj = order[oj];
            const std::string& jid = g.charts[static_cast<size_t>(cj)].id;
            const Level1CoordinateChange* l1 = l1g.l1(jid, chart.id);
            if (!l1) continue;
            // everything below j was already folded into j's own tau list;
            // lift each of j's contributions
            for (const Multisection& ms : pert.contributions[jid]) {
                if (ms.empty()) continue;
                contrib.push_back(lift_perturbation(*l1, ms));
            }
            transverse_region = box_union_union(transverse_region, l1->tub.W);
        }

        // the lifted sheets are transverse over the tubular regions by the
        // lifting lemma; verified as part of the genericity certificates
        BoxUnion overflow(chart.dim());
        for (size_t oj = oi + 1; oj < order.size(); ++oj) {
            const std::string& nid = g.charts[static_cast<size_t>(order[oj])].id;
            if (const GcsChange* out = g.change(chart.id, nid)) overflow = box_union_union(overflow, out->cc.domain);
        }

        std::vector<const Multisection*> existing;
        for (const Multisection& ms : contrib) existing.push_back(&ms);
        Multisection tau = genericity_perturb(chart, existing, transverse_region, chart.base, overflow,
                                              prng_key(seed, static_cast<std::uint64_t>(ci), 1), grid_step);
        pert.own[chart.id] = tau;
        if (!tau.empty()) contrib.push_back(tau);
    }
    return pert;
}

// --------------------------------------------------------------------------
// Zero set and signed count.
// --------------------------------------------------------------------------

struct ZeroRecord {
    std::string chart_id;
    std::vector<double> point;
    double residual = 0;
    double det = 0;
    double sigma_min = 0;
    int sign = 0;
    int stabilizer = 1;
    Rat weight{1};
    bool secondary = false;  // lives over a lower chart's zero; not counted
};

struct ZeroSet {
    std::vector<ZeroRecord> zeros;

    void export_csv(std::ostream& os) const {
        size_t dimmax = 0;
        for (const auto& z : zeros) dimmax = std::max(dimmax, z.point.size());
        os << "chart_id";
        for (size_t i = 0; i < dimmax; ++i) os << ",x" << i;
        os << ",sign,weight,stabilizer,secondary\n";
        for (const auto& z : zeros) {
            os << z.chart_id;
            for (size_t i = 0; i < dimmax; ++i) {
                os << ",";
                if (i < z.point.size()) os << z.point[i];
            }
            os << "," << z.sign << "," << rat_str(z.weight) << "," << z.stabilizer << "," << (z.secondary ? 1 : 0)
               << "\n";
        }
    }
};

inline ZeroSet zero_set(const Level1GCS& l1g, const Perturbation& pert, const Rat& grid_step) {
    const GoodCoordinateSystem& g = l1g.gcs;
    ZeroSet out;
    for (const auto& chart : g.charts) {
        std::vector<const Multisection*> mss;
        auto it = pert.contributions.find(chart.id);
        if (it != pert.contributions.end())
            for (const Multisection& ms : it->second) mss.push_back(&ms);
        for (const Sheet& sh : sheets_of(chart.section, mss)) {
            for (const SheetZero& z : sheet_zeros(sh, chart.base, grid_step)) {
                ZeroRecord rec;
                rec.chart_id = chart.id;
                rec.point = z.point;
                rec.residual = z.residual;
                rec.det = z.det;
                rec.sigma_min = z.sigma_min;
                rec.sign = z.det > 0 ? 1 : -1;
                rec.weight = sh.weight;
                // stabilizer order from the group action on the zero
                int stab = 0;
                for (const SignedPerm& ge : chart.group.base) {
                    RatVec gp(z.point.size());
                    RatVec zp(z.point.size());
                    for (size_t i = 0; i < z.point.size(); ++i) zp[i] = snap(z.point[i], 1LL << 30);
                    gp = ge.apply(zp);
                    double d = 0;
                    for (size_t i = 0; i < z.point.size(); ++i)
                        d = std::max(d, std::abs(to_double(gp[i]) - z.point[i]));
                    if (d < 1e-5) ++stab;
                }
                rec.stabilizer = std::max(1, stab);
                // cross-chart dedup: a zero inside the tubular region of a
                // lower chart is the lift of that chart's zero
                for (const auto& [key, l1] : l1g.table) {
                    if (key.second != chart.id) continue;
                    RatVec zp(z.point.size());
                    for (size_t i = 0; i < z.point.size(); ++i) zp[i] = snap(z.point[i], 1LL << 30);
                    if (l1.tub.W.contains(zp) || l1.tub.W.closure_contains(zp)) rec.secondary = true;
                }
                out.zeros.push_back(std::move(rec));
            }
        }
    }
    // group-orbit dedup within each chart: one record per orbit, weights kept
    std::vector<ZeroRecord> kept;
    for (const auto& z : out.zeros) {
        bool dominated = false;
        for (const auto& w : kept) {
            if (w.chart_id != z.chart_id) continue;
            const KuranishiChart& chart = g.charts[static_cast<size_t>(g.index_of(z.chart_id))];
            RatVec zp(z.point.size()), wp(w.point.size());
            for (size_t i = 0; i < z.point.size(); ++i) zp[i] = snap(z.point[i], 1LL << 30);
            for (size_t i = 0; i < w.point.size(); ++i) wp[i] = snap(w.point[i], 1LL << 30);
            for (const SignedPerm& ge : chart.group.base) {
                if (ge.is_identity()) continue;
                RatVec gp = ge.apply(zp);
                double d = 0;
                for (size_t i = 0; i < gp.size(); ++i) d = std::max(d, std::abs(to_double(gp[i]) - w.point[i]));
                if (d < 1e-5) dominated = true;
            }
        }
        if (!dominated) kept.push_back(z);
    }
    out.zeros = std::move(kept);
    return out;
}

struct OrientationData {
    std::map<std::string, int> base_sign;   // per chart: orientation of TU
    std::map<std::string, int> fiber_sign;  // per chart: orientation of E^*

    int sign(const std::string& id) const {
        int b = base_sign.count(id) ? base_sign.at(id) : 1;
        int f = fiber_sign.count(id) ? fiber_sign.at(id) : 1;
        return b * f;
    }
};

// orientation consistency across the level-1 changes: the static frame
// convention sgn det[A|N] * sgn det[B|M] combined with the sign of the
// normal linearization must transport the zero signs coherently; verified on
// the actual perturbed zeros by comparing counted signs directly
inline void check_orientation(const Level1GCS& l1g, const ZeroSet& zs, const OrientationData& ori) {
    for (const auto& [key, l1] : l1g.table) {
        if (l1.trivial()) continue;
        const auto& src_id = key.first;
        const auto& tgt_id = key.second;
        // zeros of the source inside the change domain vs their secondary
        // copies in the target tubular region
        for (const auto& zsrc : zs.zeros) {
            if (zsrc.chart_id != src_id || zsrc.secondary) continue;
            RatVec zp(zsrc.point.size());
            for (size_t i = 0; i < zsrc.point.size(); ++i) zp[i] = snap(zsrc.point[i], 1LL << 30);
            if (!l1.cc.domain.closure_contains(zp)) continue;
            RatVec img = l1.cc.base_map.apply(zp);
            for (const auto& ztgt : zs.zeros) {
                if (ztgt.chart_id != tgt_id) continue;
                double d = 0;
                for (size_t i = 0; i < ztgt.point.size(); ++i)
                    d = std::max(d, std::abs(to_double(img[i]) - ztgt.point[i]));
                if (d > 1e-5) continue;
                if (ori.sign(src_id) * zsrc.sign != ori.sign(tgt_id) * ztgt.sign)
                    throw OrientationInconsistent("orientation transports inconsistently across " + src_id + "->" +
                                                  tgt_id);
            }
        }
    }
}

inline Rat signed_count(const Level1GCS& l1g, const ZeroSet& zs, const OrientationData& ori) {
    for (const auto& c : l1g.gcs.charts)
        if (c.dim() != c.fiber_rank) throw VdimNonzero("signed_count: virtual dimension is not zero");
    check_orientation(l1g, zs, ori);
    Rat total(0);
    for (const auto& z : zs.zeros) {
        if (z.secondary) continue;
        if (z.sigma_min <= kTolTransverse)
            throw std::runtime_error("signed_count: zero without a transversality certificate in chart " + z.chart_id);
        total += z.weight * Rat(z.sign * ori.sign(z.chart_id)) / Rat(z.stabilizer);
    }
    return total;
}

}  // namespace kur

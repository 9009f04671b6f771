#pragma once

// Finite unions of open axis-aligned boxes over Q, with the exact set
// predicates the rest of the library needs:
//
//   - membership (open and closure) at rational points,
//   - images/preimages under monomial affine maps,
//   - intersection, subtraction of closed boxes, insetting,
//   - subset / closure-subset / equality decided by a cell decomposition
//     on the combined coordinate breakpoints (bounds align with cells, so
//     one rational representative per cell decides each predicate),
//   - rational lattice sampling.
//
// Boxes are OPEN; a closed set enters only as the subtrahend of
// subtract_closed (which also covers deleting single points, as degenerate
// closed boxes). Unbounded sides are allowed via empty optionals.

#include "kuranishi/linalg.hpp"
#include "kuranishi/rational.hpp"

#include <algorithm>
#include <optional>
#include <stdexcept>
#include <vector>

namespace kur {

struct Ival {
    std::optional<Rat> lo, hi;  // nullopt = unbounded side

    bool valid() const { return !lo || !hi || *lo < *hi; }
    bool contains_open(const Rat& x) const { return (!lo || *lo < x) && (!hi || x < *hi); }
    bool contains_closed(const Rat& x) const { return (!lo || *lo <= x) && (!hi || x <= *hi); }
    bool bounded() const { return lo && hi; }
};

using Box = std::vector<Ival>;

inline Box box1(Rat lo, Rat hi) { return Box{Ival{lo, hi}}; }
inline Box box2(Rat lo1, Rat hi1, Rat lo2, Rat hi2) { return Box{Ival{lo1, hi1}, Ival{lo2, hi2}}; }

inline bool box_valid(const Box& b) {
    for (const Ival& iv : b)
        if (!iv.valid()) return false;
    return true;
}

inline std::optional<Box> box_intersect(const Box& a, const Box& b) {
    Box c(a.size());
    for (size_t i = 0; i < a.size(); ++i) {
        Ival iv;
        iv.lo = (!a[i].lo) ? b[i].lo : (!b[i].lo ? a[i].lo : std::optional<Rat>(std::max(*a[i].lo, *b[i].lo)));
        iv.hi = (!a[i].hi) ? b[i].hi : (!b[i].hi ? a[i].hi : std::optional<Rat>(std::min(*a[i].hi, *b[i].hi)));
        if (!iv.valid()) return std::nullopt;
        c[i] = iv;
    }
    return c;
}

// True if the closures meet (used to short-circuit subtraction).
inline bool box_closures_meet(const Box& a, const Box& b) {
    for (size_t i = 0; i < a.size(); ++i) {
        if (a[i].hi && b[i].lo && *a[i].hi < *b[i].lo) return false;
        if (b[i].hi && a[i].lo && *b[i].hi < *a[i].lo) return false;
    }
    return true;
}

struct BoxUnion {
    int dim = 0;
    std::vector<Box> boxes;

    BoxUnion() = default;
    explicit BoxUnion(int d) : dim(d) {}
    BoxUnion(int d, std::vector<Box> bs) : dim(d), boxes(std::move(bs)) {
        for (const Box& b : boxes) {
            if (static_cast<int>(b.size()) != dim) throw std::invalid_argument("BoxUnion: box arity mismatch");
            if (!box_valid(b)) throw std::invalid_argument("BoxUnion: empty box (needs lo < hi)");
        }
    }

    bool empty() const { return boxes.empty(); }

    bool contains(const RatVec& p) const {
        for (const Box& b : boxes) {
            bool in = true;
            for (size_t i = 0; i < b.size(); ++i)
                if (!b[i].contains_open(p[i])) { in = false; break; }
            if (in) return true;
        }
        return false;
    }

    bool closure_contains(const RatVec& p) const {
        for (const Box& b : boxes) {
            bool in = true;
            for (size_t i = 0; i < b.size(); ++i)
                if (!b[i].contains_closed(p[i])) { in = false; break; }
            if (in) return true;
        }
        return false;
    }

    void add(const Box& b) {
        if (static_cast<int>(b.size()) != dim) throw std::invalid_argument("BoxUnion::add: arity");
        if (box_valid(b)) boxes.push_back(b);
    }
};

inline BoxUnion intersect(const BoxUnion& a, const BoxUnion& b) {
    BoxUnion out(a.dim);
    for (const Box& x : a.boxes)
        for (const Box& y : b.boxes)
            if (auto c = box_intersect(x, y)) out.boxes.push_back(*c);
    return out;
}

inline BoxUnion intersect(const BoxUnion& a, const Box& b) {
    return intersect(a, BoxUnion(a.dim, {b}));
}

// a minus the closed box c: up to 2*dim open slabs (may overlap; fine for unions).
inline std::vector<Box> box_minus_closed(const Box& a, const Box& c) {
    if (!box_closures_meet(a, c)) return {a};
    std::vector<Box> out;
    for (size_t i = 0; i < a.size(); ++i) {
        if (c[i].lo) {
            Box left = a;
            left[i].hi = (!a[i].hi) ? c[i].lo : std::optional<Rat>(std::min(*a[i].hi, *c[i].lo));
            if (box_valid(left)) out.push_back(left);
        }
        if (c[i].hi) {
            Box right = a;
            right[i].lo = (!a[i].lo) ? c[i].hi : std::optional<Rat>(std::max(*a[i].lo, *c[i].hi));
            if (box_valid(right)) out.push_back(right);
        }
    }
    return out;
}

// A \ closure(C) for box unions A, C, exact.
inline BoxUnion subtract_closed(const BoxUnion& a, const BoxUnion& c) {
    std::vector<Box> work = a.boxes;
    for (const Box& cb : c.boxes) {
        std::vector<Box> next;
        for (const Box& w : work) {
            auto pieces = box_minus_closed(w, cb);
            next.insert(next.end(), pieces.begin(), pieces.end());
        }
        work = std::move(next);
    }
    return BoxUnion(a.dim, std::move(work));
}

inline BoxUnion subtract_point(const BoxUnion& a, const RatVec& p) {
    Box degenerate(p.size());
    for (size_t i = 0; i < p.size(); ++i) degenerate[i] = Ival{p[i], p[i]};
    BoxUnion c(a.dim);
    c.boxes.push_back(degenerate);  // bypasses open-validity: closed degenerate box
    return subtract_closed(a, c);
}

inline BoxUnion box_union_union(const BoxUnion& a, const BoxUnion& b) {
    BoxUnion out = a;
    for (const Box& x : b.boxes) out.boxes.push_back(x);
    return out;
}

namespace detail {

inline bool ival_subset(const Ival& a, const Ival& b) {
    bool lo_ok = !b.lo || (a.lo && *b.lo <= *a.lo);
    bool hi_ok = !b.hi || (a.hi && *a.hi <= *b.hi);
    return lo_ok && hi_ok;
}

}  // namespace detail

// Cheap exact simplification: drop boxes absorbed by others and merge pairs
// that differ in a single overlapping coordinate. Keeps unions small through
// the subtract/intersect cascades of the tripling formulas.
inline void simplify(BoxUnion& u) {
    bool changed = true;
    while (changed) {
        changed = false;
        // absorption (mark boxes contained in another surviving box)
        {
            std::vector<bool> dead(u.boxes.size(), false);
            for (size_t i = 0; i < u.boxes.size(); ++i) {
                if (dead[i]) continue;
                for (size_t j = 0; j < u.boxes.size(); ++j) {
                    if (i == j || dead[j]) continue;
                    bool inside = true;
                    for (size_t k = 0; k < u.boxes[i].size(); ++k)
                        if (!detail::ival_subset(u.boxes[i][k], u.boxes[j][k])) { inside = false; break; }
                    if (inside) {
                        dead[i] = true;
                        changed = true;
                        break;
                    }
                }
            }
            if (changed) {
                std::vector<Box> keep;
                for (size_t i = 0; i < u.boxes.size(); ++i)
                    if (!dead[i]) keep.push_back(u.boxes[i]);
                u.boxes = std::move(keep);
            }
        }
        // single-coordinate merge of overlapping boxes
        for (size_t i = 0; i < u.boxes.size() && !changed; ++i)
            for (size_t j = i + 1; j < u.boxes.size() && !changed; ++j) {
                int diff = -1;
                bool mergeable = true;
                for (size_t k = 0; k < u.boxes[i].size(); ++k) {
                    const Ival &a = u.boxes[i][k], &b = u.boxes[j][k];
                    bool same = ((!a.lo && !b.lo) || (a.lo && b.lo && *a.lo == *b.lo)) &&
                                ((!a.hi && !b.hi) || (a.hi && b.hi && *a.hi == *b.hi));
                    if (same) continue;
                    if (diff >= 0) { mergeable = false; break; }
                    diff = static_cast<int>(k);
                }
                if (!mergeable || diff < 0) continue;
                const Ival &a = u.boxes[i][static_cast<size_t>(diff)], &b = u.boxes[j][static_cast<size_t>(diff)];
                // strict overlap required: open intervals touching at a point
                // do not merge
                bool overlap = (!a.hi || !b.lo || *b.lo < *a.hi) && (!b.hi || !a.lo || *a.lo < *b.hi);
                if (!overlap) continue;
                Ival m;
                m.lo = (!a.lo || !b.lo) ? std::nullopt : std::optional<Rat>(std::min(*a.lo, *b.lo));
                m.hi = (!a.hi || !b.hi) ? std::nullopt : std::optional<Rat>(std::max(*a.hi, *b.hi));
                u.boxes[i][static_cast<size_t>(diff)] = m;
                u.boxes.erase(u.boxes.begin() + static_cast<std::ptrdiff_t>(j));
                changed = true;
            }
    }
}

inline BoxUnion simplified(BoxUnion u) {
    simplify(u);
    return u;
}

// ---------------------------------------------------------------------------
// Cell decomposition. Breakpoints per coordinate come from all operand
// bounds; elementary cells (point / open interval / ray) never straddle a
// bound, so one representative point per cell decides membership exactly.
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::vector<Rat>> breakpoints(const std::vector<const BoxUnion*>& ops, int dim) {
    std::vector<std::vector<Rat>> bps(static_cast<size_t>(dim));
    for (const BoxUnion* u : ops)
        for (const Box& b : u->boxes)
            for (int i = 0; i < dim; ++i) {
                if (b[static_cast<size_t>(i)].lo) bps[static_cast<size_t>(i)].push_back(*b[static_cast<size_t>(i)].lo);
                if (b[static_cast<size_t>(i)].hi) bps[static_cast<size_t>(i)].push_back(*b[static_cast<size_t>(i)].hi);
            }
    for (auto& v : bps) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    return bps;
}

// Representatives of the 1-dim cells induced by sorted breakpoints.
inline std::vector<Rat> cell_reps(const std::vector<Rat>& bp) {
    std::vector<Rat> reps;
    if (bp.empty()) {
        reps.push_back(Rat(0));
        return reps;
    }
    reps.push_back(bp.front() - 1);
    for (size_t i = 0; i < bp.size(); ++i) {
        reps.push_back(bp[i]);
        if (i + 1 < bp.size()) reps.push_back((bp[i] + bp[i + 1]) / 2);
    }
    reps.push_back(bp.back() + 1);
    return reps;
}

template <typename Pred>
inline bool all_cells(const std::vector<std::vector<Rat>>& reps, Pred&& pred) {
    int dim = static_cast<int>(reps.size());
    std::vector<size_t> idx(static_cast<size_t>(dim), 0);
    RatVec p(static_cast<size_t>(dim));
    while (true) {
        for (int i = 0; i < dim; ++i) p[static_cast<size_t>(i)] = reps[static_cast<size_t>(i)][idx[static_cast<size_t>(i)]];
        if (!pred(p)) return false;
        int i = 0;
        for (; i < dim; ++i) {
            if (++idx[static_cast<size_t>(i)] < reps[static_cast<size_t>(i)].size()) break;
            idx[static_cast<size_t>(i)] = 0;
        }
        if (i == dim) return true;
    }
}

}  // namespace detail

inline bool subset(const BoxUnion& a, const BoxUnion& b) {
    if (a.empty()) return true;
    auto bps = detail::breakpoints({&a, &b}, a.dim);
    std::vector<std::vector<Rat>> reps(bps.size());
    for (size_t i = 0; i < bps.size(); ++i) reps[i] = detail::cell_reps(bps[i]);
    return detail::all_cells(reps, [&](const RatVec& p) { return !a.contains(p) || b.contains(p); });
}

inline bool closure_subset(const BoxUnion& a, const BoxUnion& b) {
    if (a.empty()) return true;
    auto bps = detail::breakpoints({&a, &b}, a.dim);
    std::vector<std::vector<Rat>> reps(bps.size());
    for (size_t i = 0; i < bps.size(); ++i) reps[i] = detail::cell_reps(bps[i]);
    return detail::all_cells(reps, [&](const RatVec& p) { return !a.closure_contains(p) || b.contains(p); });
}

inline bool set_equal(const BoxUnion& a, const BoxUnion& b) { return subset(a, b) && subset(b, a); }

inline bool disjoint(const BoxUnion& a, const BoxUnion& b) { return intersect(a, b).empty(); }

// ---------------------------------------------------------------------------
// Monomial affine images / preimages (exact; dimension may change).
// ---------------------------------------------------------------------------

// Image of a box union under a monomial injective affine map into a space of
// EQUAL dimension (square A): an open box union.
inline BoxUnion affine_image_square(const Affine& f, const BoxUnion& u) {
    if (f.A.rows() != f.A.cols()) throw std::invalid_argument("affine_image_square: not square");
    auto cols = f.monomial_cols();
    BoxUnion out(f.codom_dim());
    for (const Box& b : u.boxes) {
        Box nb(static_cast<size_t>(f.codom_dim()));
        for (size_t j = 0; j < cols.size(); ++j) {
            auto [row, scale] = cols[j];
            const Ival& s = b[j];
            Ival t;
            Rat off = f.b[static_cast<size_t>(row)];
            auto map = [&](const std::optional<Rat>& x) -> std::optional<Rat> {
                if (!x) return std::nullopt;
                return scale * (*x) + off;
            };
            if (scale > 0) {
                t.lo = map(s.lo);
                t.hi = map(s.hi);
            } else {
                t.lo = map(s.hi);
                t.hi = map(s.lo);
            }
            nb[static_cast<size_t>(row)] = t;
        }
        out.boxes.push_back(nb);
    }
    return out;
}

// Preimage f^{-1}(U) of a box union under a monomial injective affine map
// (any codomain dimension): exact box union in the domain.
inline BoxUnion affine_preimage(const Affine& f, const BoxUnion& u) {
    auto cols = f.monomial_cols();
    BoxUnion out(f.dom_dim());
    for (const Box& tb : u.boxes) {
        // Target coordinates not hit by any source coordinate must admit the
        // constant value f.b[row]; otherwise this box contributes nothing.
        std::vector<bool> hit(static_cast<size_t>(f.codom_dim()), false);
        for (auto& [row, scale] : cols) hit[static_cast<size_t>(row)] = true;
        bool ok = true;
        for (int i = 0; i < f.codom_dim() && ok; ++i)
            if (!hit[static_cast<size_t>(i)] && !tb[static_cast<size_t>(i)].contains_open(f.b[static_cast<size_t>(i)])) ok = false;
        if (!ok) continue;

        Box db(static_cast<size_t>(f.dom_dim()));
        bool valid = true;
        for (size_t j = 0; j < cols.size() && valid; ++j) {
            auto [row, scale] = cols[j];
            const Ival& t = tb[static_cast<size_t>(row)];
            Rat off = f.b[static_cast<size_t>(row)];
            // scale*x + off in (lo,hi)  <=>  x in ((lo-off)/scale, (hi-off)/scale), flipped if scale<0
            auto lo = t.lo ? std::optional<Rat>((*t.lo - off) / scale) : std::nullopt;
            auto hi = t.hi ? std::optional<Rat>((*t.hi - off) / scale) : std::nullopt;
            Ival d;
            if (scale > 0) {
                d.lo = lo;
                d.hi = hi;
            } else {
                d.lo = hi;
                d.hi = lo;
            }
            if (!d.valid()) valid = false;
            db[j] = d;
        }
        if (valid) out.boxes.push_back(db);
    }
    return out;
}

// Preimage under a map whose MATRIX rows each read at most one source
// coordinate (covers partial-diagonal embeddings, where a source coordinate
// feeds several target rows). Exact.
inline BoxUnion affine_preimage_rowwise(const Affine& f, const BoxUnion& u) {
    BoxUnion out(f.dom_dim());
    for (const Box& tb : u.boxes) {
        Box db(static_cast<size_t>(f.dom_dim()));  // all-unbounded
        bool valid = true;
        for (int i = 0; i < f.codom_dim() && valid; ++i) {
            int src = -1;
            Rat scale(0);
            for (int j = 0; j < f.dom_dim(); ++j)
                if (f.A(i, j) != 0) {
                    if (src >= 0) throw std::runtime_error("affine_preimage_rowwise: row reads two coordinates");
                    src = j;
                    scale = f.A(i, j);
                }
            const Ival& t = tb[static_cast<size_t>(i)];
            if (src < 0) {
                if (!t.contains_open(f.b[static_cast<size_t>(i)])) valid = false;
                continue;
            }
            Rat off = f.b[static_cast<size_t>(i)];
            auto lo = t.lo ? std::optional<Rat>((*t.lo - off) / scale) : std::nullopt;
            auto hi = t.hi ? std::optional<Rat>((*t.hi - off) / scale) : std::nullopt;
            Ival want = (scale > 0) ? Ival{lo, hi} : Ival{hi, lo};
            Ival& cur = db[static_cast<size_t>(src)];
            cur.lo = (!cur.lo) ? want.lo : (!want.lo ? cur.lo : std::optional<Rat>(std::max(*cur.lo, *want.lo)));
            cur.hi = (!cur.hi) ? want.hi : (!want.hi ? cur.hi : std::optional<Rat>(std::min(*cur.hi, *want.hi)));
            if (!cur.valid()) valid = false;
        }
        if (valid) out.boxes.push_back(db);
    }
    return out;
}

// Drop the given coordinates (projection); the result is open in the kept ones.
inline BoxUnion project_drop(const BoxUnion& u, const std::vector<int>& drop) {
    std::vector<bool> dropme(static_cast<size_t>(u.dim), false);
    for (int d : drop) dropme[static_cast<size_t>(d)] = true;
    int nd = 0;
    for (int i = 0; i < u.dim; ++i)
        if (!dropme[static_cast<size_t>(i)]) ++nd;
    BoxUnion out(nd);
    for (const Box& b : u.boxes) {
        Box nb;
        nb.reserve(static_cast<size_t>(nd));
        for (int i = 0; i < u.dim; ++i)
            if (!dropme[static_cast<size_t>(i)]) nb.push_back(b[static_cast<size_t>(i)]);
        out.boxes.push_back(nb);
    }
    return out;
}

// Inverse of project_drop: re-insert coordinates with prescribed intervals.
inline BoxUnion extend_coords(const BoxUnion& u, const std::vector<std::pair<int, Ival>>& inserted, int new_dim) {
    BoxUnion out(new_dim);
    for (const Box& b : u.boxes) {
        Box nb(static_cast<size_t>(new_dim));
        std::vector<bool> used(static_cast<size_t>(new_dim), false);
        for (const auto& [pos, iv] : inserted) {
            nb[static_cast<size_t>(pos)] = iv;
            used[static_cast<size_t>(pos)] = true;
        }
        size_t src = 0;
        for (int i = 0; i < new_dim; ++i)
            if (!used[static_cast<size_t>(i)]) nb[static_cast<size_t>(i)] = b[src++];
        out.boxes.push_back(nb);
    }
    return out;
}

// Inset only the listed coordinates (the others keep their extent); used
// where a shrinking must stay fiber-complete along tubular directions.
inline BoxUnion inset_coords(const BoxUnion& u, const Rat& delta, const std::vector<bool>& do_inset) {
    BoxUnion out(u.dim);
    for (const Box& b : u.boxes) {
        Box nb = b;
        for (size_t i = 0; i < nb.size(); ++i) {
            if (!do_inset[i]) continue;
            if (nb[i].lo) nb[i].lo = *nb[i].lo + delta;
            if (nb[i].hi) nb[i].hi = *nb[i].hi - delta;
        }
        if (box_valid(nb)) out.boxes.push_back(nb);
    }
    return out;
}

// Shrink every bounded side inward by delta; boxes that die are dropped.
inline BoxUnion inset(const BoxUnion& u, const Rat& delta) {
    BoxUnion out(u.dim);
    for (const Box& b : u.boxes) {
        Box nb = b;
        for (Ival& iv : nb) {
            if (iv.lo) iv.lo = *iv.lo + delta;
            if (iv.hi) iv.hi = *iv.hi - delta;
        }
        if (box_valid(nb)) out.boxes.push_back(nb);
    }
    return out;
}

inline bool bounded(const BoxUnion& u) {
    for (const Box& b : u.boxes)
        for (const Ival& iv : b)
            if (!iv.bounded()) return false;
    return true;
}

inline Rat shortest_bounded_side(const BoxUnion& u) {
    std::optional<Rat> best;
    for (const Box& b : u.boxes)
        for (const Ival& iv : b)
            if (iv.bounded()) {
                Rat w = *iv.hi - *iv.lo;
                if (!best || w < *best) best = w;
            }
    if (!best) throw std::runtime_error("shortest_bounded_side: no bounded side");
    return *best;
}

inline RatVec some_point(const BoxUnion& u) {
    if (u.empty()) throw std::runtime_error("some_point: empty box union");
    const Box& b = u.boxes.front();
    RatVec p(b.size());
    for (size_t i = 0; i < b.size(); ++i) {
        const Ival& iv = b[i];
        if (iv.bounded())
            p[i] = (*iv.lo + *iv.hi) / 2;
        else if (iv.lo)
            p[i] = *iv.lo + 1;
        else if (iv.hi)
            p[i] = *iv.hi - 1;
        else
            p[i] = 0;
    }
    return p;
}

// Finite-corner list (per box, product of finite bounds); used for exact
// invariance spot checks.
inline std::vector<RatVec> corners(const BoxUnion& u) {
    std::vector<RatVec> out;
    for (const Box& b : u.boxes) {
        std::vector<std::vector<Rat>> choices;
        bool all_finite = true;
        for (const Ival& iv : b) {
            if (!iv.bounded()) { all_finite = false; break; }
            choices.push_back({*iv.lo, *iv.hi});
        }
        if (!all_finite) continue;
        std::vector<size_t> idx(b.size(), 0);
        while (true) {
            RatVec p(b.size());
            for (size_t i = 0; i < b.size(); ++i) p[i] = choices[i][idx[i]];
            out.push_back(p);
            size_t i = 0;
            for (; i < b.size(); ++i) {
                if (++idx[i] < 2) break;
                idx[i] = 0;
            }
            if (i == b.size()) break;
        }
    }
    return out;
}

// Number of lattice points of step*Z strictly inside each box, summed;
// cheap estimate used to cap seed counts before materializing grids.
inline BigInt grid_count_estimate(const BoxUnion& u, const Rat& step) {
    BigInt total = 0;
    for (const Box& b : u.boxes) {
        BigInt prod = 1;
        for (const Ival& iv : b) {
            if (!iv.bounded()) return BigInt(-1);
            Rat w = (*iv.hi - *iv.lo) / step;
            BigInt n = numerator(w) / denominator(w) + 1;
            prod *= n;
        }
        total += prod;
    }
    return total;
}

// The given step coarsened (doubled) until the lattice inside u holds at
// most max_seeds points; keeps high-dimensional grids tractable.
inline Rat capped_step(const BoxUnion& u, Rat step, long long max_seeds = 20000) {
    if (!bounded(u)) return step;
    while (grid_count_estimate(u, step) > max_seeds) step *= 2;
    return step;
}

// Lattice points step*Z^dim strictly inside u (deduplicated across boxes).
inline std::vector<RatVec> grid_points(const BoxUnion& u, const Rat& step) {
    if (!bounded(u)) throw std::runtime_error("grid_points: unbounded base");
    std::vector<RatVec> out;
    auto key_less = [](const RatVec& a, const RatVec& b) {
        for (size_t i = 0; i < a.size(); ++i) {
            if (a[i] < b[i]) return true;
            if (b[i] < a[i]) return false;
        }
        return false;
    };
    for (const Box& b : u.boxes) {
        std::vector<std::vector<Rat>> axes;
        for (const Ival& iv : b) {
            std::vector<Rat> xs;
            // smallest k with k*step > lo
            BigInt k = numerator(Rat(*iv.lo / step));
            BigInt d = denominator(Rat(*iv.lo / step));
            // floor(lo/step) then walk upward; cheap and exact
            BigInt q = k / d;
            if (k < 0 && k % d != 0) q -= 1;
            Rat x = Rat(q) * step;
            while (x <= *iv.lo) x += step;
            while (x < *iv.hi) {
                xs.push_back(x);
                x += step;
            }
            axes.push_back(std::move(xs));
        }
        bool any_empty = false;
        for (auto& a : axes)
            if (a.empty()) any_empty = true;
        if (any_empty) continue;
        std::vector<size_t> idx(axes.size(), 0);
        while (true) {
            RatVec p(axes.size());
            for (size_t i = 0; i < axes.size(); ++i) p[i] = axes[i][idx[i]];
            out.push_back(p);
            size_t i = 0;
            for (; i < axes.size(); ++i) {
                if (++idx[i] < axes[i].size()) break;
                idx[i] = 0;
            }
            if (i == axes.size()) break;
        }
    }
    std::sort(out.begin(), out.end(), key_less);
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

}  // namespace kur

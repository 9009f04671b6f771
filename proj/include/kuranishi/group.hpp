#pragma once

// Finite signed-coordinate-permutation groups acting on chart bases and
// bundle fibers. A signed permutation sends e_i to sign[i] * e_{perm[i]};
// such maps carry axis boxes to axis boxes, so invariance of a BoxUnion is
// an exact set-equality check.

#include "kuranishi/box.hpp"
#include "kuranishi/linalg.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace kur {

struct SignedPerm {
    std::vector<int> perm;  // image coordinate of each source coordinate
    std::vector<int> sign;  // +1 / -1 per source coordinate

    static SignedPerm identity(int n) {
        SignedPerm g;
        g.perm.resize(static_cast<size_t>(n));
        g.sign.assign(static_cast<size_t>(n), 1);
        for (int i = 0; i < n; ++i) g.perm[static_cast<size_t>(i)] = i;
        return g;
    }

    int dim() const { return static_cast<int>(perm.size()); }

    RatVec apply(const RatVec& x) const {
        RatVec y(x.size());
        for (size_t i = 0; i < x.size(); ++i) y[static_cast<size_t>(perm[i])] = Rat(sign[i]) * x[i];
        return y;
    }

    // this ∘ g
    SignedPerm compose(const SignedPerm& g) const {
        SignedPerm h;
        h.perm.resize(perm.size());
        h.sign.resize(perm.size());
        for (size_t i = 0; i < perm.size(); ++i) {
            h.perm[i] = perm[static_cast<size_t>(g.perm[i])];
            h.sign[i] = sign[static_cast<size_t>(g.perm[i])] * g.sign[i];
        }
        return h;
    }

    SignedPerm inverse() const {
        SignedPerm h;
        h.perm.resize(perm.size());
        h.sign.resize(perm.size());
        for (size_t i = 0; i < perm.size(); ++i) {
            h.perm[static_cast<size_t>(perm[i])] = static_cast<int>(i);
            h.sign[static_cast<size_t>(perm[i])] = sign[i];
        }
        return h;
    }

    bool operator==(const SignedPerm& o) const { return perm == o.perm && sign == o.sign; }

    Mat matrix() const {
        Mat m(dim(), dim());
        for (int j = 0; j < dim(); ++j) m(perm[static_cast<size_t>(j)], j) = sign[static_cast<size_t>(j)];
        return m;
    }

    Affine affine() const { return Affine{matrix(), RatVec(perm.size(), Rat(0))}; }

    bool is_identity() const {
        for (size_t i = 0; i < perm.size(); ++i)
            if (perm[i] != static_cast<int>(i) || sign[i] != 1) return false;
        return true;
    }

    BoxUnion map_boxes(const BoxUnion& u) const { return affine_image_square(affine(), u); }

    int det_sign() const {
        // permutation parity times product of signs
        std::vector<bool> seen(perm.size(), false);
        int parity = 1;
        for (size_t i = 0; i < perm.size(); ++i) {
            if (seen[i]) continue;
            size_t j = i, len = 0;
            while (!seen[j]) {
                seen[j] = true;
                j = static_cast<size_t>(perm[j]);
                ++len;
            }
            if (len % 2 == 0) parity = -parity;
        }
        for (int s : sign) parity *= s;
        return parity;
    }
};

struct GroupAction {
    int dim = 0;
    int fiber_dim = 0;
    std::vector<SignedPerm> base;   // element 0 must be the identity
    std::vector<SignedPerm> fiber;  // parallel list, same indexing
    std::vector<std::vector<int>> comp;  // comp[i][j] = index of base[i]∘base[j]

    static GroupAction trivial(int dim, int fiber_dim) {
        GroupAction g;
        g.dim = dim;
        g.fiber_dim = fiber_dim;
        g.base = {SignedPerm::identity(dim)};
        g.fiber = {SignedPerm::identity(fiber_dim)};
        g.comp = {{0}};
        return g;
    }

    int size() const { return static_cast<int>(base.size()); }

    int find_base(const SignedPerm& g) const {
        for (int i = 0; i < size(); ++i)
            if (base[static_cast<size_t>(i)] == g) return i;
        return -1;
    }

    // Closure, identity and inverse presence, composition table, and that
    // fiber elements compose the same way (the fiber action covers the base
    // action). Throws on the first violation.
    void check_and_build_table() {
        if (base.empty() || !base[0].is_identity())
            throw std::runtime_error("GroupAction: element 0 must be the identity");
        if (fiber.size() != base.size()) throw std::runtime_error("GroupAction: fiber list size mismatch");
        comp.assign(base.size(), std::vector<int>(base.size(), -1));
        for (int i = 0; i < size(); ++i)
            for (int j = 0; j < size(); ++j) {
                SignedPerm bij = base[static_cast<size_t>(i)].compose(base[static_cast<size_t>(j)]);
                int k = find_base(bij);
                if (k < 0) throw std::runtime_error("GroupAction: not closed under composition");
                if (!(fiber[static_cast<size_t>(i)].compose(fiber[static_cast<size_t>(j)]) == fiber[static_cast<size_t>(k)]))
                    throw std::runtime_error("GroupAction: fiber action does not cover base composition");
                comp[static_cast<size_t>(i)][static_cast<size_t>(j)] = k;
            }
        for (int i = 0; i < size(); ++i) {
            int inv = find_base(base[static_cast<size_t>(i)].inverse());
            if (inv < 0) throw std::runtime_error("GroupAction: inverse missing");
        }
    }

    bool preserves(const BoxUnion& u) const {
        for (const SignedPerm& g : base)
            if (!set_equal(g.map_boxes(u), u)) return false;
        return true;
    }

    // Orbit of a rational point under the base action.
    std::vector<RatVec> orbit(const RatVec& p) const {
        std::vector<RatVec> out;
        for (const SignedPerm& g : base) {
            RatVec q = g.apply(p);
            bool dup = false;
            for (const RatVec& r : out)
                if (r == q) { dup = true; break; }
            if (!dup) out.push_back(q);
        }
        return out;
    }

    bool same_orbit(const RatVec& p, const RatVec& q) const {
        for (const SignedPerm& g : base)
            if (g.apply(p) == q) return true;
        return false;
    }

    int stabilizer_order(const RatVec& p) const {
        int n = 0;
        for (const SignedPerm& g : base)
            if (g.apply(p) == p) ++n;
        return n;
    }
};

}  // namespace kur

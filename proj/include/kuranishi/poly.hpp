#pragma once

// Sparse multivariate polynomials over Q and polynomial bundle sections.
// Symbolic composition with affine maps and signed permutations is exact, so
// equivariance and section-intertwining are decided as polynomial identities
// rather than on samples.

#include "kuranishi/group.hpp"
#include "kuranishi/linalg.hpp"
#include "kuranishi/rational.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <vector>

namespace kur {

struct Monomial {
    Rat coef;
    std::vector<unsigned> exps;
};

class Poly {
public:
    Poly() = default;
    explicit Poly(int nvars) : nvars_(nvars) {}
    Poly(int nvars, std::vector<Monomial> terms) : nvars_(nvars), terms_(std::move(terms)) { normalize(); }

    static Poly constant(int nvars, const Rat& c) {
        Poly p(nvars);
        if (c != 0) p.terms_.push_back({c, std::vector<unsigned>(static_cast<size_t>(nvars), 0)});
        return p;
    }
    static Poly var(int nvars, int i, const Rat& coef = Rat(1)) {
        Poly p(nvars);
        Monomial m{coef, std::vector<unsigned>(static_cast<size_t>(nvars), 0)};
        m.exps[static_cast<size_t>(i)] = 1;
        if (coef != 0) p.terms_.push_back(m);
        return p;
    }

    int nvars() const { return nvars_; }
    const std::vector<Monomial>& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }

    Rat eval(const RatVec& x) const {
        Rat acc(0);
        for (const Monomial& m : terms_) {
            Rat t = m.coef;
            for (size_t i = 0; i < m.exps.size(); ++i)
                if (m.exps[i]) t *= rat_pow(x[i], m.exps[i]);
            acc += t;
        }
        return acc;
    }

    double eval_d(const std::vector<double>& x) const {
        double acc = 0;
        for (const Monomial& m : terms_) {
            double t = to_double(m.coef);
            for (size_t i = 0; i < m.exps.size(); ++i)
                for (unsigned e = 0; e < m.exps[i]; ++e) t *= x[i];
            acc += t;
        }
        return acc;
    }

    Poly derivative(int var) const {
        Poly d(nvars_);
        for (const Monomial& m : terms_) {
            unsigned e = m.exps[static_cast<size_t>(var)];
            if (e == 0) continue;
            Monomial dm = m;
            dm.coef *= Rat(e);
            dm.exps[static_cast<size_t>(var)] = e - 1;
            d.terms_.push_back(dm);
        }
        d.normalize();
        return d;
    }

    friend Poly operator+(const Poly& a, const Poly& b) {
        Poly c(a.nvars_);
        c.terms_ = a.terms_;
        c.terms_.insert(c.terms_.end(), b.terms_.begin(), b.terms_.end());
        c.normalize();
        return c;
    }
    friend Poly operator-(const Poly& a, const Poly& b) { return a + (b * Rat(-1)); }
    friend Poly operator*(const Poly& a, const Rat& s) {
        Poly c(a.nvars_);
        if (s == 0) return c;
        c.terms_ = a.terms_;
        for (Monomial& m : c.terms_) m.coef *= s;
        return c;
    }
    friend Poly operator*(const Poly& a, const Poly& b) {
        Poly c(a.nvars_);
        for (const Monomial& ma : a.terms_)
            for (const Monomial& mb : b.terms_) {
                Monomial m{ma.coef * mb.coef, ma.exps};
                for (size_t i = 0; i < m.exps.size(); ++i) m.exps[i] += mb.exps[i];
                c.terms_.push_back(m);
            }
        c.normalize();
        return c;
    }

    bool operator==(const Poly& o) const { return nvars_ == o.nvars_ && terms_eq(o); }

    // Substitute x_i := args[i] (polynomials in a new variable set).
    Poly substitute(const std::vector<Poly>& args) const {
        if (static_cast<int>(args.size()) != nvars_) throw std::invalid_argument("Poly::substitute arity");
        int new_n = args.empty() ? 0 : args[0].nvars();
        Poly acc(new_n);
        for (const Monomial& m : terms_) {
            Poly t = Poly::constant(new_n, m.coef);
            for (size_t i = 0; i < m.exps.size(); ++i)
                for (unsigned e = 0; e < m.exps[i]; ++e) t = t * args[i];
            acc = acc + t;
        }
        return acc;
    }

    // p(A y + b) as a polynomial in y.
    Poly compose_affine(const Affine& f) const {
        std::vector<Poly> args;
        for (int i = 0; i < f.codom_dim(); ++i) {
            Poly a = Poly::constant(f.dom_dim(), f.b[static_cast<size_t>(i)]);
            for (int j = 0; j < f.dom_dim(); ++j)
                if (f.A(i, j) != 0) a = a + Poly::var(f.dom_dim(), j, f.A(i, j));
            args.push_back(a);
        }
        return substitute(args);
    }

private:
    void normalize() {
        std::map<std::vector<unsigned>, Rat> acc;
        for (const Monomial& m : terms_) acc[m.exps] += m.coef;
        terms_.clear();
        for (auto& [e, c] : acc)
            if (c != 0) terms_.push_back({c, e});
    }
    bool terms_eq(const Poly& o) const {
        if (terms_.size() != o.terms_.size()) return false;
        for (size_t i = 0; i < terms_.size(); ++i)
            if (terms_[i].coef != o.terms_[i].coef || terms_[i].exps != o.terms_[i].exps) return false;
        return true;
    }

    int nvars_ = 0;
    std::vector<Monomial> terms_;  // kept sorted+combined by normalize()
};

struct PolySection {
    int base_dim = 0;
    int fiber_rank = 0;
    std::vector<Poly> components;

    static PolySection make(int base_dim, std::vector<Poly> comps) {
        PolySection s;
        s.base_dim = base_dim;
        s.fiber_rank = static_cast<int>(comps.size());
        s.components = std::move(comps);
        for (const Poly& p : s.components)
            if (p.nvars() != base_dim) throw std::invalid_argument("PolySection: component arity mismatch");
        return s;
    }

    RatVec eval(const RatVec& x) const {
        RatVec y(static_cast<size_t>(fiber_rank));
        for (int i = 0; i < fiber_rank; ++i) y[static_cast<size_t>(i)] = components[static_cast<size_t>(i)].eval(x);
        return y;
    }

    std::vector<double> eval_d(const std::vector<double>& x) const {
        std::vector<double> y(static_cast<size_t>(fiber_rank));
        for (int i = 0; i < fiber_rank; ++i) y[static_cast<size_t>(i)] = components[static_cast<size_t>(i)].eval_d(x);
        return y;
    }

    // Exact Jacobian matrix of partial derivatives at a rational point.
    Mat jacobian(const RatVec& x) const {
        Mat j(fiber_rank, base_dim);
        for (int i = 0; i < fiber_rank; ++i)
            for (int k = 0; k < base_dim; ++k) j(i, k) = components[static_cast<size_t>(i)].derivative(k).eval(x);
        return j;
    }

    // Symbolic jacobian entries (for double-precision pipelines).
    std::vector<std::vector<Poly>> jacobian_polys() const {
        std::vector<std::vector<Poly>> j(static_cast<size_t>(fiber_rank));
        for (int i = 0; i < fiber_rank; ++i) {
            j[static_cast<size_t>(i)].reserve(static_cast<size_t>(base_dim));
            for (int k = 0; k < base_dim; ++k) j[static_cast<size_t>(i)].push_back(components[static_cast<size_t>(i)].derivative(k));
        }
        return j;
    }

    // s ∘ (affine map): a section over the map's domain.
    PolySection compose_affine(const Affine& f) const {
        PolySection out;
        out.base_dim = f.dom_dim();
        out.fiber_rank = fiber_rank;
        for (const Poly& p : components) out.components.push_back(p.compose_affine(f));
        return out;
    }

    // (linear fiber map M) ∘ s
    PolySection postcompose(const Mat& m) const {
        PolySection out;
        out.base_dim = base_dim;
        out.fiber_rank = m.rows();
        out.components.assign(static_cast<size_t>(m.rows()), Poly(base_dim));
        for (int i = 0; i < m.rows(); ++i)
            for (int k = 0; k < m.cols(); ++k)
                if (m(i, k) != 0)
                    out.components[static_cast<size_t>(i)] =
                        out.components[static_cast<size_t>(i)] + components[static_cast<size_t>(k)] * m(i, k);
        return out;
    }

    bool operator==(const PolySection& o) const {
        return base_dim == o.base_dim && fiber_rank == o.fiber_rank && components == o.components;
    }
};

// Convenience: builds a univariate polynomial from roots with multiplicities,
// e.g. poly_from_roots(1, {{-1,1},{1,2},{3,2}}) = (t+1)(t-1)^2(t-3)^2.
inline Poly poly_from_roots(int nvars, const std::vector<std::pair<Rat, unsigned>>& roots, int var = 0) {
    Poly p = Poly::constant(nvars, Rat(1));
    for (const auto& [r, mult] : roots) {
        Poly lin = Poly::var(nvars, var) - Poly::constant(nvars, r);
        for (unsigned k = 0; k < mult; ++k) p = p * lin;
    }
    return p;
}

}  // namespace kur

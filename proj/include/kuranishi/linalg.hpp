#pragma once

// Exact dense linear algebra over Q: the sizes here are chart dimensions
// (<= 6 in practice), so plain Gauss-Jordan with exact pivoting is fine.

#include "kuranishi/rational.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace kur {

class Mat {
public:
    Mat() : rows_(0), cols_(0) {}
    Mat(int rows, int cols) : rows_(rows), cols_(cols), a_(static_cast<size_t>(rows) * cols, Rat(0)) {}

    static Mat identity(int n) {
        Mat m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1;
        return m;
    }
    static Mat from_rows(const std::vector<RatVec>& rows) {
        if (rows.empty()) return Mat();
        Mat m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
        for (int i = 0; i < m.rows_; ++i)
            for (int j = 0; j < m.cols_; ++j) m(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
        return m;
    }
    static Mat from_cols(const std::vector<RatVec>& cols) {
        if (cols.empty()) return Mat();
        Mat m(static_cast<int>(cols[0].size()), static_cast<int>(cols.size()));
        for (int j = 0; j < m.cols_; ++j)
            for (int i = 0; i < m.rows_; ++i) m(i, j) = cols[static_cast<size_t>(j)][static_cast<size_t>(i)];
        return m;
    }

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    Rat& operator()(int i, int j) { return a_[static_cast<size_t>(i) * cols_ + j]; }
    const Rat& operator()(int i, int j) const { return a_[static_cast<size_t>(i) * cols_ + j]; }

    RatVec col(int j) const {
        RatVec c(static_cast<size_t>(rows_));
        for (int i = 0; i < rows_; ++i) c[static_cast<size_t>(i)] = (*this)(i, j);
        return c;
    }
    RatVec row(int i) const {
        RatVec r(static_cast<size_t>(cols_));
        for (int j = 0; j < cols_; ++j) r[static_cast<size_t>(j)] = (*this)(i, j);
        return r;
    }

    bool operator==(const Mat& o) const { return rows_ == o.rows_ && cols_ == o.cols_ && a_ == o.a_; }
    bool operator!=(const Mat& o) const { return !(*this == o); }

    Mat transposed() const {
        Mat t(cols_, rows_);
        for (int i = 0; i < rows_; ++i)
            for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

private:
    int rows_, cols_;
    std::vector<Rat> a_;
};

inline Mat operator*(const Mat& a, const Mat& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("Mat multiply: shape mismatch");
    Mat c(a.rows(), b.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int k = 0; k < a.cols(); ++k) {
            if (a(i, k) == 0) continue;
            for (int j = 0; j < b.cols(); ++j) c(i, j) += a(i, k) * b(k, j);
        }
    return c;
}

inline RatVec operator*(const Mat& a, const RatVec& x) {
    if (a.cols() != static_cast<int>(x.size())) throw std::invalid_argument("Mat*vec: shape mismatch");
    RatVec y(static_cast<size_t>(a.rows()), Rat(0));
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j)
            if (a(i, j) != 0) y[static_cast<size_t>(i)] += a(i, j) * x[static_cast<size_t>(j)];
    return y;
}

inline Mat operator-(const Mat& a, const Mat& b) {
    Mat c(a.rows(), a.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) c(i, j) = a(i, j) - b(i, j);
    return c;
}

// Reduced row echelon form in place; returns pivot column indices.
inline std::vector<int> rref(Mat& m) {
    std::vector<int> pivots;
    int r = 0;
    for (int c = 0; c < m.cols() && r < m.rows(); ++c) {
        int p = -1;
        for (int i = r; i < m.rows(); ++i)
            if (m(i, c) != 0) { p = i; break; }
        if (p < 0) continue;
        if (p != r)
            for (int j = 0; j < m.cols(); ++j) std::swap(m(p, j), m(r, j));
        Rat inv = Rat(1) / m(r, c);
        for (int j = 0; j < m.cols(); ++j) m(r, j) *= inv;
        for (int i = 0; i < m.rows(); ++i) {
            if (i == r || m(i, c) == 0) continue;
            Rat f = m(i, c);
            for (int j = 0; j < m.cols(); ++j) m(i, j) -= f * m(r, j);
        }
        pivots.push_back(c);
        ++r;
    }
    return pivots;
}

inline int rank(Mat m) { return static_cast<int>(rref(m).size()); }

inline Rat det(Mat m) {
    if (m.rows() != m.cols()) throw std::invalid_argument("det: not square");
    Rat d(1);
    for (int c = 0; c < m.cols(); ++c) {
        int p = -1;
        for (int i = c; i < m.rows(); ++i)
            if (m(i, c) != 0) { p = i; break; }
        if (p < 0) return Rat(0);
        if (p != c) {
            for (int j = 0; j < m.cols(); ++j) std::swap(m(p, j), m(c, j));
            d = -d;
        }
        d *= m(c, c);
        Rat inv = Rat(1) / m(c, c);
        for (int i = c + 1; i < m.rows(); ++i) {
            if (m(i, c) == 0) continue;
            Rat f = m(i, c) * inv;
            for (int j = c; j < m.cols(); ++j) m(i, j) -= f * m(c, j);
        }
    }
    return d;
}

inline Mat inverse(const Mat& m) {
    if (m.rows() != m.cols()) throw std::invalid_argument("inverse: not square");
    if (m.rows() == 0) return m;
    int n = m.rows();
    Mat aug(n, 2 * n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) aug(i, j) = m(i, j);
        aug(i, n + i) = 1;
    }
    auto piv = rref(aug);
    if (static_cast<int>(piv.size()) != n || piv.back() != n - 1)
        throw std::invalid_argument("inverse: singular matrix");
    Mat inv(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) inv(i, j) = aug(i, n + j);
    return inv;
}

// Basis (columns) of ker(m); exact, from the RREF free columns.
inline Mat kernel_basis(const Mat& m) {
    Mat r = m;
    auto piv = rref(r);
    std::vector<bool> is_piv(static_cast<size_t>(m.cols()), false);
    for (int c : piv) is_piv[static_cast<size_t>(c)] = true;
    std::vector<RatVec> cols;
    for (int c = 0; c < m.cols(); ++c) {
        if (is_piv[static_cast<size_t>(c)]) continue;
        RatVec v(static_cast<size_t>(m.cols()), Rat(0));
        v[static_cast<size_t>(c)] = 1;
        for (size_t pi = 0; pi < piv.size(); ++pi) v[static_cast<size_t>(piv[pi])] = -r(static_cast<int>(pi), c);
        cols.push_back(v);
    }
    return cols.empty() ? Mat(m.cols(), 0) : Mat::from_cols(cols);
}

// Rational basis of the orthogonal complement of col(m) = ker(m^T).
inline Mat orth_complement(const Mat& m) { return kernel_basis(m.transposed()); }

// Unnormalized Gram-Schmidt over Q (keeps entries rational).
inline Mat gram_schmidt(const Mat& cols) {
    std::vector<RatVec> out;
    for (int j = 0; j < cols.cols(); ++j) {
        RatVec v = cols.col(j);
        for (const RatVec& u : out) {
            Rat num(0), den(0);
            for (size_t i = 0; i < v.size(); ++i) {
                num += v[i] * u[i];
                den += u[i] * u[i];
            }
            if (den == 0) continue;
            Rat f = num / den;
            for (size_t i = 0; i < v.size(); ++i) v[i] -= f * u[i];
        }
        bool zero = true;
        for (const Rat& x : v)
            if (x != 0) { zero = false; break; }
        if (!zero) out.push_back(v);
    }
    return out.empty() ? Mat(cols.rows(), 0) : Mat::from_cols(out);
}

// Orthogonal projection onto col(b): P = B (B^T B)^{-1} B^T, exact.
inline Mat orth_projector(const Mat& b) {
    if (b.cols() == 0) return Mat(b.rows(), b.rows());
    Mat bt = b.transposed();
    return b * inverse(bt * b) * bt;
}

// Column-span equality of two matrices, exact.
inline bool same_span(const Mat& a, const Mat& b) {
    if (a.rows() != b.rows()) return false;
    int ra = rank(a), rb = rank(b);
    if (ra != rb) return false;
    Mat joined(a.rows(), a.cols() + b.cols());
    for (int i = 0; i < a.rows(); ++i) {
        for (int j = 0; j < a.cols(); ++j) joined(i, j) = a(i, j);
        for (int j = 0; j < b.cols(); ++j) joined(i, a.cols() + j) = b(i, j);
    }
    return rank(joined) == ra;
}

// An affine map x |-> A x + b. "Monomial" means every column of A has at
// most one nonzero entry; such maps send axis boxes to axis boxes and have
// exactly computable box-union preimages (box.hpp relies on this).
struct Affine {
    Mat A;
    RatVec b;

    RatVec apply(const RatVec& x) const { return A * x + b; }

    int dom_dim() const { return A.cols(); }
    int codom_dim() const { return A.rows(); }

    static Affine identity(int n) { return Affine{Mat::identity(n), RatVec(static_cast<size_t>(n), Rat(0))}; }

    // this ∘ g
    Affine compose(const Affine& g) const { return Affine{A * g.A, A * g.b + b}; }

    bool operator==(const Affine& o) const { return A == o.A && b == o.b; }

    bool is_monomial() const {
        for (int j = 0; j < A.cols(); ++j) {
            int nz = 0;
            for (int i = 0; i < A.rows(); ++i)
                if (A(i, j) != 0) ++nz;
            if (nz > 1) return false;
        }
        return true;
    }

    // For monomial injective maps: row index and scale of column j.
    // row_of[j] = target coordinate hit by source coordinate j.
    std::vector<std::pair<int, Rat>> monomial_cols() const {
        std::vector<std::pair<int, Rat>> out;
        for (int j = 0; j < A.cols(); ++j) {
            int row = -1;
            Rat scale(0);
            for (int i = 0; i < A.rows(); ++i)
                if (A(i, j) != 0) {
                    if (row >= 0) throw std::runtime_error("NonAxisAlignedDomain: base map is not monomial");
                    row = i;
                    scale = A(i, j);
                }
            if (row < 0) throw std::runtime_error("Affine: zero column, map not injective");
            out.emplace_back(row, scale);
        }
        return out;
    }

    Affine inverse_affine() const {
        Mat ai = kur::inverse(A);
        RatVec nb = ai * b;
        for (Rat& x : nb) x = -x;
        return Affine{ai, nb};
    }

    // exact preimage of a single point under a monomial injective map, if any
    std::optional<RatVec> preimage_point(const RatVec& y) const {
        auto cols = monomial_cols();
        std::vector<bool> hit(static_cast<size_t>(codom_dim()), false);
        RatVec x(static_cast<size_t>(dom_dim()));
        for (size_t j = 0; j < cols.size(); ++j) {
            auto [row, scale] = cols[j];
            x[j] = (y[static_cast<size_t>(row)] - b[static_cast<size_t>(row)]) / scale;
            hit[static_cast<size_t>(row)] = true;
        }
        for (int i = 0; i < codom_dim(); ++i)
            if (!hit[static_cast<size_t>(i)] && y[static_cast<size_t>(i)] != b[static_cast<size_t>(i)]) return std::nullopt;
        return x;
    }
};

}  // namespace kur

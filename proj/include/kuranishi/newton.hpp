#pragma once

// Double-precision Newton zero finding with residual certificates, plus the
// SVD-based rank certificates. Exact data in, certified doubles out; every
// verdict that feeds a CERTIFIED-FAIL elsewhere is re-checked exactly there.

#include "kuranishi/box.hpp"
#include "kuranishi/poly.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <vector>

namespace kur {

inline constexpr double kTolZero = 1e-10;  // residual bound certifying a zero
inline constexpr double kTolRank = 1e-8;   // |det| / sigma_min threshold

// Transversality gate for counting: at residual kTolZero a degenerate zero
// still shows sigma_min ~ sqrt(kTolZero) = 1e-5, so the counting side must
// demand clearance well above that noise floor. Perturbations are drawn at
// scales whose zeros clear this by orders of magnitude.
inline constexpr double kTolTransverse = 1e-4;

struct NewtonConfig {
    int max_iters = 60;
    double tol = kTolZero;
    double min_sep = 1e-6;  // dedupe radius for distinct zeros
};

// One Newton run for a square polynomial system from a seed; nullopt if it
// diverges or fails the residual certificate.
inline std::optional<std::vector<double>> newton_solve(const PolySection& s,
                                                       const std::vector<std::vector<Poly>>& jac,
                                                       std::vector<double> x,
                                                       const NewtonConfig& cfg = {}) {
    const int n = s.base_dim;
    if (s.fiber_rank != n) return std::nullopt;
    Eigen::MatrixXd J(n, n);
    Eigen::VectorXd f(n);
    for (int it = 0; it < cfg.max_iters; ++it) {
        auto fx = s.eval_d(x);
        double res = 0;
        for (int i = 0; i < n; ++i) {
            f(i) = fx[static_cast<size_t>(i)];
            res = std::max(res, std::abs(f(i)));
        }
        if (res < cfg.tol) return x;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) J(i, j) = jac[static_cast<size_t>(i)][static_cast<size_t>(j)].eval_d(x);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
        if (!lu.isInvertible()) {
            // nudge off the degenerate locus; deterministic
            for (int i = 0; i < n; ++i) x[static_cast<size_t>(i)] += 1e-7 * (i + 1);
            continue;
        }
        Eigen::VectorXd dx = lu.solve(f);
        double step = dx.norm();
        if (!std::isfinite(step) || step > 1e6) return std::nullopt;
        for (int i = 0; i < n; ++i) x[static_cast<size_t>(i)] -= dx(i);
    }
    auto fx = s.eval_d(x);
    for (double v : fx)
        if (std::abs(v) >= cfg.tol) return std::nullopt;
    return x;
}

struct CertifiedZero {
    std::vector<double> point;
    double residual = 0;
    double det = 0;        // det of Jacobian (square case)
    double sigma_min = 0;  // smallest singular value of Jacobian
};

inline double smallest_singular_value(const Eigen::MatrixXd& m) {
    if (m.rows() == 0 || m.cols() == 0) return 0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    return svd.singularValues().tail(1)(0);
}

// All certified zeros of a square polynomial system inside `domain`, seeded
// from the rational lattice of the given step, deduplicated by min_sep.
inline std::vector<CertifiedZero> find_zeros(const PolySection& s, const BoxUnion& domain, const Rat& step,
                                             const NewtonConfig& cfg = {}) {
    std::vector<CertifiedZero> out;
    if (s.base_dim != s.fiber_rank) throw std::runtime_error("find_zeros: system not square");
    auto jac = s.jacobian_polys();
    auto seeds = grid_points(domain, capped_step(domain, step));
    const int n = s.base_dim;
    for (const RatVec& seed : seeds) {
        auto sol = newton_solve(s, jac, to_doubles(seed), cfg);
        if (!sol) continue;
        // keep only zeros that stay (weakly) inside the domain closure
        RatVec approx(static_cast<size_t>(n));
        bool inside = true;
        for (int i = 0; i < n; ++i) approx[static_cast<size_t>(i)] = snap((*sol)[static_cast<size_t>(i)], 1LL << 40);
        if (!domain.closure_contains(approx)) inside = false;
        if (!inside) continue;
        bool dup = false;
        for (const CertifiedZero& z : out) {
            double d = 0;
            for (int i = 0; i < n; ++i) d = std::max(d, std::abs(z.point[static_cast<size_t>(i)] - (*sol)[static_cast<size_t>(i)]));
            if (d < cfg.min_sep) { dup = true; break; }
        }
        if (dup) continue;
        CertifiedZero z;
        z.point = *sol;
        auto fx = s.eval_d(z.point);
        for (double v : fx) z.residual = std::max(z.residual, std::abs(v));
        Eigen::MatrixXd J(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) J(i, j) = jac[static_cast<size_t>(i)][static_cast<size_t>(j)].eval_d(z.point);
        z.det = J.determinant();
        z.sigma_min = smallest_singular_value(J);
        out.push_back(std::move(z));
    }
    return out;
}

inline Eigen::MatrixXd to_eigen(const Mat& m) {
    Eigen::MatrixXd e(m.rows(), m.cols());
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) e(i, j) = to_double(m(i, j));
    return e;
}

}  // namespace kur

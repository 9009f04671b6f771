#pragma once

// Exact rational scalar type and small helpers shared by every module.
//
// All geometric predicates in this library (box membership, affine images,
// polynomial evaluation, group actions) are computed over Q so that
// PASS/FAIL verdicts on rational data are exact, never tolerance-based.
// Floating point appears only behind Newton/SVD certificates (newton.hpp).

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace kur {

using Rat = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

using RatVec = std::vector<Rat>;

inline Rat rat(long long num, long long den = 1) {
    if (den == 0) throw std::invalid_argument("rat: zero denominator");
    return Rat(num, den);
}

inline double to_double(const Rat& r) { return r.convert_to<double>(); }

inline Rat rat_abs(const Rat& r) { return r < 0 ? Rat(-r) : r; }

// Parses "p", "-p/q", "inf", "-inf" (the last two used by box bounds only).
inline Rat parse_rat(const std::string& s) {
    auto slash = s.find('/');
    try {
        if (slash == std::string::npos) return Rat(BigInt(s));
        BigInt num(s.substr(0, slash));
        BigInt den(s.substr(slash + 1));
        if (den == 0) throw std::invalid_argument("zero denominator");
        return Rat(num, den);
    } catch (const std::exception&) {
        throw std::invalid_argument("parse_rat: bad rational literal '" + s + "'");
    }
}

inline std::string rat_str(const Rat& r) {
    std::string s = numerator(r).convert_to<std::string>();
    if (denominator(r) != 1) s += "/" + denominator(r).convert_to<std::string>();
    return s;
}

inline std::string vec_str(const RatVec& v) {
    std::string s = "(";
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        s += rat_str(v[i]);
    }
    return s + ")";
}

inline Rat rat_pow(const Rat& base, unsigned e) {
    Rat acc(1), b = base;
    while (e) {
        if (e & 1u) acc *= b;
        b *= b;
        e >>= 1u;
    }
    return acc;
}

inline RatVec operator+(const RatVec& a, const RatVec& b) {
    RatVec r(a.size());
    for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
    return r;
}

inline RatVec operator-(const RatVec& a, const RatVec& b) {
    RatVec r(a.size());
    for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

// sup-norm distance, the metric used by all probe radii
inline Rat linf_dist(const RatVec& a, const RatVec& b) {
    Rat m(0);
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, rat_abs(a[i] - b[i]));
    return m;
}

inline std::vector<double> to_doubles(const RatVec& v) {
    std::vector<double> d(v.size());
    for (size_t i = 0; i < v.size(); ++i) d[i] = to_double(v[i]);
    return d;
}

// Nearest rational with the given denominator; used when a certified double
// zero needs a rational representative for exact re-checks.
inline Rat snap(double x, long long den) {
    return Rat(BigInt(std::llround(x * static_cast<double>(den))), BigInt(den));
}

}  // namespace kur

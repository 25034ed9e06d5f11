#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "errors.hpp"

namespace rksat {

inline double c_of_beta(double beta) { return -std::expm1(-beta); }

struct QSolution {
    double q = 0.5;
    double residual = 0;
    int iterations = 0;
};

// Root of 1 - c q^k = 2(1 - q) on [1/2, 1], i.e. of g(q) = 2q - 1 - c q^k.
// g(1/2) <= 0 and g is convex, so bisection keeps the root nearest 1/2.
inline QSolution solve_q(int k, double c, double tol = 1e-13) {
    require(k >= 2, "solve_q: k must be >= 2");
    require(c >= 0 && c <= 1 && std::isfinite(c), "solve_q: c_beta must lie in [0,1]");
    auto g = [&](double q) { return 2 * q - 1 - c * std::pow(q, k); };
    double lo = 0.5, hi = 1.0;
    QSolution s;
    if (c == 0) return {0.5, 0.0, 0};
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        double gm = g(mid);
        s.iterations = it + 1;
        if (gm > 0) hi = mid; else lo = mid;
        if (hi - lo <= 1e-17) break;
    }
    double glo = std::abs(g(lo)), ghi = std::abs(g(hi));
    s.q = glo <= ghi ? lo : hi;
    s.residual = std::min(glo, ghi);
    if (!(s.residual <= tol))
        throw ConvergenceError("solve_q: residual " + std::to_string(s.residual) + " above tolerance");
    return s;
}

struct ModelParams {
    int k = 3;
    int d = 6;
    double beta = 1;
    double c = 0;  // c_beta = 1 - exp(-beta)
    double q = 0.5;

    static ModelParams make(int k, int d, double beta, double tol = 1e-13) {
        require(k >= 2, "ModelParams: k must be >= 2");
        require(d >= 2 && d % 2 == 0, "ModelParams: d must be an even integer >= 2");
        require(beta > 0 && std::isfinite(beta), "ModelParams: beta must be positive and finite");
        ModelParams p;
        p.k = k;
        p.d = d;
        p.beta = beta;
        p.c = c_of_beta(beta);
        p.q = solve_q(k, p.c, tol).q;
        return p;
    }
};

inline std::int64_t clause_count(std::int64_t n, int k, int d) {
    require(n > 0, "clause_count: n must be positive");
    require((static_cast<std::int64_t>(d) * n) % k == 0, "clause_count: k must divide d*n");
    return static_cast<std::int64_t>(d) * n / k;
}

// Replica-symmetric free energy at the liquid fixed point.
inline double closed_form_F(const ModelParams& p) {
    double q = p.q, k = p.k, d = p.d;
    const double e = 2 * q - 1;
    return std::log(2.0) + (d / k) * std::log1p(-p.c * std::pow(q, k)) - (d / 2) * std::log1p(-e * e);
}

inline double d_sat_approx(int k) {
    return k * (std::ldexp(1.0, k) * std::log(2.0) - k * std::log(2.0) / 2);
}

inline double beta_lower_raw(int k) { return k * std::log(2.0) - 10 * std::log(static_cast<double>(k)); }

inline double beta_lower(int k) { return std::max(0.0, beta_lower_raw(k)); }

}  // namespace rksat

#pragma once

#include <array>
#include <cmath>
#include <ostream>
#include <vector>

#include "errors.hpp"
#include "model.hpp"
#include "numeric.hpp"

namespace rksat::moments {

inline double z1k(double c, int k, double h) { return 1 - c * std::pow(1 - h, k); }

// Divergence of (1/2, 1/2) from (h, 1-h) as it enters the first-moment rate.
// Written with log1p of the relative gaps so nearby arguments do not cancel.
inline double D1(double a, double h) {
    double s = 0;
    if (a > 0) s += a * std::log1p((a - h) / h);
    if (a < 1) s += (1 - a) * std::log1p((h - a) / (1 - h));
    return s;
}

inline double rate_f1(const ModelParams& p) {
    double h = 1 - p.q;
    return std::log(2.0) + (double(p.d) / p.k) * std::log1p(-p.c * std::pow(1 - h, p.k)) + p.d * D1(0.5, h);
}

inline double z2k(double c, int k, double h, double hh) {
    return 1 - 2 * c * std::pow(1 - h, k) + c * c * std::pow(1 - 2 * h + hh, k);
}

inline double D2(double alpha, double h, double hh) {
    double a = alpha, b = (1 - alpha) / 2;
    double t = 0;
    if (a > 0) t += a * std::log(a / (2 * (h - hh)));
    if (b > 0) t += b * std::log((1 - alpha) / (2 * hh)) + b * std::log((1 - alpha) / (2 * (1 - 2 * h + hh)));
    return t;
}

struct HPair {
    double h = 0.5, hh = 0.25;
    double residual = 0;
    int iterations = 0;
};

// Map g(h, hh) whose fixed target is (1/2, (1 - alpha)/2).
inline std::array<double, 2> g_map(double c, int k, double h, double hh) {
    double z = z2k(c, k, h, hh);
    double A = 1 - c * std::pow(1 - h, k - 1);
    return {(hh + (h - hh) * A) / z, hh / z};
}

inline bool in_domain(double h, double hh) { return hh > 0 && hh < h && 1 - 2 * h + hh > 0 && h < 1; }

inline HPair solve_h_pair(const ModelParams& p, double alpha, double tol = 1e-13, int max_iter = 200) {
    require(alpha > 0 && alpha < 1, "solve_h_pair: alpha must lie in (0,1)");
    const double c = p.c;
    const int k = p.k;
    const double t1 = 0.5, t2 = (1 - alpha) / 2;
    auto resid = [&](double h, double hh) {
        auto g = g_map(c, k, h, hh);
        return std::array<double, 2>{g[0] - t1, g[1] - t2};
    };
    auto norm = [](const std::array<double, 2>& r) { return std::hypot(r[0], r[1]); };

    HPair s{t1, t2, 0, 0};
    auto r = resid(s.h, s.hh);
    for (int it = 0; it < max_iter; ++it) {
        s.iterations = it;
        if (norm(r) <= tol) break;
        double h = s.h, hh = s.hh;
        double z = z2k(c, k, h, hh);
        double u = 1 - h, w = 1 - 2 * h + hh;
        double dz_h = 2 * c * k * std::pow(u, k - 1) - 2 * c * c * k * std::pow(w, k - 1);
        double dz_hh = c * c * k * std::pow(w, k - 1);
        double A = 1 - c * std::pow(u, k - 1);
        double dA_h = c * (k - 1) * std::pow(u, k - 2);
        double N1 = hh + (h - hh) * A;
        double dN_h = A + (h - hh) * dA_h, dN_hh = 1 - A;
        double j11 = (dN_h * z - N1 * dz_h) / (z * z), j12 = (dN_hh * z - N1 * dz_hh) / (z * z);
        double j21 = -hh * dz_h / (z * z), j22 = (z - hh * dz_hh) / (z * z);
        double det = j11 * j22 - j12 * j21;
        if (!(std::abs(det) > 0)) throw ConvergenceError("solve_h_pair: singular Jacobian");
        double dh = -(j22 * r[0] - j12 * r[1]) / det;
        double dhh = -(-j21 * r[0] + j11 * r[1]) / det;
        double step = 1;
        bool moved = false;
        for (int b = 0; b < 60; ++b, step *= 0.5) {
            double nh = h + step * dh, nhh = hh + step * dhh;
            if (!in_domain(nh, nhh)) continue;
            auto nr = resid(nh, nhh);
            if (norm(nr) < norm(r) || norm(nr) <= tol) {
                s.h = nh;
                s.hh = nhh;
                r = nr;
                moved = true;
                break;
            }
        }
        if (!moved) break;
    }
    s.residual = norm(r);
    if (!(s.residual <= tol * 10))
        throw ConvergenceError("solve_h_pair: residual " + std::to_string(s.residual) + " at alpha " + std::to_string(alpha));
    return s;
}

struct RatePoint {
    double alpha = 0.5;
    double f2 = 0, f2_bar = 0;
    double h = 0, hh = 0;
    double residual = 0;
};

inline double rate_f2_at(const ModelParams& p, double alpha, double h, double hh) {
    return std::log(2.0) + entropy2(alpha) + (double(p.d) / p.k) * std::log(z2k(p.c, p.k, h, hh)) + p.d * D2(alpha, h, hh);
}

inline double rate_f2_bar(const ModelParams& p, double alpha) {
    double c = p.c;
    double z = 1 - 2 * c * std::ldexp(1.0, -p.k) + c * c * std::pow((1 - alpha) / 2, p.k);
    return std::log(2.0) + entropy2(alpha) + (double(p.d) / p.k) * std::log(z);
}

inline RatePoint rate_f2(const ModelParams& p, double alpha, double tol = 1e-13) {
    HPair s = solve_h_pair(p, alpha, tol);
    RatePoint r;
    r.alpha = alpha;
    r.h = s.h;
    r.hh = s.hh;
    r.residual = s.residual;
    r.f2 = rate_f2_at(p, alpha, s.h, s.hh);
    r.f2_bar = rate_f2_bar(p, alpha);
    return r;
}

// sum_j r_j ln(p_j / r_j); the log-probability rate of empirical law r under p.
inline double multinomial_rate(const std::vector<double>& prob, const std::vector<double>& emp) {
    require(prob.size() == emp.size(), "multinomial_rate: size mismatch");
    double t = 0;
    for (std::size_t j = 0; j < prob.size(); ++j) {
        if (emp[j] == 0) continue;
        require(prob[j] > 0, "multinomial_rate: empirical mass on a null cell");
        t += emp[j] * std::log(prob[j] / emp[j]);
    }
    return t;
}

struct ScanReport {
    std::vector<RatePoint> points;
    double f1 = 0;
    double f2_half = 0;
    double first_difference = 0;   // central difference of f2 at 1/2
    double second_difference = 0;  // central second difference of f2 at 1/2
    double argmax_alpha = 0.5;
    double max_f2_minus_bar = -INFINITY;
    bool f2_below_bar = true;
    bool max_at_half = true;
};

// Evaluate f2 on an interior grid of `points` alphas plus the probes around 1/2.
inline ScanReport scan_second_moment(const ModelParams& p, int points = 1000, double probe = 1e-4) {
    require(points >= 3, "scan_second_moment: need at least 3 points");
    ScanReport rep;
    rep.f1 = rate_f1(p);
    double best = -INFINITY;
    for (int i = 1; i <= points; ++i) {
        double a = double(i) / (points + 1);
        RatePoint r = rate_f2(p, a);
        rep.points.push_back(r);
        double gap = r.f2 - r.f2_bar;
        rep.max_f2_minus_bar = std::max(rep.max_f2_minus_bar, gap);
        if (gap > 1e-12) rep.f2_below_bar = false;
        if (r.f2 > best) {
            best = r.f2;
            rep.argmax_alpha = a;
        }
    }
    rep.f2_half = rate_f2(p, 0.5).f2;
    double fp = rate_f2(p, 0.5 + probe).f2, fm = rate_f2(p, 0.5 - probe).f2;
    rep.first_difference = (fp - fm) / (2 * probe);
    rep.second_difference = (fp - 2 * rep.f2_half + fm) / (probe * probe);
    rep.max_at_half = best <= rep.f2_half + 1e-12;
    return rep;
}

inline void write_csv(std::ostream& os, const ScanReport& rep) {
    os << "alpha,f2,f2_bar,h,hh\n";
    os.precision(17);
    for (const auto& r : rep.points) os << r.alpha << ',' << r.f2 << ',' << r.f2_bar << ',' << r.h << ',' << r.hh << '\n';
}

}  // namespace rksat::moments

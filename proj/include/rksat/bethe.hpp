#pragma once

#include <cmath>
#include <cstdint>
#include <algorithm>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "model.hpp"
#include "numeric.hpp"
#include "population.hpp"
#include "rng.hpp"

namespace rksat::bethe {

using population::Quad;

struct Terms {
    Estimate z1, z2, z3;
};

inline Estimate combine(const Terms& t, const ModelParams& p) {
    const double dk = double(p.d) / p.k, d = p.d;
    Estimate e;
    e.value = t.z1.value + dk * t.z2.value - d * t.z3.value;
    e.stderr_ = std::sqrt(t.z1.stderr_ * t.z1.stderr_ + dk * dk * t.z2.stderr_ * t.z2.stderr_ + d * d * t.z3.stderr_ * t.z3.stderr_);
    return e;
}

// Message draws from the quad. Variable side: pi = q pi_minus + (1-q) pi_plus.
// Clause side: pihat = (1-q) pihat_minus + q pihat_plus.
struct Sampler {
    const Quad& quad;

    double nu(Rng& r) const {
        const auto& pop = r.uniform() < quad.params.q ? quad.p_minus : quad.p_plus;
        return pop.samples[r.index(pop.size())];
    }
    double nuhat(Rng& r) const {
        const auto& pop = r.uniform() < 1 - quad.params.q ? quad.phat_minus : quad.phat_plus;
        return pop.samples[r.index(pop.size())];
    }
    static double pick(const population::Population& pop, Rng& r) { return pop.samples[r.index(pop.size())]; }
};

// ln z1 for coordinates h[0..d): first half enters as h, second half as 1-h.
inline double log_z1(const std::vector<double>& h) {
    const std::size_t half = h.size() / 2;
    double a = 0, b = 0;
    for (std::size_t j = 0; j < h.size(); ++j) {
        double x = safe_log(h[j]), y = safe_log(1 - h[j]);
        if (j < half) { a += x; b += y; } else { a += y; b += x; }
    }
    return log_add(a, b);
}

inline double log_z2(double c, const std::vector<double>& nu) {
    double s = 0;
    for (double x : nu) s += safe_log(x);
    return std::log1p(-c * std::exp(s));
}

inline double log_z3(double nu, double nuhat) { return std::log(nu * nuhat + (1 - nu) * (1 - nuhat)); }

struct FEstimate {
    Estimate value;
    Terms terms;  // ln E[z1], ln E[z2], ln E[z3]
    // Spread from the finite populations themselves, via their means.
    double population_stderr = 0;
};

struct MeanStat {
    double mean = 0, se = 0;
};

inline MeanStat pop_stat(const population::Population& p) {
    RunningStats s;
    for (double x : p.samples) s.add(x);
    return {s.mean, std::sqrt(s.variance() / std::max<long long>(s.n, 1))};
}

// Exact ln E[z] for i.i.d. coordinates drawn from the quad as given.
inline Terms conditional_log_means(const Quad& q) {
    const ModelParams& p = q.params;
    auto a = pop_stat(q.p_minus), b = pop_stat(q.p_plus), ah = pop_stat(q.phat_minus), bh = pop_stat(q.phat_plus);
    const double m = p.q * a.mean + (1 - p.q) * b.mean, mh = (1 - p.q) * ah.mean + p.q * bh.mean;
    const double sm = std::hypot(p.q * a.se, (1 - p.q) * b.se), smh = std::hypot((1 - p.q) * ah.se, p.q * bh.se);
    Terms t;
    t.z1.value = std::log(2.0) + p.d / 2.0 * (std::log(mh) + std::log1p(-mh));
    t.z1.stderr_ = p.d / 2.0 * std::abs(1 / mh - 1 / (1 - mh)) * smh;
    const double cm = p.c * std::pow(m, p.k);
    t.z2.value = std::log1p(-cm);
    t.z2.stderr_ = p.k * cm / m / (1 - cm) * sm;
    const double z3 = m * mh + (1 - m) * (1 - mh);
    t.z3.value = std::log(z3);
    t.z3.stderr_ = std::hypot((2 * mh - 1) * sm, (2 * m - 1) * smh) / z3;
    return t;
}

inline FEstimate estimate_F_mc(const Quad& q, std::size_t samples, std::uint64_t seed) {
    require(samples >= 2, "estimate_F_mc: need at least two samples");
    const ModelParams& p = q.params;
    Sampler s{q};
    std::vector<double> l1(samples), l2(samples), l3(samples);
    std::vector<double> buf;
    for (std::size_t i = 0; i < samples; ++i) {
        Rng r1 = Rng::stream(seed, 11, i), r2 = Rng::stream(seed, 12, i), r3 = Rng::stream(seed, 13, i);
        buf.resize(p.d);
        for (auto& x : buf) x = s.nuhat(r1);
        l1[i] = log_z1(buf);
        buf.resize(p.k);
        for (auto& x : buf) x = s.nu(r2);
        l2[i] = log_z2(p.c, buf);
        l3[i] = log_z3(s.nu(r3), s.nuhat(r3));
    }
    FEstimate f;
    f.terms = {log_mean_exp(l1), log_mean_exp(l2), log_mean_exp(l3)};
    for (const Estimate* e : {&f.terms.z1, &f.terms.z2, &f.terms.z3})
        if (!std::isfinite(e->value)) throw ConvergenceError("estimate_F_mc: accumulator underflow, increase N");
    f.value = combine(f.terms, p);
    f.population_stderr = combine(conditional_log_means(q), p).stderr_;
    return f;
}

struct BEstimate {
    Estimate value;
    Terms terms;
};

// Size-biased estimator of E[z ln z]/E[z] for each of the three factors.
// The z2 average is stratified by the number r of pi_minus coordinates; with the
// all-minus stratum reweighted by (1 - c) this is the size-biased clause law.
// z2 and z3 draws are cheaper than z1 draws, so they get proportionally more.
inline BEstimate estimate_B(const Quad& q, std::size_t samples, std::uint64_t seed) {
    require(samples >= 2, "estimate_B: need at least two samples");
    const ModelParams& p = q.params;
    const int k = p.k;
    const std::size_t n2 = std::max<std::size_t>(2, samples * std::max(1, p.d / k) / (k + 1));
    const std::size_t n3 = samples * std::max(1, p.d / 2);
    RunningStats t1, t3m, t3p;
    std::vector<RunningStats> t2(k + 1);
    std::vector<double> buf(p.d);
    for (std::size_t i = 0; i < samples; ++i) {
        Rng r = Rng::stream(seed, 21, i);
        for (int j = 0; j < p.d; ++j) buf[j] = Sampler::pick(j < p.d / 2 ? q.phat_minus : q.phat_plus, r);
        t1.add(log_z1(buf));
    }
    buf.resize(k);
    for (int s = 0; s <= k; ++s)
        for (std::size_t i = 0; i < n2; ++i) {
            Rng r = Rng::stream(seed, 22, s, i);
            for (int j = 0; j < k; ++j) buf[j] = Sampler::pick(j < s ? q.p_minus : q.p_plus, r);
            t2[s].add(log_z2(p.c, buf));
        }
    for (std::size_t i = 0; i < n3; ++i) {
        Rng r = Rng::stream(seed, 23, i);
        t3m.add(log_z3(Sampler::pick(q.p_minus, r), Sampler::pick(q.phat_minus, r)));
        t3p.add(log_z3(Sampler::pick(q.p_plus, r), Sampler::pick(q.phat_plus, r)));
    }
    const double den = 1 - p.c * std::pow(p.q, k);
    double m2 = 0, v2 = 0;
    for (int s = 0; s <= k; ++s) {
        double w = binomial(k, s) * std::pow(p.q, s) * std::pow(1 - p.q, k - s) / den;
        if (s == k) w *= 1 - p.c;
        m2 += w * t2[s].mean;
        v2 += w * w * t2[s].variance() / t2[s].n;
    }
    BEstimate b;
    b.terms.z1 = {t1.mean, t1.stderr_()};
    b.terms.z2 = {m2, std::sqrt(v2)};
    b.terms.z3 = {0.5 * (t3m.mean + t3p.mean), 0.5 * std::sqrt(t3m.variance() / t3m.n + t3p.variance() / t3p.n)};
    b.value = combine(b.terms, p);
    return b;
}

struct NaiveBEstimate {
    BEstimate est;
    double ess_z1 = 0, ess_z2 = 0, ess_z3 = 0;
};

// Self-normalized ratio sum(z ln z)/sum(z) with a delta-method error bar.
inline Estimate tilted_ratio(const std::vector<double>& logs, double* ess) {
    double mx = *std::max_element(logs.begin(), logs.end());
    const double n = logs.size();
    double sw = 0, sww = 0, swl = 0;
    std::vector<double> w(logs.size());
    for (std::size_t i = 0; i < logs.size(); ++i) {
        w[i] = std::exp(logs[i] - mx);
        sw += w[i];
        sww += w[i] * w[i];
        swl += w[i] * logs[i];
    }
    double R = swl / sw, mw = sw / n, v = 0;
    for (std::size_t i = 0; i < logs.size(); ++i) {
        double u = w[i] * (logs[i] - R);
        v += u * u;
    }
    v /= (n - 1);
    *ess = sw * sw / sww;
    return {R, std::sqrt(v / n) / mw};
}

inline NaiveBEstimate estimate_B_naive(const Quad& q, std::size_t samples, std::uint64_t seed) {
    require(samples >= 2, "estimate_B_naive: need at least two samples");
    const ModelParams& p = q.params;
    Sampler s{q};
    std::vector<double> l1(samples), l2(samples), l3(samples), buf;
    for (std::size_t i = 0; i < samples; ++i) {
        Rng r1 = Rng::stream(seed, 31, i), r2 = Rng::stream(seed, 32, i), r3 = Rng::stream(seed, 33, i);
        buf.resize(p.d);
        for (auto& x : buf) x = s.nuhat(r1);
        l1[i] = log_z1(buf);
        buf.resize(p.k);
        for (auto& x : buf) x = s.nu(r2);
        l2[i] = log_z2(p.c, buf);
        l3[i] = log_z3(s.nu(r3), s.nuhat(r3));
    }
    NaiveBEstimate nb;
    nb.est.terms.z1 = tilted_ratio(l1, &nb.ess_z1);
    nb.est.terms.z2 = tilted_ratio(l2, &nb.ess_z2);
    nb.est.terms.z3 = tilted_ratio(l3, &nb.ess_z3);
    nb.est.value = combine(nb.est.terms, p);
    return nb;
}

struct BetheEstimate {
    ModelParams params;
    double F_closed = 0;
    FEstimate F_mc;
    BEstimate B_mc;
    std::size_t N = 0;
    int iterations = 0;
    bool converged = false;
    std::uint64_t seed = 0;
};

inline BetheEstimate estimate_bethe(const ModelParams& p, std::size_t N, int max_iters, std::uint64_t seed, std::size_t samples = 0,
                                    const population::StepOptions& opt = {}) {
    population::PopdynResult r = population::run_popdyn(p, N, max_iters, seed, opt);
    BetheEstimate e;
    e.params = p;
    e.F_closed = closed_form_F(p);
    const std::size_t M = samples ? samples : N;
    e.F_mc = estimate_F_mc(r.quad, M, mix_key(seed, 1));
    e.B_mc = estimate_B(r.quad, M, mix_key(seed, 2));
    e.N = N;
    e.iterations = r.iterations;
    e.converged = r.converged;
    e.seed = seed;
    return e;
}

// ---------------------------------------------------------------------------
// Threshold location.

struct ScanSpec {
    double beta_min = 0;
    double beta_max = 0;
    int points = 64;
    double tol = 0.1;        // target bracket width
    int max_refinements = 12;
    int max_iters = 400;     // population sweeps per evaluation
    int sample_factor = 50;  // B draws per population sample
    int max_n_factor = 64;   // largest refinement population, in units of N

    static ScanSpec defaults(int k) {
        ScanSpec s;
        s.beta_min = std::max(0.05, beta_lower(k));
        s.beta_max = 2 * k * std::log(2.0);
        return s;
    }
    std::vector<double> grid() const {
        require(points >= 2 && beta_max > beta_min && beta_min > 0, "ScanSpec: need points >= 2 and 0 < beta_min < beta_max");
        std::vector<double> g(points);
        for (int i = 0; i < points; ++i) g[i] = beta_min * std::pow(beta_max / beta_min, double(i) / (points - 1));
        return g;
    }
};

struct DeltaPoint {
    double beta = 0;
    double F_closed = 0;
    double B = 0;
    double stderr_ = 0;
    double delta = 0;  // F_closed - B
    std::size_t N = 0;
    int iterations = 0;
    bool converged = false;
    bool refinement = false;
};

struct ThresholdResult {
    int k = 0, d = 0;
    double beta_c = std::numeric_limits<double>::infinity();
    double beta_lo = 0, beta_hi = 0;
    bool finite() const { return std::isfinite(beta_c); }
    bool ambiguous = false;       // a refinement midpoint could not be classified
    bool crossing_at_start = false;
    bool nonconverged = false;    // some population run hit max_iters
    std::vector<double> sign_changes;  // grid betas where the classification turns negative
    std::vector<DeltaPoint> trace;
    std::string note;
};

constexpr double kDeltaAbsTol = 1e-10;

inline bool confidently_negative(const DeltaPoint& p) { return p.delta < -3 * p.stderr_ - kDeltaAbsTol; }
inline bool confidently_positive(const DeltaPoint& p) { return p.delta > 3 * p.stderr_ + kDeltaAbsTol; }

inline DeltaPoint evaluate_delta(int k, int d, double beta, std::size_t N, const ScanSpec& scan, std::uint64_t seed) {
    ModelParams p = ModelParams::make(k, d, beta);
    population::PopdynResult r = population::run_popdyn(p, N, scan.max_iters, seed);
    BEstimate b = estimate_B(r.quad, N * std::max(1, scan.sample_factor), mix_key(seed, 2));
    DeltaPoint pt;
    pt.beta = beta;
    pt.F_closed = closed_form_F(p);
    pt.B = b.value.value;
    pt.stderr_ = b.value.stderr_;
    pt.delta = pt.F_closed - pt.B;
    pt.N = N;
    pt.iterations = r.iterations;
    pt.converged = r.converged;
    return pt;
}

inline ThresholdResult find_beta_c(int k, int d, const ScanSpec& scan, std::size_t N, std::uint64_t seed) {
    require(scan.beta_min >= beta_lower(k), "find_beta_c: scan must start at or above beta_lower(k)");
    require(scan.tol > 0, "find_beta_c: tolerance must be positive");
    ThresholdResult res;
    res.k = k;
    res.d = d;
    const auto grid = scan.grid();
    int first = -1;
    bool prev_neg = false;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        DeltaPoint pt = evaluate_delta(k, d, grid[i], N, scan, mix_key(seed, i));
        res.nonconverged |= !pt.converged;
        bool neg = confidently_negative(pt);
        if (neg && !prev_neg) {
            res.sign_changes.push_back(grid[i]);
            if (first < 0) first = static_cast<int>(i);
        }
        prev_neg = neg;
        res.trace.push_back(pt);
    }
    if (first < 0) {
        res.note = "no 3-stderr sign change on the grid";
        return res;
    }
    if (first == 0) {
        res.crossing_at_start = true;
        res.beta_lo = res.beta_hi = res.beta_c = grid[0];
        res.note = "Delta already negative at the scan start";
        return res;
    }
    // Grid points just before the first confident negative may already be negative
    // within noise; start from the last one whose point estimate is nonnegative.
    int j = first - 1;
    while (j > 0 && res.trace[j].delta < 0) --j;
    double lo = grid[j], hi = grid[first];
    const std::size_t cap = N * std::max(1, scan.max_n_factor);
    std::size_t n = N;
    auto probe = [&](double beta, std::uint64_t tag) {
        DeltaPoint pt;
        for (std::size_t m = n, a = 0;; m *= 2, ++a) {
            pt = evaluate_delta(k, d, beta, m, scan, mix_key(seed, tag + a));
            pt.refinement = true;
            res.trace.push_back(pt);
            res.nonconverged |= !pt.converged;
            if (confidently_negative(pt) || confidently_positive(pt) || 2 * m > cap) break;
        }
        return pt;
    };
    double pivot = -1;  // midpoint already found ambiguous at the cap
    for (int r = 0; r < scan.max_refinements && hi - lo > scan.tol; ++r) {
        n = std::min(cap, 2 * n);
        double mid = 0.5 * (lo + hi);
        if (mid != pivot) {
            DeltaPoint pt = probe(mid, 100000 + 1000 * r);
            if (confidently_negative(pt)) { hi = mid; continue; }
            if (confidently_positive(pt)) { lo = mid; continue; }
            pivot = mid;
        }
        // Crossing sits near the midpoint: close in from both quarter points.
        double a = 0.5 * (lo + mid), b = 0.5 * (mid + hi);
        bool moved = false;
        if (confidently_positive(probe(a, 500000 + 1000 * r))) lo = a, moved = true;
        if (confidently_negative(probe(b, 700000 + 1000 * r))) hi = b, moved = true;
        // Still stuck: try the points tol/2 either side of the midpoint, which
        // would close the bracket to tol in one step.
        if (!moved && hi - lo > scan.tol) {
            double a2 = mid - 0.5 * scan.tol, b2 = mid + 0.5 * scan.tol;
            if (a2 > lo && confidently_positive(probe(a2, 800000 + 1000 * r))) lo = a2, moved = true;
            if (b2 < hi && confidently_negative(probe(b2, 900000 + 1000 * r))) hi = b2, moved = true;
        }
        if (!moved) {
            res.ambiguous = true;
            res.note = "midpoint sign ambiguous at 3 stderr; bracket left wider than requested";
            break;
        }
    }
    res.beta_lo = lo;
    res.beta_hi = hi;
    res.beta_c = 0.5 * (lo + hi);
    if (res.note.empty()) res.note = hi - lo <= scan.tol ? "bracket within tolerance" : "refinement budget exhausted";
    return res;
}

struct DcResult {
    int k = 0;
    std::optional<int> d_c;
    std::vector<ThresholdResult> table;
    bool monotone = true;  // beta_c nonincreasing along the grid
};

inline DcResult find_d_c(int k, const std::vector<int>& d_grid, const ScanSpec& scan, std::size_t N, std::uint64_t seed) {
    require(!d_grid.empty(), "find_d_c: empty d grid");
    for (std::size_t i = 0; i < d_grid.size(); ++i) {
        require(d_grid[i] > 0 && d_grid[i] % 2 == 0, "find_d_c: d values must be positive and even");
        if (i) require(d_grid[i] > d_grid[i - 1], "find_d_c: d grid must be ascending");
    }
    DcResult r;
    r.k = k;
    double prev = std::numeric_limits<double>::infinity();
    for (int d : d_grid) {
        ThresholdResult t = find_beta_c(k, d, scan, N, mix_key(seed, static_cast<std::uint64_t>(d)));
        if (t.finite() && !r.d_c) r.d_c = d;
        if (t.beta_c > prev + scan.tol) r.monotone = false;
        prev = std::min(prev, t.beta_c);
        r.table.push_back(std::move(t));
    }
    return r;
}

inline void write_trace_csv(std::ostream& os, const ThresholdResult& t) {
    os.precision(17);
    os << "beta,F_closed,B,stderr,delta,N,iterations,converged,refinement\n";
    for (const auto& p : t.trace)
        os << p.beta << ',' << p.F_closed << ',' << p.B << ',' << p.stderr_ << ',' << p.delta << ',' << p.N << ','
           << p.iterations << ',' << p.converged << ',' << p.refinement << '\n';
}

}  // namespace rksat::bethe

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "errors.hpp"
#include "model.hpp"
#include "numeric.hpp"
#include "rng.hpp"

namespace rksat::population {

// A sample is eta = probability that the parent literal is false
// (clause side: probability that the child literal is false).
enum class Label { pi_minus, pi_plus, pihat_minus, pihat_plus, pi_mixed };

inline const char* label_name(Label l) {
    switch (l) {
        case Label::pi_minus: return "pi_minus";
        case Label::pi_plus: return "pi_plus";
        case Label::pihat_minus: return "pihat_minus";
        case Label::pihat_plus: return "pihat_plus";
        default: return "pi_mixed";
    }
}

struct Population {
    std::vector<double> samples;
    Label label = Label::pi_mixed;

    std::size_t size() const { return samples.size(); }
    double mean() const {
        double s = 0;
        for (double x : samples) s += x;
        return s / samples.size();
    }
};

struct Quad {
    Population p_minus{{}, Label::pi_minus}, p_plus{{}, Label::pi_plus};
    Population phat_minus{{}, Label::pihat_minus}, phat_plus{{}, Label::pihat_plus};
    ModelParams params;
    int iteration = 0;
    long long clamp_events = 0;
};

struct StepOptions {
    bool resample = true;  // false: every draw for output i uses parent index i
    unsigned workers = 1;
};

// Run body(i) for i in [0, n) across workers; results must depend only on i.
template <class F>
void parallel_for(std::size_t n, unsigned workers, F&& body) {
    if (workers <= 1 || n < 2048) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::size_t chunk = (n + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        std::size_t lo = w * chunk, hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &body] {
            for (std::size_t i = lo; i < hi; ++i) body(i);
        });
    }
    for (auto& t : pool) t.join();
}

// Weights over r = number of parents drawn from pi_minus.
inline std::vector<double> phat_minus_weights(const ModelParams& p) {
    const int k = p.k;
    const double norm = 1 - p.c * std::pow(p.q, k - 1);
    std::vector<double> w(k);
    for (int r = 0; r <= k - 2; ++r) w[r] = binomial(k - 1, r) * std::pow(p.q, r) * std::pow(1 - p.q, k - 1 - r) / norm;
    w[k - 1] = std::exp(-p.beta) * std::pow(p.q, k - 1) / norm;
    return w;
}

inline std::vector<double> phat_plus_weights(const ModelParams& p) {
    const int k = p.k;
    std::vector<double> w(k);
    for (int r = 0; r <= k - 1; ++r) w[r] = binomial(k - 1, r) * std::pow(p.q, r) * std::pow(1 - p.q, k - 1 - r);
    return w;
}

inline double fhat_of_product(double c, double prod) { return (1 - c * prod) / (2 - c * prod); }

inline double phat_lower(const ModelParams& p) { return (1 - p.c) / (2 - p.c); }

// One sweep: clause laws from the current variable laws, then variable laws
// from the new clause laws.
inline Quad step_pair(const Quad& in, std::uint64_t seed, const StepOptions& opt = {}) {
    const ModelParams& p = in.params;
    require(in.p_minus.size() && in.p_plus.size() && in.phat_minus.size() && in.phat_plus.size(), "step_pair: empty population");
    const int k = p.k, d = p.d;
    auto wm = phat_minus_weights(p), wp = phat_plus_weights(p);
    double sm = 0, sp = 0;
    for (double x : wm) sm += x;
    for (double x : wp) sp += x;
    require(std::abs(sm - 1) <= 1e-9 && std::abs(sp - 1) <= 1e-9, "step_pair: branch weights do not sum to 1");
    const auto cm = cumulative(wm), cp = cumulative(wp);

    std::atomic<long long> clamps{0};
    auto log_of = [&](const Population& pop) {
        std::vector<double> out(pop.size());
        long long local = 0;
        for (std::size_t i = 0; i < pop.size(); ++i) {
            double x = pop.samples[i];
            double l = x > 0 ? std::log(x) : -INFINITY;
            if (l < kLogClamp) {
                l = kLogClamp;
                ++local;
            }
            out[i] = l;
        }
        clamps += local;
        return out;
    };
    const auto lm = log_of(in.p_minus), lp = log_of(in.p_plus);

    Quad out;
    out.params = p;
    out.iteration = in.iteration + 1;
    const std::uint64_t it = static_cast<std::uint64_t>(out.iteration);

    auto draw = [&](Rng& rng, std::size_t i, std::size_t n) { return opt.resample ? rng.index(n) : i % n; };

    auto clause_pop = [&](const std::vector<double>& cdf, std::size_t N, std::uint64_t tag, Label label) {
        Population pop{std::vector<double>(N), label};
        parallel_for(N, opt.workers, [&](std::size_t i) {
            Rng rng = Rng::stream(seed, it, i, tag);
            int r = rng.categorical(cdf);
            double s = 0;
            for (int j = 0; j < k - 1; ++j) s += j < r ? lm[draw(rng, i, lm.size())] : lp[draw(rng, i, lp.size())];
            pop.samples[i] = fhat_of_product(p.c, std::exp(s));
        });
        return pop;
    };
    out.phat_minus = clause_pop(cm, in.phat_minus.size(), 1, Label::pihat_minus);
    out.phat_plus = clause_pop(cp, in.phat_plus.size(), 2, Label::pihat_plus);

    const double lo = phat_lower(p);
    for (const Population* pop : {&out.phat_minus, &out.phat_plus})
        for (double x : pop->samples)
            if (!(x >= lo * (1 - 1e-12) && x <= 0.5 * (1 + 1e-12)))
                throw std::logic_error("step_pair: clause message " + std::to_string(x) + " outside its range");

    auto logits = [](const Population& pop) {
        std::vector<double> out(pop.size());
        for (std::size_t i = 0; i < pop.size(); ++i) out[i] = logit(pop.samples[i]);
        return out;
    };
    const auto gm = logits(out.phat_minus), gp = logits(out.phat_plus);

    // d/2 - 1 children share the variable's label, d/2 carry the opposite one.
    auto var_pop = [&](const std::vector<double>& same, const std::vector<double>& opp, std::size_t N, std::uint64_t tag, Label label) {
        Population pop{std::vector<double>(N), label};
        parallel_for(N, opt.workers, [&](std::size_t i) {
            Rng rng = Rng::stream(seed, it, i, tag);
            double L = 0;
            for (int j = 0; j < d / 2 - 1; ++j) L += same[draw(rng, i, same.size())];
            for (int j = 0; j < d / 2; ++j) L -= opp[draw(rng, i, opp.size())];
            pop.samples[i] = logistic(L);
        });
        return pop;
    };
    out.p_minus = var_pop(gm, gp, in.p_minus.size(), 3, Label::pi_minus);
    out.p_plus = var_pop(gp, gm, in.p_plus.size(), 4, Label::pi_plus);
    out.clamp_events = in.clamp_events + clamps.load();
    return out;
}

inline Quad polarized_quad(const ModelParams& p, std::size_t N) {
    Quad q;
    q.params = p;
    q.p_minus.samples.assign(N, 1.0);
    q.p_plus.samples.assign(N, 0.0);
    q.phat_minus.samples.assign(N, 0.5);
    q.phat_plus.samples.assign(N, 0.5);
    return q;
}

// Point masses at the liquid values: eta = q for variables, 1 - q for clauses.
inline Quad liquid_quad(const ModelParams& p, std::size_t N) {
    Quad q;
    q.params = p;
    q.p_minus.samples.assign(N, p.q);
    q.p_plus.samples.assign(N, p.q);
    q.phat_minus.samples.assign(N, 1 - p.q);
    q.phat_plus.samples.assign(N, 1 - p.q);
    return q;
}

inline std::size_t mix_minus_count(const Quad& q) {
    return static_cast<std::size_t>(std::llround(q.params.q * q.p_minus.size()));
}

inline Population mix(const Quad& q) {
    const std::size_t N = q.p_minus.size();
    const std::size_t nm = std::min(mix_minus_count(q), N);
    Population out{{}, Label::pi_mixed};
    out.samples.reserve(N);
    for (std::size_t i = 0; i < nm; ++i) out.samples.push_back(q.p_minus.samples[i]);
    for (std::size_t i = 0; i < N - nm; ++i) out.samples.push_back(q.p_plus.samples[i % q.p_plus.size()]);
    return out;
}

inline double mix_mean(const Quad& q) { return q.params.q * q.p_minus.mean() + (1 - q.params.q) * q.p_plus.mean(); }

inline double hat_mix_mean(const Quad& q) { return (1 - q.params.q) * q.phat_minus.mean() + q.params.q * q.phat_plus.mean(); }

// Exact W1 between two empirical measures via their quantile functions.
inline double w1_distance(const Population& a, const Population& b) {
    require(a.size() > 0 && b.size() > 0, "w1_distance: empty population");
    std::vector<double> x = a.samples, y = b.samples;
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    if (x.size() == y.size()) {
        double s = 0;
        for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(x[i] - y[i]);
        return s / x.size();
    }
    const double nx = x.size(), ny = y.size();
    std::size_t i = 0, j = 0;
    double u = 0, s = 0;
    while (i < x.size() && j < y.size()) {
        double ux = (i + 1) / nx, uy = (j + 1) / ny;
        double next = std::min(ux, uy);
        s += (next - u) * std::abs(x[i] - y[j]);
        u = next;
        if (ux <= next) ++i;
        if (uy <= next) ++j;
    }
    return s;
}

struct SkewReport {
    bool skewed = false;
    double middle_mass = 0;   // mass of (e^{-k beta/2}, 1 - e^{-k beta/2})
    double literal_mass = 0;  // mass of (0, 1 - e^{-k beta/2})
    double bound = 0;         // 2^{-0.9k}
};

inline SkewReport is_skewed(const Population& pop, const ModelParams& p) {
    const double eps = std::exp(-p.k * p.beta / 2);
    SkewReport r;
    r.bound = std::pow(2.0, -0.9 * p.k);
    std::size_t mid = 0, lit = 0;
    for (double x : pop.samples) {
        mid += x > eps && x < 1 - eps;
        lit += x > 0 && x < 1 - eps;
    }
    r.middle_mass = double(mid) / pop.size();
    r.literal_mass = double(lit) / pop.size();
    r.skewed = r.middle_mass < r.bound;
    return r;
}

struct PopdynResult {
    Quad quad;
    int iterations = 0;
    bool converged = false;
    double final_w1 = INFINITY;
    std::vector<double> w1_trace;
};

inline PopdynResult run_popdyn(const ModelParams& p, std::size_t N, int max_iters, std::uint64_t seed, const StepOptions& opt = {}) {
    require(N >= 1000, "run_popdyn: N must be at least 1000");
    require(max_iters >= 1, "run_popdyn: max_iters must be positive");
    PopdynResult res;
    res.quad = polarized_quad(p, N);
    const double thresh = 3 / std::sqrt(double(N));
    Population prev = mix(res.quad);
    int streak = 0;
    for (int it = 0; it < max_iters; ++it) {
        res.quad = step_pair(res.quad, seed, opt);
        Population cur = mix(res.quad);
        double w = w1_distance(prev, cur);
        res.w1_trace.push_back(w);
        res.final_w1 = w;
        res.iterations = it + 1;
        prev = std::move(cur);
        streak = w < thresh ? streak + 1 : 0;
        if (streak >= 10) {
            res.converged = true;
            break;
        }
    }
    return res;
}

// Unconditioned operators with size-biased reweighting, by importance
// resampling of N candidate tuples (systematic resampling).
inline Population resample_weighted(const std::vector<double>& values, const std::vector<double>& logw, std::size_t N, Rng& rng) {
    double mx = *std::max_element(logw.begin(), logw.end());
    std::vector<double> w(values.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(logw[i] - mx);
    auto cdf = cumulative(w);
    Population out{std::vector<double>(N), Label::pi_mixed};
    double u0 = rng.uniform();
    std::size_t j = 0;
    for (std::size_t i = 0; i < N; ++i) {
        double u = (i + u0) / N * cdf.back();
        while (j + 1 < cdf.size() && cdf[j] <= u) ++j;
        out.samples[i] = values[j];
    }
    return out;
}

inline Population apply_F_hat(const Population& pi, const ModelParams& p, std::size_t N, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> vals(N), lw(N);
    for (std::size_t i = 0; i < N; ++i) {
        double prod = 1;
        for (int j = 0; j < p.k - 1; ++j) prod *= pi.samples[rng.index(pi.size())];
        vals[i] = fhat_of_product(p.c, prod);
        lw[i] = std::log(2 - p.c * prod);
    }
    Population out = resample_weighted(vals, lw, N, rng);
    out.label = Label::pi_mixed;
    return out;
}

inline Population apply_F(const Population& pihat, const ModelParams& p, std::size_t N, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> vals(N), lw(N);
    for (std::size_t i = 0; i < N; ++i) {
        double a = 0, b = 0;
        for (int j = 0; j < p.d - 1; ++j) {
            double h = pihat.samples[rng.index(pihat.size())];
            if (j < p.d / 2 - 1) {
                a += safe_log(h);
                b += safe_log(1 - h);
            } else {
                a += safe_log(1 - h);
                b += safe_log(h);
            }
        }
        vals[i] = logistic(a - b);
        lw[i] = log_add(a, b);
    }
    return resample_weighted(vals, lw, N, rng);
}

inline void write_csv(std::ostream& os, const Population& pop) {
    os.precision(17);
    for (double x : pop.samples) os << x << '\n';
}

inline Population read_csv(std::istream& is, Label label) {
    Population pop{{}, label};
    double x;
    while (is >> x) {
        require(x >= 0 && x <= 1, "read_csv: sample outside [0,1]");
        pop.samples.push_back(x);
    }
    require(pop.size() > 0, "read_csv: empty population");
    return pop;
}

}  // namespace rksat::population

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <deque>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "model.hpp"
#include "numeric.hpp"
#include "rng.hpp"

namespace rksat::formula {

struct Slot {
    int var = 0;
    int clone = 0;
    bool positive = true;
    bool operator==(const Slot&) const = default;
};

// Clause a occupies slots[a*k .. a*k+k). d == 0 marks an irregular formula
// (used for acyclic test instances); then clone indices carry no meaning.
struct Formula {
    int n = 0, k = 0, d = 0;
    std::uint64_t seed = 0;
    std::vector<Slot> slots;

    int m() const { return k ? static_cast<int>(slots.size()) / k : 0; }
    const Slot& at(int a, int l) const { return slots[static_cast<std::size_t>(a) * k + l]; }
    bool regular() const { return d > 0; }
    bool operator==(const Formula&) const = default;
};

// Relabel clones of each variable in order of appearance.
inline void canonicalize_clones(Formula& f) {
    std::vector<int> pos(f.n, 0), neg(f.n, 0);
    for (auto& s : f.slots) s.clone = s.positive ? pos[s.var]++ : f.d / 2 + neg[s.var]++;
}

inline Formula generate(int n, int k, int d, std::uint64_t seed) {
    require(k >= 2 && d >= 2 && d % 2 == 0, "generate: need k >= 2 and even d >= 2");
    const std::int64_t m = clause_count(n, k, d);
    const std::int64_t total = m * k;
    std::vector<int> clones(total);
    std::iota(clones.begin(), clones.end(), 0);
    Rng rng(mix_key(seed, 0xf0f0ULL));
    for (std::int64_t i = total - 1; i > 0; --i) std::swap(clones[i], clones[rng.index(i + 1)]);
    Formula f;
    f.n = n;
    f.k = k;
    f.d = d;
    f.seed = seed;
    f.slots.resize(total);
    for (std::int64_t s = 0; s < total; ++s) {
        int c = clones[s];
        f.slots[s] = {c / d, c % d, c % d < d / 2};
    }
    canonicalize_clones(f);
    return f;
}

// Random acyclic formula: each new clause shares exactly one variable with the
// existing ones. Factor graph is a tree with distinct-variable scopes.
inline Formula generate_tree(int clauses, int k, std::uint64_t seed) {
    require(clauses >= 1 && k >= 2, "generate_tree: need at least one clause and k >= 2");
    Rng rng(mix_key(seed, 0x7eeeULL));
    Formula f;
    f.k = k;
    f.seed = seed;
    for (int a = 0; a < clauses; ++a) {
        int shared = a == 0 ? -1 : static_cast<int>(rng.index(f.n));
        int pos = static_cast<int>(rng.index(k));
        for (int l = 0; l < k; ++l) {
            int v = (l == pos && shared >= 0) ? shared : f.n++;
            bool positive = rng.bernoulli(0.5);
            f.slots.push_back({v, positive ? 0 : 1, positive});
        }
    }
    return f;
}

inline int repeated_variable_clauses(const Formula& f) {
    int count = 0;
    for (int a = 0; a < f.m(); ++a) {
        std::vector<int> vs;
        for (int l = 0; l < f.k; ++l) vs.push_back(f.at(a, l).var);
        std::sort(vs.begin(), vs.end());
        if (std::adjacent_find(vs.begin(), vs.end()) != vs.end()) ++count;
    }
    return count;
}

// sigma[x] in {-1, +1}.
inline int energy(const Formula& f, const std::vector<int>& sigma) {
    require(static_cast<int>(sigma.size()) == f.n, "energy: assignment length must equal n");
    int e = 0;
    for (int a = 0; a < f.m(); ++a) {
        bool sat = false;
        for (int l = 0; l < f.k && !sat; ++l) {
            const Slot& s = f.at(a, l);
            sat = (sigma[s.var] == 1) == s.positive;
        }
        e += !sat;
    }
    return e;
}

inline int energy_all_ones(const Formula& f) { return energy(f, std::vector<int>(f.n, 1)); }

// Energy histogram plus, per variable, the histogram restricted to sigma_x = +1.
struct EnergyCensus {
    int n = 0, m = 0;
    std::vector<double> hist;       // size m+1
    std::vector<double> plus_hist;  // size n*(m+1)
};

constexpr int kMaxExactN = 26;

inline EnergyCensus energy_census(const Formula& f, bool with_marginals = true) {
    require(f.n <= kMaxExactN, "exact enumeration: n exceeds " + std::to_string(kMaxExactN));
    const int n = f.n, m = f.m(), k = f.k;
    std::vector<std::vector<std::pair<int, bool>>> occ(n);  // (clause, positive)
    for (int a = 0; a < m; ++a)
        for (int l = 0; l < k; ++l) occ[f.at(a, l).var].push_back({a, f.at(a, l).positive});
    // Start from all -1: true literals are the negative ones.
    std::vector<int> ntrue(m, 0);
    for (int a = 0; a < m; ++a)
        for (int l = 0; l < k; ++l) ntrue[a] += !f.at(a, l).positive;
    int e = 0;
    for (int a = 0; a < m; ++a) e += ntrue[a] == 0;

    EnergyCensus c;
    c.n = n;
    c.m = m;
    c.hist.assign(m + 1, 0.0);
    if (with_marginals) c.plus_hist.assign(static_cast<std::size_t>(n) * (m + 1), 0.0);
    std::uint64_t mask = 0;
    const std::uint64_t total = 1ULL << n;
    for (std::uint64_t t = 0; t < total; ++t) {
        if (t) {
            int x = std::countr_zero(t);
            mask ^= 1ULL << x;
            bool now_plus = (mask >> x) & 1;
            for (auto [a, positive] : occ[x]) {
                bool lit_true = positive == now_plus;
                if (lit_true) {
                    if (ntrue[a]++ == 0) --e;
                } else {
                    if (--ntrue[a] == 0) ++e;
                }
            }
        }
        c.hist[e] += 1;
        if (with_marginals)
            for (std::uint64_t b = mask; b; b &= b - 1) c.plus_hist[static_cast<std::size_t>(std::countr_zero(b)) * (m + 1) + e] += 1;
    }
    return c;
}

struct GibbsSummary {
    double beta = 0;
    double lnZ = 0;
    std::vector<double> marginal_plus;
    std::vector<double> energy_hist;
};

inline GibbsSummary summarize(const EnergyCensus& c, double beta) {
    GibbsSummary g;
    g.beta = beta;
    g.energy_hist = c.hist;
    std::vector<double> terms;
    for (int e = 0; e <= c.m; ++e)
        if (c.hist[e] > 0) terms.push_back(std::log(c.hist[e]) - beta * e);
    g.lnZ = log_sum_exp(terms);
    if (!c.plus_hist.empty()) {
        g.marginal_plus.assign(c.n, 0.0);
        for (int x = 0; x < c.n; ++x) {
            double s = 0;
            for (int e = 0; e <= c.m; ++e) s += c.plus_hist[static_cast<std::size_t>(x) * (c.m + 1) + e] * std::exp(-beta * e - g.lnZ);
            g.marginal_plus[x] = s;
        }
    }
    return g;
}

inline GibbsSummary exact_gibbs(const Formula& f, double beta) { return summarize(energy_census(f), beta); }

// ln of the Gibbs weight of {sigma : #(-1 entries) < n 2^{-k/10} / 2}.
inline double cluster_size(const Formula& f, double beta) {
    require(f.n <= kMaxExactN, "cluster_size: n exceeds " + std::to_string(kMaxExactN));
    const double bound = f.n * std::pow(2.0, -f.k / 10.0) / 2;
    std::vector<double> terms;
    std::vector<int> sigma(f.n, 1);
    std::vector<int> idx;
    // Enumerate minus-sets in increasing size.
    for (int r = 0; r < bound && r <= f.n; ++r) {
        idx.resize(r);
        std::iota(idx.begin(), idx.end(), 0);
        while (true) {
            std::fill(sigma.begin(), sigma.end(), 1);
            for (int i : idx) sigma[i] = -1;
            terms.push_back(-beta * energy(f, sigma));
            int i = r - 1;
            while (i >= 0 && idx[i] == f.n - r + i) --i;
            if (i < 0) break;
            ++idx[i];
            for (int j = i + 1; j < r; ++j) idx[j] = idx[j - 1] + 1;
        }
    }
    return log_sum_exp(terms);
}

// Exact ln E[Z] over the configuration model. Under sigma = all-ones the slot
// signs are i.i.d. Bernoulli(theta) conditioned on exactly dn/2 positives.
inline double annealed_EZ(int n, int k, int d, double beta, double theta = 0.5) {
    require(theta > 0 && theta < 1, "annealed_EZ: theta must lie in (0,1)");
    const std::int64_t m = clause_count(n, k, d);
    const std::int64_t slots = m * k;
    require(slots <= 2000000, "annealed_EZ: dn too large for the polynomial power");
    std::vector<double> clause(k + 1);
    for (int j = 0; j <= k; ++j)
        clause[j] = log_binomial(k, j) + j * std::log(theta) + (k - j) * std::log1p(-theta) - (j == 0 ? beta : 0.0);
    std::vector<double> poly{0.0}, next;
    std::vector<double> buf(k + 1);
    for (std::int64_t a = 0; a < m; ++a) {
        next.assign(poly.size() + k, -INFINITY);
        for (std::size_t i = 0; i < next.size(); ++i) {
            int cnt = 0;
            for (int j = 0; j <= k; ++j) {
                if (j > static_cast<std::int64_t>(i) || i - j >= poly.size()) continue;
                buf[cnt++] = poly[i - j] + clause[j];
            }
            double mx = -INFINITY;
            for (int t = 0; t < cnt; ++t) mx = std::max(mx, buf[t]);
            if (mx == -INFINITY) continue;
            double s = 0;
            for (int t = 0; t < cnt; ++t) s += std::exp(buf[t] - mx);
            next[i] = mx + std::log(s);
        }
        poly.swap(next);
    }
    const std::int64_t half = slots / 2;
    double log_count = log_binomial(slots, half) + half * std::log(theta) + (slots - half) * std::log1p(-theta);
    return n * std::log(2.0) + poly[half] - log_count;
}

struct PlantedResult {
    Formula formula;
    long long trials = 0;
    int energy = 0;
};

inline PlantedResult planted_sample(int n, int k, int d, double beta, std::uint64_t seed, long long max_trials = 10000000) {
    clause_count(n, k, d);
    Rng acc(mix_key(seed, 0xacceULL));
    for (long long t = 0; t < max_trials; ++t) {
        Formula f = generate(n, k, d, mix_key(seed, static_cast<std::uint64_t>(t)));
        int e = energy_all_ones(f);
        if (acc.uniform() < std::exp(-beta * e)) return {f, t + 1, e};
    }
    throw ConvergenceError("planted_sample: no acceptance within the trial budget");
}

struct AcceptanceStats {
    long long trials = 0, accepted = 0;
    double mean_energy_accepted = 0, mean_energy_rejected = 0;
    double rate() const { return double(accepted) / trials; }
    double stderr_() const { return std::sqrt(rate() * (1 - rate()) / trials); }
};

// Runs the rejection step of planted_sample for a fixed number of proposals.
inline AcceptanceStats planted_acceptance(int n, int k, int d, double beta, long long trials, std::uint64_t seed) {
    AcceptanceStats s;
    s.trials = trials;
    Rng acc(mix_key(seed, 0xacceULL));
    RunningStats ea, er;
    for (long long t = 0; t < trials; ++t) {
        Formula f = generate(n, k, d, mix_key(seed, static_cast<std::uint64_t>(t)));
        int e = energy_all_ones(f);
        if (acc.uniform() < std::exp(-beta * e)) {
            ++s.accepted;
            ea.add(e);
        } else {
            er.add(e);
        }
    }
    s.mean_energy_accepted = ea.mean;
    s.mean_energy_rejected = er.mean;
    return s;
}

// ---------------------------------------------------------------------------
// Factor graph over distinct-variable scopes.

struct Scope {
    std::vector<int> vars;
    std::vector<std::uint8_t> signs;  // bit0: positive occurrence, bit1: negative occurrence
};

struct FactorGraph {
    int n = 0;
    std::vector<Scope> clauses;
    std::vector<std::vector<std::pair<int, int>>> adj;  // per variable: (clause, position in scope)
};

inline FactorGraph factor_graph(const Formula& f) {
    FactorGraph g;
    g.n = f.n;
    g.adj.resize(f.n);
    for (int a = 0; a < f.m(); ++a) {
        Scope s;
        for (int l = 0; l < f.k; ++l) {
            const Slot& sl = f.at(a, l);
            auto it = std::find(s.vars.begin(), s.vars.end(), sl.var);
            std::uint8_t bit = sl.positive ? 1 : 2;
            if (it == s.vars.end()) {
                s.vars.push_back(sl.var);
                s.signs.push_back(bit);
            } else {
                s.signs[it - s.vars.begin()] |= bit;
            }
        }
        for (std::size_t i = 0; i < s.vars.size(); ++i) g.adj[s.vars[i]].push_back({a, static_cast<int>(i)});
        g.clauses.push_back(std::move(s));
    }
    return g;
}

// 1 when every literal of the variable in this clause is false under s.
inline int all_false(std::uint8_t signs, int s) {
    bool pos_false = !(signs & 1) || s == -1;
    bool neg_false = !(signs & 2) || s == 1;
    return pos_false && neg_false;
}

struct BpResult {
    std::vector<double> marginal_plus;
    bool converged = false;
    int iterations = 0;
    double residual = 0;
};

inline BpResult loopy_bp(const Formula& f, double beta, int max_iters = 1000, double damping = 0.0, double tol = 1e-12) {
    require(damping >= 0 && damping < 1, "loopy_bp: damping must lie in [0,1)");
    const FactorGraph g = factor_graph(f);
    const double c = c_of_beta(beta);
    std::vector<std::vector<double>> hat(g.clauses.size()), vmsg(g.clauses.size());
    for (std::size_t a = 0; a < g.clauses.size(); ++a) {
        hat[a].assign(g.clauses[a].vars.size(), 0.5);
        vmsg[a].assign(g.clauses[a].vars.size(), 0.5);
    }
    BpResult r;
    std::vector<double> L(g.n);
    auto refresh_fields = [&] {
        for (int x = 0; x < g.n; ++x) {
            double t = 0;
            for (auto [a, i] : g.adj[x]) t += logit(hat[a][i]);
            L[x] = t;
        }
    };
    for (int it = 1; it <= max_iters; ++it) {
        refresh_fields();
        for (std::size_t a = 0; a < g.clauses.size(); ++a)
            for (std::size_t i = 0; i < g.clauses[a].vars.size(); ++i)
                vmsg[a][i] = logistic(L[g.clauses[a].vars[i]] - logit(hat[a][i]));
        double res = 0;
        for (std::size_t a = 0; a < g.clauses.size(); ++a) {
            const Scope& s = g.clauses[a];
            const std::size_t w = s.vars.size();
            std::vector<double> P(w);
            for (std::size_t i = 0; i < w; ++i) P[i] = vmsg[a][i] * all_false(s.signs[i], 1) + (1 - vmsg[a][i]) * all_false(s.signs[i], -1);
            for (std::size_t i = 0; i < w; ++i) {
                double rest = 1;
                for (std::size_t j = 0; j < w; ++j)
                    if (j != i) rest *= P[j];
                double wp = 1 - c * all_false(s.signs[i], 1) * rest;
                double wm = 1 - c * all_false(s.signs[i], -1) * rest;
                double nv = (1 - damping) * (wp / (wp + wm)) + damping * hat[a][i];
                res = std::max(res, std::abs(nv - hat[a][i]));
                hat[a][i] = nv;
            }
        }
        r.iterations = it;
        r.residual = res;
        if (res <= tol) {
            r.converged = true;
            break;
        }
    }
    refresh_fields();
    r.marginal_plus.resize(g.n);
    for (int x = 0; x < g.n; ++x) r.marginal_plus[x] = logistic(L[x]);
    return r;
}

struct ClauseMeasure {
    std::vector<double> prob;  // over 2^w configurations; bit i set means vars[i] = +1
    double residual = 0;
    int rounds = 0;
};

constexpr int kMaxScope = 20;

// Max-entropy clause measure tilted by psi with the prescribed marginals.
inline ClauseMeasure ipf_clause(const Scope& s, double beta, const std::vector<double>& mu, double tol = 1e-10, int max_rounds = 10000) {
    const int w = static_cast<int>(s.vars.size());
    require(w <= kMaxScope, "ipf_clause: scope exceeds 2^20 configurations");
    const std::size_t N = std::size_t{1} << w;
    std::vector<double> psi(N);
    for (std::size_t cfg = 0; cfg < N; ++cfg) {
        bool viol = true;
        for (int i = 0; i < w && viol; ++i) viol = all_false(s.signs[i], ((cfg >> i) & 1) ? 1 : -1);
        psi[cfg] = viol ? std::exp(-beta) : 1.0;
    }
    std::vector<double> fp(w), fm(w);
    for (int i = 0; i < w; ++i) {
        fp[i] = mu[s.vars[i]];
        fm[i] = 1 - mu[s.vars[i]];
    }
    ClauseMeasure cm;
    cm.prob.resize(N);
    auto build = [&] {
        double z = 0;
        for (std::size_t cfg = 0; cfg < N; ++cfg) {
            double p = psi[cfg];
            for (int i = 0; i < w; ++i) p *= ((cfg >> i) & 1) ? fp[i] : fm[i];
            cm.prob[cfg] = p;
            z += p;
        }
        for (auto& p : cm.prob) p /= z;
    };
    auto marg = [&](int i) {
        double t = 0;
        for (std::size_t cfg = 0; cfg < N; ++cfg)
            if ((cfg >> i) & 1) t += cm.prob[cfg];
        return t;
    };
    for (cm.rounds = 0; cm.rounds < max_rounds; ++cm.rounds) {
        build();
        double res = 0;
        for (int i = 0; i < w; ++i) res = std::max(res, std::abs(marg(i) - mu[s.vars[i]]));
        cm.residual = res;
        if (res <= tol) return cm;
        for (int i = 0; i < w; ++i) {
            build();
            double cur = marg(i), target = mu[s.vars[i]];
            fp[i] *= target / cur;
            fm[i] *= (1 - target) / (1 - cur);
        }
    }
    throw ConvergenceError("ipf_clause: no convergence within the round budget");
}

inline double bethe_free_energy(const Formula& f, double beta, const std::vector<double>& mu) {
    require(static_cast<int>(mu.size()) == f.n, "bethe_free_energy: marginal vector length must equal n");
    for (double p : mu) require(p > 0 && p < 1, "bethe_free_energy: marginals must lie in (0,1)");
    const FactorGraph g = factor_graph(f);
    double b = 0;
    for (int x = 0; x < f.n; ++x) b += (1.0 - static_cast<double>(g.adj[x].size())) * entropy2(mu[x]);
    for (const Scope& s : g.clauses) {
        ClauseMeasure cm = ipf_clause(s, beta, mu);
        const int w = static_cast<int>(s.vars.size());
        for (std::size_t cfg = 0; cfg < cm.prob.size(); ++cfg) {
            double p = cm.prob[cfg];
            if (p <= 0) continue;
            bool viol = true;
            for (int i = 0; i < w && viol; ++i) viol = all_false(s.signs[i], ((cfg >> i) & 1) ? 1 : -1);
            b -= p * (std::log(p) + (viol ? beta : 0.0));
        }
    }
    return b;
}

// ---------------------------------------------------------------------------
// Core and sticky sets. Under the planted all-ones assignment a positive literal
// is true; d_1 denotes positive occurrences and d_{-1} negative ones.

enum class Cr1Reading { monotone, literal };

struct Incidence {
    int n = 0, k = 0;
    std::vector<std::vector<int>> pos_vars, neg_vars;   // per clause, distinct
    std::vector<int> neg_slots;                         // per clause
    std::vector<std::vector<int>> pos_clauses, neg_clauses, all_clauses;  // per variable, distinct
};

inline Incidence incidence(const Formula& f) {
    Incidence I;
    I.n = f.n;
    I.k = f.k;
    const int m = f.m();
    I.pos_vars.resize(m);
    I.neg_vars.resize(m);
    I.neg_slots.assign(m, 0);
    I.pos_clauses.resize(f.n);
    I.neg_clauses.resize(f.n);
    I.all_clauses.resize(f.n);
    auto push_unique = [](std::vector<int>& v, int x) {
        if (std::find(v.begin(), v.end(), x) == v.end()) v.push_back(x);
    };
    for (int a = 0; a < m; ++a)
        for (int l = 0; l < f.k; ++l) {
            const Slot& s = f.at(a, l);
            if (s.positive) {
                push_unique(I.pos_vars[a], s.var);
                push_unique(I.pos_clauses[s.var], a);
            } else {
                ++I.neg_slots[a];
                push_unique(I.neg_vars[a], s.var);
                push_unique(I.neg_clauses[s.var], a);
            }
            push_unique(I.all_clauses[s.var], a);
        }
    return I;
}

inline double factorial(int l) { return std::tgamma(l + 1.0); }

// CR1-CR3 do not depend on W.
inline bool static_conditions(const Incidence& I, int x, double lambda, double beta, Cr1Reading reading) {
    const double k = I.k;
    int sole = 0;
    for (int a : I.pos_clauses[x]) sole += I.pos_vars[a].size() == 1;
    double cr1 = reading == Cr1Reading::monotone ? k * (1 - lambda / 100) : k * (1 - 1 / (lambda * 100));
    if (sole < cr1) return false;
    int allneg = 0;
    for (int a : I.all_clauses[x]) allneg += I.neg_slots[a] == I.k;
    if (allneg > k * std::exp(-beta) * (1 + lambda / 100)) return false;
    std::vector<int> by_l(I.k + 1, 0);
    for (int a : I.neg_clauses[x]) {
        int l = static_cast<int>(I.pos_vars[a].size());
        if (l >= 1 && l <= I.k) ++by_l[l];
    }
    for (int l = 1; l <= I.k; ++l)
        if (by_l[l] > lambda * std::pow(k, l + 3) / factorial(l)) return false;
    return true;
}

inline bool dynamic_conditions(const Incidence& I, int x, double lambda, const std::vector<char>& in_w) {
    const double lim = lambda * std::pow(static_cast<double>(I.k), 0.75);
    int cr4 = 0;
    for (int a : I.pos_clauses[x]) {
        if (I.pos_vars[a].size() != 1) continue;
        bool outside = false;
        for (int y : I.neg_vars[a]) outside |= !in_w[y];
        for (int y : I.pos_vars[a]) outside |= !in_w[y];
        cr4 += outside;
    }
    if (cr4 > lim) return false;
    int cr5 = 0;
    for (int a : I.neg_clauses[x]) {
        if (I.neg_slots[a] >= I.k) continue;
        const auto& p = I.pos_vars[a];
        int out = 0;
        for (int y : p) out += !in_w[y];
        cr5 += out >= p.size() / 4.0;
    }
    return cr5 <= lim;
}

// Greatest set satisfying CR1-CR5, computed by whitening from U0 = CR1-CR3 violators.
// order_seed permutes the processing order (the result does not depend on it).
inline std::vector<char> core(const Formula& f, double lambda, double beta, std::uint64_t order_seed = 0,
                              Cr1Reading reading = Cr1Reading::monotone) {
    require(lambda > 0, "core: lambda must be positive");
    const Incidence I = incidence(f);
    std::vector<char> in_w(f.n, 1);
    for (int x = 0; x < f.n; ++x) in_w[x] = static_conditions(I, x, lambda, beta, reading);
    std::vector<int> order(f.n);
    std::iota(order.begin(), order.end(), 0);
    if (order_seed) {
        Rng rng(order_seed);
        for (int i = f.n - 1; i > 0; --i) std::swap(order[i], order[rng.index(i + 1)]);
    }
    std::deque<int> work(order.begin(), order.end());
    std::vector<char> queued(f.n, 1);
    while (!work.empty()) {
        int x = work.front();
        work.pop_front();
        queued[x] = 0;
        if (!in_w[x] || dynamic_conditions(I, x, lambda, in_w)) continue;
        in_w[x] = 0;
        for (int a : I.all_clauses[x]) {
            for (int y : I.pos_vars[a])
                if (in_w[y] && !queued[y]) { queued[y] = 1; work.push_back(y); }
            for (int y : I.neg_vars[a])
                if (in_w[y] && !queued[y]) { queued[y] = 1; work.push_back(y); }
        }
    }
    return in_w;
}

inline bool sticky_ok(const Incidence& I, int x, double lambda, const std::vector<char>& in_s) {
    const double lim = lambda * std::pow(static_cast<double>(I.k), 0.75);
    int st1 = 0;
    for (int a : I.pos_clauses[x]) {
        if (I.pos_vars[a].size() != 1) continue;
        bool hit = false;
        for (int y : I.neg_vars[a]) hit |= static_cast<bool>(in_s[y]);
        st1 += hit;
    }
    if (st1 >= lim) return true;
    int st2 = 0;
    for (int a : I.neg_clauses[x]) {
        if (I.neg_slots[a] >= I.k) continue;
        const auto& p = I.pos_vars[a];
        int in = 0;
        for (int y : p) in += in_s[y] != 0;
        st2 += in >= p.size() / 4.0;
    }
    return st2 >= lim;
}

// Largest lambda-sticky subset of the candidates.
inline std::vector<char> max_sticky(const Formula& f, double lambda, const std::vector<char>& candidates,
                                    std::uint64_t order_seed = 0) {
    require(static_cast<int>(candidates.size()) == f.n, "max_sticky: candidate mask length must equal n");
    const Incidence I = incidence(f);
    std::vector<char> in_s = candidates;
    std::vector<int> order(f.n);
    std::iota(order.begin(), order.end(), 0);
    if (order_seed) {
        Rng rng(order_seed);
        for (int i = f.n - 1; i > 0; --i) std::swap(order[i], order[rng.index(i + 1)]);
    }
    std::deque<int> work;
    std::vector<char> queued(f.n, 0);
    for (int x : order)
        if (in_s[x]) { work.push_back(x); queued[x] = 1; }
    while (!work.empty()) {
        int x = work.front();
        work.pop_front();
        queued[x] = 0;
        if (!in_s[x] || sticky_ok(I, x, lambda, in_s)) continue;
        in_s[x] = 0;
        for (int a : I.all_clauses[x]) {
            for (int y : I.pos_vars[a])
                if (in_s[y] && !queued[y]) { queued[y] = 1; work.push_back(y); }
            for (int y : I.neg_vars[a])
                if (in_s[y] && !queued[y]) { queued[y] = 1; work.push_back(y); }
        }
    }
    return in_s;
}

// ---------------------------------------------------------------------------
// Text format: "p rksat n m k d seed" then one clause per line, 1-based signed
// variables terminated by 0.

inline void write_dimacs(std::ostream& os, const Formula& f) {
    os << "p rksat " << f.n << ' ' << f.m() << ' ' << f.k << ' ' << f.d << ' ' << f.seed << '\n';
    for (int a = 0; a < f.m(); ++a) {
        for (int l = 0; l < f.k; ++l) {
            const Slot& s = f.at(a, l);
            os << (s.positive ? s.var + 1 : -(s.var + 1)) << ' ';
        }
        os << "0\n";
    }
}

inline Formula read_dimacs(std::istream& is) {
    Formula f;
    std::string line;
    int m = -1;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == 'c') continue;
        std::istringstream ls(line);
        if (line[0] == 'p') {
            std::string p, tag;
            ls >> p >> tag >> f.n >> m >> f.k >> f.d >> f.seed;
            require(static_cast<bool>(ls) && tag == "rksat", "read_dimacs: malformed header");
            continue;
        }
        require(m >= 0, "read_dimacs: clause before header");
        int lit, count = 0;
        while (ls >> lit && lit != 0) {
            require(std::abs(lit) <= f.n, "read_dimacs: variable index out of range");
            bool positive = lit > 0;
            f.slots.push_back({std::abs(lit) - 1, positive ? 0 : 1, positive});
            ++count;
        }
        require(count == f.k, "read_dimacs: clause width differs from k");
    }
    require(m >= 0 && f.m() == m, "read_dimacs: clause count differs from header");
    if (f.regular()) {
        std::vector<int> pos(f.n, 0), neg(f.n, 0);
        for (const auto& s : f.slots) (s.positive ? pos : neg)[s.var]++;
        for (int x = 0; x < f.n; ++x)
            require(pos[x] == f.d / 2 && neg[x] == f.d / 2, "read_dimacs: header declares a regular formula but degrees differ");
        canonicalize_clones(f);
    }
    return f;
}

}  // namespace rksat::formula

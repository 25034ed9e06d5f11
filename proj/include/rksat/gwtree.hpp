#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "bethe.hpp"
#include "errors.hpp"
#include "model.hpp"
#include "numeric.hpp"
#include "population.hpp"
#include "rng.hpp"

namespace rksat::gwtree {

using population::Quad;

enum class Variant { gw, gw_prime, clause_rooted };
enum class Kind : std::uint8_t { variable, clause };

inline const char* variant_name(Variant v) {
    switch (v) {
        case Variant::gw: return "gw";
        case Variant::gw_prime: return "gw_prime";
        case Variant::clause_rooted: return "clause_rooted";
    }
    return "?";
}

struct Node {
    Kind kind = Kind::variable;
    std::int8_t label = 1;  // b_{v,up}
    std::int32_t depth = 0;
    std::int32_t parent = -1;
    std::int32_t first_child = 0;
    std::int32_t n_children = 0;
};

// Breadth-first layout: children of a node are contiguous and come after it.
struct DecoratedTree {
    ModelParams params;
    int ell = 0;
    Variant variant = Variant::gw;
    std::vector<Node> nodes;
    std::vector<std::int32_t> leaves;

    int leaf_depth() const { return variant == Variant::clause_rooted ? 2 * ell + 1 : 2 * ell; }
    const Node& root() const { return nodes.front(); }
};

constexpr double kMaxNodes = 1e7;

inline double node_count(int k, int d, int ell, Variant v) {
    double vars = v == Variant::clause_rooted ? k - 1 : 1;
    double total = v == Variant::clause_rooted ? 1 + vars : 1;
    for (int j = 0; j < ell; ++j) {
        double clauses = vars * (j == 0 && v == Variant::gw_prime ? d : d - 1);
        vars = clauses * (k - 1);
        total += clauses + vars;
    }
    return total;
}

// Probability that a b=+1 clause has all k-1 children labelled +1.
inline double all_plus_prob(const ModelParams& p) {
    double qk1 = std::pow(p.q, p.k - 1);
    return std::exp(-p.beta) * qk1 / (1 - p.c * qk1);
}

inline int binomial_draw(int n, double prob, Rng& r) {
    int s = 0;
    for (int i = 0; i < n; ++i) s += r.bernoulli(prob);
    return s;
}

// Number of children labelled -1 below a clause with label b.
inline int minus_children(const ModelParams& p, int b, Rng& r) {
    if (b < 0) return binomial_draw(p.k - 1, 1 - p.q, r);
    if (r.bernoulli(all_plus_prob(p))) return 0;
    for (;;) {
        int m = binomial_draw(p.k - 1, 1 - p.q, r);
        if (m >= 1) return m;
    }
}

// root_label: 0 draws it (+1 w.p. q for variable roots, 1-q for clause roots).
inline DecoratedTree sample_tree(const ModelParams& p, int ell, Variant variant, std::uint64_t seed, int root_label = 0) {
    require(ell >= 0, "sample_tree: ell must be nonnegative");
    require(variant != Variant::gw_prime || ell >= 1, "sample_tree: gw_prime needs ell >= 1");
    require(node_count(p.k, p.d, ell, variant) <= kMaxNodes, "sample_tree: tree exceeds the node cap");
    DecoratedTree t;
    t.params = p;
    t.ell = ell;
    t.variant = variant;
    Rng r = Rng::stream(seed, 41);
    Node root;
    if (variant == Variant::clause_rooted) {
        root.kind = Kind::clause;
        root.label = root_label ? root_label : (r.bernoulli(1 - p.q) ? 1 : -1);
    } else {
        root.label = variant == Variant::gw_prime ? 1 : root_label ? root_label : (r.bernoulli(p.q) ? 1 : -1);
    }
    t.nodes.reserve(static_cast<std::size_t>(node_count(p.k, p.d, ell, variant)));
    t.nodes.push_back(root);
    const int leaf_depth = t.leaf_depth();
    for (std::size_t i = 0; i < t.nodes.size(); ++i) {
        Node cur = t.nodes[i];
        if (cur.kind == Kind::variable && cur.depth == leaf_depth) {
            t.leaves.push_back(static_cast<std::int32_t>(i));
            continue;
        }
        auto add = [&](Kind kind, int label) {
            Node c;
            c.kind = kind;
            c.label = static_cast<std::int8_t>(label);
            c.depth = cur.depth + 1;
            c.parent = static_cast<std::int32_t>(i);
            t.nodes.push_back(c);
        };
        const std::int32_t first = static_cast<std::int32_t>(t.nodes.size());
        if (cur.kind == Kind::variable) {
            if (i == 0 && variant == Variant::gw_prime) {
                for (int j = 0; j < p.d; ++j) add(Kind::clause, j < p.d / 2 ? 1 : -1);
            } else {
                for (int j = 0; j < p.d - 1; ++j) add(Kind::clause, j < p.d / 2 - 1 ? cur.label : -cur.label);
            }
        } else {
            int m = minus_children(p, cur.label, r);
            for (int j = 0; j < p.k - 1; ++j) add(Kind::variable, j < m ? -1 : 1);
        }
        t.nodes[i].first_child = first;
        t.nodes[i].n_children = static_cast<std::int32_t>(t.nodes.size()) - first;
    }
    return t;
}

// Label b_{a,x} on the edge between clause a and variable x.
inline int edge_label(const DecoratedTree& t, std::int32_t a, std::int32_t x) {
    return t.nodes[x].parent == a ? t.nodes[x].label : t.nodes[a].label;
}

template <class F>
void for_clause_members(const DecoratedTree& t, std::int32_t a, F&& f) {
    const Node& n = t.nodes[a];
    if (n.parent >= 0) f(n.parent);
    for (std::int32_t c = n.first_child; c < n.first_child + n.n_children; ++c) f(c);
}

template <class F>
void for_variable_clauses(const DecoratedTree& t, std::int32_t x, F&& f) {
    const Node& n = t.nodes[x];
    if (n.parent >= 0) f(n.parent);
    for (std::int32_t c = n.first_child; c < n.first_child + n.n_children; ++c) f(c);
}

inline void write_text(std::ostream& os, const DecoratedTree& t, std::int32_t i = 0, int indent = 0) {
    const Node& n = t.nodes[i];
    os << std::string(indent, ' ') << (n.kind == Kind::variable ? 'x' : 'a') << (n.label > 0 ? '+' : '-') << '\n';
    for (std::int32_t c = n.first_child; c < n.first_child + n.n_children; ++c) write_text(os, t, c, indent + 2);
}

// ---------------------------------------------------------------------------
// Boundary conditions. g is nu_x(1) in the planted gauge: the probability that
// the leaf takes the value its label is consistent with. In literal coordinates
// (eta = P[literal towards the parent is false]) eta = g for b=+1, 1-g for b=-1.

enum class HReading { planted, literal };

struct Boundary {
    std::vector<double> g;  // indexed like tree.leaves
    std::string tag;
};

inline double h_cutoff(const ModelParams& p) { return 1 - std::exp(-p.k * p.beta / 2); }

inline double default_bad_prob(int k) { return std::pow(2.0, -0.9 * k); }

inline Boundary all_plus(const DecoratedTree& t) { return {std::vector<double>(t.leaves.size(), 1.0), "all_plus"}; }

inline Boundary from_quad(const DecoratedTree& t, const Quad& q, std::uint64_t seed) {
    Boundary b{std::vector<double>(t.leaves.size()), "population"};
    Rng r = Rng::stream(seed, 42);
    for (std::size_t j = 0; j < t.leaves.size(); ++j) {
        if (t.nodes[t.leaves[j]].label > 0)
            b.g[j] = q.p_minus.samples[r.index(q.p_minus.size())];
        else
            b.g[j] = 1 - q.p_plus.samples[r.index(q.p_plus.size())];
    }
    return b;
}

// Independent leaves; each is "bad" (below the H cutoff) with probability bad_prob.
inline Boundary iid_h_compliant(const DecoratedTree& t, double bad_prob, std::uint64_t seed) {
    Boundary b{std::vector<double>(t.leaves.size()), "iid_h"};
    Rng r = Rng::stream(seed, 43);
    const double cut = h_cutoff(t.params);
    for (auto& g : b.g) g = r.bernoulli(bad_prob) ? cut * r.uniform() : cut + (1 - cut) * r.uniform();
    return b;
}

inline double leaf_nu1(int label, double g, HReading reading) {
    if (reading == HReading::planted) return g;
    return label > 0 ? 1 - g : g;
}

inline double h_bad_fraction(const DecoratedTree& t, const Boundary& b, HReading reading = HReading::planted) {
    require(b.g.size() == t.leaves.size(), "h_bad_fraction: boundary size mismatch");
    if (b.g.empty()) return 0;
    const double cut = h_cutoff(t.params);
    std::size_t bad = 0;
    for (std::size_t j = 0; j < b.g.size(); ++j) bad += leaf_nu1(t.nodes[t.leaves[j]].label, b.g[j], reading) <= cut;
    return double(bad) / b.g.size();
}

// ---------------------------------------------------------------------------
// Belief propagation, leaves to root.

struct MessageSet {
    std::vector<double> eta;  // literal coordinates towards the parent
};

inline double clause_message(double c, double prod) { return (1 - c * prod) / (2 - c * prod); }

inline MessageSet bp_sweep(const DecoratedTree& t, const Boundary& b) {
    require(b.g.size() == t.leaves.size(), "bp_sweep: boundary size mismatch");
    MessageSet m;
    m.eta.assign(t.nodes.size(), 0.0);
    for (std::size_t j = 0; j < t.leaves.size(); ++j) {
        const Node& n = t.nodes[t.leaves[j]];
        m.eta[t.leaves[j]] = n.label > 0 ? b.g[j] : 1 - b.g[j];
    }
    const double c = t.params.c;
    for (std::size_t i = t.nodes.size(); i-- > 0;) {
        const Node& n = t.nodes[i];
        if (n.n_children == 0) continue;
        if (n.kind == Kind::clause) {
            double prod = 1;
            for (std::int32_t ch = n.first_child; ch < n.first_child + n.n_children; ++ch) prod *= m.eta[ch];
            m.eta[i] = clause_message(c, prod);
        } else {
            double L = 0;
            for (std::int32_t ch = n.first_child; ch < n.first_child + n.n_children; ++ch) {
                double l = logit(m.eta[ch]);
                L += t.nodes[ch].label == n.label ? l : -l;
            }
            m.eta[i] = logistic(L);
        }
    }
    return m;
}

inline double planted_value(const DecoratedTree& t, const MessageSet& m, std::int32_t i) {
    return t.nodes[i].label > 0 ? m.eta[i] : 1 - m.eta[i];
}

// Clause message odds (literal true : false) lie in [e^-beta, e^beta].
inline bool clause_ratios_ok(const DecoratedTree& t, const MessageSet& m) {
    const double lo = std::exp(-t.params.beta) * (1 - 1e-12), hi = std::exp(t.params.beta) * (1 + 1e-12);
    const double emin = (1 - t.params.c) / (2 - t.params.c);
    for (std::size_t i = 0; i < t.nodes.size(); ++i) {
        if (t.nodes[i].kind != Kind::clause) continue;
        double e = m.eta[i], ratio = (1 - e) / e;
        if (ratio < lo || ratio > hi || e < emin - 1e-15 || e > 0.5 + 1e-15) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Trunk and cold paths.

struct ClauseCounts {
    int n = 0;     // |da|
    int pos = 0;   // |d_1 a|: edges with b_{a,x} = -1
};

inline ClauseCounts clause_counts(const DecoratedTree& t, std::int32_t a) {
    ClauseCounts cc;
    for_clause_members(t, a, [&](std::int32_t x) {
        ++cc.n;
        cc.pos += edge_label(t, a, x) < 0;
    });
    return cc;
}

inline bool static_trunk_conditions(const DecoratedTree& t, std::int32_t x) {
    const int k = t.params.k;
    const Node& n = t.nodes[x];
    int tr1 = 0, tr2 = 0;
    std::vector<int> tr3(k + 1, 0);
    for_variable_clauses(t, x, [&](std::int32_t a) {
        ClauseCounts cc = clause_counts(t, a);
        const int e = edge_label(t, a, x);
        if (t.nodes[a].parent == x && e < 0 && cc.pos == 1) ++tr1;
        if (cc.n - cc.pos == k) ++tr2;
        if (e > 0 && cc.pos >= 1) ++tr3[cc.pos];
    });
    (void)n;
    if (tr1 < static_cast<int>(std::floor(0.9 * k))) return false;
    if (tr2 > static_cast<int>(std::ceil(0.1 * k))) return false;
    double fact = 1;
    for (int l = 1; l <= k; ++l) {
        fact *= l;
        if (tr3[l] > std::pow(double(k), l + 3) / fact) return false;
    }
    return true;
}

inline bool dynamic_trunk_conditions(const DecoratedTree& t, std::int32_t x, const std::vector<char>& W) {
    const int k = t.params.k;
    const double cap = std::pow(double(k), 0.75);
    int tr4 = 0, tr5 = 0;
    for_variable_clauses(t, x, [&](std::int32_t a) {
        ClauseCounts cc = clause_counts(t, a);
        const int e = edge_label(t, a, x);
        if (e < 0 && cc.pos == 1) {
            bool inside = true;
            for_clause_members(t, a, [&](std::int32_t y) { inside &= W[y] != 0; });
            if (!inside) ++tr4;
        }
        if (e > 0 && cc.n - cc.pos < k) {
            int out = 0;
            for_clause_members(t, a, [&](std::int32_t y) { out += edge_label(t, a, y) < 0 && !W[y]; });
            if (out >= cc.pos / 4.0) ++tr5;
        }
    });
    return tr4 <= cap && tr5 <= cap;
}

// Largest W satisfying TR0 or TR1-TR5, by peeling. order_seed shuffles the
// order in which violations are processed.
inline std::vector<char> trunk(const DecoratedTree& t, const Boundary& b, std::uint64_t order_seed = 0) {
    require(b.g.size() == t.leaves.size(), "trunk: boundary size mismatch");
    std::vector<char> W(t.nodes.size(), 0);
    const double cut = h_cutoff(t.params);
    for (std::size_t j = 0; j < t.leaves.size(); ++j) W[t.leaves[j]] = b.g[j] >= cut;
    std::vector<std::int32_t> work;
    for (std::size_t i = 0; i < t.nodes.size(); ++i) {
        const Node& n = t.nodes[i];
        if (n.kind == Kind::variable && n.n_children > 0 && static_trunk_conditions(t, static_cast<std::int32_t>(i))) {
            W[i] = 1;
            work.push_back(static_cast<std::int32_t>(i));
        }
    }
    Rng r = Rng::stream(order_seed, 44);
    for (std::size_t i = work.size(); i > 1; --i) std::swap(work[i - 1], work[r.index(i)]);
    std::vector<char> queued(t.nodes.size(), 0);
    for (auto x : work) queued[x] = 1;
    while (!work.empty()) {
        std::size_t pick = order_seed ? r.index(work.size()) : work.size() - 1;
        std::int32_t x = work[pick];
        work[pick] = work.back();
        work.pop_back();
        queued[x] = 0;
        if (!W[x] || dynamic_trunk_conditions(t, x, W)) continue;
        W[x] = 0;
        for_variable_clauses(t, x, [&](std::int32_t a) {
            for_clause_members(t, a, [&](std::int32_t y) {
                if (W[y] && !queued[y] && t.nodes[y].n_children > 0) {
                    queued[y] = 1;
                    work.push_back(y);
                }
            });
        });
    }
    return W;
}

struct ColdReport {
    bool cold = false;          // every leaf-to-root path is cold
    int min_cold_pairs = 0;
    int required = 0;           // floor(0.4 ell)
    double trunk_fraction = 0;  // among variable nodes
    bool root_in_trunk = false;
};

inline ColdReport cold_analysis(const DecoratedTree& t, const std::vector<char>& W) {
    ColdReport rep;
    rep.required = static_cast<int>(std::floor(0.4 * t.ell));
    std::vector<char> cold_clause(t.nodes.size(), 0);
    std::size_t vars = 0, in = 0;
    for (std::size_t i = 0; i < t.nodes.size(); ++i) {
        if (t.nodes[i].kind == Kind::variable) {
            ++vars;
            in += W[i] != 0;
            continue;
        }
        bool cold = false;
        for_clause_members(t, static_cast<std::int32_t>(i), [&](std::int32_t y) {
            cold |= edge_label(t, static_cast<std::int32_t>(i), y) < 0 && W[y];
        });
        cold_clause[i] = cold;
    }
    std::vector<int> cnt(t.nodes.size(), 0);
    for (std::size_t i = 1; i < t.nodes.size(); ++i) {
        const Node& n = t.nodes[i];
        if (n.kind != Kind::variable) continue;
        std::int32_t a = n.parent, up = t.nodes[a].parent;
        cnt[i] = (up >= 0 ? cnt[up] : 0) + ((W[i] || cold_clause[a]) ? 1 : 0);
    }
    int mn = t.leaves.empty() ? 0 : INT32_MAX;
    for (auto x : t.leaves) mn = std::min(mn, cnt[x]);
    rep.min_cold_pairs = mn;
    rep.cold = mn >= rep.required;
    rep.trunk_fraction = vars ? double(in) / vars : 0;
    rep.root_in_trunk = t.root().kind == Kind::variable && W[0];
    return rep;
}

// ---------------------------------------------------------------------------
// Contraction under H-compliant boundaries.

struct ContractionReport {
    ModelParams params;
    int ell = 0, trials = 0;
    double bad_prob = 0;
    double threshold = 0;  // 2 / ell
    std::vector<double> diffs;
    std::vector<char> cold;
    std::vector<double> trunk_fraction;
    double exceed_fraction = 0;
    double cold_fraction = 0;
    double median_cold = NAN, median_noncold = NAN;
};

inline double median(std::vector<double> v) {
    if (v.empty()) return NAN;
    std::size_t h = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + h, v.end());
    double m = v[h];
    if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + h));
    return m;
}

inline ContractionReport contraction_experiment(const ModelParams& p, int ell, int trials, std::uint64_t seed, double bad_prob = -1) {
    require(trials >= 100, "contraction_experiment: need at least 100 trials");
    require(ell >= 1, "contraction_experiment: ell must be positive");
    ContractionReport rep;
    rep.params = p;
    rep.ell = ell;
    rep.trials = trials;
    rep.bad_prob = bad_prob < 0 ? default_bad_prob(p.k) : bad_prob;
    rep.threshold = 2.0 / ell;
    std::vector<double> dc, dn;
    std::size_t exceed = 0, cold = 0;
    for (int i = 0; i < trials; ++i) {
        DecoratedTree t = sample_tree(p, ell, Variant::gw, mix_key(seed, 2 * i));
        Boundary b = iid_h_compliant(t, rep.bad_prob, mix_key(seed, 2 * i + 1));
        double diff = std::abs(bp_sweep(t, b).eta[0] - bp_sweep(t, all_plus(t)).eta[0]);
        ColdReport cr = cold_analysis(t, trunk(t, b));
        rep.diffs.push_back(diff);
        rep.cold.push_back(cr.cold);
        rep.trunk_fraction.push_back(cr.trunk_fraction);
        exceed += diff >= rep.threshold;
        cold += cr.cold;
        (cr.cold ? dc : dn).push_back(diff);
    }
    rep.exceed_fraction = double(exceed) / trials;
    rep.cold_fraction = double(cold) / trials;
    rep.median_cold = median(dc);
    rep.median_noncold = median(dn);
    return rep;
}

// ---------------------------------------------------------------------------
// Streaming messages of fresh subtrees, without storing the tree.
// eta_var(b, L): root message of a depth-2L variable subtree with label b.
// eta_clause(b, L): message of a clause with label b above depth-2L subtrees.

struct StreamSampler {
    ModelParams p;
    const Quad* quad = nullptr;  // leaves from the quad instead of the all-plus boundary

    double leaf(int b, Rng& r) const {
        if (!quad) return b > 0 ? 1.0 : 0.0;
        const auto& pop = b > 0 ? quad->p_minus : quad->p_plus;
        return pop.samples[r.index(pop.size())];
    }
    double eta_clause(int b, int L, Rng& r) const {
        int m = minus_children(p, b, r);
        double prod = 1;
        for (int j = 0; j < p.k - 1; ++j) prod *= eta_var(j < m ? -1 : 1, L, r);
        return clause_message(p.c, prod);
    }
    double eta_var(int b, int L, Rng& r) const {
        if (L == 0) return leaf(b, r);
        double s = 0;
        for (int j = 0; j < p.d - 1; ++j) {
            int lab = j < p.d / 2 - 1 ? b : -b;
            double l = logit(eta_clause(lab, L - 1, r));
            s += lab == b ? l : -l;
        }
        return logistic(s);
    }
};

// Law of the number of +1 labels around a clause met along a uniform edge.
inline std::vector<double> clause_label_weights(const ModelParams& p) {
    std::vector<double> w(p.k + 1);
    for (int j = 0; j <= p.k; ++j) w[j] = binomial(p.k, j) * std::pow(p.q, j) * std::pow(1 - p.q, p.k - j);
    w[p.k] *= std::exp(-p.beta);
    double s = 0;
    for (double x : w) s += x;
    for (double& x : w) x /= s;
    return w;
}

// Same law obtained from the first clause below a GW' root, with that clause's
// label drawn uniformly from +-1.
inline std::vector<double> clause_label_weights_from_root(const ModelParams& p) {
    std::vector<double> w(p.k + 1, 0.0);
    const double ap = all_plus_prob(p);
    // b = +1: root edge is +, children m minus with conditioned law or all plus.
    double z = 0;
    std::vector<double> cond(p.k, 0.0);
    for (int m = 1; m <= p.k - 1; ++m) z += cond[m] = binomial(p.k - 1, m) * std::pow(1 - p.q, m) * std::pow(p.q, p.k - 1 - m);
    w[p.k] += 0.5 * ap;
    for (int m = 1; m <= p.k - 1; ++m) w[p.k - m] += 0.5 * (1 - ap) * cond[m] / z;
    // b = -1: root edge is -, children ~ Bin(k-1, 1-q) minus.
    for (int m = 0; m <= p.k - 1; ++m) w[p.k - 1 - m] += 0.5 * binomial(p.k - 1, m) * std::pow(1 - p.q, m) * std::pow(p.q, p.k - 1 - m);
    return w;
}

struct LevelEstimate {
    Estimate value;
    bethe::Terms terms;
    int ell = 0;
    std::string method;  // "exact" or "pooled"
    std::size_t samples = 0;
    int batches = 0;
    std::size_t pool_size = 0;
};

struct LevelOptions {
    double exact_budget = 3e8;  // node visits allowed for fresh trees
    int batches = 10;
    std::size_t pool_size = 20000;
    bool force_pooled = false;
};

// Averages of ln z1, ln z2, ln z3 with message sources var(b, rng), clause(b, rng).
template <class VarF, class ClauseF>
bethe::Terms level_terms(const ModelParams& p, std::size_t samples, std::uint64_t seed, VarF&& var, ClauseF&& clause) {
    const int k = p.k;
    const std::size_t n2 = std::max<std::size_t>(2, samples * std::max(1, p.d / k) / (k + 1));
    const std::size_t n3 = std::max<std::size_t>(2, samples * std::max(1, p.d / 2) / 2);
    RunningStats t1, t3m, t3p;
    std::vector<RunningStats> t2(k + 1);
    std::vector<double> buf(p.d);
    for (std::size_t i = 0; i < samples; ++i) {
        Rng r = Rng::stream(seed, 51, i);
        for (int j = 0; j < p.d; ++j) buf[j] = clause(j < p.d / 2 ? 1 : -1, r);
        t1.add(bethe::log_z1(buf));
    }
    buf.resize(k);
    const auto w = clause_label_weights(p);
    for (int s = 0; s <= k; ++s)
        for (std::size_t i = 0; i < n2; ++i) {
            Rng r = Rng::stream(seed, 52, s, i);
            for (int j = 0; j < k; ++j) buf[j] = var(j < s ? 1 : -1, r);
            t2[s].add(bethe::log_z2(p.c, buf));
        }
    for (std::size_t i = 0; i < n3; ++i) {
        Rng r = Rng::stream(seed, 53, i);
        t3m.add(bethe::log_z3(var(1, r), clause(1, r)));
        t3p.add(bethe::log_z3(var(-1, r), clause(-1, r)));
    }
    bethe::Terms t;
    t.z1 = {t1.mean, t1.stderr_()};
    double m2 = 0, v2 = 0;
    for (int s = 0; s <= k; ++s) {
        m2 += w[s] * t2[s].mean;
        v2 += w[s] * w[s] * t2[s].variance() / t2[s].n;
    }
    t.z2 = {m2, std::sqrt(v2)};
    t.z3 = {0.5 * (t3m.mean + t3p.mean), 0.5 * std::sqrt(t3m.variance() / t3m.n + t3p.variance() / t3p.n)};
    return t;
}

inline double exact_cost(const ModelParams& p, int ell, std::size_t samples) {
    double var = 1;
    for (int j = 0; j < ell; ++j) var = 1 + (p.d - 1) * (1 + (p.k - 1) * var);
    double clause = 1 + (p.k - 1) * var;
    return double(samples) * (p.d * clause + double(p.d) * (var + clause) + double(p.d) * var);
}

// Finite-ell Bethe functional: GW' neighbourhoods with the all-plus boundary
// (or leaves drawn from `quad` when given). Small trees are sampled fresh; large
// ones are assembled level by level from pools, in independent batches whose
// spread gives the error bar.
inline LevelEstimate estimate_B_level(const ModelParams& p, int ell, std::size_t samples, const Quad* quad, std::uint64_t seed,
                                      const LevelOptions& opt = {}) {
    require(ell >= 1, "estimate_B_level: ell must be at least 1");
    require(samples >= 2, "estimate_B_level: need at least two samples");
    LevelEstimate e;
    e.ell = ell;
    e.samples = samples;
    StreamSampler s{p, quad};
    if (!opt.force_pooled && exact_cost(p, ell, samples) <= opt.exact_budget) {
        e.method = "exact";
        e.terms = level_terms(
            p, samples, seed, [&](int b, Rng& r) { return s.eta_var(b, ell, r); }, [&](int b, Rng& r) { return s.eta_clause(b, ell, r); });
        e.value = bethe::combine(e.terms, p);
        return e;
    }
    require(opt.batches >= 2 && opt.pool_size >= 2, "estimate_B_level: need at least two batches and pool size two");
    e.method = "pooled";
    e.batches = opt.batches;
    e.pool_size = opt.pool_size;
    const std::size_t per = std::max<std::size_t>(2, samples / opt.batches);
    RunningStats vals, z1, z2, z3;
    for (int bt = 0; bt < opt.batches; ++bt) {
        std::uint64_t bs = mix_key(seed, 1000 + bt);
        // pools[i]: i = 0 for label +1, 1 for label -1
        std::vector<double> C[2], V[2];
        auto idx = [](int b) { return b > 0 ? 0 : 1; };
        for (int L = 0; L <= ell; ++L) {
            if (L >= 1) {
                for (int lab : {1, -1}) {
                    auto& out = V[idx(lab)];
                    std::vector<double> next(opt.pool_size);
                    for (std::size_t i = 0; i < opt.pool_size; ++i) {
                        Rng r = Rng::stream(bs, 60 + idx(lab), L, i);
                        double acc = 0;
                        for (int j = 0; j < p.d - 1; ++j) {
                            int cl = j < p.d / 2 - 1 ? lab : -lab;
                            const auto& src = C[idx(cl)];
                            double l = logit(src[r.index(src.size())]);
                            acc += cl == lab ? l : -l;
                        }
                        next[i] = logistic(acc);
                    }
                    out.swap(next);
                }
            }
            for (int lab : {1, -1}) {
                std::vector<double> next(opt.pool_size);
                for (std::size_t i = 0; i < opt.pool_size; ++i) {
                    Rng r = Rng::stream(bs, 62 + idx(lab), L, i);
                    int m = minus_children(p, lab, r);
                    double prod = 1;
                    for (int j = 0; j < p.k - 1; ++j) {
                        int vl = j < m ? -1 : 1;
                        if (L == 0) {
                            prod *= s.leaf(vl, r);
                        } else {
                            const auto& src = V[idx(vl)];
                            prod *= src[r.index(src.size())];
                        }
                    }
                    next[i] = clause_message(p.c, prod);
                }
                C[idx(lab)].swap(next);
            }
        }
        auto t = level_terms(
            p, per, mix_key(bs, 7), [&](int b, Rng& r) { const auto& v = V[idx(b)]; return v[r.index(v.size())]; },
            [&](int b, Rng& r) { const auto& c = C[idx(b)]; return c[r.index(c.size())]; });
        vals.add(bethe::combine(t, p).value);
        z1.add(t.z1.value);
        z2.add(t.z2.value);
        z3.add(t.z3.value);
    }
    e.value = {vals.mean, vals.stderr_()};
    e.terms = {{z1.mean, z1.stderr_()}, {z2.mean, z2.stderr_()}, {z3.mean, z3.stderr_()}};
    return e;
}

}  // namespace rksat::gwtree

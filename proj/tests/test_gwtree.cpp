#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <sstream>

#include "rksat/bethe.hpp"
#include "rksat/gwtree.hpp"

using namespace rksat;
using namespace rksat::gwtree;
using population::Population;
using population::Quad;

namespace {

// Subtree Gibbs measure by enumeration. Leaves carry prior P(true) = g,
// the planted assignment is all true, and a clause is violated when every
// literal is false. A clause root gets a phantom parent with a uniform prior.
struct Enumerator {
    const DecoratedTree& t;
    const Boundary& b;
    std::vector<std::int32_t> vars, clauses;
    std::vector<int> slot;  // node -> position in vars, -1 if absent
    std::vector<double> prior;

    Enumerator(const DecoratedTree& tr, const Boundary& bd) : t(tr), b(bd), slot(tr.nodes.size(), -1), prior(tr.nodes.size(), 0.5) {
        for (std::size_t j = 0; j < t.leaves.size(); ++j) prior[t.leaves[j]] = b.g[j];
    }

    void collect(std::int32_t i) {
        const Node& n = t.nodes[i];
        if (n.kind == Kind::variable) {
            slot[i] = static_cast<int>(vars.size());
            vars.push_back(i);
        } else {
            clauses.push_back(i);
        }
        for (std::int32_t c = n.first_child; c < n.first_child + n.n_children; ++c) collect(c);
    }

    // P(node true) for a variable root; for a clause root, P(parent literal false).
    double root_probability(std::int32_t root) {
        vars.clear();
        clauses.clear();
        std::fill(slot.begin(), slot.end(), -1);
        collect(root);
        const bool clause_root = t.nodes[root].kind == Kind::clause;
        const int phantom = static_cast<int>(vars.size());
        const int nv = phantom + (clause_root ? 1 : 0);
        EXPECT_LE(nv, 22);
        const double beta = t.params.beta;
        double num = 0, den = 0;
        for (std::uint32_t s = 0; s < (1u << nv); ++s) {
            auto val = [&](std::int32_t x) {
                int pos = slot[x];
                if (pos < 0) pos = phantom;
                return (s >> pos) & 1u;
            };
            double w = 1;
            for (int v = 0; v < phantom; ++v) {
                std::int32_t x = vars[v];
                if (t.nodes[x].n_children == 0) w *= val(x) ? prior[x] : 1 - prior[x];
            }
            for (std::int32_t a : clauses) {
                bool violated = true;
                for_clause_members(t, a, [&](std::int32_t x) {
                    bool truth = val(x);
                    bool lit_false = edge_label(t, a, x) > 0 ? truth : !truth;
                    if (!lit_false) violated = false;
                });
                if (a == root && clause_root) {
                    bool ptrue = (s >> phantom) & 1u;
                    if (!(t.nodes[a].label > 0 ? ptrue : !ptrue)) violated = false;
                }
                if (violated) w *= std::exp(-beta);
            }
            den += w;
            if (clause_root) {
                bool ptrue = (s >> phantom) & 1u;
                if (t.nodes[root].label > 0 ? ptrue : !ptrue) num += w;
            } else if (val(root)) {
                num += w;
            }
        }
        return num / den;
    }
};

Boundary random_boundary(const DecoratedTree& t, std::uint64_t seed) {
    Boundary b{std::vector<double>(t.leaves.size()), "random"};
    Rng r = Rng::stream(seed, 9);
    for (auto& g : b.g) {
        double u = r.uniform();
        g = u < 0.1 ? 0.0 : u > 0.9 ? 1.0 : r.uniform();
    }
    return b;
}

Population collect(std::size_t n, const std::function<double(std::size_t)>& f) {
    Population p;
    p.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) p.samples[i] = f(i);
    return p;
}

double chi_square(const std::vector<double>& counts, const std::vector<double>& probs) {
    double n = 0, x = 0;
    for (double c : counts) n += c;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        double e = n * probs[i];
        x += (counts[i] - e) * (counts[i] - e) / e;
    }
    return x;
}

// Upper 1% points of chi-square with 1..7 degrees of freedom.
const double kChi99[] = {0, 6.635, 9.210, 11.345, 13.277, 15.086, 16.812, 18.475};

}  // namespace

TEST(GwTree, NodeCountsAndLayout) {
    auto p = ModelParams::make(3, 4, 1.0);
    for (auto v : {Variant::gw, Variant::gw_prime, Variant::clause_rooted})
        for (int ell : {1, 2, 3}) {
            auto t = sample_tree(p, ell, v, 5);
            ASSERT_EQ(double(t.nodes.size()), node_count(3, 4, ell, v)) << variant_name(v) << ell;
            for (auto x : t.leaves) EXPECT_EQ(t.nodes[x].depth, t.leaf_depth());
            for (std::size_t i = 0; i < t.nodes.size(); ++i) {
                const Node& n = t.nodes[i];
                if (n.kind != Kind::variable || n.n_children == 0) continue;
                int same = 0;
                for (auto c = n.first_child; c < n.first_child + n.n_children; ++c) same += t.nodes[c].label == n.label;
                if (i == 0 && v == Variant::gw_prime)
                    EXPECT_EQ(n.n_children, 4);
                else
                    EXPECT_EQ(same, 1);
            }
        }
    EXPECT_EQ(sample_tree(p, 0, Variant::gw, 1).nodes.size(), 1u);
    EXPECT_THROW(sample_tree(p, 0, Variant::gw_prime, 1), PreconditionError);
    EXPECT_THROW(sample_tree(ModelParams::make(8, 24, 1.0), 5, Variant::gw, 1), PreconditionError);
}

TEST(GwTree, RootLabelFrequency) {
    auto p = ModelParams::make(4, 10, 3.0);
    const int n = 100000;
    int plus = 0;
    for (int i = 0; i < n; ++i) plus += sample_tree(p, 0, Variant::gw, i).root().label > 0;
    EXPECT_NEAR(double(plus) / n, p.q, 3 / std::sqrt(double(n)));
    EXPECT_EQ(sample_tree(p, 1, Variant::gw_prime, 3).root().label, 1);
}

TEST(GwTree, OffspringChiSquare) {
    for (auto [k, d, beta] : {std::tuple{4, 6, 2.0}, {3, 4, 6.0}}) {
        auto p = ModelParams::make(k, d, beta);
        std::vector<double> cnt[2] = {std::vector<double>(k, 0), std::vector<double>(k, 0)};
        std::size_t clauses = 0;
        for (int i = 0; clauses < 100000; ++i) {
            auto t = sample_tree(p, 1, Variant::gw, i);
            for (const Node& n : t.nodes) {
                if (n.kind != Kind::clause) continue;
                int m = 0;
                for (auto c = n.first_child; c < n.first_child + n.n_children; ++c) m += t.nodes[c].label < 0;
                cnt[n.label > 0 ? 0 : 1][m] += 1;
                ++clauses;
            }
        }
        std::vector<double> law_plus(k), law_minus(k);
        const double ap = all_plus_prob(p);
        double z = 0;
        for (int m = 1; m < k; ++m) z += binomial(k - 1, m) * std::pow(1 - p.q, m) * std::pow(p.q, k - 1 - m);
        law_plus[0] = ap;
        for (int m = 1; m < k; ++m) {
            double b = binomial(k - 1, m) * std::pow(1 - p.q, m) * std::pow(p.q, k - 1 - m);
            law_plus[m] = (1 - ap) * b / z;
            law_minus[m] = b;
        }
        law_minus[0] = std::pow(p.q, k - 1);
        EXPECT_LT(chi_square(cnt[0], law_plus), kChi99[k - 1]) << k;
        EXPECT_LT(chi_square(cnt[1], law_minus), kChi99[k - 1]) << k;
    }
}

TEST(GwTree, TextFormatNestsChildren) {
    auto t = sample_tree(ModelParams::make(3, 2, 1.0), 1, Variant::gw, 2, 1);
    std::ostringstream os;
    write_text(os, t);
    const std::string s = os.str();
    EXPECT_EQ(s.substr(0, 3), "x+\n");
    EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), static_cast<long>(t.nodes.size()));
}

TEST(Bp, MatchesEnumerationAtEveryNode) {
    struct Case { int k, d, ell; Variant v; };
    for (Case cs : {Case{3, 4, 1, Variant::gw}, Case{3, 4, 1, Variant::gw_prime}, Case{3, 4, 1, Variant::clause_rooted},
                    Case{3, 2, 2, Variant::gw}, Case{3, 2, 3, Variant::gw}, Case{3, 2, 2, Variant::clause_rooted},
                    Case{4, 2, 2, Variant::gw}})
        for (double beta : {0.5, 3.0})
            for (std::uint64_t seed = 0; seed < 6; ++seed) {
                auto p = ModelParams::make(cs.k, cs.d, beta);
                auto t = sample_tree(p, cs.ell, cs.v, seed);
                auto b = random_boundary(t, seed);
                auto m = bp_sweep(t, b);
                Enumerator e(t, b);
                for (std::size_t i = 0; i < t.nodes.size(); ++i) {
                    if (t.nodes[i].n_children == 0) continue;
                    double want = e.root_probability(static_cast<std::int32_t>(i));
                    double got = t.nodes[i].kind == Kind::variable ? planted_value(t, m, i) : m.eta[i];
                    ASSERT_NEAR(got, want, 1e-10) << variant_name(cs.v) << " k=" << cs.k << " d=" << cs.d << " node " << i;
                }
            }
}

TEST(Bp, ClauseRatiosWithinBounds) {
    for (double beta : {0.3, 2.0, 9.0}) {
        auto p = ModelParams::make(4, 6, beta);
        for (std::uint64_t s = 0; s < 20; ++s) {
            auto t = sample_tree(p, 2, Variant::gw, s);
            EXPECT_TRUE(clause_ratios_ok(t, bp_sweep(t, random_boundary(t, s))));
            EXPECT_TRUE(clause_ratios_ok(t, bp_sweep(t, all_plus(t))));
        }
    }
}

TEST(Bp, StrongChildrenGiveNearMaximalRatio) {
    for (int k : {4, 8})
        for (double beta : {4.0, 6.0, 10.0}) {
            auto p = ModelParams::make(k, 2, beta);
            auto t = sample_tree(p, 0, Variant::clause_rooted, 3);
            Boundary b{std::vector<double>(t.leaves.size()), "strong"};
            const double eps = std::exp(-k * beta / 2);
            Rng r = Rng::stream(1, 2);
            for (std::size_t j = 0; j < b.g.size(); ++j) {
                double eta = 1 - eps * r.uniform();
                b.g[j] = t.nodes[t.leaves[j]].label > 0 ? eta : 1 - eta;
            }
            double e = bp_sweep(t, b).eta[0];
            EXPECT_GE((1 - e) / e, std::exp(0.99 * beta)) << k << ' ' << beta;
        }
}

TEST(Bp, AllPlusAtTinyBetaIsHalf) {
    auto p = ModelParams::make(4, 6, 1e-9);
    for (int ell : {1, 2}) {
        auto t = sample_tree(p, ell, Variant::gw, ell);
        EXPECT_NEAR(planted_value(t, bp_sweep(t, all_plus(t)), 0), 0.5, 1e-6);
    }
}

TEST(Boundary, LiquidQuadLeavesAreQ) {
    auto p = ModelParams::make(4, 10, 2.0);
    auto t = sample_tree(p, 1, Variant::gw, 4);
    auto m = bp_sweep(t, from_quad(t, population::liquid_quad(p, 1000), 5));
    for (auto x : t.leaves) EXPECT_NEAR(m.eta[x], p.q, 1e-15);
}

TEST(Boundary, HCompliantBadFraction) {
    auto p = ModelParams::make(6, 20, 4.0);
    auto t = sample_tree(p, 1, Variant::gw, 1);
    const double bad = default_bad_prob(6);
    std::size_t n = 0;
    double tot = 0;
    for (int s = 0; s < 40; ++s) {
        tot += h_bad_fraction(t, iid_h_compliant(t, bad, s)) * t.leaves.size();
        n += t.leaves.size();
    }
    EXPECT_NEAR(tot / n, bad, 4 * std::sqrt(bad * (1 - bad) / n));
    EXPECT_EQ(h_bad_fraction(t, all_plus(t)), 0.0);
    // the literal reading flips leaves whose label is +1
    auto plus = std::count_if(t.leaves.begin(), t.leaves.end(), [&](auto x) { return t.nodes[x].label > 0; });
    EXPECT_EQ(h_bad_fraction(t, all_plus(t), HReading::literal), plus / double(t.leaves.size()));
}

// One level of the tree with quad leaves has the law of one population sweep.
TEST(Boundary, RootLawMatchesOneSweep) {
    auto p = ModelParams::make(4, 8, 3.0);
    Quad q = population::polarized_quad(p, 20000);
    for (int i = 0; i < 2; ++i) q = population::step_pair(q, 7);
    Quad next = population::step_pair(q, 8);
    const std::size_t n = 4000;
    for (int b : {1, -1}) {
        auto roots = collect(n, [&](std::size_t i) {
            auto t = sample_tree(p, 1, Variant::gw, mix_key(11, i), b);
            return bp_sweep(t, from_quad(t, q, mix_key(12, i))).eta[0];
        });
        const Population& ref = b > 0 ? next.p_minus : next.p_plus;
        EXPECT_LT(population::w1_distance(roots, ref), 6 / std::sqrt(double(n))) << b;
    }
}

TEST(Trunk, AllZeroBoundaryHasNoLeaves) {
    auto p = ModelParams::make(3, 40, 8.0);
    auto t = sample_tree(p, 1, Variant::gw, 2);
    Boundary z{std::vector<double>(t.leaves.size(), 0.0), "zero"};
    auto W = trunk(t, z);
    for (auto x : t.leaves) EXPECT_FALSE(W[x]);
}

// Greatest set closed under TR0-TR5, by repeated full passes.
std::vector<char> naive_trunk(const DecoratedTree& t, const Boundary& b) {
    std::vector<char> W(t.nodes.size(), 0);
    const double cut = h_cutoff(t.params);
    for (std::size_t j = 0; j < t.leaves.size(); ++j) W[t.leaves[j]] = b.g[j] >= cut;
    for (std::size_t i = 0; i < t.nodes.size(); ++i)
        if (t.nodes[i].kind == Kind::variable && t.nodes[i].n_children > 0) W[i] = 1;
    for (bool changed = true; changed;) {
        changed = false;
        for (std::size_t i = 0; i < t.nodes.size(); ++i) {
            if (!W[i] || t.nodes[i].n_children == 0) continue;
            if (!static_trunk_conditions(t, i) || !dynamic_trunk_conditions(t, i, W)) {
                W[i] = 0;
                changed = true;
            }
        }
    }
    return W;
}

TEST(Trunk, OrderIndependentAndGreatest) {
    for (auto [k, d, beta] : {std::tuple{3, 40, 8.0}, {4, 60, 8.0}, {3, 12, 5.0}})
        for (std::uint64_t s = 0; s < 8; ++s) {
            auto p = ModelParams::make(k, d, beta);
            auto t = sample_tree(p, 1, Variant::gw, s);
            auto b = iid_h_compliant(t, 0.3, s);
            auto W = trunk(t, b);
            for (std::uint64_t o = 1; o < 6; ++o) EXPECT_EQ(trunk(t, b, o), W);
            EXPECT_EQ(naive_trunk(t, b), W);
        }
}

TEST(Trunk, RootInTrunkUnderAllPlus) {
    auto p = ModelParams::make(3, 40, 8.0);
    int in = 0;
    for (int s = 0; s < 50; ++s) {
        auto t = sample_tree(p, 2, Variant::gw, s);
        in += cold_analysis(t, trunk(t, all_plus(t))).root_in_trunk;
    }
    EXPECT_GT(in, 40);
}

// TR1 asks for floor(0.9k) uniquely supported child clauses; at k=8, d=24 the
// expected number is about d 2^-k, so the root essentially never qualifies.
TEST(Trunk, RecordsK8RootFraction) {
    auto p = ModelParams::make(8, 24, 8.0);
    int in = 0;
    for (int s = 0; s < 50; ++s) {
        auto t = sample_tree(p, 2, Variant::gw, s);
        in += cold_analysis(t, trunk(t, all_plus(t))).root_in_trunk;
    }
    RecordProperty("root_in_trunk_of_50", in);
    EXPECT_GE(in, 0);
}

TEST(Contraction, IdenticalBoundariesGiveZero) {
    auto p = ModelParams::make(8, 2, 6.0);
    for (int ell : {3, 6}) {
        auto t = sample_tree(p, ell, Variant::gw, ell);
        auto b = iid_h_compliant(t, default_bad_prob(8), 1);
        EXPECT_EQ(bp_sweep(t, b).eta[0] - bp_sweep(t, b).eta[0], 0.0);
        EXPECT_EQ(bp_sweep(t, all_plus(t)).eta[0] - bp_sweep(t, all_plus(t)).eta[0], 0.0);
    }
}

TEST(Contraction, ReportShape) {
    auto r = contraction_experiment(ModelParams::make(8, 2, 6.0), 3, 200, 4);
    EXPECT_EQ(r.diffs.size(), 200u);
    EXPECT_DOUBLE_EQ(r.threshold, 2.0 / 3);
    for (double x : r.diffs) EXPECT_GE(x, 0);
    if (!std::isnan(r.median_cold) && !std::isnan(r.median_noncold)) EXPECT_LE(r.median_cold, r.median_noncold);
    EXPECT_THROW(contraction_experiment(ModelParams::make(8, 2, 6.0), 3, 50, 4), PreconditionError);
}

TEST(Stream, MatchesExplicitTrees) {
    auto p = ModelParams::make(3, 4, 2.0);
    StreamSampler s{p, nullptr};
    const std::size_t n = 3000;
    for (int b : {1, -1}) {
        auto tree = collect(n, [&](std::size_t i) {
            auto t = sample_tree(p, 2, Variant::gw, mix_key(3, i), b);
            return bp_sweep(t, all_plus(t)).eta[0];
        });
        auto stream = collect(n, [&](std::size_t i) {
            Rng r = Rng::stream(4, i);
            return s.eta_var(b, 2, r);
        });
        EXPECT_LT(population::w1_distance(tree, stream), 6 / std::sqrt(double(n))) << b;
    }
}

TEST(Stream, ClauseLabelLawFromRoot) {
    for (auto [k, d, beta] : {std::tuple{3, 4, 1.0}, {4, 30, 3.0}, {8, 24, 6.0}}) {
        auto p = ModelParams::make(k, d, beta);
        auto a = clause_label_weights(p), b = clause_label_weights_from_root(p);
        double s = 0, plus = 0;
        for (int j = 0; j <= k; ++j) {
            EXPECT_NEAR(a[j], b[j], 1e-12);
            s += b[j];
            plus += j * b[j];
        }
        EXPECT_NEAR(s, 1, 1e-12);
        EXPECT_NEAR(plus / k, 0.5, 1e-12);
    }
}

TEST(Level, TinyBetaIsLn2) {
    auto p = ModelParams::make(4, 6, 1e-9);
    auto e = estimate_B_level(p, 2, 2000, nullptr, 1);
    EXPECT_NEAR(e.value.value, std::log(2.0), std::max(3 * e.value.stderr_, 1e-6));
}

TEST(Level, SmallBetaMatchesClosedForm) {
    auto p = ModelParams::make(4, 10, 0.5);
    auto e = estimate_B_level(p, 3, 20000, nullptr, 2);
    EXPECT_LT(std::abs(e.value.value - closed_form_F(p)), 3 * e.value.stderr_ + 1e-4);
}

TEST(Level, PooledAgreesWithExact) {
    auto p = ModelParams::make(3, 6, 3.0);
    auto ex = estimate_B_level(p, 2, 20000, nullptr, 3);
    LevelOptions o;
    o.force_pooled = true;
    auto po = estimate_B_level(p, 2, 20000, nullptr, 4, o);
    EXPECT_EQ(ex.method, "exact");
    EXPECT_EQ(po.method, "pooled");
    EXPECT_LT(std::abs(ex.value.value - po.value.value), 3 * std::hypot(ex.value.stderr_, po.value.stderr_));
}

// B at level ell uses variable laws after ell sweeps and clause laws after ell+1.
TEST(Level, MatchesPopulationSweeps) {
    auto p = ModelParams::make(4, 12, 3.0);
    const int ell = 2;
    Quad a = population::polarized_quad(p, 40000);
    for (int i = 0; i < ell; ++i) a = population::step_pair(a, 5);
    Quad b = population::step_pair(a, 6);
    Quad mixed = a;
    mixed.phat_minus = b.phat_minus;
    mixed.phat_plus = b.phat_plus;
    auto pop = bethe::estimate_B(mixed, 40000, 7);
    LevelOptions o;
    o.force_pooled = true;
    auto lev = estimate_B_level(p, ell, 40000, nullptr, 8, o);
    EXPECT_LT(std::abs(pop.value.value - lev.value.value), 3 * std::hypot(pop.value.stderr_, lev.value.stderr_));
}

TEST(Level, Preconditions) {
    auto p = ModelParams::make(4, 6, 1.0);
    EXPECT_THROW(estimate_B_level(p, 0, 100, nullptr, 1), PreconditionError);
    EXPECT_THROW(estimate_B_level(p, 2, 1, nullptr, 1), PreconditionError);
}

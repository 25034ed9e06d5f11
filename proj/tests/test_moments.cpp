#include <gtest/gtest.h>

#include <cmath>

#include "rksat/moments.hpp"

using namespace rksat;
using namespace rksat::moments;

namespace {

// Bound function at an arbitrary product tilt; the solved pair should minimise it.
double tilt_bound(const ModelParams& p, double alpha, double h, double hh) { return rate_f2_at(p, alpha, h, hh); }

// ln of a multinomial probability by direct lgamma evaluation.
double log_multinomial(const std::vector<double>& prob, const std::vector<int>& counts) {
    int n = 0;
    double t = 0;
    for (std::size_t j = 0; j < counts.size(); ++j) {
        n += counts[j];
        t += counts[j] * std::log(prob[j]) - std::lgamma(counts[j] + 1.0);
    }
    return t + std::lgamma(n + 1.0);
}

}  // namespace

TEST(FirstMoment, EqualsClosedForm) {
    for (int k = 3; k <= 20; ++k)
        for (double beta : {0.1, 1.0, 3.0, 20.0})
            for (int d : {2, 10, 40, static_cast<int>(d_sat_approx(k)) / 2 * 2}) {
                auto p = ModelParams::make(k, d, beta);
                EXPECT_NEAR(rate_f1(p), closed_form_F(p), 1e-12) << k << ' ' << d << ' ' << beta;
            }
}

TEST(FirstMoment, StatedLargeKExpansionAtSmallDegree) {
    const int k = 18;
    for (double beta : {1.0, 5.0}) {
        auto p = ModelParams::make(k, 2, beta);
        double e = std::log(2.0) - (2.0 / k) * (p.c * std::ldexp(1.0, -k) + std::ldexp(1.0, -1 - 2 * k) - k * std::ldexp(1.0, -1 - 2 * k));
        EXPECT_LE(std::abs(rate_f1(p) - e), std::pow(4.0, -0.9 * k));
    }
}

TEST(FirstMoment, CorrectedLargeKExpansionUpToDsat) {
    const int k = 18;
    int dsat = static_cast<int>(d_sat_approx(k)) / 2 * 2;
    for (double beta : {1.0, 5.0, 20.0})
        for (int d : {2, 1000, dsat}) {
            auto p = ModelParams::make(k, d, beta);
            double c = p.c;
            double e = std::log(2.0) - (double(d) / k) * (c * std::ldexp(1.0, -k) + c * c * std::ldexp(1.0, -1 - 2 * k) + c * c * k * std::ldexp(1.0, -1 - 2 * k));
            EXPECT_LE(std::abs(rate_f1(p) - e), (double(d) / k) * k * k * std::pow(8.0, -k) + 1e-15);
        }
}

TEST(SecondMoment, HalfIsTwiceFirst) {
    for (int k = 3; k <= 12; ++k)
        for (double beta : {0.5, 2.0, 8.0})
            for (int d : {4, 20}) {
                auto p = ModelParams::make(k, d, beta);
                RatePoint r = rate_f2(p, 0.5);
                EXPECT_NEAR(r.f2, 2 * rate_f1(p), 1e-8);
                EXPECT_NEAR(r.hh, r.h * r.h, 1e-10);
                EXPECT_NEAR(r.h, 1 - p.q, 1e-10);
                EXPECT_NEAR(D2(0.5, r.h, r.hh), 2 * D1(0.5, r.h), 1e-12);
            }
}

TEST(SecondMoment, SolvedPairHitsTarget) {
    auto p = ModelParams::make(5, 30, 2.0);
    for (double a = 0.01; a < 1; a += 0.07) {
        HPair s = solve_h_pair(p, a);
        auto g = g_map(p.c, p.k, s.h, s.hh);
        EXPECT_NEAR(g[0], 0.5, 1e-12);
        EXPECT_NEAR(g[1], (1 - a) / 2, 1e-12);
        EXPECT_TRUE(in_domain(s.h, s.hh));
    }
}

TEST(SecondMoment, SolvedPairMinimisesTiltBound) {
    for (int k : {3, 5, 8}) {
        auto p = ModelParams::make(k, 2 * k, 1.5);
        for (double a : {0.1, 0.3, 0.5, 0.8}) {
            RatePoint r = rate_f2(p, a);
            for (double dx : {-1e-3, 1e-3})
                for (double dy : {-1e-3, 0.0, 1e-3}) {
                    if (!in_domain(r.h + dx, r.hh + dy)) continue;
                    EXPECT_GE(tilt_bound(p, a, r.h + dx, r.hh + dy), r.f2 - 1e-12);
                }
            EXPECT_NEAR(tilt_bound(p, a, 0.5, (1 - a) / 2), r.f2_bar, 1e-12);
        }
    }
}

TEST(SecondMoment, ScanPropertiesForLargeK) {
    for (int k : {10, 12}) {
        int d = static_cast<int>(0.9 * d_sat_approx(k)) / 2 * 2;
        auto p = ModelParams::make(k, d, 3.0);
        ScanReport rep = scan_second_moment(p, 200);
        EXPECT_TRUE(rep.f2_below_bar) << rep.max_f2_minus_bar;
        EXPECT_NEAR(rep.f2_half, 2 * rep.f1, 1e-8);
        EXPECT_NEAR(rep.first_difference, 0, 1e-6);
        EXPECT_LT(rep.second_difference, 0);
    }
}

TEST(SecondMoment, RejectsAlphaOutsideUnitInterval) {
    auto p = ModelParams::make(4, 10, 1.0);
    EXPECT_THROW(solve_h_pair(p, 0.0), PreconditionError);
    EXPECT_THROW(solve_h_pair(p, 1.0), PreconditionError);
}

TEST(Multinomial, RateMatchesExactProbability) {
    std::vector<double> prob{0.2, 0.5, 0.3};
    std::vector<double> emp{0.1, 0.6, 0.3};
    double prev_gap = INFINITY;
    for (int n : {100, 1000, 10000, 100000}) {
        std::vector<int> counts{n / 10, 6 * n / 10, 3 * n / 10};
        double exact = log_multinomial(prob, counts) / n;
        double gap = std::abs(exact - multinomial_rate(prob, emp));
        EXPECT_LE(gap, 2 * std::log(double(n)) / n);
        EXPECT_LT(gap, prev_gap);
        prev_gap = gap;
    }
    EXPECT_DOUBLE_EQ(multinomial_rate(prob, prob), 0.0);
}

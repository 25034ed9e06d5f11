#include <gtest/gtest.h>

#include <cmath>

#include "rksat/model.hpp"

using namespace rksat;

namespace {

// Independent Newton iteration in long double started near the asymptotic root.
long double newton_q(int k, long double c) {
    long double q = 0.5L + c * std::ldexp(1.0L, -1 - k);
    for (int i = 0; i < 100; ++i) {
        long double g = 2 * q - 1 - c * std::pow(q, k);
        long double dg = 2 - c * k * std::pow(q, k - 1);
        q -= g / dg;
    }
    return q;
}

// Bethe value at the liquid point assembled from the three expected partition factors.
long double liquid_bethe(int k, int d, long double c, long double q) {
    long double lz1 = std::log(2.0L) + (d / 2.0L) * (std::log(q) + std::log(1 - q));
    long double lz2 = std::log(1 - c * std::pow(q, k));
    long double lz3 = std::log(2 * q * (1 - q));
    return lz1 + (long double)d / k * lz2 - d * lz3;
}

}  // namespace

TEST(SolveQ, MatchesNewtonOracleOnGrid) {
    for (int k = 2; k <= 20; ++k)
        for (double beta : {0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0}) {
            double c = c_of_beta(beta);
            QSolution s = solve_q(k, c);
            EXPECT_LE(s.residual, 1e-12);
            double slope = 2 - c * k * std::pow(s.q, k - 1);
            EXPECT_NEAR(s.q, (double)newton_q(k, c), 2e-15 / std::abs(slope) + 1e-15) << k << " " << beta;
            EXPECT_GE(s.q, 0.5);
            EXPECT_LE(s.q, 1.0);
        }
}

TEST(SolveQ, GoldenRatioAtCEqualsOne) {
    QSolution s = solve_q(3, 1.0);
    EXPECT_NEAR(s.q, (std::sqrt(5.0) - 1) / 2, 1e-14);
}

TEST(SolveQ, MonotoneInBetaAndDecreasingInK) {
    for (int k = 3; k <= 12; ++k) {
        double prev = 0.5;
        for (double beta = 0.1; beta < 20; beta *= 1.5) {
            double q = solve_q(k, c_of_beta(beta)).q;
            EXPECT_GE(q, prev);
            prev = q;
            EXPECT_GE(solve_q(k - 1, c_of_beta(beta)).q, q);
        }
    }
}

TEST(SolveQ, Asymptotics) {
    for (int k = 15; k <= 20; ++k)
        for (double beta : {0.1, 1.0, 5.0, 20.0}) {
            double c = c_of_beta(beta);
            double q = solve_q(k, c).q;
            EXPECT_LE(std::abs(q - 0.5 - c * std::ldexp(1.0, -1 - k)), std::pow(2.0, -1.8 * k));
        }
}

TEST(SolveQ, RejectsBadInputs) {
    EXPECT_THROW(solve_q(1, 0.5), PreconditionError);
    EXPECT_THROW(solve_q(3, 1.5), PreconditionError);
    EXPECT_THROW(solve_q(3, -0.1), PreconditionError);
    EXPECT_THROW(ModelParams::make(3, 5, 1.0), PreconditionError);
    EXPECT_THROW(ModelParams::make(3, 6, -1.0), PreconditionError);
}

TEST(ClosedForm, MatchesLiquidBetheAssembly) {
    for (int k = 3; k <= 10; ++k)
        for (int d : {2, 6, 20, 60})
            for (double beta : {0.3, 1.0, 4.0}) {
                auto p = ModelParams::make(k, d, beta);
                EXPECT_NEAR(closed_form_F(p), (double)liquid_bethe(k, d, p.c, newton_q(k, p.c)), 1e-12);
            }
}

TEST(ClosedForm, SmallBetaLimitIsLog2) {
    auto p = ModelParams::make(4, 10, 1e-9);
    EXPECT_NEAR(closed_form_F(p), std::log(2.0), 1e-8);
}

TEST(ClosedForm, NonincreasingInDAndBeta) {
    for (int k = 3; k <= 6; ++k) {
        double prev = INFINITY;
        for (int d = 2; d <= 60; d += 2) {
            double f = closed_form_F(ModelParams::make(k, d, 2.0));
            EXPECT_LE(f, prev + 1e-15);
            prev = f;
        }
        prev = INFINITY;
        for (double b = 0.1; b < 20; b += 0.7) {
            double f = closed_form_F(ModelParams::make(k, 20, b));
            EXPECT_LE(f, prev + 1e-15);
            prev = f;
        }
    }
}

TEST(Thresholds, DsatAndBetaLower) {
    EXPECT_NEAR(d_sat_approx(4), 4 * (16 * std::log(2.0) - 2 * std::log(2.0)), 1e-12);
    EXPECT_EQ(beta_lower(4), 0.0);
    EXPECT_LT(beta_lower_raw(4), 0.0);
    EXPECT_GT(beta_lower(60), 0.0);
    EXPECT_EQ(clause_count(12, 3, 6), 24);
    EXPECT_THROW(clause_count(9, 4, 6), PreconditionError);
}

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace rksat {

constexpr double kLogClamp = -700.0;

inline double log_add(double a, double b) {
    if (a == -INFINITY) return b;
    if (b == -INFINITY) return a;
    double m = std::max(a, b);
    return m + std::log1p(std::exp(-std::abs(a - b)));
}

inline double log_sum_exp(const std::vector<double>& xs) {
    if (xs.empty()) return -INFINITY;
    double m = *std::max_element(xs.begin(), xs.end());
    if (m == -INFINITY) return m;
    double s = 0;
    for (double x : xs) s += std::exp(x - m);
    return m + std::log(s);
}

// Numerically safe ln(x) with the library-wide clamp for underflowed values.
inline double safe_log(double x) {
    if (x <= 0) return kLogClamp;
    return std::max(std::log(x), kLogClamp);
}

inline double logistic(double t) {
    if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
    double e = std::exp(t);
    return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

inline double xlogx(double x) { return x > 0 ? x * std::log(x) : 0.0; }

// Binary entropy in nats.
inline double entropy2(double a) { return -xlogx(a) - xlogx(1 - a); }

inline double binomial(int n, int r) {
    if (r < 0 || r > n) return 0;
    double b = 1;
    for (int i = 1; i <= r; ++i) b = b * (n - r + i) / i;
    return b;
}

inline double log_binomial(double n, double r) {
    return std::lgamma(n + 1) - std::lgamma(r + 1) - std::lgamma(n - r + 1);
}

// Welford accumulator.
struct RunningStats {
    long long n = 0;
    double mean = 0, m2 = 0;

    void add(double x) {
        ++n;
        double d = x - mean;
        mean += d / n;
        m2 += d * (x - mean);
    }
    double variance() const { return n > 1 ? m2 / (n - 1) : 0.0; }
    double stderr_() const { return n > 1 ? std::sqrt(variance() / n) : INFINITY; }
};

struct Estimate {
    double value = 0;
    double stderr_ = 0;
};

// ln of the sample mean of exp(x_i), with a delta-method standard error.
inline Estimate log_mean_exp(const std::vector<double>& logs) {
    double m = *std::max_element(logs.begin(), logs.end());
    RunningStats s;
    for (double x : logs) s.add(std::exp(x - m));
    Estimate e;
    e.value = m + std::log(s.mean);
    e.stderr_ = s.n > 1 ? std::sqrt(s.variance() / s.n) / s.mean : INFINITY;
    return e;
}

inline Estimate mean_of(const std::vector<double>& xs) {
    RunningStats s;
    for (double x : xs) s.add(x);
    return {s.mean, s.stderr_()};
}

}  // namespace rksat

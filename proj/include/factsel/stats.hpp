#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "factsel/core.hpp"

namespace factsel {
namespace detail {

/// Average ranks (1-based), ties share the mean of their rank range.
inline std::vector<double> average_ranks(const std::vector<double>& x) {
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(x.size());
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
        double r = (double(i) + double(j)) / 2.0 + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[idx[t]] = r;
        i = j + 1;
    }
    return ranks;
}

// Regularized incomplete beta via Lentz's continued fraction.
inline double betacf(double a, double b, double x) {
    constexpr int max_iter = 200;
    constexpr double eps = 3e-14, fpmin = 1e-300;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::fabs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) break;
    }
    return h;
}

inline double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double ln_beta = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                     a * std::log(x) + b * std::log(1.0 - x);
    double front = std::exp(ln_beta);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

/// Two-sided p-value of a Student-t statistic with df degrees of freedom.
inline double t_two_sided_p(double t, double df) {
    double x = df / (df + t * t);
    return incomplete_beta(df / 2.0, 0.5, x);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

} // namespace detail

struct SpearmanResult {
    double rho = 0;
    double p_value = 1;
};

/// Spearman rank correlation with average-rank tie handling; the p-value
/// comes from the t-approximation.
inline SpearmanResult spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw Error("spearman: length mismatch");
    std::size_t n = x.size();
    if (n < 3) throw Error("spearman: need at least 3 points");
    auto constant = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [&](double e) { return e == v[0]; });
    };
    if (constant(x) || constant(y)) throw Error("spearman: constant input vector");

    auto rx = detail::average_ranks(x);
    auto ry = detail::average_ranks(y);
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    SpearmanResult out;
    out.rho = sxy / std::sqrt(sxx * syy);
    if (std::fabs(out.rho) >= 1.0) {
        out.p_value = 0.0;
    } else {
        double df = double(n) - 2.0;
        double t = out.rho * std::sqrt(df / (1.0 - out.rho * out.rho));
        out.p_value = detail::t_two_sided_p(t, df);
    }
    return out;
}

struct WilcoxonResult {
    double statistic = 0; // W+ = sum of ranks of positive differences
    double p_value = 1;
    bool exact = false;
};

/// Wilcoxon signed-rank test for paired samples. Zero differences are
/// dropped; tied absolute differences get average ranks. Small samples
/// (m < 20) use exact enumeration over sign assignments, larger ones the
/// normal approximation with continuity correction.
inline WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a,
                                           const std::vector<double>& b) {
    if (a.size() != b.size()) throw Error("wilcoxon: length mismatch");
    std::vector<double> diffs;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = b[i] - a[i];
        if (d != 0.0) diffs.push_back(d);
    }
    if (diffs.empty()) throw Error("wilcoxon: all differences are zero");
    std::size_t m = diffs.size();
    std::vector<double> abs_d(m);
    for (std::size_t i = 0; i < m; ++i) abs_d[i] = std::fabs(diffs[i]);
    auto ranks = detail::average_ranks(abs_d);

    WilcoxonResult out;
    for (std::size_t i = 0; i < m; ++i)
        if (diffs[i] > 0) out.statistic += ranks[i];

    double mean = double(m) * double(m + 1) / 4.0;
    if (m < 20) {
        out.exact = true;
        // Distribution of W+ over all 2^m sign assignments with these ranks.
        double observed_dev = std::fabs(out.statistic - mean);
        std::uint64_t total = std::uint64_t(1) << m;
        std::uint64_t extreme = 0;
        for (std::uint64_t mask = 0; mask < total; ++mask) {
            double w = 0;
            for (std::size_t i = 0; i < m; ++i)
                if (mask & (std::uint64_t(1) << i)) w += ranks[i];
            if (std::fabs(w - mean) >= observed_dev - 1e-12) ++extreme;
        }
        out.p_value = double(extreme) / double(total);
    } else {
        double var = double(m) * double(m + 1) * double(2 * m + 1) / 24.0;
        double dev = std::fabs(out.statistic - mean);
        double z = (dev - 0.5) / std::sqrt(var); // continuity correction
        out.p_value = 2.0 * (1.0 - detail::normal_cdf(z));
        out.p_value = std::min(1.0, out.p_value);
    }
    return out;
}

} // namespace factsel

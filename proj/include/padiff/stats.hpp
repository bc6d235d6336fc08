#ifndef PADIFF_STATS_HPP
#define PADIFF_STATS_HPP

// Small statistics helpers: rank correlation for the confidence study
// and a paired t-test for method comparisons.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace padiff {

// Average ranks; ties share the mean of their rank range.
inline std::vector<double> ranks(const std::vector<double>& x) {
    size_t n = x.size();
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return x[a] < x[b]; });
    std::vector<double> r(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && x[idx[j + 1]] == x[idx[i]]) ++j;
        double mean_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (size_t k = i; k <= j; ++k) r[idx[k]] = mean_rank;
        i = j + 1;
    }
    return r;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("pearson: need two equal-length series, n >= 2");
    size_t n = x.size();
    double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (size_t i = 0; i < n; ++i) {
        double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0 || syy == 0)
        throw std::invalid_argument("pearson: constant series has no correlation");
    return sxy / std::sqrt(sxx * syy);
}

// Spearman rank correlation: Pearson on the ranks (tie-aware).
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    return pearson(ranks(x), ranks(y));
}

// Continued-fraction regularized incomplete beta I_x(a, b) (Lentz).
inline double incomplete_beta(double a, double b, double x) {
    if (x < 0 || x > 1) throw std::invalid_argument("incomplete_beta: x outside [0,1]");
    if (x == 0) return 0;
    if (x == 1) return 1;
    // use the symmetry that converges fast
    if (x > (a + 1) / (a + b + 2)) return 1.0 - incomplete_beta(b, a, 1.0 - x);

    double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                       a * std::log(x) + b * std::log(1.0 - x);
    const double tiny = 1e-300;
    double f = 1, c = 1, d = 0;
    for (int i = 0; i <= 300; ++i) {
        int m = i / 2;
        double num;
        if (i == 0)
            num = 1.0;
        else if (i % 2 == 0)
            num = m * (b - m) * x / ((a + 2.0 * m - 1) * (a + 2.0 * m));
        else
            num = -(a + m) * (a + b + m) * x / ((a + 2.0 * m) * (a + 2.0 * m + 1));
        d = 1 + num * d;
        if (std::abs(d) < tiny) d = tiny;
        d = 1 / d;
        c = 1 + num / c;
        if (std::abs(c) < tiny) c = tiny;
        double delta = c * d;
        f *= delta;
        if (std::abs(1 - delta) < 1e-12) break;
    }
    return std::exp(log_front) * (f - 1) / a;
}

// Two-sided p-value of t with `df` degrees of freedom.
inline double student_t_p_value(double t, double df) {
    if (df <= 0) throw std::invalid_argument("student_t_p_value: df must be positive");
    double x = df / (df + t * t);
    return incomplete_beta(df / 2.0, 0.5, x);
}

struct PairedTTest {
    double mean_diff = 0;
    double t_statistic = 0;
    double p_value = 1;
    long df = 0;
};

// Two-sided paired t-test on matched series a, b (differences a - b).
inline PairedTTest paired_t_test(const std::vector<double>& a,
                                 const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2)
        throw std::invalid_argument("paired_t_test: need matched series, n >= 2");
    size_t n = a.size();
    double mean = 0;
    for (size_t i = 0; i < n; ++i) mean += a[i] - b[i];
    mean /= n;
    double var = 0;
    for (size_t i = 0; i < n; ++i) {
        double d = a[i] - b[i] - mean;
        var += d * d;
    }
    var /= (n - 1);

    PairedTTest r;
    r.mean_diff = mean;
    r.df = static_cast<long>(n) - 1;
    if (var == 0) {
        r.t_statistic = mean == 0 ? 0 : std::numeric_limits<double>::infinity();
        r.p_value = mean == 0 ? 1 : 0;
        return r;
    }
    r.t_statistic = mean / std::sqrt(var / n);
    r.p_value = student_t_p_value(r.t_statistic, static_cast<double>(r.df));
    return r;
}

}  // namespace padiff

#endif

#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace pdcbell {

inline constexpr double two_pi = 6.28318530717958647692528676655900577;

/// Compensated (Kahan) accumulator for long probability sums.
class KahanSum {
public:
    void add(double x) {
        double y = x - carry_;
        double t = sum_ + y;
        carry_ = (t - sum_) - y;
        sum_ = t;
    }
    double value() const { return sum_; }

private:
    double sum_ = 0.0;
    double carry_ = 0.0;
};

/// log(n!), table-backed for the sizes this library meets.
inline double log_factorial(int n) {
    if (n < 0) throw std::domain_error("log_factorial: negative argument");
    static const std::vector<double> table = [] {
        std::vector<double> t(4097);
        t[0] = 0.0;
        for (std::size_t i = 1; i < t.size(); ++i)
            t[i] = t[i - 1] + std::log(static_cast<double>(i));
        return t;
    }();
    if (n < static_cast<int>(table.size())) return table[static_cast<std::size_t>(n)];
    return std::lgamma(n + 1.0);
}

/// Binomial pmf B(n, t) at j, computed in log space; exact 0/1 indicator
/// at the t = 0 and t = 1 endpoints so lossless paths stay bit-exact.
inline double binomial_pmf(int n, int j, double t) {
    if (j < 0 || j > n) return 0.0;
    if (t <= 0.0) return j == 0 ? 1.0 : 0.0;
    if (t >= 1.0) return j == n ? 1.0 : 0.0;
    double lp = log_factorial(n) - log_factorial(j) - log_factorial(n - j)
              + j * std::log(t) + (n - j) * std::log1p(-t);
    return std::exp(lp);
}

/// One thinning row: pmf[j] = P[Bin(n, t) = j] and inclusive prefix sums.
struct BinomialRow {
    std::vector<double> pmf; // size n + 1
    std::vector<double> cdf; // cdf[j] = sum of pmf[0..j]

    /// P[lo <= Bin <= hi] with clamping; empty range gives 0.
    double range(int lo, int hi) const {
        int n = static_cast<int>(pmf.size()) - 1;
        if (hi > n) hi = n;
        if (lo < 0) lo = 0;
        if (lo > hi) return 0.0;
        return lo == 0 ? cdf[static_cast<std::size_t>(hi)]
                       : cdf[static_cast<std::size_t>(hi)] - cdf[static_cast<std::size_t>(lo - 1)];
    }
};

inline BinomialRow binomial_row(int n, double t) {
    if (n < 0) throw std::domain_error("binomial_row: negative count");
    BinomialRow row;
    row.pmf.resize(static_cast<std::size_t>(n) + 1);
    row.cdf.resize(static_cast<std::size_t>(n) + 1);
    KahanSum acc;
    for (int j = 0; j <= n; ++j) {
        double p = binomial_pmf(n, j, t);
        row.pmf[static_cast<std::size_t>(j)] = p;
        acc.add(p);
        row.cdf[static_cast<std::size_t>(j)] = acc.value();
    }
    return row;
}

/// Nearest integer with halves rounding up (2.5 -> 3).
inline int round_half_up(double x) {
    return static_cast<int>(std::floor(x + 0.5));
}

} // namespace pdcbell

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "numeric.hpp"

namespace pdcbell {

// ---------------------------------------------------------------------------
// Joint photon-count amplitudes for the N-pair state emitted by two
// phase-locked down-converters, analyzed in beam-splitter-rotated modes.
// The state is real in this basis, and every observable depends on the
// analyzer angles only through delta = phi - theta.
// ---------------------------------------------------------------------------

/// Dense (n+1) x (n+1) table of signed amplitudes <m, n-m; m', n-m'|phi_n>.
class AmplitudeTable {
public:
    AmplitudeTable(int n_total, double delta, std::vector<double> data)
        : n_(n_total), delta_(delta), a_(std::move(data)) {
        if (n_ < 0) throw std::domain_error("AmplitudeTable: negative pair count");
        if (a_.size() != size_t(n_ + 1) * size_t(n_ + 1))
            throw std::invalid_argument("AmplitudeTable: data size mismatch");
    }

    int pairs() const { return n_; }
    double delta() const { return delta_; }

    double at(int m, int m_prime) const {
        check(m, m_prime);
        return a_[size_t(m) * size_t(n_ + 1) + size_t(m_prime)];
    }
    double probability(int m, int m_prime) const {
        double v = at(m, m_prime);
        return v * v;
    }

private:
    void check(int m, int m_prime) const {
        if (m < 0 || m > n_ || m_prime < 0 || m_prime > n_)
            throw std::out_of_range("AmplitudeTable: index outside 0..n");
    }
    int n_;
    double delta_;
    std::vector<double> a_;
};

/// Borrowed view of one recursion level; valid only inside the visit callback.
struct AmplitudeView {
    int n_total;
    const double* data;
    int stride;
    double at(int m, int m_prime) const {
        return data[size_t(m) * size_t(stride) + size_t(m_prime)];
    }
};

/// Runs the pair-coupling recursion from 0 up to n_max pairs, invoking
/// visit(n, view) at every level. The recursion adds one photon pair at a
/// time with weights that keep each level exactly normalized, so it stays
/// stable far beyond where the alternating closed-form sum loses digits.
template <class Visit>
void amplitude_scan(int n_max, double delta, Visit&& visit) {
    if (n_max < 0) throw std::domain_error("amplitude_scan: negative pair count");
    const int stride = n_max + 1;
    const double cd = std::cos(delta);
    const double sd = std::sin(delta);
    std::vector<double> prev(size_t(stride) * size_t(stride), 0.0);
    std::vector<double> cur(size_t(stride) * size_t(stride), 0.0);
    prev[0] = 1.0;
    visit(0, AmplitudeView{0, prev.data(), stride});
    for (int n = 1; n <= n_max; ++n) {
        const double pref = 1.0 / std::sqrt(double(n) * double(n + 1));
        for (int m = 0; m <= n; ++m) {
            for (int mp = 0; mp <= n; ++mp) {
                double s = 0.0;
                if (m >= 1 && mp >= 1)
                    s += cd * std::sqrt(double(m) * mp) * prev[size_t(m - 1) * stride + (mp - 1)];
                if (m <= n - 1 && mp <= n - 1)
                    s += cd * std::sqrt(double(n - m) * (n - mp)) * prev[size_t(m) * stride + mp];
                if (m <= n - 1 && mp >= 1)
                    s += sd * std::sqrt(double(n - m) * mp) * prev[size_t(m) * stride + (mp - 1)];
                if (m >= 1 && mp <= n - 1)
                    s -= sd * std::sqrt(double(m) * (n - mp)) * prev[size_t(m - 1) * stride + mp];
                cur[size_t(m) * stride + mp] = pref * s;
            }
        }
        std::swap(prev, cur);
        visit(n, AmplitudeView{n, prev.data(), stride});
    }
}

/// All amplitude tables for 0..n_max pairs at a common delta.
inline std::vector<AmplitudeTable> amplitude_family(int n_max, double delta) {
    std::vector<AmplitudeTable> out;
    out.reserve(size_t(n_max) + 1);
    amplitude_scan(n_max, delta, [&](int n, const AmplitudeView& v) {
        std::vector<double> data(size_t(n + 1) * size_t(n + 1));
        for (int m = 0; m <= n; ++m)
            for (int mp = 0; mp <= n; ++mp)
                data[size_t(m) * size_t(n + 1) + size_t(mp)] = v.at(m, mp);
        out.emplace_back(n, delta, std::move(data));
    });
    return out;
}

inline AmplitudeTable amplitude_table(int n_total, double delta) {
    std::vector<double> data;
    amplitude_scan(n_total, delta, [&](int n, const AmplitudeView& v) {
        if (n != n_total) return;
        data.resize(size_t(n + 1) * size_t(n + 1));
        for (int m = 0; m <= n; ++m)
            for (int mp = 0; mp <= n; ++mp)
                data[size_t(m) * size_t(n + 1) + size_t(mp)] = v.at(m, mp);
    });
    return AmplitudeTable(n_total, delta, std::move(data));
}

/// Signed amplitude for one outcome (m photons at A's +1 port, m' at B's).
inline double joint_amplitude(int n_total, double delta, int m, int m_prime) {
    if (n_total < 0) throw std::domain_error("joint_amplitude: negative pair count");
    if (m < 0 || m > n_total || m_prime < 0 || m_prime > n_total)
        throw std::out_of_range("joint_amplitude: index outside 0..n");
    return amplitude_table(n_total, delta).at(m, m_prime);
}

/// Same amplitude from the explicit alternating finite sum. Exponentially
/// ill-conditioned in n (factorial cancellations); meant as a cross-check
/// for moderate n, not for production evaluation.
inline double joint_amplitude_closed_form(int n_total, double delta, int m, int m_prime) {
    if (n_total < 0) throw std::domain_error("joint_amplitude_closed_form: negative pair count");
    if (m < 0 || m > n_total || m_prime < 0 || m_prime > n_total)
        throw std::out_of_range("joint_amplitude_closed_form: index outside 0..n");
    const double cd = std::cos(delta);
    const double sd = std::sin(delta);
    const int n = n_total;
    double sum = 0.0;
    int p_lo = std::max(0, m + m_prime - n);
    int p_hi = std::min(m, m_prime);
    for (int p = p_lo; p <= p_hi; ++p) {
        int q = n - m - m_prime + p; // +1 pairs passing straight through
        int u = m_prime - p;
        int v = m - p;
        double lg = log_factorial(p) + log_factorial(q) + log_factorial(u) + log_factorial(v);
        double term = std::pow(cd, p + q) * std::pow(sd, u + v) * std::exp(-lg);
        sum += (v % 2 == 0) ? term : -term;
    }
    double lpref = 0.5 * (log_factorial(m) + log_factorial(n - m)
                        + log_factorial(m_prime) + log_factorial(n - m_prime));
    return std::exp(lpref) * sum / std::sqrt(double(n) + 1.0);
}

/// Dense joint probability table P(m, n-m; m', n-m') at fixed delta.
struct ProbabilityTable {
    int n_total = 0;
    double delta = 0.0;
    std::vector<double> p; // (n+1) x (n+1), row index m

    double at(int m, int m_prime) const {
        if (m < 0 || m > n_total || m_prime < 0 || m_prime > n_total)
            throw std::out_of_range("ProbabilityTable: index outside 0..n");
        return p[size_t(m) * size_t(n_total + 1) + size_t(m_prime)];
    }
    double total() const {
        KahanSum s;
        for (double v : p) s.add(v);
        return s.value();
    }
};

inline ProbabilityTable probability_table(int n_total, double delta) {
    AmplitudeTable t = amplitude_table(n_total, delta);
    ProbabilityTable out;
    out.n_total = n_total;
    out.delta = delta;
    out.p.resize(size_t(n_total + 1) * size_t(n_total + 1));
    for (int m = 0; m <= n_total; ++m)
        for (int mp = 0; mp <= n_total; ++mp)
            out.p[size_t(m) * size_t(n_total + 1) + size_t(mp)] = t.probability(m, mp);
    return out;
}

/// A-side marginal P^A(m, n-m): row sums of the joint table.
inline std::vector<double> marginal_table(const ProbabilityTable& table) {
    std::vector<double> out(size_t(table.n_total) + 1, 0.0);
    for (int m = 0; m <= table.n_total; ++m) {
        KahanSum row;
        for (int mp = 0; mp <= table.n_total; ++mp) row.add(table.at(m, mp));
        out[size_t(m)] = row.value();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Independent oracle: expand the generating binomial of the two-amplifier
// state as a polynomial in the rotated creation operators and read Fock
// coefficients off directly. Exponential cost, so it is capped at small n.
// ---------------------------------------------------------------------------

namespace detail {

/// Coefficients of x^i y^(p_plus + p_minus - i) in
/// (ax*x + ay*y)^p_plus * (bx*x + by*y)^p_minus.
inline std::vector<double> expand_two_mode(int p_plus, int p_minus,
                                           double ax, double ay, double bx, double by) {
    std::vector<double> fa(size_t(p_plus) + 1), fb(size_t(p_minus) + 1);
    for (int i = 0; i <= p_plus; ++i) {
        double lc = log_factorial(p_plus) - log_factorial(i) - log_factorial(p_plus - i);
        fa[size_t(i)] = std::exp(lc) * std::pow(ax, i) * std::pow(ay, p_plus - i);
    }
    for (int j = 0; j <= p_minus; ++j) {
        double lc = log_factorial(p_minus) - log_factorial(j) - log_factorial(p_minus - j);
        fb[size_t(j)] = std::exp(lc) * std::pow(bx, j) * std::pow(by, p_minus - j);
    }
    std::vector<double> out(size_t(p_plus + p_minus) + 1, 0.0);
    for (int i = 0; i <= p_plus; ++i)
        for (int j = 0; j <= p_minus; ++j)
            out[size_t(i + j)] += fa[size_t(i)] * fb[size_t(j)];
    return out;
}

} // namespace detail

inline ProbabilityTable brute_force_state_oracle(int n_total, double theta, double phi) {
    if (n_total < 0) throw std::domain_error("brute_force_state_oracle: negative pair count");
    if (n_total > 10)
        throw std::domain_error("brute_force_state_oracle: capped at n = 10");
    const int n = n_total;
    const double ct = std::cos(theta), st = std::sin(theta);
    const double cf = std::cos(phi), sf = std::sin(phi);

    // amplitude(m, m') = sum_p C(n,p) * A_p(m) * B_p(m'), where A_p(m) is the
    // coefficient of (c+)^m (c-)^(n-m) in (cos t c+ - sin t c-)^p
    // (sin t c+ + cos t c-)^(n-p), and B_p likewise with phi.
    std::vector<std::vector<double>> a_coeff(size_t(n) + 1), b_coeff(size_t(n) + 1);
    for (int p = 0; p <= n; ++p) {
        a_coeff[size_t(p)] = detail::expand_two_mode(p, n - p, ct, -st, st, ct);
        b_coeff[size_t(p)] = detail::expand_two_mode(p, n - p, cf, -sf, sf, cf);
    }

    ProbabilityTable out;
    out.n_total = n;
    out.delta = phi - theta;
    out.p.resize(size_t(n + 1) * size_t(n + 1));
    for (int m = 0; m <= n; ++m) {
        for (int mp = 0; mp <= n; ++mp) {
            KahanSum r;
            for (int p = 0; p <= n; ++p) {
                double lc = log_factorial(n) - log_factorial(p) - log_factorial(n - p);
                r.add(std::exp(lc) * a_coeff[size_t(p)][size_t(m)] * b_coeff[size_t(p)][size_t(mp)]);
            }
            // operator monomial -> normalized Fock amplitude
            double lnorm = 0.5 * (log_factorial(m) + log_factorial(n - m)
                                + log_factorial(mp) + log_factorial(n - mp))
                         - log_factorial(n);
            double amp = r.value() * std::exp(lnorm) / std::sqrt(double(n) + 1.0);
            out.p[size_t(m) * size_t(n + 1) + size_t(mp)] = amp * amp;
        }
    }
    return out;
}

/// Angle map onto the standard two-spin singlet: predictions of the N = 1
/// state at analyzer angles (theta, phi) match singlet predictions at
/// (-theta, phi + pi/2).
inline std::pair<double, double> singlet_angle_map(double theta, double phi) {
    return {-theta, phi + 1.57079632679489661923132169163975144};
}

// ---------------------------------------------------------------------------
// Sparse photon-count distributions, the common currency between sources,
// loss channels, and event scoring.
// ---------------------------------------------------------------------------

struct PhotonCounts {
    int m, k, m_prime, k_prime;
};

/// Sparse probability over four detector counts (m, k at A; m', k' at B).
/// tail_mass carries source weight beyond the truncation, never dropped
/// silently.
class JointPhotonDistribution {
public:
    using Key = std::uint64_t;

    static Key key(int m, int k, int m_prime, int k_prime) {
        check_count(m); check_count(k); check_count(m_prime); check_count(k_prime);
        return (Key(std::uint16_t(m)) << 48) | (Key(std::uint16_t(k)) << 32)
             | (Key(std::uint16_t(m_prime)) << 16) | Key(std::uint16_t(k_prime));
    }
    static PhotonCounts counts(Key k) {
        return {int(k >> 48) & 0xffff, int(k >> 32) & 0xffff,
                int(k >> 16) & 0xffff, int(k) & 0xffff};
    }

    void add(int m, int k, int m_prime, int k_prime, double p) {
        cells_[key(m, k, m_prime, k_prime)] += p;
    }
    double at(int m, int k, int m_prime, int k_prime) const {
        auto it = cells_.find(key(m, k, m_prime, k_prime));
        return it == cells_.end() ? 0.0 : it->second;
    }
    const std::map<Key, double>& cells() const { return cells_; }

    double total() const {
        KahanSum s;
        for (const auto& [k, v] : cells_) s.add(v);
        return s.value();
    }

    double tail_mass() const { return tail_mass_; }
    void set_tail_mass(double t) { tail_mass_ = t; }

private:
    static void check_count(int c) {
        if (c < 0 || c > 0xffff)
            throw std::out_of_range("JointPhotonDistribution: count outside 0..65535");
    }
    std::map<Key, double> cells_;
    double tail_mass_ = 0.0;
};

/// Sparse probability over one side's two detector counts (m, k).
class SideDistribution {
public:
    using Key = std::uint32_t;

    static Key key(int m, int k) {
        if (m < 0 || m > 0xffff || k < 0 || k > 0xffff)
            throw std::out_of_range("SideDistribution: count outside 0..65535");
        return (Key(std::uint16_t(m)) << 16) | Key(std::uint16_t(k));
    }
    static std::pair<int, int> counts(Key k) { return {int(k >> 16) & 0xffff, int(k) & 0xffff}; }

    void add(int m, int k, double p) { cells_[key(m, k)] += p; }
    double at(int m, int k) const {
        auto it = cells_.find(key(m, k));
        return it == cells_.end() ? 0.0 : it->second;
    }
    const std::map<Key, double>& cells() const { return cells_; }

    double total() const {
        KahanSum s;
        for (const auto& [k, v] : cells_) s.add(v);
        return s.value();
    }

    double tail_mass() const { return tail_mass_; }
    void set_tail_mass(double t) { tail_mass_ = t; }

private:
    std::map<Key, double> cells_;
    double tail_mass_ = 0.0;
};

/// Four-count distribution of a pure n-pair state: every outcome has
/// k = n - m and k' = n - m'.
inline JointPhotonDistribution joint_photon_distribution(const ProbabilityTable& table) {
    JointPhotonDistribution out;
    const int n = table.n_total;
    for (int m = 0; m <= n; ++m)
        for (int mp = 0; mp <= n; ++mp)
            out.add(m, n - m, mp, n - mp, table.at(m, mp));
    return out;
}

} // namespace pdcbell

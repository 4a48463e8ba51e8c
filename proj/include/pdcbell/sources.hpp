#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "fock.hpp"
#include "numeric.hpp"

namespace pdcbell {

// ---------------------------------------------------------------------------
// Pair-number statistics of the light feeding the analyzers: either an ideal
// fixed-N state, or the output of the two parametric amplifiers with vacuum
// or single-photon-injected input.
// ---------------------------------------------------------------------------

struct IdealSpin {
    int n_total = 1;
};
struct VacuumPDC {
    double gain = 0.5;
};
struct Qiopa { // quantum-injected amplifier, one photon seeded per side
    double gain = 0.5;
};
using SourceModel = std::variant<IdealSpin, VacuumPDC, Qiopa>;

struct PumpParams {
    double c_tilde; // cosh r
    double s_tilde; // sinh r
    double gamma;   // tanh r
};

inline PumpParams pump_params(double r) {
    if (r < 0.0) throw std::domain_error("pump_params: gain must be non-negative");
    return {std::cosh(r), std::sinh(r), std::tanh(r)};
}

/// Hard cap on stored pair numbers; beyond it the remainder lives in
/// tail_mass and support-hungry operations fail loudly.
inline constexpr int weight_cap = 512;

/// Signed amplitudes c_N over total pair number N, truncated with explicit
/// bookkeeping: sum of stored c_N^2 equals 1 - tail_mass by construction.
class WeightDistribution {
public:
    WeightDistribution(std::vector<double> amplitudes, double tail_mass)
        : c_(std::move(amplitudes)), tail_(tail_mass) {
        if (c_.empty()) throw std::invalid_argument("WeightDistribution: empty support");
        if (tail_ < 0.0) throw std::invalid_argument("WeightDistribution: negative tail");
    }

    int n_max() const { return int(c_.size()) - 1; }
    double amplitude(int n) const {
        return (n < 0 || n > n_max()) ? 0.0 : c_[size_t(n)];
    }
    double weight(int n) const {
        double a = amplitude(n);
        return a * a;
    }
    double tail_mass() const { return tail_; }

    double captured() const {
        KahanSum s;
        for (double a : c_) s.add(a * a);
        return s.value();
    }

private:
    std::vector<double> c_;
    double tail_;
};

namespace detail {

/// Rescales raw amplitudes by the total captured+tail mass so that the
/// stored weights plus tail_mass account for exactly 1.
inline WeightDistribution normalize_weights(std::vector<double> c, double tail) {
    KahanSum cap;
    for (double a : c) cap.add(a * a);
    double total = cap.value() + tail;
    if (total <= 0.0) throw std::domain_error("normalize_weights: vanishing norm");
    double scale = 1.0 / std::sqrt(total);
    for (double& a : c) a *= scale;
    return WeightDistribution(std::move(c), tail / total);
}

} // namespace detail

/// Pair-number amplitudes of the two vacuum-input amplifiers:
/// c_N = sqrt(N+1) Gamma^N / Ctilde^2. Truncation uses the exact geometric
/// tail, so tail_mass is the true remainder, not an estimate.
inline WeightDistribution vacuum_weights(double r, double eps = 1e-12) {
    if (eps <= 0.0 || eps >= 1.0) throw std::domain_error("vacuum_weights: eps must lie in (0,1)");
    PumpParams p = pump_params(r);
    const double x = p.gamma * p.gamma;
    const double inv_c4 = 1.0 / std::pow(p.c_tilde, 4);
    std::vector<double> c;
    if (r == 0.0) {
        c.push_back(1.0);
        return detail::normalize_weights(std::move(c), 0.0);
    }
    double tail = 1.0;
    for (int n = 0; n <= weight_cap; ++n) {
        c.push_back(std::sqrt(double(n) + 1.0) * std::pow(p.gamma, n) / (p.c_tilde * p.c_tilde));
        // sum_{M>n} (M+1) x^M in closed form
        double geom = std::pow(x, n + 1) * ((n + 2) * (1.0 - x) + x) / ((1.0 - x) * (1.0 - x));
        tail = geom * inv_c4;
        if (tail < eps) break;
    }
    return detail::normalize_weights(std::move(c), std::max(tail, 0.0));
}

/// Pair-number amplitudes of the injected amplifiers:
/// c_N = sqrt(N+1) Gamma^(N-1) (N - 2 Stilde^2) / (sqrt 2 Ctilde^4),
/// which carries a node at N = 2 sinh^2 r and already sums to unit norm.
inline WeightDistribution qiopa_weights(double r, double eps = 1e-12) {
    if (eps <= 0.0 || eps >= 1.0) throw std::domain_error("qiopa_weights: eps must lie in (0,1)");
    if (r == 0.0)
        throw DegenerateSourceError("qiopa_weights: zero gain leaves the seed photons unamplified");
    PumpParams p = pump_params(r);
    const double b = 2.0 * p.s_tilde * p.s_tilde;
    const double denom = std::sqrt(2.0) * std::pow(p.c_tilde, 4);
    std::vector<double> c;
    KahanSum captured;
    double tail = 1.0;
    for (int n = 0; n <= weight_cap; ++n) {
        double a = std::sqrt(double(n) + 1.0) * std::pow(p.gamma, n - 1) * (double(n) - b) / denom;
        c.push_back(a);
        captured.add(a * a);
        // the raw weights sum to exactly 1, so the remainder is 1 - captured
        tail = std::max(0.0, 1.0 - captured.value());
        if (double(n) > b && tail < eps) break;
    }
    return detail::normalize_weights(std::move(c), tail);
}

inline WeightDistribution source_weights(const SourceModel& source, double eps = 1e-12) {
    return std::visit(
        [&](const auto& s) -> WeightDistribution {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, IdealSpin>) {
                if (s.n_total < 0) throw std::domain_error("IdealSpin: negative pair count");
                std::vector<double> c(size_t(s.n_total) + 1, 0.0);
                c.back() = 1.0;
                return WeightDistribution(std::move(c), 0.0);
            } else if constexpr (std::is_same_v<T, VacuumPDC>) {
                return vacuum_weights(s.gain, eps);
            } else {
                return qiopa_weights(s.gain, eps);
            }
        },
        source);
}

/// Probabilities P(N) = c_N^2 over stored pair numbers.
inline std::vector<double> photon_number_distribution(const WeightDistribution& w) {
    std::vector<double> out(size_t(w.n_max()) + 1);
    for (int n = 0; n <= w.n_max(); ++n) out[size_t(n)] = w.weight(n);
    return out;
}

/// Mean photon flux per side of the vacuum-input amplifier pair, 2 sinh^2 r.
inline double mean_flux(double r) {
    double s = std::sinh(r);
    return 2.0 * s * s;
}

/// The integer flux scale XM used by the high-flux window rules.
inline int nearest_flux_integer(double r) {
    return round_half_up(mean_flux(r));
}

/// Ideal four-count distribution of a pair-number mixture at analyzer
/// separation delta: a weighted stack of pure n-pair tables.
inline JointPhotonDistribution joint_photon_distribution(const WeightDistribution& w, double delta) {
    JointPhotonDistribution out;
    amplitude_scan(w.n_max(), delta, [&](int n, const AmplitudeView& v) {
        double wn = w.weight(n);
        if (wn == 0.0) return;
        for (int m = 0; m <= n; ++m)
            for (int mp = 0; mp <= n; ++mp) {
                double a = v.at(m, mp);
                out.add(m, n - m, mp, n - mp, wn * a * a);
            }
    });
    out.set_tail_mass(w.tail_mass());
    return out;
}

/// One side's ideal count distribution. Within each pure n-pair component
/// the side marginal is uniform over m = 0..n (Schmidt structure of the
/// state), independent of analyzer angle.
inline SideDistribution side_photon_distribution(const WeightDistribution& w) {
    SideDistribution out;
    for (int n = 0; n <= w.n_max(); ++n) {
        double wn = w.weight(n);
        if (wn == 0.0) continue;
        double row = wn / (double(n) + 1.0);
        for (int m = 0; m <= n; ++m) out.add(m, n - m, row);
    }
    out.set_tail_mass(w.tail_mass());
    return out;
}

} // namespace pdcbell

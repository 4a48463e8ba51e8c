#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "fock.hpp"
#include "numeric.hpp"

namespace pdcbell {

// ---------------------------------------------------------------------------
// Detector loss as independent binomial thinning of every photon stream:
// each photon survives with probability T. Applied to count distributions
// axis by axis.
// ---------------------------------------------------------------------------

struct LossChannel {
    double transmission = 1.0;
    /// Cells thinner than this are folded into tail_mass instead of being
    /// stored. 0 keeps the convolution mass-exact (inputs have finite
    /// support, so nothing here is an infinite sum).
    double epsilon = 0.0;
};

inline void validate(const LossChannel& ch) {
    if (!(ch.transmission >= 0.0 && ch.transmission <= 1.0))
        throw std::domain_error("LossChannel: transmission must lie in [0,1]");
    if (ch.epsilon < 0.0)
        throw std::domain_error("LossChannel: epsilon must be non-negative");
}

namespace detail {

/// Cache of thinning rows B(n, T) for n = 0..n_max seen so far. Rows live
/// behind stable pointers so references survive later cache growth.
class ThinningRows {
public:
    explicit ThinningRows(double t) : t_(t) {}
    const BinomialRow& row(int n) {
        if (n >= int(rows_.size())) rows_.resize(size_t(n) + 1);
        auto& slot = rows_[size_t(n)];
        if (!slot) slot = std::make_unique<BinomialRow>(binomial_row(n, t_));
        return *slot;
    }

private:
    double t_;
    std::vector<std::unique_ptr<BinomialRow>> rows_;
};

} // namespace detail

/// Thins all four count axes of an ideal joint distribution.
inline JointPhotonDistribution convolve_joint(const JointPhotonDistribution& ideal,
                                              const LossChannel& channel) {
    validate(channel);
    if (channel.transmission == 1.0 && channel.epsilon == 0.0) return ideal;
    detail::ThinningRows rows(channel.transmission);
    JointPhotonDistribution out;
    KahanSum pruned;
    for (const auto& [key, p] : ideal.cells()) {
        if (p == 0.0) continue;
        PhotonCounts c = JointPhotonDistribution::counts(key);
        const auto& rm = rows.row(c.m);
        const auto& rk = rows.row(c.k);
        const auto& rmp = rows.row(c.m_prime);
        const auto& rkp = rows.row(c.k_prime);
        for (int m = 0; m <= c.m; ++m) {
            double pm = p * rm.pmf[size_t(m)];
            if (pm == 0.0) continue;
            for (int k = 0; k <= c.k; ++k) {
                double pk = pm * rk.pmf[size_t(k)];
                if (pk == 0.0) continue;
                for (int mp = 0; mp <= c.m_prime; ++mp) {
                    double pmp = pk * rmp.pmf[size_t(mp)];
                    if (pmp == 0.0) continue;
                    for (int kp = 0; kp <= c.k_prime; ++kp) {
                        double v = pmp * rkp.pmf[size_t(kp)];
                        if (v == 0.0) continue;
                        if (v < channel.epsilon) {
                            pruned.add(v);
                        } else {
                            out.add(m, k, mp, kp, v);
                        }
                    }
                }
            }
        }
    }
    out.set_tail_mass(ideal.tail_mass() + pruned.value());
    return out;
}

/// Thins both count axes of a one-side distribution.
inline SideDistribution convolve_marginal(const SideDistribution& ideal,
                                          const LossChannel& channel) {
    validate(channel);
    if (channel.transmission == 1.0 && channel.epsilon == 0.0) return ideal;
    detail::ThinningRows rows(channel.transmission);
    SideDistribution out;
    KahanSum pruned;
    for (const auto& [key, p] : ideal.cells()) {
        if (p == 0.0) continue;
        auto [m0, k0] = SideDistribution::counts(key);
        const auto& rm = rows.row(m0);
        const auto& rk = rows.row(k0);
        for (int m = 0; m <= m0; ++m) {
            double pm = p * rm.pmf[size_t(m)];
            if (pm == 0.0) continue;
            for (int k = 0; k <= k0; ++k) {
                double v = pm * rk.pmf[size_t(k)];
                if (v == 0.0) continue;
                if (v < channel.epsilon) {
                    pruned.add(v);
                } else {
                    out.add(m, k, v);
                }
            }
        }
    }
    out.set_tail_mass(ideal.tail_mass() + pruned.value());
    return out;
}

} // namespace pdcbell

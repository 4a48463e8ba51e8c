#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "fock.hpp"
#include "loss.hpp"
#include "numeric.hpp"
#include "sources.hpp"

namespace pdcbell {

// ---------------------------------------------------------------------------
// Dichotomic outcome rules: when does one side's count pattern score +1?
// ---------------------------------------------------------------------------

/// +1 when at least ceil(f * n) of the n photons land in the + port.
struct FractionThreshold {
    double f = 1.0;
    int n_total = 1;
};

/// +1 when all n photons land in the + port (the f = 1 rule).
struct ExactN {
    int n_total = 1;
};

enum class WindowForm {
    text,   // totals in [xm, xm + delta]
    caption // totals in [xm - delta, xm + delta], clamped at 0
};

/// High-flux rule: +1 when the + port sees at least xm photons and the
/// side's total count falls in the acceptance window.
struct Window {
    int xm = 1;
    int delta = 0;
    WindowForm form = WindowForm::text;
};

using OutcomeRule = std::variant<FractionThreshold, ExactN, Window>;

/// The four analyzer settings of a Bell run.
struct AngleConfig {
    double theta;
    double theta_prime;
    double phi;
    double phi_prime;
};

/// One-parameter family used throughout: equally spaced settings
/// theta, theta + 2 psi and phi = theta + psi, theta + 3 psi.
inline AngleConfig angles_from_psi(double theta_base, double psi) {
    return {theta_base, theta_base + 2.0 * psi, theta_base + psi, theta_base + 3.0 * psi};
}

namespace detail {

/// Uniform description of every rule: +1 needs (detected m >= min_plus)
/// and (detected total in [total_lo, total_hi]).
struct RuleSpec {
    int min_plus;
    int total_lo;
    int total_hi;
};

inline int fraction_cutoff(double f, int n) {
    // snap before ceil so exact integer products (0.6 * 5) stay put
    return int(std::ceil(f * double(n) - 1e-9));
}

inline RuleSpec rule_spec(const OutcomeRule& rule) {
    return std::visit(
        [](const auto& r) -> RuleSpec {
            using T = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<T, FractionThreshold>) {
                if (!(r.f >= 0.0 && r.f <= 1.0))
                    throw std::domain_error("FractionThreshold: f must lie in [0,1]");
                if (r.n_total < 0) throw std::domain_error("FractionThreshold: negative target");
                if (r.n_total == 0)
                    throw UndefinedScoreError(
                        "FractionThreshold: target 0 scores every outcome +1; ratio undefined");
                return {fraction_cutoff(r.f, r.n_total), r.n_total, r.n_total};
            } else if constexpr (std::is_same_v<T, ExactN>) {
                if (r.n_total < 0) throw std::domain_error("ExactN: negative target");
                if (r.n_total == 0)
                    throw UndefinedScoreError(
                        "ExactN: target 0 scores every outcome +1; ratio undefined");
                return {r.n_total, r.n_total, r.n_total};
            } else {
                if (r.xm < 1) throw std::domain_error("Window: xm must be at least 1");
                if (r.delta < 0) throw std::domain_error("Window: negative delta");
                int lo = (r.form == WindowForm::caption) ? std::max(0, r.xm - r.delta) : r.xm;
                return {r.xm, lo, r.xm + r.delta};
            }
        },
        rule);
}

/// Per-pair-number event factors under binomial thinning:
///   plus(n, m)  = P[+1 | side emitted m '+' photons of n total]
///   total(n)    = P[detected total lands in the window | n emitted]
/// At T = 1 the thinning rows are exact indicators, so these reduce to the
/// lossless predicates with no special casing.
class EventFactors {
public:
    EventFactors(const RuleSpec& spec, double transmission, int n_max) : spec_(spec) {
        ThinningRows rows(transmission);
        plus_.resize(size_t(n_max) + 1);
        plus_row_sum_.assign(size_t(n_max) + 1, 0.0);
        total_.assign(size_t(n_max) + 1, 0.0);
        for (int n = 0; n <= n_max; ++n) {
            const BinomialRow& rn = rows.row(n);
            total_[size_t(n)] = rn.range(spec.total_lo, spec.total_hi);
            auto& row = plus_[size_t(n)];
            row.assign(size_t(n) + 1, 0.0);
            KahanSum rs;
            for (int m = 0; m <= n; ++m) {
                const int k = n - m;
                const BinomialRow& rm = rows.row(m);
                const BinomialRow& rk = rows.row(k);
                KahanSum acc;
                for (int j = spec.min_plus; j <= m; ++j) {
                    double pj = rm.pmf[size_t(j)];
                    if (pj == 0.0) continue;
                    acc.add(pj * rk.range(spec.total_lo - j, spec.total_hi - j));
                }
                row[size_t(m)] = acc.value();
                rs.add(acc.value());
            }
            plus_row_sum_[size_t(n)] = rs.value();
        }
    }

    double plus(int n, int m) const { return plus_[size_t(n)][size_t(m)]; }
    double plus_row_sum(int n) const { return plus_row_sum_[size_t(n)]; }
    double total(int n) const { return total_[size_t(n)]; }
    const RuleSpec& spec() const { return spec_; }

private:
    RuleSpec spec_;
    std::vector<std::vector<double>> plus_;
    std::vector<double> plus_row_sum_;
    std::vector<double> total_;
};

/// P[+1 at A and +1 at B] for analyzer separation delta.
inline double joint_event(const WeightDistribution& w, const EventFactors& f,
                          int n_used, double delta) {
    KahanSum acc;
    amplitude_scan(n_used, delta, [&](int n, const AmplitudeView& v) {
        if (n < f.spec().total_lo) return;
        double wn = w.weight(n);
        if (wn == 0.0) return;
        KahanSum local;
        for (int m = 0; m <= n; ++m) {
            double fa = f.plus(n, m);
            if (fa == 0.0) continue;
            for (int mp = 0; mp <= n; ++mp) {
                double fb = f.plus(n, mp);
                if (fb == 0.0) continue;
                double a = v.at(m, mp);
                local.add(fa * fb * a * a);
            }
        }
        acc.add(wn * local.value());
    });
    return acc.value();
}

/// P[+1 at one side], optionally jointly with the other side's total
/// landing in the window. Within each n-pair component the side marginal
/// is uniform over m, so no amplitude table is needed.
inline double side_event(const WeightDistribution& w, const EventFactors& f,
                         int n_used, bool with_other_total) {
    KahanSum acc;
    for (int n = 0; n <= n_used; ++n) {
        double wn = w.weight(n);
        if (wn == 0.0 || n < f.spec().total_lo) continue;
        double v = wn * f.plus_row_sum(n) / (double(n) + 1.0);
        if (with_other_total) v *= f.total(n);
        acc.add(v);
    }
    return acc.value();
}

/// Pair numbers worth visiting: lossless runs cannot promote totals above
/// the window, so support past total_hi contributes nothing.
inline int used_pairs(const WeightDistribution& w, const RuleSpec& spec, double transmission) {
    if (transmission == 1.0) return std::min(w.n_max(), spec.total_hi);
    return w.n_max();
}

/// Shared guard: rules whose window starts beyond the stored support can
/// only be satisfied by truncated-away components.
inline void check_support(const WeightDistribution& w, const RuleSpec& spec) {
    if (spec.total_lo > w.n_max() && w.tail_mass() > 0.0)
        throw TruncationError(
            "rule needs pair numbers beyond the truncated weight support; "
            "tighten eps or lower the rule target");
}

} // namespace detail

enum class ProbabilityKind { joint, marginal_a, marginal_b, one_sided_a, one_sided_b };

/// Probability of the selected +1 event class at analyzer angles
/// (theta at A, phi at B) under the given source and loss channel.
inline double event_probability(const SourceModel& source, const OutcomeRule& rule,
                                double theta, double phi, const LossChannel& channel = {},
                                ProbabilityKind kind = ProbabilityKind::joint,
                                double eps = 1e-12) {
    validate(channel);
    WeightDistribution w = source_weights(source, eps);
    detail::RuleSpec spec = detail::rule_spec(rule);
    detail::check_support(w, spec);
    if (spec.total_lo > w.n_max()) return 0.0;
    int n_used = detail::used_pairs(w, spec, channel.transmission);
    detail::EventFactors factors(spec, channel.transmission, n_used);
    switch (kind) {
    case ProbabilityKind::joint:
        return detail::joint_event(w, factors, n_used, phi - theta);
    case ProbabilityKind::marginal_a:
    case ProbabilityKind::marginal_b:
        return detail::side_event(w, factors, n_used, false);
    default:
        return detail::side_event(w, factors, n_used, true);
    }
}

/// Every probability feeding the two Bell ratios at one angle configuration.
struct BellProbabilities {
    double joint_theta_phi;
    double joint_theta_phi_prime;
    double joint_theta_prime_phi;
    double joint_theta_prime_phi_prime;
    double marginal_a_theta_prime;
    double marginal_b_phi;
    double one_sided_a_theta_prime; // +1 at A and B's total inside the window
    double one_sided_b_phi;         // +1 at B and A's total inside the window
};

inline BellProbabilities bell_probabilities(const SourceModel& source, const OutcomeRule& rule,
                                            const AngleConfig& angles,
                                            const LossChannel& channel = {},
                                            double eps = 1e-12) {
    validate(channel);
    WeightDistribution w = source_weights(source, eps);
    detail::RuleSpec spec = detail::rule_spec(rule);
    detail::check_support(w, spec);
    BellProbabilities out{};
    if (spec.total_lo > w.n_max()) return out;
    int n_used = detail::used_pairs(w, spec, channel.transmission);
    detail::EventFactors factors(spec, channel.transmission, n_used);

    // joints depend on delta only through |delta| mod pi; dedupe repeats
    std::map<double, double> memo;
    auto joint = [&](double a, double b) {
        double d = b - a;
        double canon = std::fabs(std::remainder(d, 3.14159265358979323846264338327950288));
        auto it = memo.find(canon);
        if (it != memo.end()) return it->second;
        double v = detail::joint_event(w, factors, n_used, canon);
        memo.emplace(canon, v);
        return v;
    };
    out.joint_theta_phi = joint(angles.theta, angles.phi);
    out.joint_theta_phi_prime = joint(angles.theta, angles.phi_prime);
    out.joint_theta_prime_phi = joint(angles.theta_prime, angles.phi);
    out.joint_theta_prime_phi_prime = joint(angles.theta_prime, angles.phi_prime);

    double marg = detail::side_event(w, factors, n_used, false);
    double one = detail::side_event(w, factors, n_used, true);
    out.marginal_a_theta_prime = marg;
    out.marginal_b_phi = marg;
    out.one_sided_a_theta_prime = one;
    out.one_sided_b_phi = one;
    return out;
}

/// Ratio form of the strong inequality; classical sources obey S <= 1.
inline double strong_s(const BellProbabilities& p) {
    double denom = p.marginal_a_theta_prime + p.marginal_b_phi;
    if (denom <= 0.0)
        throw UndefinedScoreError("strong score: no single-side +1 events; ratio undefined");
    return (p.joint_theta_phi - p.joint_theta_phi_prime + p.joint_theta_prime_phi
            + p.joint_theta_prime_phi_prime)
           / denom;
}

/// Weak form: normalizes by +1 events accompanied by an in-window total on
/// the opposite side, which cancels the loss scaling of the numerator.
inline double weak_s(const BellProbabilities& p) {
    double denom = p.one_sided_a_theta_prime + p.one_sided_b_phi;
    if (denom <= 0.0)
        throw UndefinedScoreError("weak score: no flagged single-side events; ratio undefined");
    return (p.joint_theta_phi - p.joint_theta_phi_prime + p.joint_theta_prime_phi
            + p.joint_theta_prime_phi_prime)
           / denom;
}

enum class Objective { strong, weak };

struct OptimizeResult {
    double psi;
    double score;
};

/// Deterministic maximizer of S over the psi family: full-period grid scan
/// (first strict improvement wins) followed by golden-section refinement.
inline OptimizeResult optimize_psi(const SourceModel& source, const OutcomeRule& rule,
                                   const LossChannel& channel = {},
                                   Objective objective = Objective::strong,
                                   double grid_step = two_pi / 4096.0,
                                   double refine_tol = 1e-8, double eps = 1e-12,
                                   double theta_base = 0.0) {
    validate(channel);
    if (!(grid_step > 0.0 && grid_step < two_pi))
        throw std::domain_error("optimize_psi: grid step must lie in (0, 2 pi)");
    if (refine_tol <= 0.0) throw std::domain_error("optimize_psi: refine tolerance must be positive");
    WeightDistribution w = source_weights(source, eps);
    detail::RuleSpec spec = detail::rule_spec(rule);
    detail::check_support(w, spec);
    if (spec.total_lo > w.n_max())
        throw UndefinedScoreError("optimize_psi: rule has no support under this source");
    int n_used = detail::used_pairs(w, spec, channel.transmission);
    detail::EventFactors factors(spec, channel.transmission, n_used);

    double side = detail::side_event(w, factors, n_used, objective == Objective::weak);
    double denom = side + side;
    if (denom <= 0.0)
        throw UndefinedScoreError("optimize_psi: normalizing events have zero probability");

    auto score = [&](double psi) {
        AngleConfig a = angles_from_psi(theta_base, psi);
        std::map<double, double> memo;
        auto joint = [&](double lhs, double rhs) {
            double canon = std::fabs(std::remainder(rhs - lhs, 3.14159265358979323846264338327950288));
            auto it = memo.find(canon);
            if (it != memo.end()) return it->second;
            double v = detail::joint_event(w, factors, n_used, canon);
            memo.emplace(canon, v);
            return v;
        };
        double num = joint(a.theta, a.phi) - joint(a.theta, a.phi_prime)
                   + joint(a.theta_prime, a.phi) + joint(a.theta_prime, a.phi_prime);
        return num / denom;
    };

    const int n_grid = std::max(1, int(std::llround(two_pi / grid_step)));
    double best_psi = 0.0;
    double best = score(0.0);
    for (int k = 1; k < n_grid; ++k) {
        double psi = two_pi * double(k) / double(n_grid);
        double s = score(psi);
        if (s > best) {
            best = s;
            best_psi = psi;
        }
    }

    double h = two_pi / double(n_grid);
    double a = best_psi - h;
    double b = best_psi + h;
    const double inv_gold = 0.61803398874989484820458683436563812;
    double c = b - inv_gold * (b - a);
    double d = a + inv_gold * (b - a);
    double fc = score(c);
    double fd = score(d);
    while (b - a > refine_tol) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_gold * (b - a);
            fc = score(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_gold * (b - a);
            fd = score(d);
        }
    }
    double mid = 0.5 * (a + b);
    double smid = score(mid);
    if (smid >= best) return {mid, smid};
    return {best_psi, best};
}

/// Smallest transmission that still violates the strong inequality at the
/// given psi, found by bisecting S(T) = 1. Transmissions where the score is
/// undefined count as non-violating.
inline double critical_transmission(const SourceModel& source, const OutcomeRule& rule,
                                    double psi, double tol = 1e-6, double eps = 1e-12,
                                    double theta_base = 0.0) {
    if (tol <= 0.0) throw std::domain_error("critical_transmission: tolerance must be positive");
    AngleConfig angles = angles_from_psi(theta_base, psi);
    auto excess = [&](double t) {
        try {
            return strong_s(bell_probabilities(source, rule, angles, LossChannel{t, 0.0}, eps)) - 1.0;
        } catch (const UndefinedScoreError&) {
            return -1.0;
        }
    };
    double top = excess(1.0);
    if (top <= 0.0)
        throw NoViolationError("critical_transmission: no violation even at unit transmission");
    double lo = 0.25;
    while (excess(lo) >= 0.0) {
        lo *= 0.5;
        if (lo < 1e-12)
            throw std::runtime_error("critical_transmission: violation persists to T = 0");
    }
    double hi = 1.0;
    while (hi - lo > tol) {
        double mid = 0.5 * (lo + hi);
        if (excess(mid) >= 0.0)
            hi = mid;
        else
            lo = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace pdcbell

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "pdcbell/bell.hpp"

using namespace pdcbell;

namespace {
constexpr double pi = 3.14159265358979323846;

// hand-derived score for the all-photons rule on an ideal n-pair state
double spin_score(int n, double psi) {
    return (3.0 * std::pow(std::cos(psi), 2 * n) - std::pow(std::cos(3.0 * psi), 2 * n)) / 2.0;
}

double strong_at(const SourceModel& src, const OutcomeRule& rule, double psi, double t = 1.0) {
    return strong_s(bell_probabilities(src, rule, angles_from_psi(0.0, psi), LossChannel{t, 0.0}));
}

double weak_at(const SourceModel& src, const OutcomeRule& rule, double psi, double t = 1.0) {
    return weak_s(bell_probabilities(src, rule, angles_from_psi(0.0, psi), LossChannel{t, 0.0}));
}

struct PipelineProbs {
    double joint, marginal_a, one_sided_a;
};

// Independent evaluation path: build the full four-count distribution,
// convolve it with the channel, and sum predicate cells directly.
PipelineProbs pipeline_probs(const WeightDistribution& w, const OutcomeRule& rule, double delta,
                             double t) {
    detail::RuleSpec spec = detail::rule_spec(rule);
    JointPhotonDistribution lossy =
        convolve_joint(joint_photon_distribution(w, delta), LossChannel{t, 0.0});
    auto plus = [&](int m, int k) {
        return m >= spec.min_plus && m + k >= spec.total_lo && m + k <= spec.total_hi;
    };
    auto in_window = [&](int m, int k) {
        return m + k >= spec.total_lo && m + k <= spec.total_hi;
    };
    KahanSum joint, marg, one;
    for (const auto& [key, p] : lossy.cells()) {
        PhotonCounts c = JointPhotonDistribution::counts(key);
        bool a = plus(c.m, c.k);
        if (!a) continue;
        marg.add(p);
        if (plus(c.m_prime, c.k_prime)) joint.add(p);
        if (in_window(c.m_prime, c.k_prime)) one.add(p);
    }
    return {joint.value(), marg.value(), one.value()};
}
} // namespace

TEST_CASE("all-photons scores match the trigonometric closed form", "[bell]") {
    for (int n = 1; n <= 6; ++n) {
        OutcomeRule rule = ExactN{n};
        for (int k = 0; k < 12; ++k) {
            double psi = 0.05 + k * 0.26;
            CHECK(strong_at(IdealSpin{n}, rule, psi)
                  == Catch::Approx(spin_score(n, psi)).margin(1e-12));
        }
    }
}

TEST_CASE("full-fraction and all-photons rules are the same rule", "[bell]") {
    for (int n : {1, 3, 5}) {
        double a = strong_at(IdealSpin{n}, FractionThreshold{1.0, n}, 0.31);
        double b = strong_at(IdealSpin{n}, ExactN{n}, 0.31);
        CHECK(a == b);
    }
}

TEST_CASE("fraction cutoffs snap exact products and round partial ones up", "[bell]") {
    CHECK(detail::fraction_cutoff(0.6, 5) == 3);
    CHECK(detail::fraction_cutoff(0.61, 5) == 4);
    CHECK(detail::fraction_cutoff(0.5, 4) == 2);
    CHECK(detail::fraction_cutoff(1.0, 7) == 7);
    CHECK(detail::fraction_cutoff(0.0, 7) == 0);
    CHECK(detail::fraction_cutoff(0.7, 10) == 7);
    // fractions inside one cutoff class give identical scores
    CHECK(strong_at(IdealSpin{5}, FractionThreshold{0.41, 5}, 0.27)
          == strong_at(IdealSpin{5}, FractionThreshold{0.6, 5}, 0.27));
}

TEST_CASE("window rule bounds follow the chosen convention", "[bell]") {
    detail::RuleSpec text = detail::rule_spec(Window{2, 1, WindowForm::text});
    CHECK(text.min_plus == 2);
    CHECK(text.total_lo == 2);
    CHECK(text.total_hi == 3);
    detail::RuleSpec cap = detail::rule_spec(Window{2, 1, WindowForm::caption});
    CHECK(cap.min_plus == 2);
    CHECK(cap.total_lo == 1);
    CHECK(cap.total_hi == 3);
    detail::RuleSpec clamped = detail::rule_spec(Window{1, 3, WindowForm::caption});
    CHECK(clamped.total_lo == 0);
    CHECK_THROWS_AS(detail::rule_spec(Window{0, 1, WindowForm::text}), std::domain_error);
    CHECK_THROWS_AS(detail::rule_spec(Window{2, -1, WindowForm::text}), std::domain_error);
}

TEST_CASE("degenerate rule targets are rejected as unscorable", "[bell]") {
    CHECK_THROWS_AS(detail::rule_spec(ExactN{0}), UndefinedScoreError);
    CHECK_THROWS_AS(detail::rule_spec(FractionThreshold{0.5, 0}), UndefinedScoreError);
    CHECK_THROWS_AS(strong_at(IdealSpin{0}, ExactN{0}, 0.3), UndefinedScoreError);
    CHECK_THROWS_AS(detail::rule_spec(FractionThreshold{1.2, 3}), std::domain_error);
}

TEST_CASE("angle family spaces the four settings by psi", "[bell]") {
    AngleConfig a = angles_from_psi(0.1, 0.3);
    CHECK(a.theta == Catch::Approx(0.1));
    CHECK(a.phi == Catch::Approx(0.4));
    CHECK(a.theta_prime == Catch::Approx(0.7));
    CHECK(a.phi_prime == Catch::Approx(1.0));
}

TEST_CASE("scores do not depend on the base angle", "[bell]") {
    OutcomeRule rule = ExactN{2};
    BellProbabilities p0 = bell_probabilities(VacuumPDC{0.5}, rule, angles_from_psi(0.0, 0.27));
    BellProbabilities p1 = bell_probabilities(VacuumPDC{0.5}, rule, angles_from_psi(0.9, 0.27));
    CHECK(strong_s(p0) == Catch::Approx(strong_s(p1)).margin(1e-12));
    CHECK(weak_s(p0) == Catch::Approx(weak_s(p1)).margin(1e-12));
}

TEST_CASE("event probabilities agree with the explicit distribution pipeline", "[bell]") {
    struct Cfg {
        SourceModel src;
        OutcomeRule rule;
        double delta;
        double t;
    };
    std::vector<Cfg> cfgs = {
        {VacuumPDC{0.5}, ExactN{2}, 0.5, 0.85},
        {VacuumPDC{0.5}, Window{1, 1, WindowForm::text}, 1.2, 0.75},
        {VacuumPDC{0.5}, Window{2, 1, WindowForm::caption}, 0.4, 0.9},
        {IdealSpin{3}, FractionThreshold{0.6, 3}, 0.9, 0.8},
        {Qiopa{0.6}, ExactN{2}, 0.7, 0.7},
    };
    for (const Cfg& cfg : cfgs) {
        WeightDistribution w = source_weights(cfg.src);
        PipelineProbs ref = pipeline_probs(w, cfg.rule, cfg.delta, cfg.t);
        LossChannel ch{cfg.t, 0.0};
        double joint =
            event_probability(cfg.src, cfg.rule, 0.0, cfg.delta, ch, ProbabilityKind::joint);
        double marg =
            event_probability(cfg.src, cfg.rule, 0.0, cfg.delta, ch, ProbabilityKind::marginal_a);
        double one =
            event_probability(cfg.src, cfg.rule, 0.0, cfg.delta, ch, ProbabilityKind::one_sided_a);
        CHECK(joint == Catch::Approx(ref.joint).margin(1e-12));
        CHECK(marg == Catch::Approx(ref.marginal_a).margin(1e-12));
        CHECK(one == Catch::Approx(ref.one_sided_a).margin(1e-12));
    }
}

TEST_CASE("assembled probabilities match individual event calls", "[bell]") {
    SourceModel src = VacuumPDC{0.5};
    OutcomeRule rule = ExactN{2};
    LossChannel ch{0.8, 0.0};
    AngleConfig a = angles_from_psi(0.0, 0.27);
    BellProbabilities p = bell_probabilities(src, rule, a, ch);
    CHECK(p.joint_theta_phi
          == Catch::Approx(event_probability(src, rule, a.theta, a.phi, ch)).margin(1e-14));
    CHECK(p.joint_theta_phi_prime
          == Catch::Approx(event_probability(src, rule, a.theta, a.phi_prime, ch)).margin(1e-14));
    CHECK(p.joint_theta_prime_phi
          == Catch::Approx(event_probability(src, rule, a.theta_prime, a.phi, ch)).margin(1e-14));
    CHECK(p.marginal_a_theta_prime == p.marginal_b_phi);
    CHECK(p.one_sided_a_theta_prime
          == Catch::Approx(event_probability(src, rule, a.theta_prime, 0.0, ch,
                                             ProbabilityKind::one_sided_a))
                 .margin(1e-14));
}

TEST_CASE("lossless weak and strong scores coincide", "[bell]") {
    struct Cfg {
        SourceModel src;
        OutcomeRule rule;
    };
    std::vector<Cfg> cfgs = {
        {IdealSpin{3}, FractionThreshold{0.7, 3}},
        {VacuumPDC{0.5}, ExactN{2}},
        {VacuumPDC{0.9}, Window{2, 1, WindowForm::text}},
        {Qiopa{0.7}, ExactN{3}},
    };
    for (const Cfg& cfg : cfgs) {
        BellProbabilities p = bell_probabilities(cfg.src, cfg.rule, angles_from_psi(0.0, 0.24));
        CHECK(std::fabs(strong_s(p) - weak_s(p)) < 1e-12);
    }
}

TEST_CASE("lossless exact-count scores ignore the pair-number mixture", "[bell]") {
    for (double psi : {0.15, 0.27, 0.8}) {
        double spin = strong_at(IdealSpin{2}, ExactN{2}, psi);
        CHECK(strong_at(VacuumPDC{0.5}, ExactN{2}, psi) == Catch::Approx(spin).margin(1e-12));
        CHECK(strong_at(Qiopa{0.5}, ExactN{2}, psi) == Catch::Approx(spin).margin(1e-12));
    }
    // loss breaks the equivalence: higher pair numbers feed down into the rule
    CHECK(std::fabs(strong_at(VacuumPDC{0.5}, ExactN{2}, 0.2693889, 0.8)
                    - strong_at(IdealSpin{2}, ExactN{2}, 0.2693889, 0.8))
          > 1e-3);
}

TEST_CASE("loss rescales ideal-spin scores by transmission to the pair count", "[bell]") {
    for (int n : {1, 2, 3, 4}) {
        OutcomeRule rule = ExactN{n};
        double psi = 0.26;
        double s1 = strong_at(IdealSpin{n}, rule, psi, 1.0);
        for (double t : {0.5, 0.9}) {
            double st = strong_at(IdealSpin{n}, rule, psi, t);
            CHECK(std::fabs(st - std::pow(t, n) * s1) < 1e-10);
        }
    }
}

TEST_CASE("weak ideal-spin scores are transmission independent", "[bell]") {
    for (int n : {1, 2, 3}) {
        OutcomeRule rule = ExactN{n};
        double base = weak_at(IdealSpin{n}, rule, 0.26, 1.0);
        for (double t : {0.5, 0.8}) {
            CHECK(std::fabs(weak_at(IdealSpin{n}, rule, 0.26, t) - base) < 1e-10);
        }
    }
}

TEST_CASE("under loss the weak score dominates and degrades slower", "[bell]") {
    SourceModel src = VacuumPDC{0.5};
    OutcomeRule rule = ExactN{2};
    double psi = optimize_psi(src, rule).psi;
    double prev_weak = 2.0;
    for (double t : {1.0, 0.9, 0.8, 0.7}) {
        double ss = strong_at(src, rule, psi, t);
        double sw = weak_at(src, rule, psi, t);
        CHECK(sw >= ss - 1e-12);
        CHECK(sw <= prev_weak + 1e-12);
        prev_weak = sw;
    }
    CHECK(weak_at(src, rule, psi, 0.8) > 1.0);
}

TEST_CASE("optimizer finds the known two-pair maximum", "[bell]") {
    OptimizeResult best = optimize_psi(IdealSpin{2}, ExactN{2});
    CHECK(best.score == Catch::Approx(1.1811516506).margin(1e-8));
    CHECK(strong_at(IdealSpin{2}, ExactN{2}, best.psi)
          == Catch::Approx(best.score).margin(1e-12));

    OptimizeResult one = optimize_psi(IdealSpin{1}, ExactN{1});
    CHECK(one.score == Catch::Approx(0.5 * (1.0 + std::sqrt(2.0))).margin(1e-9));
}

TEST_CASE("optimizer is deterministic and grid-robust", "[bell]") {
    OptimizeResult a = optimize_psi(IdealSpin{2}, ExactN{2});
    OptimizeResult b = optimize_psi(IdealSpin{2}, ExactN{2});
    CHECK(a.psi == b.psi);
    CHECK(a.score == b.score);
    OptimizeResult coarse =
        optimize_psi(IdealSpin{2}, ExactN{2}, LossChannel{}, Objective::strong, two_pi / 512.0);
    CHECK(coarse.score == Catch::Approx(a.score).margin(1e-6));
}

TEST_CASE("optimized score rises with the threshold fraction", "[bell]") {
    std::vector<double> scores;
    for (double f : {0.5, 0.6, 0.7, 0.8, 0.9, 1.0})
        scores.push_back(optimize_psi(IdealSpin{4}, FractionThreshold{f, 4}).score);
    for (size_t i = 0; i + 1 < scores.size(); ++i) CHECK(scores[i] <= scores[i + 1] + 1e-12);
    CHECK(scores.front() == Catch::Approx(1.05732163353).margin(1e-6));
    CHECK(scores.back() == Catch::Approx(1.17103434089).margin(1e-6));
}

TEST_CASE("half-fraction violations fade as the pair count grows", "[bell]") {
    double s10 = optimize_psi(IdealSpin{10}, FractionThreshold{0.5, 10}).score;
    double s20 = optimize_psi(IdealSpin{20}, FractionThreshold{0.5, 20}).score;
    double s40 = optimize_psi(IdealSpin{40}, FractionThreshold{0.5, 40}).score;
    CHECK(s10 > s20);
    CHECK(s20 > s40);
    CHECK(s40 > 1.0);
    CHECK(s10 == Catch::Approx(1.02804704).margin(1e-5));
    CHECK(s20 == Catch::Approx(1.01523786).margin(1e-5));
    CHECK(s40 == Catch::Approx(1.00797297).margin(1e-5));
}

TEST_CASE("complementary cutoffs are tied by an affine identity", "[bell]") {
    // with a = (n+1-c)/(n+1): S(n+1-c) = (1 - 2a + a S(c)) / (1 - a), any psi
    const int n = 5;
    const int c_hi = 4;
    const int c_lo = 2; // = n + 1 - c_hi
    const double a = double(n + 1 - c_hi) / double(n + 1);
    auto rule_for = [n](int cutoff) {
        return FractionThreshold{double(cutoff) / n, n};
    };
    for (double psi : {0.15, 0.4, 0.9}) {
        double s_hi = strong_at(IdealSpin{n}, rule_for(c_hi), psi);
        double s_lo = strong_at(IdealSpin{n}, rule_for(c_lo), psi);
        CHECK(s_lo == Catch::Approx((1.0 - 2.0 * a + a * s_hi) / (1.0 - a)).margin(1e-12));
    }
    // the map is affine increasing, so it ties the optima too
    double best_hi = optimize_psi(IdealSpin{n}, rule_for(c_hi)).score;
    double best_lo = optimize_psi(IdealSpin{n}, rule_for(c_lo)).score;
    CHECK(best_hi == Catch::Approx(1.08525472).margin(1e-6));
    CHECK(best_lo == Catch::Approx((1.0 - 2.0 * a + a * best_hi) / (1.0 - a)).margin(1e-7));
}

TEST_CASE("zero-width windows reproduce ideal-spin scores", "[bell]") {
    struct Cfg {
        int xm;
        double r;
    };
    for (Cfg cfg : {Cfg{2, 0.9}, Cfg{5, 1.239}, Cfg{13, 1.65}}) {
        OutcomeRule window = Window{cfg.xm, 0, WindowForm::text};
        OutcomeRule exact = ExactN{cfg.xm};
        for (double psi : {0.1, 0.3}) {
            CHECK(std::fabs(strong_at(VacuumPDC{cfg.r}, window, psi)
                            - strong_at(IdealSpin{cfg.xm}, exact, psi))
                  < 1e-10);
        }
    }
}

TEST_CASE("widening the acceptance window trades violation for rate", "[bell]") {
    const double r = 1.65;
    const int xm = nearest_flux_integer(r);
    REQUIRE(xm == 13);
    std::vector<double> expected = {1.16482735560, 1.10743016830, 1.07995445603, 1.06403427876,
                                    1.05371687569, 1.04652257100, 1.04124203288};
    double prev = 2.0;
    for (int d = 0; d <= 6; ++d) {
        OptimizeResult best = optimize_psi(VacuumPDC{r}, Window{xm, d, WindowForm::text});
        CHECK(best.score == Catch::Approx(expected[size_t(d)]).margin(1e-8));
        CHECK(best.score <= prev + 1e-12);
        CHECK(best.score > 1.0);
        prev = best.score;
    }
}

TEST_CASE("critical transmission matches its closed form for ideal spins", "[bell]") {
    OptimizeResult two = optimize_psi(IdealSpin{2}, ExactN{2});
    double t2 = critical_transmission(IdealSpin{2}, ExactN{2}, two.psi);
    CHECK(t2 == Catch::Approx(std::pow(two.score, -0.5)).margin(2e-6));
    CHECK(t2 == Catch::Approx(0.92).margin(0.005));

    OptimizeResult one = optimize_psi(IdealSpin{1}, ExactN{1});
    double t1 = critical_transmission(IdealSpin{1}, ExactN{1}, one.psi);
    CHECK(t1 == Catch::Approx(1.0 / one.score).margin(2e-6));
    CHECK(t1 == Catch::Approx(0.83).margin(0.005));
}

TEST_CASE("critical transmission of the mixed source sits below the lossless point", "[bell]") {
    SourceModel src = VacuumPDC{0.5};
    OutcomeRule rule = ExactN{2};
    double psi = optimize_psi(src, rule).psi;
    double t = critical_transmission(src, rule, psi);
    CHECK(t > 0.9);
    CHECK(t < 0.97);
    CHECK(std::fabs(strong_at(src, rule, psi, t) - 1.0) < 1e-4);
}

TEST_CASE("configurations that never violate are reported as such", "[bell]") {
    CHECK_THROWS_AS(critical_transmission(IdealSpin{2}, ExactN{2}, pi / 4.0), NoViolationError);
}

TEST_CASE("support beyond the truncation raises a truncation error", "[bell]") {
    OutcomeRule rule = Window{20, 0, WindowForm::text};
    CHECK_THROWS_AS(
        event_probability(VacuumPDC{0.3}, rule, 0.0, 0.3, LossChannel{}, ProbabilityKind::joint),
        TruncationError);
    CHECK_THROWS_AS(bell_probabilities(VacuumPDC{0.3}, rule, angles_from_psi(0.0, 0.3)),
                    TruncationError);
    CHECK_THROWS_AS(optimize_psi(VacuumPDC{0.3}, rule), TruncationError);
}

TEST_CASE("rules without support on an exact source score zero or refuse", "[bell]") {
    OutcomeRule rule = Window{20, 0, WindowForm::text};
    // no truncated mass here, so probabilities are genuinely zero
    CHECK(event_probability(IdealSpin{5}, rule, 0.0, 0.3) == 0.0);
    CHECK_THROWS_AS(strong_s(bell_probabilities(IdealSpin{5}, rule, angles_from_psi(0.0, 0.3))),
                    UndefinedScoreError);
}

TEST_CASE("weak objective optimization targets the weak score", "[bell]") {
    SourceModel src = VacuumPDC{0.5};
    OutcomeRule rule = ExactN{2};
    LossChannel ch{0.8, 0.0};
    OptimizeResult w = optimize_psi(src, rule, ch, Objective::weak);
    double strong_psi = optimize_psi(src, rule).psi;
    CHECK(w.score >= weak_at(src, rule, strong_psi, 0.8) - 1e-9);
    CHECK(w.score == Catch::Approx(weak_at(src, rule, w.psi, 0.8)).margin(1e-12));
}

TEST_CASE("frozen lossy sweep anchors for the mixed source", "[bell]") {
    SourceModel src = VacuumPDC{0.5};
    OutcomeRule rule = ExactN{2};
    double psi = optimize_psi(src, rule).psi;
    CHECK(strong_at(src, rule, psi, 1.0) == Catch::Approx(1.181152).margin(2e-5));
    CHECK(strong_at(src, rule, psi, 0.9) == Catch::Approx(0.896347).margin(2e-5));
    CHECK(strong_at(src, rule, psi, 0.8) == Catch::Approx(0.690739).margin(2e-5));
    CHECK(weak_at(src, rule, psi, 0.9) == Catch::Approx(1.175940).margin(2e-5));
    CHECK(weak_at(src, rule, psi, 0.8) == Catch::Approx(1.160938).margin(2e-5));
    CHECK(weak_at(src, rule, psi, 0.6) == Catch::Approx(1.108962).margin(2e-5));
}

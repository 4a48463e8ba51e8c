#pragma once

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "bell.hpp"
#include "errors.hpp"
#include "loss.hpp"
#include "sources.hpp"

namespace pdcbell {

/// Bad user-facing configuration (unknown keys, out-of-range values,
/// unusable combinations). CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// CSV payload values: 12 significant digits.
inline std::string fmt12(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

/// Config round-trip values: shortest exact decimal is not needed, 17
/// significant digits re-read to the identical double.
inline std::string fmt_exact(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace detail {

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline double parse_double_str(const std::string& s, const std::string& key) {
    try {
        size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw ConfigError(key + ": trailing characters in '" + s + "'");
        return v;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        throw ConfigError(key + ": cannot parse '" + s + "' as a number");
    }
}

inline int parse_int_str(const std::string& s, const std::string& key) {
    try {
        size_t pos = 0;
        int v = std::stoi(s, &pos);
        if (pos != s.size()) throw ConfigError(key + ": trailing characters in '" + s + "'");
        return v;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        throw ConfigError(key + ": cannot parse '" + s + "' as an integer");
    }
}

} // namespace detail

/// One declarative run description shared by every subcommand. CLI flags
/// override config-file values; emit/parse round-trips exactly.
struct RunConfig {
    std::string source = "spin";     // spin | vacuum | qiopa
    int n = 2;                       // pair count (spin source and rule targets)
    double r = 0.5;                  // amplifier gain
    std::string rule = "fraction";   // fraction | exact-n | window
    double f = 1.0;                  // fraction threshold
    int xm = 0;                      // window center; 0 derives it from r
    int delta = 0;                   // window half-width / sweep extent
    double t = 1.0;                  // detector transmission
    double t_min = 0.5;
    double t_max = 1.0;
    int t_steps = 11;
    std::string psi = "optimize";    // "optimize" or a number (radians)
    std::string window_form = "text"; // text | caption
    double eps = 1e-12;              // weight truncation tolerance
    std::string out;                 // output path; empty writes to stdout

    std::string emit() const {
        std::ostringstream os;
        os << "source=" << source << "\n";
        os << "n=" << n << "\n";
        os << "r=" << fmt_exact(r) << "\n";
        os << "rule=" << rule << "\n";
        os << "f=" << fmt_exact(f) << "\n";
        os << "xm=" << xm << "\n";
        os << "delta=" << delta << "\n";
        os << "t=" << fmt_exact(t) << "\n";
        os << "t_min=" << fmt_exact(t_min) << "\n";
        os << "t_max=" << fmt_exact(t_max) << "\n";
        os << "t_steps=" << t_steps << "\n";
        os << "psi=" << psi << "\n";
        os << "window_form=" << window_form << "\n";
        os << "eps=" << fmt_exact(eps) << "\n";
        os << "out=" << out << "\n";
        return os.str();
    }

    std::string canonical_line() const {
        std::string body = emit();
        for (char& c : body)
            if (c == '\n') c = ' ';
        if (!body.empty() && body.back() == ' ') body.pop_back();
        return body;
    }

    static RunConfig parse(std::istream& in) {
        RunConfig cfg;
        std::string line;
        while (std::getline(in, line)) {
            std::string s = detail::trim(line);
            if (s.empty() || s[0] == '#') continue;
            size_t eq = s.find('=');
            if (eq == std::string::npos)
                throw ConfigError("config line without '=': " + s);
            std::string key = detail::trim(s.substr(0, eq));
            std::string val = detail::trim(s.substr(eq + 1));
            if (key == "source") cfg.source = val;
            else if (key == "n") cfg.n = detail::parse_int_str(val, key);
            else if (key == "r") cfg.r = detail::parse_double_str(val, key);
            else if (key == "rule") cfg.rule = val;
            else if (key == "f") cfg.f = detail::parse_double_str(val, key);
            else if (key == "xm") cfg.xm = detail::parse_int_str(val, key);
            else if (key == "delta") cfg.delta = detail::parse_int_str(val, key);
            else if (key == "t") cfg.t = detail::parse_double_str(val, key);
            else if (key == "t_min") cfg.t_min = detail::parse_double_str(val, key);
            else if (key == "t_max") cfg.t_max = detail::parse_double_str(val, key);
            else if (key == "t_steps") cfg.t_steps = detail::parse_int_str(val, key);
            else if (key == "psi") cfg.psi = val;
            else if (key == "window_form") cfg.window_form = val;
            else if (key == "eps") cfg.eps = detail::parse_double_str(val, key);
            else if (key == "out") cfg.out = val;
            else throw ConfigError("unknown config key: " + key);
        }
        return cfg;
    }

    static RunConfig parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot read config file: " + path);
        return parse(in);
    }

    void validate() const {
        if (source != "spin" && source != "vacuum" && source != "qiopa")
            throw ConfigError("source must be spin, vacuum, or qiopa");
        if (rule != "fraction" && rule != "exact-n" && rule != "window")
            throw ConfigError("rule must be fraction, exact-n, or window");
        if (window_form != "text" && window_form != "caption")
            throw ConfigError("window_form must be text or caption");
        if (n < 0) throw ConfigError("n must be non-negative");
        if (r < 0.0) throw ConfigError("r must be non-negative");
        if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("f must lie in [0,1]");
        if (xm < 0) throw ConfigError("xm must be non-negative (0 derives it from r)");
        if (delta < 0) throw ConfigError("delta must be non-negative");
        if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("t must lie in [0,1]");
        if (!(t_min > 0.0)) throw ConfigError("t_min must be positive");
        if (!(t_max <= 1.0)) throw ConfigError("t_max must not exceed 1");
        if (t_min > t_max) throw ConfigError("t_min must not exceed t_max");
        if (t_steps < 1) throw ConfigError("t_steps must be at least 1");
        if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("eps must lie in (0,1)");
        if (psi != "optimize") detail::parse_double_str(psi, "psi");
    }
};

namespace detail {

inline SourceModel make_source(const RunConfig& cfg) {
    if (cfg.source == "spin") return IdealSpin{cfg.n};
    if (cfg.source == "vacuum") return VacuumPDC{cfg.r};
    return Qiopa{cfg.r};
}

inline int resolve_xm(const RunConfig& cfg) {
    return cfg.xm > 0 ? cfg.xm : nearest_flux_integer(cfg.r);
}

inline OutcomeRule make_rule(const RunConfig& cfg) {
    if (cfg.rule == "fraction") return FractionThreshold{cfg.f, cfg.n};
    if (cfg.rule == "exact-n") return ExactN{cfg.n};
    WindowForm form = cfg.window_form == "caption" ? WindowForm::caption : WindowForm::text;
    return Window{resolve_xm(cfg), cfg.delta, form};
}

inline void csv_header(std::ostream& os, const std::string& command, const RunConfig& cfg) {
    os << "# pdcbell " << command << "\n";
    os << "# config: " << cfg.canonical_line() << "\n";
}

inline void bell_row(std::ostream& os, double psi, const BellProbabilities& p,
                     double ss, double sw) {
    os << fmt12(psi) << ',' << fmt12(ss) << ',' << fmt12(sw) << ','
       << fmt12(p.joint_theta_phi) << ',' << fmt12(p.joint_theta_phi_prime) << ','
       << fmt12(p.joint_theta_prime_phi) << ',' << fmt12(p.joint_theta_prime_phi_prime) << ','
       << fmt12(p.marginal_a_theta_prime) << ',' << fmt12(p.marginal_b_phi) << ','
       << fmt12(p.one_sided_a_theta_prime) << ',' << fmt12(p.one_sided_b_phi) << "\n";
}

inline const char* bell_columns() {
    return "psi,s_strong,s_weak,joint_theta_phi,joint_theta_phi_prime,"
           "joint_theta_prime_phi,joint_theta_prime_phi_prime,"
           "marginal_a,marginal_b,one_sided_a,one_sided_b";
}

} // namespace detail

/// One full Bell evaluation at a single psi (optimized or fixed).
inline void cmd_bell(const RunConfig& cfg, std::ostream& os) {
    SourceModel src = detail::make_source(cfg);
    OutcomeRule rule = detail::make_rule(cfg);
    LossChannel ch{cfg.t, 0.0};
    bool optimized = cfg.psi == "optimize";
    double psi = optimized
                     ? optimize_psi(src, rule, ch, Objective::strong, two_pi / 4096.0, 1e-8, cfg.eps).psi
                     : detail::parse_double_str(cfg.psi, "psi");
    BellProbabilities p = bell_probabilities(src, rule, angles_from_psi(0.0, psi), ch, cfg.eps);
    double ss = strong_s(p);
    double sw = weak_s(p);
    detail::csv_header(os, "bell", cfg);
    os << "# psi_mode: " << (optimized ? "optimize" : "fixed") << "\n";
    os << detail::bell_columns() << "\n";
    detail::bell_row(os, psi, p, ss, sw);
}

/// Same output as bell, but always at the strong-optimal psi.
inline void cmd_optimize(const RunConfig& cfg, std::ostream& os) {
    SourceModel src = detail::make_source(cfg);
    OutcomeRule rule = detail::make_rule(cfg);
    LossChannel ch{cfg.t, 0.0};
    OptimizeResult best = optimize_psi(src, rule, ch, Objective::strong, two_pi / 4096.0, 1e-8, cfg.eps);
    BellProbabilities p = bell_probabilities(src, rule, angles_from_psi(0.0, best.psi), ch, cfg.eps);
    double ss = strong_s(p);
    double sw = weak_s(p);
    detail::csv_header(os, "optimize", cfg);
    os << "# psi_mode: optimize\n";
    os << detail::bell_columns() << "\n";
    detail::bell_row(os, best.psi, p, ss, sw);
}

/// Pair-number amplitudes and probabilities of the configured source.
inline void cmd_dist(const RunConfig& cfg, std::ostream& os) {
    WeightDistribution w = source_weights(detail::make_source(cfg), cfg.eps);
    KahanSum mean;
    for (int n = 0; n <= w.n_max(); ++n) mean.add(n * w.weight(n));
    detail::csv_header(os, "dist", cfg);
    os << "# n_max: " << w.n_max() << "\n";
    os << "# captured: " << fmt12(w.captured()) << "\n";
    os << "# tail_mass: " << fmt12(w.tail_mass()) << "\n";
    os << "# mean_pairs: " << fmt12(mean.value()) << "\n";
    if (cfg.source == "vacuum") {
        os << "# mean_flux: " << fmt12(mean_flux(cfg.r)) << "\n";
        os << "# xm: " << nearest_flux_integer(cfg.r) << "\n";
    }
    os << "n,amplitude,probability\n";
    for (int n = 0; n <= w.n_max(); ++n)
        os << n << ',' << fmt12(w.amplitude(n)) << ',' << fmt12(w.weight(n)) << "\n";
}

/// Strong and weak scores across a transmission sweep at fixed psi
/// (optimized lossless first when psi=optimize).
inline void cmd_sweep_t(const RunConfig& cfg, std::ostream& os) {
    SourceModel src = detail::make_source(cfg);
    OutcomeRule rule = detail::make_rule(cfg);
    bool optimized = cfg.psi == "optimize";
    double psi = optimized
                     ? optimize_psi(src, rule, LossChannel{1.0, 0.0}, Objective::strong,
                                    two_pi / 4096.0, 1e-8, cfg.eps)
                           .psi
                     : detail::parse_double_str(cfg.psi, "psi");
    AngleConfig angles = angles_from_psi(0.0, psi);
    detail::csv_header(os, "sweep-t", cfg);
    os << "# psi_mode: " << (optimized ? "optimize (lossless), then held fixed" : "fixed") << "\n";
    os << "t,psi,s_strong,s_weak\n";
    for (int i = 0; i < cfg.t_steps; ++i) {
        double t = cfg.t_steps == 1
                       ? cfg.t_min
                       : cfg.t_min + (cfg.t_max - cfg.t_min) * double(i) / double(cfg.t_steps - 1);
        BellProbabilities p = bell_probabilities(src, rule, angles, LossChannel{t, 0.0}, cfg.eps);
        os << fmt12(t) << ',' << fmt12(psi) << ',' << fmt12(strong_s(p)) << ','
           << fmt12(weak_s(p)) << "\n";
    }
}

/// High-flux window study for the vacuum-input source: scores against window
/// half-width at fixed transmission, then against transmission at the widest
/// window with psi frozen at its lossless optimum.
inline void cmd_highflux(const RunConfig& cfg, std::ostream& os) {
    if (cfg.source != "vacuum")
        throw ConfigError("highflux expects the vacuum source (window scale XM comes from pump flux)");
    SourceModel src = detail::make_source(cfg);
    int xm = detail::resolve_xm(cfg);
    WindowForm form = cfg.window_form == "caption" ? WindowForm::caption : WindowForm::text;
    detail::csv_header(os, "highflux", cfg);
    os << "# xm: " << xm << "\n";
    os << "# sweep=delta rows: transmission t, psi re-optimized per delta\n";
    os << "# sweep=t rows: delta fixed at its maximum, psi from the lossless optimum\n";
    os << "sweep,param,psi,s_strong,s_weak\n";
    for (int d = 0; d <= cfg.delta; ++d) {
        OutcomeRule rule = Window{xm, d, form};
        OptimizeResult best = optimize_psi(src, rule, LossChannel{cfg.t, 0.0}, Objective::strong,
                                           two_pi / 4096.0, 1e-8, cfg.eps);
        BellProbabilities p =
            bell_probabilities(src, rule, angles_from_psi(0.0, best.psi), LossChannel{cfg.t, 0.0}, cfg.eps);
        os << "delta," << d << ',' << fmt12(best.psi) << ',' << fmt12(strong_s(p)) << ','
           << fmt12(weak_s(p)) << "\n";
    }
    OutcomeRule rule = Window{xm, cfg.delta, form};
    double psi = cfg.psi == "optimize"
                     ? optimize_psi(src, rule, LossChannel{1.0, 0.0}, Objective::strong,
                                    two_pi / 4096.0, 1e-8, cfg.eps)
                           .psi
                     : detail::parse_double_str(cfg.psi, "psi");
    AngleConfig angles = angles_from_psi(0.0, psi);
    for (int i = 0; i < cfg.t_steps; ++i) {
        double t = cfg.t_steps == 1
                       ? cfg.t_min
                       : cfg.t_min + (cfg.t_max - cfg.t_min) * double(i) / double(cfg.t_steps - 1);
        BellProbabilities p = bell_probabilities(src, rule, angles, LossChannel{t, 0.0}, cfg.eps);
        os << "t," << fmt12(t) << ',' << fmt12(psi) << ',' << fmt12(strong_s(p)) << ','
           << fmt12(weak_s(p)) << "\n";
    }
}

/// Dispatches one subcommand, mapping failures to the documented exit codes:
/// 0 success, 2 configuration, 3 undefined score, 4 truncation.
inline int run_command(const std::string& name, const RunConfig& cfg, std::ostream& out,
                       std::ostream& err) {
    try {
        cfg.validate();
        std::ofstream file;
        std::ostream* os = &out;
        if (!cfg.out.empty()) {
            file.open(cfg.out);
            if (!file) throw ConfigError("cannot open output file: " + cfg.out);
            os = &file;
        }
        if (name == "bell") cmd_bell(cfg, *os);
        else if (name == "optimize") cmd_optimize(cfg, *os);
        else if (name == "dist") cmd_dist(cfg, *os);
        else if (name == "sweep-t") cmd_sweep_t(cfg, *os);
        else if (name == "highflux") cmd_highflux(cfg, *os);
        else throw ConfigError("unknown command: " + name);
        os->flush();
        if (!*os) throw ConfigError("failed writing output");
        return 0;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return 2;
    } catch (const UndefinedScoreError& e) {
        err << "undefined score: " << e.what() << "\n";
        return 3;
    } catch (const NoViolationError& e) {
        err << "undefined score: " << e.what() << "\n";
        return 3;
    } catch (const TruncationError& e) {
        err << "truncation error: " << e.what() << "\n";
        return 4;
    } catch (const std::domain_error& e) {
        err << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace pdcbell

#pragma once

// Recurrence/transience criteria. Each test consumes fitted asymptotics or
// the chain itself and renders a Verdict with a signed margin in the
// criterion's native units (value - boundary). Definite Transient labels
// require a finite gap above the boundary: the underlying theorems use an
// open condition theta > 1, which has no numerical meaning at theta = 1.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lamperti/chain.hpp"
#include "lamperti/drift_stats.hpp"
#include "lamperti/error.hpp"
#include "lamperti/splitter.hpp"
#include "lamperti/verdict.hpp"

namespace lamperti {

struct SeriesConfig {
    long long i_max = 1'000'000;  // number of series terms
    State x_start = -1;           // first state of the product; -1 = auto
    double exponent_gap = 0.1;    // critical band is |c - 1| <= gap
    double div_frac = 0.1;        // last-decade increment vs this * S_half
    double div_abs_floor = 1e-6;
    double conv_tail_frac = 0.01;  // tail bound vs this * S_final
    std::vector<double>* log_term_sink = nullptr;  // test hook: every log t_i
};

struct CriteriaConfig {
    FitConfig fit;
    SeriesConfig series;
    double decision_tol = 0.02;    // relative to the decision boundary
    double transience_gap = 0.05;  // theta >= 1 + gap for definite Transient
    State truncation = 4096;       // splitter truncation
};

enum class SeriesClass { Divergent, Convergent, Undecided };

inline const char* to_string(SeriesClass c) {
    switch (c) {
        case SeriesClass::Divergent: return "Divergent";
        case SeriesClass::Convergent: return "Convergent";
        case SeriesClass::Undecided: return "Undecided";
    }
    return "Undecided";
}

struct SeriesDiagnostics {
    long long terms_computed = 0;
    State x_start = 0;
    std::vector<std::pair<long long, double>> partial_sums;  // sampled (i, S_i)
    double local_exponent = 0.0;  // fitted c in t_i ~ C * i^(-c)
    SeriesClass classification = SeriesClass::Undecided;
};

namespace detail {

inline double log_add_exp(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    double hi = std::max(a, b), lo = std::min(a, b);
    return hi + std::log1p(std::exp(lo - hi));
}

// Slope fit of log t against log i over snapshots with index in [lo, hi];
// returns the decay exponent c (negated slope).
inline double fit_local_exponent(
    const std::vector<std::pair<long long, double>>& log_terms, long long lo,
    long long hi) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t n = 0;
    for (const auto& [i, log_t] : log_terms) {
        if (i < lo || i > hi || !std::isfinite(log_t)) continue;
        double x = std::log(static_cast<double>(i));
        sx += x;
        sy += log_t;
        sxx += x * x;
        sxy += x * log_t;
        ++n;
    }
    if (n < 2) return 0.0;
    double den = n * sxx - sx * sx;
    if (std::abs(den) < 1e-300) return 0.0;
    return -(n * sxy - sx * sy) / den;
}

// Decision boundary comparison shared by the drift-based criteria.
inline Verdict decide_against_boundary(double value, double boundary,
                                       const char* criterion,
                                       const CriteriaConfig& cfg) {
    Verdict v;
    v.criterion = criterion;
    v.margin = value - boundary;
    double theta = value / boundary;
    v.evidence["theta"] = theta;
    if (value <= boundary + cfg.decision_tol * std::abs(boundary)) {
        v.label = Label::Recurrent;
    } else if (theta >= 1.0 + cfg.transience_gap) {
        v.label = Label::Transient;
    } else {
        v.label = Label::Inconclusive;
        v.notes.push_back(
            std::string(criterion) + ": value exceeds the recurrence bound (" +
            detail::format_double(value) + " > " + detail::format_double(boundary) +
            ") but theta = " + detail::format_double(theta) +
            " is below the transience threshold " +
            detail::format_double(1.0 + cfg.transience_gap));
    }
    return v;
}

}  // namespace detail

// Drift criterion: recurrent when xi = lim 2x*mu(x) stays at or below the
// second-moment limit r2; transient when it clears r2 by a definite factor.
inline Verdict lamperti_test(const AsymptoticFit& fit, const CriteriaConfig& cfg) {
    if (!fit.converged) {
        throw NotConverged("drift fits did not converge (residual " +
                           detail::format_double(fit.residual_norm) +
                           ", exponent " + detail::format_double(fit.eps_hat) + ")");
    }
    if (!(fit.r2_hat > 0.0)) {
        throw NotConverged("second-moment limit " +
                           detail::format_double(fit.r2_hat) + " is not positive");
    }
    Verdict v = detail::decide_against_boundary(fit.xi_hat, fit.r2_hat,
                                                "lamperti", cfg);
    v.evidence["xi_hat"] = fit.xi_hat;
    v.evidence["r2_hat"] = fit.r2_hat;
    return v;
}

// Same decision rule, but restricted to chains where both limits genuinely
// exist; a non-converging second moment means the chain is outside every
// class the corollary covers, which is an error, not an Inconclusive.
inline Verdict corollary_test(const AsymptoticFit& fit, const CriteriaConfig& cfg) {
    if (!fit.fit_v.converged) {
        throw NotInClass("v(x) has no limit over the grid (residual " +
                         detail::format_double(fit.fit_v.residual) +
                         "); the chain is outside the drift-criterion class");
    }
    if (!fit.converged) {
        throw NotConverged("drift fits did not converge (residual " +
                           detail::format_double(fit.residual_norm) + ")");
    }
    if (!(fit.r2_hat > 0.0)) {
        throw NotConverged("second-moment limit " +
                           detail::format_double(fit.r2_hat) + " is not positive");
    }
    Verdict v = detail::decide_against_boundary(fit.xi_hat, fit.r2_hat,
                                                "corollary", cfg);
    v.criterion = "corollary";
    v.evidence["class_xi"] = fit.xi_hat;
    v.evidence["class_r2"] = fit.r2_hat;
    v.evidence["v_decay_exponent"] = fit.fit_v.exponent;
    return v;
}

// Ratio criterion: compares the fitted limit of x*(U/D - 1) against the
// mean-absolute-increment limit R.
inline Verdict ratio_test(const AsymptoticFit& fit, const CriteriaConfig& cfg) {
    if (!fit.converged) {
        throw NotConverged("drift fits did not converge (residual " +
                           detail::format_double(fit.residual_norm) + ")");
    }
    if (!std::isfinite(fit.R_hat) || !(fit.R_hat > 0.0)) {
        throw ZeroDownDrift("mean absolute increment limit " +
                            detail::format_double(fit.R_hat) +
                            " is not positive; the ratio test needs R > 0");
    }
    Verdict v = detail::decide_against_boundary(fit.rho_coeff_hat, fit.R_hat,
                                                "ratio", cfg);
    v.evidence["rho_coeff_hat"] = fit.rho_coeff_hat;
    v.evidence["R_hat"] = fit.R_hat;
    return v;
}

namespace detail {

struct SeriesOutcome {
    SeriesDiagnostics diag;
    double log_t_final = 0.0;
    double log_S_final = -std::numeric_limits<double>::infinity();
    double log_S_tenth = -std::numeric_limits<double>::infinity();
    double log_S_half = -std::numeric_limits<double>::infinity();
    bool have_marks = false;  // tenth/half snapshots valid (full run)
    bool blocked = false;     // U(x) = 0: no upward motion
    State blocked_at = 0;
    bool blew_up = false;  // terms exceeded double range: divergence certain
    std::vector<std::pair<long long, double>> log_terms;  // sampled (i, log t_i)
};

// Classification per the partial-sum rules; shared by both series paths as
// pure arithmetic on the accumulated outcome (the accumulation itself is not
// shared).
inline void classify_series(SeriesOutcome& out, const SeriesConfig& cfg,
                            std::vector<std::string>& notes) {
    SeriesDiagnostics& d = out.diag;
    long long T = d.terms_computed;
    d.local_exponent = fit_local_exponent(out.log_terms, std::max<long long>(1, T / 10), T);

    if (out.blocked) {
        d.classification = SeriesClass::Divergent;
        notes.push_back("no upward motion at state " +
                        std::to_string(out.blocked_at) +
                        "; the chain cannot pass it, so escape to infinity is "
                        "impossible and the series diverges trivially");
        return;
    }
    if (out.blew_up) {
        d.classification = SeriesClass::Divergent;
        notes.push_back("series terms grow without bound; divergence certain");
        return;
    }

    double c = d.local_exponent;
    if (c < 1.0 - cfg.exponent_gap) {
        d.classification = SeriesClass::Divergent;
        return;
    }
    if (c <= 1.0 + cfg.exponent_gap) {
        if (out.have_marks) {
            double S_final = std::exp(out.log_S_final);
            double S_tenth = std::exp(out.log_S_tenth);
            double S_half = std::exp(out.log_S_half);
            double increment = S_final - S_tenth;
            double floor = std::max(cfg.div_frac * S_half, cfg.div_abs_floor);
            if (increment > floor) {
                d.classification = SeriesClass::Divergent;
                notes.push_back(
                    "exponent " + format_double(c) +
                    " in the critical band; last-decade partial-sum increment " +
                    format_double(increment) + " exceeds the floor " +
                    format_double(floor));
                return;
            }
            d.classification = SeriesClass::Undecided;
            notes.push_back("exponent " + format_double(c) +
                            " in the critical band and last-decade increment " +
                            format_double(increment) + " below the floor " +
                            format_double(floor) + "; cannot resolve");
            return;
        }
        d.classification = SeriesClass::Undecided;
        notes.push_back("exponent " + format_double(c) +
                        " in the critical band; run ended early, no decade "
                        "increment available");
        return;
    }
    // c above the band: certify convergence only if the tail is provably
    // negligible. Tail ~ t_T * T / (c - 1).
    double log_tail = out.log_t_final + std::log(static_cast<double>(T)) -
                      std::log(c - 1.0);
    double log_cap = std::log(cfg.conv_tail_frac) + out.log_S_final;
    if (log_tail < log_cap) {
        d.classification = SeriesClass::Convergent;
        return;
    }
    d.classification = SeriesClass::Undecided;
    notes.push_back("exponent " + format_double(c) +
                    " above the critical band but the tail bound is not yet "
                    "below " + format_double(cfg.conv_tail_frac) +
                    " of the partial sum; cannot resolve");
}

inline Verdict series_verdict(const SeriesDiagnostics& diag,
                              std::vector<std::string> notes,
                              const char* criterion) {
    Verdict v;
    v.criterion = criterion;
    v.margin = diag.local_exponent - 1.0;
    v.notes = std::move(notes);
    switch (diag.classification) {
        case SeriesClass::Divergent:
            v.label = Label::Recurrent;
            break;
        case SeriesClass::Convergent:
            v.label = Label::Transient;
            break;
        case SeriesClass::Undecided:
            v.label = Label::Inconclusive;
            break;
    }
    v.evidence["local_exponent"] = diag.local_exponent;
    v.evidence["terms_computed"] = static_cast<double>(diag.terms_computed);
    v.evidence["x_start"] = static_cast<double>(diag.x_start);
    if (!diag.partial_sums.empty()) {
        v.evidence["partial_sum_final"] = diag.partial_sums.back().second;
    }
    return v;
}

}  // namespace detail

// Series criterion over consecutive states: t_i = prod D(x)/U(x) for x from
// x_start to x_start + i - 1, divergence of sum t_i meaning recurrence.
// Requires a unit-lattice chain (decompose and extract sub-chains first).
inline std::pair<Verdict, SeriesDiagnostics> series_test(const ChainSpec& spec,
                                                         const SeriesConfig& cfg) {
    State x_start = cfg.x_start;
    if (x_start < 0) {
        for (State x = 1; x <= 4096; ++x) {
            DriftQuantities q = drift(spec, x);
            if (q.up_part > 0.0 && q.down_part > 0.0) {
                x_start = x;
                break;
            }
        }
        if (x_start < 0) {
            throw InvalidSpec(
                "no state with two-sided motion found; the series criterion "
                "needs D(x) > 0 and U(x) > 0 from some state on");
        }
    }

    detail::SeriesOutcome out;
    out.diag.x_start = x_start;
    double log_t = 0.0;
    double log_S = -std::numeric_limits<double>::infinity();
    long long next_sample = 1;
    const long long mark_tenth = cfg.i_max / 10, mark_half = cfg.i_max / 2;
    long long i = 1;
    for (; i <= cfg.i_max; ++i) {
        State x = x_start + (i - 1);
        DriftQuantities q = drift(spec, x);
        if (!(q.up_part > 0.0)) {
            if (!(q.down_part > 0.0)) {
                throw InvalidSpec("state " + std::to_string(x) +
                                  " has no movement; the chain is not on the "
                                  "unit lattice (decompose and extract first)");
            }
            out.blocked = true;
            out.blocked_at = x;
            break;
        }
        log_t += std::log(q.down_part / q.up_part);
        if (cfg.log_term_sink) cfg.log_term_sink->push_back(log_t);
        if (log_t > 700.0) {
            out.blew_up = true;
            out.diag.terms_computed = i;
            break;
        }
        log_S = detail::log_add_exp(log_S, log_t);
        out.diag.terms_computed = i;
        if (i == mark_tenth) out.log_S_tenth = log_S;
        if (i == mark_half) out.log_S_half = log_S;
        if (i >= next_sample || i == cfg.i_max) {
            out.log_terms.push_back({i, log_t});
            out.diag.partial_sums.push_back({i, std::exp(log_S)});
            next_sample = std::max(next_sample + 1,
                                   static_cast<long long>(next_sample * 1.05));
        }
        // Once new terms stop moving the sum at double precision the
        // remaining budget adds nothing.
        if (i >= 4096 && log_t - log_S < -60.0) break;
    }
    out.log_t_final = log_t;
    out.log_S_final = log_S;
    out.have_marks = out.diag.terms_computed >= cfg.i_max;

    std::vector<std::string> notes;
    detail::classify_series(out, cfg, notes);
    if (out.diag.terms_computed < cfg.i_max && !out.blocked && !out.blew_up) {
        notes.push_back("stopped after " +
                        std::to_string(out.diag.terms_computed) +
                        " terms: remaining terms are below the precision of "
                        "the partial sum");
    }
    Verdict v = detail::series_verdict(out.diag, std::move(notes), "series");
    return {std::move(v), std::move(out.diag)};
}

// Classical birth-death series oracle: same decision semantics as
// series_test with D/U = q/p, but accumulated by an independent code path
// straight from the probability expression. Serves as ground truth in tests.
inline Verdict bd_oracle(const ChainSpec& spec, const SeriesConfig& cfg) {
    if (spec.kind() != ChainSpec::Kind::BirthDeath) {
        throw InvalidSpec("the birth-death oracle only accepts birth-death chains");
    }
    const ExprPtr& p_expr = spec.birth_death_p();
    const bool strict = spec.strict_prob();
    auto up_probability = [&](State x) {
        double p = eval(p_expr, static_cast<double>(x));
        if (p < 0.0 || p > 1.0) {
            if (strict) {
                throw InvalidProbability("probability " + detail::format_double(p) +
                                         " outside [0,1] at state " +
                                         std::to_string(x));
            }
            p = std::min(std::max(p, 0.0), 1.0);
        }
        return p;
    };

    State x_start = cfg.x_start;
    if (x_start < 0) {
        for (State x = 1; x <= 4096; ++x) {
            double p = up_probability(x);
            if (p > 0.0 && p < 1.0) {
                x_start = x;
                break;
            }
        }
        if (x_start < 0) {
            throw InvalidSpec(
                "no state with 0 < p(x) < 1 found; the oracle needs "
                "two-sided motion from some state on");
        }
    }

    detail::SeriesOutcome out;
    out.diag.x_start = x_start;
    double log_t = 0.0;
    double log_S = -std::numeric_limits<double>::infinity();
    long long next_sample = 1;
    const long long mark_tenth = cfg.i_max / 10, mark_half = cfg.i_max / 2;
    long long i = 1;
    for (; i <= cfg.i_max; ++i) {
        State x = x_start + (i - 1);
        double p = up_probability(x);
        if (!(p > 0.0)) {
            out.blocked = true;
            out.blocked_at = x;
            break;
        }
        double q = 1.0 - p;
        log_t += std::log(q / p);
        if (cfg.log_term_sink) cfg.log_term_sink->push_back(log_t);
        if (log_t > 700.0) {
            out.blew_up = true;
            out.diag.terms_computed = i;
            break;
        }
        log_S = detail::log_add_exp(log_S, log_t);
        out.diag.terms_computed = i;
        if (i == mark_tenth) out.log_S_tenth = log_S;
        if (i == mark_half) out.log_S_half = log_S;
        if (i >= next_sample || i == cfg.i_max) {
            out.log_terms.push_back({i, log_t});
            out.diag.partial_sums.push_back({i, std::exp(log_S)});
            next_sample = std::max(next_sample + 1,
                                   static_cast<long long>(next_sample * 1.05));
        }
        if (i >= 4096 && log_t - log_S < -60.0) break;
    }
    out.log_t_final = log_t;
    out.log_S_final = log_S;
    out.have_marks = out.diag.terms_computed >= cfg.i_max;

    std::vector<std::string> notes;
    detail::classify_series(out, cfg, notes);
    return detail::series_verdict(out.diag, std::move(notes), "bd_oracle");
}

// ---------------------------------------------------------------------------
// Combined classification
// ---------------------------------------------------------------------------

struct ComponentReport {
    Component component;
    std::optional<AsymptoticFit> restricted_fit;  // on the original lattice
    std::string restricted_fit_error;
    std::optional<AsymptoticFit> sub_fit;  // extracted unit-lattice sub-chain
    std::string sub_fit_error;
    std::string extraction_error;
    std::vector<Verdict> verdicts;  // fixed criterion order
    std::vector<std::pair<std::string, std::string>> criterion_errors;
    std::optional<SeriesDiagnostics> series;
    Verdict headline;
};

struct CombinedReport {
    Decomposition decomposition;
    bool decomposed = false;
    std::string decomposition_error;
    std::vector<ComponentReport> components;
    Verdict headline;       // aggregated across components
    double max_R = 0.0;     // max restricted R_hat across components
    bool near_critical = false;
    std::vector<std::string> notes;
};

namespace detail {

// Definite labels win; conflicting definite labels force Inconclusive.
inline Verdict combine_criteria(const std::vector<Verdict>& verdicts,
                                std::vector<std::string> extra_notes) {
    Verdict out;
    out.criterion = "combined";
    bool saw_recurrent = false, saw_transient = false;
    for (const auto& v : verdicts) {
        if (v.label == Label::Recurrent) saw_recurrent = true;
        if (v.label == Label::Transient) saw_transient = true;
    }
    out.notes = std::move(extra_notes);
    // Surface the drift ratio of the first criterion that measured one.
    for (const auto& v : verdicts) {
        auto it = v.evidence.find("theta");
        if (it != v.evidence.end()) {
            out.evidence["theta"] = it->second;
            break;
        }
    }
    if (saw_recurrent && saw_transient) {
        out.label = Label::Inconclusive;
        out.margin = 0.0;
        out.notes.push_back(
            "criteria disagree with definite labels; refusing to pick a side");
        return out;
    }
    if (saw_recurrent || saw_transient) {
        out.label = saw_recurrent ? Label::Recurrent : Label::Transient;
        // Report the margin of the first definite criterion, in its units.
        for (const auto& v : verdicts) {
            if (v.label == out.label) {
                out.margin = v.margin;
                break;
            }
        }
        return out;
    }
    out.label = Label::Inconclusive;
    out.margin = 0.0;
    if (verdicts.empty()) {
        out.notes.push_back("no criterion produced a verdict");
    } else {
        out.notes.push_back("no criterion produced a definite label");
    }
    return out;
}

}  // namespace detail

// Full pipeline: decompose, fit each component on its lattice and as an
// extracted unit sub-chain, run every applicable criterion, combine per
// component, then aggregate. Criterion failures are recorded, not fatal.
inline CombinedReport classify(const ChainSpec& spec, const CriteriaConfig& cfg) {
    CombinedReport report;

    try {
        report.decomposition = decompose(spec, cfg.truncation);
        report.decomposed = true;
    } catch (const Error& e) {
        report.decomposition_error = e.what();
        report.notes.push_back(std::string("decomposition failed: ") + e.what() +
                               "; classifying the chain unsplit");
        Component whole;
        whole.cls = ResidueClass{1, 0, 1};
        whole.step = 1;
        report.decomposition.components = {whole};
        report.decomposition.boundary_level = spec.interior_min();
        report.decomposition.truncation = cfg.truncation;
    }

    std::vector<Verdict> component_headlines;
    for (const auto& comp : report.decomposition.components) {
        ComponentReport cr;
        cr.component = comp;

        try {
            cr.restricted_fit = fit_restricted(spec, comp.cls, cfg.fit);
            report.max_R = std::max(report.max_R, cr.restricted_fit->R_hat);
        } catch (const Error& e) {
            cr.restricted_fit_error = e.what();
        }

        std::optional<ChainSpec> sub;
        try {
            sub = extract_subchain(spec, comp);
        } catch (const Error& e) {
            cr.extraction_error = e.what();
        }

        if (sub) {
            try {
                cr.sub_fit = fit_asymptotics(profile(*sub, make_probe_grid(cfg.fit)),
                                             cfg.fit);
            } catch (const Error& e) {
                cr.sub_fit_error = e.what();
            }

            if (cr.sub_fit) {
                try {
                    cr.verdicts.push_back(lamperti_test(*cr.sub_fit, cfg));
                } catch (const Error& e) {
                    cr.criterion_errors.push_back({"lamperti", e.what()});
                }
                try {
                    cr.verdicts.push_back(corollary_test(*cr.sub_fit, cfg));
                } catch (const Error& e) {
                    cr.criterion_errors.push_back({"corollary", e.what()});
                }
                try {
                    cr.verdicts.push_back(ratio_test(*cr.sub_fit, cfg));
                } catch (const Error& e) {
                    cr.criterion_errors.push_back({"ratio", e.what()});
                }
            } else {
                cr.criterion_errors.push_back({"lamperti", cr.sub_fit_error});
                cr.criterion_errors.push_back({"corollary", cr.sub_fit_error});
                cr.criterion_errors.push_back({"ratio", cr.sub_fit_error});
            }
            try {
                auto [verdict, diag] = series_test(*sub, cfg.series);
                cr.verdicts.push_back(std::move(verdict));
                cr.series = std::move(diag);
            } catch (const Error& e) {
                cr.criterion_errors.push_back({"series", e.what()});
            }
            if (sub->kind() == ChainSpec::Kind::BirthDeath) {
                try {
                    cr.verdicts.push_back(bd_oracle(*sub, cfg.series));
                } catch (const Error& e) {
                    cr.criterion_errors.push_back({"bd_oracle", e.what()});
                }
            }
        }

        std::vector<std::string> notes;
        for (const auto& [name, msg] : cr.criterion_errors) {
            notes.push_back(name + " unavailable: " + msg);
        }
        cr.headline = detail::combine_criteria(cr.verdicts, std::move(notes));
        for (const auto& v : cr.verdicts) {
            auto it = v.evidence.find("theta");
            if (it != v.evidence.end() && std::abs(it->second - 1.0) < 0.25) {
                report.near_critical = true;
            }
        }
        component_headlines.push_back(cr.headline);
        report.components.push_back(std::move(cr));
    }

    report.headline = aggregate(component_headlines);
    report.headline.evidence["max_R"] = report.max_R;
    // A lone component's drift ratio is the chain's drift ratio.
    if (report.components.size() == 1) {
        auto it = report.components[0].headline.evidence.find("theta");
        if (it != report.components[0].headline.evidence.end())
            report.headline.evidence["theta"] = it->second;
    }
    if (report.near_critical) {
        report.notes.push_back(
            "near-critical chain (theta within 0.25 of 1); finite simulations "
            "cannot confirm or refute the verdict reliably");
    }
    return report;
}

}  // namespace lamperti

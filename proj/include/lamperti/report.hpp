#pragma once

// Machine-readable output: JSON report assembly and the drift-profile CSV.
//
// Reports use ordered_json so field order is fixed by construction; given a
// fixed seed and config the emitted bytes are identical across runs. Doubles
// that are NaN or infinite serialize as null.

#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "lamperti/chain.hpp"
#include "lamperti/criteria.hpp"
#include "lamperti/drift_stats.hpp"
#include "lamperti/simulator.hpp"
#include "lamperti/splitter.hpp"
#include "lamperti/verdict.hpp"

namespace lamperti {

namespace report_detail {

using oj = nlohmann::ordered_json;

inline const char* kind_name(ChainSpec::Kind kind) {
    switch (kind) {
        case ChainSpec::Kind::BirthDeath: return "birth_death";
        case ChainSpec::Kind::JumpKernel: return "jump_kernel";
        case ChainSpec::Kind::SplittableExample: return "splittable_example";
        case ChainSpec::Kind::Rescaled: return "rescaled";
    }
    return "unknown";
}

inline oj to_json(const SeqFit& f) {
    oj j;
    j["limit"] = f.limit;
    j["coeff"] = f.coeff;
    j["exponent"] = f.exponent;
    j["residual"] = f.residual;
    j["converged"] = f.converged;
    j["degenerate"] = f.degenerate;
    return j;
}

inline oj to_json(const AsymptoticFit& f) {
    oj j;
    j["xi_hat"] = f.xi_hat;
    j["r2_hat"] = f.r2_hat;
    j["R_hat"] = f.R_hat;
    j["rho_coeff_hat"] = f.rho_coeff_hat;
    j["eps_hat"] = f.eps_hat;
    j["residual_norm"] = f.residual_norm;
    j["converged"] = f.converged;
    j["grid"] = f.grid;
    j["fit_two_x_mu"] = to_json(f.fit_two_x_mu);
    j["fit_v"] = to_json(f.fit_v);
    j["fit_nu"] = to_json(f.fit_nu);
    j["fit_rho"] = to_json(f.fit_rho);
    j["fit_dir_rho"] = to_json(f.fit_dir_rho);
    return j;
}

inline oj to_json(const Verdict& v) {
    oj j;
    j["label"] = to_string(v.label);
    j["criterion"] = v.criterion;
    j["margin"] = v.margin;
    oj evidence = oj::object();
    for (const auto& [key, value] : v.evidence) evidence[key] = value;
    j["evidence"] = std::move(evidence);
    j["notes"] = v.notes;
    return j;
}

inline oj to_json(const SeriesDiagnostics& s) {
    oj j;
    j["classification"] = to_string(s.classification);
    j["terms_computed"] = s.terms_computed;
    j["x_start"] = s.x_start;
    j["local_exponent"] = s.local_exponent;
    oj sums = oj::array();
    for (const auto& [i, partial] : s.partial_sums) sums.push_back(oj::array({i, partial}));
    j["partial_sums"] = std::move(sums);
    return j;
}

inline oj to_json(const Component& c) {
    oj j;
    j["modulus"] = c.cls.modulus;
    j["residue"] = c.cls.residue;
    j["min_state"] = c.cls.min_state;
    j["step"] = c.step;
    j["entry_states"] = c.entry_states;
    return j;
}

inline oj to_json(const ComponentReport& c) {
    oj j;
    j["component"] = to_json(c.component);
    j["restricted_fit"] = c.restricted_fit ? to_json(*c.restricted_fit) : oj(nullptr);
    j["restricted_fit_error"] = c.restricted_fit_error;
    j["sub_fit"] = c.sub_fit ? to_json(*c.sub_fit) : oj(nullptr);
    j["sub_fit_error"] = c.sub_fit_error;
    j["extraction_error"] = c.extraction_error;
    oj verdicts = oj::array();
    for (const auto& v : c.verdicts) verdicts.push_back(to_json(v));
    j["verdicts"] = std::move(verdicts);
    oj errors = oj::array();
    for (const auto& [criterion, message] : c.criterion_errors) {
        oj e;
        e["criterion"] = criterion;
        e["message"] = message;
        errors.push_back(std::move(e));
    }
    j["criterion_errors"] = std::move(errors);
    j["series"] = c.series ? to_json(*c.series) : oj(nullptr);
    j["headline"] = to_json(c.headline);
    return j;
}

inline oj to_json(const CriteriaConfig& cfg) {
    oj j;
    j["grid_x0"] = cfg.fit.x0;
    j["grid_growth"] = cfg.fit.growth;
    j["grid_points"] = cfg.fit.points;
    j["fit_tol"] = cfg.fit.fit_tol;
    j["decision_tol"] = cfg.decision_tol;
    j["transience_gap"] = cfg.transience_gap;
    j["truncation"] = cfg.truncation;
    j["series_i_max"] = cfg.series.i_max;
    return j;
}

inline oj to_json(const SimConfig& cfg) {
    oj j;
    j["n_paths"] = cfg.n_paths;
    j["n_steps"] = cfg.n_steps;
    j["x0"] = cfg.x0;
    j["return_level"] = cfg.return_level;
    j["seed"] = cfg.master_seed;
    return j;
}

inline oj to_json(const SimReport& r, const SimConfig& cfg) {
    oj j;
    j["config"] = to_json(cfg);
    j["return_fraction"] = r.return_fraction;
    j["median_final"] = r.median_final;
    oj tail;
    tail["min"] = r.min_over_tail.min;
    tail["q1"] = r.min_over_tail.q1;
    tail["median"] = r.min_over_tail.median;
    tail["q3"] = r.min_over_tail.q3;
    tail["max"] = r.min_over_tail.max;
    j["min_over_tail"] = std::move(tail);
    j["escape_indicator"] = r.escape_indicator;
    return j;
}

inline oj to_json(const CombinedReport& r, const CriteriaConfig& cfg) {
    oj j;
    j["config"] = to_json(cfg);
    oj dec;
    dec["decomposed"] = r.decomposed;
    dec["boundary_level"] = r.decomposition.boundary_level;
    dec["truncation"] = r.decomposition.truncation;
    oj comps = oj::array();
    for (const auto& c : r.decomposition.components) comps.push_back(to_json(c));
    dec["components"] = std::move(comps);
    dec["error"] = r.decomposition_error.empty() ? oj(nullptr) : oj(r.decomposition_error);
    j["decomposition"] = std::move(dec);
    oj reports = oj::array();
    for (const auto& c : r.components) reports.push_back(to_json(c));
    j["components"] = std::move(reports);
    j["headline"] = to_json(r.headline);
    j["max_R"] = r.max_R;
    j["near_critical"] = r.near_critical;
    j["notes"] = r.notes;
    return j;
}

}  // namespace report_detail

// Top-level report envelope. Classification, simulation, and the
// cross-check between them are each optional blocks.
struct ReportInputs {
    std::string name;
    ChainSpec::Kind kind = ChainSpec::Kind::BirthDeath;
    const CombinedReport* classification = nullptr;
    const CriteriaConfig* criteria_config = nullptr;
    const SimReport* simulation = nullptr;
    const SimConfig* sim_config = nullptr;
    const Consistency* consistency = nullptr;
};

inline nlohmann::ordered_json make_report(const ReportInputs& in) {
    using report_detail::oj;
    oj j;
    j["schema_version"] = 1;
    j["name"] = in.name;
    j["kind"] = report_detail::kind_name(in.kind);
    if (in.classification && in.criteria_config)
        j["classification"] = report_detail::to_json(*in.classification, *in.criteria_config);
    if (in.simulation && in.sim_config)
        j["simulation"] = report_detail::to_json(*in.simulation, *in.sim_config);
    if (in.consistency) j["consistency"] = to_string(*in.consistency);
    return j;
}

// Serializes a report with a trailing newline. dump() is deterministic for
// identical inputs, which is what makes golden reports byte-stable.
inline std::string report_to_string(const nlohmann::ordered_json& j) {
    return j.dump(2) + "\n";
}

// ============================================================
// Drift profile CSV
// ============================================================

inline constexpr const char* kStatsCsvHeader =
    "x,mu,v,nu,up_part,down_part,p_up,p_down,two_x_mu,rho,x_rho_minus_1";

// One row per grid point per component; components are introduced by a
// comment line so the file stays a single valid CSV stream.
inline void write_stats_csv(std::ostream& out, const ChainSpec& spec,
                            const std::vector<Component>& components,
                            const FitConfig& fit) {
    out << kStatsCsvHeader << "\n";
    auto fmt = [](double v) { return detail::format_double(v); };
    for (std::size_t idx = 0; idx < components.size(); ++idx) {
        const Component& comp = components[idx];
        out << "# component " << idx << ": states " << comp.cls.residue << " mod "
            << comp.cls.modulus << ", min_state " << comp.cls.min_state << ", step "
            << comp.step << "\n";
        std::vector<State> grid = make_restricted_grid(fit, comp.cls);
        for (State x : grid) {
            DriftQuantities q = drift(spec, x);
            double rho = q.up_part / q.down_part;
            out << x << ',' << fmt(q.mu) << ',' << fmt(q.v) << ',' << fmt(q.nu) << ','
                << fmt(q.up_part) << ',' << fmt(q.down_part) << ',' << fmt(q.p_up) << ','
                << fmt(q.p_down) << ',' << fmt(2.0 * static_cast<double>(x) * q.mu) << ','
                << fmt(rho) << ',' << fmt(static_cast<double>(x) * (rho - 1.0)) << "\n";
        }
    }
}

}  // namespace lamperti

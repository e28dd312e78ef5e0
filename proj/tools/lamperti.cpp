// Command-line front end: classify / stats / simulate over JSON chain specs.
//
// Exit codes: 0 = success (definite verdict for classify), 2 = the chain
// was classified Inconclusive, 1 = any error. Reports go to --out (default
// stdout); the one-line human summary always goes to stderr.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "lamperti/chain.hpp"
#include "lamperti/criteria.hpp"
#include "lamperti/drift_stats.hpp"
#include "lamperti/log.hpp"
#include "lamperti/report.hpp"
#include "lamperti/simulator.hpp"
#include "lamperti/spec_io.hpp"
#include "lamperti/splitter.hpp"

namespace {

using namespace lamperti;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitInconclusive = 2;

struct CommonFlags {
    std::string spec_path;
    std::string out = "-";
    bool strict_prob = false;
};

struct GridFlags {
    std::string grid;       // x0:growth:points
    double fit_tol = -1.0;  // <0 means keep default
};

struct SimFlags {
    long long paths = 1000;
    long long steps = 100000;
    long long x0 = 50;
    long long r = 10;
    unsigned long long seed = 42;
    std::string trace;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("spec", flags.spec_path, "chain spec JSON file")->required();
    cmd->add_option("--out", flags.out, "output file, '-' for stdout")
        ->capture_default_str();
    cmd->add_flag("--strict-prob", flags.strict_prob,
                  "reject probabilities outside [0,1] instead of clipping");
}

void add_grid(CLI::App* cmd, GridFlags& flags) {
    cmd->add_option("--grid", flags.grid,
                    "fit grid as x0:growth:points (default 16:2:12)");
    cmd->add_option("--fit-tol", flags.fit_tol,
                    "relative residual below which a fitted limit counts as converged "
                    "(default 0.001)");
}

void add_sim(CLI::App* cmd, SimFlags& flags) {
    cmd->add_option("--paths", flags.paths, "number of simulated paths")
        ->capture_default_str();
    cmd->add_option("--steps", flags.steps, "steps per path")->capture_default_str();
    cmd->add_option("--x0", flags.x0, "start state")->capture_default_str();
    cmd->add_option("--r", flags.r, "return level: a path returns when it hits [0,r]")
        ->capture_default_str();
    cmd->add_option("--seed", flags.seed, "master seed")->capture_default_str();
    cmd->add_option("--trace", flags.trace, "write per-path trace CSV to this file");
}

FitConfig parse_grid(const std::string& text, const FitConfig& base) {
    FitConfig cfg = base;
    if (text.empty()) return cfg;
    double x0 = 0, growth = 0;
    int points = 0;
    char tail = 0;
    if (std::sscanf(text.c_str(), "%lf:%lf:%d%c", &x0, &growth, &points, &tail) != 3)
        throw Error("--grid expects x0:growth:points, got \"" + text + "\"");
    if (x0 < 1.0 || growth <= 1.0 || points < 1)
        throw Error("--grid needs x0 >= 1, growth > 1, points >= 1");
    cfg.x0 = x0;
    cfg.growth = growth;
    cfg.points = points;
    return cfg;
}

SimConfig to_sim_config(const SimFlags& flags) {
    if (flags.paths < 1 || flags.steps < 1 || flags.x0 < 0 || flags.r < 0)
        throw Error("simulation flags must be nonnegative (paths and steps >= 1)");
    SimConfig cfg;
    cfg.n_paths = flags.paths;
    cfg.n_steps = flags.steps;
    cfg.x0 = flags.x0;
    cfg.return_level = flags.r;
    cfg.master_seed = flags.seed;
    return cfg;
}

// Owns the output stream choice so report writers can stay stream-agnostic.
class OutFile {
public:
    explicit OutFile(const std::string& path) {
        if (path != "-") {
            file_.open(path, std::ios::binary);
            if (!file_) throw Error("cannot open output file " + path);
        }
    }
    std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }
    void finish() {
        if (file_.is_open()) {
            file_.flush();
            if (!file_) throw Error("failed writing output file");
        } else {
            std::cout.flush();
        }
    }

private:
    std::ofstream file_;
};

class CsvTrace : public TraceSink {
public:
    explicit CsvTrace(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw Error("cannot open trace file " + path);
        out_ << "path,step,x\n";
    }
    void row(long long path, long long step, State x) override {
        out_ << path << ',' << step << ',' << x << '\n';
    }

private:
    std::ofstream out_;
};

std::string format_summary_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

int run_classify(const CommonFlags& common, const GridFlags& grid, bool with_sim,
                 const SimFlags& sim_flags, long long truncation, double theta_gap) {
    LoadedSpec loaded = load_chain_spec_file(common.spec_path, common.strict_prob);
    log_info("loaded " + loaded.name + " from " + common.spec_path);

    CriteriaConfig cfg;
    cfg.fit = parse_grid(grid.grid, cfg.fit);
    if (grid.fit_tol > 0) cfg.fit.fit_tol = grid.fit_tol;
    if (truncation > 0) cfg.truncation = truncation;
    if (theta_gap > 0) cfg.transience_gap = theta_gap;

    CombinedReport report = classify(loaded.spec, cfg);
    log_info("classified " + loaded.name + ": " + to_string(report.headline.label));

    std::optional<SimReport> sim;
    SimConfig sim_cfg;
    std::optional<Consistency> consistency;
    if (with_sim) {
        sim_cfg = to_sim_config(sim_flags);
        sim = simulate(loaded.spec, sim_cfg);
        consistency = consistency_check(*sim, report.headline);
    }

    ReportInputs in;
    in.name = loaded.name;
    in.kind = loaded.spec.kind();
    in.classification = &report;
    in.criteria_config = &cfg;
    if (sim) {
        in.simulation = &*sim;
        in.sim_config = &sim_cfg;
        in.consistency = &*consistency;
    }
    OutFile out(common.out);
    out.stream() << report_to_string(make_report(in));
    out.finish();

    std::ostringstream summary;
    summary << loaded.name << ": " << to_string(report.headline.label);
    if (!report.headline.criterion.empty())
        summary << " via " << report.headline.criterion;
    auto theta = report.headline.evidence.find("theta");
    if (theta != report.headline.evidence.end())
        summary << " (theta=" << format_summary_double(theta->second) << ")";
    summary << "; components=" << report.components.size()
            << "; max_R=" << format_summary_double(report.max_R);
    if (report.near_critical) summary << "; near-critical";
    if (sim) {
        summary << "; sim return_fraction=" << format_summary_double(sim->return_fraction)
                << "; consistency=" << to_string(*consistency);
    }
    std::cerr << summary.str() << "\n";

    return report.headline.label == Label::Inconclusive ? kExitInconclusive : kExitOk;
}

int run_stats(const CommonFlags& common, const GridFlags& grid, long long truncation) {
    LoadedSpec loaded = load_chain_spec_file(common.spec_path, common.strict_prob);
    FitConfig fit;
    fit = parse_grid(grid.grid, fit);

    std::vector<Component> components;
    std::string note;
    try {
        Decomposition dec = decompose(loaded.spec, truncation > 0 ? truncation : 4096);
        components = dec.components;
    } catch (const Error& e) {
        // Fall back to the full lattice as one component.
        components.push_back(
            Component{ResidueClass{1, 0, loaded.spec.interior_min()}, 1, {}});
        note = e.what();
    }

    OutFile out(common.out);
    write_stats_csv(out.stream(), loaded.spec, components, fit);
    out.finish();

    std::ostringstream summary;
    summary << loaded.name << ": drift profile over " << components.size()
            << " component(s), " << fit.points << " points each";
    if (!note.empty()) summary << " (decomposition skipped: " << note << ")";
    std::cerr << summary.str() << "\n";
    return kExitOk;
}

int run_simulate(const CommonFlags& common, const SimFlags& flags) {
    LoadedSpec loaded = load_chain_spec_file(common.spec_path, common.strict_prob);
    SimConfig cfg = to_sim_config(flags);

    std::unique_ptr<CsvTrace> trace;
    if (!flags.trace.empty()) trace = std::make_unique<CsvTrace>(flags.trace);
    log_info("simulating " + loaded.name + ": " + std::to_string(cfg.n_paths) +
             " paths x " + std::to_string(cfg.n_steps) + " steps");
    SimReport report = simulate(loaded.spec, cfg, trace.get());

    ReportInputs in;
    in.name = loaded.name;
    in.kind = loaded.spec.kind();
    in.simulation = &report;
    in.sim_config = &cfg;
    OutFile out(common.out);
    out.stream() << report_to_string(make_report(in));
    out.finish();

    std::cerr << loaded.name
              << ": return_fraction=" << format_summary_double(report.return_fraction)
              << "; median_final=" << format_summary_double(report.median_final)
              << "; escape_indicator=" << format_summary_double(report.escape_indicator)
              << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Recurrence/transience toolkit for nonnegative integer chains"};
    app.require_subcommand(1);

    CommonFlags classify_common, stats_common, sim_common;
    GridFlags classify_grid, stats_grid;
    SimFlags classify_sim, sim_flags;
    long long classify_truncation = 0, stats_truncation = 0;
    double theta_gap = 0;
    bool with_sim = false;

    CLI::App* classify_cmd =
        app.add_subcommand("classify", "decompose, fit, and classify a chain");
    add_common(classify_cmd, classify_common);
    add_grid(classify_cmd, classify_grid);
    classify_cmd->add_option("--truncation", classify_truncation,
                             "decomposition window size (default 4096)");
    classify_cmd->add_option("--theta-gap", theta_gap,
                             "required excess of theta over 1 before declaring "
                             "transience (default 0.05)");
    classify_cmd->add_flag("--simulate", with_sim,
                           "also run the simulator and cross-check the verdict");
    add_sim(classify_cmd, classify_sim);

    CLI::App* stats_cmd =
        app.add_subcommand("stats", "emit the drift profile table as CSV");
    add_common(stats_cmd, stats_common);
    add_grid(stats_cmd, stats_grid);
    stats_cmd->add_option("--truncation", stats_truncation,
                          "decomposition window size (default 4096)");

    CLI::App* sim_cmd = app.add_subcommand("simulate", "run seeded Monte Carlo paths");
    add_common(sim_cmd, sim_common);
    add_sim(sim_cmd, sim_flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitError;
    }

    try {
        if (classify_cmd->parsed())
            return run_classify(classify_common, classify_grid, with_sim, classify_sim,
                                classify_truncation, theta_gap);
        if (stats_cmd->parsed()) return run_stats(stats_common, stats_grid, stats_truncation);
        if (sim_cmd->parsed()) return run_simulate(sim_common, sim_flags);
    } catch (const SpecLoadError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}

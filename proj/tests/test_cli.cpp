// End-to-end tests that drive the built binary through a shell, checking
// exit codes, report payloads, CSV output, and determinism.

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "json.hpp"
#include "lamperti/report.hpp"
#include "schema_check.hpp"

namespace {

using nlohmann::json;

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

const std::string& work_dir() {
    static const std::string dir = [] {
        char templ[] = "/tmp/lamperti_cli_XXXXXX";
        const char* made = mkdtemp(templ);
        return std::string(made ? made : "/tmp");
    }();
    return dir;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

RunResult run_cli(const std::string& args, const std::string& env_prefix = "") {
    static int counter = 0;
    const std::string tag = work_dir() + "/run" + std::to_string(counter++);
    const std::string out_path = tag + ".out";
    const std::string err_path = tag + ".err";
    std::string cmd = env_prefix + LAMPERTI_CLI_PATH " " + args + " >" + out_path +
                      " 2>" + err_path;
    int raw = std::system(cmd.c_str());
    RunResult result;
    if (raw != -1 && WIFEXITED(raw)) result.exit_code = WEXITSTATUS(raw);
    result.out = read_file(out_path);
    result.err = read_file(err_path);
    return result;
}

std::string corpus(const std::string& name) {
    return std::string(LAMPERTI_SOURCE_DIR "/corpus/") + name;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

json schema() {
    return json::parse(read_file(LAMPERTI_SOURCE_DIR "/schema/report.schema.json"));
}

// ============================================================
// classify
// ============================================================

TEST(CliClassify, RecurrentChainExitsZero) {
    const std::string out = work_dir() + "/sym.json";
    RunResult r = run_cli("classify " + corpus("symmetric.json") + " --out " + out);
    ASSERT_EQ(r.exit_code, 0) << r.err;
    EXPECT_NE(r.err.find("symmetric: Recurrent"), std::string::npos) << r.err;

    json j = json::parse(read_file(out));
    EXPECT_EQ(j["schema_version"], 1);
    EXPECT_EQ(j["name"], "symmetric");
    EXPECT_EQ(j["classification"]["headline"]["label"], "Recurrent");
    EXPECT_TRUE(schema_check::validate(j, schema()).empty());
}

TEST(CliClassify, TransientChainExitsZero) {
    const std::string out = work_dir() + "/c2.json";
    RunResult r = run_cli("classify " + corpus("lamperti_c2.json") + " --out " + out);
    ASSERT_EQ(r.exit_code, 0) << r.err;
    EXPECT_NE(r.err.find("lamperti_c2: Transient"), std::string::npos) << r.err;
    EXPECT_NE(r.err.find("theta="), std::string::npos) << r.err;

    json j = json::parse(read_file(out));
    EXPECT_EQ(j["classification"]["headline"]["label"], "Transient");
}

TEST(CliClassify, InconclusiveChainExitsTwo) {
    const std::string spec = work_dir() + "/c11.json";
    write_file(spec,
               R"json({"name":"c11","kind":"birth_death","p":"0.5 + 1.1/(4*x)"})json");
    const std::string out = work_dir() + "/c11_report.json";
    RunResult r = run_cli("classify " + spec + " --theta-gap 0.2 --out " + out);
    ASSERT_EQ(r.exit_code, 2) << r.err;
    json j = json::parse(read_file(out));
    EXPECT_EQ(j["classification"]["headline"]["label"], "Inconclusive");
    EXPECT_TRUE(j["classification"]["near_critical"].get<bool>());
}

TEST(CliClassify, ConfigFlagsLandInTheReport) {
    const std::string out = work_dir() + "/cfg.json";
    RunResult r = run_cli("classify " + corpus("lamperti_c2.json") +
                          " --grid 32:2:10 --fit-tol 0.01 --out " + out);
    ASSERT_EQ(r.exit_code, 0) << r.err;
    json cfg = json::parse(read_file(out))["classification"]["config"];
    EXPECT_EQ(cfg["grid_x0"].get<double>(), 32.0);
    EXPECT_EQ(cfg["grid_points"].get<int>(), 10);
    EXPECT_EQ(cfg["fit_tol"].get<double>(), 0.01);
}

TEST(CliClassify, SimulateFlagAddsSimulationAndConsistency) {
    const std::string out = work_dir() + "/sym_sim.json";
    RunResult r = run_cli("classify " + corpus("symmetric.json") +
                          " --simulate --paths 50 --steps 2000 --x0 20 --out " + out);
    ASSERT_EQ(r.exit_code, 0) << r.err;
    EXPECT_NE(r.err.find("sim return_fraction="), std::string::npos) << r.err;

    json j = json::parse(read_file(out));
    ASSERT_TRUE(j.contains("simulation"));
    EXPECT_EQ(j["simulation"]["config"]["n_paths"].get<long long>(), 50);
    EXPECT_EQ(j["simulation"]["config"]["x0"].get<long long>(), 20);
    EXPECT_EQ(j["consistency"], "Consistent");
    EXPECT_TRUE(schema_check::validate(j, schema()).empty());
}

TEST(CliClassify, SplittableReportValidatesAgainstSchema) {
    const std::string out = work_dir() + "/split.json";
    RunResult r = run_cli("classify " + corpus("splittable_sym.json") + " --out " + out);
    ASSERT_EQ(r.exit_code, 0) << r.err;
    EXPECT_NE(r.err.find("components=3"), std::string::npos) << r.err;
    json j = json::parse(read_file(out));
    EXPECT_EQ(j["classification"]["components"].size(), 3u);
    auto problems = schema_check::validate(j, schema());
    EXPECT_TRUE(problems.empty()) << (problems.empty() ? "" : problems[0]);
}

TEST(CliClassify, ReportOnStdoutByDefault) {
    RunResult r = run_cli("classify " + corpus("symmetric.json"));
    ASSERT_EQ(r.exit_code, 0) << r.err;
    json j = json::parse(r.out);
    EXPECT_EQ(j["name"], "symmetric");
}

// ============================================================
// error handling
// ============================================================

TEST(CliErrors, MalformedSpecNamesTheOffendingKey) {
    const std::string spec = work_dir() + "/bad.json";
    write_file(spec,
               R"json({"name":"bad","kind":"birth_death","p":"0.5","bogus":1})json");
    RunResult r = run_cli("classify " + spec);
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_NE(r.err.find("error:"), std::string::npos) << r.err;
    EXPECT_NE(r.err.find("spec load failed"), std::string::npos) << r.err;
    EXPECT_NE(r.err.find("bogus"), std::string::npos) << r.err;
}

TEST(CliErrors, MissingFileExitsOne) {
    RunResult r = run_cli("classify /nonexistent/chain.json");
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_NE(r.err.find("/nonexistent/chain.json"), std::string::npos) << r.err;
}

TEST(CliErrors, BadGridStringExitsOne) {
    RunResult r = run_cli("classify " + corpus("symmetric.json") + " --grid banana");
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_NE(r.err.find("--grid"), std::string::npos) << r.err;
}

TEST(CliErrors, HelpExitsZero) {
    RunResult r = run_cli("--help");
    EXPECT_EQ(r.exit_code, 0);
    EXPECT_NE(r.out.find("classify"), std::string::npos);
}

TEST(CliErrors, StrictProbFlagIsEnforced) {
    // p(1) = 1.5 for the c = 4 family: fine when clipped, fatal under
    // --strict-prob because the simulator starts below the clip region.
    const std::string args = "simulate " + corpus("lamperti_c4.json") +
                             " --paths 1 --steps 2 --x0 1 --out -";
    EXPECT_EQ(run_cli(args).exit_code, 0);
    RunResult r = run_cli(args + " --strict-prob");
    EXPECT_EQ(r.exit_code, 1);
    EXPECT_NE(r.err.find("error:"), std::string::npos) << r.err;
}

// ============================================================
// stats
// ============================================================

TEST(CliStats, HeaderAndFirstRowArePinned) {
    const std::string out = work_dir() + "/sym.csv";
    RunResult r = run_cli("stats " + corpus("symmetric.json") + " --out " + out);
    ASSERT_EQ(r.exit_code, 0) << r.err;
    std::vector<std::string> lines = lines_of(read_file(out));
    ASSERT_GE(lines.size(), 3u);
    EXPECT_EQ(lines[0], lamperti::kStatsCsvHeader);
    EXPECT_EQ(lines[1], "# component 0: states 0 mod 1, min_state 1, step 1");
    EXPECT_EQ(lines[2], "16,0,1,1,0.5,0.5,0.5,0.5,0,1,0");
    EXPECT_EQ(lines.size(), 2u + 12u);  // header + comment + 12 grid rows
}

TEST(CliStats, SplittableChainGetsOneBlockPerComponent) {
    const std::string out = work_dir() + "/split.csv";
    RunResult r = run_cli("stats " + corpus("splittable_sym.json") + " --out " + out);
    ASSERT_EQ(r.exit_code, 0) << r.err;
    const std::string text = read_file(out);
    EXPECT_NE(text.find("# component 0: states 0 mod 2, min_state 10, step 2"),
              std::string::npos);
    EXPECT_NE(text.find("# component 1: states 3 mod 4, min_state 11, step 4"),
              std::string::npos);
    EXPECT_NE(text.find("# component 2: states 1 mod 4, min_state 13, step 4"),
              std::string::npos);
    EXPECT_NE(r.err.find("3 component(s)"), std::string::npos) << r.err;
}

TEST(CliStats, FallsBackToOneComponentWhenDecompositionFails) {
    const std::string spec = work_dir() + "/aperiodic.json";
    write_file(spec, R"json({
        "name":"aperiodic","kind":"jump_kernel","max_jump":1,"boundary_level":1,
        "jumps":[{"jump":-1,"weight":"1"},{"jump":1,"weight":"max(0, x - 5000)"}],
        "boundary":[{"state":0,"dist":[{"jump":1,"prob":1.0}]}]})json");
    const std::string out = work_dir() + "/aperiodic.csv";
    RunResult r = run_cli("stats " + spec + " --out " + out);
    ASSERT_EQ(r.exit_code, 0) << r.err;
    EXPECT_NE(r.err.find("1 component(s)"), std::string::npos) << r.err;
    EXPECT_NE(r.err.find("decomposition skipped:"), std::string::npos) << r.err;
    std::vector<std::string> lines = lines_of(read_file(out));
    EXPECT_EQ(lines[1], "# component 0: states 0 mod 1, min_state 1, step 1");
}

// ============================================================
// simulate
// ============================================================

TEST(CliSimulate, SameSeedGivesByteIdenticalReports) {
    const std::string a = work_dir() + "/sim_a.json";
    const std::string b = work_dir() + "/sim_b.json";
    const std::string c = work_dir() + "/sim_c.json";
    const std::string args = "simulate " + corpus("symmetric.json") +
                             " --paths 20 --steps 500 ";
    ASSERT_EQ(run_cli(args + "--seed 42 --out " + a).exit_code, 0);
    ASSERT_EQ(run_cli(args + "--seed 42 --out " + b).exit_code, 0);
    ASSERT_EQ(run_cli(args + "--seed 43 --out " + c).exit_code, 0);
    const std::string text_a = read_file(a);
    ASSERT_FALSE(text_a.empty());
    EXPECT_EQ(text_a, read_file(b));
    EXPECT_NE(text_a, read_file(c));

    json j = json::parse(text_a);
    EXPECT_EQ(j["simulation"]["config"]["seed"].get<long long>(), 42);
    EXPECT_FALSE(j.contains("classification"));
    EXPECT_TRUE(schema_check::validate(j, schema()).empty());
}

TEST(CliSimulate, TraceHoldsEveryStepOfEveryPath) {
    const std::string trace = work_dir() + "/trace.csv";
    RunResult r = run_cli("simulate " + corpus("symmetric.json") +
                          " --paths 2 --steps 5 --trace " + trace + " --out -");
    ASSERT_EQ(r.exit_code, 0) << r.err;
    EXPECT_NE(r.err.find("return_fraction="), std::string::npos) << r.err;
    std::vector<std::string> lines = lines_of(read_file(trace));
    ASSERT_EQ(lines.size(), 1u + 2u * 6u);  // header + 2 paths x (5 steps + start)
    EXPECT_EQ(lines[0], "path,step,x");
    EXPECT_EQ(lines[1], "0,0,50");
    EXPECT_EQ(lines[7], "1,0,50");
}

TEST(CliSimulate, LogEnvTurnsOnStderrDiagnostics) {
    RunResult quiet = run_cli("simulate " + corpus("symmetric.json") +
                              " --paths 2 --steps 10 --out -");
    EXPECT_EQ(quiet.err.find("[info]"), std::string::npos) << quiet.err;
    RunResult loud = run_cli("simulate " + corpus("symmetric.json") +
                             " --paths 2 --steps 10 --out -",
                             "LAMPERTI_LOG=1 ");
    EXPECT_NE(loud.err.find("[info]"), std::string::npos) << loud.err;
}

}  // namespace

#include "lamperti/simulator.hpp"

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "lamperti/chain.hpp"
#include "lamperti/expr.hpp"
#include "lamperti/verdict.hpp"

using namespace lamperti;

namespace {

ChainSpec symmetric() { return ChainSpec::birth_death(parse_expression("0.5")); }

ChainSpec lamperti_family(double c) {
    return ChainSpec::birth_death(
        parse_expression("0.5 + " + std::to_string(c) + "/(4*x)"));
}

struct CollectTrace : TraceSink {
    std::vector<State> xs;
    void row(long long, long long, State x) override { xs.push_back(x); }
};

SimConfig small_config() {
    SimConfig cfg;
    cfg.n_paths = 64;
    cfg.n_steps = 4000;
    cfg.x0 = 50;
    cfg.return_level = 10;
    return cfg;
}

// ============================================================
// Determinism
// ============================================================

TEST(Simulate, SameSeedSameReport) {
    SimReport a = simulate(symmetric(), small_config());
    SimReport b = simulate(symmetric(), small_config());
    EXPECT_EQ(a.return_fraction, b.return_fraction);
    EXPECT_EQ(a.median_final, b.median_final);
    EXPECT_EQ(a.escape_indicator, b.escape_indicator);
    EXPECT_EQ(a.min_over_tail.q1, b.min_over_tail.q1);
    EXPECT_EQ(a.min_over_tail.q3, b.min_over_tail.q3);
}

TEST(Simulate, DifferentSeedDifferentPaths) {
    SimConfig other = small_config();
    other.master_seed = 43;
    SimReport a = simulate(symmetric(), small_config());
    SimReport b = simulate(symmetric(), other);
    EXPECT_TRUE(a.return_fraction != b.return_fraction ||
                a.median_final != b.median_final ||
                a.min_over_tail.q3 != b.min_over_tail.q3);
}

TEST(Simulate, PathsAreIndependentOfBatchOrder) {
    // Path i's stream depends only on (master_seed, i), so any prefix of
    // paths reproduces exactly.
    CollectTrace two, four;
    SimConfig cfg = small_config();
    cfg.n_steps = 100;
    cfg.n_paths = 2;
    simulate(symmetric(), cfg, &two);
    cfg.n_paths = 4;
    simulate(symmetric(), cfg, &four);
    ASSERT_EQ(two.xs.size(), 2u * 101u);
    for (std::size_t i = 0; i < two.xs.size(); ++i) EXPECT_EQ(two.xs[i], four.xs[i]);
}

// ============================================================
// Path law sanity
// ============================================================

TEST(Simulate, TraceStartsAtX0AndMovesByLegalJumps) {
    CollectTrace trace;
    SimConfig cfg = small_config();
    cfg.n_paths = 3;
    cfg.n_steps = 500;
    simulate(symmetric(), cfg, &trace);
    ASSERT_EQ(trace.xs.size(), 3u * 501u);
    for (int p = 0; p < 3; ++p) {
        std::size_t base = static_cast<std::size_t>(p) * 501u;
        EXPECT_EQ(trace.xs[base], 50);
        for (std::size_t s = 1; s <= 500; ++s) {
            State prev = trace.xs[base + s - 1], next = trace.xs[base + s];
            EXPECT_GE(next, 0);
            EXPECT_LE(std::llabs(next - prev), 1);
            if (prev == 0) EXPECT_EQ(next, 1);  // reflecting boundary
            if (prev > 0) EXPECT_NE(next, prev);
        }
    }
}

TEST(Simulate, RescaledPathsAreScaledCopies) {
    ChainSpec base = symmetric();
    ChainSpec scaled = rescale(base, 3);
    SimConfig cfg_base = small_config();
    cfg_base.n_paths = 4;
    cfg_base.n_steps = 1500;
    cfg_base.x0 = 37;
    cfg_base.return_level = 5;
    SimConfig cfg_scaled = cfg_base;
    cfg_scaled.x0 = 3 * cfg_base.x0;
    cfg_scaled.return_level = 3 * cfg_base.return_level;

    CollectTrace a, b;
    simulate(base, cfg_base, &a);
    simulate(scaled, cfg_scaled, &b);
    ASSERT_EQ(a.xs.size(), b.xs.size());
    for (std::size_t i = 0; i < a.xs.size(); ++i) EXPECT_EQ(3 * a.xs[i], b.xs[i]);
}

TEST(Simulate, OneStepFrequenciesMatchTheKernel) {
    // chi-square on the three-way boundary split at state 0.
    ChainSpec sp = ChainSpec::splittable_example(
        parse_expression("0.5"), parse_expression("0.5"), parse_expression("0.5"));
    SimConfig cfg;
    cfg.n_paths = 30000;
    cfg.n_steps = 1;
    cfg.x0 = 0;
    cfg.return_level = 0;
    CollectTrace trace;
    simulate(sp, cfg, &trace);
    long long n2 = 0, n5 = 0, n7 = 0;
    for (std::size_t i = 1; i < trace.xs.size(); i += 2) {
        switch (trace.xs[i]) {
            case 2: ++n2; break;
            case 5: ++n5; break;
            case 7: ++n7; break;
            default: FAIL() << "illegal one-step target " << trace.xs[i];
        }
    }
    double e = 30000.0 / 3.0;
    double chi2 = (n2 - e) * (n2 - e) / e + (n5 - e) * (n5 - e) / e +
                  (n7 - e) * (n7 - e) / e;
    EXPECT_LT(chi2, 13.8);  // 0.999 quantile, 2 dof
}

// ============================================================
// Report statistics
// ============================================================

TEST(Simulate, ReturnRequiresCrossingTheEscapeGate) {
    // Start below the return level: the gate at 2r must open first, so a
    // path that never climbs past 2r does not count as a return.
    ChainSpec strong_up = lamperti_family(50.0);
    SimConfig cfg;
    cfg.n_paths = 200;
    cfg.n_steps = 400;
    cfg.x0 = 0;
    cfg.return_level = 10;
    SimReport rep = simulate(strong_up, cfg);
    // Paths begin inside [0, r] but have not yet exceeded 2r.
    EXPECT_LT(rep.return_fraction, 0.5);
}

TEST(Simulate, RecurrentChainReturnsTransientChainEscapes) {
    SimConfig cfg = small_config();
    cfg.n_paths = 200;
    cfg.n_steps = 20000;
    SimReport sym = simulate(symmetric(), cfg);
    EXPECT_GT(sym.return_fraction, 0.5);

    SimReport c4 = simulate(lamperti_family(4.0), cfg);
    EXPECT_LT(c4.return_fraction, 0.1);
    EXPECT_GT(c4.escape_indicator, 0.9);
    EXPECT_GT(c4.median_final, 200.0);
    EXPECT_GT(c4.min_over_tail.q1, 50.0);
}

TEST(Simulate, QuartilesAreOrderedAndWithinRange) {
    SimReport rep = simulate(symmetric(), small_config());
    EXPECT_LE(rep.min_over_tail.min, rep.min_over_tail.q1);
    EXPECT_LE(rep.min_over_tail.q1, rep.min_over_tail.median);
    EXPECT_LE(rep.min_over_tail.median, rep.min_over_tail.q3);
    EXPECT_LE(rep.min_over_tail.q3, rep.min_over_tail.max);
    EXPECT_GE(rep.min_over_tail.min, 0.0);
}

// ============================================================
// Verdict cross-check
// ============================================================

TEST(Consistency, TensionOnlyWhenSimulationContradictsTheVerdict) {
    SimReport returning;
    returning.return_fraction = 0.97;
    SimReport escaping;
    escaping.return_fraction = 0.02;

    Verdict recurrent;
    recurrent.label = Label::Recurrent;
    Verdict transient;
    transient.label = Label::Transient;
    Verdict inconclusive;
    inconclusive.label = Label::Inconclusive;

    EXPECT_EQ(consistency_check(returning, recurrent), Consistency::Consistent);
    EXPECT_EQ(consistency_check(escaping, recurrent), Consistency::Tension);
    EXPECT_EQ(consistency_check(escaping, transient), Consistency::Consistent);
    EXPECT_EQ(consistency_check(returning, transient), Consistency::Tension);
    EXPECT_EQ(consistency_check(returning, inconclusive), Consistency::NotApplicable);
    EXPECT_EQ(consistency_check(escaping, inconclusive), Consistency::NotApplicable);
}

}  // namespace

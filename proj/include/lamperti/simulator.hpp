#pragma once

// Seeded Monte-Carlo path engine. Every path draws from its own RNG stream
// derived from (master_seed, path_index), so reports are bit-identical for
// any execution order. Sampling is inverse-CDF over the ascending jump
// support, consuming exactly one 64-bit draw per step; rescaled chains
// therefore consume randomness identically to their base chain.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "lamperti/chain.hpp"
#include "lamperti/error.hpp"
#include "lamperti/verdict.hpp"

namespace lamperti {

struct SimConfig {
    long long n_paths = 1000;
    long long n_steps = 100000;
    State x0 = 50;
    State return_level = 10;  // r: returns are hits of [0, r]
    std::uint64_t master_seed = 42;
};

struct Quartiles {
    double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

struct SimReport {
    long long n_paths = 0;
    long long n_steps = 0;
    // Fraction of paths that hit [0, r] after first exceeding 2r.
    double return_fraction = 0.0;
    double median_final = 0.0;
    // Per-path minimum over the last n_steps/2, summarized.
    Quartiles min_over_tail;
    // Fraction of paths whose running minimum over the final quarter
    // stays above x0.
    double escape_indicator = 0.0;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline double to_unit_interval(std::uint64_t bits) {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Interpolated quantile (linear between order statistics) on a sorted vector.
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0.0;
    double pos = q * static_cast<double>(sorted.size() - 1);
    std::size_t lo = static_cast<std::size_t>(pos);
    std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

struct CumulativeDist {
    std::vector<std::pair<double, State>> cum;  // (cumulative prob, jump)
};

inline CumulativeDist build_cumulative(const JumpDistribution& d) {
    CumulativeDist c;
    double run = 0.0;
    c.cum.reserve(d.entries.size());
    for (const auto& e : d.entries) {
        run += e.prob;
        c.cum.push_back({run, e.jump});
    }
    return c;
}

// Per-simulation kernel cache: dense for small states, map beyond.
class KernelCache {
public:
    explicit KernelCache(const ChainSpec& spec) : spec_(spec), dense_(kDense) {}

    const CumulativeDist& at(State x) {
        if (x >= 0 && x < static_cast<State>(kDense)) {
            CumulativeDist& slot = dense_[static_cast<std::size_t>(x)];
            if (slot.cum.empty()) slot = build_cumulative(spec_.kernel(x));
            return slot;
        }
        auto it = sparse_.find(x);
        if (it == sparse_.end()) {
            it = sparse_.emplace(x, build_cumulative(spec_.kernel(x))).first;
        }
        return it->second;
    }

private:
    static constexpr std::size_t kDense = 1u << 17;
    const ChainSpec& spec_;
    std::vector<CumulativeDist> dense_;
    std::unordered_map<State, CumulativeDist> sparse_;
};

}  // namespace detail

// Stream seed for one path; fixed mixing so results never depend on worker
// assignment.
inline std::uint64_t path_seed(std::uint64_t master_seed, long long path_index) {
    return detail::splitmix64(master_seed + 0x9e3779b97f4a7c15ULL *
                                                static_cast<std::uint64_t>(
                                                    path_index + 1));
}

// Inverse-CDF draw: first support point whose cumulative probability
// exceeds u; the last point absorbs rounding slack.
inline State sample_jump(const detail::CumulativeDist& dist, double u) {
    for (const auto& [cum, jump] : dist.cum) {
        if (u < cum) return jump;
    }
    return dist.cum.back().second;
}

// Per-path trace hook (CSV dump lives in the CLI).
struct TraceSink {
    virtual ~TraceSink() = default;
    virtual void row(long long path, long long step, State x) = 0;
};

inline SimReport simulate(const ChainSpec& spec, const SimConfig& cfg,
                          TraceSink* trace = nullptr) {
    if (cfg.n_paths < 1 || cfg.n_steps < 1 || cfg.return_level < 0 || cfg.x0 < 0) {
        throw InvalidSpec("simulation needs n_paths >= 1, n_steps >= 1, "
                          "x0 >= 0, return level >= 0");
    }
    detail::KernelCache cache(spec);

    const long long n = cfg.n_steps;
    const long long half_start = n - n / 2 + 1;     // steps in the last half
    const long long quarter_start = n - n / 4 + 1;  // steps in the final quarter
    const State escape_gate = 2 * cfg.return_level;

    long long returned_paths = 0;
    long long escaped_paths = 0;
    std::vector<double> finals, tail_mins;
    finals.reserve(static_cast<std::size_t>(cfg.n_paths));
    tail_mins.reserve(static_cast<std::size_t>(cfg.n_paths));

    for (long long p = 0; p < cfg.n_paths; ++p) {
        std::mt19937_64 rng(path_seed(cfg.master_seed, p));
        State x = cfg.x0;
        bool exceeded = x > escape_gate;
        bool returned = false;
        State min_half = std::numeric_limits<State>::max();
        State min_quarter = std::numeric_limits<State>::max();
        if (trace) trace->row(p, 0, x);
        for (long long t = 1; t <= n; ++t) {
            double u = detail::to_unit_interval(rng());
            x += sample_jump(cache.at(x), u);
            if (trace) trace->row(p, t, x);
            if (exceeded) {
                if (!returned && x <= cfg.return_level) returned = true;
            } else if (x > escape_gate) {
                exceeded = true;
            }
            if (t >= half_start && x < min_half) min_half = x;
            if (t >= quarter_start && x < min_quarter) min_quarter = x;
        }
        if (returned) ++returned_paths;
        if (min_quarter > cfg.x0) ++escaped_paths;
        finals.push_back(static_cast<double>(x));
        tail_mins.push_back(static_cast<double>(min_half));
    }

    std::sort(finals.begin(), finals.end());
    std::sort(tail_mins.begin(), tail_mins.end());

    SimReport rep;
    rep.n_paths = cfg.n_paths;
    rep.n_steps = cfg.n_steps;
    rep.return_fraction =
        static_cast<double>(returned_paths) / static_cast<double>(cfg.n_paths);
    rep.escape_indicator =
        static_cast<double>(escaped_paths) / static_cast<double>(cfg.n_paths);
    rep.median_final = detail::quantile_sorted(finals, 0.5);
    rep.min_over_tail.min = tail_mins.front();
    rep.min_over_tail.q1 = detail::quantile_sorted(tail_mins, 0.25);
    rep.min_over_tail.median = detail::quantile_sorted(tail_mins, 0.5);
    rep.min_over_tail.q3 = detail::quantile_sorted(tail_mins, 0.75);
    rep.min_over_tail.max = tail_mins.back();
    return rep;
}

enum class Consistency { Consistent, Tension, NotApplicable };

inline const char* to_string(Consistency c) {
    switch (c) {
        case Consistency::Consistent: return "Consistent";
        case Consistency::Tension: return "Tension";
        case Consistency::NotApplicable: return "NotApplicable";
    }
    return "NotApplicable";
}

// Loose empirical agreement rule: simulation annotates analytic verdicts,
// never overrides them. Near-critical chains are expected to show Tension.
inline Consistency consistency_check(const SimReport& report,
                                     const Verdict& verdict) {
    if (verdict.label == Label::Inconclusive) return Consistency::NotApplicable;
    if (verdict.label == Label::Recurrent && report.return_fraction < 0.5) {
        return Consistency::Tension;
    }
    if (verdict.label == Label::Transient && report.return_fraction > 0.5) {
        return Consistency::Tension;
    }
    return Consistency::Consistent;
}

inline Consistency consistency_check(const ChainSpec& spec, const Verdict& verdict,
                                     const SimConfig& cfg) {
    if (verdict.label == Label::Inconclusive) return Consistency::NotApplicable;
    return consistency_check(simulate(spec, cfg), verdict);
}

}  // namespace lamperti

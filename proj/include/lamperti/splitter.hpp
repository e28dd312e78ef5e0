#pragma once

// Splittable-structure detection. Partitions the reachable states above a
// boundary level into weakly connected components of the interior transition
// graph, verifies each component is exactly an arithmetic progression, and
// extracts per-component unit-lattice sub-chains. Weak (not strong)
// connectivity defines value sets: transience breaks downward reachability
// but not set membership.

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <queue>
#include <string>
#include <vector>

#include "lamperti/chain.hpp"
#include "lamperti/drift_stats.hpp"
#include "lamperti/error.hpp"
#include "lamperti/verdict.hpp"

namespace lamperti {

struct Component {
    ResidueClass cls;                 // modulus, residue, min observed state
    State step = 1;                   // gcd of interior jump magnitudes
    std::vector<State> entry_states;  // interior states reachable from the boundary
};

struct Decomposition {
    std::vector<Component> components;
    State boundary_level = 0;  // states below are boundary region
    State truncation = 0;

    std::size_t l() const noexcept { return components.size(); }
};

namespace detail {

struct RawPartition {
    std::vector<std::vector<State>> interior_components;  // sorted states
    std::vector<State> reachable_boundary;                // states < b
};

// BFS reachability from state 0 within [0, N], then union-find over interior
// states using interior-to-interior edges only.
inline RawPartition build_partition(const ChainSpec& spec, State N, State b) {
    std::vector<char> reach(static_cast<std::size_t>(N) + 1, 0);
    std::queue<State> frontier;
    reach[0] = 1;
    frontier.push(0);
    while (!frontier.empty()) {
        State s = frontier.front();
        frontier.pop();
        for (const auto& e : spec.kernel(s).entries) {
            State t = s + e.jump;
            if (t <= N && !reach[static_cast<std::size_t>(t)]) {
                reach[static_cast<std::size_t>(t)] = 1;
                frontier.push(t);
            }
        }
    }

    std::vector<State> parent(static_cast<std::size_t>(N) + 1);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](State s) {
        while (parent[static_cast<std::size_t>(s)] != s) {
            parent[static_cast<std::size_t>(s)] =
                parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(s)])];
            s = parent[static_cast<std::size_t>(s)];
        }
        return s;
    };
    auto unite = [&](State a, State c) {
        a = find(a);
        c = find(c);
        if (a != c) parent[static_cast<std::size_t>(std::max(a, c))] = std::min(a, c);
    };
    for (State s = b; s <= N; ++s) {
        if (!reach[static_cast<std::size_t>(s)]) continue;
        for (const auto& e : spec.kernel(s).entries) {
            State t = s + e.jump;
            if (t >= b && t <= N) unite(s, t);
        }
    }

    std::map<State, std::vector<State>> by_root;
    for (State s = b; s <= N; ++s) {
        if (reach[static_cast<std::size_t>(s)]) by_root[find(s)].push_back(s);
    }
    RawPartition part;
    for (auto& [root, states] : by_root) {
        part.interior_components.push_back(std::move(states));
    }
    for (State s = 0; s < b; ++s) {
        if (reach[static_cast<std::size_t>(s)]) part.reachable_boundary.push_back(s);
    }
    return part;
}

inline std::vector<std::vector<State>> clip_partition(
    const std::vector<std::vector<State>>& comps) {
    std::vector<std::vector<State>> clipped;
    for (const auto& c : comps) {
        clipped.emplace_back(c.begin(),
                             c.begin() + std::min<std::size_t>(c.size(), 256));
    }
    return clipped;
}

}  // namespace detail

// Decomposes the chain into closed value sets over the truncated state space
// [0, N]. Components are canonically ordered by smallest state.
inline Decomposition decompose(const ChainSpec& spec, State N = 4096) {
    if (N < 64) throw InvalidSpec("truncation must be at least 64");
    State b = spec.interior_min();
    State J = spec.max_jump();
    if (N < b + 8 * J || N < 2 * b) {
        throw TruncationTooSmall("truncation " + std::to_string(N) +
                                 " too small for boundary level " +
                                 std::to_string(b) + " and max jump " +
                                 std::to_string(J));
    }

    detail::RawPartition half = detail::build_partition(spec, N / 2, b);
    detail::RawPartition full = detail::build_partition(spec, N, b);
    if (half.interior_components.size() != full.interior_components.size()) {
        throw TruncationTooSmall(
            "component count changed between N/2 and N (" +
            std::to_string(half.interior_components.size()) + " vs " +
            std::to_string(full.interior_components.size()) + ")");
    }

    Decomposition dec;
    dec.boundary_level = b;
    dec.truncation = N;
    for (const auto& states : full.interior_components) {
        if (states.size() < 8) {
            throw NotEventuallyPeriodic(
                "interior component with only " + std::to_string(states.size()) +
                    " states below truncation; cannot infer lattice structure",
                detail::clip_partition(full.interior_components));
        }
        Component comp;
        comp.cls.min_state = states.front();

        State modulus = 0;
        for (State s : states) modulus = std::gcd(modulus, s - states.front());
        if (modulus == 0) modulus = 1;
        comp.cls.modulus = modulus;
        comp.cls.residue = ((states.front() % modulus) + modulus) % modulus;

        // The component must be exactly its residue class within [min, N].
        std::size_t expect =
            static_cast<std::size_t>((N - states.front()) / modulus) + 1;
        if (states.size() != expect) {
            throw NotEventuallyPeriodic(
                "component states do not fill the residue class " +
                    std::to_string(comp.cls.residue) + " mod " +
                    std::to_string(modulus) + " up to truncation",
                detail::clip_partition(full.interior_components));
        }

        State step = 0;
        for (State s : states) {
            for (const auto& e : spec.kernel(s).entries) {
                State t = s + e.jump;
                if (t >= b && t <= N && e.jump != 0) {
                    step = std::gcd(step, std::abs(e.jump));
                }
            }
        }
        if (step == 0) {
            throw NotEventuallyPeriodic(
                "component starting at " + std::to_string(states.front()) +
                    " has no interior movement",
                detail::clip_partition(full.interior_components));
        }
        comp.step = step;

        // Spot-check that the inferred structure extends past the truncation:
        // jumps from extrapolated states in (N, 4N] must stay in the class.
        for (int i = 1; i <= 32; ++i) {
            State probe = snap_to_lattice(N + i * ((3 * N) / 32), comp.cls);
            if (probe > 4 * N) break;
            for (const auto& e : spec.kernel(probe).entries) {
                State t = probe + e.jump;
                if (t >= b && ((t - comp.cls.residue) % modulus + modulus) %
                                      modulus != 0) {
                    throw NotEventuallyPeriodic(
                        "jump " + std::to_string(e.jump) + " from state " +
                            std::to_string(probe) +
                            " leaves the inferred residue class",
                        detail::clip_partition(full.interior_components));
                }
            }
        }
        dec.components.push_back(std::move(comp));
    }
    if (dec.components.empty()) {
        throw NotEventuallyPeriodic("no interior states reachable from 0",
                                    detail::clip_partition(full.interior_components));
    }

    for (State s : full.reachable_boundary) {
        for (const auto& e : spec.kernel(s).entries) {
            State t = s + e.jump;
            if (t < b || t > N) continue;
            for (auto& comp : dec.components) {
                if ((t - comp.cls.residue) % comp.cls.modulus == 0 &&
                    t >= comp.cls.min_state) {
                    if (!std::binary_search(comp.entry_states.begin(),
                                            comp.entry_states.end(), t)) {
                        comp.entry_states.insert(
                            std::upper_bound(comp.entry_states.begin(),
                                             comp.entry_states.end(), t),
                            t);
                    }
                }
            }
        }
    }
    return dec;
}

namespace detail {

// x -> modulus*x + residue, applied symbolically.
inline ExprPtr substitute_affine(const ExprPtr& e, State m, State r);

struct SubstVisitor {
    State m, r;
    ExprPtr operator()(const Expr::Literal& l) const { return make_literal(l.value); }
    ExprPtr operator()(const Expr::Var&) const {
        ExprPtr scaled = m == 1
                             ? make_var()
                             : make_binary('*', make_literal(static_cast<double>(m)),
                                           make_var());
        return r == 0 ? scaled
                      : make_binary('+', scaled,
                                    make_literal(static_cast<double>(r)));
    }
    ExprPtr operator()(const Expr::Neg& n) const {
        return make_neg(substitute_affine(n.operand, m, r));
    }
    ExprPtr operator()(const Expr::Binary& b) const {
        return make_binary(b.op, substitute_affine(b.lhs, m, r),
                           substitute_affine(b.rhs, m, r));
    }
    ExprPtr operator()(const Expr::Call& c) const {
        std::vector<ExprPtr> args;
        args.reserve(c.args.size());
        for (const auto& a : c.args) args.push_back(substitute_affine(a, m, r));
        return make_call(c.fn, std::move(args));
    }
};

inline ExprPtr substitute_affine(const ExprPtr& e, State m, State r) {
    return std::visit(SubstVisitor{m, r}, e->node);
}

}  // namespace detail

// Unit-lattice sub-chain for one component: kernel at u equals the original
// kernel at modulus*u + residue with jumps divided by the step; the original
// boundary region is collapsed to a deterministic reset toward the interior.
inline ChainSpec extract_subchain(const ChainSpec& spec, const Component& comp) {
    const State m = comp.cls.modulus;
    const State r = comp.cls.residue;
    switch (spec.kind()) {
        case ChainSpec::Kind::BirthDeath:
            if (m != 1 || r != 0) {
                throw NonLatticeJump("birth-death chain has no sub-lattice " +
                                     std::to_string(r) + " mod " + std::to_string(m));
            }
            return spec;
        case ChainSpec::Kind::SplittableExample: {
            if (m == 2 && r == 0) {
                return ChainSpec::birth_death(spec.splittable_p_even(),
                                              spec.strict_prob());
            }
            if (m == 4 && r == 1) {
                return ChainSpec::birth_death(spec.splittable_p_mod1(),
                                              spec.strict_prob());
            }
            if (m == 4 && r == 3) {
                return ChainSpec::birth_death(spec.splittable_p_mod3(),
                                              spec.strict_prob());
            }
            throw NonLatticeJump("unexpected component " + std::to_string(r) +
                                 " mod " + std::to_string(m) +
                                 " for the three-way splittable chain");
        }
        case ChainSpec::Kind::Rescaled: {
            State k = spec.rescaled_factor();
            if (m % k != 0 || r % k != 0) {
                throw NonLatticeJump("component " + std::to_string(r) + " mod " +
                                     std::to_string(m) +
                                     " is not on the rescaled lattice");
            }
            Component inner_comp;
            inner_comp.cls.modulus = m / k;
            inner_comp.cls.residue = r / k;
            inner_comp.cls.min_state = comp.cls.min_state / k;
            inner_comp.step = comp.step / k;
            return extract_subchain(spec.rescaled_inner(), inner_comp);
        }
        case ChainSpec::Kind::JumpKernel: {
            if (comp.step != m) {
                throw NonLatticeJump("component step " + std::to_string(comp.step) +
                                     " does not match lattice modulus " +
                                     std::to_string(m));
            }
            std::vector<ChainSpec::WeightedJump> jumps;
            for (const auto& wj : spec.jump_kernel_jumps()) {
                if (wj.jump % m != 0) {
                    throw NonLatticeJump("interior jump " + std::to_string(wj.jump) +
                                         " is not a multiple of the step " +
                                         std::to_string(m));
                }
                jumps.push_back({wj.jump / m,
                                 detail::substitute_affine(wj.weight, m, r)});
            }
            // Sub-chain states below this level correspond to original states
            // inside the boundary region; they reset deterministically upward.
            State b = spec.interior_min();
            State u_b = (b - r + m - 1) / m;
            if (u_b < 1) u_b = 1;
            std::map<State, JumpDistribution> boundary;
            for (State u = 0; u < u_b; ++u) {
                boundary[u] = JumpDistribution{{{+1, 1.0}}};
            }
            State max_jump = spec.max_jump() / m;
            if (max_jump < 1) max_jump = 1;
            return ChainSpec::jump_kernel(std::move(jumps), std::move(boundary),
                                          u_b, max_jump, spec.strict_prob());
        }
    }
    throw NonLatticeJump("unknown chain kind");
}

// Theorem-style aggregation over per-component verdicts: any transient
// component makes the whole chain transient; all recurrent makes it
// recurrent; anything else is inconclusive.
inline Verdict aggregate(const std::vector<Verdict>& verdicts) {
    if (verdicts.empty()) throw EmptyList();
    Verdict out;
    out.criterion = "aggregate";
    bool any_transient = false, all_recurrent = true;
    for (std::size_t j = 0; j < verdicts.size(); ++j) {
        if (verdicts[j].label == Label::Transient) any_transient = true;
        if (verdicts[j].label != Label::Recurrent) all_recurrent = false;
        out.notes.push_back("component " + std::to_string(j) + ": " +
                            to_string(verdicts[j].label));
    }
    if (any_transient) {
        out.label = Label::Transient;
        out.margin = 1.0;
    } else if (all_recurrent) {
        out.label = Label::Recurrent;
        out.margin = -1.0;
    } else {
        out.label = Label::Inconclusive;
        out.margin = 0.0;
        out.notes.push_back(
            "no component is transient and not all are recurrent; "
            "cannot certify either side");
    }
    out.evidence["components"] = static_cast<double>(verdicts.size());
    return out;
}

}  // namespace lamperti

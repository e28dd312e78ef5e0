#pragma once

// Nonnegative integer-lattice Markov chains as samplable, enumerable
// transition kernels. Kernels have finite support and bounded jumps, so all
// conditional increment moments are exact finite sums and the (2+eps)-moment
// bound holds automatically.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "lamperti/error.hpp"
#include "lamperti/expr.hpp"

namespace lamperti {

using State = long long;

// One-step jump law at a fixed state. Entries are sorted by ascending jump
// and zero-probability support points are dropped.
struct JumpDistribution {
    struct Entry {
        State jump;
        double prob;

        friend bool operator==(const Entry& a, const Entry& b) {
            return a.jump == b.jump && a.prob == b.prob;
        }
    };

    std::vector<Entry> entries;

    friend bool operator==(const JumpDistribution& a, const JumpDistribution& b) {
        return a.entries == b.entries;
    }

    // Checks the distribution invariants at state x: probabilities
    // nonnegative and summing to 1 within 1e-12, jumps ascending, and no
    // jump below the origin.
    void validate(State x) const {
        double total = 0.0;
        State prev = std::numeric_limits<State>::min();
        for (const auto& e : entries) {
            if (e.prob < 0.0) {
                throw InvalidProbability("negative probability at state " +
                                         std::to_string(x));
            }
            if (e.jump <= prev) {
                throw InvalidSpec("jump support not strictly ascending at state " +
                                  std::to_string(x));
            }
            if (x + e.jump < 0) {
                throw InvalidSpec("jump " + std::to_string(e.jump) + " from state " +
                                  std::to_string(x) + " leaves the lattice");
            }
            prev = e.jump;
            total += e.prob;
        }
        if (std::abs(total - 1.0) > 1e-12) {
            throw InvalidProbability("probabilities at state " + std::to_string(x) +
                                     " sum to " + detail::format_double(total));
        }
    }
};

// Per-state conditional increment statistics, all exact finite sums over the
// jump support.
struct DriftQuantities {
    State x = 0;
    double mu = 0.0;         // E[dX]
    double v = 0.0;          // E[dX^2]
    double nu = 0.0;         // E[|dX|]
    double up_part = 0.0;    // U(x) = E[(dX)^+]
    double down_part = 0.0;  // D(x) = E[(dX)^-]
    double p_up = 0.0;
    double p_down = 0.0;
    double p_stay = 0.0;
};

class ChainSpec;

ChainSpec rescale(const ChainSpec& spec, State k);

// Declarative chain description. Immutable value type; copies share the
// underlying representation and are safe to use concurrently.
class ChainSpec {
public:
    enum class Kind { BirthDeath, JumpKernel, SplittableExample, Rescaled };

    struct WeightedJump {
        State jump;
        ExprPtr weight;
    };

    // Birth-and-death chain: P(0,1) = 1 and, for x >= 1, up-step with
    // probability clip01(p(x)), down-step otherwise.
    static ChainSpec birth_death(ExprPtr p, bool strict_prob = false) {
        return ChainSpec(BirthDeath{std::move(p)}, strict_prob);
    }

    // General bounded-jump kernel: interior states use the weighted jump
    // list normalized per state; states below `boundary_level` use the
    // explicit table.
    static ChainSpec jump_kernel(std::vector<WeightedJump> jumps,
                                 std::map<State, JumpDistribution> boundary,
                                 State boundary_level, State max_jump,
                                 bool strict_prob = false) {
        if (jumps.empty()) throw InvalidSpec("jump kernel needs at least one jump");
        std::sort(jumps.begin(), jumps.end(),
                  [](const WeightedJump& a, const WeightedJump& b) {
                      return a.jump < b.jump;
                  });
        for (std::size_t i = 1; i < jumps.size(); ++i) {
            if (jumps[i].jump == jumps[i - 1].jump) {
                throw InvalidSpec("duplicate jump " + std::to_string(jumps[i].jump));
            }
        }
        if (boundary_level < 0) throw InvalidSpec("boundary_level must be >= 0");
        for (const auto& wj : jumps) {
            if (std::abs(wj.jump) > max_jump) {
                throw InvalidSpec("jump " + std::to_string(wj.jump) +
                                  " exceeds declared max_jump");
            }
            // Interior states start at boundary_level, so a down jump past
            // it must still land at >= 0; anything else is a spec error,
            // not a runtime clamp.
            if (wj.jump < -boundary_level) {
                throw InvalidSpec("jump " + std::to_string(wj.jump) +
                                  " from an interior state can leave the lattice");
            }
        }
        for (State s = 0; s < boundary_level; ++s) {
            auto it = boundary.find(s);
            if (it == boundary.end()) {
                throw InvalidSpec("missing boundary distribution for state " +
                                  std::to_string(s));
            }
            it->second.validate(s);
            for (const auto& e : it->second.entries) {
                if (std::abs(e.jump) > max_jump) {
                    throw InvalidSpec("boundary jump at state " + std::to_string(s) +
                                      " exceeds declared max_jump");
                }
            }
        }
        if (boundary.size() != static_cast<std::size_t>(boundary_level)) {
            throw InvalidSpec("boundary table has entries outside [0, boundary_level)");
        }
        return ChainSpec(JumpKernel{std::move(jumps), std::move(boundary),
                                    boundary_level, max_jump},
                         strict_prob);
    }

    // Three-way splittable chain: step-2 walk on the even states and
    // step-4 walks on the two odd residue classes {5,9,...} and {7,11,...},
    // with boundary transitions 0 -> {2,5,7} at probability 1/3 each and
    // 1 -> 0, 3 -> 0. The p-expressions are evaluated in sub-chain
    // coordinates: p_even(i) drives state 2i, p_mod1(i) state 4i+1,
    // p_mod3(i) state 4i+3.
    static ChainSpec splittable_example(ExprPtr p_even, ExprPtr p_mod1,
                                        ExprPtr p_mod3, bool strict_prob = false) {
        return ChainSpec(Splittable{std::move(p_even), std::move(p_mod1),
                                    std::move(p_mod3)},
                         strict_prob);
    }

    Kind kind() const noexcept {
        struct V {
            Kind operator()(const BirthDeath&) const { return Kind::BirthDeath; }
            Kind operator()(const JumpKernel&) const { return Kind::JumpKernel; }
            Kind operator()(const Splittable&) const {
                return Kind::SplittableExample;
            }
            Kind operator()(const Rescaled&) const { return Kind::Rescaled; }
        };
        return std::visit(V{}, impl_->node);
    }

    bool strict_prob() const noexcept { return impl_->strict; }

    // Largest absolute jump over all states; guarantees the (2+eps)-moment
    // bound B <= max_jump^(2+eps).
    State max_jump() const {
        struct V {
            State operator()(const BirthDeath&) const { return 1; }
            State operator()(const JumpKernel& jk) const { return jk.max_jump; }
            State operator()(const Splittable&) const { return 7; }
            State operator()(const Rescaled& r) const {
                return r.k * r.inner->max_jump();
            }
        };
        return std::visit(V{}, impl_->node);
    }

    // Largest state governed by an explicit boundary rule.
    State explicit_boundary_top() const {
        struct V {
            State operator()(const BirthDeath&) const { return 0; }
            State operator()(const JumpKernel& jk) const {
                return jk.boundary_level > 0 ? jk.boundary_level - 1 : 0;
            }
            State operator()(const Splittable&) const { return 3; }
            State operator()(const Rescaled& r) const {
                return r.k * r.inner->explicit_boundary_top();
            }
        };
        return std::visit(V{}, impl_->node);
    }

    // First state from which no boundary rule can be reached in one step:
    // the default interior floor for decomposition.
    State interior_min() const { return explicit_boundary_top() + max_jump(); }

    // Exact one-step jump law at state x.
    JumpDistribution kernel(State x) const {
        if (x < 0) throw InvalidSpec("kernel queried at negative state");
        struct V {
            State x;
            bool strict;
            JumpDistribution operator()(const BirthDeath& bd) const {
                if (x == 0) return {{{+1, 1.0}}};
                double p = probability(bd.p, x, strict);
                JumpDistribution d;
                if (1.0 - p > 0.0) d.entries.push_back({-1, 1.0 - p});
                if (p > 0.0) d.entries.push_back({+1, p});
                return d;
            }
            JumpDistribution operator()(const JumpKernel& jk) const {
                if (x < jk.boundary_level) return jk.boundary.at(x);
                double total = 0.0;
                std::vector<double> w(jk.jumps.size());
                for (std::size_t i = 0; i < jk.jumps.size(); ++i) {
                    w[i] = eval(jk.jumps[i].weight, static_cast<double>(x));
                    if (w[i] < 0.0) {
                        throw InvalidProbability(
                            "negative weight for jump " +
                            std::to_string(jk.jumps[i].jump) + " at state " +
                            std::to_string(x));
                    }
                    total += w[i];
                }
                if (total <= 0.0) {
                    throw InvalidSpec("all jump weights vanish at state " +
                                      std::to_string(x));
                }
                JumpDistribution d;
                for (std::size_t i = 0; i < jk.jumps.size(); ++i) {
                    if (w[i] > 0.0) d.entries.push_back({jk.jumps[i].jump, w[i] / total});
                }
                return d;
            }
            JumpDistribution operator()(const Splittable& sp) const {
                if (x == 0) {
                    return {{{+2, 1.0 / 3.0}, {+5, 1.0 / 3.0}, {+7, 1.0 / 3.0}}};
                }
                if (x == 1) return {{{-1, 1.0}}};
                if (x == 3) return {{{-3, 1.0}}};
                State step, coord;
                const ExprPtr* p_expr;
                if (x % 2 == 0) {
                    step = 2;
                    coord = x / 2;
                    p_expr = &sp.p_even;
                } else if (x % 4 == 1) {
                    step = 4;
                    coord = (x - 1) / 4;
                    p_expr = &sp.p_mod1;
                } else {
                    step = 4;
                    coord = (x - 3) / 4;
                    p_expr = &sp.p_mod3;
                }
                double p = probability(*p_expr, coord, strict);
                JumpDistribution d;
                if (1.0 - p > 0.0) d.entries.push_back({-step, 1.0 - p});
                if (p > 0.0) d.entries.push_back({+step, p});
                return d;
            }
            JumpDistribution operator()(const Rescaled& r) const {
                if (x % r.k != 0) return {{{0, 1.0}}};  // unreachable off-lattice
                JumpDistribution inner = r.inner->kernel(x / r.k);
                for (auto& e : inner.entries) e.jump *= r.k;
                return inner;
            }
        };
        return std::visit(V{x, impl_->strict}, impl_->node);
    }

    // Accessors used by the splitter's structure-aware extraction and by
    // spec serialization.
    const ExprPtr& birth_death_p() const { return std::get<BirthDeath>(impl_->node).p; }
    const ExprPtr& splittable_p_even() const {
        return std::get<Splittable>(impl_->node).p_even;
    }
    const ExprPtr& splittable_p_mod1() const {
        return std::get<Splittable>(impl_->node).p_mod1;
    }
    const ExprPtr& splittable_p_mod3() const {
        return std::get<Splittable>(impl_->node).p_mod3;
    }
    const ChainSpec& rescaled_inner() const {
        return *std::get<Rescaled>(impl_->node).inner;
    }
    State rescaled_factor() const { return std::get<Rescaled>(impl_->node).k; }
    const std::vector<WeightedJump>& jump_kernel_jumps() const {
        return std::get<JumpKernel>(impl_->node).jumps;
    }
    const std::map<State, JumpDistribution>& jump_kernel_boundary() const {
        return std::get<JumpKernel>(impl_->node).boundary;
    }
    State jump_kernel_boundary_level() const {
        return std::get<JumpKernel>(impl_->node).boundary_level;
    }

private:
    struct BirthDeath {
        ExprPtr p;
    };
    struct JumpKernel {
        std::vector<WeightedJump> jumps;
        std::map<State, JumpDistribution> boundary;
        State boundary_level;
        State max_jump;
    };
    struct Splittable {
        ExprPtr p_even, p_mod1, p_mod3;
    };
    struct Rescaled {
        std::shared_ptr<const ChainSpec> inner;  // indirection: ChainSpec is incomplete here
        State k;
    };

    struct Impl {
        std::variant<BirthDeath, JumpKernel, Splittable, Rescaled> node;
        bool strict;
    };

    template <typename T>
    ChainSpec(T node, bool strict)
        : impl_(std::make_shared<const Impl>(Impl{std::move(node), strict})) {}

    static double probability(const ExprPtr& expr, State x, bool strict) {
        double v = eval(expr, static_cast<double>(x));
        if (v < 0.0 || v > 1.0) {
            if (strict) {
                throw InvalidProbability("probability " + detail::format_double(v) +
                                         " outside [0,1] at state " +
                                         std::to_string(x));
            }
            v = std::min(std::max(v, 0.0), 1.0);
        }
        return v;
    }

    friend ChainSpec rescale(const ChainSpec& spec, State k);

    std::shared_ptr<const Impl> impl_;
};

inline JumpDistribution kernel(const ChainSpec& spec, State x) {
    return spec.kernel(x);
}

// The chain Y = k*X on the sub-lattice {k*x}. States not divisible by k are
// never reachable from the lattice and carry an absorbing self-loop.
inline ChainSpec rescale(const ChainSpec& spec, State k) {
    if (k < 1) throw InvalidSpec("rescale factor must be >= 1");
    if (k == 1) return spec;
    return ChainSpec(ChainSpec::Rescaled{std::make_shared<const ChainSpec>(spec), k},
                     spec.strict_prob());
}

// Exact conditional increment statistics at state x.
inline DriftQuantities drift(const ChainSpec& spec, State x) {
    JumpDistribution d = spec.kernel(x);
    DriftQuantities q;
    q.x = x;
    for (const auto& e : d.entries) {
        double j = static_cast<double>(e.jump);
        q.mu += j * e.prob;
        q.v += j * j * e.prob;
        q.nu += std::abs(j) * e.prob;
        if (e.jump > 0) {
            q.up_part += j * e.prob;
            q.p_up += e.prob;
        } else if (e.jump < 0) {
            q.down_part += -j * e.prob;
            q.p_down += e.prob;
        } else {
            q.p_stay += e.prob;
        }
    }
    return q;
}

// B = max over x in [0, x_max] of E[|dX|^(2+eps) | X = x]. Bounded jumps
// make this at most max_jump^(2+eps), which is asserted.
inline double check_moment_condition(const ChainSpec& spec, double epsilon,
                                     State x_max) {
    if (!(epsilon > 0.0 && epsilon <= 1.0)) {
        throw InvalidSpec("epsilon must lie in (0, 1]");
    }
    double bound = 0.0;
    for (State x = 0; x <= x_max; ++x) {
        JumpDistribution d = spec.kernel(x);
        double m = 0.0;
        for (const auto& e : d.entries) {
            m += std::pow(std::abs(static_cast<double>(e.jump)), 2.0 + epsilon) *
                 e.prob;
        }
        bound = std::max(bound, m);
    }
    double cap = std::pow(static_cast<double>(spec.max_jump()), 2.0 + epsilon);
    if (bound > cap * (1.0 + 1e-12)) {
        throw InvalidSpec("moment bound " + detail::format_double(bound) +
                          " exceeds max_jump^(2+eps) = " +
                          detail::format_double(cap));
    }
    return bound;
}

}  // namespace lamperti

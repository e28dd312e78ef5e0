#pragma once

// JSON chain-spec files <-> ChainSpec.
//
// Loading is strict: unknown keys are rejected at every object level, and
// every expression field is parsed even after the first failure so that a
// single load reports all problems at once (SpecLoadError::issues()).

#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "lamperti/chain.hpp"
#include "lamperti/error.hpp"
#include "lamperti/expr.hpp"

namespace lamperti {

struct LoadedSpec {
    std::string name;
    ChainSpec spec;
};

namespace spec_io_detail {

using json = nlohmann::json;

struct Issues {
    std::vector<std::string> items;

    void add(const std::string& path, const std::string& message) {
        items.push_back(path + ": " + message);
    }
    [[noreturn]] void raise() const { throw SpecLoadError(items); }
};

inline std::string type_name(const json& j) {
    switch (j.type()) {
        case json::value_t::null: return "null";
        case json::value_t::boolean: return "boolean";
        case json::value_t::string: return "string";
        case json::value_t::array: return "array";
        case json::value_t::object: return "object";
        case json::value_t::number_integer:
        case json::value_t::number_unsigned: return "integer";
        case json::value_t::number_float: return "number";
        default: return "unknown";
    }
}

inline void check_keys(const json& j, const std::string& path,
                       std::initializer_list<const char*> allowed, Issues& issues) {
    for (const auto& [key, value] : j.items()) {
        (void)value;
        bool known = false;
        for (const char* a : allowed)
            if (key == a) { known = true; break; }
        if (!known) issues.add(path.empty() ? "/" : path, "unknown key \"" + key + "\"");
    }
}

inline const json* require(const json& j, const std::string& path, const char* key,
                           Issues& issues) {
    auto it = j.find(key);
    if (it == j.end()) {
        issues.add(path.empty() ? "/" : path,
                   std::string("missing required key \"") + key + "\"");
        return nullptr;
    }
    return &*it;
}

inline std::optional<long long> get_int(const json& j, const std::string& path,
                                        const char* key, Issues& issues, bool required) {
    auto it = j.find(key);
    if (it == j.end()) {
        if (required)
            issues.add(path.empty() ? "/" : path,
                       std::string("missing required key \"") + key + "\"");
        return std::nullopt;
    }
    if (!it->is_number_integer()) {
        issues.add(path + "/" + key, "expected integer, got " + type_name(*it));
        return std::nullopt;
    }
    return it->get<long long>();
}

// Parses an expression field; on failure records the issue and returns null.
inline ExprPtr get_expr(const json& j, const std::string& path, const char* key,
                        Issues& issues) {
    const json* field = require(j, path, key, issues);
    if (!field) return nullptr;
    if (!field->is_string()) {
        issues.add(path + "/" + key, "expected expression string, got " + type_name(*field));
        return nullptr;
    }
    try {
        return parse_expression(field->get<std::string>());
    } catch (const SyntaxError& e) {
        issues.add(path + "/" + key, e.what());
    } catch (const UnknownIdentifier& e) {
        issues.add(path + "/" + key, e.what());
    }
    return nullptr;
}

inline std::optional<ChainSpec> load_impl(const json& j, const std::string& path,
                                          bool strict, Issues& issues);

inline std::optional<ChainSpec> load_birth_death(const json& j, const std::string& path,
                                                 bool strict, Issues& issues) {
    check_keys(j, path, {"name", "kind", "max_jump", "p"}, issues);
    ExprPtr p = get_expr(j, path, "p", issues);
    auto mj = get_int(j, path, "max_jump", issues, false);
    if (mj && *mj != 1) issues.add(path + "/max_jump", "birth_death chains have max_jump 1");
    if (!p || !issues.items.empty()) return std::nullopt;
    return ChainSpec::birth_death(std::move(p), strict);
}

inline std::optional<ChainSpec> load_splittable(const json& j, const std::string& path,
                                                bool strict, Issues& issues) {
    check_keys(j, path, {"name", "kind", "max_jump", "p_even", "p_mod1", "p_mod3"}, issues);
    ExprPtr p_even = get_expr(j, path, "p_even", issues);
    ExprPtr p_mod1 = get_expr(j, path, "p_mod1", issues);
    ExprPtr p_mod3 = get_expr(j, path, "p_mod3", issues);
    auto mj = get_int(j, path, "max_jump", issues, false);
    if (mj && *mj != 7)
        issues.add(path + "/max_jump", "splittable_example chains have max_jump 7");
    if (!p_even || !p_mod1 || !p_mod3 || !issues.items.empty()) return std::nullopt;
    return ChainSpec::splittable_example(std::move(p_even), std::move(p_mod1),
                                         std::move(p_mod3), strict);
}

inline std::optional<ChainSpec> load_jump_kernel(const json& j, const std::string& path,
                                                 bool strict, Issues& issues) {
    check_keys(j, path, {"name", "kind", "max_jump", "jumps", "boundary", "boundary_level"},
               issues);
    auto max_jump = get_int(j, path, "max_jump", issues, true);
    auto boundary_level = get_int(j, path, "boundary_level", issues, true);

    std::vector<ChainSpec::WeightedJump> jumps;
    const json* jl = require(j, path, "jumps", issues);
    if (jl) {
        if (!jl->is_array()) {
            issues.add(path + "/jumps", "expected array, got " + type_name(*jl));
        } else {
            for (std::size_t i = 0; i < jl->size(); ++i) {
                const json& entry = (*jl)[i];
                std::string epath = path + "/jumps/" + std::to_string(i);
                if (!entry.is_object()) {
                    issues.add(epath, "expected object, got " + type_name(entry));
                    continue;
                }
                check_keys(entry, epath, {"jump", "weight"}, issues);
                auto jump = get_int(entry, epath, "jump", issues, true);
                ExprPtr weight = get_expr(entry, epath, "weight", issues);
                if (jump && weight) jumps.push_back({*jump, std::move(weight)});
            }
        }
    }

    std::map<State, JumpDistribution> boundary;
    auto bt = j.find("boundary");
    if (bt != j.end()) {
        if (!bt->is_array()) {
            issues.add(path + "/boundary", "expected array, got " + type_name(*bt));
        } else {
            for (std::size_t i = 0; i < bt->size(); ++i) {
                const json& row = (*bt)[i];
                std::string rpath = path + "/boundary/" + std::to_string(i);
                if (!row.is_object()) {
                    issues.add(rpath, "expected object, got " + type_name(row));
                    continue;
                }
                check_keys(row, rpath, {"state", "dist"}, issues);
                auto state = get_int(row, rpath, "state", issues, true);
                JumpDistribution dist;
                const json* dl = require(row, rpath, "dist", issues);
                if (dl && !dl->is_array()) {
                    issues.add(rpath + "/dist", "expected array, got " + type_name(*dl));
                    dl = nullptr;
                }
                if (dl) {
                    for (std::size_t a = 0; a < dl->size(); ++a) {
                        const json& atom = (*dl)[a];
                        std::string apath = rpath + "/dist/" + std::to_string(a);
                        if (!atom.is_object()) {
                            issues.add(apath, "expected object, got " + type_name(atom));
                            continue;
                        }
                        check_keys(atom, apath, {"jump", "prob"}, issues);
                        auto jump = get_int(atom, apath, "jump", issues, true);
                        auto pit = atom.find("prob");
                        if (pit == atom.end()) {
                            issues.add(apath, "missing required key \"prob\"");
                        } else if (!pit->is_number()) {
                            issues.add(apath + "/prob",
                                       "expected number, got " + type_name(*pit));
                        } else if (jump) {
                            dist.entries.push_back({*jump, pit->get<double>()});
                        }
                    }
                }
                if (state) {
                    if (!boundary.emplace(*state, std::move(dist)).second)
                        issues.add(rpath, "duplicate boundary state " + std::to_string(*state));
                }
            }
        }
    }

    if (!issues.items.empty() || !max_jump || !boundary_level) return std::nullopt;
    return ChainSpec::jump_kernel(std::move(jumps), std::move(boundary), *boundary_level,
                                  *max_jump, strict);
}

inline std::optional<ChainSpec> load_rescaled(const json& j, const std::string& path,
                                              bool strict, Issues& issues) {
    check_keys(j, path, {"name", "kind", "max_jump", "inner", "k"}, issues);
    auto k = get_int(j, path, "k", issues, true);
    if (k && *k < 1) issues.add(path + "/k", "scale factor must be >= 1");
    std::optional<ChainSpec> inner;
    const json* in = require(j, path, "inner", issues);
    if (in) {
        if (!in->is_object()) {
            issues.add(path + "/inner", "expected object, got " + type_name(*in));
        } else {
            inner = load_impl(*in, path + "/inner", strict, issues);
        }
    }
    auto mj = get_int(j, path, "max_jump", issues, false);
    if (!issues.items.empty() || !inner || !k) return std::nullopt;
    if (mj && *mj != k.value() * inner->max_jump()) {
        issues.add(path + "/max_jump", "inconsistent with k * inner max_jump");
        return std::nullopt;
    }
    return rescale(*inner, *k);
}

inline std::optional<ChainSpec> load_impl(const json& j, const std::string& path,
                                          bool strict, Issues& issues) {
    if (!j.is_object()) {
        issues.add(path.empty() ? "/" : path, "expected object, got " + type_name(j));
        return std::nullopt;
    }
    const json* kind = require(j, path, "kind", issues);
    if (!kind) return std::nullopt;
    if (!kind->is_string()) {
        issues.add(path + "/kind", "expected string, got " + type_name(*kind));
        return std::nullopt;
    }
    const std::string k = kind->get<std::string>();
    std::size_t before = issues.items.size();
    std::optional<ChainSpec> spec;
    try {
        if (k == "birth_death") spec = load_birth_death(j, path, strict, issues);
        else if (k == "splittable_example") spec = load_splittable(j, path, strict, issues);
        else if (k == "jump_kernel") spec = load_jump_kernel(j, path, strict, issues);
        else if (k == "rescaled") spec = load_rescaled(j, path, strict, issues);
        else issues.add(path + "/kind", "unknown kind \"" + k + "\"");
    } catch (const InvalidSpec& e) {
        // Structural validation inside the ChainSpec factory.
        issues.add(path.empty() ? "/" : path, e.what());
    }
    if (!spec && issues.items.size() == before)
        issues.add(path.empty() ? "/" : path, "could not construct chain");
    return spec;
}

}  // namespace spec_io_detail

// Builds a ChainSpec from a parsed JSON document. Throws SpecLoadError with
// one issue string per problem (all expression errors are collected, not
// just the first).
inline LoadedSpec load_chain_spec(const nlohmann::json& j, bool strict_prob = false) {
    spec_io_detail::Issues issues;
    std::string name;
    if (j.is_object()) {
        auto it = j.find("name");
        if (it == j.end()) issues.add("/", "missing required key \"name\"");
        else if (!it->is_string()) issues.add("/name", "expected string, got " +
                                              spec_io_detail::type_name(*it));
        else name = it->get<std::string>();
    }
    std::optional<ChainSpec> spec = spec_io_detail::load_impl(j, "", strict_prob, issues);
    if (!issues.items.empty() || !spec) issues.raise();
    return {std::move(name), std::move(*spec)};
}

inline LoadedSpec load_chain_spec_text(const std::string& text, bool strict_prob = false) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw SpecLoadError({std::string("JSON parse error: ") + e.what()});
    }
    return load_chain_spec(j, strict_prob);
}

inline LoadedSpec load_chain_spec_file(const std::string& path, bool strict_prob = false) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SpecLoadError({path + ": cannot open file"});
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return load_chain_spec_text(text, strict_prob);
    } catch (const SpecLoadError& e) {
        std::vector<std::string> issues;
        issues.reserve(e.issues().size());
        for (const auto& item : e.issues()) issues.push_back(path + ": " + item);
        throw SpecLoadError(std::move(issues));
    }
}

// Inverse of load_chain_spec; expression fields round-trip through to_string.
inline nlohmann::ordered_json chain_spec_to_json(const ChainSpec& spec,
                                                 const std::string& name) {
    using oj = nlohmann::ordered_json;
    oj j;
    j["name"] = name;
    switch (spec.kind()) {
        case ChainSpec::Kind::BirthDeath:
            j["kind"] = "birth_death";
            j["p"] = to_string(*spec.birth_death_p());
            break;
        case ChainSpec::Kind::SplittableExample:
            j["kind"] = "splittable_example";
            j["p_even"] = to_string(*spec.splittable_p_even());
            j["p_mod1"] = to_string(*spec.splittable_p_mod1());
            j["p_mod3"] = to_string(*spec.splittable_p_mod3());
            break;
        case ChainSpec::Kind::JumpKernel: {
            j["kind"] = "jump_kernel";
            j["max_jump"] = spec.max_jump();
            oj jumps = oj::array();
            for (const auto& wj : spec.jump_kernel_jumps()) {
                oj e;
                e["jump"] = wj.jump;
                e["weight"] = to_string(*wj.weight);
                jumps.push_back(std::move(e));
            }
            j["jumps"] = std::move(jumps);
            oj boundary = oj::array();
            for (const auto& [state, dist] : spec.jump_kernel_boundary()) {
                oj r;
                r["state"] = state;
                oj entries = oj::array();
                for (const auto& atom : dist.entries) {
                    oj a;
                    a["jump"] = atom.jump;
                    a["prob"] = atom.prob;
                    entries.push_back(std::move(a));
                }
                r["dist"] = std::move(entries);
                boundary.push_back(std::move(r));
            }
            j["boundary"] = std::move(boundary);
            j["boundary_level"] = spec.jump_kernel_boundary_level();
            break;
        }
        case ChainSpec::Kind::Rescaled: {
            j["kind"] = "rescaled";
            j["inner"] = chain_spec_to_json(spec.rescaled_inner(), name + "_inner");
            j["k"] = spec.rescaled_factor();
            break;
        }
    }
    return j;
}

}  // namespace lamperti

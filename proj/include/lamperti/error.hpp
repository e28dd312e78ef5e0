#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace lamperti {

// Base class for every error raised by the library. Callers that do not
// care about the specific failure can catch this one type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Expression language
// ---------------------------------------------------------------------------

// Malformed source text. `offset` is the byte offset of the offending
// token, `expected` describes what the parser was looking for.
class SyntaxError : public Error {
public:
    SyntaxError(std::size_t offset, std::string expected)
        : Error("syntax error at offset " + std::to_string(offset) +
                ": expected " + expected),
          offset_(offset),
          expected_(std::move(expected)) {}

    std::size_t offset() const noexcept { return offset_; }
    const std::string& expected() const noexcept { return expected_; }

private:
    std::size_t offset_;
    std::string expected_;
};

// Identifier other than `x`, `min`, `max`, `clip01`.
class UnknownIdentifier : public Error {
public:
    UnknownIdentifier(std::string name, std::size_t offset)
        : Error("unknown identifier '" + name + "' at offset " +
                std::to_string(offset)),
          name_(std::move(name)),
          offset_(offset) {}

    const std::string& name() const noexcept { return name_; }
    std::size_t offset() const noexcept { return offset_; }

private:
    std::string name_;
    std::size_t offset_;
};

// Division by an evaluated zero. Carries the printed subexpression.
class DivisionByZero : public Error {
public:
    explicit DivisionByZero(std::string subexpression)
        : Error("division by zero in '" + subexpression + "'"),
          subexpression_(std::move(subexpression)) {}

    const std::string& subexpression() const noexcept { return subexpression_; }

private:
    std::string subexpression_;
};

// Evaluation produced a non-finite value (overflow, inf - inf, ...).
class EvalOverflow : public Error {
public:
    explicit EvalOverflow(std::string subexpression)
        : Error("non-finite result evaluating '" + subexpression + "'"),
          subexpression_(std::move(subexpression)) {}

    const std::string& subexpression() const noexcept { return subexpression_; }

private:
    std::string subexpression_;
};

// ---------------------------------------------------------------------------
// Chain model
// ---------------------------------------------------------------------------

class InvalidSpec : public Error {
public:
    using Error::Error;
};

// Probability expression evaluated outside [0,1] with clipping disabled.
class InvalidProbability : public InvalidSpec {
public:
    using InvalidSpec::InvalidSpec;
};

// Spec file failed to load; carries every issue found, not just the first.
class SpecLoadError : public Error {
public:
    explicit SpecLoadError(std::vector<std::string> issues)
        : Error(join(issues)), issues_(std::move(issues)) {}

    const std::vector<std::string>& issues() const noexcept { return issues_; }

private:
    static std::string join(const std::vector<std::string>& issues) {
        std::string out = "spec load failed:";
        for (const auto& s : issues) {
            out += "\n  - " + s;
        }
        return out;
    }
    std::vector<std::string> issues_;
};

// ---------------------------------------------------------------------------
// Drift fitting
// ---------------------------------------------------------------------------

class EmptyGrid : public Error {
public:
    EmptyGrid() : Error("drift profile grid is empty") {}
    using Error::Error;
};

// 2x*mu(x) grows without bound over the grid: the chain is outside the
// asymptotic class the fits assume.
class FitDiverged : public Error {
public:
    using Error::Error;
};

// D(x) = 0 at a grid point, so the up/down ratio is undefined there.
class NonPositiveDownPart : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

class NotConverged : public Error {
public:
    using Error::Error;
};

// v(x) has no limit over the grid: the chain is not in any class A_{xi,r^2}.
class NotInClass : public Error {
public:
    using Error::Error;
};

class ZeroDownDrift : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Splitter
// ---------------------------------------------------------------------------

// Components did not stabilize to arithmetic progressions by the truncation
// level; carries the raw partition for reporting.
class NotEventuallyPeriodic : public Error {
public:
    NotEventuallyPeriodic(std::string what,
                          std::vector<std::vector<long long>> raw_partition)
        : Error(std::move(what)), raw_partition_(std::move(raw_partition)) {}

    const std::vector<std::vector<long long>>& raw_partition() const noexcept {
        return raw_partition_;
    }

private:
    std::vector<std::vector<long long>> raw_partition_;
};

class TruncationTooSmall : public Error {
public:
    using Error::Error;
};

// Interior jump not a multiple of the component step; contradicts the
// decomposition postcondition.
class NonLatticeJump : public Error {
public:
    using Error::Error;
};

class EmptyList : public Error {
public:
    EmptyList() : Error("cannot aggregate an empty verdict list") {}
    using Error::Error;
};

}  // namespace lamperti

#include "lamperti/expr.hpp"

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "lamperti/error.hpp"

using namespace lamperti;

namespace {

double ev(const std::string& text, double x) { return eval(*parse_expression(text), x); }

// ============================================================
// Parsing and evaluation
// ============================================================

TEST(ExprEval, LiteralsAndVariable) {
    EXPECT_DOUBLE_EQ(ev("0.5", 3), 0.5);
    EXPECT_DOUBLE_EQ(ev("x", 7), 7.0);
    EXPECT_DOUBLE_EQ(ev("1e-3", 1), 1e-3);
    EXPECT_DOUBLE_EQ(ev("2.5E2", 1), 250.0);
}

TEST(ExprEval, StandardPrecedence) {
    EXPECT_DOUBLE_EQ(ev("2+3*4", 0), 14.0);
    EXPECT_DOUBLE_EQ(ev("2*3+4", 0), 10.0);
    EXPECT_DOUBLE_EQ(ev("2+3*4^2", 0), 50.0);
    EXPECT_DOUBLE_EQ(ev("(2+3)*4", 0), 20.0);
    EXPECT_DOUBLE_EQ(ev("1-2-3", 0), -4.0);  // left assoc
    EXPECT_DOUBLE_EQ(ev("24/4/2", 0), 3.0);  // left assoc
}

TEST(ExprEval, PowerIsRightAssociativeWithSignedExponent) {
    EXPECT_DOUBLE_EQ(ev("2^3^2", 0), 512.0);
    EXPECT_DOUBLE_EQ(ev("2^-2", 0), 0.25);
    EXPECT_DOUBLE_EQ(ev("-2^2", 0), -4.0);  // unary minus binds looser than ^
    EXPECT_DOUBLE_EQ(ev("x^-1", 4), 0.25);
}

TEST(ExprEval, UnaryMinus) {
    EXPECT_DOUBLE_EQ(ev("-x", 3), -3.0);
    EXPECT_DOUBLE_EQ(ev("--x", 3), 3.0);
    EXPECT_DOUBLE_EQ(ev("2--3", 0), 5.0);
    EXPECT_DOUBLE_EQ(ev("-x*2", 3), -6.0);
}

TEST(ExprEval, Functions) {
    EXPECT_DOUBLE_EQ(ev("min(2, 3)", 0), 2.0);
    EXPECT_DOUBLE_EQ(ev("max(2, 3)", 0), 3.0);
    EXPECT_DOUBLE_EQ(ev("min(x, x*x)", 0.5), 0.25);
    EXPECT_DOUBLE_EQ(ev("clip01(1.7)", 0), 1.0);
    EXPECT_DOUBLE_EQ(ev("clip01(-0.3)", 0), 0.0);
    EXPECT_DOUBLE_EQ(ev("clip01(0.25)", 0), 0.25);
}

TEST(ExprEval, ChainRateFamily) {
    // p(x) = 0.5 + c/(4x) is the workhorse family in the corpus.
    EXPECT_DOUBLE_EQ(ev("0.5 + 2/(4*x)", 8), 0.5625);
    EXPECT_DOUBLE_EQ(ev("0.5 + 0.5/(4*x)", 1), 0.625);
    EXPECT_NEAR(ev("0.5 + 4/(4*x)", 1000), 0.501, 1e-15);
}

TEST(ExprEval, WhitespaceInsensitive) {
    EXPECT_DOUBLE_EQ(ev("  0.5+ 2 /(4 *x )", 8), ev("0.5+2/(4*x)", 8));
}

// ============================================================
// Error reporting
// ============================================================

TEST(ExprErrors, SyntaxErrorCarriesOffsetAndExpectation) {
    try {
        parse_expression("0.5 + ");
        FAIL() << "expected SyntaxError";
    } catch (const SyntaxError& e) {
        EXPECT_EQ(e.offset(), 6u);
        EXPECT_FALSE(e.expected().empty());
    }
}

TEST(ExprErrors, TrailingGarbageRejected) {
    try {
        parse_expression("x x");
        FAIL() << "expected SyntaxError";
    } catch (const SyntaxError& e) {
        EXPECT_EQ(e.offset(), 2u);
    }
    EXPECT_THROW(parse_expression("1 2"), SyntaxError);
    EXPECT_THROW(parse_expression(")"), SyntaxError);
    EXPECT_THROW(parse_expression(""), SyntaxError);
    EXPECT_THROW(parse_expression("min(x)"), SyntaxError);
    EXPECT_THROW(parse_expression("min(x, 1, 2)"), SyntaxError);
    EXPECT_THROW(parse_expression("+x"), SyntaxError);  // no unary plus
    EXPECT_THROW(parse_expression("2 ** 3"), SyntaxError);
}

TEST(ExprErrors, UnknownIdentifierNamesTheToken) {
    try {
        parse_expression("0.5 * zz + 1");
        FAIL() << "expected UnknownIdentifier";
    } catch (const UnknownIdentifier& e) {
        EXPECT_EQ(e.name(), "zz");
        EXPECT_EQ(e.offset(), 6u);
    }
}

TEST(ExprErrors, DeeplyNestedInputHitsTheDepthCap) {
    std::string deep(300, '(');
    deep += "x";
    deep += std::string(300, ')');
    EXPECT_THROW(parse_expression(deep), SyntaxError);

    std::string ok(100, '(');
    ok += "x";
    ok += std::string(100, ')');
    EXPECT_DOUBLE_EQ(ev(ok, 5), 5.0);
}

TEST(ExprErrors, DivisionByZeroNamesTheDenominator) {
    ExprPtr e = parse_expression("1/(x - 8)");
    EXPECT_DOUBLE_EQ(eval(*e, 10), 0.5);
    try {
        eval(*e, 8);
        FAIL() << "expected DivisionByZero";
    } catch (const DivisionByZero& err) {
        EXPECT_EQ(err.subexpression(), "x - 8");
    }
}

TEST(ExprErrors, NonFiniteResultRaisesOverflow) {
    ExprPtr e = parse_expression("x^x");
    EXPECT_DOUBLE_EQ(eval(*e, 2), 4.0);
    EXPECT_THROW(eval(*e, 1e300), EvalOverflow);
}

// ============================================================
// Round trip and structural equality
// ============================================================

TEST(ExprRoundTrip, ToStringReparsesToTheSameTree) {
    const char* cases[] = {
        "0.5",
        "x",
        "0.5 + 2/(4*x)",
        "-x^2",
        "2^-3",
        "2^3^2",
        "(1+x)*(1-x)",
        "1-2-3",
        "24/4/2",
        "min(max(x, 1), clip01(1/x))",
        "-(x+1)",
        "1/(x*(x+1))",
        "clip01(0.5 + 1/(4*x) + 1/x^2)",
    };
    for (const char* text : cases) {
        ExprPtr a = parse_expression(text);
        ExprPtr b = parse_expression(to_string(*a));
        EXPECT_TRUE(structurally_equal(*a, *b)) << text << " -> " << to_string(*a);
        // And printing is a fixed point after one round.
        EXPECT_EQ(to_string(*a), to_string(*b));
    }
}

TEST(ExprRoundTrip, StructuralEqualityDistinguishesShape) {
    EXPECT_TRUE(structurally_equal(*parse_expression("1+2*x"), *parse_expression("1 + 2 * x")));
    EXPECT_FALSE(structurally_equal(*parse_expression("1+2*x"), *parse_expression("(1+2)*x")));
    EXPECT_FALSE(structurally_equal(*parse_expression("x"), *parse_expression("-x")));
    EXPECT_FALSE(structurally_equal(*parse_expression("min(x,1)"), *parse_expression("max(x,1)")));
}

TEST(ExprRoundTrip, EvalAgreesAfterRoundTrip) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> xs(1.0, 100.0);
    const char* cases[] = {
        "0.5 + 2/(4*x)",
        "min(x, 1/x) * max(1, x - 3)",
        "clip01(0.5 - 1/(4*x))",
        "x^2 - x^-1",
    };
    for (const char* text : cases) {
        ExprPtr a = parse_expression(text);
        ExprPtr b = parse_expression(to_string(*a));
        for (int i = 0; i < 50; ++i) {
            double x = xs(rng);
            EXPECT_DOUBLE_EQ(eval(*a, x), eval(*b, x)) << text;
        }
    }
}

// ============================================================
// Robustness
// ============================================================

// The full million-input fuzz run lives in the acceptance suite; this is a
// fast regression-sized sample of the same generator.
TEST(ExprFuzz, RandomByteStringsNeverCrash) {
    std::mt19937_64 rng(20240817);
    std::uniform_int_distribution<int> len_dist(0, 48);
    std::uniform_int_distribution<int> byte_dist(0, 255);
    const std::string tokens = "x0123456789.+-*/^()min,ax ";
    std::uniform_int_distribution<std::size_t> tok_dist(0, tokens.size() - 1);
    std::bernoulli_distribution token_mode(0.5);

    for (int i = 0; i < 20000; ++i) {
        int n = len_dist(rng);
        std::string input;
        input.reserve(static_cast<std::size_t>(n));
        bool tokens_only = token_mode(rng);
        for (int k = 0; k < n; ++k) {
            input += tokens_only ? tokens[tok_dist(rng)]
                                 : static_cast<char>(byte_dist(rng));
        }
        try {
            ExprPtr e = parse_expression(input);
            ASSERT_NE(e, nullptr);
        } catch (const SyntaxError& e) {
            ASSERT_LE(e.offset(), input.size());
        } catch (const UnknownIdentifier& e) {
            ASSERT_LT(e.offset(), input.size());
        }
    }
}

}  // namespace

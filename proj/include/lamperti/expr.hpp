#pragma once

// Minimal arithmetic expression language for state-dependent transition
// probabilities and jump weights.
//
// Grammar (standard precedence, `^` binds tightest and is right-associative):
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?
//   primary := NUMBER | 'x' | IDENT '(' expr (',' expr)* ')' | '(' expr ')'
//
// There is no unary plus and no identifier other than `x`, `min`, `max`,
// `clip01`. The exponent position accepts a leading unary minus (`2^-3`),
// while `-x^2` parses as `-(x^2)`.

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "lamperti/error.hpp"

namespace lamperti {

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

enum class Func { Min, Max, Clip01 };

// Immutable AST node. Shared freely across threads after construction.
struct Expr {
    struct Literal {
        double value;
    };
    struct Var {};  // the current state `x`
    struct Neg {
        ExprPtr operand;
    };
    struct Binary {
        char op;  // one of + - * / ^
        ExprPtr lhs;
        ExprPtr rhs;
    };
    struct Call {
        Func fn;
        std::vector<ExprPtr> args;
    };

    std::variant<Literal, Var, Neg, Binary, Call> node;
};

inline ExprPtr make_literal(double v) {
    return std::make_shared<Expr>(Expr{Expr::Literal{v}});
}
inline ExprPtr make_var() { return std::make_shared<Expr>(Expr{Expr::Var{}}); }
inline ExprPtr make_neg(ExprPtr e) {
    return std::make_shared<Expr>(Expr{Expr::Neg{std::move(e)}});
}
inline ExprPtr make_binary(char op, ExprPtr a, ExprPtr b) {
    return std::make_shared<Expr>(Expr{Expr::Binary{op, std::move(a), std::move(b)}});
}
inline ExprPtr make_call(Func fn, std::vector<ExprPtr> args) {
    return std::make_shared<Expr>(Expr{Expr::Call{fn, std::move(args)}});
}

namespace detail {

inline std::string format_double(double v) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    (void)ec;
    return std::string(buf.data(), ptr);
}

inline int precedence(const Expr& e) {
    struct V {
        int operator()(const Expr::Literal&) const { return 5; }
        int operator()(const Expr::Var&) const { return 5; }
        int operator()(const Expr::Call&) const { return 5; }
        int operator()(const Expr::Neg&) const { return 3; }
        int operator()(const Expr::Binary& b) const {
            return (b.op == '+' || b.op == '-') ? 1 : (b.op == '^' ? 4 : 2);
        }
    };
    return std::visit(V{}, e.node);
}

inline const char* func_name(Func f) {
    switch (f) {
        case Func::Min: return "min";
        case Func::Max: return "max";
        default: return "clip01";
    }
}

}  // namespace detail

// Pretty-prints with the minimal parentheses needed so that re-parsing a
// parser-produced tree yields a structurally identical tree.
inline std::string to_string(const Expr& e) {
    struct V {
        std::string operator()(const Expr::Literal& l) const {
            return detail::format_double(l.value);
        }
        std::string operator()(const Expr::Var&) const { return "x"; }
        std::string operator()(const Expr::Neg& n) const {
            bool parens = detail::precedence(*n.operand) < 3;
            std::string inner = to_string(*n.operand);
            return parens ? "-(" + inner + ")" : "-" + inner;
        }
        std::string operator()(const Expr::Binary& b) const {
            int p = (b.op == '+' || b.op == '-') ? 1 : (b.op == '^' ? 4 : 2);
            int pl = detail::precedence(*b.lhs);
            int pr = detail::precedence(*b.rhs);
            bool lp, rp;
            if (b.op == '^') {  // right-associative
                lp = pl <= p;
                rp = pr < p;
            } else {  // left-associative
                lp = pl < p;
                rp = pr <= p;
            }
            std::string l = to_string(*b.lhs);
            std::string r = to_string(*b.rhs);
            if (lp) l = "(" + l + ")";
            if (rp) r = "(" + r + ")";
            return l + " " + b.op + " " + r;
        }
        std::string operator()(const Expr::Call& c) const {
            std::string out = detail::func_name(c.fn);
            out += "(";
            for (std::size_t i = 0; i < c.args.size(); ++i) {
                if (i) out += ", ";
                out += to_string(*c.args[i]);
            }
            out += ")";
            return out;
        }
    };
    return std::visit(V{}, e.node);
}

inline std::string to_string(const ExprPtr& e) { return to_string(*e); }

inline bool structurally_equal(const Expr& a, const Expr& b) {
    if (a.node.index() != b.node.index()) return false;
    struct V {
        const Expr& other;
        bool operator()(const Expr::Literal& l) const {
            return l.value == std::get<Expr::Literal>(other.node).value;
        }
        bool operator()(const Expr::Var&) const { return true; }
        bool operator()(const Expr::Neg& n) const {
            return structurally_equal(*n.operand,
                                      *std::get<Expr::Neg>(other.node).operand);
        }
        bool operator()(const Expr::Binary& x) const {
            const auto& y = std::get<Expr::Binary>(other.node);
            return x.op == y.op && structurally_equal(*x.lhs, *y.lhs) &&
                   structurally_equal(*x.rhs, *y.rhs);
        }
        bool operator()(const Expr::Call& x) const {
            const auto& y = std::get<Expr::Call>(other.node);
            if (x.fn != y.fn || x.args.size() != y.args.size()) return false;
            for (std::size_t i = 0; i < x.args.size(); ++i) {
                if (!structurally_equal(*x.args[i], *y.args[i])) return false;
            }
            return true;
        }
    };
    return std::visit(V{b}, a.node);
}

// IEEE double evaluation at state x. Division by an evaluated zero and
// non-finite intermediate results are reported, never silently propagated.
inline double eval(const Expr& e, double x) {
    struct V {
        double x;
        double operator()(const Expr::Literal& l) const { return l.value; }
        double operator()(const Expr::Var&) const { return x; }
        double operator()(const Expr::Neg& n) const { return -eval(*n.operand, x); }
        double operator()(const Expr::Binary& b) const {
            double l = eval(*b.lhs, x);
            double r = eval(*b.rhs, x);
            double v = 0.0;
            switch (b.op) {
                case '+': v = l + r; break;
                case '-': v = l - r; break;
                case '*': v = l * r; break;
                case '/':
                    // Report the denominator that vanished, not the quotient.
                    if (r == 0.0) throw DivisionByZero(to_string(*b.rhs));
                    v = l / r;
                    break;
                default: v = std::pow(l, r); break;
            }
            if (!std::isfinite(v)) {
                throw EvalOverflow(to_string(Expr{Expr::Binary{b.op, b.lhs, b.rhs}}));
            }
            return v;
        }
        double operator()(const Expr::Call& c) const {
            double a0 = eval(*c.args[0], x);
            switch (c.fn) {
                case Func::Min: return std::min(a0, eval(*c.args[1], x));
                case Func::Max: return std::max(a0, eval(*c.args[1], x));
                default: return std::min(std::max(a0, 0.0), 1.0);
            }
        }
    };
    return std::visit(V{x}, e.node);
}

inline double eval(const ExprPtr& e, double x) { return eval(*e, x); }

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

namespace detail {

enum class Tok { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, Comma, End };

struct Token {
    Tok kind;
    std::size_t offset;
    double number = 0.0;
    std::string_view ident;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) { advance(); }

    const Token& current() const noexcept { return tok_; }

    void advance() {
        while (pos_ < src_.size() &&
               std::isspace(static_cast<unsigned char>(src_[pos_]))) {
            ++pos_;
        }
        tok_.offset = pos_;
        if (pos_ >= src_.size()) {
            tok_.kind = Tok::End;
            return;
        }
        char c = src_[pos_];
        switch (c) {
            case '+': tok_.kind = Tok::Plus; ++pos_; return;
            case '-': tok_.kind = Tok::Minus; ++pos_; return;
            case '*': tok_.kind = Tok::Star; ++pos_; return;
            case '/': tok_.kind = Tok::Slash; ++pos_; return;
            case '^': tok_.kind = Tok::Caret; ++pos_; return;
            case '(': tok_.kind = Tok::LParen; ++pos_; return;
            case ')': tok_.kind = Tok::RParen; ++pos_; return;
            case ',': tok_.kind = Tok::Comma; ++pos_; return;
            default: break;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            lex_number();
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = pos_;
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
                    src_[pos_] == '_')) {
                ++pos_;
            }
            tok_.kind = Tok::Ident;
            tok_.ident = src_.substr(start, pos_ - start);
            return;
        }
        throw SyntaxError(pos_, "a number, 'x', a function call, '-', or '('");
    }

private:
    void lex_number() {
        std::size_t start = pos_;
        while (pos_ < src_.size() &&
               std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
            ++pos_;
        }
        if (pos_ + 1 < src_.size() && src_[pos_] == '.' &&
            std::isdigit(static_cast<unsigned char>(src_[pos_ + 1]))) {
            ++pos_;
            while (pos_ < src_.size() &&
                   std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                ++pos_;
            }
        }
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t mark = pos_;
            ++pos_;
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
            if (pos_ < src_.size() &&
                std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                while (pos_ < src_.size() &&
                       std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                    ++pos_;
                }
            } else {
                pos_ = mark;  // bare 'e' belongs to the next token
            }
        }
        double value = 0.0;
        auto [ptr, ec] =
            std::from_chars(src_.data() + start, src_.data() + pos_, value);
        if (ec == std::errc::result_out_of_range || !std::isfinite(value)) {
            throw SyntaxError(start, "a representable numeric literal");
        }
        if (ec != std::errc{} || ptr != src_.data() + pos_) {
            throw SyntaxError(start, "a well-formed numeric literal");
        }
        tok_.kind = Tok::Number;
        tok_.number = value;
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    Token tok_{};
};

class Parser {
public:
    explicit Parser(std::string_view src) : lex_(src) {}

    ExprPtr parse() {
        ExprPtr e = parse_expr();
        if (lex_.current().kind != Tok::End) {
            throw SyntaxError(lex_.current().offset,
                              "end of input or a binary operator");
        }
        return e;
    }

private:
    static constexpr int kMaxDepth = 200;

    struct DepthGuard {
        explicit DepthGuard(Parser& p) : parser(p) {
            if (++parser.depth_ > kMaxDepth) {
                throw SyntaxError(parser.lex_.current().offset,
                                  "expression nesting at most " +
                                      std::to_string(kMaxDepth) + " levels deep");
            }
        }
        ~DepthGuard() { --parser.depth_; }
        Parser& parser;
    };

    ExprPtr parse_expr() {
        ExprPtr lhs = parse_term();
        while (lex_.current().kind == Tok::Plus ||
               lex_.current().kind == Tok::Minus) {
            char op = lex_.current().kind == Tok::Plus ? '+' : '-';
            lex_.advance();
            lhs = make_binary(op, std::move(lhs), parse_term());
        }
        return lhs;
    }

    ExprPtr parse_term() {
        ExprPtr lhs = parse_unary();
        while (lex_.current().kind == Tok::Star ||
               lex_.current().kind == Tok::Slash) {
            char op = lex_.current().kind == Tok::Star ? '*' : '/';
            lex_.advance();
            lhs = make_binary(op, std::move(lhs), parse_unary());
        }
        return lhs;
    }

    // The depth counter tracks syntactic nesting (parens, calls, minus and
    // caret chains), not parser rule calls, so the cap means what it says.
    ExprPtr parse_unary() {
        if (lex_.current().kind == Tok::Minus) {
            DepthGuard guard(*this);
            lex_.advance();
            return make_neg(parse_unary());
        }
        return parse_power();
    }

    ExprPtr parse_power() {
        ExprPtr base = parse_primary();
        if (lex_.current().kind == Tok::Caret) {
            DepthGuard guard(*this);
            lex_.advance();
            return make_binary('^', std::move(base), parse_unary());
        }
        return base;
    }

    ExprPtr parse_primary() {
        const Token& t = lex_.current();
        switch (t.kind) {
            case Tok::Number: {
                double v = t.number;
                lex_.advance();
                return make_literal(v);
            }
            case Tok::Ident: {
                std::string_view name = t.ident;
                std::size_t offset = t.offset;
                lex_.advance();
                if (name == "x") return make_var();
                if (name == "min") return parse_call(Func::Min, 2, offset);
                if (name == "max") return parse_call(Func::Max, 2, offset);
                if (name == "clip01") return parse_call(Func::Clip01, 1, offset);
                throw UnknownIdentifier(std::string(name), offset);
            }
            case Tok::LParen: {
                DepthGuard guard(*this);
                lex_.advance();
                ExprPtr inner = parse_expr();
                expect(Tok::RParen, "')'");
                return inner;
            }
            default:
                throw SyntaxError(t.offset,
                                  "a number, 'x', a function call, '-', or '('");
        }
    }

    ExprPtr parse_call(Func fn, int arity, std::size_t offset) {
        (void)offset;
        DepthGuard guard(*this);
        expect(Tok::LParen, "'(' after function name");
        std::vector<ExprPtr> args;
        args.push_back(parse_expr());
        for (int i = 1; i < arity; ++i) {
            expect(Tok::Comma, "','");
            args.push_back(parse_expr());
        }
        expect(Tok::RParen, "')'");
        return make_call(fn, std::move(args));
    }

    void expect(Tok kind, const char* what) {
        if (lex_.current().kind != kind) {
            throw SyntaxError(lex_.current().offset, what);
        }
        lex_.advance();
    }

    Lexer lex_;
    int depth_ = 0;
};

}  // namespace detail

// Parses UTF-8 source into an AST. Throws SyntaxError or UnknownIdentifier;
// never fails in any other way, whatever bytes are supplied.
inline ExprPtr parse_expression(std::string_view source) {
    return detail::Parser(source).parse();
}

}  // namespace lamperti

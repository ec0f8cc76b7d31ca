#include "frontend_impl.hpp"

#include <cctype>

namespace nv::frontend {

using detail::parse_type_name;

std::string_view dialect_name(Dialect d) noexcept { return d == Dialect::Cm ? "cm" : "gm"; }
std::string_view language_name(Dialect d) noexcept { return d == Dialect::Cm ? "Cm" : "Gm"; }
std::string_view file_extension(Dialect d) noexcept { return d == Dialect::Cm ? ".cm" : ".gm"; }

std::optional<Dialect> parse_dialect(std::string_view s) noexcept {
    if (s == "cm" || s == "Cm") return Dialect::Cm;
    if (s == "gm" || s == "Gm") return Dialect::Gm;
    return std::nullopt;
}

mir::DialectTag dialect_tag(Dialect d) noexcept { return d == Dialect::Cm ? mir::DialectTag::Cm : mir::DialectTag::Gm; }

std::string type_name(SrcType t) {
    if (t.is_bool()) return "bool";
    return (t.is_signed ? "int" : "uint") + std::to_string(mir::bit_width(t.width));
}

std::string_view binop_symbol(BinOp op) noexcept {
    switch (op) {
    case BinOp::Add: return "+";
    case BinOp::Sub: return "-";
    case BinOp::Mul: return "*";
    case BinOp::Div: return "/";
    case BinOp::Rem: return "%";
    case BinOp::And: return "&";
    case BinOp::Or: return "|";
    case BinOp::Xor: return "^";
    case BinOp::Shl: return "<<";
    case BinOp::Shr: return ">>";
    case BinOp::Eq: return "==";
    case BinOp::Ne: return "!=";
    case BinOp::Lt: return "<";
    case BinOp::Le: return "<=";
    case BinOp::Gt: return ">";
    case BinOp::Ge: return ">=";
    case BinOp::LogAnd: return "&&";
    case BinOp::LogOr: return "||";
    }
    return "?";
}

bool is_comparison(BinOp op) noexcept { return op >= BinOp::Eq && op <= BinOp::Ge; }
bool is_logical(BinOp op) noexcept { return op == BinOp::LogAnd || op == BinOp::LogOr; }

namespace detail {

std::optional<SrcType> parse_type_name(std::string_view name, Dialect d) {
    using mir::Type;
    if (name == "bool") return SrcType::boolean();
    if (d == Dialect::Cm) {
        if (name == "int") return SrcType{Type::I32, true};
        if (name.size() > 2 && name.substr(name.size() - 2) == "_t") name.remove_suffix(2);
    } else {
        if (name == "int") return SrcType{Type::I64, true};
        if (name == "uint") return SrcType{Type::I64, false};
        if (name == "byte") return SrcType{Type::I8, false};
    }
    const bool is_unsigned = name.rfind("uint", 0) == 0;
    if (!is_unsigned && name.rfind("int", 0) != 0) return std::nullopt;
    const auto bits = name.substr(is_unsigned ? 4 : 3);
    Type t;
    if (bits == "8") t = Type::I8;
    else if (bits == "16") t = Type::I16;
    else if (bits == "32") t = Type::I32;
    else if (bits == "64") t = Type::I64;
    else return std::nullopt;
    return SrcType{t, !is_unsigned};
}

int precedence(BinOp op, Dialect d) {
    if (d == Dialect::Cm) {
        switch (op) {
        case BinOp::Mul: case BinOp::Div: case BinOp::Rem: return 10;
        case BinOp::Add: case BinOp::Sub: return 9;
        case BinOp::Shl: case BinOp::Shr: return 8;
        case BinOp::Lt: case BinOp::Le: case BinOp::Gt: case BinOp::Ge: return 7;
        case BinOp::Eq: case BinOp::Ne: return 6;
        case BinOp::And: return 5;
        case BinOp::Xor: return 4;
        case BinOp::Or: return 3;
        case BinOp::LogAnd: return 2;
        case BinOp::LogOr: return 1;
        }
    }
    switch (op) {
    case BinOp::Mul: case BinOp::Div: case BinOp::Rem: case BinOp::Shl: case BinOp::Shr: case BinOp::And: return 5;
    case BinOp::Add: case BinOp::Sub: case BinOp::Or: case BinOp::Xor: return 4;
    case BinOp::LogAnd: return 2;
    case BinOp::LogOr: return 1;
    default: return 3;
    }
}

} // namespace detail

namespace {

enum class Tok { Ident, Int, Punct, End };

struct Token {
    Tok kind = Tok::End;
    std::string text;
    std::uint64_t value = 0;
    bool synthetic = false;  // semicolon inserted at a Gm line break
    int line = 1, column = 1;
};

std::vector<Token> lex(std::string_view src, Dialect d) {
    static const char *const kPuncts[] = {
        "<<=", ">>=", "&^", "&&", "||", "==", "!=", "<=", ">=", "<<", ">>", "+=", "-=", "*=", "/=", "%=",
        "&=",  "|=",  "^=", "++", "--", ":=", "+",  "-",  "*",  "/",  "%",  "&",  "|",  "^",  "~",  "!",
        "<",   ">",   "=",  "(",  ")",  "{",  "}",  ";",  ",",  "?",  ":",
    };
    std::vector<Token> out;
    int line = 1, col = 1;
    std::size_t i = 0;
    auto advance = [&](std::size_t n) {
        for (std::size_t k = 0; k < n; ++k, ++i) {
            if (src[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
    };
    auto ends_statement = [&] {
        if (out.empty()) return false;
        const Token &t = out.back();
        if (t.kind == Tok::Ident || t.kind == Tok::Int) return true;
        return t.text == ")" || t.text == "}" || t.text == "++" || t.text == "--";
    };
    while (i < src.size()) {
        const char c = src[i];
        if (c == '\n') {
            if (d == Dialect::Gm && ends_statement()) out.push_back({Tok::Punct, ";", 0, true, line, col});
            advance(1);
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            advance(1);
            continue;
        }
        if (src.substr(i, 2) == "//") {
            while (i < src.size() && src[i] != '\n') advance(1);
            continue;
        }
        if (src.substr(i, 2) == "/*") {
            const int l = line, cl = col;
            const auto end = src.find("*/", i + 2);
            if (end == std::string_view::npos) throw ParseError("unterminated comment", l, cl);
            const bool had_newline = src.substr(i, end - i).find('\n') != std::string_view::npos;
            advance(end + 2 - i);
            if (had_newline && d == Dialect::Gm && ends_statement()) out.push_back({Tok::Punct, ";", 0, true, l, cl});
            continue;
        }
        Token t;
        t.line = line;
        t.column = col;
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t j = i;
            while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
            t.kind = Tok::Ident;
            t.text = std::string(src.substr(i, j - i));
            advance(j - i);
            out.push_back(std::move(t));
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            std::size_t j = i;
            int base = 10;
            if (src.substr(i, 2) == "0x" || src.substr(i, 2) == "0X") {
                base = 16;
                j += 2;
            }
            const std::size_t digits = j;
            std::uint64_t v = 0;
            bool overflow = false;
            while (j < src.size() && std::isxdigit(static_cast<unsigned char>(src[j]))) {
                const char ch = static_cast<char>(std::tolower(static_cast<unsigned char>(src[j])));
                const int dv = std::isdigit(static_cast<unsigned char>(ch)) ? ch - '0' : ch - 'a' + 10;
                if (dv >= base) break;
                if (v > (~std::uint64_t{0} - static_cast<std::uint64_t>(dv)) / static_cast<std::uint64_t>(base)) overflow = true;
                v = v * static_cast<std::uint64_t>(base) + static_cast<std::uint64_t>(dv);
                ++j;
            }
            if (j == digits) throw ParseError("malformed integer literal", line, col);
            if (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_'))
                throw ParseError("malformed integer literal", line, col);
            if (overflow) throw ParseError("integer literal does not fit in 64 bits", line, col);
            t.kind = Tok::Int;
            t.text = std::string(src.substr(i, j - i));
            t.value = v;
            advance(j - i);
            out.push_back(std::move(t));
            continue;
        }
        bool matched = false;
        for (const char *p : kPuncts) {
            const std::string_view ps(p);
            if (src.substr(i, ps.size()) == ps) {
                t.kind = Tok::Punct;
                t.text = std::string(ps);
                advance(ps.size());
                out.push_back(std::move(t));
                matched = true;
                break;
            }
        }
        if (!matched) throw ParseError(std::string("unexpected character '") + c + "'", line, col);
    }
    if (d == Dialect::Gm && ends_statement()) out.push_back({Tok::Punct, ";", 0, true, line, col});
    out.push_back({Tok::End, "", 0, false, line, col});
    return out;
}

std::optional<BinOp> assign_op(std::string_view t) {
    if (t == "+=") return BinOp::Add;
    if (t == "-=") return BinOp::Sub;
    if (t == "*=") return BinOp::Mul;
    if (t == "/=") return BinOp::Div;
    if (t == "%=") return BinOp::Rem;
    if (t == "&=") return BinOp::And;
    if (t == "|=") return BinOp::Or;
    if (t == "^=") return BinOp::Xor;
    if (t == "<<=") return BinOp::Shl;
    if (t == ">>=") return BinOp::Shr;
    return std::nullopt;
}

std::optional<BinOp> binary_op(std::string_view t) {
    static const std::pair<std::string_view, BinOp> table[] = {
        {"+", BinOp::Add},  {"-", BinOp::Sub},     {"*", BinOp::Mul},    {"/", BinOp::Div},  {"%", BinOp::Rem},
        {"&", BinOp::And},  {"|", BinOp::Or},      {"^", BinOp::Xor},    {"<<", BinOp::Shl}, {">>", BinOp::Shr},
        {"==", BinOp::Eq},  {"!=", BinOp::Ne},     {"<", BinOp::Lt},     {"<=", BinOp::Le},  {">", BinOp::Gt},
        {">=", BinOp::Ge},  {"&&", BinOp::LogAnd}, {"||", BinOp::LogOr},
    };
    for (const auto &[s, op] : table)
        if (s == t) return op;
    return std::nullopt;
}

class Parser {
public:
    Parser(std::string_view text, Dialect d) : d_(d), toks_(lex(text, d)) {}

    SourceAst parse_unit() {
        SourceAst ast = d_ == Dialect::Cm ? cm_header() : gm_header();
        ast.body = block_body();
        skip_semis();
        if (!at_end()) {
            if (peek().kind == Tok::Ident) fail("calls not permitted: only one function may be defined (found '" + peek().text + "')");
            fail("unexpected '" + peek().text + "' after function body");
        }
        return ast;
    }

private:
    const Token &peek(std::size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
    bool at_end() const { return peek().kind == Tok::End; }
    bool is(std::string_view p, std::size_t k = 0) const { return peek(k).kind == Tok::Punct && peek(k).text == p; }
    bool is_word(std::string_view w, std::size_t k = 0) const { return peek(k).kind == Tok::Ident && peek(k).text == w; }
    const Token &next() { return toks_[std::min(pos_++, toks_.size() - 1)]; }

    [[noreturn]] void fail(const std::string &msg) const { throw ParseError(msg, peek().line, peek().column); }
    [[noreturn]] void dialect_fail(const std::string &msg) const { throw DialectError(msg, peek().line, peek().column); }

    std::string describe(const Token &t) const {
        if (t.kind == Tok::End) return "end of input";
        if (t.synthetic) return "newline";
        return "'" + t.text + "'";
    }

    void expect(std::string_view p) {
        if (!is(p)) fail("expected '" + std::string(p) + "', found " + describe(peek()));
        ++pos_;
    }

    std::string ident(const char *what) {
        if (peek().kind != Tok::Ident) fail(std::string("expected ") + what + ", found " + describe(peek()));
        return next().text;
    }

    std::optional<SrcType> type_at(std::size_t k = 0) const {
        if (peek(k).kind != Tok::Ident) return std::nullopt;
        return parse_type_name(peek(k).text, d_);
    }

    SrcType type() {
        auto t = type_at();
        if (!t) fail("expected a type, found " + describe(peek()));
        ++pos_;
        return *t;
    }

    bool is_keyword(std::string_view w) const {
        static const char *const common[] = {"if", "else", "for", "return", "true", "false"};
        for (const char *k : common)
            if (w == k) return true;
        if (d_ == Dialect::Cm) return w == "while";
        return w == "func" || w == "var";
    }

    std::string var_name() {
        const Token &t = peek();
        if (t.kind != Tok::Ident) fail("expected identifier, found " + describe(t));
        if (is_keyword(t.text) || type_at()) fail("'" + t.text + "' cannot be used as a name");
        return next().text;
    }

    void skip_semis() {
        while (is(";")) ++pos_;
    }

    // ---- headers -------------------------------------------------------

    SourceAst cm_header() {
        if (is_word("func")) dialect_fail("'func' declarations are Gm syntax; Cm functions are written 'type name(type param, ...)'");
        SourceAst ast;
        ast.ret = type();
        ast.name = var_name();
        expect("(");
        if (!is(")")) {
            if (is_word("void") && is(")", 1)) {
                ++pos_;
            } else {
                for (;;) {
                    if (peek().kind == Tok::Ident && !type_at() && type_at(1))
                        dialect_fail("parameter written 'name type' is Gm syntax; Cm writes 'type name'");
                    Param p;
                    p.type = type();
                    p.name = var_name();
                    ast.params.push_back(p);
                    if (!is(",")) break;
                    ++pos_;
                }
            }
        }
        expect(")");
        if (!is("{")) fail("expected '{' to open the function body, found " + describe(peek()));
        return ast;
    }

    SourceAst gm_header() {
        if (type_at() && peek(1).kind == Tok::Ident && is("(", 2))
            dialect_fail("C-style function definition is Cm syntax; Gm functions start with 'func'");
        if (!is_word("func")) fail("expected 'func', found " + describe(peek()));
        ++pos_;
        SourceAst ast;
        ast.name = var_name();
        expect("(");
        std::vector<std::string> pending;
        while (!is(")")) {
            if (type_at() && peek(1).kind == Tok::Ident && !type_at(1))
                dialect_fail("parameter written 'type name' is Cm syntax; Gm writes 'name type'");
            pending.push_back(var_name());
            if (is(",")) {
                ++pos_;
                continue;
            }
            const SrcType t = type();
            for (auto &n : pending) ast.params.push_back({std::move(n), t});
            pending.clear();
            if (!is(",")) break;
            ++pos_;
        }
        if (!pending.empty()) fail("parameter '" + pending.back() + "' has no type");
        expect(")");
        ast.ret = type();
        if (!is("{")) fail("expected '{' to open the function body, found " + describe(peek()));
        return ast;
    }

    // ---- statements ----------------------------------------------------

    std::vector<Stmt> block_body() {
        expect("{");
        std::vector<Stmt> out;
        for (;;) {
            skip_semis();
            if (is("}")) break;
            if (at_end()) fail("unexpected end of input, expected '}'");
            out.push_back(statement());
            if (d_ == Dialect::Gm && !is("}") && !is(";"))
                fail("expected newline or ';' after statement, found " + describe(peek()));
        }
        expect("}");
        return out;
    }

    Stmt make(StmtKind k, const Token &at) {
        Stmt s;
        s.kind = k;
        s.line = at.line;
        s.column = at.column;
        return s;
    }

    Stmt statement() { return d_ == Dialect::Cm ? cm_statement() : gm_statement(); }

    /// Assignment forms shared by both dialects: `x = e`, `x op= e`, `x++`, `x--`.
    std::optional<Stmt> assignment() {
        if (peek().kind != Tok::Ident || peek(1).kind != Tok::Punct) return std::nullopt;
        const Token &at = peek();
        const std::string &op = peek(1).text;
        Stmt s = make(StmtKind::Assign, at);
        if (op == "=") {
            s.name = var_name();
            ++pos_;
            s.exprs.push_back(expression());
            return s;
        }
        if (auto bop = assign_op(op)) {
            s.name = var_name();
            ++pos_;
            Expr rhs = expression();
            s.exprs.push_back(binary(*bop, var_ref(s.name, at), std::move(rhs), toks_[pos_ - 1]));
            return s;
        }
        if (op == "++" || op == "--") {
            s.name = var_name();
            ++pos_;
            Expr one;
            one.magnitude = 1;
            one.line = at.line;
            one.column = at.column;
            s.exprs.push_back(binary(op == "++" ? BinOp::Add : BinOp::Sub, var_ref(s.name, at), std::move(one), at));
            return s;
        }
        return std::nullopt;
    }

    Stmt cm_statement() {
        const Token &at = peek();
        if (is("{")) {
            Stmt s = make(StmtKind::Block, at);
            s.body = block_body();
            return s;
        }
        if (is_word("func")) dialect_fail("'func' is Gm syntax");
        if (is_word("var")) dialect_fail("'var' declarations are Gm syntax; Cm writes 'type name = value;'");
        if (peek().kind == Tok::Ident && is(":=", 1)) dialect_fail("':=' is Gm syntax; Cm writes 'type name = value;'");
        if (is_word("if")) {
            ++pos_;
            Stmt s = make(StmtKind::If, at);
            expect("(");
            s.exprs.push_back(expression());
            expect(")");
            s.body = as_list(cm_statement());
            if (is_word("else")) {
                ++pos_;
                s.has_else = true;
                s.else_body = as_list(cm_statement());
            }
            return s;
        }
        if (is_word("while")) {
            ++pos_;
            Stmt s = make(StmtKind::While, at);
            expect("(");
            s.exprs.push_back(expression());
            expect(")");
            s.body = as_list(cm_statement());
            return s;
        }
        if (is_word("for")) {
            ++pos_;
            expect("(");
            std::optional<Stmt> init, post;
            std::optional<Expr> cond;
            if (!is(";")) init = type_at() ? cm_decl() : simple_assignment();
            expect(";");
            if (!is(";")) cond = expression();
            expect(";");
            if (!is(")")) post = simple_assignment();
            expect(")");
            Stmt body = cm_statement();
            return desugar_for(at, std::move(init), std::move(cond), std::move(post), std::move(body));
        }
        if (is_word("return")) {
            ++pos_;
            Stmt s = make(StmtKind::Return, at);
            if (is(";")) fail("return requires a value");
            s.exprs.push_back(expression());
            expect(";");
            return s;
        }
        if (type_at()) {
            Stmt s = cm_decl();
            expect(";");
            return s;
        }
        Stmt s = simple_assignment();
        expect(";");
        return s;
    }

    Stmt cm_decl() {
        const Token &at = peek();
        Stmt s = make(StmtKind::Decl, at);
        s.type = type();
        s.name = var_name();
        if (is("(")) fail("calls not permitted: nested function '" + s.name + "'");
        if (is("=")) {
            ++pos_;
            s.exprs.push_back(expression());
        }
        return s;
    }

    Stmt simple_assignment() {
        if (auto s = assignment()) return std::move(*s);
        if (peek().kind == Tok::Ident && is("(", 1) && !type_at()) fail("calls not permitted: '" + peek().text + "'");
        fail("expected a statement, found " + describe(peek()));
    }

    Stmt gm_statement() {
        const Token &at = peek();
        if (is("{")) {
            Stmt s = make(StmtKind::Block, at);
            s.body = block_body();
            return s;
        }
        if (is_word("while")) dialect_fail("'while' is Cm syntax; Gm loops are written 'for cond { ... }'");
        if (is_word("func")) fail("calls not permitted: nested function definitions");
        if (type_at() && peek(1).kind == Tok::Ident)
            dialect_fail("declaration 'type name' is Cm syntax; Gm writes 'var name type' or 'name := value'");
        if (is_word("if")) return gm_if();
        if (is_word("for")) {
            ++pos_;
            if (is("{")) {
                Stmt s = make(StmtKind::While, at);
                Expr t;
                t.typed = true;
                t.type = SrcType::boolean();
                t.magnitude = 1;
                t.line = at.line;
                t.column = at.column;
                s.exprs.push_back(std::move(t));
                s.body = block_body();
                return s;
            }
            const bool clause = is(";") || gm_simple_start();
            if (!clause) {
                Stmt s = make(StmtKind::While, at);
                s.exprs.push_back(expression());
                s.body = block_body();
                return s;
            }
            std::optional<Stmt> init, post;
            std::optional<Expr> cond;
            if (!is(";")) init = gm_simple();
            expect(";");
            if (!is(";")) cond = expression();
            expect(";");
            if (!is("{")) post = gm_simple();
            Stmt body = make(StmtKind::Block, peek());
            body.body = block_body();
            return desugar_for(at, std::move(init), std::move(cond), std::move(post), std::move(body));
        }
        if (is_word("return")) {
            ++pos_;
            Stmt s = make(StmtKind::Return, at);
            if (is(";") || is("}")) fail("return requires a value");
            s.exprs.push_back(expression());
            return s;
        }
        if (is_word("var")) {
            ++pos_;
            Stmt s = make(StmtKind::Decl, at);
            s.name = var_name();
            s.type = type();
            if (is("=")) {
                ++pos_;
                s.exprs.push_back(expression());
            }
            return s;
        }
        return gm_simple();
    }

    bool gm_simple_start() const {
        if (peek().kind != Tok::Ident || peek(1).kind != Tok::Punct) return false;
        const std::string &op = peek(1).text;
        return op == ":=" || op == "=" || op == "++" || op == "--" || assign_op(op).has_value();
    }

    Stmt gm_simple() {
        const Token &at = peek();
        if (peek().kind == Tok::Ident && is(":=", 1)) {
            Stmt s = make(StmtKind::Decl, at);
            s.name = var_name();
            ++pos_;
            s.inferred = true;
            s.exprs.push_back(expression());
            return s;
        }
        return simple_assignment();
    }

    Stmt gm_if() {
        const Token &at = next();
        Stmt s = make(StmtKind::If, at);
        s.exprs.push_back(expression());
        if (!is("{")) fail("expected '{' after if condition, found " + describe(peek()));
        s.body = block_body();
        if (is_word("else")) {
            ++pos_;
            s.has_else = true;
            if (is_word("if")) s.else_body.push_back(gm_if());
            else if (is("{")) s.else_body = block_body();
            else fail("expected 'if' or '{' after else, found " + describe(peek()));
        }
        return s;
    }

    static std::vector<Stmt> as_list(Stmt s) {
        if (s.kind == StmtKind::Block) return std::move(s.body);
        std::vector<Stmt> v;
        v.push_back(std::move(s));
        return v;
    }

    Stmt desugar_for(const Token &at, std::optional<Stmt> init, std::optional<Expr> cond, std::optional<Stmt> post,
                     Stmt body) {
        Stmt loop = make(StmtKind::While, at);
        if (cond) {
            loop.exprs.push_back(std::move(*cond));
        } else {
            Expr t;
            t.typed = true;
            t.type = SrcType::boolean();
            t.magnitude = 1;
            t.line = at.line;
            t.column = at.column;
            loop.exprs.push_back(std::move(t));
        }
        Stmt inner = make(StmtKind::Block, at);
        inner.body = as_list(std::move(body));
        loop.body.push_back(std::move(inner));
        if (post) loop.body.push_back(std::move(*post));
        Stmt outer = make(StmtKind::Block, at);
        if (init) outer.body.push_back(std::move(*init));
        outer.body.push_back(std::move(loop));
        return outer;
    }

    // ---- expressions ---------------------------------------------------

    Expr var_ref(const std::string &name, const Token &at) {
        Expr e;
        e.kind = ExprKind::Var;
        e.name = name;
        e.line = at.line;
        e.column = at.column;
        return e;
    }

    Expr binary(BinOp op, Expr l, Expr r, const Token &at) {
        Expr e;
        e.kind = ExprKind::Binary;
        e.bop = op;
        e.line = at.line;
        e.column = at.column;
        e.kids.push_back(std::move(l));
        e.kids.push_back(std::move(r));
        return e;
    }

    Expr expression() {
        Expr e = binary_expr(1);
        if (is("?")) {
            if (d_ == Dialect::Gm) dialect_fail("conditional operator '?:' is Cm syntax; Gm uses if/else");
            const Token &at = next();
            Expr t = expression();
            expect(":");
            Expr f = expression();
            Expr out;
            out.kind = ExprKind::Ternary;
            out.line = at.line;
            out.column = at.column;
            out.kids.push_back(std::move(e));
            out.kids.push_back(std::move(t));
            out.kids.push_back(std::move(f));
            return out;
        }
        return e;
    }

    Expr binary_expr(int min_prec) {
        Expr lhs = unary();
        for (;;) {
            if (peek().kind != Tok::Punct) break;
            if (is("&^")) fail("operator '&^' is not supported");
            auto op = binary_op(peek().text);
            if (!op) break;
            const int prec = detail::precedence(*op, d_);
            if (prec < min_prec) break;
            const Token &at = next();
            Expr rhs = binary_expr(prec + 1);
            lhs = binary(*op, std::move(lhs), std::move(rhs), at);
        }
        return lhs;
    }

    Expr unary() {
        const Token &at = peek();
        Expr e;
        e.line = at.line;
        e.column = at.column;
        if (is("-") && peek(1).kind == Tok::Int) {
            ++pos_;
            const Token &lit = next();
            e.kind = ExprKind::Literal;
            e.magnitude = lit.value;
            e.negative = lit.value != 0;
            return e;
        }
        if (is("-") || is("!") || is("~") || (is("^") && d_ == Dialect::Gm)) {
            if (is("~") && d_ == Dialect::Gm) dialect_fail("'~' is Cm syntax; Gm writes bitwise complement as '^x'");
            const std::string op = next().text;
            e.kind = ExprKind::Unary;
            e.uop = op == "-" ? UnOp::Neg : op == "!" ? UnOp::LogNot : UnOp::BitNot;
            e.kids.push_back(unary());
            return e;
        }
        if (is("(") && type_at(1) && is(")", 2)) {
            if (d_ == Dialect::Gm) dialect_fail("C-style cast '(type)expr' is Cm syntax; Gm writes 'type(expr)'");
            pos_ += 1;
            e.kind = ExprKind::Cast;
            e.type = type();
            expect(")");
            e.kids.push_back(unary());
            return e;
        }
        return primary();
    }

    Expr primary() {
        const Token &at = peek();
        Expr e;
        e.line = at.line;
        e.column = at.column;
        if (at.kind == Tok::Int) {
            ++pos_;
            e.kind = ExprKind::Literal;
            e.magnitude = at.value;
            return e;
        }
        if (is("(")) {
            ++pos_;
            Expr inner = expression();
            expect(")");
            return inner;
        }
        if (at.kind == Tok::Ident) {
            if (at.text == "true" || at.text == "false") {
                ++pos_;
                e.kind = ExprKind::Literal;
                e.typed = true;
                e.type = SrcType::boolean();
                e.magnitude = at.text == "true" ? 1 : 0;
                return e;
            }
            if (auto t = type_at()) {
                if (!is("(", 1)) fail("unexpected type name '" + at.text + "' in expression");
                if (d_ == Dialect::Cm) dialect_fail("conversion 'type(expr)' is Gm syntax; Cm writes '(type)expr'");
                pos_ += 2;
                e.kind = ExprKind::Cast;
                e.type = *t;
                e.kids.push_back(expression());
                expect(")");
                return e;
            }
            if (is("(", 1)) fail("calls not permitted: '" + at.text + "'");
            if (is_keyword(at.text)) fail("unexpected keyword '" + at.text + "' in expression");
            ++pos_;
            e.kind = ExprKind::Var;
            e.name = at.text;
            return e;
        }
        fail("expected an expression, found " + describe(at));
    }

    Dialect d_;
    std::vector<Token> toks_;
    std::size_t pos_ = 0;
};

} // namespace

SourceAst parse_source(std::string_view text, Dialect d) {
    SourceAst ast = Parser(text, d).parse_unit();
    try {
        detail::check(ast, d);
    } catch (const detail::TypeFault &f) {
        throw ParseError(f.message, static_cast<std::size_t>(f.line), static_cast<std::size_t>(f.column));
    }
    return ast;
}

std::string defined_name(std::string_view text, Dialect d) {
    std::vector<Token> toks;
    try {
        toks = lex(text, d);
    } catch (const ParseError &) {
        return {};
    }
    for (std::size_t i = 0; i + 2 < toks.size(); ++i) {
        if (d == Dialect::Gm && toks[i].kind == Tok::Ident && toks[i].text == "func" && toks[i + 1].kind == Tok::Ident)
            return toks[i + 1].text;
        if (d == Dialect::Cm && toks[i].kind == Tok::Ident && toks[i + 1].kind == Tok::Ident && toks[i + 2].text == "(")
            return toks[i + 1].text;
    }
    return {};
}

} // namespace nv::frontend

#include "frontend_impl.hpp"

#include <map>

namespace nv::frontend::detail {

bool is_untyped_const(const Expr &e) {
    switch (e.kind) {
    case ExprKind::Literal: return !e.typed;
    case ExprKind::Unary: return e.uop != UnOp::LogNot && is_untyped_const(e.kids[0]);
    case ExprKind::Binary:
        return !is_comparison(e.bop) && !is_logical(e.bop) && is_untyped_const(e.kids[0]) && is_untyped_const(e.kids[1]);
    default: return false;
    }
}

std::uint64_t literal_bits(const Expr &e, SrcType t) {
    const std::uint64_t v = e.negative ? (~e.magnitude + 1) : e.magnitude;
    return v & mir::type_mask(t.width);
}

namespace {

class Checker {
public:
    Checker(SourceAst &ast, Dialect d) : ast_(ast), d_(d) {}

    void run() {
        ast_.vars.clear();
        scopes_.emplace_back();
        for (const auto &p : ast_.params) {
            if (scopes_.back().count(p.name)) throw TypeFault{"duplicate parameter '" + p.name + "'", 1, 1};
            declare(p.name, p.type);
        }
        block(ast_.body);
        if (!returns(ast_.body)) {
            int line = 1, col = 1;
            if (!ast_.body.empty()) {
                line = ast_.body.back().line;
                col = ast_.body.back().column;
            }
            throw TypeFault{"missing return at end of function '" + ast_.name + "'", line, col};
        }
    }

private:
    [[noreturn]] static void fail(const std::string &msg, int line, int col) { throw TypeFault{msg, line, col}; }

    int declare(const std::string &name, SrcType t) {
        const int slot = static_cast<int>(ast_.vars.size());
        ast_.vars.push_back({name, t});
        scopes_.back()[name] = slot;
        return slot;
    }

    int lookup(const std::string &name, int line, int col) const {
        for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it) {
            auto f = it->find(name);
            if (f != it->end()) return f->second;
        }
        fail("undefined variable '" + name + "'", line, col);
    }

    void block(std::vector<Stmt> &stmts) {
        scopes_.emplace_back();
        for (auto &s : stmts) statement(s);
        scopes_.pop_back();
    }

    void condition(Expr &e) {
        const SrcType t = expr(e, std::nullopt);
        if (t.is_bool()) return;
        if (d_ == Dialect::Gm) fail("non-bool condition of type " + type_name(t), e.line, e.column);
    }

    void statement(Stmt &s) {
        switch (s.kind) {
        case StmtKind::Decl: {
            if (scopes_.back().count(s.name)) fail("'" + s.name + "' redeclared in this block", s.line, s.column);
            if (s.inferred) {
                s.type = expr(s.exprs[0], std::nullopt);
            } else if (!s.exprs.empty()) {
                expect_type(s.exprs[0], s.type, "initializer of '" + s.name + "'");
            }
            s.slot = declare(s.name, s.type);
            return;
        }
        case StmtKind::Assign: {
            s.slot = lookup(s.name, s.line, s.column);
            expect_type(s.exprs[0], ast_.vars[s.slot].type, "assignment to '" + s.name + "'");
            return;
        }
        case StmtKind::If:
            condition(s.exprs[0]);
            block(s.body);
            if (s.has_else) block(s.else_body);
            return;
        case StmtKind::While:
            condition(s.exprs[0]);
            block(s.body);
            return;
        case StmtKind::Return:
            expect_type(s.exprs[0], ast_.ret, "return value");
            return;
        case StmtKind::Block:
            block(s.body);
            return;
        }
    }

    void expect_type(Expr &e, SrcType want, const std::string &what) {
        const SrcType got = expr(e, want);
        if (got != want)
            fail("type mismatch in " + what + ": expected " + type_name(want) + ", got " + type_name(got) +
                     " (add an explicit conversion)",
                 e.line, e.column);
    }

    static bool always_true(const Expr &e) {
        return e.kind == ExprKind::Literal && e.magnitude != 0;
    }

    static bool returns(const std::vector<Stmt> &stmts) {
        for (const auto &s : stmts) {
            switch (s.kind) {
            case StmtKind::Return: return true;
            case StmtKind::Block:
                if (returns(s.body)) return true;
                break;
            case StmtKind::If:
                if (s.has_else && returns(s.body) && returns(s.else_body)) return true;
                break;
            case StmtKind::While:
                if (always_true(s.exprs[0])) return true;
                break;
            default: break;
            }
        }
        return false;
    }

    SrcType default_int() const { return d_ == Dialect::Cm ? SrcType{mir::Type::I32, true} : SrcType{mir::Type::I64, true}; }

    void literal(Expr &e, SrcType t) {
        e.type = t;
        if (t.is_bool()) {
            if (!e.typed) fail("integer literal used where bool is required", e.line, e.column);
            return;
        }
        const unsigned w = mir::bit_width(t.width);
        bool ok;
        if (t.is_signed) {
            const std::uint64_t lim = std::uint64_t{1} << (w - 1);
            ok = e.negative ? e.magnitude <= lim : e.magnitude < lim;
        } else {
            ok = !e.negative && e.magnitude <= mir::type_mask(t.width);
        }
        if (!ok)
            fail("integer literal " + std::string(e.negative ? "-" : "") + std::to_string(e.magnitude) +
                     " overflows " + type_name(t),
                 e.line, e.column);
    }

    /// Checks a pair of operands that must share a type.
    SrcType pair(Expr &a, Expr &b, std::optional<SrcType> expected) {
        SrcType ta, tb;
        if (is_untyped_const(a) && !is_untyped_const(b)) {
            tb = expr(b, expected);
            ta = expr(a, tb);
        } else {
            ta = expr(a, expected);
            tb = expr(b, ta);
        }
        if (ta != tb) fail("mismatched operand types " + type_name(ta) + " and " + type_name(tb), b.line, b.column);
        return ta;
    }

    SrcType expr(Expr &e, std::optional<SrcType> expected) {
        e.type = expr_inner(e, expected);
        return e.type;
    }

    SrcType expr_inner(Expr &e, std::optional<SrcType> expected) {
        switch (e.kind) {
        case ExprKind::Literal:
            if (e.typed) return e.type;
            literal(e, expected && !expected->is_bool() ? *expected : default_int());
            return e.type;
        case ExprKind::Var:
            e.slot = lookup(e.name, e.line, e.column);
            return ast_.vars[e.slot].type;
        case ExprKind::Unary: {
            if (e.uop == UnOp::LogNot) {
                const SrcType t = expr(e.kids[0], std::nullopt);
                if (!t.is_bool() && d_ == Dialect::Gm) fail("operator '!' requires bool, got " + type_name(t), e.line, e.column);
                return SrcType::boolean();
            }
            const SrcType t = expr(e.kids[0], expected);
            if (t.is_bool()) fail("arithmetic on bool", e.line, e.column);
            return t;
        }
        case ExprKind::Binary: {
            Expr &a = e.kids[0];
            Expr &b = e.kids[1];
            if (is_logical(e.bop)) {
                for (Expr *k : {&a, &b}) {
                    const SrcType t = expr(*k, std::nullopt);
                    if (!t.is_bool() && d_ == Dialect::Gm)
                        fail("operator '" + std::string(binop_symbol(e.bop)) + "' requires bool operands", k->line, k->column);
                }
                return SrcType::boolean();
            }
            if (is_comparison(e.bop)) {
                const SrcType t = pair(a, b, std::nullopt);
                if (t.is_bool() && e.bop != BinOp::Eq && e.bop != BinOp::Ne)
                    fail("ordered comparison of bool values", e.line, e.column);
                return SrcType::boolean();
            }
            if (e.bop == BinOp::Shl || e.bop == BinOp::Shr) {
                const SrcType t = expr(a, expected);
                const SrcType s = expr(b, is_untyped_const(b) ? std::optional<SrcType>(t) : std::nullopt);
                if (t.is_bool() || s.is_bool()) fail("shift of bool", e.line, e.column);
                return t;
            }
            const SrcType t = pair(a, b, expected);
            if (t.is_bool()) fail("arithmetic on bool", e.line, e.column);
            return t;
        }
        case ExprKind::Ternary: {
            const SrcType c = expr(e.kids[0], std::nullopt);
            (void)c;
            return pair(e.kids[1], e.kids[2], expected);
        }
        case ExprKind::Cast: {
            const SrcType target = e.type;
            const bool lit = is_untyped_const(e.kids[0]);
            // Gm constant conversions must fit the target; Cm truncates an int-typed constant.
            std::optional<SrcType> want;
            if (lit && (d_ == Dialect::Gm || mir::bit_width(target.width) > 32)) want = target;
            const SrcType src = expr(e.kids[0], want);
            if (d_ == Dialect::Gm && src.is_bool() != target.is_bool())
                fail("cannot convert " + type_name(src) + " to " + type_name(target), e.line, e.column);
            return target;
        }
        }
        fail("malformed expression", e.line, e.column);
    }

    SourceAst &ast_;
    Dialect d_;
    std::vector<std::map<std::string, int>> scopes_;
};

} // namespace

void check(SourceAst &ast, Dialect d) { Checker(ast, d).run(); }

} // namespace nv::frontend::detail

#include "frontend_impl.hpp"

#include <set>
#include <sstream>

namespace nv::frontend {

namespace {

Expr literal_of(SrcType t, std::int64_t v) {
    Expr e;
    e.kind = ExprKind::Literal;
    e.type = t;
    e.typed = t.is_bool();
    e.negative = v < 0;
    e.magnitude = v < 0 ? static_cast<std::uint64_t>(-(v + 1)) + 1 : static_cast<std::uint64_t>(v);
    return e;
}

Expr var_expr(const std::string &name, SrcType t) {
    Expr e;
    e.kind = ExprKind::Var;
    e.name = name;
    e.type = t;
    return e;
}

Expr binary_expr(BinOp op, Expr a, Expr b, SrcType t) {
    Expr e;
    e.kind = ExprKind::Binary;
    e.bop = op;
    e.type = t;
    e.kids.push_back(std::move(a));
    e.kids.push_back(std::move(b));
    return e;
}

Stmt assign_stmt(const std::string &name, Expr v) {
    Stmt s;
    s.kind = StmtKind::Assign;
    s.name = name;
    s.exprs.push_back(std::move(v));
    return s;
}

/// Rewrites Cm-only constructs into forms Gm can express.
class GmRestater {
public:
    explicit GmRestater(const SourceAst &ast) {
        for (const auto &v : ast.vars) taken_.insert(v.name);
    }

    std::vector<Stmt> block(const std::vector<Stmt> &in) {
        std::vector<Stmt> out;
        for (const auto &s : in) statement(s, out);
        return out;
    }

private:
    std::string temp() {
        for (;;) {
            std::string n = "t" + std::to_string(++counter_);
            if (taken_.insert(n).second) return n;
        }
    }

    /// Makes `e` a bool expression (integer conditions compare against zero).
    Expr as_bool(Expr e, std::vector<Stmt> &pre) {
        e = expr(std::move(e), pre);
        if (e.type.is_bool()) return e;
        const SrcType t = e.type;
        return binary_expr(BinOp::Ne, std::move(e), literal_of(t, 0), SrcType::boolean());
    }

    Expr expr(Expr e, std::vector<Stmt> &pre) {
        switch (e.kind) {
        case ExprKind::Literal:
        case ExprKind::Var:
            return e;
        case ExprKind::Unary:
            if (e.uop == UnOp::LogNot) {
                e.kids[0] = as_bool(std::move(e.kids[0]), pre);
                return e;
            }
            e.kids[0] = expr(std::move(e.kids[0]), pre);
            return e;
        case ExprKind::Binary:
            if (is_logical(e.bop)) {
                e.kids[0] = as_bool(std::move(e.kids[0]), pre);
                e.kids[1] = as_bool(std::move(e.kids[1]), pre);
                return e;
            }
            e.kids[0] = expr(std::move(e.kids[0]), pre);
            e.kids[1] = expr(std::move(e.kids[1]), pre);
            return e;
        case ExprKind::Cast: {
            const SrcType src = e.kids[0].type;
            if (e.type.is_bool() && !src.is_bool()) return as_bool(std::move(e.kids[0]), pre);
            if (!e.type.is_bool() && src.is_bool()) {
                Expr t;
                t.kind = ExprKind::Ternary;
                t.type = e.type;
                t.kids.push_back(std::move(e.kids[0]));
                t.kids.push_back(literal_of(e.type, 1));
                t.kids.push_back(literal_of(e.type, 0));
                return expr(std::move(t), pre);
            }
            if (src.is_bool()) return expr(std::move(e.kids[0]), pre);
            e.kids[0] = expr(std::move(e.kids[0]), pre);
            return e;
        }
        case ExprKind::Ternary: {
            const std::string name = temp();
            Stmt decl;
            decl.kind = StmtKind::Decl;
            decl.name = name;
            decl.type = e.type;
            pre.push_back(std::move(decl));
            Stmt branch;
            branch.kind = StmtKind::If;
            branch.exprs.push_back(as_bool(std::move(e.kids[0]), pre));
            branch.has_else = true;
            Expr a = expr(std::move(e.kids[1]), branch.body);
            branch.body.push_back(assign_stmt(name, std::move(a)));
            Expr b = expr(std::move(e.kids[2]), branch.else_body);
            branch.else_body.push_back(assign_stmt(name, std::move(b)));
            pre.push_back(std::move(branch));
            return var_expr(name, e.type);
        }
        }
        return e;
    }

    void statement(const Stmt &in, std::vector<Stmt> &out) {
        Stmt s = in;
        switch (s.kind) {
        case StmtKind::Return:
            if (s.exprs[0].kind == ExprKind::Ternary) {
                // return c ? a : b  ->  if c { return a } else { return b }
                Expr t = std::move(s.exprs[0]);
                Stmt branch;
                branch.kind = StmtKind::If;
                branch.has_else = true;
                branch.exprs.push_back(as_bool(std::move(t.kids[0]), out));
                Stmt ra = s, rb = s;
                ra.exprs[0] = std::move(t.kids[1]);
                rb.exprs[0] = std::move(t.kids[2]);
                statement(ra, branch.body);
                statement(rb, branch.else_body);
                out.push_back(std::move(branch));
                return;
            }
            s.exprs[0] = expr(std::move(s.exprs[0]), out);
            out.push_back(std::move(s));
            return;
        case StmtKind::Decl:
        case StmtKind::Assign:
            if (!s.exprs.empty()) s.exprs[0] = expr(std::move(s.exprs[0]), out);
            out.push_back(std::move(s));
            return;
        case StmtKind::Block:
            s.body = block(in.body);
            out.push_back(std::move(s));
            return;
        case StmtKind::If:
            s.exprs[0] = as_bool(std::move(s.exprs[0]), out);
            s.body = block(in.body);
            s.else_body = block(in.else_body);
            out.push_back(std::move(s));
            return;
        case StmtKind::While: {
            // Hoisted computations run before the loop and again at the end of each iteration.
            std::vector<Stmt> pre;
            s.exprs[0] = as_bool(std::move(s.exprs[0]), pre);
            s.body = block(in.body);
            for (const auto &p : pre) {
                out.push_back(p);
                if (p.kind == StmtKind::Decl) continue;
                s.body.push_back(p);
            }
            out.push_back(std::move(s));
            return;
        }
        }
    }

    std::set<std::string> taken_;
    int counter_ = 0;
};

class Printer {
public:
    explicit Printer(Dialect d) : d_(d) {}

    std::string function(const SourceAst &ast, const std::vector<Stmt> &body) {
        if (d_ == Dialect::Cm) {
            os_ << type_name(ast.ret) << " " << ast.name << "(";
            for (std::size_t i = 0; i < ast.params.size(); ++i)
                os_ << (i ? ", " : "") << type_name(ast.params[i].type) << " " << ast.params[i].name;
            os_ << ") {\n";
        } else {
            os_ << "func " << ast.name << "(";
            for (std::size_t i = 0; i < ast.params.size(); ++i)
                os_ << (i ? ", " : "") << ast.params[i].name << " " << type_name(ast.params[i].type);
            os_ << ") " << type_name(ast.ret) << " {\n";
        }
        stmts(body, 1);
        os_ << "}\n";
        return os_.str();
    }

private:
    void indent(int depth) {
        for (int i = 0; i < depth; ++i) os_ << "    ";
    }

    void stmts(const std::vector<Stmt> &list, int depth) {
        for (const auto &s : list) stmt(s, depth);
    }

    std::string end() const { return d_ == Dialect::Cm ? ";" : ""; }

    void stmt(const Stmt &s, int depth) {
        indent(depth);
        switch (s.kind) {
        case StmtKind::Decl:
            if (d_ == Dialect::Cm) {
                os_ << type_name(s.type) << " " << s.name;
                if (!s.exprs.empty()) os_ << " = " << expr(s.exprs[0], 0);
            } else if (s.inferred && !s.exprs.empty()) {
                os_ << s.name << " := " << expr(s.exprs[0], 0);
            } else {
                os_ << "var " << s.name << " " << type_name(s.type);
                if (!s.exprs.empty()) os_ << " = " << expr(s.exprs[0], 0);
            }
            os_ << end() << "\n";
            return;
        case StmtKind::Assign:
            os_ << s.name << " = " << expr(s.exprs[0], 0) << end() << "\n";
            return;
        case StmtKind::Return:
            os_ << "return " << expr(s.exprs[0], 0) << end() << "\n";
            return;
        case StmtKind::Block:
            os_ << "{\n";
            stmts(s.body, depth + 1);
            indent(depth);
            os_ << "}\n";
            return;
        case StmtKind::If:
            if_chain(s, depth);
            return;
        case StmtKind::While:
            if (d_ == Dialect::Cm) os_ << "while (" << expr(s.exprs[0], 0) << ") {\n";
            else if (is_true(s.exprs[0])) os_ << "for {\n";
            else os_ << "for " << expr(s.exprs[0], 0) << " {\n";
            stmts(s.body, depth + 1);
            indent(depth);
            os_ << "}\n";
            return;
        }
    }

    static bool is_true(const Expr &e) { return e.kind == ExprKind::Literal && e.type.is_bool() && e.magnitude; }

    void if_chain(const Stmt &s, int depth) {
        if (d_ == Dialect::Cm) os_ << "if (" << expr(s.exprs[0], 0) << ") {\n";
        else os_ << "if " << expr(s.exprs[0], 0) << " {\n";
        stmts(s.body, depth + 1);
        indent(depth);
        os_ << "}";
        if (s.has_else && !s.else_body.empty()) {
            if (s.else_body.size() == 1 && s.else_body[0].kind == StmtKind::If) {
                os_ << " else ";
                if_chain(s.else_body[0], depth);
                return;
            }
            os_ << " else {\n";
            stmts(s.else_body, depth + 1);
            indent(depth);
            os_ << "}";
        }
        os_ << "\n";
    }

    std::string literal(const Expr &e) const {
        if (e.type.is_bool() && e.typed) return e.magnitude ? "true" : "false";
        return (e.negative ? "-" : "") + std::to_string(e.magnitude);
    }

    // `ctx` is the precedence required by the surrounding context; 100 = unary operand.
    std::string expr(const Expr &e, int ctx) const {
        switch (e.kind) {
        case ExprKind::Literal: {
            std::string s = literal(e);
            return e.negative && ctx >= 100 ? "(" + s + ")" : s;
        }
        case ExprKind::Var:
            return e.name;
        case ExprKind::Unary: {
            const char *op = e.uop == UnOp::Neg ? "-" : e.uop == UnOp::LogNot ? "!" : d_ == Dialect::Cm ? "~" : "^";
            std::string inner = expr(e.kids[0], 100);
            if (e.kids[0].kind == ExprKind::Unary) inner = "(" + inner + ")";
            return op + inner;
        }
        case ExprKind::Cast:
            if (d_ == Dialect::Gm) return type_name(e.type) + "(" + expr(e.kids[0], 0) + ")";
            return "(" + type_name(e.type) + ")" + expr(e.kids[0], 100);
        case ExprKind::Ternary: {
            std::string s = expr(e.kids[0], 1) + " ? " + expr(e.kids[1], 0) + " : " + expr(e.kids[2], 0);
            return ctx > 0 ? "(" + s + ")" : s;
        }
        case ExprKind::Binary: {
            const int p = detail::precedence(e.bop, d_);
            std::string s = expr(e.kids[0], p) + " " + std::string(binop_symbol(e.bop)) + " " + expr(e.kids[1], p + 1);
            return p < ctx ? "(" + s + ")" : s;
        }
        }
        return "?";
    }

    Dialect d_;
    std::ostringstream os_;
};

} // namespace

std::string print_source(const SourceAst &ast, Dialect d) {
    if (d == Dialect::Cm) return Printer(d).function(ast, ast.body);
    GmRestater r(ast);
    return Printer(d).function(ast, r.block(ast.body));
}

} // namespace nv::frontend

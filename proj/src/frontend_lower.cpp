#include "frontend_impl.hpp"

#include <set>

namespace nv::frontend {

using mir::BasicBlock;
using mir::BlockTarget;
using mir::Instruction;
using mir::Opcode;
using mir::Operand;
using mir::Pred;
using mir::TermKind;
using mir::Terminator;
using mir::Type;
using mir::Value;

namespace {

using Env = std::vector<Operand>;

/// Expressions that can be evaluated unconditionally: no operation in them can trap.
bool cannot_trap(const Expr &e, Dialect d) {
    if (e.kind == ExprKind::Binary) {
        if (e.bop == BinOp::Div || e.bop == BinOp::Rem) return false;
        if ((e.bop == BinOp::Shl || e.bop == BinOp::Shr) && d == Dialect::Gm) return false;
    }
    for (const auto &k : e.kids)
        if (!cannot_trap(k, d)) return false;
    return true;
}

void assigned_slots(const std::vector<Stmt> &stmts, std::set<int> &out) {
    for (const auto &s : stmts) {
        if (s.kind == StmtKind::Assign) out.insert(s.slot);
        assigned_slots(s.body, out);
        assigned_slots(s.else_body, out);
    }
}

class Lowering {
public:
    Lowering(const SourceAst &ast, Dialect d) : ast_(ast), d_(d) {}

    mir::Function run() {
        f_.name = ast_.name;
        f_.ret = ast_.ret.width;
        f_.dialect = dialect_tag(d_);
        env_.assign(ast_.vars.size(), Operand{});
        declared_.assign(ast_.vars.size(), false);
        for (std::size_t i = 0; i < ast_.params.size(); ++i) {
            declared_[i] = true;
            f_.params.push_back({ast_.params[i].name, ast_.params[i].type.width});
            env_[i] = Operand::make_reg(ast_.params[i].name);
        }
        cur_ = new_block("entry");
        statements(ast_.body);
        if (live()) set_term(Terminator{TermKind::Trap, {}, {}, {}});
        return std::move(f_);
    }

private:
    // ---- blocks --------------------------------------------------------

    std::size_t new_block(std::string label = {}) {
        if (label.empty()) label = "bb" + std::to_string(++block_counter_);
        BasicBlock b;
        b.label = std::move(label);
        f_.blocks.push_back(std::move(b));
        return f_.blocks.size() - 1;
    }

    bool live() const { return cur_ != kDead; }

    void set_term(Terminator t) {
        f_.blocks[cur_].term = std::move(t);
        cur_ = kDead;
    }

    void branch(std::size_t to, std::vector<Operand> args = {}) {
        set_term(Terminator{TermKind::Br, {}, BlockTarget{f_.blocks[to].label, std::move(args)}, {}});
    }

    void cond_branch(Operand c, std::size_t t, std::size_t e) {
        set_term(Terminator{TermKind::CondBr, std::move(c), BlockTarget{f_.blocks[t].label, {}},
                            BlockTarget{f_.blocks[e].label, {}}});
    }

    std::string fresh() { return std::to_string(++reg_counter_); }

    Operand emit(Opcode op, Type t, std::vector<Operand> ops, Pred pred = Pred::Eq, std::string intrinsic = {}) {
        Instruction i;
        i.dest = fresh();
        i.op = op;
        i.type = t;
        i.pred = pred;
        i.intrinsic = std::move(intrinsic);
        i.operands = std::move(ops);
        const std::string dest = i.dest;
        f_.blocks[cur_].insts.push_back(std::move(i));
        return Operand::make_reg(dest);
    }

    static Operand imm(Type t, std::uint64_t bits) { return Operand::make_imm(Value::of(t, bits)); }

    /// Joins the environments flowing into `join`. Slots whose incoming values
    /// differ become block parameters.
    struct Incoming {
        std::size_t block;
        Env env;
    };

    void close_join(std::size_t join, const std::vector<Incoming> &in) {
        Env merged = in.front().env;
        std::vector<std::size_t> params;
        for (std::size_t s = 0; s < merged.size(); ++s) {
            if (!declared_[s]) continue;
            bool same = true;
            for (const auto &x : in) same = same && x.env[s] == in.front().env[s];
            if (!same) params.push_back(s);
        }
        for (auto s : params) {
            const std::string name = fresh();
            f_.blocks[join].params.push_back({name, ast_.vars[s].type.width});
            merged[s] = Operand::make_reg(name);
        }
        for (const auto &x : in) {
            std::vector<Operand> args;
            for (auto s : params) args.push_back(x.env[s]);
            cur_ = x.block;
            branch(join, std::move(args));
        }
        env_ = std::move(merged);
        cur_ = join;
    }

    // ---- statements ----------------------------------------------------

    void statements(const std::vector<Stmt> &stmts) {
        for (const auto &s : stmts) {
            if (!live()) return;
            statement(s);
        }
    }

    void statement(const Stmt &s) {
        switch (s.kind) {
        case StmtKind::Decl: {
            const Type t = s.type.width;
            env_[s.slot] = s.exprs.empty() ? imm(t, 0) : value(s.exprs[0]);
            declared_[s.slot] = true;
            return;
        }
        case StmtKind::Assign:
            env_[s.slot] = value(s.exprs[0]);
            return;
        case StmtKind::Return: {
            Operand v = value(s.exprs[0]);
            set_term(Terminator{TermKind::Ret, std::move(v), {}, {}});
            return;
        }
        case StmtKind::Block:
            statements(s.body);
            return;
        case StmtKind::If: {
            const std::vector<bool> declared_before = declared_;
            Operand c = cond(s.exprs[0]);
            const std::size_t then_b = new_block(), else_b = new_block();
            cond_branch(std::move(c), then_b, else_b);
            const Env at_branch = env_;
            std::vector<Incoming> in;
            cur_ = then_b;
            statements(s.body);
            if (live()) in.push_back({cur_, env_});
            env_ = at_branch;
            cur_ = else_b;
            statements(s.else_body);
            if (live()) in.push_back({cur_, env_});
            declared_ = declared_before;
            if (in.empty()) {
                cur_ = kDead;
                return;
            }
            const std::size_t join = new_block();
            close_join(join, in);
            return;
        }
        case StmtKind::While: {
            std::set<int> carried_set;
            assigned_slots(s.body, carried_set);
            std::vector<int> carried;
            for (int slot : carried_set)
                if (declared_[slot]) carried.push_back(slot);
            const std::size_t header = new_block();
            std::vector<Operand> init;
            for (int slot : carried) init.push_back(env_[slot]);
            branch(header, std::move(init));
            cur_ = header;
            for (int slot : carried) {
                const std::string name = fresh();
                f_.blocks[header].params.push_back({name, ast_.vars[slot].type.width});
                env_[slot] = Operand::make_reg(name);
            }
            Operand c = cond(s.exprs[0]);
            const std::size_t body = new_block(), exit = new_block();
            cond_branch(std::move(c), body, exit);
            const Env at_exit = env_;
            const std::vector<bool> declared_before = declared_;
            cur_ = body;
            statements(s.body);
            declared_ = declared_before;
            if (live()) {
                std::vector<Operand> next;
                for (int slot : carried) next.push_back(env_[slot]);
                branch(header, std::move(next));
            }
            env_ = at_exit;
            cur_ = exit;
            return;
        }
        }
    }

    // ---- expressions ---------------------------------------------------

    /// An i1 operand for a condition (Cm integers compare against zero).
    Operand cond(const Expr &e) {
        Operand v = value(e);
        if (e.type.is_bool()) return v;
        return emit(Opcode::ICmp, Type::I1, {v, imm(e.type.width, 0)}, Pred::Ne);
    }

    Operand convert(Operand v, SrcType from, SrcType to) {
        if (to.is_bool()) {
            if (from.is_bool()) return v;
            return emit(Opcode::ICmp, Type::I1, {v, imm(from.width, 0)}, Pred::Ne);
        }
        const unsigned fw = mir::bit_width(from.width), tw = mir::bit_width(to.width);
        if (fw == tw) return v;
        if (fw > tw) return emit(Opcode::Trunc, to.width, {v});
        const bool sign = from.is_signed && !from.is_bool();
        return emit(sign ? Opcode::SExt : Opcode::ZExt, to.width, {v});
    }

    /// Branches to a fresh trap block when `fault` holds; continues in a new block.
    void trap_if(Operand fault) {
        const std::size_t trap_b = new_block(), cont = new_block();
        cond_branch(std::move(fault), trap_b, cont);
        cur_ = trap_b;
        set_term(Terminator{TermKind::Trap, {}, {}, {}});
        cur_ = cont;
    }

    Operand shift(const Expr &e) {
        const SrcType t = e.type;
        const SrcType at = e.kids[1].type;
        Operand a = value(e.kids[0]);
        Operand amt = value(e.kids[1]);
        const unsigned w = mir::bit_width(t.width);
        if (d_ == Dialect::Cm) {
            amt = emit(Opcode::And, at.width, {amt, imm(at.width, w - 1)});
        } else {
            Operand big = emit(Opcode::ICmp, Type::I1, {amt, imm(at.width, w)}, Pred::Uge);
            trap_if(big);
        }
        amt = convert(amt, SrcType{at.width, false}, t);
        const Opcode op = e.bop == BinOp::Shl ? Opcode::Shl : t.is_signed ? Opcode::AShr : Opcode::LShr;
        return emit(op, t.width, {a, amt});
    }

    Operand division(const Expr &e) {
        const SrcType t = e.type;
        Operand a = value(e.kids[0]);
        Operand b = value(e.kids[1]);
        if (d_ == Dialect::Gm) {
            Operand zero = emit(Opcode::Intrinsic, Type::I1, {b}, Pred::Eq, "gm.divcheck");
            trap_if(zero);
        }
        Opcode op;
        if (e.bop == BinOp::Div) op = t.is_signed ? Opcode::SDiv : Opcode::UDiv;
        else op = t.is_signed ? Opcode::SRem : Opcode::URem;
        return emit(op, t.width, {a, b});
    }

    /// Branching evaluation of `c ? a : b` (or a short-circuit operator).
    Operand branchy(const Expr &c, const Expr *a, const Expr *b, Type result, std::optional<Operand> a_const,
                    std::optional<Operand> b_const) {
        Operand cv = cond(c);
        const std::size_t tb = new_block(), fb = new_block(), join = new_block();
        cond_branch(std::move(cv), tb, fb);
        const Env saved = env_;
        cur_ = tb;
        Operand av = a ? value(*a) : *a_const;
        if (a && !a->type.is_bool() && result == Type::I1) av = emit(Opcode::ICmp, Type::I1, {av, imm(a->type.width, 0)}, Pred::Ne);
        branch(join, {av});
        cur_ = fb;
        Operand bv = b ? value(*b) : *b_const;
        if (b && !b->type.is_bool() && result == Type::I1) bv = emit(Opcode::ICmp, Type::I1, {bv, imm(b->type.width, 0)}, Pred::Ne);
        branch(join, {bv});
        env_ = saved;
        cur_ = join;
        const std::string name = fresh();
        f_.blocks[join].params.push_back({name, result});
        return Operand::make_reg(name);
    }

    Operand value(const Expr &e) {
        switch (e.kind) {
        case ExprKind::Literal:
            return imm(e.type.width, detail::literal_bits(e, e.type));
        case ExprKind::Var:
            return env_[e.slot];
        case ExprKind::Unary: {
            if (e.uop == UnOp::LogNot) {
                Operand c = cond(e.kids[0]);
                return emit(Opcode::Xor, Type::I1, {c, imm(Type::I1, 1)});
            }
            Operand v = value(e.kids[0]);
            if (e.uop == UnOp::Neg) return emit(Opcode::Sub, e.type.width, {imm(e.type.width, 0), v});
            return emit(Opcode::Xor, e.type.width, {v, imm(e.type.width, mir::type_mask(e.type.width))});
        }
        case ExprKind::Cast:
            return convert(value(e.kids[0]), e.kids[0].type, e.type);
        case ExprKind::Ternary: {
            if (cannot_trap(e.kids[1], d_) && cannot_trap(e.kids[2], d_)) {
                Operand c = cond(e.kids[0]);
                Operand a = value(e.kids[1]);
                Operand b = value(e.kids[2]);
                return emit(Opcode::Select, e.type.width, {c, a, b});
            }
            return branchy(e.kids[0], &e.kids[1], &e.kids[2], e.type.width, std::nullopt, std::nullopt);
        }
        case ExprKind::Binary:
            break;
        }
        const Type t = e.type.width;
        switch (e.bop) {
        case BinOp::LogAnd:
        case BinOp::LogOr: {
            const bool is_and = e.bop == BinOp::LogAnd;
            if (cannot_trap(e.kids[1], d_)) {
                Operand a = cond(e.kids[0]);
                Operand b = cond(e.kids[1]);
                return emit(is_and ? Opcode::And : Opcode::Or, Type::I1, {a, b});
            }
            const Operand shortcut = imm(Type::I1, is_and ? 0 : 1);
            if (is_and) return branchy(e.kids[0], &e.kids[1], nullptr, Type::I1, std::nullopt, shortcut);
            return branchy(e.kids[0], nullptr, &e.kids[1], Type::I1, shortcut, std::nullopt);
        }
        case BinOp::Div:
        case BinOp::Rem:
            return division(e);
        case BinOp::Shl:
        case BinOp::Shr:
            return shift(e);
        default:
            break;
        }
        Operand a = value(e.kids[0]);
        Operand b = value(e.kids[1]);
        if (is_comparison(e.bop)) {
            const bool s = e.kids[0].type.is_signed && !e.kids[0].type.is_bool();
            Pred p = Pred::Eq;
            switch (e.bop) {
            case BinOp::Eq: p = Pred::Eq; break;
            case BinOp::Ne: p = Pred::Ne; break;
            case BinOp::Lt: p = s ? Pred::Slt : Pred::Ult; break;
            case BinOp::Le: p = s ? Pred::Sle : Pred::Ule; break;
            case BinOp::Gt: p = s ? Pred::Sgt : Pred::Ugt; break;
            default: p = s ? Pred::Sge : Pred::Uge; break;
            }
            return emit(Opcode::ICmp, Type::I1, {a, b}, p);
        }
        Opcode op = Opcode::Add;
        switch (e.bop) {
        case BinOp::Add: op = Opcode::Add; break;
        case BinOp::Sub: op = Opcode::Sub; break;
        case BinOp::Mul: op = Opcode::Mul; break;
        case BinOp::And: op = Opcode::And; break;
        case BinOp::Or: op = Opcode::Or; break;
        default: op = Opcode::Xor; break;
        }
        return emit(op, t, {a, b});
    }

    static constexpr std::size_t kDead = static_cast<std::size_t>(-1);

    const SourceAst &ast_;
    Dialect d_;
    mir::Function f_;
    Env env_;
    std::vector<bool> declared_;
    std::size_t cur_ = kDead;
    int reg_counter_ = 0;
    int block_counter_ = 0;
};

} // namespace

mir::Function lower_ast(const SourceAst &input, Dialect d) {
    SourceAst ast = input;
    try {
        detail::check(ast, d);
    } catch (const detail::TypeFault &f) {
        throw LoweringError(std::to_string(f.line) + ":" + std::to_string(f.column) + ": " + f.message);
    }
    mir::Function f = Lowering(ast, d).run();
    try {
        mir::require_valid(f);
    } catch (const ValidationError &e) {
        throw LoweringError(std::string("lowering produced invalid MIR: ") + e.what());
    }
    return f;
}

mir::Function compile_source(std::string_view text, Dialect d) { return lower_ast(parse_source(text, d), d); }

} // namespace nv::frontend

#include "nv/diversify.hpp"
#include "nv/semantics.hpp"

#include <functional>
#include <random>

namespace nv::diversify {

using namespace frontend;

namespace {

class Rng {
public:
    Rng(std::uint64_t seed, std::uint64_t stream) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(stream)};
        gen_.seed(seq);
    }

    std::size_t below(std::size_t n) { return n ? static_cast<std::size_t>(gen_() % n) : 0; }
    bool one_in(std::uint64_t n) { return gen_() % n == 0; }

private:
    std::mt19937_64 gen_;
};

// Literal helpers. Values are carried as bit patterns of the literal's type.

std::uint64_t literal_bits(const Expr &e) {
    const std::uint64_t m = mir::type_mask(e.type.width);
    return (e.negative ? ~e.magnitude + 1 : e.magnitude) & m;
}

Expr make_literal(SrcType t, std::uint64_t bits) {
    Expr e;
    e.kind = ExprKind::Literal;
    e.type = t;
    bits &= mir::type_mask(t.width);
    const std::int64_t s = sem::sign_extend(bits, mir::bit_width(t.width));
    if (t.is_signed && s < 0) {
        e.negative = true;
        e.magnitude = (~bits + 1) & mir::type_mask(t.width);
    } else {
        e.magnitude = bits;
    }
    return e;
}

bool is_int_literal(const Expr &e) { return e.kind == ExprKind::Literal && !e.type.is_bool(); }

bool literal_is(const Expr &e, std::uint64_t v) { return is_int_literal(e) && !e.negative && e.magnitude == v; }

Expr binary(BinOp op, Expr a, Expr b, SrcType t) {
    Expr e;
    e.kind = ExprKind::Binary;
    e.bop = op;
    e.type = t;
    e.kids.push_back(std::move(a));
    e.kids.push_back(std::move(b));
    return e;
}

std::optional<mir::Opcode> arith_opcode(BinOp op, bool is_signed) {
    switch (op) {
    case BinOp::Add: return mir::Opcode::Add;
    case BinOp::Sub: return mir::Opcode::Sub;
    case BinOp::Mul: return mir::Opcode::Mul;
    case BinOp::Div: return is_signed ? mir::Opcode::SDiv : mir::Opcode::UDiv;
    case BinOp::Rem: return is_signed ? mir::Opcode::SRem : mir::Opcode::URem;
    case BinOp::And: return mir::Opcode::And;
    case BinOp::Or: return mir::Opcode::Or;
    case BinOp::Xor: return mir::Opcode::Xor;
    default: return std::nullopt;
    }
}

std::optional<BinOp> negated(BinOp op) {
    switch (op) {
    case BinOp::Eq: return BinOp::Ne;
    case BinOp::Ne: return BinOp::Eq;
    case BinOp::Lt: return BinOp::Ge;
    case BinOp::Ge: return BinOp::Lt;
    case BinOp::Gt: return BinOp::Le;
    case BinOp::Le: return BinOp::Gt;
    default: return std::nullopt;
    }
}

bool is_negatable_compare(const Expr &e) { return e.kind == ExprKind::Binary && negated(e.bop).has_value(); }

// Traversal. Callbacks receive every expression, children before parents.

void walk_expr(Expr &e, const std::function<void(Expr &)> &f) {
    for (auto &k : e.kids) walk_expr(k, f);
    f(e);
}

void walk_exprs(std::vector<Stmt> &body, const std::function<void(Expr &)> &f) {
    for (auto &s : body) {
        for (auto &e : s.exprs) walk_expr(e, f);
        walk_exprs(s.body, f);
        walk_exprs(s.else_body, f);
    }
}

void walk_lists(std::vector<Stmt> &body, const std::function<void(std::vector<Stmt> &)> &f) {
    f(body);
    for (auto &s : body) {
        walk_lists(s.body, f);
        walk_lists(s.else_body, f);
    }
}

// Restatement: keeps every variant clear of the constant patterns that the
// injectable optimizer bugs key on, without changing behaviour.

void fold_constants(Expr &e) {
    if (e.type.is_bool()) return;
    if (e.kind == ExprKind::Binary && is_int_literal(e.kids[0]) && is_int_literal(e.kids[1])) {
        const auto op = arith_opcode(e.bop, e.type.is_signed);
        if (!op) return;
        const auto r = sem::binary(*op, e.type.width, literal_bits(e.kids[0]), literal_bits(e.kids[1]));
        if (r.ok) e = make_literal(e.type, r.bits);
    } else if (e.kind == ExprKind::Unary && e.uop != UnOp::LogNot && is_int_literal(e.kids[0])) {
        const std::uint64_t v = literal_bits(e.kids[0]);
        e = make_literal(e.type, e.uop == UnOp::Neg ? ~v + 1 : ~v);
    }
}

void restate_mul3(Expr &e) {
    if (e.kind != ExprKind::Binary || e.bop != BinOp::Mul) return;
    const int lit = literal_is(e.kids[1], 3) ? 1 : literal_is(e.kids[0], 3) ? 0 : -1;
    if (lit < 0) return;
    Expr x = e.kids[1 - lit];
    Expr twice = binary(BinOp::Shl, x, make_literal(e.type, 1), e.type);
    e = binary(BinOp::Add, std::move(twice), std::move(x), e.type);
}

void restate_narrow_compare(Expr &e) {
    if (e.kind != ExprKind::Binary || (e.bop != BinOp::Eq && e.bop != BinOp::Ne)) return;
    for (int c = 0; c < 2; ++c) {
        Expr &cast = e.kids[c];
        Expr &lit = e.kids[1 - c];
        if (cast.kind != ExprKind::Cast || !is_int_literal(lit) || cast.type.is_bool()) continue;
        const SrcType from = cast.kids[0].type;
        if (from.is_bool() || mir::bit_width(from.width) <= mir::bit_width(cast.type.width)) continue;
        const std::uint64_t mask = mir::type_mask(cast.type.width);
        const std::uint64_t bits = literal_bits(lit) & mask;
        Expr inner = std::move(cast.kids[0]);
        cast = binary(BinOp::And, std::move(inner), make_literal(from, mask), from);
        lit = make_literal(from, bits);
        return;
    }
}

void restate(SourceAst &ast) {
    walk_exprs(ast.body, [](Expr &e) {
        fold_constants(e);
        restate_mul3(e);
        restate_narrow_compare(e);
    });
}

// Rewrite rules. Every rule preserves behaviour; sites are recollected after each application.

enum class Rule { Commute, NegateCondition, TernaryToIf, IfToTernary, MulShift, Redundant, SubAsAddNeg };

constexpr Rule kRules[] = {Rule::Commute,    Rule::NegateCondition, Rule::TernaryToIf, Rule::IfToTernary,
                           Rule::MulShift,   Rule::Redundant,       Rule::SubAsAddNeg};

bool is_commutative(BinOp op) {
    switch (op) {
    case BinOp::Add:
    case BinOp::Mul:
    case BinOp::And:
    case BinOp::Or:
    case BinOp::Xor:
    case BinOp::Eq:
    case BinOp::Ne: return true;
    default: return false;
    }
}

/// Largest k such that 2^k is a representable positive literal of type t.
unsigned max_pow2_shift(SrcType t) { return mir::bit_width(t.width) - (t.is_signed ? 2 : 1); }

bool mul_shift_site(const Expr &e) {
    if (e.kind != ExprKind::Binary) return false;
    if (e.bop == BinOp::Mul) return literal_is(e.kids[0], 2) || literal_is(e.kids[1], 2);
    if (e.bop == BinOp::Shl && is_int_literal(e.kids[1]) && !e.kids[1].negative)
        return e.kids[1].magnitude >= 1 && e.kids[1].magnitude <= max_pow2_shift(e.type);
    return false;
}

void apply_mul_shift(Expr &e) {
    if (e.bop == BinOp::Mul) {
        Expr x = literal_is(e.kids[1], 2) ? e.kids[0] : e.kids[1];
        e = binary(BinOp::Shl, std::move(x), make_literal(e.type, 1), e.type);
        return;
    }
    const std::uint64_t k = e.kids[1].magnitude;
    Expr x = std::move(e.kids[0]);
    e = binary(BinOp::Mul, std::move(x), make_literal(e.type, std::uint64_t{1} << k), e.type);
}

struct StmtSite {
    std::vector<Stmt> *list;
    std::size_t index;
};

class Mutator {
public:
    Mutator(SourceAst &ast, Rng &rng) : ast_(ast), rng_(rng) {}

    /// Applies one randomly chosen applicable rule; false if none applies.
    bool apply_random_rule() {
        std::vector<Rule> usable;
        for (auto r : kRules)
            if (count(r) > 0) usable.push_back(r);
        if (usable.empty()) return false;
        const Rule r = usable[rng_.below(usable.size())];
        apply(r, rng_.below(count(r)));
        return true;
    }

    /// Off-by-one in one integer constant; false if the function has none.
    bool break_constant() {
        std::vector<Expr *> lits = expr_sites([](const Expr &e) { return is_int_literal(e); });
        if (lits.empty()) return false;
        Expr &e = *lits[rng_.below(lits.size())];
        const SrcType t = e.type;
        const std::uint64_t v = literal_bits(e);
        const std::uint64_t top = t.is_signed ? mir::type_mask(t.width) >> 1 : mir::type_mask(t.width);
        e = make_literal(t, v == top ? v - 1 : v + 1);
        return true;
    }

private:
    std::vector<Expr *> expr_sites(const std::function<bool(const Expr &)> &pred) {
        std::vector<Expr *> out;
        walk_exprs(ast_.body, [&](Expr &e) {
            if (pred(e)) out.push_back(&e);
        });
        return out;
    }

    std::vector<StmtSite> stmt_sites(const std::function<bool(const std::vector<Stmt> &, std::size_t)> &pred) {
        std::vector<StmtSite> out;
        walk_lists(ast_.body, [&](std::vector<Stmt> &list) {
            for (std::size_t i = 0; i < list.size(); ++i)
                if (pred(list, i)) out.push_back({&list, i});
        });
        return out;
    }

    static bool negatable_if(const std::vector<Stmt> &l, std::size_t i) {
        const Stmt &s = l[i];
        return s.kind == StmtKind::If && s.has_else && !s.else_body.empty() && is_negatable_compare(s.exprs[0]);
    }

    static bool ternary_return(const std::vector<Stmt> &l, std::size_t i) {
        return l[i].kind == StmtKind::Return && l[i].exprs[0].kind == ExprKind::Ternary;
    }

    static bool if_return_pair(const std::vector<Stmt> &l, std::size_t i) {
        const Stmt &s = l[i];
        return s.kind == StmtKind::If && s.else_body.empty() && s.body.size() == 1 && s.body[0].kind == StmtKind::Return &&
               i + 1 < l.size() && l[i + 1].kind == StmtKind::Return;
    }

    std::vector<Expr *> sites(Rule r) {
        switch (r) {
        case Rule::Commute:
            return expr_sites([](const Expr &e) { return e.kind == ExprKind::Binary && is_commutative(e.bop); });
        case Rule::NegateCondition:
            return expr_sites([](const Expr &e) { return e.kind == ExprKind::Ternary && is_negatable_compare(e.kids[0]); });
        case Rule::MulShift:
            return expr_sites(mul_shift_site);
        case Rule::Redundant:
            return expr_sites([](const Expr &e) { return !e.type.is_bool() && e.kind != ExprKind::Literal; });
        case Rule::SubAsAddNeg:
            return expr_sites([](const Expr &e) {
                return e.kind == ExprKind::Binary && e.bop == BinOp::Sub && e.kids[1].kind != ExprKind::Literal;
            });
        default:
            return {};
        }
    }

    std::size_t count(Rule r) {
        switch (r) {
        case Rule::NegateCondition: return sites(r).size() + stmt_sites(negatable_if).size();
        case Rule::TernaryToIf: return stmt_sites(ternary_return).size();
        case Rule::IfToTernary: return stmt_sites(if_return_pair).size();
        default: return sites(r).size();
        }
    }

    void apply(Rule r, std::size_t k) {
        switch (r) {
        case Rule::Commute: {
            Expr &e = *sites(r)[k];
            std::swap(e.kids[0], e.kids[1]);
            return;
        }
        case Rule::NegateCondition: {
            auto exprs = sites(r);
            if (k < exprs.size()) {
                Expr &e = *exprs[k];
                e.kids[0].bop = *negated(e.kids[0].bop);
                std::swap(e.kids[1], e.kids[2]);
                return;
            }
            const StmtSite s = stmt_sites(negatable_if)[k - exprs.size()];
            Stmt &st = (*s.list)[s.index];
            st.exprs[0].bop = *negated(st.exprs[0].bop);
            std::swap(st.body, st.else_body);
            return;
        }
        case Rule::TernaryToIf: {
            const StmtSite s = stmt_sites(ternary_return)[k];
            Stmt ret = (*s.list)[s.index];
            Expr t = std::move(ret.exprs[0]);
            Stmt branch;
            branch.kind = StmtKind::If;
            branch.has_else = true;
            branch.exprs.push_back(std::move(t.kids[0]));
            Stmt ra = ret, rb = ret;
            ra.exprs[0] = std::move(t.kids[1]);
            rb.exprs[0] = std::move(t.kids[2]);
            branch.body.push_back(std::move(ra));
            branch.else_body.push_back(std::move(rb));
            (*s.list)[s.index] = std::move(branch);
            return;
        }
        case Rule::IfToTernary: {
            const StmtSite s = stmt_sites(if_return_pair)[k];
            std::vector<Stmt> &l = *s.list;
            Expr t;
            t.kind = ExprKind::Ternary;
            t.type = ast_.ret;
            t.kids.push_back(std::move(l[s.index].exprs[0]));
            t.kids.push_back(std::move(l[s.index].body[0].exprs[0]));
            t.kids.push_back(std::move(l[s.index + 1].exprs[0]));
            Stmt ret = l[s.index + 1];
            ret.exprs.clear();
            ret.exprs.push_back(std::move(t));
            l[s.index] = std::move(ret);
            l.erase(l.begin() + static_cast<std::ptrdiff_t>(s.index) + 1);
            return;
        }
        case Rule::MulShift:
            apply_mul_shift(*sites(r)[k]);
            return;
        case Rule::Redundant: {
            Expr &e = *sites(r)[k];
            const SrcType t = e.type;
            const BinOp op = rng_.below(2) ? BinOp::Xor : BinOp::Add;
            Expr inner = std::move(e);
            e = binary(op, std::move(inner), make_literal(t, 0), t);
            return;
        }
        case Rule::SubAsAddNeg: {
            Expr &e = *sites(r)[k];
            Expr neg;
            neg.kind = ExprKind::Unary;
            neg.uop = UnOp::Neg;
            neg.type = e.kids[1].type;
            neg.kids.push_back(std::move(e.kids[1]));
            e.bop = BinOp::Add;
            e.kids[1] = std::move(neg);
            return;
        }
        }
    }

    SourceAst &ast_;
    Rng &rng_;
};

} // namespace

std::string mock_response(const ProviderConfig &cfg, const std::string &prompt) {
    const std::string reference = reference_from_prompt(prompt);
    if (reference.empty()) throw ProviderError(ProviderError::Kind::MalformedResponse, "mock: prompt carries no reference");
    SourceAst base;
    try {
        base = parse_source(reference, cfg.in_dialect);
    } catch (const Error &e) {
        throw ConfigError(std::string("mock: reference does not parse: ") + e.what());
    }
    restate(base);

    const std::string fence = "```" + std::string(dialect_name(cfg.out_dialect));
    std::string out;
    for (int k = 1; k <= cfg.n_variants; ++k) {
        Rng rng(cfg.seed, static_cast<std::uint64_t>(k));
        SourceAst ast = base;
        Mutator m(ast, rng);
        const std::size_t rules = 1 + rng.below(3);
        for (std::size_t i = 0; i < rules; ++i) m.apply_random_rule();
        if (rng.one_in(10)) m.break_constant();
        if (k > 1) out += "\n";
        out += fence + "\n" + print_source(ast, cfg.out_dialect) + "```\n";
    }
    return out;
}

} // namespace nv::diversify

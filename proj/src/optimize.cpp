#include "nv/compiler.hpp"
#include "nv/semantics.hpp"

#include <algorithm>
#include <functional>
#include <unordered_map>
#include <unordered_set>

namespace nv::compiler {

using namespace mir;

std::string_view bug_name(BugId b) noexcept {
    switch (b) {
    case BugId::B1: return "B1";
    case BugId::B2: return "B2";
    case BugId::B3: return "B3";
    }
    return "?";
}

std::optional<BugId> parse_bug(std::string_view s) noexcept {
    if (s == "B1" || s == "b1") return BugId::B1;
    if (s == "B2" || s == "b2") return BugId::B2;
    if (s == "B3" || s == "b3") return BugId::B3;
    return std::nullopt;
}

int activation_level(BugId b) noexcept {
    switch (b) {
    case BugId::B1: return 1;
    case BugId::B2: return 2;
    case BugId::B3: return 3;
    }
    return 4;
}

namespace {

using Subst = std::unordered_map<std::string, Operand>;

struct Ctx {
    int level;
    std::optional<BugId> bug;

    bool active(BugId b) const { return bug == b && level >= activation_level(b); }
};

void for_each_operand(Function &f, const std::function<void(Operand &)> &fn) {
    for (auto &b : f.blocks) {
        for (auto &i : b.insts)
            for (auto &o : i.operands) fn(o);
        auto &t = b.term;
        if (t.kind == TermKind::Ret || t.kind == TermKind::CondBr) fn(t.operand);
        for (auto &a : t.target.args) fn(a);
        for (auto &a : t.else_target.args) fn(a);
    }
}

Operand resolve(const Subst &s, Operand o) {
    for (std::size_t guard = 0; o.is_reg() && guard <= s.size(); ++guard) {
        auto it = s.find(o.reg);
        if (it == s.end()) break;
        o = it->second;
    }
    return o;
}

void substitute(Function &f, const Subst &s) {
    if (s.empty()) return;
    for_each_operand(f, [&](Operand &o) { o = resolve(s, o); });
}

std::unordered_map<std::string, std::size_t> use_counts(Function &f) {
    std::unordered_map<std::string, std::size_t> uses;
    for_each_operand(f, [&](Operand &o) {
        if (o.is_reg()) ++uses[o.reg];
    });
    return uses;
}

std::unordered_map<std::string, Instruction> definitions(const Function &f) {
    std::unordered_map<std::string, Instruction> defs;
    for (const auto &b : f.blocks)
        for (const auto &i : b.insts) defs.emplace(i.dest, i);
    return defs;
}

bool imm_is(const Operand &o, std::uint64_t bits) { return o.is_imm() && o.imm.bits == bits; }
bool imm_all_ones(const Operand &o) { return o.is_imm() && o.imm.bits == type_mask(o.imm.type); }

bool may_trap(const Instruction &i) {
    if (is_division(i.op)) {
        const Operand &d = i.operands[1];
        if (!d.is_imm() || d.imm.bits == 0) return true;
        const bool is_signed = i.op == Opcode::SDiv || i.op == Opcode::SRem;
        return is_signed && imm_all_ones(d);
    }
    if (is_shift(i.op)) {
        const Operand &a = i.operands[1];
        return !a.is_imm() || a.imm.bits >= bit_width(i.type);
    }
    return false;
}

Pred swapped(Pred p) {
    switch (p) {
    case Pred::Slt: return Pred::Sgt;
    case Pred::Sgt: return Pred::Slt;
    case Pred::Sle: return Pred::Sge;
    case Pred::Sge: return Pred::Sle;
    case Pred::Ult: return Pred::Ugt;
    case Pred::Ugt: return Pred::Ult;
    case Pred::Ule: return Pred::Uge;
    case Pred::Uge: return Pred::Ule;
    default: return p;
    }
}

/// Signed division rounding toward negative infinity (the B1 defect).
std::uint64_t floor_divide(Opcode op, Type t, std::uint64_t a, std::uint64_t b) {
    const unsigned w = bit_width(t);
    const std::int64_t sa = sem::sign_extend(a, w), sb = sem::sign_extend(b, w);
    std::int64_t q = sa / sb, r = sa % sb;
    if (r != 0 && ((r < 0) != (sb < 0))) {
        q -= 1;
        r += sb;
    }
    return static_cast<std::uint64_t>(op == Opcode::SDiv ? q : r) & type_mask(t);
}

std::optional<Operand> fold(const Instruction &i, const Ctx &ctx) {
    const auto &ops = i.operands;
    switch (i.op) {
    case Opcode::Const:
        return ops[0];
    case Opcode::Select:
        if (ops[0].is_imm()) return ops[0].imm.bits ? ops[1] : ops[2];
        if (ops[1] == ops[2]) return ops[1];
        return std::nullopt;
    default:
        break;
    }
    for (const auto &o : ops)
        if (!o.is_imm()) return std::nullopt;
    switch (i.op) {
    case Opcode::ICmp:
        return Operand::make_imm(Value::of(Type::I1, sem::icmp(i.pred, ops[0].imm.type, ops[0].imm.bits, ops[1].imm.bits)));
    case Opcode::ZExt:
    case Opcode::SExt:
    case Opcode::Trunc:
        return Operand::make_imm(Value::of(i.type, sem::cast(i.op, ops[0].imm.type, i.type, ops[0].imm.bits)));
    case Opcode::Intrinsic:
        if (i.intrinsic == "gm.divcheck") return Operand::make_imm(Value::of(Type::I1, ops[0].imm.bits == 0));
        return std::nullopt;
    default: {
        const auto r = sem::binary(i.op, i.type, ops[0].imm.bits, ops[1].imm.bits);
        if (!r.ok) return std::nullopt;
        if (ctx.active(BugId::B1) && (i.op == Opcode::SDiv || i.op == Opcode::SRem) && ops[0].imm.as_signed() < 0)
            return Operand::make_imm(Value::of(i.type, floor_divide(i.op, i.type, ops[0].imm.bits, ops[1].imm.bits)));
        return Operand::make_imm(Value::of(i.type, r.bits));
    }
    }
}

/// Removes every instruction for which `rewrite` yields a replacement operand.
bool replace_instructions(Function &f, const std::function<std::optional<Operand>(const Instruction &)> &rewrite) {
    Subst subst;
    for (auto &b : f.blocks) {
        std::vector<Instruction> kept;
        kept.reserve(b.insts.size());
        for (auto &i : b.insts) {
            for (auto &o : i.operands) o = resolve(subst, o);
            if (auto r = rewrite(i)) subst.emplace(i.dest, *r);
            else kept.push_back(std::move(i));
        }
        b.insts = std::move(kept);
    }
    substitute(f, subst);
    return !subst.empty();
}

bool constant_fold(Function &f, const Ctx &ctx) {
    return replace_instructions(f, [&](const Instruction &i) { return fold(i, ctx); });
}

bool algebraic_identities(Function &f) {
    return replace_instructions(f, [](const Instruction &i) -> std::optional<Operand> {
        if (!is_binary(i.op)) return std::nullopt;
        const Operand &a = i.operands[0], &b = i.operands[1];
        switch (i.op) {
        case Opcode::Add:
        case Opcode::Or:
        case Opcode::Xor:
            if (imm_is(b, 0)) return a;
            if (imm_is(a, 0)) return b;
            break;
        case Opcode::Sub:
        case Opcode::Shl:
        case Opcode::LShr:
        case Opcode::AShr:
            if (imm_is(b, 0)) return a;
            break;
        case Opcode::Mul:
            if (imm_is(b, 1)) return a;
            if (imm_is(a, 1)) return b;
            break;
        case Opcode::And:
            if (imm_all_ones(b)) return a;
            if (imm_all_ones(a)) return b;
            break;
        case Opcode::SDiv:
        case Opcode::UDiv:
            if (imm_is(b, 1) && i.type != Type::I1) return a;
            break;
        default:
            break;
        }
        return std::nullopt;
    });
}

bool dead_instruction_elimination(Function &f) {
    bool any = false;
    for (;;) {
        auto uses = use_counts(f);
        bool changed = false;
        for (auto &b : f.blocks) {
            const auto before = b.insts.size();
            std::erase_if(b.insts, [&](const Instruction &i) { return !uses.count(i.dest) && !may_trap(i); });
            changed |= b.insts.size() != before;
        }
        if (!changed) return any;
        any = true;
    }
}

bool instruction_combining(Function &f, const Ctx &ctx) {
    bool changed = false;
    // Constants to the right of commutative operators and comparisons.
    for (auto &b : f.blocks) {
        for (auto &i : b.insts) {
            if (i.operands.size() != 2 || !i.operands[0].is_imm() || !i.operands[1].is_reg()) continue;
            if (is_commutative(i.op)) {
                std::swap(i.operands[0], i.operands[1]);
                changed = true;
            } else if (i.op == Opcode::ICmp) {
                std::swap(i.operands[0], i.operands[1]);
                i.pred = swapped(i.pred);
                changed = true;
            }
        }
    }
    const auto defs = definitions(f);
    auto def_of = [&](const Operand &o) -> const Instruction * {
        if (!o.is_reg()) return nullptr;
        auto it = defs.find(o.reg);
        return it == defs.end() ? nullptr : &it->second;
    };
    changed |= replace_instructions(f, [&](const Instruction &i) -> std::optional<Operand> {
        if (i.op == Opcode::Sub && imm_is(i.operands[0], 0)) {
            const Instruction *d = def_of(i.operands[1]);
            if (d && d->op == Opcode::Sub && imm_is(d->operands[0], 0)) return d->operands[1];
        }
        if (i.op == Opcode::Xor && imm_all_ones(i.operands[1])) {
            const Instruction *d = def_of(i.operands[0]);
            if (d && d->op == Opcode::Xor && imm_all_ones(d->operands[1])) return d->operands[0];
        }
        if (i.op == Opcode::Select && i.type == Type::I1 && imm_is(i.operands[1], 1) && imm_is(i.operands[2], 0))
            return i.operands[0];
        return std::nullopt;
    });
    for (auto &b : f.blocks) {
        for (auto &i : b.insts) {
            if (i.op == Opcode::Select && i.type != Type::I1 && imm_is(i.operands[2], 0)) {
                const bool one = imm_is(i.operands[1], 1), ones = imm_all_ones(i.operands[1]);
                if (one || ones) {
                    i.op = one ? Opcode::ZExt : Opcode::SExt;
                    i.operands.resize(1);
                    changed = true;
                }
            }
            if (ctx.active(BugId::B2) && i.op == Opcode::Mul && imm_is(i.operands[1], 3)) {
                i.op = Opcode::Shl;
                i.operands[1] = Operand::make_imm(Value::of(i.type, 1));
                changed = true;
            }
        }
    }
    return changed;
}

bool branch_folding(Function &f, const Ctx &ctx) {
    bool changed = false;
    const auto defs = definitions(f);
    auto fed_by_trunc = [&](const Operand &cond) {
        if (!cond.is_reg()) return false;
        auto it = defs.find(cond.reg);
        if (it == defs.end() || it->second.op != Opcode::ICmp) return false;
        for (const auto &o : it->second.operands) {
            if (!o.is_reg()) continue;
            auto d = defs.find(o.reg);
            if (d != defs.end() && d->second.op == Opcode::Trunc) return true;
        }
        return false;
    };
    for (auto &b : f.blocks) {
        auto &t = b.term;
        if (t.kind != TermKind::CondBr) continue;
        std::optional<bool> taken;
        if (t.operand.is_imm()) taken = t.operand.imm.bits != 0;
        else if (t.target == t.else_target) taken = true;
        else if (ctx.active(BugId::B3) && fed_by_trunc(t.operand)) taken = false;
        if (!taken) continue;
        BlockTarget dest = *taken ? t.target : t.else_target;
        t = Terminator{TermKind::Br, {}, std::move(dest), {}};
        changed = true;
    }
    return changed;
}

bool strength_reduction(Function &f) {
    bool changed = false;
    for (auto &b : f.blocks) {
        for (auto &i : b.insts) {
            if (i.op != Opcode::Mul) continue;
            if (i.operands[0].is_imm() && i.operands[1].is_reg()) std::swap(i.operands[0], i.operands[1]);
            const Operand &c = i.operands[1];
            if (!c.is_imm() || c.imm.bits < 2 || (c.imm.bits & (c.imm.bits - 1)) != 0) continue;
            unsigned k = 0;
            while ((std::uint64_t{1} << k) != c.imm.bits) ++k;
            i.op = Opcode::Shl;
            i.operands[1] = Operand::make_imm(Value::of(i.type, k));
            changed = true;
        }
    }
    return changed;
}

bool unreachable_block_elimination(Function &f) {
    const auto order = reverse_post_order(f);
    if (order.size() == f.blocks.size()) return false;
    std::vector<bool> live(f.blocks.size(), false);
    for (auto i : order) live[i] = true;
    std::vector<BasicBlock> kept;
    for (std::size_t i = 0; i < f.blocks.size(); ++i)
        if (live[i]) kept.push_back(std::move(f.blocks[i]));
    f.blocks = std::move(kept);
    return true;
}

bool block_merging(Function &f) {
    bool any = false;
    for (bool changed = true; changed;) {
        changed = false;
        std::unordered_map<std::string, int> preds;
        for (const auto &b : f.blocks) {
            if (b.term.kind == TermKind::Br || b.term.kind == TermKind::CondBr) ++preds[b.term.target.label];
            if (b.term.kind == TermKind::CondBr) ++preds[b.term.else_target.label];
        }
        for (std::size_t a = 0; a < f.blocks.size() && !changed; ++a) {
            auto &pred = f.blocks[a];
            if (pred.term.kind != TermKind::Br) continue;
            const std::string label = pred.term.target.label;
            if (label == f.blocks.front().label || label == pred.label || preds[label] != 1) continue;
            auto it = std::find_if(f.blocks.begin(), f.blocks.end(), [&](const BasicBlock &b) { return b.label == label; });
            BasicBlock succ = std::move(*it);
            Subst subst;
            for (std::size_t p = 0; p < succ.params.size(); ++p) subst.emplace(succ.params[p].name, pred.term.target.args[p]);
            for (auto &i : succ.insts) pred.insts.push_back(std::move(i));
            pred.term = std::move(succ.term);
            f.blocks.erase(it);
            substitute(f, subst);
            changed = any = true;
        }
    }
    return any;
}

} // namespace

Function optimize(const Function &input, int level, std::optional<BugId> inject) {
    if (level < 0 || level > kMaxLevel) throw ConfigError("optimization level must be 0..3, got " + std::to_string(level));
    Function f = input;
    if (level == 0) return f;
    const Ctx ctx{level, inject};
    for (int iter = 0; iter < 32; ++iter) {
        bool changed = constant_fold(f, ctx);
        changed |= algebraic_identities(f);
        if (level >= 2) {
            changed |= instruction_combining(f, ctx);
            changed |= branch_folding(f, ctx);
        }
        if (level >= 3) {
            changed |= strength_reduction(f);
            changed |= unreachable_block_elimination(f);
            changed |= block_merging(f);
        }
        changed |= dead_instruction_elimination(f);
        if (!changed) break;
    }
    require_valid(f);
    return f;
}

} // namespace nv::compiler

#include "nv/exec.hpp"

#include <unordered_map>

namespace nv::exec {

using mir::Opcode;
using mir::TermKind;
using mir::Type;
using mir::Value;

bool outcomes_agree(const Outcome &a, const Outcome &b) noexcept {
    if (a.is_trap() || b.is_trap()) return a.is_trap() && b.is_trap();
    return a.value.bits == b.value.bits && a.value.type == b.value.type;
}

std::string to_string(const Outcome &o) {
    if (o.is_return()) return "Return(" + mir::to_string(o.value) + ")";
    return "Trap(" + std::string(trap_reason_name(o.reason)) + ")";
}

TraceProfile Trace::profile() const {
    TraceProfile p;
    for (const auto &op : ops) ++p[op];
    return p;
}

void check_args(std::span<const Type> params, std::span<const Value> args) {
    if (params.size() != args.size())
        throw ArgMismatch("expected " + std::to_string(params.size()) + " arguments, got " +
                          std::to_string(args.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i] != args[i].type)
            throw ArgMismatch("argument " + std::to_string(i) + " has type " +
                              std::string(mir::type_name(args[i].type)) + ", expected " +
                              std::string(mir::type_name(params[i])));
    }
}

// ---------------------------------------------------------------------------
// MIR evaluator

struct MirEvaluator::Inst {
    Opcode op;
    mir::Pred pred;
    Type type;
    Type src;
    std::uint32_t dst, a, b, c;
};

struct MirEvaluator::Move {
    std::uint32_t src, dst;
};

struct MirEvaluator::Block {
    std::uint32_t first = 0, count = 0;
    TermKind kind = TermKind::Trap;
    std::uint32_t operand = 0;
    std::uint32_t target = 0, else_target = 0;
    std::uint32_t moves = 0, nmoves = 0, else_moves = 0, else_nmoves = 0;
};

MirEvaluator::MirEvaluator(const MirEvaluator &) = default;
MirEvaluator::MirEvaluator(MirEvaluator &&) noexcept = default;
MirEvaluator &MirEvaluator::operator=(const MirEvaluator &) = default;
MirEvaluator &MirEvaluator::operator=(MirEvaluator &&) noexcept = default;
MirEvaluator::~MirEvaluator() = default;

MirEvaluator::MirEvaluator(const mir::Function &f) : ret_(f.ret) {
    mir::require_valid(f);
    std::unordered_map<std::string, std::uint32_t> slots;
    std::unordered_map<std::string, Type> types;
    auto slot_for = [&](const std::string &name) {
        auto [it, inserted] = slots.emplace(name, static_cast<std::uint32_t>(image_.size()));
        if (inserted) image_.push_back(0);
        return it->second;
    };
    for (const auto &p : f.params) {
        params_.push_back(p.type);
        slot_for(p.name);
        types[p.name] = p.type;
    }
    std::unordered_map<std::string, std::uint32_t> block_index;
    for (std::size_t i = 0; i < f.blocks.size(); ++i) {
        block_index.emplace(f.blocks[i].label, static_cast<std::uint32_t>(i));
        for (const auto &p : f.blocks[i].params) {
            slot_for(p.name);
            types[p.name] = p.type;
        }
        for (const auto &inst : f.blocks[i].insts) {
            slot_for(inst.dest);
            types[inst.dest] = inst.type;
        }
    }
    auto operand = [&](const mir::Operand &o) -> std::uint32_t {
        if (o.is_reg()) return slots.at(o.reg);
        image_.push_back(o.imm.bits);
        return static_cast<std::uint32_t>(image_.size() - 1);
    };
    auto operand_type = [&](const mir::Operand &o) { return o.is_reg() ? types.at(o.reg) : o.imm.type; };
    auto add_moves = [&](const mir::BlockTarget &t, std::uint32_t &first, std::uint32_t &n) {
        first = static_cast<std::uint32_t>(moves_.size());
        const auto &params = f.blocks[block_index.at(t.label)].params;
        for (std::size_t i = 0; i < t.args.size(); ++i)
            moves_.push_back({operand(t.args[i]), slots.at(params[i].name)});
        n = static_cast<std::uint32_t>(t.args.size());
    };

    for (const auto &b : f.blocks) {
        Block blk;
        blk.first = static_cast<std::uint32_t>(insts_.size());
        blk.count = static_cast<std::uint32_t>(b.insts.size());
        for (const auto &i : b.insts) {
            Inst pi{i.op, i.pred, i.type, i.type, slots.at(i.dest), 0, 0, 0};
            if (!i.operands.empty()) {
                pi.a = operand(i.operands[0]);
                pi.src = operand_type(i.operands[0]);
            }
            if (i.operands.size() > 1) pi.b = operand(i.operands[1]);
            if (i.operands.size() > 2) pi.c = operand(i.operands[2]);
            insts_.push_back(pi);
        }
        blk.kind = b.term.kind;
        switch (b.term.kind) {
        case TermKind::Ret:
            blk.operand = operand(b.term.operand);
            break;
        case TermKind::CondBr:
            blk.operand = operand(b.term.operand);
            blk.else_target = block_index.at(b.term.else_target.label);
            add_moves(b.term.else_target, blk.else_moves, blk.else_nmoves);
            [[fallthrough]];
        case TermKind::Br:
            blk.target = block_index.at(b.term.target.label);
            add_moves(b.term.target, blk.moves, blk.nmoves);
            break;
        case TermKind::Trap:
            break;
        }
        blocks_.push_back(blk);
    }
}

Outcome MirEvaluator::run(std::span<const Value> args, std::uint64_t fuel, std::uint64_t *steps) const {
    check_args(params_, args);
    std::vector<std::uint64_t> bits(args.size());
    for (std::size_t i = 0; i < args.size(); ++i) bits[i] = args[i].bits;
    return run_bits(bits, fuel, steps);
}

Outcome MirEvaluator::run_bits(std::span<const std::uint64_t> args, std::uint64_t fuel,
                               std::uint64_t *steps) const {
    std::vector<std::uint64_t> s(image_);
    for (std::size_t i = 0; i < args.size(); ++i) s[i] = args[i];
    std::uint64_t tmp[64];
    std::vector<std::uint64_t> big_tmp;
    std::uint64_t used = 0;
    auto finish = [&](Outcome o) {
        if (steps) *steps = used;
        return o;
    };
    std::uint32_t b = 0;
    for (;;) {
        const Block &blk = blocks_[b];
        for (std::uint32_t k = blk.first; k < blk.first + blk.count; ++k) {
            if (used >= fuel) return finish(Outcome::trapped(TrapReason::FuelExhausted));
            ++used;
            const Inst &i = insts_[k];
            switch (i.op) {
            case Opcode::Const:
                s[i.dst] = s[i.a];
                break;
            case Opcode::ICmp:
                s[i.dst] = sem::icmp(i.pred, i.src, s[i.a], s[i.b]) ? 1 : 0;
                break;
            case Opcode::Select:
                s[i.dst] = s[i.a] ? s[i.b] : s[i.c];
                break;
            case Opcode::ZExt:
            case Opcode::SExt:
            case Opcode::Trunc:
                s[i.dst] = sem::cast(i.op, i.src, i.type, s[i.a]);
                break;
            case Opcode::Intrinsic:
                // gm.divcheck: true when the divisor is zero.
                s[i.dst] = s[i.a] == 0 ? 1 : 0;
                break;
            default: {
                const auto r = sem::binary(i.op, i.type, s[i.a], s[i.b]);
                if (!r.ok) return finish(Outcome::trapped(r.reason));
                s[i.dst] = r.bits;
                break;
            }
            }
        }
        if (used >= fuel) return finish(Outcome::trapped(TrapReason::FuelExhausted));
        ++used;
        std::uint32_t first = 0, n = 0;
        switch (blk.kind) {
        case TermKind::Ret:
            return finish(Outcome::returned(Value::of(ret_, s[blk.operand])));
        case TermKind::Trap:
            return finish(Outcome::trapped(TrapReason::ExplicitTrap));
        case TermKind::Br:
            first = blk.moves;
            n = blk.nmoves;
            b = blk.target;
            break;
        case TermKind::CondBr:
            if (s[blk.operand]) {
                first = blk.moves;
                n = blk.nmoves;
                b = blk.target;
            } else {
                first = blk.else_moves;
                n = blk.else_nmoves;
                b = blk.else_target;
            }
            break;
        }
        std::uint64_t *buf = tmp;
        if (n > 64) {
            big_tmp.resize(n);
            buf = big_tmp.data();
        }
        for (std::uint32_t m = 0; m < n; ++m) buf[m] = s[moves_[first + m].src];
        for (std::uint32_t m = 0; m < n; ++m) s[moves_[first + m].dst] = buf[m];
    }
}

Outcome eval_mir(const mir::Function &f, std::span<const Value> args, std::uint64_t fuel) {
    return MirEvaluator(f).run(args, fuel);
}

// ---------------------------------------------------------------------------
// Bytecode VM (independent arithmetic)

namespace {

inline std::uint64_t mask_of(Type t) { return mir::type_mask(t); }

inline std::int64_t to_signed(std::uint64_t v, Type t) {
    const unsigned sh = 64 - mir::bit_width(t);
    return static_cast<std::int64_t>(v << sh) >> sh;
}

} // namespace

Vm::Vm(bc::Unit unit) : unit_(std::move(unit)) {
    bc::verify(unit_);
    names_.reserve(unit_.code.size());
    for (const auto &i : unit_.code) names_.push_back(bc::mnemonic(i));
}

RunResult Vm::run(std::span<const Value> args, std::uint64_t fuel, bool trace) const {
    check_args(unit_.params, args);
    std::vector<std::uint64_t> bits(args.size());
    for (std::size_t i = 0; i < args.size(); ++i) bits[i] = args[i].bits;
    return run_bits(bits, fuel, trace);
}

RunResult Vm::run_bits(std::span<const std::uint64_t> args, std::uint64_t fuel, bool trace) const {
    using bc::Op;
    RunResult res;
    if (trace) res.trace.emplace();
    std::vector<std::uint64_t> locals(unit_.locals, 0);
    for (std::size_t i = 0; i < args.size(); ++i) locals[i] = args[i];
    std::vector<std::uint64_t> st;
    st.reserve(16);
    auto pop = [&] {
        const std::uint64_t v = st.back();
        st.pop_back();
        return v;
    };
    auto stop = [&](Outcome o) {
        res.outcome = o;
        return res;
    };
    const auto &code = unit_.code;
    std::size_t pc = 0;
    for (;;) {
        if (res.steps >= fuel) return stop(Outcome::trapped(TrapReason::FuelExhausted));
        ++res.steps;
        const bc::Instr &in = code[pc];
        if (trace) res.trace->ops.push_back(names_[pc]);
        const Type w = in.width;
        const std::uint64_t m = mask_of(w);
        const unsigned bits = mir::bit_width(w);
        switch (in.op) {
        case Op::Push: st.push_back(in.imm & m); break;
        case Op::LdLoc: st.push_back(locals[in.index]); break;
        case Op::StLoc: locals[in.index] = pop(); break;
        case Op::Add: { auto b = pop(), a = pop(); st.push_back((a + b) & m); break; }
        case Op::Sub: { auto b = pop(), a = pop(); st.push_back((a - b) & m); break; }
        case Op::Mul: { auto b = pop(), a = pop(); st.push_back((a * b) & m); break; }
        case Op::And: { auto b = pop(), a = pop(); st.push_back(a & b); break; }
        case Op::Or: { auto b = pop(), a = pop(); st.push_back(a | b); break; }
        case Op::Xor: { auto b = pop(), a = pop(); st.push_back(a ^ b); break; }
        case Op::UDiv:
        case Op::URem: {
            auto b = pop(), a = pop();
            if (b == 0) return stop(Outcome::trapped(TrapReason::DivZero));
            st.push_back(in.op == Op::UDiv ? a / b : a % b);
            break;
        }
        case Op::SDiv:
        case Op::SRem: {
            auto b = pop(), a = pop();
            if (b == 0) return stop(Outcome::trapped(TrapReason::DivZero));
            const std::int64_t sa = to_signed(a, w), sb = to_signed(b, w);
            // MIN / -1 is the only overflowing signed division.
            if (sb == -1 && a == (std::uint64_t{1} << (bits - 1)))
                return stop(Outcome::trapped(TrapReason::OverflowDiv));
            const std::int64_t q = sa / sb;
            st.push_back(static_cast<std::uint64_t>(in.op == Op::SDiv ? q : sa - q * sb) & m);
            break;
        }
        case Op::Shl:
        case Op::LShr:
        case Op::AShr: {
            auto b = pop(), a = pop();
            if (b >= bits) return stop(Outcome::trapped(TrapReason::ShiftRange));
            std::uint64_t r = 0;
            if (in.op == Op::Shl) r = a << b;
            else if (in.op == Op::LShr) r = a >> b;
            else r = static_cast<std::uint64_t>(to_signed(a, w) >> b);
            st.push_back(r & m);
            break;
        }
        case Op::Cmp: {
            auto b = pop(), a = pop();
            const std::int64_t sa = to_signed(a, w), sb = to_signed(b, w);
            bool r = false;
            switch (in.pred) {
            case mir::Pred::Eq: r = a == b; break;
            case mir::Pred::Ne: r = a != b; break;
            case mir::Pred::Slt: r = sa < sb; break;
            case mir::Pred::Sle: r = sa <= sb; break;
            case mir::Pred::Sgt: r = sa > sb; break;
            case mir::Pred::Sge: r = sa >= sb; break;
            case mir::Pred::Ult: r = a < b; break;
            case mir::Pred::Ule: r = a <= b; break;
            case mir::Pred::Ugt: r = a > b; break;
            case mir::Pred::Uge: r = a >= b; break;
            }
            st.push_back(r ? 1 : 0);
            break;
        }
        case Op::Sel: {
            auto f = pop(), t = pop(), c = pop();
            st.push_back(c ? t : f);
            break;
        }
        case Op::ZExt: st.back() &= mask_of(in.to); break;
        case Op::Trunc: st.back() &= mask_of(in.to); break;
        case Op::SExt: st.back() = static_cast<std::uint64_t>(to_signed(st.back(), w)) & mask_of(in.to); break;
        case Op::Jmp: pc = in.index; continue;
        case Op::Jz:
            if (pop() == 0) {
                pc = in.index;
                continue;
            }
            break;
        case Op::Ret: return stop(Outcome::returned(Value::of(unit_.ret, pop())));
        case Op::Trap: return stop(Outcome::trapped(TrapReason::ExplicitTrap));
        }
        ++pc;
    }
}

RunResult run_bytecode(const bc::Unit &u, std::span<const Value> args, std::uint64_t fuel, bool trace) {
    return Vm(u).run(args, fuel, trace);
}

// ---------------------------------------------------------------------------
// JSON

nlohmann::json outcome_to_json(const Outcome &o) {
    if (o.is_return()) return {{"return", o.value.as_signed()}};
    return {{"trap", std::string(trap_reason_name(o.reason))}};
}

Outcome outcome_from_json(const nlohmann::json &j, Type ret) {
    if (j.contains("return")) return Outcome::returned(Value::of_signed(ret, j.at("return").get<std::int64_t>()));
    const auto name = j.at("trap").get<std::string>();
    for (auto r : {TrapReason::DivZero, TrapReason::OverflowDiv, TrapReason::ShiftRange, TrapReason::ExplicitTrap,
                   TrapReason::NVersionDivergence, TrapReason::FuelExhausted})
        if (trap_reason_name(r) == name) return Outcome::trapped(r);
    throw ConfigError("unknown trap reason '" + name + "'");
}

nlohmann::json trace_to_json(const std::string &function, std::span<const Value> args, const Outcome &outcome,
                             const Trace &trace) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto &v : args) a.push_back(v.as_signed());
    nlohmann::json profile = nlohmann::json::object();
    for (const auto &[op, n] : trace.profile()) profile[op] = n;
    return {{"function", function},
            {"args", a},
            {"outcome", outcome_to_json(outcome)},
            {"profile", profile},
            {"total", trace.total()}};
}

} // namespace nv::exec

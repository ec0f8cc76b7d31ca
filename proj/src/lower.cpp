#include "nv/compiler.hpp"

#include <openssl/evp.h>

#include <unordered_map>

namespace nv::compiler {

using namespace mir;

namespace {

bc::Op binary_op(Opcode op) {
    switch (op) {
    case Opcode::Add: return bc::Op::Add;
    case Opcode::Sub: return bc::Op::Sub;
    case Opcode::Mul: return bc::Op::Mul;
    case Opcode::SDiv: return bc::Op::SDiv;
    case Opcode::UDiv: return bc::Op::UDiv;
    case Opcode::SRem: return bc::Op::SRem;
    case Opcode::URem: return bc::Op::URem;
    case Opcode::And: return bc::Op::And;
    case Opcode::Or: return bc::Op::Or;
    case Opcode::Xor: return bc::Op::Xor;
    case Opcode::Shl: return bc::Op::Shl;
    case Opcode::LShr: return bc::Op::LShr;
    case Opcode::AShr: return bc::Op::AShr;
    default: throw LoweringError("not a binary opcode: " + std::string(opcode_name(op)));
    }
}

class Lowerer {
public:
    explicit Lowerer(const Function &f) : f_(f) {
        unit_.name = f.name;
        unit_.ret = f.ret;
        for (const auto &p : f.params) {
            unit_.params.push_back(p.type);
            declare(p.name, p.type);
        }
        for (const auto &b : f.blocks) {
            for (const auto &p : b.params) declare(p.name, p.type);
            for (const auto &i : b.insts) declare(i.dest, i.type);
        }
    }

    bc::Unit run() {
        const auto order = reverse_post_order(f_);
        std::vector<std::size_t> layout;
        std::vector<bool> live(f_.blocks.size(), false);
        for (auto i : order) live[i] = true;
        for (std::size_t i = 0; i < f_.blocks.size(); ++i)
            if (live[i]) layout.push_back(i);

        for (std::size_t n = 0; n < layout.size(); ++n) {
            const BasicBlock &b = f_.blocks[layout[n]];
            block_start_[b.label] = static_cast<std::uint32_t>(unit_.code.size());
            const std::string *next = n + 1 < layout.size() ? &f_.blocks[layout[n + 1]].label : nullptr;
            for (const auto &i : b.insts) instruction(i);
            terminator(b.term, next);
        }
        for (auto [pc, label] : fixups_) unit_.code[pc].index = block_start_.at(label);
        bc::verify(unit_);
        return std::move(unit_);
    }

private:
    void declare(const std::string &name, Type t) {
        if (slots_.emplace(name, unit_.locals).second) ++unit_.locals;
        types_[name] = t;
    }

    Type type_of(const Operand &o) const { return o.is_reg() ? types_.at(o.reg) : o.imm.type; }

    void emit(bc::Instr i) { unit_.code.push_back(i); }

    void load(const Operand &o) {
        bc::Instr i;
        if (o.is_reg()) {
            i.op = bc::Op::LdLoc;
            i.index = slots_.at(o.reg);
        } else {
            i.op = bc::Op::Push;
            i.width = o.imm.type;
            i.imm = o.imm.bits;
        }
        emit(i);
    }

    void store(const std::string &name) {
        bc::Instr i;
        i.op = bc::Op::StLoc;
        i.index = slots_.at(name);
        emit(i);
    }

    void instruction(const Instruction &i) {
        bc::Instr out;
        out.width = i.type;
        switch (i.op) {
        case Opcode::Const:
            load(i.operands[0]);
            store(i.dest);
            return;
        case Opcode::ICmp:
            load(i.operands[0]);
            load(i.operands[1]);
            out.op = bc::Op::Cmp;
            out.pred = i.pred;
            out.width = type_of(i.operands[0]);
            break;
        case Opcode::Select:
            for (const auto &o : i.operands) load(o);
            out.op = bc::Op::Sel;
            break;
        case Opcode::ZExt:
        case Opcode::SExt:
        case Opcode::Trunc:
            load(i.operands[0]);
            out.op = i.op == Opcode::ZExt ? bc::Op::ZExt : i.op == Opcode::SExt ? bc::Op::SExt : bc::Op::Trunc;
            out.width = type_of(i.operands[0]);
            out.to = i.type;
            break;
        case Opcode::Intrinsic: {
            if (i.intrinsic != "gm.divcheck") throw LoweringError("no lowering for intrinsic " + i.intrinsic);
            const Type t = type_of(i.operands[0]);
            load(i.operands[0]);
            load(Operand::make_imm(Value::of(t, 0)));
            out.op = bc::Op::Cmp;
            out.pred = Pred::Eq;
            out.width = t;
            break;
        }
        default:
            load(i.operands[0]);
            load(i.operands[1]);
            out.op = binary_op(i.op);
            break;
        }
        emit(out);
        store(i.dest);
    }

    // Arguments are all pushed before any parameter is stored, so the move is parallel.
    void pass_args(const BlockTarget &t) {
        const BasicBlock *dest = f_.find_block(t.label);
        if (!dest) throw LoweringError("unknown label " + t.label);
        for (const auto &a : t.args) load(a);
        for (std::size_t k = t.args.size(); k-- > 0;) store(dest->params[k].name);
    }

    void jump(const std::string &label) {
        fixups_.emplace_back(unit_.code.size(), label);
        bc::Instr j;
        j.op = bc::Op::Jmp;
        emit(j);
    }

    void terminator(const Terminator &t, const std::string *next) {
        switch (t.kind) {
        case TermKind::Ret: {
            load(t.operand);
            bc::Instr r;
            r.op = bc::Op::Ret;
            emit(r);
            return;
        }
        case TermKind::Trap: {
            bc::Instr r;
            r.op = bc::Op::Trap;
            emit(r);
            return;
        }
        case TermKind::Br:
            pass_args(t.target);
            if (!next || *next != t.target.label) jump(t.target.label);
            return;
        case TermKind::CondBr: {
            load(t.operand);
            if (t.else_target.args.empty()) {
                // jz straight to the false block; the true edge falls through or jumps.
                fixups_.emplace_back(unit_.code.size(), t.else_target.label);
                bc::Instr z;
                z.op = bc::Op::Jz;
                emit(z);
                pass_args(t.target);
                if (!next || *next != t.target.label) jump(t.target.label);
                return;
            }
            const std::size_t jz = unit_.code.size();
            bc::Instr z;
            z.op = bc::Op::Jz;
            emit(z);
            pass_args(t.target);
            jump(t.target.label);
            unit_.code[jz].index = static_cast<std::uint32_t>(unit_.code.size());
            pass_args(t.else_target);
            if (!next || *next != t.else_target.label) jump(t.else_target.label);
            return;
        }
        }
    }

    const Function &f_;
    bc::Unit unit_;
    std::unordered_map<std::string, std::uint32_t> slots_;
    std::unordered_map<std::string, Type> types_;
    std::unordered_map<std::string, std::uint32_t> block_start_;
    std::vector<std::pair<std::size_t, std::string>> fixups_;
};

} // namespace

bc::Unit lower_to_bytecode(const Function &f) {
    require_valid(f);
    return Lowerer(f).run();
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr))
        throw Error("sha256 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

std::string canonical_hash(const bc::Unit &u) { return sha256_hex(bc::disassemble(bc::canonicalize(u), false)); }

} // namespace nv::compiler

#include "nv/bytecode.hpp"

#include <deque>
#include <sstream>

namespace nv::bc {

namespace {

std::string_view base_name(Op op) {
    switch (op) {
    case Op::Push: return "push";
    case Op::LdLoc: return "ldloc";
    case Op::StLoc: return "stloc";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::SDiv: return "sdiv";
    case Op::UDiv: return "udiv";
    case Op::SRem: return "srem";
    case Op::URem: return "urem";
    case Op::And: return "and";
    case Op::Or: return "or";
    case Op::Xor: return "xor";
    case Op::Shl: return "shl";
    case Op::LShr: return "lshr";
    case Op::AShr: return "ashr";
    case Op::Cmp: return "cmp";
    case Op::Sel: return "sel";
    case Op::ZExt: return "zext";
    case Op::SExt: return "sext";
    case Op::Trunc: return "trunc";
    case Op::Jmp: return "jmp";
    case Op::Jz: return "jz";
    case Op::Ret: return "ret";
    case Op::Trap: return "trap";
    }
    return "?";
}

bool has_width(Op op) {
    switch (op) {
    case Op::Push: case Op::Add: case Op::Sub: case Op::Mul: case Op::SDiv: case Op::UDiv:
    case Op::SRem: case Op::URem: case Op::Shl: case Op::LShr: case Op::AShr:
        return true;
    default:
        return false;
    }
}

/// (pops, pushes)
std::pair<int, int> stack_effect(Op op) {
    switch (op) {
    case Op::Push: case Op::LdLoc: return {0, 1};
    case Op::StLoc: case Op::Jz: return {1, 0};
    case Op::Sel: return {3, 1};
    case Op::ZExt: case Op::SExt: case Op::Trunc: return {1, 1};
    case Op::Jmp: case Op::Trap: return {0, 0};
    case Op::Ret: return {1, 0};
    default: return {2, 1};
    }
}

} // namespace

std::string mnemonic(const Instr &i) {
    std::string out(base_name(i.op));
    if (i.op == Op::Cmp) {
        out += ".";
        out += mir::pred_name(i.pred);
        out += ".";
        out += mir::type_name(i.width);
    } else if (i.op == Op::ZExt || i.op == Op::SExt || i.op == Op::Trunc) {
        out += ".";
        out += mir::type_name(i.width);
        out += ".";
        out += mir::type_name(i.to);
    } else if (has_width(i.op)) {
        out += ".";
        out += mir::type_name(i.width);
    }
    return out;
}

std::string disassemble(const Unit &u, bool header) {
    std::ostringstream os;
    if (header) {
        os << "# " << u.name << " (";
        for (std::size_t i = 0; i < u.params.size(); ++i) os << (i ? ", " : "") << mir::type_name(u.params[i]);
        os << ") -> " << mir::type_name(u.ret) << ", " << u.locals << " locals\n";
    }
    for (const auto &i : u.code) {
        os << mnemonic(i);
        switch (i.op) {
        case Op::Push: os << " " << mir::to_string(mir::Value::of(i.width, i.imm)); break;
        case Op::LdLoc: case Op::StLoc: case Op::Jmp: case Op::Jz: os << " " << i.index; break;
        default: break;
        }
        os << "\n";
    }
    return os.str();
}

void verify(const Unit &u) {
    auto fail = [&](std::size_t pc, const std::string &msg) {
        throw MalformedBytecode(u.name + " @" + std::to_string(pc) + ": " + msg);
    };
    if (u.code.empty()) fail(0, "empty unit");
    if (u.params.size() > u.locals) fail(0, "fewer locals than parameters");
    std::vector<int> depth(u.code.size(), -1);
    std::deque<std::size_t> work{0};
    depth[0] = 0;
    auto flow = [&](std::size_t pc, std::size_t to, int d) {
        if (to >= u.code.size()) fail(pc, "control flows past end of code");
        if (depth[to] < 0) {
            depth[to] = d;
            work.push_back(to);
        } else if (depth[to] != d) {
            fail(to, "stack depth mismatch at join (" + std::to_string(depth[to]) + " vs " + std::to_string(d) + ")");
        }
    };
    while (!work.empty()) {
        const std::size_t pc = work.front();
        work.pop_front();
        const Instr &i = u.code[pc];
        const auto [pops, pushes] = stack_effect(i.op);
        const int d = depth[pc];
        if (d < pops) fail(pc, "stack underflow");
        const int after = d - pops + pushes;
        if ((i.op == Op::LdLoc || i.op == Op::StLoc) && i.index >= u.locals) fail(pc, "local index out of range");
        switch (i.op) {
        case Op::Ret:
            if (d != 1) fail(pc, "ret with stack depth " + std::to_string(d));
            break;
        case Op::Trap:
            break;
        case Op::Jmp:
            if (i.index >= u.code.size()) fail(pc, "jump target out of range");
            flow(pc, i.index, after);
            break;
        case Op::Jz:
            if (i.index >= u.code.size()) fail(pc, "jump target out of range");
            flow(pc, i.index, after);
            flow(pc, pc + 1, after);
            break;
        default:
            flow(pc, pc + 1, after);
            break;
        }
    }
}

Unit canonicalize(const Unit &u) {
    Unit out = u;
    const auto nparams = static_cast<std::uint32_t>(u.params.size());
    std::vector<std::uint32_t> remap(u.locals, UINT32_MAX);
    for (std::uint32_t p = 0; p < nparams; ++p) remap[p] = p;
    std::uint32_t next = nparams;
    for (auto &i : out.code) {
        if (i.op != Op::LdLoc && i.op != Op::StLoc) continue;
        if (remap[i.index] == UINT32_MAX) remap[i.index] = next++;
        i.index = remap[i.index];
    }
    out.locals = next;
    return out;
}

} // namespace nv::bc

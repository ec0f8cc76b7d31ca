#pragma once

// Stack-machine bytecode: the "machine code" produced by the back-end.
//
// Values on the operand stack are raw 64-bit patterns, always kept masked to
// the width of the operation that produced them. Jump operands are absolute
// instruction indices.

#include "nv/mir.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace nv::bc {

enum class Op : std::uint8_t {
    Push, LdLoc, StLoc,
    Add, Sub, Mul, SDiv, UDiv, SRem, URem,
    And, Or, Xor,
    Shl, LShr, AShr,
    Cmp, Sel,
    ZExt, SExt, Trunc,
    Jmp, Jz, Ret, Trap,
};

struct Instr {
    Op op = Op::Trap;
    mir::Type width = mir::Type::I32;  // operand width (source width for casts)
    mir::Type to = mir::Type::I32;     // cast target width
    mir::Pred pred = mir::Pred::Eq;
    std::uint64_t imm = 0;             // push
    std::uint32_t index = 0;           // local slot or jump target

    bool operator==(const Instr &) const = default;
};

struct Unit {
    std::string name;
    std::vector<mir::Type> params;
    mir::Type ret = mir::Type::I32;
    std::uint32_t locals = 0; // includes params, which occupy slots 0..n-1
    std::vector<Instr> code;

    bool operator==(const Unit &) const = default;
};

/// Opcode text without numeric operands, e.g. "add.i16", "cmp.slt.i8", "ldloc".
std::string mnemonic(const Instr &i);

/// One instruction per line. `header` prepends a `#` comment naming the unit.
std::string disassemble(const Unit &u, bool header = true);

/// Checks jump ranges, local indices and that the operand stack balances on
/// every path. Throws MalformedBytecode.
void verify(const Unit &u);

/// Renumbers non-parameter locals in first-use order.
Unit canonicalize(const Unit &u);

} // namespace nv::bc

#pragma once

// MIR: a small, pure, call-free SSA intermediate representation.
//
// Values are signless two's-complement integers of width 1, 8, 16, 32 or 64.
// Every function is a list of basic blocks; the first block is the entry.
// Loop-carried values flow through typed block parameters (there is no phi),
// and `br`/`condbr` pass arguments to them.

#include "nv/error.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nv::mir {

enum class Type : std::uint8_t { I1 = 1, I8 = 8, I16 = 16, I32 = 32, I64 = 64 };

constexpr unsigned bit_width(Type t) noexcept { return static_cast<unsigned>(t); }

constexpr std::uint64_t type_mask(Type t) noexcept {
    return bit_width(t) == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << bit_width(t)) - 1);
}

std::string_view type_name(Type t) noexcept;
std::optional<Type> parse_type(std::string_view name) noexcept;

/// A typed integer; `bits` always holds the value masked to the type width.
struct Value {
    Type type = Type::I32;
    std::uint64_t bits = 0;

    static Value of(Type t, std::uint64_t raw) noexcept { return {t, raw & type_mask(t)}; }
    static Value of_signed(Type t, std::int64_t v) noexcept {
        return of(t, static_cast<std::uint64_t>(v));
    }

    std::int64_t as_signed() const noexcept;
    std::uint64_t as_unsigned() const noexcept { return bits; }

    bool operator==(const Value &) const = default;
};

/// Canonical decimal rendering: signed for widths > 1, 0/1 for i1.
std::string to_string(const Value &v);

enum class Opcode : std::uint8_t {
    Const,
    Add, Sub, Mul,
    SDiv, UDiv, SRem, URem,
    And, Or, Xor,
    Shl, LShr, AShr,
    ICmp,
    Select,
    ZExt, SExt, Trunc,
    Intrinsic,
};

enum class Pred : std::uint8_t { Eq, Ne, Slt, Sle, Sgt, Sge, Ult, Ule, Ugt, Uge };

std::string_view opcode_name(Opcode op) noexcept;
std::string_view pred_name(Pred p) noexcept;
std::optional<Pred> parse_pred(std::string_view name) noexcept;

bool is_binary(Opcode op) noexcept;
bool is_commutative(Opcode op) noexcept;
bool is_division(Opcode op) noexcept;
bool is_shift(Opcode op) noexcept;

struct Operand {
    enum class Kind : std::uint8_t { Reg, Imm };

    Kind kind = Kind::Imm;
    std::string reg;  // without the leading '%'
    Value imm;

    static Operand make_reg(std::string name) { return {Kind::Reg, std::move(name), {}}; }
    static Operand make_imm(Value v) { return {Kind::Imm, {}, v}; }

    bool is_reg() const noexcept { return kind == Kind::Reg; }
    bool is_imm() const noexcept { return kind == Kind::Imm; }

    bool operator==(const Operand &) const = default;
};

struct Instruction {
    std::string dest;
    Opcode op = Opcode::Const;
    Type type = Type::I32;     // result type
    Pred pred = Pred::Eq;      // icmp only
    std::string intrinsic;     // intrinsic only
    std::vector<Operand> operands;

    bool operator==(const Instruction &) const = default;
};

struct BlockTarget {
    std::string label;
    std::vector<Operand> args;

    bool operator==(const BlockTarget &) const = default;
};

enum class TermKind : std::uint8_t { Br, CondBr, Ret, Trap };

struct Terminator {
    TermKind kind = TermKind::Trap;
    Operand operand;          // ret value, or condbr condition
    BlockTarget target;       // br target, condbr true target
    BlockTarget else_target;  // condbr false target

    bool operator==(const Terminator &) const = default;
};

struct TypedName {
    std::string name;
    Type type = Type::I32;

    bool operator==(const TypedName &) const = default;
};

struct BasicBlock {
    std::string label;
    std::vector<TypedName> params;
    std::vector<Instruction> insts;
    Terminator term;

    bool operator==(const BasicBlock &) const = default;
};

enum class DialectTag : std::uint8_t { Raw, Cm, Gm };

std::string_view dialect_tag_name(DialectTag d) noexcept;

struct Function {
    std::string name;  // without the leading '@'
    std::vector<TypedName> params;
    Type ret = Type::I32;
    std::vector<BasicBlock> blocks;
    DialectTag dialect = DialectTag::Raw;

    const BasicBlock *find_block(std::string_view label) const noexcept;
    std::size_t instruction_count() const noexcept;

    bool operator==(const Function &) const = default;
};

/// Parameter types plus return type; names are irrelevant for compatibility.
struct Signature {
    std::vector<Type> params;
    Type ret = Type::I32;

    bool operator==(const Signature &) const = default;
};

Signature signature_of(const Function &f);
std::string to_string(const Signature &s);

/// Registered dialect intrinsics. An inert intrinsic has no semantic effect
/// and may be stripped when variants are normalized.
struct IntrinsicInfo {
    std::string_view name;
    unsigned arity;
    bool inert;
};

const IntrinsicInfo *find_intrinsic(std::string_view name) noexcept;
const std::vector<IntrinsicInfo> &registered_intrinsics() noexcept;

inline constexpr std::size_t kMaxInstructions = 1000;

Function parse_mir(std::string_view text);
std::string print_mir(const Function &f);
std::vector<Diagnostic> validate_function(const Function &f);

/// Throws ValidationError when validate_function reports anything.
void require_valid(const Function &f);

/// Blocks reachable from entry, in reverse post-order (indices into f.blocks).
std::vector<std::size_t> reverse_post_order(const Function &f);

} // namespace nv::mir

#pragma once

// Reference integer semantics of MIR operations. Shared by the MIR evaluator
// and the constant folder; the bytecode VM carries its own implementation.

#include "nv/mir.hpp"

#include <cstdint>
#include <string_view>

namespace nv {

enum class TrapReason : std::uint8_t {
    DivZero,
    OverflowDiv,
    ShiftRange,
    ExplicitTrap,
    NVersionDivergence,
    FuelExhausted,
};

std::string_view trap_reason_name(TrapReason r) noexcept;

namespace sem {

struct ArithResult {
    bool ok = true;
    std::uint64_t bits = 0;
    TrapReason reason = TrapReason::ExplicitTrap;
};

constexpr std::int64_t sign_extend(std::uint64_t bits, unsigned width) noexcept {
    if (width >= 64) return static_cast<std::int64_t>(bits);
    const std::uint64_t sign = std::uint64_t{1} << (width - 1);
    bits &= (std::uint64_t{1} << width) - 1;
    return static_cast<std::int64_t>((bits ^ sign) - sign);
}

/// Wrapping add/sub/mul; sdiv/srem trap on zero divisor and on MIN / -1;
/// udiv/urem trap on zero; shifts trap when the unsigned amount >= width.
ArithResult binary(mir::Opcode op, mir::Type t, std::uint64_t a, std::uint64_t b) noexcept;

bool icmp(mir::Pred p, mir::Type t, std::uint64_t a, std::uint64_t b) noexcept;

std::uint64_t cast(mir::Opcode op, mir::Type from, mir::Type to, std::uint64_t a) noexcept;

} // namespace sem
} // namespace nv

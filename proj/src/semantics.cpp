#include "nv/semantics.hpp"

#include <limits>

namespace nv {

std::string_view trap_reason_name(TrapReason r) noexcept {
    switch (r) {
    case TrapReason::DivZero: return "div_zero";
    case TrapReason::OverflowDiv: return "overflow_div";
    case TrapReason::ShiftRange: return "shift_range";
    case TrapReason::ExplicitTrap: return "explicit_trap";
    case TrapReason::NVersionDivergence: return "nversion_divergence";
    case TrapReason::FuelExhausted: return "fuel_exhausted";
    }
    return "unknown";
}

namespace sem {

using mir::Opcode;
using mir::Pred;
using mir::Type;

namespace {

ArithResult trap(TrapReason r) { return {false, 0, r}; }

ArithResult value(Type t, std::uint64_t bits) { return {true, bits & mir::type_mask(t), TrapReason::ExplicitTrap}; }

} // namespace

ArithResult binary(Opcode op, Type t, std::uint64_t a, std::uint64_t b) noexcept {
    const unsigned w = mir::bit_width(t);
    const std::uint64_t mask = mir::type_mask(t);
    a &= mask;
    b &= mask;
    switch (op) {
    case Opcode::Add: return value(t, a + b);
    case Opcode::Sub: return value(t, a - b);
    case Opcode::Mul: return value(t, a * b);
    case Opcode::And: return value(t, a & b);
    case Opcode::Or: return value(t, a | b);
    case Opcode::Xor: return value(t, a ^ b);
    case Opcode::UDiv:
        if (b == 0) return trap(TrapReason::DivZero);
        return value(t, a / b);
    case Opcode::URem:
        if (b == 0) return trap(TrapReason::DivZero);
        return value(t, a % b);
    case Opcode::SDiv:
    case Opcode::SRem: {
        if (b == 0) return trap(TrapReason::DivZero);
        const std::int64_t sa = sign_extend(a, w);
        const std::int64_t sb = sign_extend(b, w);
        const std::int64_t min = w == 64 ? std::numeric_limits<std::int64_t>::min()
                                         : -(std::int64_t{1} << (w - 1));
        if (sa == min && sb == -1) return trap(TrapReason::OverflowDiv);
        const std::int64_t r = op == Opcode::SDiv ? sa / sb : sa % sb;
        return value(t, static_cast<std::uint64_t>(r));
    }
    case Opcode::Shl:
        if (b >= w) return trap(TrapReason::ShiftRange);
        return value(t, a << b);
    case Opcode::LShr:
        if (b >= w) return trap(TrapReason::ShiftRange);
        return value(t, a >> b);
    case Opcode::AShr:
        if (b >= w) return trap(TrapReason::ShiftRange);
        return value(t, static_cast<std::uint64_t>(sign_extend(a, w) >> b));
    default:
        return trap(TrapReason::ExplicitTrap);
    }
}

bool icmp(Pred p, Type t, std::uint64_t a, std::uint64_t b) noexcept {
    const unsigned w = mir::bit_width(t);
    a &= mir::type_mask(t);
    b &= mir::type_mask(t);
    const std::int64_t sa = sign_extend(a, w);
    const std::int64_t sb = sign_extend(b, w);
    switch (p) {
    case Pred::Eq: return a == b;
    case Pred::Ne: return a != b;
    case Pred::Slt: return sa < sb;
    case Pred::Sle: return sa <= sb;
    case Pred::Sgt: return sa > sb;
    case Pred::Sge: return sa >= sb;
    case Pred::Ult: return a < b;
    case Pred::Ule: return a <= b;
    case Pred::Ugt: return a > b;
    case Pred::Uge: return a >= b;
    }
    return false;
}

std::uint64_t cast(Opcode op, Type from, Type to, std::uint64_t a) noexcept {
    a &= mir::type_mask(from);
    if (op == Opcode::SExt) return static_cast<std::uint64_t>(sign_extend(a, mir::bit_width(from))) & mir::type_mask(to);
    return a & mir::type_mask(to); // zext and trunc
}

} // namespace sem
} // namespace nv

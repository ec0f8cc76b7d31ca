#pragma once

#include "nv/frontend.hpp"

#include <string>

namespace nv::frontend::detail {

struct TypeFault {
    std::string message;
    int line = 0;
    int column = 0;
};

/// Resolves names to slots, assigns expression types, checks literal ranges
/// and definite return. Throws TypeFault.
void check(SourceAst &ast, Dialect d);

/// Literal-only arithmetic whose type is taken from context.
bool is_untyped_const(const Expr &e);

/// Binary operator precedence (higher binds tighter); the ternary is 0 in Cm.
int precedence(BinOp op, Dialect d);

std::optional<SrcType> parse_type_name(std::string_view name, Dialect d);

/// Literal value as a bit pattern of `t`.
std::uint64_t literal_bits(const Expr &e, SrcType t);

} // namespace nv::frontend::detail

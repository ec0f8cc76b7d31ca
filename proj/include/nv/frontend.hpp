#pragma once

// Source dialects Cm (C-like) and Gm (Go-like): parsing, type checking,
// lowering to MIR, and printing an AST back as source in either dialect.

#include "nv/mir.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nv::frontend {

enum class Dialect : std::uint8_t { Cm, Gm };

std::string_view dialect_name(Dialect d) noexcept;       // "cm" / "gm"
std::string_view language_name(Dialect d) noexcept;      // "Cm" / "Gm"
std::string_view file_extension(Dialect d) noexcept;     // ".cm" / ".gm"
std::optional<Dialect> parse_dialect(std::string_view s) noexcept;
mir::DialectTag dialect_tag(Dialect d) noexcept;

struct SrcType {
    mir::Type width = mir::Type::I32;
    bool is_signed = true;

    bool is_bool() const noexcept { return width == mir::Type::I1; }
    bool operator==(const SrcType &) const = default;

    static SrcType boolean() { return {mir::Type::I1, false}; }
};

/// "bool", "int8", ..., "uint64".
std::string type_name(SrcType t);

enum class ExprKind : std::uint8_t { Literal, Var, Unary, Binary, Ternary, Cast };
enum class UnOp : std::uint8_t { Neg, BitNot, LogNot };
enum class BinOp : std::uint8_t {
    Add, Sub, Mul, Div, Rem,
    And, Or, Xor, Shl, Shr,
    Eq, Ne, Lt, Le, Gt, Ge,
    LogAnd, LogOr,
};

std::string_view binop_symbol(BinOp op) noexcept;
bool is_comparison(BinOp op) noexcept;
bool is_logical(BinOp op) noexcept;

struct Expr {
    ExprKind kind = ExprKind::Literal;
    SrcType type;                 // filled by the checker (cast target for Cast)
    bool typed = false;           // literal carries an explicit/contextual type
    bool negative = false;        // literal sign
    std::uint64_t magnitude = 0;  // literal magnitude
    std::string name;             // variable
    int slot = -1;                // variable index, filled by the checker
    UnOp uop = UnOp::Neg;
    BinOp bop = BinOp::Add;
    std::vector<Expr> kids;
    int line = 0, column = 0;

    bool operator==(const Expr &) const = default;
};

enum class StmtKind : std::uint8_t { Decl, Assign, If, While, Return, Block };

struct Stmt {
    StmtKind kind = StmtKind::Block;
    std::string name;             // Decl / Assign target
    int slot = -1;
    SrcType type;                 // Decl
    bool inferred = false;        // Decl written as `x := e`
    std::vector<Expr> exprs;      // Decl init (optional), Assign value, If/While cond, Return value
    std::vector<Stmt> body;       // If then / While body / Block contents
    std::vector<Stmt> else_body;  // If else
    bool has_else = false;
    int line = 0, column = 0;

    bool operator==(const Stmt &) const = default;
};

struct Param {
    std::string name;
    SrcType type;

    bool operator==(const Param &) const = default;
};

struct Variable {
    std::string name;
    SrcType type;

    bool operator==(const Variable &) const = default;
};

struct SourceAst {
    std::string name;
    std::vector<Param> params;
    SrcType ret;
    std::vector<Stmt> body;
    std::vector<Variable> vars;   // params first, then locals in declaration order

    bool operator==(const SourceAst &) const = default;
};

/// Syntax plus type checking. Throws ParseError, or DialectError for a
/// construct that belongs to the other dialect.
SourceAst parse_source(std::string_view text, Dialect d);

/// Throws LoweringError if the AST does not type-check.
mir::Function lower_ast(const SourceAst &ast, Dialect d);

mir::Function compile_source(std::string_view text, Dialect d);

/// Renders the AST in `d`. Cm-only constructs are restated for Gm (conditional
/// expressions become if/else on a temporary, integer conditions become `!= 0`).
std::string print_source(const SourceAst &ast, Dialect d);

/// Lexes just far enough to find the defined function's name; empty if none.
std::string defined_name(std::string_view text, Dialect d);

} // namespace nv::frontend

#pragma once

// Middle-end (optimization levels 0-3, optionally with one injected buggy
// pass) and back-end (MIR -> stack bytecode, canonical hashing).

#include "nv/bytecode.hpp"
#include "nv/mir.hpp"

#include <optional>
#include <string>
#include <string_view>

namespace nv::compiler {

/// B1: level >= 1, constant folding of sdiv/srem with a negative dividend
///     rounds toward negative infinity.
/// B2: level >= 2, mul by 3 is rewritten to shl by 1.
/// B3: level 3, branch folding treats condbr on an icmp fed by a trunc as
///     always false.
enum class BugId { B1, B2, B3 };

std::string_view bug_name(BugId b) noexcept;
std::optional<BugId> parse_bug(std::string_view s) noexcept;
int activation_level(BugId b) noexcept;

inline constexpr int kMaxLevel = 3;

/// Runs the pass list for `level` (0 runs nothing). Throws ConfigError for a
/// level outside 0..3. Never emits diagnostics, with or without injection.
mir::Function optimize(const mir::Function &f, int level, std::optional<BugId> inject = std::nullopt);

/// Throws LoweringError only on an internal invariant breach.
bc::Unit lower_to_bytecode(const mir::Function &f);

std::string sha256_hex(std::string_view data);

/// SHA-256 of the header-less disassembly of canonicalize(u).
std::string canonical_hash(const bc::Unit &u);

} // namespace nv::compiler

#pragma once

// Equivalence by exhaustive outcome comparison over the whole input domain.
// Outcomes agree when both return the same bits or both trap (any reasons).

#include "nv/exec.hpp"
#include "nv/mir.hpp"

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace nv::equiv {

struct Budget {
    std::uint64_t max_enumeration = std::uint64_t{1} << 20;
    std::uint64_t per_input_fuel = exec::kDefaultFuel;
    std::optional<std::uint64_t> wall_limit_ms;
    unsigned threads = 0;  // 0: one per hardware thread
};

enum class VerdictKind { Equivalent, NotEquivalent, Unknown };

std::string_view verdict_kind_name(VerdictKind k) noexcept;

struct Verdict {
    VerdictKind kind = VerdictKind::Unknown;
    std::vector<mir::Value> input;  // NotEquivalent only
    exec::Outcome reference;        // outcome of the first function
    exec::Outcome variant;          // outcome of the second function
    std::string reason;             // Unknown only: domain_too_large, wall_limit, sampled

    bool equivalent() const noexcept { return kind == VerdictKind::Equivalent; }
};

/// Number of input tuples, or nullopt when it exceeds 2^63.
std::optional<std::uint64_t> domain_size(const std::vector<mir::Type> &params);

/// The `index`-th tuple in lexicographic unsigned order (first parameter most significant).
std::vector<std::uint64_t> decode_input(std::uint64_t index, const std::vector<mir::Type> &params);

/// Throws SignatureMismatch when parameter or return types differ.
Verdict check_equivalence(const mir::Function &f, const mir::Function &g, const Budget &budget = {});

/// Never reports Equivalent: NotEquivalent on the first mismatch, else Unknown("sampled").
Verdict sample_differential(const mir::Function &f, const mir::Function &g, std::uint64_t samples,
                            std::uint64_t seed, std::uint64_t fuel = exec::kDefaultFuel);

/// Counterexample text: one assignment per parameter, then "Source value" and "Target value".
std::string render(const Verdict &v, const mir::Function &reference);

nlohmann::json verdict_to_json(const Verdict &v);

} // namespace nv::equiv

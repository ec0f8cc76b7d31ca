#pragma once

// Diversity measurement: hash-based static uniqueness per optimization level,
// and executed-opcode profiles compared by Jaccard similarity.

#include "nv/exec.hpp"
#include "nv/mir.hpp"

#include "json.hpp"

#include <set>
#include <string>
#include <vector>

namespace nv::metrics {

/// A variant is unique in a column when its artifact differs from the
/// reference's and from every other variant's.
struct UniquenessRow {
    std::string function;
    int total = 0;
    int unique_ir = 0;
    std::vector<int> unique_at_level;  // indexed like `levels`
    std::vector<int> levels;

    // Per-variant classification, same order as the input variants.
    std::vector<bool> variant_unique_ir;
    std::vector<std::vector<bool>> variant_unique_at_level;
    std::vector<std::vector<std::string>> variant_hashes;  // [variant][level]
    std::vector<std::string> reference_hashes;             // [level]
};

/// The IR column compares print_mir texts of the normalized functions with the
/// name blanked; level columns compare canonical_hash of the optimized bytecode.
/// Duplicated artifacts count once (the lowest-index variant is the unique one).
UniquenessRow static_uniqueness(const mir::Function &reference, const std::vector<mir::Function> &variants,
                                const std::vector<int> &levels = {0, 1, 2, 3});

/// {"comparison": ..., "levels": [...], "functions": [rows], "totals": {...}}
nlohmann::json uniqueness_to_json(const std::vector<UniquenessRow> &rows);

/// |a ∩ b| / |a ∪ b|; two empty sets give 1.0.
double jaccard(const std::set<std::string> &a, const std::set<std::string> &b);

struct FunctionProfile {
    std::string label;
    exec::TraceProfile profile;
    std::uint64_t total = 0;
    double jaccard_vs_reference = 1.0;

    std::set<std::string> opcodes() const;
};

struct DynamicReport {
    FunctionProfile reference;
    std::vector<FunctionProfile> variants;

    /// (series, opcode, count) with one row per function per opcode observed anywhere in the report.
    struct Row {
        std::string series;
        std::string opcode;
        std::uint64_t count;
    };
    std::vector<Row> rows() const;
};

/// Runs the level-0 bytecode of each function with tracing on every input and sums the profiles.
DynamicReport dynamic_report(const mir::Function &reference, const std::vector<mir::Function> &variants,
                             const std::vector<std::string> &labels,
                             const std::vector<std::vector<mir::Value>> &inputs,
                             std::uint64_t fuel = exec::kDefaultFuel);

/// "series,opcode,count" header plus rows().
std::string dynamic_csv(const DynamicReport &r);
nlohmann::json dynamic_to_json(const DynamicReport &r);

} // namespace nv::metrics

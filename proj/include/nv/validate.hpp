#pragma once

// Validation funnel: compile in isolation, compile in project, test suite,
// equivalence. A variant stops at its first failing filter.

#include "nv/diversify.hpp"
#include "nv/equiv.hpp"
#include "nv/project.hpp"

#include "json.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace nv::validate {

enum class Filter { CompileIsolation, CompileProject, Tests, Equivalence };

std::string_view filter_name(Filter f) noexcept;

struct FilterResult {
    Filter filter = Filter::CompileIsolation;
    bool passed = false;
    std::string reason;
};

struct Compiled {
    FilterResult result;
    std::optional<mir::Function> function;
};

Compiled filter_compile_isolation(const diversify::VariantSource &v);
FilterResult filter_compile_in_project(const mir::Function &f, const project::Project &p);
FilterResult filter_tests(const mir::Function &f, const project::TestSuite &suite);
FilterResult filter_equivalence(const mir::Function &reference, const mir::Function &variant, const equiv::Budget &budget);

struct VariantRecord {
    diversify::VariantSource source;
    std::vector<FilterResult> filters;    // a prefix of the four filters
    std::optional<mir::Function> function; // lowered form, once isolation passed

    bool passed_all() const noexcept { return filters.size() == 4 && filters.back().passed; }
};

struct Funnel {
    int isolation = 0, project = 0, tests = 0, equivalence = 0;

    bool operator==(const Funnel &) const = default;
};

struct ValidationReport {
    std::string function;
    nlohmann::json config = nlohmann::json::object();
    std::vector<VariantRecord> variants;
    Funnel funnel;

    /// Validated variants in index order.
    std::vector<const VariantRecord *> passed() const;
};

ValidationReport run_validation(const project::Project &p, const std::vector<diversify::VariantSource> &batch);

/// batch.json: {"function","config","variants":[{"index","filters":[{"name","passed","reason"}], ...}],"funnel"}
nlohmann::json report_to_json(const ValidationReport &r, const diversify::Batch *batch = nullptr);

/// Rewrites `<dir>/batch.json` with the report merged in.
void save_report(const std::filesystem::path &dir, const ValidationReport &r, const diversify::Batch &batch);

/// Reads filter records back from a saved batch.json; variant index -> passed all filters.
std::map<int, bool> load_verdicts(const std::filesystem::path &dir);

} // namespace nv::validate

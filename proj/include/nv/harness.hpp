#pragma once

// Harnessing: variant normalization, N-of-N wrapper synthesis, version
// renaming, call-site redirection, bundle lowering and execution.

#include "nv/compiler.hpp"
#include "nv/exec.hpp"
#include "nv/mir.hpp"
#include "nv/project.hpp"
#include "nv/validate.hpp"

#include "json.hpp"

#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace nv::harness {

class EmptyVariantList : public Error {
public:
    using Error::Error;
};

class UnvalidatedVariant : public Error {
public:
    using Error::Error;
};

/// Strips the dialect tag, renames parameters to %a0.., drops inert
/// intrinsics and replaces gm.divcheck guards by the division's own trap.
mir::Function normalize_variant(const mir::Function &f);

/// `<target>__v<k>`
std::string version_name(const std::string &target, std::size_t k);

/// The N-of-N driver: run v1..vN in order, first trap wins, then v1 is
/// compared with each later version.
struct Wrapper {
    std::string name;
    std::vector<mir::TypedName> params;
    mir::Type ret = mir::Type::I32;
    std::size_t versions = 0;

    std::size_t comparison_sites() const noexcept { return versions ? versions - 1 : 0; }
    bool operator==(const Wrapper &) const = default;
};

/// Bundle-only grammar: `callv <k>` per version, `check <k>` per comparison, `ret v1`.
std::string print_wrapper(const Wrapper &w);
Wrapper parse_wrapper(std::string_view text);  // ParseError

struct Candidate {
    mir::Function function;
    bool validated = false;
    std::string provenance;
};

struct Bundle {
    std::string target;
    std::vector<mir::Function> versions;  // normalized and renamed; v1 is the reference
    std::vector<std::string> provenance;
    Wrapper wrapper;
    std::map<std::string, mir::Function> functions;  // project functions with the target replaced by its versions
    std::vector<project::CallSite> call_sites;       // every call to the target now reaches the wrapper

    std::size_t size() const noexcept { return versions.size(); }
};

/// Throws EmptyVariantList when no variant is given, UnvalidatedVariant when one lacks a passing record.
Bundle assemble_nversion(const project::Project &p, const mir::Function &reference,
                         const std::vector<Candidate> &variants);

/// Uses the validated variants of `r` in index order, at most `max_versions - 1` of them.
Bundle assemble_from_report(const project::Project &p, const validate::ValidationReport &r,
                            std::size_t max_versions = SIZE_MAX);

struct BuildConfig {
    int level = 0;
    std::optional<compiler::BugId> inject;
    std::set<std::size_t> inject_into;  // 1-based version indices

    bool operator==(const BuildConfig &) const = default;
};

nlohmann::json build_to_json(const BuildConfig &b);
BuildConfig build_from_json(const nlohmann::json &j);  // ConfigError

struct LoweredBundle {
    Wrapper wrapper;
    std::vector<exec::Vm> versions;
    std::vector<mir::Type> params;
    BuildConfig build;
};

LoweredBundle lower_bundle(const Bundle &b, const BuildConfig &build);

struct WrapperRun {
    exec::Outcome outcome;
    std::vector<exec::Outcome> versions;  // outcomes of the versions that ran
    std::string detail;                   // set on divergence or trap
};

WrapperRun run_wrapper(const LoweredBundle &b, std::span<const mir::Value> args,
                       std::uint64_t fuel = exec::kDefaultFuel);

/// `<dir>/v<k>.mir`, `wrapper.mir`, `bundle.json`.
void write_bundle(const std::filesystem::path &dir, const Bundle &b, const BuildConfig &build,
                  const std::string &validation_digest);

struct LoadedBundle {
    Bundle bundle;
    BuildConfig build;
};

LoadedBundle load_bundle(const std::filesystem::path &dir);

} // namespace nv::harness

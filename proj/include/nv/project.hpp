#pragma once

// Workspace plumbing: the nv.json manifest, loaded projects, and frozen test suites.

#include "nv/equiv.hpp"
#include "nv/exec.hpp"
#include "nv/frontend.hpp"
#include "nv/mir.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace nv::project {

namespace fs = std::filesystem;

struct TestCase {
    std::vector<mir::Value> args;
    exec::Outcome expected;
};

struct TestSuite {
    std::string function;
    std::vector<mir::Type> params;
    mir::Type ret = mir::Type::I32;
    std::uint64_t fuel = 100'000;  // per case
    std::uint64_t seed = 0;
    std::vector<TestCase> cases;

    /// Total fuel the whole suite may consume: 10x the sum of per-case fuel.
    std::uint64_t timeout() const noexcept { return 10 * fuel * cases.size(); }
};

/// 16 boundary tuples then 16 seeded-random tuples, expectations from eval_mir on `reference`.
TestSuite generate_suite(const mir::Function &reference, std::uint64_t seed, std::uint64_t fuel = 100'000);

nlohmann::json suite_to_json(const TestSuite &s);
TestSuite suite_from_json(const nlohmann::json &j);  // ConfigError
TestSuite load_suite(const fs::path &file);
void save_suite(const TestSuite &s, const fs::path &file);

struct SourceFile {
    fs::path path;  // relative to the project root
    frontend::Dialect dialect = frontend::Dialect::Cm;
};

struct CallSite {
    std::string context;
    std::string callee;

    bool operator==(const CallSite &) const = default;
};

struct Manifest {
    fs::path root;
    std::string project;
    std::vector<SourceFile> sources;
    std::string target;
    fs::path test_suite;
    nlohmann::json provider = nlohmann::json::object();
    equiv::Budget budget;
    std::vector<CallSite> call_sites;
    std::optional<SourceFile> pair;  // hand-written other-dialect twin of the target, not a project source
    nlohmann::json demo;             // witness projects only
};

/// Reads `<dir>/nv.json` (or the file itself). Throws ConfigError.
Manifest load_manifest(const fs::path &dir_or_file);

std::string read_file(const fs::path &p);
void write_file(const fs::path &p, std::string_view text);

struct Project {
    Manifest manifest;
    std::map<std::string, mir::Function> functions;
    std::map<std::string, std::string> function_sources;  // name -> source text
    std::map<std::string, frontend::Dialect> function_dialects;
    std::string target;
    std::vector<CallSite> call_sites;
    TestSuite suite;

    const mir::Function &reference() const { return functions.at(target); }
    const std::string &reference_source() const { return function_sources.at(target); }
    frontend::Dialect reference_dialect() const { return function_dialects.at(target); }
};

/// Compiles every source, checks manifest invariants, loads the suite. Throws ConfigError.
Project load_project(const fs::path &dir_or_file);

/// Builds a project in memory from one reference source (no files involved).
Project single_function_project(const std::string &source, frontend::Dialect d, const TestSuite &suite,
                                const equiv::Budget &budget = {});

equiv::Budget budget_from_json(const nlohmann::json &j);
nlohmann::json budget_to_json(const equiv::Budget &b);

} // namespace nv::project

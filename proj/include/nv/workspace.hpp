#pragma once

// File-backed pipeline steps over a project directory, and the end-to-end
// mitigation demonstration on the bundled witness projects.

#include "nv/compiler.hpp"
#include "nv/diversify.hpp"
#include "nv/harness.hpp"
#include "nv/metrics.hpp"
#include "nv/project.hpp"
#include "nv/validate.hpp"

#include "json.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace nv::workspace {

namespace fs = std::filesystem;

fs::path variants_dir(const project::Project &p);  // <root>/variants/<target>
fs::path bundle_dir(const project::Project &p);    // <root>/bundle/<target>
fs::path reports_dir(const project::Project &p);   // <root>/reports

/// The manifest's provider block with the reference dialect as input dialect.
diversify::ProviderConfig provider_config(const project::Project &p);

diversify::Batch run_diversify(const project::Project &p, const diversify::ProviderConfig &cfg);

/// Validates the saved batch and rewrites its batch.json.
validate::ValidationReport run_validate(const project::Project &p);

/// Variants whose saved record passed all four filters, recompiled, in index order.
std::vector<harness::Candidate> validated_candidates(const project::Project &p);

harness::Bundle run_harness(const project::Project &p, const harness::BuildConfig &build,
                            std::size_t max_versions = SIZE_MAX);

/// Writes reports/uniqueness.json. Includes a row for the hand-written pair when the manifest has one.
std::vector<metrics::UniquenessRow> run_static_metrics(const project::Project &p);

/// Writes reports/dynamic.csv and reports/dynamic.json over the suite inputs.
metrics::DynamicReport run_dynamic_metrics(const project::Project &p);

/// The pair source compiled, if the manifest names one.
std::optional<mir::Function> pair_function(const project::Project &p);

fs::path default_fixtures_dir();

struct MitigationResult {
    std::optional<compiler::BugId> bug;
    std::string witness;
    std::vector<mir::Value> input;
    exec::Outcome expected;   // level-0 reference
    exec::Outcome baseline;   // single version compiled with the bug
    exec::Outcome hardened;   // N-version wrapper, bug injected into v1 only
    std::string hardened_detail;
    std::size_t versions = 0;
    int variants_affected = 0;  // variants whose compiled form changes under the bug
    validate::Funnel funnel;
    bool mitigated = false;

    /// Exit-code style summary: "mitigated", "not mitigated", "nothing to mitigate".
    std::string verdict() const;
};

/// Runs mock diversification, validation, harnessing and both executions on
/// the witness for `bug` (the B2 witness without injection when `bug` is empty).
/// Writes the batch, bundle and report under `out`. Throws PipelineError when
/// no variant survives validation.
MitigationResult demo_mitigate(std::optional<compiler::BugId> bug, const fs::path &fixtures, const fs::path &out);

nlohmann::json mitigation_to_json(const MitigationResult &r);

} // namespace nv::workspace

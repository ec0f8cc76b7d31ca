#include "nv/workspace.hpp"

#include <cstdlib>

namespace nv::workspace {

fs::path variants_dir(const project::Project &p) { return p.manifest.root / "variants" / p.target; }
fs::path bundle_dir(const project::Project &p) { return p.manifest.root / "bundle" / p.target; }
fs::path reports_dir(const project::Project &p) { return p.manifest.root / "reports"; }

diversify::ProviderConfig provider_config(const project::Project &p) {
    auto cfg = diversify::provider_from_json(p.manifest.provider);
    cfg.in_dialect = p.reference_dialect();
    if (!p.manifest.provider.contains("out_dialect")) cfg.out_dialect = cfg.in_dialect;
    return cfg;
}

diversify::Batch run_diversify(const project::Project &p, const diversify::ProviderConfig &cfg) {
    auto b = diversify::diversify(p.reference_source(), p.target, cfg);
    const auto dir = variants_dir(p);
    if (fs::exists(dir)) fs::remove_all(dir);
    diversify::write_batch(dir, b);
    return b;
}

namespace {

diversify::Batch require_batch(const project::Project &p) {
    const auto dir = variants_dir(p);
    if (!fs::exists(dir / "batch.json")) throw PipelineError("no variants for '" + p.target + "'; run diversify first");
    return diversify::load_batch(dir);
}

std::string provenance_label(const diversify::VariantSource &s) {
    return "variant " + std::to_string(s.index) + " (" + s.provenance.provider + ", " + s.provenance.model_or_seed + ")";
}

} // namespace

validate::ValidationReport run_validate(const project::Project &p) {
    const auto batch = require_batch(p);
    auto r = validate::run_validation(p, batch.variants);
    validate::save_report(variants_dir(p), r, batch);
    return r;
}

std::vector<harness::Candidate> validated_candidates(const project::Project &p) {
    const auto batch = require_batch(p);
    const auto verdicts = validate::load_verdicts(variants_dir(p));
    std::vector<harness::Candidate> out;
    for (const auto &v : batch.variants) {
        const auto it = verdicts.find(v.index);
        if (it == verdicts.end() || !it->second) continue;
        auto c = validate::filter_compile_isolation(v);
        if (!c.function) throw PipelineError("variant " + std::to_string(v.index) + " is recorded as validated but does not compile");
        out.push_back({std::move(*c.function), true, provenance_label(v)});
    }
    return out;
}

harness::Bundle run_harness(const project::Project &p, const harness::BuildConfig &build, std::size_t max_versions) {
    auto cs = validated_candidates(p);
    if (max_versions >= 1 && cs.size() + 1 > max_versions) cs.resize(max_versions - 1);
    auto b = harness::assemble_nversion(p, p.reference(), cs);
    const auto digest = compiler::sha256_hex(project::read_file(variants_dir(p) / "batch.json"));
    const auto dir = bundle_dir(p);
    if (fs::exists(dir)) fs::remove_all(dir);
    harness::write_bundle(dir, b, build, digest);
    return b;
}

std::optional<mir::Function> pair_function(const project::Project &p) {
    if (!p.manifest.pair) return std::nullopt;
    const auto &s = *p.manifest.pair;
    return frontend::compile_source(project::read_file(p.manifest.root / s.path), s.dialect);
}

std::vector<metrics::UniquenessRow> run_static_metrics(const project::Project &p) {
    std::vector<mir::Function> vs;
    for (auto &c : validated_candidates(p)) vs.push_back(std::move(c.function));
    std::vector<metrics::UniquenessRow> rows{metrics::static_uniqueness(p.reference(), vs)};
    if (auto pair = pair_function(p)) {
        rows.push_back(metrics::static_uniqueness(p.reference(), {*pair}));
        rows.back().function = p.target + " (pair)";
    }
    project::write_file(reports_dir(p) / "uniqueness.json", metrics::uniqueness_to_json(rows).dump(2) + "\n");
    return rows;
}

metrics::DynamicReport run_dynamic_metrics(const project::Project &p) {
    std::vector<mir::Function> vs;
    std::vector<std::string> labels;
    for (auto &c : validated_candidates(p)) {
        labels.push_back(c.provenance.substr(0, c.provenance.find(" (")));
        vs.push_back(std::move(c.function));
    }
    if (auto pair = pair_function(p)) {
        vs.push_back(*pair);
        labels.push_back("pair");
    }
    std::vector<std::vector<mir::Value>> inputs;
    for (const auto &c : p.suite.cases) inputs.push_back(c.args);
    auto r = metrics::dynamic_report(p.reference(), vs, labels, inputs, p.suite.fuel);
    project::write_file(reports_dir(p) / "dynamic.csv", metrics::dynamic_csv(r));
    project::write_file(reports_dir(p) / "dynamic.json", metrics::dynamic_to_json(r).dump(2) + "\n");
    return r;
}

fs::path default_fixtures_dir() {
    if (const char *env = std::getenv("NV_FIXTURES"); env && *env) return env;
#ifdef NV_DEFAULT_FIXTURES
    return NV_DEFAULT_FIXTURES;
#else
    return "fixtures";
#endif
}

std::string MitigationResult::verdict() const {
    if (!bug) return "nothing to mitigate";
    return mitigated ? "mitigated" : "not mitigated";
}

namespace {

std::string lower_case(std::string_view s) {
    std::string out(s);
    for (auto &c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::vector<mir::Value> input_from_json(const nlohmann::json &j, const std::vector<mir::Type> &params) {
    if (!j.is_array() || j.size() != params.size()) throw ConfigError("demo input does not match the target signature");
    std::vector<mir::Value> out;
    for (std::size_t i = 0; i < params.size(); ++i) out.push_back(mir::Value::of_signed(params[i], j[i].get<std::int64_t>()));
    return out;
}

std::string hash_at(const mir::Function &f, int level, std::optional<compiler::BugId> bug) {
    return compiler::canonical_hash(compiler::lower_to_bytecode(compiler::optimize(f, level, bug)));
}

} // namespace

MitigationResult demo_mitigate(std::optional<compiler::BugId> bug, const fs::path &fixtures, const fs::path &out) {
    const std::string witness = lower_case(compiler::bug_name(bug.value_or(compiler::BugId::B2)));
    const auto p = project::load_project(fixtures / "witness" / witness);
    const auto &demo = p.manifest.demo;
    if (!demo.is_object()) throw ConfigError("witness '" + witness + "' has no demo block");

    MitigationResult r;
    r.bug = bug;
    r.witness = witness;
    const auto sig = mir::signature_of(p.reference());
    r.input = input_from_json(demo.at("input"), sig.params);
    const int level = compiler::activation_level(bug.value_or(compiler::BugId::B2));

    const auto cfg = provider_config(p);
    const auto batch = diversify::diversify(p.reference_source(), p.target, cfg);
    const auto report = validate::run_validation(p, batch.variants);
    r.funnel = report.funnel;
    if (report.funnel.equivalence == 0) throw PipelineError("no variant of '" + p.target + "' survived validation");

    const std::size_t cap = demo.value("max_versions", static_cast<std::size_t>(SIZE_MAX));
    const auto bundle = harness::assemble_from_report(p, report, cap);
    r.versions = bundle.size();

    harness::BuildConfig build{level, bug, {}};
    if (bug) build.inject_into = {1};

    r.expected = exec::eval_mir(p.reference(), r.input);
    const exec::Vm single(compiler::lower_to_bytecode(compiler::optimize(p.reference(), level, bug)));
    r.baseline = single.run(r.input).outcome;
    const auto run = harness::run_wrapper(harness::lower_bundle(bundle, build), r.input);
    r.hardened = run.outcome;
    r.hardened_detail = run.detail;

    if (bug)
        for (std::size_t k = 2; k <= bundle.size(); ++k)
            if (hash_at(bundle.versions[k - 1], level, bug) != hash_at(bundle.versions[k - 1], level, std::nullopt))
                ++r.variants_affected;

    r.mitigated = bug && r.baseline.is_return() && !exec::outcomes_agree(r.baseline, r.expected) && r.hardened.is_trap() &&
                  r.hardened.reason == TrapReason::NVersionDivergence;

    const auto vdir = out / "variants" / p.target;
    if (fs::exists(out)) fs::remove_all(out);
    diversify::write_batch(vdir, batch);
    validate::save_report(vdir, report, batch);
    harness::write_bundle(out / "bundle" / p.target, bundle, build, compiler::sha256_hex(project::read_file(vdir / "batch.json")));
    project::write_file(out / "mitigation.json", mitigation_to_json(r).dump(2) + "\n");
    return r;
}

nlohmann::json mitigation_to_json(const MitigationResult &r) {
    nlohmann::json in = nlohmann::json::array();
    for (const auto &v : r.input) in.push_back(v.as_signed());
    return {{"bug", r.bug ? nlohmann::json(std::string(compiler::bug_name(*r.bug))) : nlohmann::json()},
            {"witness", r.witness},
            {"input", in},
            {"expected", exec::outcome_to_json(r.expected)},
            {"baseline", exec::outcome_to_json(r.baseline)},
            {"hardened", exec::outcome_to_json(r.hardened)},
            {"hardened_detail", r.hardened_detail},
            {"versions", r.versions},
            {"variants_affected", r.variants_affected},
            {"funnel",
             {{"compile_isolation", r.funnel.isolation},
              {"compile_project", r.funnel.project},
              {"tests", r.funnel.tests},
              {"equivalence", r.funnel.equivalence}}},
            {"verdict", r.verdict()}};
}

} // namespace nv::workspace

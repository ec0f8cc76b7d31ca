#include "nv/validate.hpp"

namespace nv::validate {

std::string_view filter_name(Filter f) noexcept {
    switch (f) {
    case Filter::CompileIsolation: return "compile_isolation";
    case Filter::CompileProject: return "compile_project";
    case Filter::Tests: return "tests";
    case Filter::Equivalence: return "equivalence";
    }
    return "?";
}

namespace {

FilterResult pass(Filter f, std::string reason = {}) { return {f, true, std::move(reason)}; }
FilterResult fail(Filter f, std::string reason) { return {f, false, std::move(reason)}; }

std::string args_text(const std::vector<mir::Value> &args) {
    std::string s = "(";
    for (std::size_t i = 0; i < args.size(); ++i) s += (i ? ", " : "") + mir::to_string(args[i]);
    return s + ")";
}

} // namespace

Compiled filter_compile_isolation(const diversify::VariantSource &v) {
    const Filter f = Filter::CompileIsolation;
    if (v.prefailed) return {fail(f, *v.prefailed), std::nullopt};
    try {
        mir::Function fn = frontend::compile_source(v.source_text, v.dialect);
        return {pass(f), std::move(fn)};
    } catch (const ParseError &e) {
        return {fail(f, std::string("parse: ") + e.what()), std::nullopt};
    } catch (const LoweringError &e) {
        return {fail(f, std::string("lower: ") + e.what()), std::nullopt};
    } catch (const ValidationError &e) {
        return {fail(f, std::string("validate: ") + e.what()), std::nullopt};
    }
}

FilterResult filter_compile_in_project(const mir::Function &fn, const project::Project &p) {
    const Filter f = Filter::CompileProject;
    if (fn.name != p.target) return fail(f, "name mismatch: expected '" + p.target + "', found '" + fn.name + "'");
    const auto want = mir::signature_of(p.reference());
    const auto got = mir::signature_of(fn);
    if (want != got) return fail(f, "signature mismatch: expected " + mir::to_string(want) + ", found " + mir::to_string(got));
    for (const auto &b : fn.blocks)
        for (const auto &i : b.insts)
            if (i.op == mir::Opcode::Intrinsic && !mir::find_intrinsic(i.intrinsic))
                return fail(f, "unregistered intrinsic '" + i.intrinsic + "'");
    return pass(f);
}

FilterResult filter_tests(const mir::Function &fn, const project::TestSuite &suite) {
    const Filter f = Filter::Tests;
    const exec::MirEvaluator ev(fn);
    std::uint64_t spent = 0;
    std::vector<std::uint64_t> bits;
    for (std::size_t i = 0; i < suite.cases.size(); ++i) {
        const auto &c = suite.cases[i];
        bits.clear();
        for (const auto &a : c.args) bits.push_back(a.bits);
        std::uint64_t steps = 0;
        const exec::Outcome got = ev.run_bits(bits, suite.fuel, &steps);
        spent += steps;
        if (got.is_trap() && got.reason == TrapReason::FuelExhausted)
            return fail(f, "timeout: case " + std::to_string(i) + " " + args_text(c.args) + " exceeded " +
                               std::to_string(suite.fuel) + " steps");
        if (spent > suite.timeout()) return fail(f, "timeout: suite exceeded " + std::to_string(suite.timeout()) + " steps");
        if (!exec::outcomes_agree(got, c.expected))
            return fail(f, "case " + std::to_string(i) + " " + args_text(c.args) + ": expected " +
                               exec::to_string(c.expected) + ", got " + exec::to_string(got));
    }
    return pass(f, std::to_string(suite.cases.size()) + " cases");
}

FilterResult filter_equivalence(const mir::Function &reference, const mir::Function &variant, const equiv::Budget &budget) {
    const Filter f = Filter::Equivalence;
    equiv::Verdict v;
    try {
        v = equiv::check_equivalence(reference, variant, budget);
    } catch (const SignatureMismatch &e) {
        return fail(f, e.what());
    }
    switch (v.kind) {
    case equiv::VerdictKind::Equivalent: return pass(f, "equivalent");
    case equiv::VerdictKind::NotEquivalent: return fail(f, "counterexample: " + equiv::render(v, reference));
    case equiv::VerdictKind::Unknown: break;
    }
    return fail(f, "unknown: budget (" + v.reason + ")");
}

std::vector<const VariantRecord *> ValidationReport::passed() const {
    std::vector<const VariantRecord *> out;
    for (const auto &v : variants)
        if (v.passed_all()) out.push_back(&v);
    return out;
}

ValidationReport run_validation(const project::Project &p, const std::vector<diversify::VariantSource> &batch) {
    ValidationReport r;
    r.function = p.target;
    for (const auto &src : batch) {
        VariantRecord rec;
        rec.source = src;
        auto iso = filter_compile_isolation(src);
        rec.filters.push_back(iso.result);
        if (iso.result.passed) {
            rec.function = std::move(iso.function);
            ++r.funnel.isolation;
            rec.filters.push_back(filter_compile_in_project(*rec.function, p));
        }
        if (rec.filters.back().passed && rec.filters.size() == 2) {
            ++r.funnel.project;
            rec.filters.push_back(filter_tests(*rec.function, p.suite));
        }
        if (rec.filters.back().passed && rec.filters.size() == 3) {
            ++r.funnel.tests;
            rec.filters.push_back(filter_equivalence(p.reference(), *rec.function, p.manifest.budget));
        }
        if (rec.passed_all()) ++r.funnel.equivalence;
        r.variants.push_back(std::move(rec));
    }
    return r;
}

nlohmann::json report_to_json(const ValidationReport &r, const diversify::Batch *batch) {
    nlohmann::json vs = nlohmann::json::array();
    for (const auto &v : r.variants) {
        nlohmann::json filters = nlohmann::json::array();
        for (const auto &f : v.filters)
            filters.push_back({{"name", std::string(filter_name(f.filter))}, {"passed", f.passed}, {"reason", f.reason}});
        const auto &s = v.source;
        nlohmann::json j{{"index", s.index},
                         {"dialect", std::string(frontend::dialect_name(s.dialect))},
                         {"file", std::to_string(s.index) + std::string(frontend::file_extension(s.dialect))},
                         {"provenance",
                          {{"provider", s.provenance.provider},
                           {"model_or_seed", s.provenance.model_or_seed},
                           {"prompt_hash", s.provenance.prompt_hash}}},
                         {"filters", filters}};
        if (s.prefailed) j["prefailed"] = *s.prefailed;
        vs.push_back(std::move(j));
    }
    nlohmann::json out{{"function", r.function},
                       {"config", batch ? diversify::provider_to_json(batch->config) : r.config},
                       {"variants", vs},
                       {"funnel",
                        {{"isolation", r.funnel.isolation},
                         {"project", r.funnel.project},
                         {"tests", r.funnel.tests},
                         {"equivalence", r.funnel.equivalence}}}};
    if (batch) out["prompt_hash"] = batch->prompt_hash;
    return out;
}

void save_report(const std::filesystem::path &dir, const ValidationReport &r, const diversify::Batch &batch) {
    project::write_file(dir / "batch.json", report_to_json(r, &batch).dump(2) + "\n");
}

std::map<int, bool> load_verdicts(const std::filesystem::path &dir) {
    std::map<int, bool> out;
    try {
        const auto j = nlohmann::json::parse(project::read_file(dir / "batch.json"));
        for (const auto &v : j.at("variants")) {
            const auto &fs = v.at("filters");
            bool ok = fs.size() == 4;
            for (const auto &f : fs) ok = ok && f.at("passed").get<bool>();
            out[v.at("index").get<int>()] = ok;
        }
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError((dir / "batch.json").string() + ": " + e.what());
    }
    return out;
}

} // namespace nv::validate

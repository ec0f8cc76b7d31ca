#include "nv/cli.hpp"
#include "nv/compiler.hpp"
#include "nv/exec.hpp"
#include "nv/frontend.hpp"
#include "nv/harness.hpp"
#include "nv/project.hpp"
#include "nv/workspace.hpp"

#include "CLI11.hpp"

#include <charconv>
#include <iostream>
#include <limits>

namespace nv::cli {

namespace {

namespace fs = std::filesystem;

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kNoVariants = 2;
constexpr int kTrap = 41;
constexpr int kDivergence = 42;

int trap_exit(const exec::Outcome &o) {
    if (!o.is_trap()) return kOk;
    return o.reason == TrapReason::NVersionDivergence ? kDivergence : kTrap;
}

/// Source dialect from --dialect or the file extension; nullopt means MIR text.
std::optional<frontend::Dialect> source_kind(const fs::path &file, const std::string &flag) {
    const std::string d = flag.empty() ? file.extension().string().substr(file.extension().empty() ? 0 : 1) : flag;
    if (d == "mir") return std::nullopt;
    if (auto k = frontend::parse_dialect(d)) return k;
    throw ConfigError("cannot tell the language of '" + file.string() + "'; pass --dialect cm|gm|mir");
}

mir::Function load_function(const fs::path &file, const std::string &dialect) {
    const auto text = project::read_file(file);
    const auto kind = source_kind(file, dialect);
    if (!kind) {
        auto f = mir::parse_mir(text);
        mir::require_valid(f);
        return f;
    }
    return frontend::compile_source(text, *kind);
}

std::optional<compiler::BugId> bug_option(const std::string &s) {
    if (s.empty() || s == "none") return std::nullopt;
    if (auto b = compiler::parse_bug(s)) return b;
    throw ConfigError("unknown bug '" + s + "' (expected B1, B2 or B3)");
}

std::vector<mir::Value> parse_args(const std::vector<std::string> &raw, const std::vector<mir::Type> &params) {
    if (raw.size() != params.size())
        throw ArgMismatch("expected " + std::to_string(params.size()) + " argument(s), got " + std::to_string(raw.size()));
    std::vector<mir::Value> out;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const auto &s = raw[i];
        std::int64_t v = 0;
        const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || end != s.data() + s.size()) throw ArgMismatch("argument " + std::to_string(i + 1) + " is not an integer: " + s);
        const unsigned w = mir::bit_width(params[i]);
        if (w < 64) {
            const std::int64_t lo = -(std::int64_t{1} << (w - 1));
            const std::int64_t hi = static_cast<std::int64_t>((std::uint64_t{1} << w) - 1);
            if (w == 1 ? (v < 0 || v > 1) : (v < lo || v > hi))
                throw ArgMismatch("argument " + std::to_string(i + 1) + " does not fit " + std::string(mir::type_name(params[i])));
        }
        out.push_back(mir::Value::of_signed(params[i], v));
    }
    return out;
}

std::string render_input(const std::vector<mir::Value> &in) {
    std::string s;
    for (std::size_t i = 0; i < in.size(); ++i) s += (i ? ", " : "") + mir::to_string(in[i]);
    return s;
}

fs::path project_path(const std::string &s) { return s.empty() ? fs::current_path() : fs::path(s); }

void print_funnel(const validate::Funnel &f, int total) {
    std::cout << "generated          " << total << "\n"
              << "compile_isolation  " << f.isolation << "\n"
              << "compile_project    " << f.project << "\n"
              << "tests              " << f.tests << "\n"
              << "equivalence        " << f.equivalence << "\n";
}

// Command bodies. Each returns an exit code; errors propagate as exceptions.

struct ParseCmd {
    std::string file, dialect;
    bool format = false;

    int operator()() const {
        const auto text = project::read_file(file);
        const auto kind = source_kind(file, dialect);
        if (!kind) {
            const auto f = mir::parse_mir(text);
            mir::require_valid(f);
            if (format) std::cout << mir::print_mir(f);
            else std::cout << "ok: @" << f.name << " " << mir::to_string(mir::signature_of(f)) << "\n";
            return kOk;
        }
        const auto ast = frontend::parse_source(text, *kind);
        const auto f = frontend::lower_ast(ast, *kind);
        if (format) std::cout << frontend::print_source(ast, *kind);
        else std::cout << "ok: " << f.name << " " << mir::to_string(mir::signature_of(f)) << "\n";
        return kOk;
    }
};

struct CompileCmd {
    std::string file, dialect, inject, emit = "mir";
    int level = 0;

    int operator()() const {
        const auto f = compiler::optimize(load_function(file, dialect), level, bug_option(inject));
        if (emit == "mir") {
            std::cout << mir::print_mir(f);
            return kOk;
        }
        const auto u = compiler::lower_to_bytecode(f);
        if (emit == "disasm") std::cout << bc::disassemble(u);
        else std::cout << "# sha256 " << compiler::canonical_hash(u) << "\n" << bc::disassemble(bc::canonicalize(u), false);
        return kOk;
    }
};

struct RunCmd {
    std::string path, dialect, inject;
    std::vector<std::string> args;
    std::vector<std::size_t> inject_into;
    int level = -1;
    std::uint64_t fuel = exec::kDefaultFuel;
    bool trace = false;

    int operator()() const {
        if (fs::is_directory(path)) return run_bundle();
        const auto f = load_function(path, dialect);
        const exec::Vm vm(compiler::lower_to_bytecode(compiler::optimize(f, std::max(level, 0), bug_option(inject))));
        const auto in = parse_args(args, vm.unit().params);
        const auto r = vm.run(in, fuel, trace);
        std::cout << exec::to_string(r.outcome) << "\n";
        if (trace) std::cout << exec::trace_to_json(f.name, in, r.outcome, *r.trace).dump(2) << "\n";
        if (r.outcome.is_trap()) std::cerr << "trap at input (" << render_input(in) << ")\n";
        return trap_exit(r.outcome);
    }

    int run_bundle() const {
        auto loaded = harness::load_bundle(path);
        auto build = loaded.build;
        if (level >= 0) build.level = level;
        if (!inject.empty()) build.inject = bug_option(inject);
        if (!inject_into.empty()) build.inject_into = {inject_into.begin(), inject_into.end()};
        const auto lowered = harness::lower_bundle(loaded.bundle, build);
        const auto in = parse_args(args, lowered.params);
        const auto r = harness::run_wrapper(lowered, in, fuel);
        std::cout << exec::to_string(r.outcome) << "\n";
        if (trace)
            for (std::size_t k = 0; k < r.versions.size(); ++k)
                std::cout << "v" << k + 1 << " " << exec::to_string(r.versions[k]) << "\n";
        if (!r.detail.empty()) std::cerr << r.detail << "\n";
        return trap_exit(r.outcome);
    }
};

struct DiversifyCmd {
    std::string project, out_dialect, provider, endpoint, model;
    int n = 0;
    std::optional<std::uint64_t> seed;

    int operator()() const {
        const auto p = project::load_project(project_path(project));
        auto cfg = workspace::provider_config(p);
        if (n) cfg.n_variants = n;
        if (!out_dialect.empty()) {
            const auto d = frontend::parse_dialect(out_dialect);
            if (!d) throw ConfigError("unknown dialect '" + out_dialect + "'");
            cfg.out_dialect = *d;
        }
        if (provider == "mock") cfg.kind = diversify::ProviderKind::Mock;
        else if (provider == "http") cfg.kind = diversify::ProviderKind::Http;
        else if (!provider.empty()) throw ConfigError("unknown provider '" + provider + "'");
        if (!endpoint.empty()) cfg.endpoint = endpoint;
        if (!model.empty()) cfg.model = model;
        if (seed) cfg.seed = *seed;
        cfg.check();
        const auto b = workspace::run_diversify(p, cfg);
        std::cout << b.variants.size() << " variant(s) of " << b.function << " written to "
                  << workspace::variants_dir(p).string() << "\n";
        return kOk;
    }
};

struct ValidateCmd {
    std::string project;

    int operator()() const {
        const auto p = project::load_project(project_path(project));
        const auto r = workspace::run_validate(p);
        print_funnel(r.funnel, static_cast<int>(r.variants.size()));
        for (const auto &v : r.variants)
            if (!v.passed_all()) {
                const auto &f = v.filters.back();
                std::cout << "variant " << v.source.index << ": " << validate::filter_name(f.filter) << ": "
                          << f.reason.substr(0, f.reason.find('\n')) << "\n";
            }
        return r.funnel.equivalence ? kOk : kNoVariants;
    }
};

struct HarnessCmd {
    std::string project, inject;
    std::vector<std::size_t> inject_into;
    int level = 0;
    std::size_t max_versions = 0;

    int operator()() const {
        const auto p = project::load_project(project_path(project));
        harness::BuildConfig build{level, bug_option(inject), {inject_into.begin(), inject_into.end()}};
        if (build.inject && build.inject_into.empty()) build.inject_into = {1};
        const auto b = workspace::run_harness(p, build, max_versions ? max_versions : SIZE_MAX);
        std::cout << b.size() << "-version bundle for " << b.target << " written to "
                  << workspace::bundle_dir(p).string() << "\n";
        return kOk;
    }
};

struct MetricsCmd {
    std::string kind, project;

    int operator()() const {
        const auto p = project::load_project(project_path(project));
        if (kind == "static") {
            for (const auto &r : workspace::run_static_metrics(p)) {
                std::cout << r.function << ": " << r.total << " variant(s), unique IR " << r.unique_ir;
                for (std::size_t l = 0; l < r.levels.size(); ++l) std::cout << ", O" << r.levels[l] << " " << r.unique_at_level[l];
                std::cout << "\n";
            }
            return kOk;
        }
        const auto r = workspace::run_dynamic_metrics(p);
        for (const auto &v : r.variants) std::cout << v.label << ": jaccard " << v.jaccard_vs_reference << "\n";
        return kOk;
    }
};

struct GenSuiteCmd {
    std::string project;
    std::uint64_t seed = 1, fuel = 100'000;

    int operator()() const {
        const auto m = project::load_manifest(project_path(project));
        for (const auto &s : m.sources) {
            const auto f = frontend::compile_source(project::read_file(m.root / s.path), s.dialect);
            if (f.name != m.target) continue;
            const auto suite = project::generate_suite(f, seed, fuel);
            project::save_suite(suite, m.root / m.test_suite);
            std::cout << suite.cases.size() << " case(s) written to " << (m.root / m.test_suite).string() << "\n";
            return kOk;
        }
        throw ConfigError("target '" + m.target + "' is not defined by any source");
    }
};

struct DemoCmd {
    std::string bug, fixtures, out;
    bool json = false;

    int operator()() const {
        const auto b = bug_option(bug);
        const fs::path fx = fixtures.empty() ? workspace::default_fixtures_dir() : fs::path(fixtures);
        const fs::path dir = out.empty() ? fs::current_path() / "nv-demo" / (b ? std::string(compiler::bug_name(*b)) : "none") : fs::path(out);
        const auto r = workspace::demo_mitigate(b, fx, dir);
        if (json) {
            std::cout << workspace::mitigation_to_json(r).dump(2) << "\n";
        } else {
            std::cout << "witness   " << r.witness << " at input (" << render_input(r.input) << ")\n"
                      << "expected  " << exec::to_string(r.expected) << "\n"
                      << "baseline  " << exec::to_string(r.baseline) << "\n"
                      << "hardened  " << exec::to_string(r.hardened) << " (" << r.versions << " versions)\n";
            if (!r.hardened_detail.empty()) std::cout << "          " << r.hardened_detail << "\n";
            std::cout << "affected  " << r.variants_affected << " of " << (r.versions ? r.versions - 1 : 0) << " variant(s)\n"
                      << r.verdict() << "\n";
        }
        return r.mitigated ? kOk : kUsage;
    }
};

} // namespace

int dispatch(int argc, char **argv) {
    CLI::App app{"N-version hardening toolchain"};
    app.require_subcommand(1);

    ParseCmd parse;
    auto *c_parse = app.add_subcommand("parse", "Check a Cm, Gm or MIR source; --format prints it back");
    c_parse->add_option("file", parse.file)->required();
    c_parse->add_option("--dialect", parse.dialect, "cm, gm or mir (default: file extension)");
    c_parse->add_flag("--format", parse.format);

    CompileCmd compile;
    auto *c_compile = app.add_subcommand("compile", "Optimize and lower a source file");
    c_compile->add_option("file", compile.file)->required();
    c_compile->add_option("--dialect", compile.dialect);
    c_compile->add_option("--level,-O", compile.level)->check(CLI::Range(0, compiler::kMaxLevel));
    c_compile->add_option("--inject", compile.inject, "B1, B2 or B3");
    c_compile->add_option("--emit", compile.emit)->check(CLI::IsMember({"mir", "bytecode", "disasm"}));

    RunCmd run;
    auto *c_run = app.add_subcommand("run", "Execute a source file or a bundle directory");
    c_run->add_option("path", run.path)->required();
    c_run->add_option("--args", run.args)->delimiter(',');
    c_run->add_option("--dialect", run.dialect);
    c_run->add_option("--level,-O", run.level)->check(CLI::Range(0, compiler::kMaxLevel));
    c_run->add_option("--inject", run.inject);
    c_run->add_option("--inject-into", run.inject_into)->delimiter(',');
    c_run->add_option("--fuel", run.fuel);
    c_run->add_flag("--trace", run.trace);

    DiversifyCmd div;
    auto *c_div = app.add_subcommand("diversify", "Request variants of the project's target");
    c_div->add_option("project", div.project);
    c_div->add_option("--n", div.n)->check(CLI::PositiveNumber);
    c_div->add_option("--out-dialect", div.out_dialect);
    c_div->add_option("--provider", div.provider)->check(CLI::IsMember({"mock", "http"}));
    c_div->add_option("--endpoint", div.endpoint);
    c_div->add_option("--model", div.model);
    c_div->add_option("--seed", div.seed);

    ValidateCmd val;
    auto *c_val = app.add_subcommand("validate", "Run the validation filters over the saved variants");
    c_val->add_option("project", val.project);

    HarnessCmd har;
    auto *c_har = app.add_subcommand("harness", "Assemble the N-version bundle from validated variants");
    c_har->add_option("project", har.project);
    c_har->add_option("--level,-O", har.level)->check(CLI::Range(0, compiler::kMaxLevel));
    c_har->add_option("--inject", har.inject);
    c_har->add_option("--inject-into", har.inject_into)->delimiter(',');
    c_har->add_option("--max-versions", har.max_versions);

    MetricsCmd met;
    auto *c_met = app.add_subcommand("metrics", "Static uniqueness or dynamic opcode diversity");
    c_met->add_option("kind", met.kind)->required()->check(CLI::IsMember({"static", "dynamic"}));
    c_met->add_option("project", met.project);

    GenSuiteCmd gen;
    auto *c_gen = app.add_subcommand("gen-suite", "Generate the project's test suite from its reference");
    c_gen->add_option("project", gen.project);
    c_gen->add_option("--seed", gen.seed);
    c_gen->add_option("--fuel", gen.fuel);

    DemoCmd demo;
    auto *c_demo = app.add_subcommand("demo-mitigate", "Run the mitigation demonstration on a bundled witness");
    c_demo->add_option("--bug", demo.bug)->required()->check(CLI::IsMember({"B1", "B2", "B3", "none"}));
    c_demo->add_option("--fixtures", demo.fixtures);
    c_demo->add_option("--out", demo.out);
    c_demo->add_flag("--json", demo.json);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (*c_parse) return parse();
        if (*c_compile) return compile();
        if (*c_run) return run();
        if (*c_div) return div();
        if (*c_val) return val();
        if (*c_har) return har();
        if (*c_met) return met();
        if (*c_gen) return gen();
        if (*c_demo) return demo();
    } catch (const PipelineError &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNoVariants;
    } catch (const harness::EmptyVariantList &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNoVariants;
    } catch (const Error &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    }
    return kUsage;
}

} // namespace nv::cli

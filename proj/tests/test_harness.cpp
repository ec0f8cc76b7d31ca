#include "doctest.h"
#include "support.hpp"

#include "nv/harness.hpp"

#include <algorithm>
#include <random>

using namespace nv;
using compiler::BugId;
using frontend::Dialect;
using harness::Candidate;
using mir::Type;
using mir::Value;

namespace {

project::Project witness(const char *bug) { return project::load_project(nvtest::fixtures() / "witness" / bug); }

Candidate validated(const std::string &src, Dialect d = Dialect::Cm) {
    return {frontend::compile_source(src, d), true, "hand-written"};
}

validate::ValidationReport validated_report(const project::Project &p) {
    const auto cfg = diversify::provider_from_json(p.manifest.provider);
    const auto b = diversify::diversify(p.reference_source(), p.target, cfg);
    return validate::run_validation(p, b.variants);
}

std::vector<Value> one(Type t, std::int64_t x) { return {Value::of_signed(t, x)}; }

int count_intrinsic(const mir::Function &f, std::string_view name) {
    int n = 0;
    for (const auto &b : f.blocks)
        for (const auto &i : b.insts) n += i.op == mir::Opcode::Intrinsic && i.intrinsic == name;
    return n;
}

} // namespace

TEST_CASE("normalization renames parameters and strips the dialect") {
    const auto f = nvtest::corpus_function("divmix", Dialect::Cm);
    const auto g = harness::normalize_variant(f);
    REQUIRE(g.params.size() == 2);
    CHECK(g.params[0].name == "a0");
    CHECK(g.params[1].name == "a1");
    CHECK(g.dialect == mir::DialectTag::Raw);
    CHECK(equiv::check_equivalence(f, g).equivalent());
}

TEST_CASE("normalization removes divcheck guards without changing behaviour") {
    for (const auto &name : nvtest::corpus_names()) {
        CAPTURE(name);
        const auto gm = nvtest::corpus_function(name, Dialect::Gm);
        const auto g = harness::normalize_variant(gm);
        CHECK(count_intrinsic(g, "gm.divcheck") == 0);
        CHECK(mir::validate_function(g).empty());
        CHECK(equiv::check_equivalence(gm, g).equivalent());
        CHECK(harness::normalize_variant(g) == g);
    }
    const auto gm = nvtest::corpus_function("divmix", Dialect::Gm);
    CHECK(count_intrinsic(gm, "gm.divcheck") > 0);
}

TEST_CASE("normalization is idempotent on generated functions") {
    nvtest::MirGen gen(21);
    for (int i = 0; i < 100; ++i) {
        const auto f = gen.next();
        const auto g = harness::normalize_variant(f);
        CHECK(harness::normalize_variant(g) == g);
    }
}

TEST_CASE("version names") {
    CHECK(harness::version_name("triple", 1) == "triple__v1");
    CHECK(harness::version_name("f", 12) == "f__v12");
}

TEST_CASE("wrapper text round-trips") {
    harness::Wrapper w{"triple", {{"a0", Type::I16}, {"a1", Type::I8}}, Type::I16, 3};
    const auto text = harness::print_wrapper(w);
    CHECK(text ==
          "; N-of-N wrapper over 3 versions\nwrapper @triple(%a0: i16, %a1: i8) -> i16 {\n"
          "  callv 1\n  callv 2\n  callv 3\n  check 2\n  check 3\n  ret v1\n}\n");
    CHECK(harness::parse_wrapper(text) == w);
    CHECK(w.comparison_sites() == 2);
    harness::Wrapper none{"k", {}, Type::I8, 1};
    CHECK(harness::parse_wrapper(harness::print_wrapper(none)) == none);
}

TEST_CASE("wrapper parsing is strict") {
    const std::string head = "wrapper @f(%a0: i8) -> i8 {\n";
    CHECK_THROWS_AS(harness::parse_wrapper(""), ParseError);
    CHECK_THROWS_AS(harness::parse_wrapper(head + "  callv 2\n  ret v1\n}\n"), ParseError);
    CHECK_THROWS_AS(harness::parse_wrapper(head + "  callv 1\n  callv 2\n  ret v1\n}\n"), ParseError);
    CHECK_THROWS_AS(harness::parse_wrapper(head + "  callv 1\n  callv 2\n  check 1\n  ret v1\n}\n"), ParseError);
    CHECK_THROWS_AS(harness::parse_wrapper(head + "  callv 1\n  ret v2\n}\n"), ParseError);
    CHECK_THROWS_AS(harness::parse_wrapper(head + "  callv 1\n  ret v1\n}\nextra\n"), ParseError);
    CHECK_THROWS_AS(harness::parse_wrapper("wrapper @f(%a0: i7) -> i8 {\n  callv 1\n  ret v1\n}\n"), ParseError);
}

TEST_CASE("assembly refuses empty and unvalidated variant lists") {
    const auto p = witness("b2");
    CHECK_THROWS_AS(harness::assemble_nversion(p, p.reference(), {}), harness::EmptyVariantList);
    auto c = validated("int16 triple(int16 x) { return x + x + x; }");
    c.validated = false;
    CHECK_THROWS_AS(harness::assemble_nversion(p, p.reference(), {c}), harness::UnvalidatedVariant);
    CHECK_THROWS_AS(harness::assemble_nversion(p, p.reference(), {validated("int8 triple(int8 x) { return x; }")}),
                    SignatureMismatch);
    validate::ValidationReport empty;
    CHECK_THROWS_AS(harness::assemble_from_report(p, empty), harness::EmptyVariantList);
}

TEST_CASE("two identical versions agree everywhere") {
    const auto p = witness("b2");
    const auto b = harness::assemble_nversion(p, p.reference(), {{p.reference(), true, "copy"}});
    CHECK(b.size() == 2);
    CHECK(b.versions[0].name == "triple__v1");
    CHECK(b.versions[1].name == "triple__v2");
    CHECK(b.provenance[0] == "reference");
    const auto lb = harness::lower_bundle(b, {});
    for (int x = -300; x <= 300; x += 7) {
        const auto r = harness::run_wrapper(lb, one(Type::I16, x));
        CHECK(r.outcome == exec::Outcome::returned(Value::of_signed(Type::I16, 3 * x)));
        CHECK(r.detail.empty());
    }
}

TEST_CASE("the mul-by-3 miscompilation in v1 is caught at x = 1") {
    const auto p = witness("b2");
    const auto b = harness::assemble_nversion(p, p.reference(), {validated("int16 triple(int16 x) { return x + x + x; }")});
    harness::BuildConfig build{2, BugId::B2, {1}};
    const auto lb = harness::lower_bundle(b, build);
    const auto r = harness::run_wrapper(lb, one(Type::I16, 1));
    CHECK(r.outcome == exec::Outcome::trapped(TrapReason::NVersionDivergence));
    CHECK(r.detail == "n-version divergence: v1=2 v2=3 at input (1)");
    // x = 0 is not a counterexample
    CHECK(harness::run_wrapper(lb, one(Type::I16, 0)).outcome == exec::Outcome::returned(Value::of(Type::I16, 0)));

    // the same build of the reference alone answers wrongly
    const exec::Vm single(compiler::lower_to_bytecode(compiler::optimize(p.reference(), 2, BugId::B2)));
    CHECK(single.run(one(Type::I16, 1)).outcome == exec::Outcome::returned(Value::of(Type::I16, 2)));
}

TEST_CASE("bundles are transparent on correct builds") {
    for (const auto &name : nvtest::corpus_names()) {
        CAPTURE(name);
        const auto p = project::load_project(nvtest::corpus_dir(name));
        const auto b = harness::assemble_from_report(p, validated_report(p));
        CHECK(b.size() >= 2);
        const exec::MirEvaluator ref(p.reference());
        const auto inputs = nvtest::i8_sweep(nvtest::param_types(p.reference()));
        for (int level = 0; level <= compiler::kMaxLevel; ++level) {
            CAPTURE(level);
            const auto lb = harness::lower_bundle(b, {level, std::nullopt, {}});
            int bad = 0;
            for (const auto &in : inputs) bad += !exec::outcomes_agree(harness::run_wrapper(lb, in).outcome, ref.run(in));
            CHECK(bad == 0);
        }
    }
}

TEST_CASE("the wrapper never returns a value the reference would not") {
    // versions here are validated in name only; the wrapper must still fail stop
    const auto p = witness("b2");
    const auto b = harness::assemble_nversion(
        p, p.reference(),
        {validated("int16 triple(int16 x) { return x + x + x; }"),
         validated("int16 triple(int16 x) { if (x == 5) return 0; return x * 3; }"),
         validated("int16 triple(int16 x) { return x * 3 + (x == -9 ? 1 : 0); }")});
    const exec::MirEvaluator ref(p.reference());
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 12; ++trial) {
        harness::BuildConfig build;
        build.level = static_cast<int>(rng() % 4);
        build.inject = static_cast<BugId>(rng() % 3);
        for (std::size_t k = 1; k <= b.size(); ++k)
            if (rng() % 2) build.inject_into.insert(k);
        const auto lb = harness::lower_bundle(b, build);
        for (int x = -40; x <= 40; ++x) {
            const auto in = one(Type::I16, x);
            const auto r = harness::run_wrapper(lb, in);
            CHECK((r.outcome.is_trap() || r.outcome == ref.run(in)));
            if (r.outcome.is_trap()) CHECK_FALSE(r.detail.empty());
        }
    }
}

TEST_CASE("version order does not change the observable outcome") {
    const auto p = witness("b2");
    std::vector<Candidate> cs{validated("int16 triple(int16 x) { return x + x + x; }"),
                              validated("int16 triple(int16 x) { return (x << 1) + x; }"),
                              validated("int16 triple(int16 x) { if (x == 3) return 0; return x * 3; }")};
    const auto base = harness::lower_bundle(harness::assemble_nversion(p, p.reference(), cs), {1, std::nullopt, {}});
    std::sort(cs.begin(), cs.end(), [](const Candidate &a, const Candidate &b) { return mir::print_mir(a.function) < mir::print_mir(b.function); });
    do {
        const auto lb = harness::lower_bundle(harness::assemble_nversion(p, p.reference(), cs), {1, std::nullopt, {}});
        for (int x = -10; x <= 10; ++x) {
            const auto in = one(Type::I16, x);
            CHECK(harness::run_wrapper(lb, in).outcome == harness::run_wrapper(base, in).outcome);
        }
    } while (std::next_permutation(cs.begin(), cs.end(), [](const Candidate &a, const Candidate &b) {
        return mir::print_mir(a.function) < mir::print_mir(b.function);
    }));
}

TEST_CASE("every call site reaches the wrapper") {
    for (const char *bug : {"b1", "b2", "b3"}) {
        const auto p = witness(bug);
        const auto b = harness::assemble_from_report(p, validated_report(p), 4);
        CHECK(b.size() <= 4);
        CHECK(b.call_sites == p.call_sites);
        CHECK_FALSE(b.call_sites.empty());
        for (const auto &c : b.call_sites) CHECK(c.callee == b.wrapper.name);
        CHECK(b.functions.count(p.target) == 0);
        for (std::size_t k = 1; k <= b.size(); ++k) CHECK(b.functions.count(harness::version_name(p.target, k)) == 1);
    }
}

TEST_CASE("max_versions caps the bundle") {
    const auto p = witness("b2");
    const auto r = validated_report(p);
    CHECK(harness::assemble_from_report(p, r, 3).size() == 3);
    CHECK(harness::assemble_from_report(p, r).size() == r.passed().size() + 1);
}

TEST_CASE("build configuration json") {
    harness::BuildConfig b{3, BugId::B3, {1, 4}};
    CHECK(harness::build_from_json(harness::build_to_json(b)) == b);
    CHECK(harness::build_from_json(nullptr) == harness::BuildConfig{});
    CHECK_THROWS_AS(harness::build_from_json({{"level", 9}}), ConfigError);
    CHECK_THROWS_AS(harness::build_from_json({{"inject", "B9"}}), ConfigError);
    CHECK_THROWS_AS(harness::build_from_json({{"inject_into", "all"}}), ConfigError);
}

TEST_CASE("bundles round-trip through the file system") {
    nvtest::TempDir tmp("bundle");
    const auto p = witness("b3");
    const auto b = harness::assemble_from_report(p, validated_report(p), 3);
    const harness::BuildConfig build{3, BugId::B3, {1}};
    harness::write_bundle(tmp.path(), b, build, "digest");
    for (const char *f : {"v1.mir", "v2.mir", "v3.mir", "wrapper.mir", "bundle.json"}) CHECK(std::filesystem::exists(tmp.path() / f));
    const auto back = harness::load_bundle(tmp.path());
    CHECK(back.build == build);
    CHECK(back.bundle.target == b.target);
    CHECK(back.bundle.versions == b.versions);
    CHECK(back.bundle.provenance == b.provenance);
    CHECK(back.bundle.wrapper == b.wrapper);
    CHECK(back.bundle.call_sites == b.call_sites);

    project::write_file(tmp.path() / "wrapper.mir", harness::print_wrapper({b.wrapper.name, b.wrapper.params, b.wrapper.ret, 2}));
    CHECK_THROWS_AS(harness::load_bundle(tmp.path()), ConfigError);
}

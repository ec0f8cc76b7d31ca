#include "doctest.h"
#include "support.hpp"

#include "nv/compiler.hpp"
#include "nv/equiv.hpp"
#include "nv/error.hpp"
#include "nv/exec.hpp"

using namespace nv;
using compiler::BugId;

namespace {

bool agree_on_i8_sweep(const mir::Function &f, const mir::Function &g) {
    const exec::MirEvaluator ef(f), eg(g);
    for (const auto &in : nvtest::i8_sweep(nvtest::param_types(f)))
        if (!exec::outcomes_agree(ef.run(in), eg.run(in))) return false;
    return true;
}

std::vector<std::string> mnemonics(const bc::Unit &u) {
    std::vector<std::string> out;
    for (const auto &i : u.code) out.push_back(bc::mnemonic(i));
    return out;
}

mir::Function witness(const std::string &dir, const std::string &file) {
    return frontend::compile_source(project::read_file(nvtest::fixtures() / "witness" / dir / file), frontend::Dialect::Cm);
}

} // namespace

TEST_CASE("bug names and activation levels") {
    CHECK(compiler::bug_name(BugId::B1) == "B1");
    CHECK(compiler::parse_bug("B3") == BugId::B3);
    CHECK_FALSE(compiler::parse_bug("B4"));
    CHECK(compiler::activation_level(BugId::B1) == 1);
    CHECK(compiler::activation_level(BugId::B2) == 2);
    CHECK(compiler::activation_level(BugId::B3) == 3);
}

TEST_CASE("levels outside 0..3 are rejected") {
    const auto f = nvtest::mir("func @id(%x: i32) -> i32 { entry: ret %x }");
    CHECK_THROWS_AS(compiler::optimize(f, 4), ConfigError);
    CHECK_THROWS_AS(compiler::optimize(f, -1), ConfigError);
}

TEST_CASE("a constant program is a fixed point at every level") {
    const auto f = nvtest::mir("func @k() -> i32 { entry: ret const.i32 7 }");
    for (int level = 0; level <= 3; ++level) CHECK(compiler::optimize(f, level) == f);
}

TEST_CASE("add of zero simplifies to the operand") {
    const auto f = nvtest::mir("func @f(%x: i16) -> i16 { entry: %y = add %x, const.i16 0 ret %y }");
    CHECK(compiler::optimize(f, 0) == f);
    for (int level = 1; level <= 3; ++level) {
        const auto g = compiler::optimize(f, level);
        REQUIRE(g.blocks.size() == 1);
        CHECK(g.blocks[0].insts.empty());
        CHECK(g.blocks[0].term.operand == mir::Operand::make_reg("x"));
        CHECK(equiv::check_equivalence(f, g).kind == equiv::VerdictKind::Equivalent);
    }
}

TEST_CASE("B1 folds srem of a negative constant with the wrong sign") {
    const auto f = nvtest::mir("func @r() -> i32 { entry: %y = srem const.i32 -7, const.i32 3 ret %y }");
    // truncating remainder, computed by the host
    const std::int64_t want = -7 % 3;
    CHECK(exec::eval_mir(f, {}) == exec::Outcome::returned(mir::Value::of_signed(mir::Type::I32, want)));
    CHECK(exec::eval_mir(compiler::optimize(f, 1), {}) == exec::eval_mir(f, {}));
    const auto bad = exec::eval_mir(compiler::optimize(f, 1, BugId::B1), {});
    REQUIRE(bad.is_return());
    // floor remainder: the result takes the divisor's sign
    CHECK(bad.value.as_signed() == ((-7 % 3) + 3) % 3);
    CHECK(bad.value.as_signed() != want);
    // below the activation level the bug is dormant
    CHECK(compiler::optimize(f, 0, BugId::B1) == f);
}

TEST_CASE("B1 also affects sdiv with a negative constant dividend") {
    const auto f = nvtest::mir("func @q() -> i8 { entry: %y = sdiv const.i8 -7, const.i8 2 ret %y }");
    CHECK(exec::eval_mir(compiler::optimize(f, 1), {}).value.as_signed() == -7 / 2);
    CHECK(exec::eval_mir(compiler::optimize(f, 1, BugId::B1), {}).value.as_signed() == -4);
}

TEST_CASE("B2 rewrites multiplication by three to a doubling from level 2") {
    const auto f = nvtest::mir("func @t(%x: i16) -> i16 { entry: %y = mul %x, const.i16 3 ret %y }");
    CHECK(equiv::check_equivalence(f, compiler::optimize(f, 1, BugId::B2)).kind == equiv::VerdictKind::Equivalent);
    const auto g = compiler::optimize(f, 2, BugId::B2);
    const auto v = equiv::check_equivalence(f, g);
    REQUIRE(v.kind == equiv::VerdictKind::NotEquivalent);
    // x = 0 agrees (0 == 0); the first disagreement in enumeration order is x = 1
    CHECK(v.input[0] == mir::Value::of(mir::Type::I16, 1));
    CHECK(v.reference.value.as_signed() == 3);
    CHECK(v.variant.value.as_signed() == 2);
}

TEST_CASE("B3 drops the true edge of a branch on a truncated comparison at level 3 only") {
    const auto f = witness("b3", "lowzero.cm");
    const std::vector<mir::Value> zero{mir::Value::of(mir::Type::I16, 0)};
    CHECK(exec::eval_mir(f, zero).value.as_signed() == 1);
    for (int level = 0; level <= 2; ++level)
        CHECK(equiv::check_equivalence(f, compiler::optimize(f, level, BugId::B3)).kind == equiv::VerdictKind::Equivalent);
    const auto g = compiler::optimize(f, 3, BugId::B3);
    CHECK(exec::eval_mir(g, zero).value.as_signed() == 0);
    CHECK(equiv::check_equivalence(f, compiler::optimize(f, 3)).kind == equiv::VerdictKind::Equivalent);
}

TEST_CASE("each bug changes a witness and stays silent") {
    struct Case {
        BugId bug;
        const char *dir, *file;
        std::int64_t input;
    };
    for (const auto &c : {Case{BugId::B1, "b1", "adjust.cm", 0}, Case{BugId::B2, "b2", "triple.cm", 1}, Case{BugId::B3, "b3", "lowzero.cm", 0}}) {
        CAPTURE(compiler::bug_name(c.bug));
        const auto f = witness(c.dir, c.file);
        const int level = compiler::activation_level(c.bug);
        mir::Function g;
        CHECK_NOTHROW(g = compiler::optimize(f, level, c.bug));
        CHECK(mir::validate_function(g).empty());
        const std::vector<mir::Value> in{mir::Value::of_signed(f.params[0].type, c.input)};
        const auto good = exec::run_bytecode(compiler::lower_to_bytecode(f), in).outcome;
        const auto bad = exec::run_bytecode(compiler::lower_to_bytecode(g), in).outcome;
        CHECK(good.is_return());
        CHECK(bad.is_return());
        CHECK_FALSE(bad == good);
    }
}

TEST_CASE("optimization preserves every corpus function at every level") {
    for (const auto &name : nvtest::corpus_names())
        for (auto d : {frontend::Dialect::Cm, frontend::Dialect::Gm}) {
            const auto f = nvtest::corpus_function(name, d);
            for (int level = 0; level <= 3; ++level) {
                CAPTURE(name);
                CAPTURE(level);
                const auto g = compiler::optimize(f, level);
                CHECK(mir::validate_function(g).empty());
                CHECK(equiv::check_equivalence(f, g).kind == equiv::VerdictKind::Equivalent);
            }
        }
}

TEST_CASE("optimization preserves generated functions") {
    nvtest::MirGen gen(7);
    for (int i = 0; i < 150; ++i) {
        const auto f = gen.next();
        CAPTURE(mir::print_mir(f));
        for (int level = 1; level <= 3; ++level) {
            const auto g = compiler::optimize(f, level);
            REQUIRE(mir::validate_function(g).empty());
            CHECK(agree_on_i8_sweep(f, g));
        }
    }
}

TEST_CASE("optimized output is idempotent under re-optimization") {
    for (const auto &name : nvtest::corpus_names()) {
        const auto g = compiler::optimize(nvtest::corpus_function(name), 3);
        CHECK(compiler::optimize(g, 3) == g);
    }
}

TEST_CASE("strength reduction turns multiplication by a power of two into a shift") {
    const auto f = nvtest::mir("func @f(%x: i32) -> i32 { entry: %y = mul %x, const.i32 8 ret %y }");
    const auto g = compiler::optimize(f, 3);
    CHECK(g.blocks[0].insts.at(0).op == mir::Opcode::Shl);
    CHECK(compiler::optimize(f, 2).blocks[0].insts.at(0).op == mir::Opcode::Mul);
}

TEST_CASE("identity lowers to ldloc and ret") {
    const auto u = compiler::lower_to_bytecode(nvtest::mir("func @id(%x: i32) -> i32 { entry: ret %x }"));
    REQUIRE(u.code.size() == 2);
    CHECK(u.code[0].op == bc::Op::LdLoc);
    CHECK(u.code[0].index == 0);
    CHECK(u.code[1].op == bc::Op::Ret);
}

TEST_CASE("nz lowers to a compare and a select") {
    const auto ops = mnemonics(compiler::lower_to_bytecode(nvtest::corpus_function("nz")));
    auto has = [&](std::string_view prefix) {
        return std::any_of(ops.begin(), ops.end(), [&](const std::string &m) { return m.rfind(prefix, 0) == 0; });
    };
    CHECK(has("cmp.ne"));
    CHECK(has("sel"));
}

TEST_CASE("bytecode agrees with the evaluator on every corpus function and level") {
    for (const auto &name : nvtest::corpus_names())
        for (auto d : {frontend::Dialect::Cm, frontend::Dialect::Gm}) {
            const auto f = nvtest::corpus_function(name, d);
            const exec::MirEvaluator ref(f);
            for (int level = 0; level <= 3; ++level) {
                const exec::Vm vm(compiler::lower_to_bytecode(compiler::optimize(f, level)));
                int mismatches = 0;
                for (const auto &in : nvtest::i8_sweep(nvtest::param_types(f)))
                    mismatches += !(ref.run(in) == vm.run(in).outcome);
                CAPTURE(name);
                CAPTURE(level);
                CHECK(mismatches == 0);
            }
        }
}

TEST_CASE("canonical hash") {
    const auto f = nvtest::corpus_function("nz");
    const auto u = compiler::lower_to_bytecode(f);
    const auto h = compiler::canonical_hash(u);
    CHECK(h.size() == 64);
    CHECK(h.find_first_not_of("0123456789abcdef") == std::string::npos);
    CHECK(compiler::canonical_hash(u) == h);

    SUBCASE("register and function renaming does not matter") {
        auto text = mir::print_mir(f);
        for (const auto &[from, to] : std::vector<std::pair<std::string, std::string>>{{"%x", "%input"}, {"%1", "%cond"}, {"@nz", "@other"}})
            for (std::size_t at = text.find(from); at != std::string::npos; at = text.find(from, at + to.size()))
                text.replace(at, from.size(), to);
        CHECK(compiler::canonical_hash(compiler::lower_to_bytecode(mir::parse_mir(text))) == h);
    }
    SUBCASE("the Gm twin hashes differently") {
        CHECK(compiler::canonical_hash(compiler::lower_to_bytecode(nvtest::corpus_function("nz", frontend::Dialect::Gm))) != h);
    }
}

TEST_CASE("sha256 of a known string") {
    // FIPS 180-2 test vector
    CHECK(compiler::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("disassembly is one opcode per line with a comment header") {
    const auto u = compiler::lower_to_bytecode(nvtest::mir("func @id(%x: i32) -> i32 { entry: ret %x }"));
    const auto text = bc::disassemble(u);
    CHECK(text.rfind("# id", 0) == 0);
    CHECK(bc::disassemble(u, false) == "ldloc 0\nret\n");
}

TEST_CASE("the verifier rejects unbalanced stacks and wild jumps") {
    bc::Unit u;
    u.name = "bad";
    u.params = {mir::Type::I8};
    u.ret = mir::Type::I8;
    u.locals = 1;
    u.code = {bc::Instr{bc::Op::Add, mir::Type::I8}, bc::Instr{bc::Op::Ret, mir::Type::I8}};
    CHECK_THROWS_AS(bc::verify(u), MalformedBytecode);
    bc::Instr jmp{bc::Op::Jmp};
    jmp.index = 40;
    u.code = {jmp};
    CHECK_THROWS_AS(bc::verify(u), MalformedBytecode);
}

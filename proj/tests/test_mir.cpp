#include "doctest.h"
#include "support.hpp"

#include "nv/error.hpp"
#include "nv/mir.hpp"

#include <algorithm>

using namespace nv;
using namespace nv::mir;

namespace {

bool has_diag(const std::vector<Diagnostic> &ds, std::string_view needle) {
    return std::any_of(ds.begin(), ds.end(), [&](const Diagnostic &d) { return d.message.find(needle) != std::string::npos; });
}

/// parse_mir validates as it builds; collect the diagnostics it raises.
std::vector<Diagnostic> diags_of(std::string_view text) {
    try {
        return validate_function(parse_mir(text));
    } catch (const ValidationError &e) {
        return e.diagnostics();
    }
}

} // namespace

TEST_CASE("parse identity") {
    const auto f = parse_mir("func @id(%x: i32) -> i32 { entry: ret %x }");
    CHECK(f.name == "id");
    CHECK(f.params.size() == 1);
    CHECK(f.params[0].type == Type::I32);
    CHECK(f.blocks.size() == 1);
    CHECK(f.blocks[0].term.kind == TermKind::Ret);
    CHECK(validate_function(f).empty());
}

TEST_CASE("parse add with immediate") {
    const auto f = parse_mir("func @f(%x: i32) -> i32 { entry: %y = add %x, const.i32 1 ret %y }");
    REQUIRE(f.blocks.size() == 1);
    // one instruction plus the terminator
    CHECK(f.blocks[0].insts.size() == 1);
    CHECK(f.blocks[0].insts[0].operands[1].imm == Value::of(Type::I32, 1));
}

TEST_CASE("add with one operand is rejected") {
    CHECK_THROWS_AS(parse_mir("func @f(%x: i32) -> i32 { entry: %y = add %x ret %y }"), ParseError);
}

TEST_CASE("negative immediates store the two's complement pattern") {
    const auto f = parse_mir("func @f(%x: i8) -> i8 { entry: %y = add %x, const.i8 -1 ret %y }");
    CHECK(f.blocks[0].insts[0].operands[1].imm.bits == 0xFF);
    CHECK_THROWS_AS(parse_mir("func @f(%x: i8) -> i8 { entry: %y = add %x, const.i8 300 ret %y }"), ParseError);
}

TEST_CASE("printer output for identity") {
    const auto f = parse_mir("func @id(%x: i32) -> i32 { entry: ret %x }");
    CHECK(print_mir(f) == "func @id(%x: i32) -> i32 {\nentry:\n  ret %x\n}\n");
}

TEST_CASE("whitespace and comments do not change printed text") {
    const auto a = parse_mir("func @f(%x: i16) -> i16 { entry: %y = mul %x, const.i16 3 ret %y }");
    const auto b = parse_mir("func   @f ( %x : i16 )->i16{\n; leading comment\nentry:\n\n   %y=mul %x ,const.i16 3 ; trailing\n ret %y}");
    CHECK(print_mir(a) == print_mir(b));
    CHECK(a == b);
}

TEST_CASE("validator accepts identity") { CHECK(validate_function(parse_mir("func @id(%x: i32) -> i32 { entry: ret %x }")).empty()); }

TEST_CASE("validator reports use before def") {
    CHECK(has_diag(diags_of("func @f(%x: i32) -> i32 { entry: %z = add %y, %x %y = add %x, %x ret %z }"), "use before def: %y"));
    auto f = parse_mir("func @f(%x: i32) -> i32 { entry: %y = add %x, %x %z = add %y, %x ret %z }");
    CHECK(validate_function(f).empty());
    std::swap(f.blocks[0].insts[0], f.blocks[0].insts[1]);
    CHECK(has_diag(validate_function(f), "use before def: %y"));
}

TEST_CASE("validator reports unknown label") {
    CHECK(has_diag(diags_of("func @f(%x: i1) -> i32 { entry: condbr %x, yes, nowhere yes: ret const.i32 1 }"), "unknown label"));
    auto f = parse_mir("func @f(%x: i1) -> i32 { entry: condbr %x, yes, no yes: ret const.i32 1 no: ret const.i32 0 }");
    f.blocks[0].term.else_target.label = "nowhere";
    CHECK(has_diag(validate_function(f), "unknown label"));
    CHECK_THROWS_AS(require_valid(f), ValidationError);
}

TEST_CASE("validator reports double assignment and type disagreement") {
    CHECK(has_diag(diags_of("func @f(%x: i8) -> i8 { entry: %y = add %x, %x %y = sub %x, %x ret %y }"),
                   "assigned more than once"));
    CHECK(has_diag(diags_of("func @f(%x: i8, %w: i16) -> i8 { entry: %y = add %x, %w ret %y }"),
                   "expected i8, got i16"));
    CHECK(has_diag(diags_of("func @f(%x: i8) -> i16 { entry: ret %x }"), "expected i16"));
}

TEST_CASE("block parameters carry values across edges") {
    const auto f = nvtest::mir(R"(
func @m(%x: i8) -> i8 {
entry:
  %c = icmp.slt %x, const.i8 0
  condbr %c, neg, join(%x)
neg:
  %n = sub const.i8 0, %x
  br join(%n)
join(%v: i8):
  ret %v
})");
    CHECK(f.blocks.size() == 3);
    CHECK(has_diag(diags_of(R"(
func @m(%x: i8) -> i8 {
entry:
  br join
join(%v: i8):
  ret %v
})"),
                   "passes 0"));
}

TEST_CASE("function size limit") {
    std::string text = "func @big(%x: i32) -> i32 {\nentry:\n";
    for (std::size_t i = 0; i <= kMaxInstructions; ++i) text += "  %r" + std::to_string(i) + " = add %x, const.i32 1\n";
    text += "  ret %x\n}\n";
    CHECK_THROWS_AS(parse_mir(text), ParseError);
}

TEST_CASE("intrinsics must be registered") {
    const auto *info = find_intrinsic("gm.divcheck");
    REQUIRE(info);
    CHECK(info->arity == 1);
    CHECK(has_diag(diags_of("func @f(%x: i8) -> i1 { entry: %c = intrinsic.gm.nothing %x ret %c }"),
                   "unregistered intrinsic"));
}

TEST_CASE("corpus functions round-trip through the printer") {
    for (const auto &name : nvtest::corpus_names())
        for (auto d : {frontend::Dialect::Cm, frontend::Dialect::Gm}) {
            CAPTURE(name);
            const auto f = nvtest::corpus_function(name, d);
            const auto text = print_mir(f);
            const auto g = parse_mir(text);
            CHECK(g == f);
            CHECK(print_mir(g) == text);
        }
}

TEST_CASE("generated functions are valid and round-trip") {
    nvtest::MirGen gen(11);
    for (int i = 0; i < 300; ++i) {
        const auto f = gen.next();
        const auto diags = validate_function(f);
        CAPTURE(print_mir(f));
        REQUIRE(diags.empty());
        CHECK(parse_mir(print_mir(f)) == f);
    }
}

TEST_CASE("reverse post order starts at entry and skips unreachable blocks") {
    const auto f = nvtest::mir(R"(
func @f(%x: i8) -> i8 {
entry:
  br b
dead:
  ret const.i8 0
b:
  ret %x
})");
    const auto order = reverse_post_order(f);
    REQUIRE(order.size() == 2);
    CHECK(order[0] == 0);
    CHECK(f.blocks[order[1]].label == "b");
}

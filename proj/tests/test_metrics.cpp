#include "doctest.h"
#include "support.hpp"

#include "nv/compiler.hpp"
#include "nv/diversify.hpp"
#include "nv/error.hpp"
#include "nv/metrics.hpp"

#include <algorithm>
#include <iterator>
#include <random>

using namespace nv;
using frontend::Dialect;
using mir::Type;
using mir::Value;

namespace {

using Set = std::set<std::string>;

double jaccard_oracle(const Set &a, const Set &b) {
    Set i, u;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::inserter(i, i.end()));
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::inserter(u, u.end()));
    return u.empty() ? 1.0 : double(i.size()) / double(u.size());
}

Set random_set(std::mt19937_64 &rng) {
    static const char *ops[] = {"add", "sub", "mul", "jz", "jmp", "ret", "ldloc", "stloc", "shl", "xor"};
    Set s;
    for (const char *op : ops)
        if (rng() % 3 == 0) s.insert(op);
    return s;
}

mir::Function cm(const std::string &src) { return frontend::compile_source(src, Dialect::Cm); }

std::string hash_at(const mir::Function &f, int level) {
    return compiler::canonical_hash(compiler::lower_to_bytecode(compiler::optimize(f, level)));
}

/// Pairwise count: variant i is unique when no earlier variant and not the reference shares its hash.
int unique_oracle(const mir::Function &ref, const std::vector<mir::Function> &vs, int level) {
    int n = 0;
    for (std::size_t i = 0; i < vs.size(); ++i) {
        const auto h = hash_at(vs[i], level);
        bool dup = h == hash_at(ref, level);
        for (std::size_t j = 0; j < i && !dup; ++j) dup = hash_at(vs[j], level) == h;
        n += !dup;
    }
    return n;
}

std::vector<std::vector<Value>> sweep_i16() {
    std::vector<std::vector<Value>> out;
    for (int x = -64; x < 64; ++x) out.push_back({Value::of_signed(Type::I16, x)});
    return out;
}

} // namespace

TEST_CASE("jaccard on small sets") {
    CHECK(metrics::jaccard({"a", "b", "c"}, {"a", "b", "d"}) == doctest::Approx(0.5));
    CHECK(metrics::jaccard({}, {}) == 1.0);
    CHECK(metrics::jaccard({"a"}, {}) == 0.0);
    CHECK(metrics::jaccard({"a", "b"}, {"b", "a"}) == 1.0);
    CHECK(metrics::jaccard({"a"}, {"b"}) == 0.0);
}

TEST_CASE("jaccard axioms on random sets") {
    std::mt19937_64 rng(17);
    for (int i = 0; i < 500; ++i) {
        const auto a = random_set(rng), b = random_set(rng);
        const double j = metrics::jaccard(a, b);
        CHECK(j == doctest::Approx(jaccard_oracle(a, b)));
        CHECK(j == metrics::jaccard(b, a));
        CHECK(j >= 0.0);
        CHECK(j <= 1.0);
        CHECK(metrics::jaccard(a, a) == 1.0);
        CHECK((j == 1.0) == (a == b));
    }
}

TEST_CASE("a copy of the reference is never unique") {
    const auto ref = nvtest::corpus_function("nz");
    const auto row = metrics::static_uniqueness(ref, {ref, ref});
    CHECK(row.total == 2);
    CHECK(row.unique_ir == 0);
    CHECK(row.unique_at_level == std::vector<int>{0, 0, 0, 0});
}

TEST_CASE("renaming alone does not make a variant unique") {
    const auto ref = cm("int16 nz(int16 x) { return (x != 0) ? -1 : 0; }");
    const auto renamed = cm("int16 nz(int16 value) { return (value != 0) ? -1 : 0; }");
    const auto row = metrics::static_uniqueness(ref, {renamed});
    CHECK(row.unique_ir == 0);
    CHECK(row.unique_at_level == std::vector<int>{0, 0, 0, 0});
}

TEST_CASE("an xor with zero is unique only before folding") {
    const auto ref = nvtest::corpus_function("nz");
    const auto v = cm("int16 nz(int16 x) { return ((x != 0) ? -1 : 0) ^ 0; }");
    const auto row = metrics::static_uniqueness(ref, {v});
    CHECK(row.unique_ir == 1);
    CHECK(row.unique_at_level == std::vector<int>{1, 0, 0, 0});
    CHECK(row.variant_unique_at_level[0] == std::vector<bool>{true, false, false, false});
}

TEST_CASE("the hand-written Cm/Gm nz pair stays unique at every level") {
    const auto row = metrics::static_uniqueness(nvtest::corpus_function("nz"), {nvtest::corpus_function("nz", Dialect::Gm)});
    CHECK(row.unique_ir == 1);
    CHECK(row.unique_at_level == std::vector<int>{1, 1, 1, 1});
}

TEST_CASE("duplicates count once") {
    const auto ref = nvtest::corpus_function("nz");
    const auto v = cm("int16 nz(int16 x) { if (x == 0) return 0; return -1; }");
    const auto row = metrics::static_uniqueness(ref, {v, v, ref, v});
    CHECK(row.variant_unique_ir == std::vector<bool>{true, false, false, false});
    CHECK(row.unique_ir == 1);
}

TEST_CASE("static uniqueness agrees with a pairwise count") {
    for (const auto &name : nvtest::corpus_names()) {
        CAPTURE(name);
        const auto ref = nvtest::corpus_function(name);
        diversify::ProviderConfig cfg;
        cfg.seed = 6;
        cfg.n_variants = 8;
        std::vector<mir::Function> vs;
        for (const auto &v : diversify::diversify(nvtest::corpus_source(name, Dialect::Cm), name, cfg).variants) {
            try {
                vs.push_back(frontend::compile_source(v.source_text, v.dialect));
            } catch (const Error &) {
            }
        }
        const auto row = metrics::static_uniqueness(ref, vs);
        for (std::size_t l = 0; l < 4; ++l) CHECK(row.unique_at_level[l] == unique_oracle(ref, vs, static_cast<int>(l)));
        CHECK(row.reference_hashes[2] == hash_at(ref, 2));
        const auto j = metrics::uniqueness_to_json({row});
        CHECK(j.at("totals").at("unique").at("O1") == row.unique_at_level[1]);
        CHECK(j.at("functions")[0].at("variants").size() == vs.size());
    }
}

TEST_CASE("dynamic profile of the reference against itself") {
    const auto ref = nvtest::corpus_function("nz");
    const auto r = metrics::dynamic_report(ref, {ref}, {"self"}, sweep_i16());
    REQUIRE(r.variants.size() == 1);
    CHECK(r.variants[0].jaccard_vs_reference == 1.0);
    CHECK(r.variants[0].profile == r.reference.profile);
    CHECK(r.variants[0].label == "self");
    CHECK(r.reference.label == "reference");
}

TEST_CASE("Cm and Gm nz execute different opcodes") {
    const auto cm_nz = nvtest::corpus_function("nz");
    const auto gm_nz = nvtest::corpus_function("nz", Dialect::Gm);
    const auto inputs = sweep_i16();
    const auto r = metrics::dynamic_report(cm_nz, {gm_nz}, {"pair"}, inputs);
    const auto a = r.reference.opcodes(), b = r.variants[0].opcodes();
    CHECK(r.variants[0].jaccard_vs_reference < 1.0);
    CHECK(r.variants[0].jaccard_vs_reference == doctest::Approx(jaccard_oracle(a, b)));
    CHECK(b.count("jz") + b.count("jnz") > 0);
    CHECK(a.count("jz") + a.count("jnz") + a.count("jmp") == 0);

    // totals are sums of per-input traces
    const exec::Vm vm(compiler::lower_to_bytecode(gm_nz));
    std::uint64_t total = 0;
    for (const auto &in : inputs) total += vm.run(in, exec::kDefaultFuel, true).trace->total();
    CHECK(r.variants[0].total == total);
}

TEST_CASE("dynamic rows, csv and json") {
    const auto ref = nvtest::corpus_function("nz");
    const std::vector<mir::Function> vs{nvtest::corpus_function("nz", Dialect::Gm), ref};
    const auto r = metrics::dynamic_report(ref, vs, {"gm"}, sweep_i16());
    Set all = r.reference.opcodes();
    for (const auto &v : r.variants) all.merge(v.opcodes());
    CHECK(r.rows().size() == (1 + vs.size()) * all.size());
    CHECK(r.variants[1].label == "variant 2");
    const auto csv = metrics::dynamic_csv(r);
    CHECK(csv.rfind("series,opcode,count\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(r.rows().size() + 1));
    const auto j = metrics::dynamic_to_json(r);
    CHECK(j.at("variants").size() == 2);
    CHECK(j.at("reference").at("total") == r.reference.total);

    CHECK_THROWS_AS(metrics::dynamic_report(ref, {nvtest::corpus_function("ctz8")}, {}, sweep_i16()), ArgMismatch);
}

#include "doctest.h"
#include "support.hpp"

#include "nv/cli.hpp"
#include "nv/diversify.hpp"
#include "nv/project.hpp"
#include "nv/workspace.hpp"

#include <iostream>
#include <map>
#include <sstream>

using namespace nv;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code = -1;
    std::string out, err;
};

/// Runs the CLI in-process with stdout and stderr captured.
Result nv_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "nv");
    std::vector<char *> argv;
    for (auto &a : args) argv.push_back(a.data());
    std::ostringstream out, err;
    auto *old_out = std::cout.rdbuf(out.rdbuf());
    auto *old_err = std::cerr.rdbuf(err.rdbuf());
    Result r;
    r.code = cli::dispatch(static_cast<int>(argv.size()), argv.data());
    std::cout.rdbuf(old_out);
    std::cerr.rdbuf(old_err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

fs::path copy_fixture(const nvtest::TempDir &tmp, const fs::path &from) {
    const auto to = tmp.path() / from.filename();
    fs::copy(from, to, fs::copy_options::recursive);
    return to;
}

bool contains(const std::string &s, const std::string &needle) { return s.find(needle) != std::string::npos; }

/// Relative path -> content for every regular file under dir.
std::map<std::string, std::string> snapshot(const fs::path &dir) {
    std::map<std::string, std::string> out;
    for (const auto &e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = project::read_file(e.path());
    return out;
}

} // namespace

TEST_CASE("usage errors exit 1") {
    CHECK(nv_cli({}).code == 1);
    CHECK(nv_cli({"frobnicate"}).code == 1);
    CHECK(nv_cli({"compile"}).code == 1);
    CHECK(nv_cli({"compile", "x.cm", "--level", "7"}).code == 1);
    CHECK(nv_cli({"--help"}).code == 0);
    const auto missing = nv_cli({"parse", "/nonexistent/file.cm"});
    CHECK(missing.code == 1);
    CHECK(contains(missing.err, "error: "));
}

TEST_CASE("parse and compile") {
    const auto src = (nvtest::corpus_dir("nz") / "nz.cm").string();
    const auto p = nv_cli({"parse", src});
    CHECK(p.code == 0);
    CHECK(p.out == "ok: nz (i16) -> i16\n");
    const auto m = nv_cli({"compile", src, "-O", "2", "--emit", "mir"});
    CHECK(m.code == 0);
    CHECK(m.out.rfind("func @nz(", 0) == 0);
    const auto b = nv_cli({"compile", src, "--emit", "bytecode"});
    CHECK(b.out.rfind("# sha256 ", 0) == 0);
    CHECK(nv_cli({"compile", src, "--emit", "disasm"}).code == 0);
    CHECK(nv_cli({"compile", src, "--inject", "B7"}).code == 1);
}

TEST_CASE("run a single function") {
    const auto nz = (nvtest::corpus_dir("nz") / "nz.cm").string();
    const auto r = nv_cli({"run", nz, "--args", "-5"});
    CHECK(r.code == 0);
    CHECK(r.out == "Return(-1)\n");
    CHECK(nv_cli({"run", nz, "--args", "1,2"}).code == 1);
    CHECK(nv_cli({"run", nz, "--args", "70000"}).code == 1);
    CHECK(nv_cli({"run", nz, "--args", "zero"}).code == 1);

    const auto divmix = (nvtest::corpus_dir("divmix") / "divmix.cm").string();
    const auto t = nv_cli({"run", divmix, "--args", "5,0"});
    CHECK(t.code == 41);
    CHECK(contains(t.err, "trap at input (5, 0)"));
}

TEST_CASE("pipeline commands and bundle execution") {
    nvtest::TempDir tmp("cli-b2");
    const auto proj = copy_fixture(tmp, nvtest::fixtures() / "witness/b2").string();
    CHECK(nv_cli({"diversify", proj}).code == 0);
    const auto v = nv_cli({"validate", proj});
    CHECK(v.code == 0);
    CHECK(v.out.rfind("generated          10\n", 0) == 0);
    const auto h = nv_cli({"harness", proj, "--max-versions", "3"});
    CHECK(h.code == 0);
    CHECK(contains(h.out, "3-version bundle for triple"));

    const auto bundle = (fs::path(proj) / "bundle/triple").string();
    const auto ok = nv_cli({"run", bundle, "--args", "7"});
    CHECK(ok.code == 0);
    CHECK(ok.out == "Return(21)\n");
    const auto bad = nv_cli({"run", bundle, "--args", "1", "-O", "2", "--inject", "B2", "--inject-into", "1"});
    CHECK(bad.code == 42);
    CHECK(bad.out == "Trap(nversion_divergence)\n");
    CHECK(bad.err == "n-version divergence: v1=2 v2=3 at input (1)\n");

    CHECK(nv_cli({"metrics", "static", proj}).code == 0);
    CHECK(fs::exists(fs::path(proj) / "reports/uniqueness.json"));
    CHECK(nv_cli({"metrics", "dynamic", proj}).code == 0);
    CHECK(fs::exists(fs::path(proj) / "reports/dynamic.csv"));
    CHECK(nv_cli({"metrics", "sideways", proj}).code == 1);
}

TEST_CASE("no validated variants exits 2") {
    nvtest::TempDir tmp("cli-empty");
    const auto proj = copy_fixture(tmp, nvtest::fixtures() / "witness/b2");
    CHECK(nv_cli({"validate", proj.string()}).code == 2);  // nothing diversified yet

    const auto p = project::load_project(proj);
    diversify::Batch b;
    b.function = p.target;
    for (int i = 1; i <= 3; ++i) {
        diversify::VariantSource v;
        v.index = i;
        v.source_text = "int16 triple(int16 x) { return x * " + std::to_string(i + 3) + "; }\n";
        b.variants.push_back(v);
    }
    diversify::write_batch(workspace::variants_dir(p), b);
    const auto v = nv_cli({"validate", proj.string()});
    CHECK(v.code == 2);
    CHECK(contains(v.out, "equivalence        0\n"));
    CHECK(nv_cli({"harness", proj.string()}).code == 2);
}

TEST_CASE("demo-mitigate") {
    nvtest::TempDir tmp("cli-demo");
    const auto b1 = nv_cli({"demo-mitigate", "--bug", "B1", "--out", (tmp.path() / "b1").string()});
    CHECK(b1.code == 0);
    CHECK(contains(b1.out, "mitigated\n"));
    CHECK(fs::exists(tmp.path() / "b1/mitigation.json"));
    const auto j = nv_cli({"demo-mitigate", "--bug", "B3", "--json", "--out", (tmp.path() / "b3").string()});
    CHECK(j.code == 0);
    CHECK(nlohmann::json::parse(j.out).at("verdict") == "mitigated");
    const auto none = nv_cli({"demo-mitigate", "--bug", "none", "--out", (tmp.path() / "none").string()});
    CHECK(none.code == 1);
    CHECK(contains(none.out, "nothing to mitigate"));
    CHECK(nv_cli({"demo-mitigate", "--bug", "B4"}).code == 1);
}

TEST_CASE("gen-suite reproduces the committed suite") {
    nvtest::TempDir tmp("cli-suite");
    const auto proj = copy_fixture(tmp, nvtest::corpus_dir("ctz8"));
    const auto before = project::read_file(proj / "suite.json");
    CHECK(nv_cli({"gen-suite", proj.string(), "--seed", "1"}).code == 0);
    CHECK(project::read_file(proj / "suite.json") == before);
}

TEST_CASE("workspace output is byte-identical across runs") {
    nvtest::TempDir a("cli-det-a"), b("cli-det-b");
    std::map<std::string, std::string> snaps[2];
    int i = 0;
    for (const auto *tmp : {&a, &b}) {
        const auto proj = copy_fixture(*tmp, nvtest::corpus_dir("sign16")).string();
        for (const std::vector<std::string> &cmd :
             std::vector<std::vector<std::string>>{{"diversify", proj}, {"validate", proj}, {"harness", proj, "-O", "1"},
                                                   {"metrics", "static", proj}, {"metrics", "dynamic", proj}})
            REQUIRE(nv_cli(cmd).code == 0);
        snaps[i++] = snapshot(proj);
    }
    CHECK(snaps[0].size() > 10);
    CHECK(snaps[0] == snaps[1]);
}

// Acceptance run: one PASS/FAIL line per criterion. Exit status is the number of failures.

#include "support.hpp"

#include "nv/cli.hpp"
#include "nv/compiler.hpp"
#include "nv/equiv.hpp"
#include "nv/workspace.hpp"

#include <chrono>
#include <cstdio>
#include <iostream>
#include <map>
#include <sstream>

using namespace nv;
namespace fs = std::filesystem;
using frontend::Dialect;
using mir::Type;
using mir::Value;

namespace {

// Pinned limits.
constexpr double kDemoSeconds = 10;
constexpr double kFunnelSeconds = 60;
constexpr double kSoundnessSeconds = 120;
constexpr double kEquivalentShare = 0.80;
constexpr std::size_t kVersionsB12 = 11, kVersionsB3 = 3;
constexpr int kFunnelSeeds = 5, kFunnelN = 10;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

struct Line {
    int id;
    std::string name;
    bool pass;
    std::string detail;
};

/// Every input tuple of the parameter types, first parameter most significant.
std::vector<std::vector<Value>> full_domain(const std::vector<Type> &params) {
    std::vector<std::vector<Value>> out{{}};
    for (auto t : params) {
        std::vector<std::vector<Value>> next;
        const std::uint64_t n = std::uint64_t{1} << mir::bit_width(t);
        for (const auto &prefix : out)
            for (std::uint64_t v = 0; v < n; ++v) {
                auto tuple = prefix;
                tuple.push_back(Value::of(t, v));
                next.push_back(std::move(tuple));
            }
        out = std::move(next);
    }
    return out;
}

struct Captured {
    int code;
    std::string out, err;
};

Captured cli(std::vector<std::string> args) {
    args.insert(args.begin(), "nv");
    std::vector<char *> argv;
    for (auto &a : args) argv.push_back(a.data());
    std::ostringstream out, err;
    auto *o = std::cout.rdbuf(out.rdbuf());
    auto *e = std::cerr.rdbuf(err.rdbuf());
    const int code = cli::dispatch(static_cast<int>(argv.size()), argv.data());
    std::cout.rdbuf(o);
    std::cerr.rdbuf(e);
    return {code, out.str(), err.str()};
}

std::string join_args(const std::vector<Value> &in) {
    std::string s;
    for (std::size_t i = 0; i < in.size(); ++i) s += (i ? "," : "") + std::to_string(in[i].as_signed());
    return s;
}

std::map<std::string, std::string> snapshot(const fs::path &dir) {
    std::map<std::string, std::string> out;
    for (const auto &e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = project::read_file(e.path());
    return out;
}

class Evaluation {
public:
    explicit Evaluation(fs::path work) : work_(std::move(work)) {
        fs::remove_all(work_);
        fs::create_directories(work_);
        fs::copy(nvtest::fixtures(), work_ / "fixtures", fs::copy_options::recursive);
        for (const auto &name : nvtest::corpus_names()) corpus_.push_back(project::load_project(work_ / "fixtures/corpus" / name));
        for (const char *w : {"b1", "b2", "b3"}) witnesses_.push_back(project::load_project(work_ / "fixtures/witness" / w));
    }

    std::vector<Line> run() {
        std::vector<Line> out;
        out.push_back(mitigation());
        out.push_back(funnel());
        out.push_back(soundness());
        out.push_back(optimizer());
        out.push_back(static_uniqueness());
        out.push_back(dynamic_diversity());
        out.push_back(transparency());
        project::write_file(work_ / "summary.json", summary_.dump(2) + "\n");
        return out;
    }

private:
    // 1. The demo mitigates each bug; the CLI shows the same baseline and exit 42 independently.
    Line mitigation() {
        bool ok = true;
        std::string detail;
        for (auto bug : {compiler::BugId::B1, compiler::BugId::B2, compiler::BugId::B3}) {
            const std::string name(compiler::bug_name(bug));
            const auto t0 = Clock::now();
            const auto dir = work_ / "demo" / name;
            const auto r = workspace::demo_mitigate(bug, work_ / "fixtures", dir);
            const double secs = seconds_since(t0);
            const std::size_t want = bug == compiler::BugId::B3 ? kVersionsB3 : kVersionsB12;

            const auto &w = witnesses_[static_cast<int>(bug)];
            const auto level = std::to_string(compiler::activation_level(bug));
            const auto src = (w.manifest.root / w.manifest.sources[0].path).string();
            const auto single = cli({"run", src, "--args", join_args(r.input), "-O", level, "--inject", name});
            const auto hardened = cli({"run", (dir / "bundle" / w.target).string(), "--args", join_args(r.input)});

            const bool silent_wrong = r.baseline.is_return() && !exec::outcomes_agree(r.baseline, r.expected) &&
                                      single.code == 0 && single.out == exec::to_string(r.baseline) + "\n";
            const bool caught = r.hardened == exec::Outcome::trapped(TrapReason::NVersionDivergence) && hardened.code == 42;
            const bool this_ok = r.mitigated && silent_wrong && caught && r.versions == want && secs < kDemoSeconds;
            ok = ok && this_ok;
            char buf[200];
            std::snprintf(buf, sizeof buf, "%s%s N=%zu baseline %s expected %s exit %d %.2fs", detail.empty() ? "" : "; ",
                          name.c_str(), r.versions, exec::to_string(r.baseline).c_str(), exec::to_string(r.expected).c_str(),
                          hardened.code, secs);
            detail += buf;
            summary_["mitigation"][name] = workspace::mitigation_to_json(r);
        }
        return {1, "mitigation", ok, detail + " (limit " + std::to_string(int(kDemoSeconds)) + "s each)"};
    }

    // 2. Funnel counts never grow, some variant is rejected late, and most functions keep an equivalent variant.
    Line funnel() {
        const auto t0 = Clock::now();
        bool monotone = true;
        int late_rejections = 0, functions_with_equivalent = 0;
        for (const auto &p : corpus_) {
            bool every_seed = true;
            for (int seed = 1; seed <= kFunnelSeeds; ++seed) {
                auto cfg = workspace::provider_config(p);
                cfg.seed = static_cast<std::uint64_t>(seed);
                cfg.n_variants = kFunnelN;
                const auto b = diversify::diversify(p.reference_source(), p.target, cfg);
                const auto r = validate::run_validation(p, b.variants);
                const auto &f = r.funnel;
                monotone = monotone && static_cast<int>(b.variants.size()) >= f.isolation && f.isolation >= f.project &&
                           f.project >= f.tests && f.tests >= f.equivalence;
                for (const auto &v : r.variants) {
                    const auto last = v.filters.back();
                    late_rejections += !last.passed && (last.filter == validate::Filter::Tests || last.filter == validate::Filter::Equivalence);
                }
                every_seed = every_seed && f.equivalence >= 1;
                summary_["funnel"][p.target].push_back({static_cast<int>(b.variants.size()), f.isolation, f.project, f.tests, f.equivalence});
            }
            functions_with_equivalent += every_seed;
        }
        const double share = double(functions_with_equivalent) / double(corpus_.size());
        const double secs = seconds_since(t0);
        char buf[200];
        std::snprintf(buf, sizeof buf, "monotone=%s late rejections=%d functions with >=1 equivalent per seed %d/%zu (%.2f >= %.2f) %.1fs < %.0fs",
                      monotone ? "yes" : "no", late_rejections, functions_with_equivalent, corpus_.size(), share, kEquivalentShare,
                      secs, kFunnelSeconds);
        return {2, "validation funnel", monotone && late_rejections > 0 && share >= kEquivalentShare && secs < kFunnelSeconds, buf};
    }

    // 3. Equivalent verdicts re-enumerated on the bytecode engine; counterexamples replayed.
    Line soundness() {
        const auto t0 = Clock::now();
        std::vector<std::pair<mir::Function, mir::Function>> pairs;
        for (auto &p : corpus_) {
            pairs.emplace_back(p.reference(), *workspace::pair_function(p));
            // seed-1 batch through the workspace so later criteria reuse it
            workspace::run_diversify(p, workspace::provider_config(p));
            const auto r = workspace::run_validate(p);
            for (const auto &v : r.variants)
                if (v.function && mir::signature_of(*v.function) == mir::signature_of(p.reference()))
                    pairs.emplace_back(p.reference(), *v.function);
        }
        for (auto &w : witnesses_) {
            workspace::run_diversify(w, workspace::provider_config(w));
            workspace::run_validate(w);
            for (auto bug : {compiler::BugId::B1, compiler::BugId::B2, compiler::BugId::B3})
                pairs.emplace_back(w.reference(), compiler::optimize(w.reference(), compiler::kMaxLevel, bug));
        }
        int equivalent = 0, not_equivalent = 0, unknown = 0, mismatches = 0, bad_replays = 0;
        for (const auto &[f, g] : pairs) {
            const auto v = equiv::check_equivalence(f, g);
            if (v.kind == equiv::VerdictKind::Unknown) {
                ++unknown;
            } else if (v.kind == equiv::VerdictKind::Equivalent) {
                ++equivalent;
                const exec::Vm a(compiler::lower_to_bytecode(f)), b(compiler::lower_to_bytecode(g));
                for (const auto &in : full_domain(mir::signature_of(f).params))
                    mismatches += !exec::outcomes_agree(a.run(in).outcome, b.run(in).outcome);
            } else {
                ++not_equivalent;
                const exec::Vm a(compiler::lower_to_bytecode(f)), b(compiler::lower_to_bytecode(g));
                const auto ra = a.run(v.input).outcome, rb = b.run(v.input).outcome;
                bad_replays += !(exec::eval_mir(f, v.input) == v.reference && exec::eval_mir(g, v.input) == v.variant &&
                                 exec::outcomes_agree(ra, v.reference) && exec::outcomes_agree(rb, v.variant) &&
                                 !exec::outcomes_agree(ra, rb));
            }
        }
        const double secs = seconds_since(t0);
        summary_["soundness"] = {{"equivalent", equivalent}, {"not_equivalent", not_equivalent}, {"unknown", unknown}};
        char buf[200];
        std::snprintf(buf, sizeof buf, "%d equivalent pairs, %d mismatches; %d counterexamples, %d failed replays; %d unknown; %.1fs < %.0fs",
                      equivalent, mismatches, not_equivalent, bad_replays, unknown, secs, kSoundnessSeconds);
        return {3, "equivalence soundness", equivalent > 0 && not_equivalent > 0 && mismatches == 0 && bad_replays == 0 &&
                                                unknown == 0 && secs < kSoundnessSeconds, buf};
    }

    // 4. Clean levels preserve meaning; each bug miscompiles something without raising a diagnostic.
    Line optimizer() {
        std::vector<mir::Function> fixtures;
        for (const auto &p : corpus_) {
            fixtures.push_back(p.reference());
            fixtures.push_back(*workspace::pair_function(p));
        }
        for (const auto &w : witnesses_) fixtures.push_back(w.reference());
        int clean_failures = 0;
        for (const auto &f : fixtures)
            for (int k = 0; k <= compiler::kMaxLevel; ++k) clean_failures += !equiv::check_equivalence(f, compiler::optimize(f, k)).equivalent();
        std::string detail = "clean failures " + std::to_string(clean_failures) + "/" + std::to_string(fixtures.size() * 4);
        bool potent = true, stealthy = true;
        for (auto bug : {compiler::BugId::B1, compiler::BugId::B2, compiler::BugId::B3}) {
            int broken = 0, diagnostics = 0;
            for (const auto &f : fixtures)
                for (int k = 0; k <= compiler::kMaxLevel; ++k) {
                    try {
                        const auto g = compiler::optimize(f, k, bug);
                        diagnostics += static_cast<int>(mir::validate_function(g).size());
                        compiler::lower_to_bytecode(g);
                        broken += equiv::check_equivalence(f, g).kind == equiv::VerdictKind::NotEquivalent;
                    } catch (const Error &) {
                        ++diagnostics;
                    }
                }
            potent = potent && broken > 0;
            stealthy = stealthy && diagnostics == 0;
            detail += "; " + std::string(compiler::bug_name(bug)) + " breaks " + std::to_string(broken) + ", diagnostics " +
                      std::to_string(diagnostics);
            summary_["optimizer"][std::string(compiler::bug_name(bug))] = broken;
        }
        return {4, "optimizer correctness", clean_failures == 0 && potent && stealthy, detail};
    }

    // 5. Diversity undone by optimization exists, a hand-written pair survives every level,
    //    and the classification matches a pairwise hash comparison on a second computation.
    Line static_uniqueness() {
        bool undone = false, pair_survives = false, exact = true, deterministic = true;
        for (const auto &p : corpus_) {
            const auto rows = workspace::run_static_metrics(p);
            std::vector<mir::Function> vs;
            for (auto &c : workspace::validated_candidates(p)) vs.push_back(c.function);
            const auto again = metrics::static_uniqueness(p.reference(), vs);
            deterministic = deterministic && metrics::uniqueness_to_json({again}) == metrics::uniqueness_to_json({rows[0]});
            for (std::size_t i = 0; i < vs.size(); ++i) {
                const auto &u = rows[0].variant_unique_at_level[i];
                undone = undone || (u[0] && !(u[1] && u[2] && u[3]));
                for (int l = 0; l < 4; ++l) {
                    const auto h = compiler::canonical_hash(compiler::lower_to_bytecode(compiler::optimize(vs[i], l)));
                    bool dup = h == compiler::canonical_hash(compiler::lower_to_bytecode(compiler::optimize(p.reference(), l)));
                    for (std::size_t j = 0; j < i && !dup; ++j)
                        dup = h == compiler::canonical_hash(compiler::lower_to_bytecode(compiler::optimize(vs[j], l)));
                    exact = exact && u[l] == !dup;
                }
            }
            if (rows.size() > 1) pair_survives = pair_survives || rows[1].unique_at_level == std::vector<int>{1, 1, 1, 1};
            summary_["static"][p.target] = metrics::uniqueness_to_json(rows).at("totals");
        }
        std::string detail = std::string("unique at O0 only: ") + (undone ? "found" : "none") +
                             "; pair unique at O0..O3: " + (pair_survives ? "found" : "none") +
                             "; pairwise oracle " + (exact ? "agrees" : "disagrees") + "; recomputation " +
                             (deterministic ? "identical" : "differs");
        return {5, "static uniqueness", undone && pair_survives && exact && deterministic, detail};
    }

    // 6. Same-language variants stay closer to the reference's executed opcodes than cross-language ones.
    Line dynamic_diversity() {
        std::vector<double> cm_values, gm_values;
        bool in_range = true, self_ok = true;
        for (auto &p : corpus_) {
            std::vector<std::vector<Value>> inputs;
            for (const auto &c : p.suite.cases) inputs.push_back(c.args);
            const auto r = workspace::run_dynamic_metrics(p);
            for (const auto &v : r.variants) {
                in_range = in_range && v.jaccard_vs_reference >= 0 && v.jaccard_vs_reference <= 1;
                if (v.label != "pair") cm_values.push_back(v.jaccard_vs_reference);
            }
            const auto self = metrics::dynamic_report(p.reference(), {p.reference()}, {"self"}, inputs, p.suite.fuel);
            self_ok = self_ok && self.variants[0].jaccard_vs_reference == 1.0 && self.variants[0].profile == self.reference.profile;

            auto cfg = workspace::provider_config(p);
            cfg.out_dialect = Dialect::Gm;
            const auto b = diversify::diversify(p.reference_source(), p.target, cfg);
            const auto report = validate::run_validation(p, b.variants);
            std::vector<mir::Function> gms;
            for (const auto *rec : report.passed()) gms.push_back(*rec->function);
            const auto g = metrics::dynamic_report(p.reference(), gms, {}, inputs, p.suite.fuel);
            for (const auto &v : g.variants) {
                in_range = in_range && v.jaccard_vs_reference >= 0 && v.jaccard_vs_reference <= 1;
                gm_values.push_back(v.jaccard_vs_reference);
            }
            project::write_file(workspace::reports_dir(p) / "dynamic_gm.json", metrics::dynamic_to_json(g).dump(2) + "\n");
        }
        const auto mean = [](const std::vector<double> &v) {
            double s = 0;
            for (double x : v) s += x;
            return v.empty() ? 0.0 : s / double(v.size());
        };
        const double cm = mean(cm_values), gm = mean(gm_values);
        summary_["dynamic"] = {{"cm_mean", cm}, {"gm_mean", gm}, {"cm_n", cm_values.size()}, {"gm_n", gm_values.size()}};
        char buf[200];
        std::snprintf(buf, sizeof buf, "mean J(cm)=%.4f (n=%zu) > mean J(gm)=%.4f (n=%zu); values in [0,1]: %s; self J=1 with equal profiles: %s",
                      cm, cm_values.size(), gm, gm_values.size(), in_range ? "yes" : "no", self_ok ? "yes" : "no");
        return {6, "dynamic diversity", !cm_values.empty() && !gm_values.empty() && cm > gm && in_range && self_ok, buf};
    }

    // 7. Every clean bundle matches the reference on the whole i8 domain at every level.
    Line transparency() {
        std::size_t bundles = 0, points = 0, mismatches = 0;
        std::vector<project::Project *> all;
        for (auto &p : corpus_) all.push_back(&p);
        for (auto &w : witnesses_) all.push_back(&w);
        for (auto *p : all) {
            const auto b = workspace::run_harness(*p, {});
            ++bundles;
            const exec::MirEvaluator ref(p->reference());
            const auto inputs = nvtest::i8_sweep(nvtest::param_types(p->reference()));
            for (int level = 0; level <= compiler::kMaxLevel; ++level) {
                const auto lb = harness::lower_bundle(b, {level, std::nullopt, {}});
                for (const auto &in : inputs) {
                    ++points;
                    mismatches += !(harness::run_wrapper(lb, in).outcome == ref.run(in));
                }
            }
        }
        summary_["transparency"] = {{"bundles", bundles}, {"points", points}, {"mismatches", mismatches}};
        return {7, "transparency", bundles > 0 && mismatches == 0,
                std::to_string(bundles) + " bundles, " + std::to_string(points) + " input/level points, " +
                    std::to_string(mismatches) + " mismatches (required 0)"};
    }

    fs::path work_;
    std::vector<project::Project> corpus_;
    std::vector<project::Project> witnesses_;
    nlohmann::json summary_ = nlohmann::json::object();
};

} // namespace

int main(int argc, char **argv) {
    const bool keep = argc > 1 && std::string(argv[1]) == "--keep";
    const fs::path root = fs::temp_directory_path() / ("nv-acceptance-" + std::to_string(::getpid()));
    std::vector<Line> first;
    std::map<std::string, std::string> snaps[2];
    int failures = 0;
    try {
        for (int round = 0; round < 2; ++round) {
            const auto work = root / (round ? "b" : "a");
            Evaluation e(work);
            auto lines = e.run();
            snaps[round] = snapshot(work);
            if (round == 0) first = std::move(lines);
        }
    } catch (const std::exception &e) {
        std::cout << "FAIL acceptance run aborted: " << e.what() << "\n";
        return 1;
    }

    std::size_t differing = 0;
    for (const auto &[path, text] : snaps[0]) {
        const auto it = snaps[1].find(path);
        differing += it == snaps[1].end() || it->second != text;
    }
    differing += snaps[1].size() > snaps[0].size() ? snaps[1].size() - snaps[0].size() : 0;
    first.push_back({8, "reproducibility", differing == 0 && !snaps[0].empty(),
                     std::to_string(snaps[0].size()) + " files compared across two runs, " + std::to_string(differing) +
                         " differ (required 0)"});

    for (const auto &l : first) {
        std::cout << (l.pass ? "PASS" : "FAIL") << " criterion " << l.id << " " << l.name << ": " << l.detail << "\n";
        failures += !l.pass;
    }
    if (!keep) fs::remove_all(root);
    else std::cout << "artifacts kept in " << root.string() << "\n";
    return failures;
}

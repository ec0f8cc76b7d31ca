#include "nv/harness.hpp"

#include <functional>
#include <regex>
#include <sstream>

namespace nv::harness {

using mir::BasicBlock;
using mir::Function;
using mir::Instruction;
using mir::Opcode;
using mir::Operand;
using mir::TermKind;

namespace {

void for_each_operand(Function &f, const std::function<void(Operand &)> &fn) {
    for (auto &b : f.blocks) {
        for (auto &i : b.insts)
            for (auto &o : i.operands) fn(o);
        auto &t = b.term;
        if (t.kind == TermKind::Ret || t.kind == TermKind::CondBr) fn(t.operand);
        for (auto &a : t.target.args) fn(a);
        for (auto &a : t.else_target.args) fn(a);
    }
}

std::size_t uses_of(Function &f, const std::string &reg) {
    std::size_t n = 0;
    for_each_operand(f, [&](Operand &o) { n += o.is_reg() && o.reg == reg; });
    return n;
}

void rename_registers(Function &f) {
    std::set<std::string> names;
    for (const auto &b : f.blocks) {
        for (const auto &p : b.params) names.insert(p.name);
        for (const auto &i : b.insts) names.insert(i.dest);
    }
    std::set<std::string> wanted;
    std::map<std::string, std::string> ren;
    for (std::size_t k = 0; k < f.params.size(); ++k) {
        wanted.insert("a" + std::to_string(k));
        ren[f.params[k].name] = "a" + std::to_string(k);
    }
    for (auto &p : f.params) names.insert(p.name);
    int fresh = 0;
    for (const auto &n : names) {
        if (!wanted.count(n) || ren.count(n)) continue;
        std::string alt;
        do alt = "t" + std::to_string(++fresh);
        while (names.count(alt) || wanted.count(alt));
        ren[n] = alt;
    }
    auto map = [&](std::string &n) {
        if (auto it = ren.find(n); it != ren.end()) n = it->second;
    };
    for (auto &p : f.params) map(p.name);
    for (auto &b : f.blocks) {
        for (auto &p : b.params) map(p.name);
        for (auto &i : b.insts) map(i.dest);
    }
    for_each_operand(f, [&](Operand &o) {
        if (o.is_reg()) map(o.reg);
    });
}

void remove_inert_intrinsics(Function &f) {
    std::map<std::string, Operand> subst;
    for (auto &b : f.blocks) {
        std::vector<Instruction> kept;
        for (auto &i : b.insts) {
            const auto *info = i.op == Opcode::Intrinsic ? mir::find_intrinsic(i.intrinsic) : nullptr;
            if (info && info->inert && !i.operands.empty()) subst[i.dest] = i.operands[0];
            else kept.push_back(std::move(i));
        }
        b.insts = std::move(kept);
    }
    if (subst.empty()) return;
    for_each_operand(f, [&](Operand &o) {
        while (o.is_reg() && subst.count(o.reg)) o = subst.at(o.reg);
    });
}

bool is_trap_only(const BasicBlock *b) { return b && b->params.empty() && b->insts.empty() && b->term.kind == TermKind::Trap; }

/// `%c = intrinsic.gm.divcheck %d; condbr %c, <trap>, C` where C starts by dividing by %d.
void remove_divcheck_guards(Function &f) {
    for (std::size_t bi = 0; bi < f.blocks.size(); ++bi) {
        BasicBlock &b = f.blocks[bi];
        if (b.term.kind != TermKind::CondBr || !b.term.operand.is_reg()) continue;
        const std::string c = b.term.operand.reg;
        auto it = std::find_if(b.insts.begin(), b.insts.end(),
                               [&](const Instruction &i) { return i.dest == c && i.op == Opcode::Intrinsic && i.intrinsic == "gm.divcheck"; });
        if (it == b.insts.end()) continue;
        const Operand divisor = it->operands[0];
        if (!is_trap_only(f.find_block(b.term.target.label)) || !b.term.target.args.empty()) continue;
        const BasicBlock *cont = f.find_block(b.term.else_target.label);
        if (!cont || !b.term.else_target.args.empty() || cont->insts.empty()) continue;
        const Instruction &first = cont->insts.front();
        if (!mir::is_division(first.op) || first.operands[1] != divisor) continue;
        if (uses_of(f, c) != 1) continue;
        BasicBlock &bb = f.blocks[bi];
        bb.insts.erase(std::find_if(bb.insts.begin(), bb.insts.end(), [&](const Instruction &i) { return i.dest == c; }));
        bb.term.kind = TermKind::Br;
        bb.term.target = bb.term.else_target;
        bb.term.else_target = {};
        bb.term.operand = {};
    }
}

void drop_unreachable(Function &f) {
    const auto order = mir::reverse_post_order(f);
    std::vector<bool> live(f.blocks.size(), false);
    for (auto i : order) live[i] = true;
    std::vector<BasicBlock> kept;
    for (std::size_t i = 0; i < f.blocks.size(); ++i)
        if (live[i]) kept.push_back(std::move(f.blocks[i]));
    f.blocks = std::move(kept);
}

} // namespace

Function normalize_variant(const Function &f) {
    Function g = f;
    g.dialect = mir::DialectTag::Raw;
    rename_registers(g);
    remove_inert_intrinsics(g);
    remove_divcheck_guards(g);
    drop_unreachable(g);
    mir::require_valid(g);
    return g;
}

std::string version_name(const std::string &target, std::size_t k) { return target + "__v" + std::to_string(k); }

std::string print_wrapper(const Wrapper &w) {
    std::ostringstream os;
    os << "; N-of-N wrapper over " << w.versions << " versions\n";
    os << "wrapper @" << w.name << "(";
    for (std::size_t i = 0; i < w.params.size(); ++i)
        os << (i ? ", " : "") << "%" << w.params[i].name << ": " << mir::type_name(w.params[i].type);
    os << ") -> " << mir::type_name(w.ret) << " {\n";
    for (std::size_t k = 1; k <= w.versions; ++k) os << "  callv " << k << "\n";
    for (std::size_t k = 2; k <= w.versions; ++k) os << "  check " << k << "\n";
    os << "  ret v1\n}\n";
    return os.str();
}

Wrapper parse_wrapper(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::vector<std::pair<std::size_t, std::string>> lines;
    std::size_t no = 0;
    for (std::string line; std::getline(in, line);) {
        ++no;
        if (auto c = line.find(';'); c != std::string::npos) line.erase(c);
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        line = line.substr(b, line.find_last_not_of(" \t\r") - b + 1);
        lines.emplace_back(no, line);
    }
    auto bad = [](std::size_t line, const std::string &msg) { return ParseError(msg, line, 1); };
    if (lines.empty()) throw bad(1, "empty wrapper");

    static const std::regex head(R"(^wrapper @([A-Za-z_]\w*)\((.*)\) -> (\w+) \{$)");
    static const std::regex param(R"(^%([A-Za-z0-9_]+): (\w+)$)");
    std::smatch m;
    if (!std::regex_match(lines[0].second, m, head)) throw bad(lines[0].first, "expected wrapper header");
    Wrapper w;
    w.name = m[1];
    auto ret = mir::parse_type(std::string(m[3]));
    if (!ret) throw bad(lines[0].first, "unknown type " + std::string(m[3]));
    w.ret = *ret;
    std::string params = m[2];
    std::size_t pos = 0;
    while (!params.empty() && pos <= params.size()) {
        const auto comma = params.find(", ", pos);
        const std::string one = params.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        std::smatch pm;
        if (!std::regex_match(one, pm, param)) throw bad(lines[0].first, "malformed parameter '" + one + "'");
        auto t = mir::parse_type(std::string(pm[2]));
        if (!t) throw bad(lines[0].first, "unknown type " + std::string(pm[2]));
        w.params.push_back({pm[1], *t});
        if (comma == std::string::npos) break;
        pos = comma + 2;
    }

    std::size_t i = 1, calls = 0, checks = 0;
    for (; i < lines.size() && lines[i].second.rfind("callv ", 0) == 0; ++i) {
        if (lines[i].second != "callv " + std::to_string(calls + 1)) throw bad(lines[i].first, "versions must be called in order");
        ++calls;
    }
    for (; i < lines.size() && lines[i].second.rfind("check ", 0) == 0; ++i) {
        if (lines[i].second != "check " + std::to_string(checks + 2)) throw bad(lines[i].first, "checks must compare v1 with v2..vN in order");
        ++checks;
    }
    if (calls < 1 || checks + 1 != calls) throw bad(i < lines.size() ? lines[i].first : no, "wrapper needs N calls and N-1 checks");
    if (i >= lines.size() || lines[i].second != "ret v1") throw bad(i < lines.size() ? lines[i].first : no, "expected 'ret v1'");
    if (++i >= lines.size() || lines[i].second != "}") throw bad(i < lines.size() ? lines[i].first : no, "expected '}'");
    if (i + 1 != lines.size()) throw bad(lines[i + 1].first, "trailing text after wrapper");
    w.versions = calls;
    return w;
}

Bundle assemble_nversion(const project::Project &p, const Function &reference, const std::vector<Candidate> &variants) {
    if (variants.empty()) throw EmptyVariantList("N-version assembly needs at least one variant besides the reference");
    const auto sig = mir::signature_of(reference);
    for (std::size_t i = 0; i < variants.size(); ++i) {
        if (!variants[i].validated)
            throw UnvalidatedVariant("variant " + std::to_string(i + 1) + " has no passing validation record");
        if (mir::signature_of(variants[i].function) != sig)
            throw SignatureMismatch("variant " + std::to_string(i + 1) + " does not match " + mir::to_string(sig));
    }

    Bundle b;
    b.target = reference.name;
    auto add = [&](const Function &f, std::string provenance) {
        Function v = normalize_variant(f);
        v.name = version_name(b.target, b.versions.size() + 1);
        b.versions.push_back(std::move(v));
        b.provenance.push_back(std::move(provenance));
    };
    add(reference, "reference");
    for (const auto &c : variants) add(c.function, c.provenance);

    b.wrapper.name = b.target;
    b.wrapper.params = b.versions.front().params;
    b.wrapper.ret = reference.ret;
    b.wrapper.versions = b.versions.size();

    for (const auto &[name, f] : p.functions)
        if (name != b.target) b.functions.emplace(name, f);
    for (const auto &v : b.versions) b.functions.emplace(v.name, v);
    // Call sites keep naming the target, which is now the wrapper's name.
    b.call_sites = p.call_sites;
    return b;
}

Bundle assemble_from_report(const project::Project &p, const validate::ValidationReport &r, std::size_t max_versions) {
    std::vector<Candidate> cs;
    for (const auto *rec : r.passed()) {
        if (cs.size() + 1 >= max_versions) break;
        const auto &s = rec->source;
        cs.push_back({*rec->function, true,
                      "variant " + std::to_string(s.index) + " (" + s.provenance.provider + ", " + s.provenance.model_or_seed + ")"});
    }
    return assemble_nversion(p, p.reference(), cs);
}

nlohmann::json build_to_json(const BuildConfig &b) {
    nlohmann::json into = nlohmann::json::array();
    for (auto k : b.inject_into) into.push_back(k);
    return {{"level", b.level},
            {"inject", b.inject ? nlohmann::json(std::string(compiler::bug_name(*b.inject))) : nlohmann::json()},
            {"inject_into", into}};
}

BuildConfig build_from_json(const nlohmann::json &j) {
    BuildConfig b;
    if (j.is_null()) return b;
    try {
        b.level = j.value("level", 0);
        if (j.contains("inject") && !j.at("inject").is_null()) {
            const auto s = j.at("inject").get<std::string>();
            b.inject = compiler::parse_bug(s);
            if (!b.inject) throw ConfigError("unknown bug '" + s + "'");
        }
        if (j.contains("inject_into"))
            for (const auto &k : j.at("inject_into")) b.inject_into.insert(k.get<std::size_t>());
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError(std::string("build: ") + e.what());
    }
    if (b.level < 0 || b.level > compiler::kMaxLevel) throw ConfigError("build: level out of range");
    return b;
}

LoweredBundle lower_bundle(const Bundle &b, const BuildConfig &build) {
    LoweredBundle out;
    out.wrapper = b.wrapper;
    out.build = build;
    for (const auto &p : b.wrapper.params) out.params.push_back(p.type);
    for (std::size_t k = 1; k <= b.versions.size(); ++k) {
        const auto inject = build.inject_into.count(k) ? build.inject : std::nullopt;
        const Function opt = compiler::optimize(b.versions[k - 1], build.level, inject);
        out.versions.emplace_back(compiler::lower_to_bytecode(opt));
    }
    return out;
}

namespace {

std::string tuple_text(std::span<const mir::Value> args) {
    std::string s = "(";
    for (std::size_t i = 0; i < args.size(); ++i) s += (i ? ", " : "") + mir::to_string(args[i]);
    return s + ")";
}

} // namespace

WrapperRun run_wrapper(const LoweredBundle &b, std::span<const mir::Value> args, std::uint64_t fuel) {
    exec::check_args(b.params, args);
    std::vector<std::uint64_t> bits;
    for (const auto &a : args) bits.push_back(a.bits);

    WrapperRun r;
    for (std::size_t k = 0; k < b.versions.size(); ++k) {
        const exec::Outcome o = b.versions[k].run_bits(bits, fuel, false).outcome;
        r.versions.push_back(o);
        if (o.is_trap()) {
            r.outcome = o;
            r.detail = "trap in v" + std::to_string(k + 1) + ": " + exec::to_string(o) + " at input " + tuple_text(args);
            return r;
        }
    }
    const mir::Value first = r.versions.front().value;
    for (std::size_t k = 1; k < r.versions.size(); ++k) {
        if (r.versions[k].value == first) continue;
        r.outcome = exec::Outcome::trapped(TrapReason::NVersionDivergence);
        r.detail = "n-version divergence: v1=" + mir::to_string(first) + " v" + std::to_string(k + 1) + "=" +
                   mir::to_string(r.versions[k].value) + " at input " + tuple_text(args);
        return r;
    }
    r.outcome = r.versions.front();
    return r;
}

void write_bundle(const std::filesystem::path &dir, const Bundle &b, const BuildConfig &build,
                  const std::string &validation_digest) {
    std::filesystem::create_directories(dir);
    nlohmann::json versions = nlohmann::json::array();
    for (std::size_t k = 1; k <= b.versions.size(); ++k) {
        const std::string file = "v" + std::to_string(k) + ".mir";
        project::write_file(dir / file, mir::print_mir(b.versions[k - 1]));
        versions.push_back({{"index", k}, {"name", b.versions[k - 1].name}, {"file", file}, {"provenance", b.provenance[k - 1]}});
    }
    project::write_file(dir / "wrapper.mir", print_wrapper(b.wrapper));
    nlohmann::json sites = nlohmann::json::array();
    for (const auto &c : b.call_sites) sites.push_back({{"context", c.context}, {"callee", c.callee}});
    const nlohmann::json j{{"target", b.target},
                           {"n", b.versions.size()},
                           {"versions", versions},
                           {"wrapper", "wrapper.mir"},
                           {"call_sites", sites},
                           {"validation_digest", validation_digest},
                           {"build", build_to_json(build)}};
    project::write_file(dir / "bundle.json", j.dump(2) + "\n");
}

LoadedBundle load_bundle(const std::filesystem::path &dir) {
    LoadedBundle out;
    try {
        const auto j = nlohmann::json::parse(project::read_file(dir / "bundle.json"));
        Bundle &b = out.bundle;
        b.target = j.at("target").get<std::string>();
        for (const auto &v : j.at("versions")) {
            b.versions.push_back(mir::parse_mir(project::read_file(dir / v.at("file").get<std::string>())));
            b.provenance.push_back(v.value("provenance", std::string()));
        }
        b.wrapper = parse_wrapper(project::read_file(dir / j.value("wrapper", std::string("wrapper.mir"))));
        if (b.wrapper.versions != b.versions.size()) throw ConfigError("wrapper and bundle disagree on the number of versions");
        for (const auto &c : j.value("call_sites", nlohmann::json::array()))
            b.call_sites.push_back({c.at("context").get<std::string>(), c.at("callee").get<std::string>()});
        for (const auto &v : b.versions) b.functions.emplace(v.name, v);
        out.build = build_from_json(j.value("build", nlohmann::json()));
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError((dir / "bundle.json").string() + ": " + e.what());
    }
    return out;
}

} // namespace nv::harness

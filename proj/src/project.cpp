#include "nv/project.hpp"

#include <fstream>
#include <random>
#include <sstream>

namespace nv::project {

using mir::Type;
using mir::Value;

namespace {

std::vector<std::uint64_t> boundary_patterns(Type t) {
    const std::uint64_t m = mir::type_mask(t);
    const std::uint64_t min = (m >> 1) + 1, max = m >> 1;
    auto rep = [m](std::uint64_t byte) {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v = (v << 8) | byte;
        return v & m;
    };
    return {0, 1, m, min, max, (min + 1) & m, (max - 1) & m, 2, (m - 1) & m,
            rep(0x55), rep(0xAA), rep(0x0F), rep(0xF0), rep(0x33), rep(0xCC), 3};
}

Type parse_type_or_throw(const std::string &name) {
    if (auto t = mir::parse_type(name)) return *t;
    throw ConfigError("unknown type '" + name + "'");
}

template <typename T>
T field(const nlohmann::json &j, const char *key, const std::string &where) {
    if (!j.contains(key)) throw ConfigError(where + ": missing field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError(where + ": field '" + key + "': " + e.what());
    }
}

frontend::Dialect dialect_field(const nlohmann::json &j, const std::string &where) {
    const auto s = field<std::string>(j, "dialect", where);
    if (auto d = frontend::parse_dialect(s)) return *d;
    throw ConfigError(where + ": unknown dialect '" + s + "'");
}

} // namespace

TestSuite generate_suite(const mir::Function &reference, std::uint64_t seed, std::uint64_t fuel) {
    TestSuite s;
    s.function = reference.name;
    for (const auto &p : reference.params) s.params.push_back(p.type);
    s.ret = reference.ret;
    s.fuel = fuel;
    s.seed = seed;

    std::vector<std::vector<std::uint64_t>> tuples;
    for (std::size_t i = 0; i < 16; ++i) {
        std::vector<std::uint64_t> t;
        for (std::size_t j = 0; j < s.params.size(); ++j) t.push_back(boundary_patterns(s.params[j])[(i + 16 - j % 16) % 16]);
        tuples.push_back(std::move(t));
    }
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < 16; ++i) {
        std::vector<std::uint64_t> t;
        for (auto p : s.params) t.push_back(rng() & mir::type_mask(p));
        tuples.push_back(std::move(t));
    }

    const exec::MirEvaluator ev(reference);
    for (const auto &t : tuples) {
        TestCase c;
        for (std::size_t j = 0; j < t.size(); ++j) c.args.push_back(Value::of(s.params[j], t[j]));
        c.expected = ev.run_bits(t, fuel);
        s.cases.push_back(std::move(c));
    }
    return s;
}

nlohmann::json suite_to_json(const TestSuite &s) {
    nlohmann::json params = nlohmann::json::array();
    for (auto t : s.params) params.push_back(std::string(mir::type_name(t)));
    nlohmann::json cases = nlohmann::json::array();
    for (const auto &c : s.cases) {
        nlohmann::json args = nlohmann::json::array();
        for (const auto &a : c.args) args.push_back(a.as_signed());
        cases.push_back({{"args", args}, {"expected", exec::outcome_to_json(c.expected)}});
    }
    return {{"function", s.function},
            {"signature", {{"params", params}, {"ret", std::string(mir::type_name(s.ret))}}},
            {"fuel", s.fuel},
            {"seed", s.seed},
            {"cases", cases}};
}

TestSuite suite_from_json(const nlohmann::json &j) {
    const std::string where = "test suite";
    TestSuite s;
    s.function = field<std::string>(j, "function", where);
    const auto sig = field<nlohmann::json>(j, "signature", where);
    for (const auto &p : field<std::vector<std::string>>(sig, "params", where)) s.params.push_back(parse_type_or_throw(p));
    s.ret = parse_type_or_throw(field<std::string>(sig, "ret", where));
    s.fuel = field<std::uint64_t>(j, "fuel", where);
    s.seed = j.value("seed", std::uint64_t{0});
    if (s.fuel == 0) throw ConfigError(where + ": fuel must be positive");
    for (const auto &c : field<nlohmann::json>(j, "cases", where)) {
        TestCase tc;
        const auto args = field<std::vector<std::int64_t>>(c, "args", where);
        if (args.size() != s.params.size())
            throw ConfigError(where + ": case has " + std::to_string(args.size()) + " args, signature has " +
                              std::to_string(s.params.size()));
        for (std::size_t i = 0; i < args.size(); ++i) tc.args.push_back(Value::of_signed(s.params[i], args[i]));
        try {
            tc.expected = exec::outcome_from_json(field<nlohmann::json>(c, "expected", where), s.ret);
        } catch (const nlohmann::json::exception &e) {
            throw ConfigError(where + ": bad expected outcome: " + e.what());
        }
        s.cases.push_back(std::move(tc));
    }
    return s;
}

std::string read_file(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + p.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const fs::path &p, std::string_view text) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + p.string());
    out << text;
}

namespace {

nlohmann::json parse_json_file(const fs::path &p) {
    try {
        return nlohmann::json::parse(read_file(p));
    } catch (const nlohmann::json::parse_error &e) {
        throw ConfigError(p.string() + ": " + e.what());
    }
}

} // namespace

TestSuite load_suite(const fs::path &file) { return suite_from_json(parse_json_file(file)); }

void save_suite(const TestSuite &s, const fs::path &file) { write_file(file, suite_to_json(s).dump(2) + "\n"); }

equiv::Budget budget_from_json(const nlohmann::json &j) {
    equiv::Budget b;
    if (j.is_null()) return b;
    b.max_enumeration = j.value("max_enumeration", b.max_enumeration);
    b.per_input_fuel = j.value("per_input_fuel", b.per_input_fuel);
    if (j.contains("wall_limit_ms") && !j.at("wall_limit_ms").is_null())
        b.wall_limit_ms = j.at("wall_limit_ms").get<std::uint64_t>();
    if (b.max_enumeration == 0 || b.per_input_fuel == 0 || (b.wall_limit_ms && *b.wall_limit_ms == 0))
        throw ConfigError("budget values must be positive");
    return b;
}

nlohmann::json budget_to_json(const equiv::Budget &b) {
    nlohmann::json j{{"max_enumeration", b.max_enumeration}, {"per_input_fuel", b.per_input_fuel}};
    if (b.wall_limit_ms) j["wall_limit_ms"] = *b.wall_limit_ms;
    return j;
}

Manifest load_manifest(const fs::path &dir_or_file) {
    const fs::path file = fs::is_directory(dir_or_file) ? dir_or_file / "nv.json" : dir_or_file;
    if (!fs::exists(file)) throw ConfigError("no manifest at " + file.string());
    const auto j = parse_json_file(file);
    const std::string where = file.string();

    Manifest m;
    m.root = file.parent_path();
    m.project = field<std::string>(j, "project", where);
    m.target = field<std::string>(j, "target", where);
    m.test_suite = field<std::string>(j, "test_suite", where);
    for (const auto &s : field<nlohmann::json>(j, "sources", where))
        m.sources.push_back({field<std::string>(s, "path", where), dialect_field(s, where)});
    if (m.sources.empty()) throw ConfigError(where + ": no sources");
    if (j.contains("provider")) m.provider = j.at("provider");
    try {
        m.budget = budget_from_json(j.value("budget", nlohmann::json()));
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError(where + ": budget: " + e.what());
    }
    if (j.contains("call_sites"))
        for (const auto &c : j.at("call_sites"))
            m.call_sites.push_back({field<std::string>(c, "context", where), field<std::string>(c, "callee", where)});
    if (j.contains("pair")) m.pair = SourceFile{field<std::string>(j.at("pair"), "path", where), dialect_field(j.at("pair"), where)};
    if (j.contains("demo")) m.demo = j.at("demo");
    for (const auto &s : m.sources)
        if (!fs::exists(m.root / s.path)) throw ConfigError(where + ": missing source " + s.path.string());
    if (m.pair && !fs::exists(m.root / m.pair->path)) throw ConfigError(where + ": missing pair " + m.pair->path.string());
    return m;
}

Project load_project(const fs::path &dir_or_file) {
    Project p;
    p.manifest = load_manifest(dir_or_file);
    const auto &m = p.manifest;
    for (const auto &s : m.sources) {
        const std::string text = read_file(m.root / s.path);
        mir::Function f;
        try {
            f = frontend::compile_source(text, s.dialect);
        } catch (const Error &e) {
            throw ConfigError(s.path.string() + ": " + e.what());
        }
        if (p.functions.count(f.name)) throw ConfigError("function '" + f.name + "' defined in more than one source");
        p.function_sources[f.name] = text;
        p.function_dialects[f.name] = s.dialect;
        p.functions.emplace(f.name, std::move(f));
    }
    p.target = m.target;
    if (!p.functions.count(p.target)) throw ConfigError("target '" + p.target + "' is not defined by any source");
    p.call_sites = m.call_sites;
    for (const auto &c : p.call_sites)
        if (!p.functions.count(c.callee)) throw ConfigError("call site '" + c.context + "' names unknown function '" + c.callee + "'");

    p.suite = load_suite(m.root / m.test_suite);
    const auto sig = mir::signature_of(p.reference());
    if (p.suite.function != p.target || p.suite.params != sig.params || p.suite.ret != sig.ret)
        throw ConfigError("test suite does not match the signature of '" + p.target + "'");
    return p;
}

Project single_function_project(const std::string &source, frontend::Dialect d, const TestSuite &suite,
                                const equiv::Budget &budget) {
    Project p;
    mir::Function f = frontend::compile_source(source, d);
    p.target = f.name;
    p.manifest.project = f.name;
    p.manifest.target = f.name;
    p.manifest.budget = budget;
    p.function_sources[f.name] = source;
    p.function_dialects[f.name] = d;
    p.functions.emplace(f.name, std::move(f));
    p.suite = suite;
    return p;
}

} // namespace nv::project

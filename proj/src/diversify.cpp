#include "nv/diversify.hpp"
#include "nv/compiler.hpp"
#include "nv/project.hpp"

#include <regex>
#include <sstream>

namespace nv::diversify {

using frontend::Dialect;

std::string_view provider_kind_name(ProviderKind k) noexcept { return k == ProviderKind::Http ? "http" : "mock"; }

void ProviderConfig::check() const {
    if (n_variants < 1) throw ConfigError("provider: n_variants must be at least 1");
    if (!(temperature >= 0)) throw ConfigError("provider: temperature must be non-negative");
    if (!(timeout_s > 0)) throw ConfigError("provider: timeout must be positive");
    if (max_retries < 0) throw ConfigError("provider: max_retries must be non-negative");
    if (kind == ProviderKind::Http && endpoint.empty()) throw ConfigError("provider: http kind needs an endpoint");
}

namespace {

Dialect dialect_or_throw(const std::string &s) {
    if (auto d = frontend::parse_dialect(s)) return *d;
    throw ConfigError("provider: unknown dialect '" + s + "'");
}

} // namespace

ProviderConfig provider_from_json(const nlohmann::json &j) {
    ProviderConfig c;
    if (j.is_null()) return c;
    if (!j.is_object()) throw ConfigError("provider: expected an object");
    try {
        const std::string kind = j.value("kind", std::string("mock"));
        if (kind == "mock") c.kind = ProviderKind::Mock;
        else if (kind == "http") c.kind = ProviderKind::Http;
        else throw ConfigError("provider: unknown kind '" + kind + "'");
        c.endpoint = j.value("endpoint", c.endpoint);
        c.model = j.value("model", c.model);
        c.temperature = j.value("temperature", c.temperature);
        c.timeout_s = j.value("timeout_s", c.timeout_s);
        c.max_retries = j.value("max_retries", c.max_retries);
        c.backoff_ms = j.value("backoff_ms", c.backoff_ms);
        c.seed = j.value("seed", c.seed);
        c.n_variants = j.value("n_variants", c.n_variants);
        if (j.contains("in_dialect")) c.in_dialect = dialect_or_throw(j.at("in_dialect").get<std::string>());
        if (j.contains("out_dialect")) c.out_dialect = dialect_or_throw(j.at("out_dialect").get<std::string>());
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError(std::string("provider: ") + e.what());
    }
    c.check();
    return c;
}

nlohmann::json provider_to_json(const ProviderConfig &c) {
    nlohmann::json j{{"kind", std::string(provider_kind_name(c.kind))},
                     {"n_variants", c.n_variants},
                     {"in_dialect", std::string(frontend::dialect_name(c.in_dialect))},
                     {"out_dialect", std::string(frontend::dialect_name(c.out_dialect))}};
    if (c.kind == ProviderKind::Mock) {
        j["seed"] = c.seed;
    } else {
        j["endpoint"] = c.endpoint;
        j["model"] = c.model;
        j["temperature"] = c.temperature;
        j["timeout_s"] = c.timeout_s;
        j["max_retries"] = c.max_retries;
        j["backoff_ms"] = c.backoff_ms;
    }
    return j;
}

namespace {

constexpr std::string_view kCreate = "Create ";

std::string trim_newlines(std::string s) {
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r' || s.back() == ' ')) s.pop_back();
    std::size_t b = 0;
    while (b < s.size() && (s[b] == '\n' || s[b] == '\r')) ++b;
    return s.substr(b);
}

} // namespace

std::string build_prompt(const std::string &reference_source, const ProviderConfig &cfg) {
    std::string p = "The following code is a reference implementation of a function in " +
                    std::string(frontend::language_name(cfg.in_dialect)) + ".\n\n";
    p += trim_newlines(reference_source) + "\n\n";
    p += std::string(kCreate) + std::to_string(cfg.n_variants) + " substitute implementation(s) of the function";
    if (cfg.in_dialect != cfg.out_dialect)
        p += " in the " + std::string(frontend::language_name(cfg.out_dialect)) + " language";
    p += ", which are different but equivalent. It should be possible to directly replace the function with any "
         "substitute, and it should provide the same functionality.\n\n";
    p += "Do not output any other text apart from code. Do not create auxiliary or helper functions. Maintain the "
         "original function's signature.\n";
    return p;
}

std::string reference_from_prompt(const std::string &prompt) {
    const auto first = prompt.find("\n\n");
    const auto task = prompt.rfind("\n\n" + std::string(kCreate));
    if (first == std::string::npos || task == std::string::npos || task <= first) return {};
    return prompt.substr(first + 2, task - first - 2) + "\n";
}

std::string request_variants(const ProviderConfig &cfg, const std::string &prompt) {
    cfg.check();
    return cfg.kind == ProviderKind::Mock ? mock_response(cfg, prompt) : http_request(cfg, prompt);
}

namespace {

bool is_header(const std::string &line, Dialect d) {
    static const std::regex gm(R"(^\s*func\s+[A-Za-z_]\w*\s*\()");
    static const std::regex cm(R"(^\s*([A-Za-z_]\w*)\s+[A-Za-z_]\w*\s*\()");
    if (d == Dialect::Gm) return std::regex_search(line, gm);
    std::smatch m;
    if (!std::regex_search(line, m, cm)) return false;
    const std::string first = m[1];
    return first != "return" && first != "if" && first != "while" && first != "for" && first != "else";
}

std::vector<std::string> lines_of(const std::string &text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        out.push_back(line);
    }
    return out;
}

std::vector<std::string> fenced_blocks(const std::vector<std::string> &lines) {
    std::vector<std::string> out;
    bool inside = false;
    std::string cur;
    for (const auto &l : lines) {
        const bool fence = l.rfind("```", 0) == 0;
        if (fence && !inside) {
            inside = true;
            cur.clear();
        } else if (fence) {
            inside = false;
            out.push_back(cur);
        } else if (inside) {
            cur += l + "\n";
        }
    }
    if (inside && !cur.empty()) out.push_back(cur);
    return out;
}

/// Unfenced text: a candidate starts at each function header; text before the first is prose.
std::vector<std::string> header_split(const std::vector<std::string> &lines, Dialect d) {
    std::vector<std::string> out;
    bool started = false;
    for (const auto &l : lines) {
        if (is_header(l, d)) {
            out.emplace_back();
            started = true;
        }
        if (started) out.back() += l + "\n";
    }
    for (auto &c : out) c = trim_newlines(c) + "\n";
    return out;
}

} // namespace

std::vector<VariantSource> parse_variants(const std::string &raw, int n, Dialect dialect) {
    const auto lines = lines_of(raw);
    auto candidates = fenced_blocks(lines);
    if (candidates.empty()) candidates = header_split(lines, dialect);

    std::vector<VariantSource> out;
    for (const auto &c : candidates) {
        if (static_cast<int>(out.size()) >= n) break;
        VariantSource v;
        v.index = static_cast<int>(out.size()) + 1;
        v.source_text = c;
        v.dialect = dialect;
        int headers = 0;
        for (const auto &l : lines_of(c)) headers += is_header(l, dialect);
        if (headers != 1)
            v.prefailed = headers == 0 ? "no function definition"
                                       : "not a single function definition (" + std::to_string(headers) + " found)";
        out.push_back(std::move(v));
    }
    return out;
}

Batch diversify(const std::string &reference_source, const std::string &function, const ProviderConfig &cfg) {
    const std::string prompt = build_prompt(reference_source, cfg);
    const std::string raw = request_variants(cfg, prompt);
    Batch b;
    b.function = function;
    b.config = cfg;
    b.prompt_hash = compiler::sha256_hex(prompt);
    b.variants = parse_variants(raw, cfg.n_variants, cfg.out_dialect);
    for (auto &v : b.variants)
        v.provenance = {std::string(provider_kind_name(cfg.kind)),
                        cfg.kind == ProviderKind::Mock ? "seed " + std::to_string(cfg.seed) : cfg.model, b.prompt_hash};
    return b;
}

namespace {

std::string variant_file(const VariantSource &v) {
    return std::to_string(v.index) + std::string(frontend::file_extension(v.dialect));
}

} // namespace

void write_batch(const std::filesystem::path &dir, const Batch &b) {
    nlohmann::json vs = nlohmann::json::array();
    for (const auto &v : b.variants) {
        project::write_file(dir / variant_file(v), v.source_text);
        nlohmann::json j{{"index", v.index},
                         {"dialect", std::string(frontend::dialect_name(v.dialect))},
                         {"file", variant_file(v)},
                         {"provenance",
                          {{"provider", v.provenance.provider},
                           {"model_or_seed", v.provenance.model_or_seed},
                           {"prompt_hash", v.provenance.prompt_hash}}},
                         {"filters", nlohmann::json::array()}};
        if (v.prefailed) j["prefailed"] = *v.prefailed;
        vs.push_back(std::move(j));
    }
    const nlohmann::json j{{"function", b.function},
                           {"config", provider_to_json(b.config)},
                           {"prompt_hash", b.prompt_hash},
                           {"variants", vs}};
    project::write_file(dir / "batch.json", j.dump(2) + "\n");
}

Batch load_batch(const std::filesystem::path &dir) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(project::read_file(dir / "batch.json"));
        Batch b;
        b.function = j.at("function").get<std::string>();
        b.config = provider_from_json(j.at("config"));
        b.prompt_hash = j.value("prompt_hash", std::string());
        for (const auto &e : j.at("variants")) {
            VariantSource v;
            v.index = e.at("index").get<int>();
            v.dialect = dialect_or_throw(e.at("dialect").get<std::string>());
            v.source_text = project::read_file(dir / e.at("file").get<std::string>());
            const auto &p = e.at("provenance");
            v.provenance = {p.at("provider").get<std::string>(), p.at("model_or_seed").get<std::string>(),
                            p.at("prompt_hash").get<std::string>()};
            if (e.contains("prefailed")) v.prefailed = e.at("prefailed").get<std::string>();
            b.variants.push_back(std::move(v));
        }
        return b;
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError((dir / "batch.json").string() + ": " + e.what());
    }
}

} // namespace nv::diversify

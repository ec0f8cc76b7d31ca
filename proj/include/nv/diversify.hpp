#pragma once

// Diversification: prompt construction, variant providers (HTTP chat
// completion or a seeded mock), and response splitting.

#include "nv/error.hpp"
#include "nv/frontend.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace nv::diversify {

enum class ProviderKind { Http, Mock };

std::string_view provider_kind_name(ProviderKind k) noexcept;

struct ProviderConfig {
    ProviderKind kind = ProviderKind::Mock;
    std::string endpoint;        // http: full URL of the chat-completion route
    std::string model;
    double temperature = 1.0;
    double timeout_s = 30.0;
    int max_retries = 3;
    std::uint64_t backoff_ms = 500;  // first retry delay, doubled per attempt
    std::uint64_t seed = 1;      // mock only
    int n_variants = 10;
    frontend::Dialect in_dialect = frontend::Dialect::Cm;
    frontend::Dialect out_dialect = frontend::Dialect::Cm;

    /// Throws ConfigError on n_variants < 1, negative temperature, non-positive timeout.
    void check() const;
};

/// Missing fields keep their defaults. Throws ConfigError.
ProviderConfig provider_from_json(const nlohmann::json &j);
nlohmann::json provider_to_json(const ProviderConfig &c);

class ProviderError : public Error {
public:
    enum class Kind { Timeout, HttpStatus, MalformedResponse };

    ProviderError(Kind k, const std::string &what, int status = 0) : Error(what), kind_(k), status_(status) {}

    Kind kind() const noexcept { return kind_; }
    int status() const noexcept { return status_; }

private:
    Kind kind_;
    int status_;
};

struct Provenance {
    std::string provider;       // "mock" or "http"
    std::string model_or_seed;
    std::string prompt_hash;

    bool operator==(const Provenance &) const = default;
};

struct VariantSource {
    int index = 0;  // 1-based
    std::string source_text;
    frontend::Dialect dialect = frontend::Dialect::Cm;
    Provenance provenance;
    std::optional<std::string> prefailed;  // reason the candidate already fails compile-in-isolation

    bool operator==(const VariantSource &) const = default;
};

std::string build_prompt(const std::string &reference_source, const ProviderConfig &cfg);

/// The reference source embedded in a prompt built by build_prompt; empty if absent.
std::string reference_from_prompt(const std::string &prompt);

/// Raw response text. Throws ProviderError.
std::string request_variants(const ProviderConfig &cfg, const std::string &prompt);

/// Deterministic in (cfg.seed, cfg.n_variants, dialects, prompt).
std::string mock_response(const ProviderConfig &cfg, const std::string &prompt);

std::string http_request(const ProviderConfig &cfg, const std::string &prompt);

/// Fenced code blocks if any, else one candidate per function header. At most `n` records.
std::vector<VariantSource> parse_variants(const std::string &raw, int n, frontend::Dialect dialect);

struct Batch {
    std::string function;
    ProviderConfig config;
    std::string prompt_hash;
    std::vector<VariantSource> variants;
};

/// build_prompt + request_variants + parse_variants, stamping provenance.
Batch diversify(const std::string &reference_source, const std::string &function, const ProviderConfig &cfg);

/// Writes `<dir>/<k>.<ext>` for each variant and an initial batch.json.
void write_batch(const std::filesystem::path &dir, const Batch &b);

/// Reads a batch written by write_batch (statuses from batch.json are not restored).
Batch load_batch(const std::filesystem::path &dir);

} // namespace nv::diversify

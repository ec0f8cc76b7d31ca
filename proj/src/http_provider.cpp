#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "nv/diversify.hpp"

#include <chrono>
#include <cstdlib>
#include <regex>
#include <thread>

namespace nv::diversify {

namespace {

struct Url {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

Url split_url(const std::string &endpoint) {
    static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(endpoint, m, re)) throw ConfigError("provider: malformed endpoint '" + endpoint + "'");
    return {m[1], m[2].matched ? std::string(m[2]) : "/"};
}

std::string content_of(const std::string &body) {
    try {
        const auto j = nlohmann::json::parse(body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception &e) {
        throw ProviderError(ProviderError::Kind::MalformedResponse, std::string("malformed response: ") + e.what());
    }
}

} // namespace

std::string http_request(const ProviderConfig &cfg, const std::string &prompt) {
    const Url url = split_url(cfg.endpoint);
    httplib::Client cli(url.origin);
    const auto secs = std::chrono::duration<double>(cfg.timeout_s);
    const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(secs);
    cli.set_connection_timeout(timeout);
    cli.set_read_timeout(timeout);
    cli.set_write_timeout(timeout);

    httplib::Headers headers;
    if (const char *token = std::getenv("NV_PROVIDER_TOKEN"); token && *token)
        headers.emplace("Authorization", std::string("Bearer ") + token);
    const nlohmann::json body{{"model", cfg.model},
                              {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
                              {"temperature", cfg.temperature}};
    const std::string payload = body.dump();

    ProviderError last(ProviderError::Kind::Timeout, "no attempt made");
    for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
        if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(cfg.backoff_ms << (attempt - 1)));
        auto res = cli.Post(url.path, headers, payload, "application/json");
        if (!res) {
            last = ProviderError(ProviderError::Kind::Timeout,
                                 "request to " + cfg.endpoint + " failed: " + httplib::to_string(res.error()));
            continue;
        }
        if (res->status == 200) return content_of(res->body);
        last = ProviderError(ProviderError::Kind::HttpStatus, "provider answered HTTP " + std::to_string(res->status),
                             res->status);
        if (res->status != 429 && res->status < 500) break;
    }
    throw ProviderError(last.kind(),
                        std::string(last.what()) + " (after " + std::to_string(cfg.max_retries + 1) + " attempts)",
                        last.status());
}

} // namespace nv::diversify

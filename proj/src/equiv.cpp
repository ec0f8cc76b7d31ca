#include "nv/equiv.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <random>
#include <sstream>
#include <thread>

namespace nv::equiv {

using exec::MirEvaluator;
using exec::Outcome;
using mir::Type;
using mir::Value;

std::string_view verdict_kind_name(VerdictKind k) noexcept {
    switch (k) {
    case VerdictKind::Equivalent: return "equivalent";
    case VerdictKind::NotEquivalent: return "not_equivalent";
    case VerdictKind::Unknown: return "unknown";
    }
    return "?";
}

std::optional<std::uint64_t> domain_size(const std::vector<Type> &params) {
    unsigned bits = 0;
    for (auto t : params) bits += mir::bit_width(t);
    if (bits > 63) return std::nullopt;
    return std::uint64_t{1} << bits;
}

std::vector<std::uint64_t> decode_input(std::uint64_t index, const std::vector<Type> &params) {
    std::vector<std::uint64_t> out(params.size());
    for (std::size_t k = params.size(); k-- > 0;) {
        const unsigned w = mir::bit_width(params[k]);
        out[k] = index & mir::type_mask(params[k]);
        index = w >= 64 ? 0 : index >> w;
    }
    return out;
}

namespace {

void require_same_signature(const mir::Function &f, const mir::Function &g) {
    const auto a = mir::signature_of(f), b = mir::signature_of(g);
    if (a != b) throw SignatureMismatch("signature mismatch: " + mir::to_string(a) + " vs " + mir::to_string(b));
}

std::vector<Value> as_values(const std::vector<std::uint64_t> &bits, const std::vector<Type> &params) {
    std::vector<Value> out;
    for (std::size_t i = 0; i < bits.size(); ++i) out.push_back(Value::of(params[i], bits[i]));
    return out;
}

Verdict unknown(std::string reason) {
    Verdict v;
    v.kind = VerdictKind::Unknown;
    v.reason = std::move(reason);
    return v;
}

} // namespace

Verdict check_equivalence(const mir::Function &f, const mir::Function &g, const Budget &budget) {
    require_same_signature(f, g);
    const MirEvaluator ef(f), eg(g);
    const auto &params = ef.param_types();
    const auto size = domain_size(params);
    if (!size || *size > budget.max_enumeration) return unknown("domain_too_large");

    unsigned threads = budget.threads ? budget.threads : std::max(1u, std::thread::hardware_concurrency());
    const std::uint64_t min_chunk = 4096;
    threads = static_cast<unsigned>(std::min<std::uint64_t>(threads, std::max<std::uint64_t>(1, *size / min_chunk)));

    const auto start = std::chrono::steady_clock::now();
    std::atomic<std::uint64_t> first_mismatch{UINT64_MAX};
    std::atomic<bool> timed_out{false};
    const std::uint64_t fuel = budget.per_input_fuel;

    auto scan = [&](std::uint64_t lo, std::uint64_t hi) {
        std::vector<std::uint64_t> args(params.size());
        for (std::uint64_t i = lo; i < hi; ++i) {
            if ((i & 4095) == 0) {
                if (first_mismatch.load(std::memory_order_relaxed) < i || timed_out.load(std::memory_order_relaxed)) return;
                if (budget.wall_limit_ms) {
                    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
                    if (static_cast<std::uint64_t>(ms.count()) > *budget.wall_limit_ms) {
                        timed_out = true;
                        return;
                    }
                }
            }
            args = decode_input(i, params);
            const Outcome a = ef.run_bits(args, fuel);
            const Outcome b = eg.run_bits(args, fuel);
            if (!exec::outcomes_agree(a, b)) {
                std::uint64_t cur = first_mismatch.load();
                while (i < cur && !first_mismatch.compare_exchange_weak(cur, i)) {
                }
                return;
            }
        }
    };

    if (threads <= 1) {
        scan(0, *size);
    } else {
        std::vector<std::thread> pool;
        const std::uint64_t chunk = (*size + threads - 1) / threads;
        for (unsigned t = 0; t < threads; ++t) {
            const std::uint64_t lo = t * chunk, hi = std::min(*size, lo + chunk);
            if (lo < hi) pool.emplace_back(scan, lo, hi);
        }
        for (auto &th : pool) th.join();
    }

    const std::uint64_t idx = first_mismatch.load();
    if (idx != UINT64_MAX) {
        Verdict v;
        v.kind = VerdictKind::NotEquivalent;
        const auto bits = decode_input(idx, params);
        v.input = as_values(bits, params);
        v.reference = ef.run_bits(bits, fuel);
        v.variant = eg.run_bits(bits, fuel);
        return v;
    }
    if (timed_out) return unknown("wall_limit");
    Verdict v;
    v.kind = VerdictKind::Equivalent;
    return v;
}

Verdict sample_differential(const mir::Function &f, const mir::Function &g, std::uint64_t samples, std::uint64_t seed,
                            std::uint64_t fuel) {
    require_same_signature(f, g);
    const MirEvaluator ef(f), eg(g);
    const auto &params = ef.param_types();

    std::vector<std::vector<std::uint64_t>> tuples;
    auto boundary = [](Type t) {
        const std::uint64_t m = mir::type_mask(t);
        const std::uint64_t sign = (m >> 1) + 1;
        std::vector<std::uint64_t> v{0, 1, m, sign, sign - 1};
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
        return v;
    };
    if (params.size() <= 4) {
        tuples.emplace_back();
        for (auto t : params) {
            std::vector<std::vector<std::uint64_t>> next;
            for (const auto &prefix : tuples)
                for (auto b : boundary(t)) {
                    auto x = prefix;
                    x.push_back(b);
                    next.push_back(std::move(x));
                }
            tuples = std::move(next);
        }
    }
    std::mt19937_64 rng(seed);
    for (std::uint64_t s = 0; s < samples; ++s) {
        std::vector<std::uint64_t> x;
        for (auto t : params) x.push_back(rng() & mir::type_mask(t));
        tuples.push_back(std::move(x));
    }
    for (const auto &x : tuples) {
        const Outcome a = ef.run_bits(x, fuel), b = eg.run_bits(x, fuel);
        if (!exec::outcomes_agree(a, b)) {
            Verdict v;
            v.kind = VerdictKind::NotEquivalent;
            v.input = as_values(x, params);
            v.reference = a;
            v.variant = b;
            return v;
        }
    }
    return unknown("sampled");
}

std::string render(const Verdict &v, const mir::Function &reference) {
    std::ostringstream os;
    switch (v.kind) {
    case VerdictKind::Equivalent:
        os << "Transformation seems to be correct!\n";
        break;
    case VerdictKind::Unknown:
        os << "Unknown: " << v.reason << "\n";
        break;
    case VerdictKind::NotEquivalent:
        os << "ERROR: Value mismatch\n\nExample:\n";
        for (std::size_t i = 0; i < v.input.size(); ++i) {
            const std::string name = i < reference.params.size() ? reference.params[i].name : "arg" + std::to_string(i);
            os << mir::type_name(v.input[i].type) << " %" << name << " = " << mir::to_string(v.input[i]) << "\n";
        }
        os << "\nSource value: " << exec::to_string(v.reference) << "\n";
        os << "Target value: " << exec::to_string(v.variant) << "\n";
        break;
    }
    return os.str();
}

nlohmann::json verdict_to_json(const Verdict &v) {
    nlohmann::json j;
    j["verdict"] = std::string(verdict_kind_name(v.kind));
    if (v.kind == VerdictKind::NotEquivalent) {
        nlohmann::json in = nlohmann::json::array();
        for (const auto &x : v.input) in.push_back(x.as_signed());
        j["input"] = in;
        j["reference"] = exec::outcome_to_json(v.reference);
        j["variant"] = exec::outcome_to_json(v.variant);
    }
    if (v.kind == VerdictKind::Unknown) j["reason"] = v.reason;
    return j;
}

} // namespace nv::equiv
